//! ReLU generative networks `G(z) = W_d s(... s(W_1 z))` with `s = max(., 0)`.
//!
//! Besides the forward pass this module builds the two derived networks the
//! theory relies on (bias augmentation and the difference network), evaluates
//! the closed-form region-count bounds, and backpropagates the least-squares
//! recovery objective.

use num_bigint::BigUint;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, GcsError, Result};
use crate::linops::{norm2, RealMatrix};
use crate::sampling::SubsampledIsometry;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalActivation {
    #[default]
    None,
    Sigmoid,
}

impl std::str::FromStr for FinalActivation {
    type Err = GcsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FinalActivation::None),
            "sigmoid" => Ok(FinalActivation::Sigmoid),
            other => Err(GcsError::Domain(format!(
                "unknown final activation '{other}', expected none or sigmoid"
            ))),
        }
    }
}

/// Dense layer `x -> W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: RealMatrix,
    pub bias: Option<Vec<f64>>,
}

impl Layer {
    pub fn new(weight: RealMatrix) -> Self {
        Self { weight, bias: None }
    }

    pub fn with_bias(weight: RealMatrix, bias: Vec<f64>) -> Self {
        Self {
            weight,
            bias: Some(bias),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = (0..self.weight.rows())
            .map(|i| self.weight.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect();
        if let Some(b) = &self.bias {
            for (yi, bi) in y.iter_mut().zip(b) {
                *yi += bi;
            }
        }
        y
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Activations recorded during a forward pass.
#[derive(Clone, Debug)]
pub(crate) struct Trace {
    /// Input to each layer.
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each layer.
    pub pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Parameter gradients for one layer.
#[derive(Clone, Debug)]
pub(crate) struct LayerGrad {
    pub weight: RealMatrix,
    pub bias: Vec<f64>,
}

impl LayerGrad {
    pub fn zeros_like(layer: &Layer) -> Self {
        Self {
            weight: RealMatrix::zeros(layer.out_dim(), layer.in_dim()),
            bias: vec![0.0; layer.out_dim()],
        }
    }
}

/// ReLU after every layer but the last, `last` after the last.
pub(crate) fn forward_layers(layers: &[Layer], last: FinalActivation, z: &[f64]) -> Vec<f64> {
    let d = layers.len();
    let mut h = z.to_vec();
    for (i, layer) in layers.iter().enumerate() {
        let mut a = layer.affine(&h);
        if i + 1 < d {
            for v in &mut a {
                *v = v.max(0.0);
            }
        } else if last == FinalActivation::Sigmoid {
            for v in &mut a {
                *v = sigmoid(*v);
            }
        }
        h = a;
    }
    h
}

pub(crate) fn forward_trace(layers: &[Layer], last: FinalActivation, z: &[f64]) -> Trace {
    let d = layers.len();
    let mut inputs = Vec::with_capacity(d);
    let mut pre = Vec::with_capacity(d);
    let mut h = z.to_vec();
    for (i, layer) in layers.iter().enumerate() {
        let a = layer.affine(&h);
        let next: Vec<f64> = if i + 1 < d {
            a.iter().map(|v| v.max(0.0)).collect()
        } else if last == FinalActivation::Sigmoid {
            a.iter().map(|&v| sigmoid(v)).collect()
        } else {
            a.clone()
        };
        inputs.push(h);
        pre.push(a);
        h = next;
    }
    Trace {
        inputs,
        pre,
        output: h,
    }
}

/// Pulls `d_out` (gradient w.r.t. the network output) back to the input.
/// Parameter gradients are accumulated into `grads` when given. The ReLU
/// derivative at 0 is taken as 0.
pub(crate) fn backward_layers(
    layers: &[Layer],
    last: FinalActivation,
    trace: &Trace,
    d_out: &[f64],
    mut grads: Option<&mut [LayerGrad]>,
) -> Vec<f64> {
    let d = layers.len();
    let mut delta: Vec<f64> = if last == FinalActivation::Sigmoid {
        d_out
            .iter()
            .zip(&trace.output)
            .map(|(g, s)| g * s * (1.0 - s))
            .collect()
    } else {
        d_out.to_vec()
    };
    for i in (0..d).rev() {
        let layer = &layers[i];
        let input = &trace.inputs[i];
        if let Some(gs) = grads.as_deref_mut() {
            let g = &mut gs[i];
            for (r, &dr) in delta.iter().enumerate() {
                if dr == 0.0 {
                    continue;
                }
                g.bias[r] += dr;
                for (w, &x) in g.weight.row_mut(r).iter_mut().zip(input) {
                    *w += dr * x;
                }
            }
        }
        let mut back = vec![0.0; layer.in_dim()];
        for (r, &dr) in delta.iter().enumerate() {
            if dr == 0.0 {
                continue;
            }
            for (b, &w) in back.iter_mut().zip(layer.weight.row(r)) {
                *b += dr * w;
            }
        }
        if i > 0 {
            for (b, &p) in back.iter_mut().zip(&trace.pre[i - 1]) {
                if p <= 0.0 {
                    *b = 0.0;
                }
            }
        }
        delta = back;
    }
    delta
}

/// A `(k, d, n)`-generative network, optionally with biases and a final sigmoid.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerativeNetwork {
    layers: Vec<Layer>,
    final_activation: FinalActivation,
}

impl GenerativeNetwork {
    /// Validates the width chain `2 <= k_0 <= k_i`, consistent shapes, and that
    /// biases are present on every layer or on none.
    pub fn new(layers: Vec<Layer>, final_activation: FinalActivation) -> Result<Self> {
        Self::build(layers, final_activation, true)
    }

    fn build(layers: Vec<Layer>, final_activation: FinalActivation, width_floor: bool) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(GcsError::InvalidNetwork("network needs at least one layer".into()));
        };
        let k = first.in_dim();
        if k < 2 {
            return Err(GcsError::InvalidNetwork(format!("latent dimension {k} < 2")));
        }
        let mut prev = k;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() != prev {
                return Err(GcsError::InvalidNetwork(format!(
                    "layer {} expects input width {}, previous width is {prev}",
                    i + 1,
                    layer.in_dim()
                )));
            }
            if width_floor && layer.out_dim() < k {
                return Err(GcsError::InvalidNetwork(format!(
                    "layer {} width {} is below latent dimension {k}",
                    i + 1,
                    layer.out_dim()
                )));
            }
            if let Some(b) = &layer.bias {
                if b.len() != layer.out_dim() {
                    return Err(GcsError::InvalidNetwork(format!(
                        "layer {} bias has length {}, expected {}",
                        i + 1,
                        b.len(),
                        layer.out_dim()
                    )));
                }
                if b.iter().any(|x| !x.is_finite()) {
                    return Err(GcsError::InvalidNetwork(format!("layer {} bias is not finite", i + 1)));
                }
            }
            prev = layer.out_dim();
        }
        let with_bias = layers.iter().filter(|l| l.bias.is_some()).count();
        if with_bias != 0 && with_bias != layers.len() {
            return Err(GcsError::InvalidNetwork(
                "biases must be given for all layers or none".into(),
            ));
        }
        Ok(Self {
            layers,
            final_activation,
        })
    }

    /// Bias-free, linear-output network from weight matrices.
    pub fn from_weights(weights: Vec<RealMatrix>) -> Result<Self> {
        Self::new(weights.into_iter().map(Layer::new).collect(), FinalActivation::None)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn final_activation(&self) -> FinalActivation {
        self.final_activation
    }

    pub fn has_biases(&self) -> bool {
        self.layers[0].bias.is_some()
    }

    /// `(k_0, k_1, ..., k_d)`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].in_dim())
            .chain(self.layers.iter().map(Layer::out_dim))
            .collect()
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").out_dim()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn final_weight(&self) -> &RealMatrix {
        &self.layers.last().expect("nonempty").weight
    }

    /// Replaces the final weight matrix, keeping its shape.
    pub fn with_final_weight(&self, w: RealMatrix) -> Result<Self> {
        let old = self.final_weight();
        if old.shape() != w.shape() {
            return Err(GcsError::ShapeMismatch(format!(
                "final layer is {:?}, replacement is {:?}",
                old.shape(),
                w.shape()
            )));
        }
        let mut layers = self.layers.clone();
        layers.last_mut().expect("nonempty").weight = w;
        Self::new(layers, self.final_activation)
    }

    /// `G(z)`.
    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim() {
            return Err(dim_mismatch("latent code", self.latent_dim(), z.len()));
        }
        Ok(forward_layers(&self.layers, self.final_activation, z))
    }

    pub(crate) fn trace(&self, z: &[f64]) -> Trace {
        forward_trace(&self.layers, self.final_activation, z)
    }

    /// `J(z)^T v`, the pullback of an output-space vector to latent space.
    pub fn pullback(&self, z: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim() {
            return Err(dim_mismatch("latent code", self.latent_dim(), z.len()));
        }
        if v.len() != self.output_dim() {
            return Err(dim_mismatch("output cotangent", self.output_dim(), v.len()));
        }
        let trace = self.trace(z);
        Ok(backward_layers(&self.layers, self.final_activation, &trace, v, None))
    }

    /// Smallest absolute pre-activation over the hidden ReLU layers at `z`;
    /// `+inf` for single-layer networks.
    pub fn kink_margin(&self, z: &[f64]) -> f64 {
        let trace = self.trace(z);
        let d = self.layers.len();
        trace.pre[..d - 1]
            .iter()
            .flatten()
            .map(|v| v.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Folds biases into the weights: `W~_i = [[W_i, b_i], [0, 1]]`, with the
/// last row dropped in the final layer, so that `G(z) = G~([z; 1])`.
pub fn augment_biases(g: &GenerativeNetwork) -> Result<GenerativeNetwork> {
    if !g.has_biases() {
        return Err(GcsError::NoBiases);
    }
    let d = g.depth();
    let layers = g
        .layers()
        .iter()
        .enumerate()
        .map(|(i, layer)| {
            let (rows, cols) = layer.weight.shape();
            let bias = layer.bias.as_ref().expect("checked above");
            let out_rows = if i + 1 < d { rows + 1 } else { rows };
            Layer::new(RealMatrix::from_fn(out_rows, cols + 1, |r, c| match (r < rows, c < cols) {
                (true, true) => layer.weight[(r, c)],
                (true, false) => bias[r],
                (false, true) => 0.0,
                (false, false) => 1.0,
            }))
        })
        .collect();
    GenerativeNetwork::new(layers, g.final_activation())
}

/// Network `G_bar([x; y]) = G(x) - G(y)`: block-diagonal copies of each hidden
/// layer and final layer `[W_d, -W_d]`.
pub fn difference_network(g: &GenerativeNetwork) -> Result<GenerativeNetwork> {
    if g.has_biases() {
        return Err(GcsError::Unsupported(
            "difference network of a biased network; augment biases first".into(),
        ));
    }
    if g.final_activation() != FinalActivation::None {
        return Err(GcsError::Unsupported(
            "difference network of a network with a final activation".into(),
        ));
    }
    let d = g.depth();
    let layers = g
        .layers()
        .iter()
        .enumerate()
        .map(|(i, layer)| {
            let w = &layer.weight;
            let (rows, cols) = w.shape();
            if i + 1 < d {
                Layer::new(RealMatrix::from_fn(2 * rows, 2 * cols, |r, c| {
                    match (r < rows, c < cols) {
                        (true, true) => w[(r, c)],
                        (false, false) => w[(r - rows, c - cols)],
                        _ => 0.0,
                    }
                }))
            } else {
                Layer::new(RealMatrix::from_fn(rows, 2 * cols, |r, c| {
                    if c < cols {
                        w[(r, c)]
                    } else {
                        -w[(r, c - cols)]
                    }
                }))
            }
        })
        .collect();
    // the output width may be below the doubled latent dimension
    GenerativeNetwork::build(layers, FinalActivation::None, false)
}

/// `k * sum_{i=1}^{d-1} ln(2 e k_i / k)`, the log of the cone-count bound for
/// widths `(k_0, ..., k_d)`.
pub fn log_region_bound(widths: &[usize]) -> f64 {
    if widths.len() < 3 {
        return 0.0;
    }
    let k = widths[0] as f64;
    let hidden = &widths[1..widths.len() - 1];
    k * hidden
        .iter()
        .map(|&ki| (2.0 * std::f64::consts::E * ki as f64 / k).ln())
        .sum::<f64>()
}

/// `2^k * C(n, k)`, bounding how many orthants a `k`-dimensional subspace of
/// `R^n` can meet.
pub fn orthant_bound(n: usize, k: usize) -> Result<BigUint> {
    if k == 0 || k > n {
        return Err(GcsError::Domain(format!("orthant_bound needs 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let mut binom = BigUint::from(1u32);
    for i in 0..k {
        binom = binom * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    Ok(binom << k)
}

/// `1/2 ||A G(z) - b||^2` and its gradient in `z`.
///
/// The gradient is `J(z)^T Re(A* (A G(z) - b))`.
pub fn objective_value_grad(
    g: &GenerativeNetwork,
    a: &SubsampledIsometry,
    b: &[Complex64],
    z: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if z.len() != g.latent_dim() {
        return Err(dim_mismatch("latent code", g.latent_dim(), z.len()));
    }
    if g.output_dim() != a.n() {
        return Err(dim_mismatch("measurement operator width", g.output_dim(), a.n()));
    }
    if b.len() != a.num_rows() {
        return Err(dim_mismatch("measurement vector", a.num_rows(), b.len()));
    }
    let trace = g.trace(z);
    let mut residual = a.apply(&trace.output)?;
    for (r, bi) in residual.iter_mut().zip(b) {
        *r -= bi;
    }
    let value = 0.5 * norm2(&residual).powi(2);
    let d_out = a.apply_adjoint_real(&residual)?;
    let grad = backward_layers(g.layers(), g.final_activation(), &trace, &d_out, None);
    Ok((value, grad))
}

/// JSON weight file: `{widths, final_activation, layers: [{rows, cols, data, bias?}]}`.
///
/// `encoder` is present only for files written by VAE training.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightFile {
    pub widths: Vec<usize>,
    pub final_activation: FinalActivation,
    pub layers: Vec<LayerRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder: Option<Vec<LayerRecord>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerRecord {
    #[serde(flatten)]
    pub weight: RealMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<f64>>,
}

impl From<&Layer> for LayerRecord {
    fn from(l: &Layer) -> Self {
        Self {
            weight: l.weight.clone(),
            bias: l.bias.clone(),
        }
    }
}

impl From<LayerRecord> for Layer {
    fn from(r: LayerRecord) -> Self {
        Self {
            weight: r.weight,
            bias: r.bias,
        }
    }
}

impl From<&GenerativeNetwork> for WeightFile {
    fn from(g: &GenerativeNetwork) -> Self {
        Self {
            widths: g.widths(),
            final_activation: g.final_activation(),
            layers: g.layers().iter().map(LayerRecord::from).collect(),
            encoder: None,
        }
    }
}

impl TryFrom<WeightFile> for GenerativeNetwork {
    type Error = GcsError;

    fn try_from(f: WeightFile) -> Result<Self> {
        let g = GenerativeNetwork::new(
            f.layers.into_iter().map(Layer::from).collect(),
            f.final_activation,
        )?;
        if g.widths() != f.widths {
            return Err(GcsError::InvalidNetwork(format!(
                "declared widths {:?} disagree with layer shapes {:?}",
                f.widths,
                g.widths()
            )));
        }
        Ok(g)
    }
}

impl WeightFile {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }
}

impl GenerativeNetwork {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        WeightFile::load(path)?.try_into()
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        WeightFile::from(self).save(path)
    }
}

/// Seeded network with iid `N(0, 1/fan_in)` weights and no biases.
pub fn random_network(widths: &[usize], seed: u64) -> Result<GenerativeNetwork> {
    if widths.len() < 2 {
        return Err(GcsError::InvalidNetwork("need at least two widths".into()));
    }
    let mut rng = crate::rng::rng_from_seed(seed);
    let weights = widths
        .windows(2)
        .map(|w| crate::rng::gaussian_matrix(&mut rng, w[1], w[0]).scaled(1.0 / (w[0] as f64).sqrt()))
        .collect();
    GenerativeNetwork::from_weights(weights)
}
