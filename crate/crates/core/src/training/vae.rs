//! Fully connected VAE trained by Adam on the ELBO.

use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::coherence::regularizer;
use crate::error::{GcsError, Result};
use crate::gnn::{
    backward_layers, forward_trace, sigmoid, FinalActivation, GenerativeNetwork, Layer, LayerGrad, LayerRecord,
    WeightFile,
};
use crate::linops::RealMatrix;
use crate::rng::{derive_seed, derive_seed_path, gaussian_matrix, gaussian_vec, rng_from_seed, GcsRng};
use crate::transforms::UnitaryOperator;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::Dataset;

/// Decoder widths `(k, k_1, ..., n)` and output activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub widths: Vec<usize>,
    pub final_activation: FinalActivation,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub reg_weight: f64,
    pub lambda: f64,
    pub seed: u64,
    pub d_op: Arc<UnitaryOperator>,
}

impl TrainConfig {
    /// Learning rate 0.001, batch 64, penalty weight 1e4, `lambda = 1`.
    pub fn new(d_op: Arc<UnitaryOperator>, epochs: usize, seed: u64) -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 64,
            epochs,
            reg_weight: 1e4,
            lambda: 1.0,
            seed,
            d_op,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VaeModel {
    /// `n -> k_{d-1} -> ... -> k_1 -> 2k`; the head emits `(mu, log sigma^2)`.
    pub encoder: Vec<Layer>,
    pub decoder: GenerativeNetwork,
    /// Mean training objective per epoch.
    pub epoch_losses: Vec<f64>,
}

impl VaeModel {
    /// `(mu, log sigma^2)` for an input.
    pub fn encode(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let head = forward_trace(&self.encoder, FinalActivation::None, x).output;
        let k = self.decoder.latent_dim();
        (head[..k].to_vec(), head[k..].to_vec())
    }

    pub fn weight_file(&self) -> WeightFile {
        let mut f = WeightFile::from(&self.decoder);
        f.encoder = Some(self.encoder.iter().map(LayerRecord::from).collect());
        f
    }
}

impl TryFrom<WeightFile> for VaeModel {
    type Error = GcsError;

    fn try_from(mut f: WeightFile) -> Result<Self> {
        let records = f
            .encoder
            .take()
            .ok_or_else(|| GcsError::InvalidNetwork("weight file has no encoder".into()))?;
        let encoder: Vec<Layer> = records.into_iter().map(Layer::from).collect();
        let decoder = GenerativeNetwork::try_from(f)?;
        let mut prev = decoder.output_dim();
        for (i, l) in encoder.iter().enumerate() {
            if l.in_dim() != prev {
                return Err(GcsError::InvalidNetwork(format!(
                    "encoder layer {} expects width {}, previous width is {prev}",
                    i + 1,
                    l.in_dim()
                )));
            }
            prev = l.out_dim();
        }
        if prev != 2 * decoder.latent_dim() {
            return Err(GcsError::InvalidNetwork(format!(
                "encoder emits {prev} values, expected {}",
                2 * decoder.latent_dim()
            )));
        }
        Ok(Self {
            encoder,
            decoder,
            epoch_losses: Vec::new(),
        })
    }
}

fn he_layer(rng: &mut GcsRng, fan_in: usize, fan_out: usize) -> Layer {
    let w = gaussian_matrix(rng, fan_out, fan_in).scaled((2.0 / fan_in as f64).sqrt());
    Layer::with_bias(w, vec![0.0; fan_out])
}

fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

struct Params {
    layers: Vec<Layer>,
    states: Vec<(AdamState, AdamState)>,
}

impl Params {
    fn new(layers: Vec<Layer>) -> Self {
        let states = layers
            .iter()
            .map(|l| (AdamState::new(l.weight.data().len()), AdamState::new(l.out_dim())))
            .collect();
        Self { layers, states }
    }

    fn zero_grads(&self) -> Vec<LayerGrad> {
        self.layers.iter().map(LayerGrad::zeros_like).collect()
    }

    fn step(&mut self, grads: &[LayerGrad], cfg: &AdamConfig) -> Result<()> {
        for ((layer, (sw, sb)), g) in self.layers.iter_mut().zip(&mut self.states).zip(grads) {
            adam_step(layer.weight.data_mut(), g.weight.data(), sw, cfg)?;
            let bias = layer.bias.as_mut().expect("VAE layers carry biases");
            adam_step(bias, &g.bias, sb, cfg)?;
        }
        Ok(())
    }
}

fn scale_grads(grads: &mut [LayerGrad], s: f64) {
    for g in grads {
        g.weight.data_mut().iter_mut().for_each(|v| *v *= s);
        g.bias.iter_mut().for_each(|v| *v *= s);
    }
}

/// Negative ELBO of one sample; accumulates parameter gradients.
fn sample_loss(
    enc: &[Layer],
    dec: &[Layer],
    last: FinalActivation,
    x: &[f64],
    eps: &[f64],
    enc_grads: &mut [LayerGrad],
    dec_grads: &mut [LayerGrad],
) -> f64 {
    let k = eps.len();
    let enc_trace = forward_trace(enc, FinalActivation::None, x);
    let (mu, lv) = enc_trace.output.split_at(k);
    let sd: Vec<f64> = lv.iter().map(|l| (0.5 * l).exp()).collect();
    let z: Vec<f64> = (0..k).map(|i| mu[i] + sd[i] * eps[i]).collect();

    // decoder run without its output activation: the loss is written in logits
    let dec_trace = forward_trace(dec, FinalActivation::None, &z);
    let a = &dec_trace.output;
    let (recon, d_a): (f64, Vec<f64>) = match last {
        FinalActivation::Sigmoid => (
            a.iter().zip(x).map(|(&ai, &xi)| softplus(ai) - xi * ai).sum(),
            a.iter().zip(x).map(|(&ai, &xi)| sigmoid(ai) - xi).collect(),
        ),
        FinalActivation::None => (
            a.iter().zip(x).map(|(&ai, &xi)| (ai - xi) * (ai - xi)).sum(),
            a.iter().zip(x).map(|(&ai, &xi)| 2.0 * (ai - xi)).collect(),
        ),
    };
    let g_z = backward_layers(dec, FinalActivation::None, &dec_trace, &d_a, Some(dec_grads));

    let kl: f64 = 0.5 * (0..k).map(|i| mu[i] * mu[i] + sd[i] * sd[i] - 1.0 - lv[i]).sum::<f64>();
    let mut d_head = vec![0.0; 2 * k];
    for i in 0..k {
        d_head[i] = g_z[i] + mu[i];
        d_head[k + i] = 0.5 * g_z[i] * eps[i] * sd[i] + 0.5 * (sd[i] * sd[i] - 1.0);
    }
    backward_layers(enc, FinalActivation::None, &enc_trace, &d_head, Some(enc_grads));
    recon + kl
}

/// Trains encoder and decoder by Adam on the negative ELBO, adding
/// `reg_weight * rho(W_d)` for the final decoder weight when `regularized`.
///
/// Reconstruction is binary cross-entropy for a sigmoid output and squared
/// error otherwise. Weights start from `N(0, 2/fan_in)`, biases at zero.
pub fn train_vae(data: &Dataset, arch: &Architecture, config: &TrainConfig, regularized: bool) -> Result<VaeModel> {
    if data.is_empty() {
        return Err(GcsError::EmptyDataset);
    }
    let widths = &arch.widths;
    if widths.len() < 2 || widths[0] == 0 {
        return Err(GcsError::InvalidNetwork(format!("bad decoder widths {widths:?}")));
    }
    let n = *widths.last().expect("nonempty");
    if n != data.n {
        return Err(GcsError::DimensionMismatch(format!(
            "architecture output {n} but data dimension {}",
            data.n
        )));
    }
    if regularized && config.d_op.n() != n {
        return Err(GcsError::DimensionMismatch(format!(
            "regularizer operator has size {} but output dimension is {n}",
            config.d_op.n()
        )));
    }
    if !(config.learning_rate > 0.0) || config.batch_size == 0 {
        return Err(GcsError::Domain("learning rate must be positive and batch size at least 1".into()));
    }
    let k = widths[0];
    let mut init = rng_from_seed(derive_seed(config.seed, 0));
    let dec_layers: Vec<Layer> = widths.windows(2).map(|w| he_layer(&mut init, w[0], w[1])).collect();
    let mut enc_widths: Vec<usize> = widths[1..].iter().rev().copied().collect();
    enc_widths.push(2 * k);
    let enc_layers: Vec<Layer> = enc_widths.windows(2).map(|w| he_layer(&mut init, w[0], w[1])).collect();
    // validates the decoder shape once up front
    GenerativeNetwork::new(dec_layers.clone(), arch.final_activation)?;

    let mut enc = Params::new(enc_layers);
    let mut dec = Params::new(dec_layers);
    let adam = AdamConfig::with_lr(config.learning_rate);
    let penalize = regularized && config.reg_weight != 0.0;
    let mut noise = rng_from_seed(derive_seed(config.seed, 1));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng_from_seed(derive_seed_path(config.seed, &[2, epoch as u64])));
        let mut total = 0.0;
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            let mut enc_grads = enc.zero_grads();
            let mut dec_grads = dec.zero_grads();
            let mut loss = 0.0;
            for &i in batch {
                let eps = gaussian_vec(&mut noise, k);
                loss += sample_loss(
                    &enc.layers,
                    &dec.layers,
                    arch.final_activation,
                    &data.samples[i],
                    &eps,
                    &mut enc_grads,
                    &mut dec_grads,
                );
            }
            let b = batch.len() as f64;
            loss /= b;
            scale_grads(&mut enc_grads, 1.0 / b);
            scale_grads(&mut dec_grads, 1.0 / b);
            if penalize {
                let w: &RealMatrix = &dec.layers.last().expect("nonempty").weight;
                let (rho, g) = regularizer(w, &config.d_op, config.lambda)?;
                loss += config.reg_weight * rho;
                let last = dec_grads.last_mut().expect("nonempty");
                for (a, &v) in last.weight.data_mut().iter_mut().zip(g.data()) {
                    *a += config.reg_weight * v;
                }
            }
            if !loss.is_finite() {
                return Err(GcsError::NonfiniteLoss { loss, epoch, step });
            }
            enc.step(&enc_grads, &adam)?;
            dec.step(&dec_grads, &adam)?;
            total += loss * b;
        }
        epoch_losses.push(total / data.len() as f64);
    }

    Ok(VaeModel {
        encoder: enc.layers,
        decoder: GenerativeNetwork::new(dec.layers, arch.final_activation)?,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::network_coherence_heuristic;
    use crate::training::synth_dataset;
    use crate::transforms::dct2_operator;

    fn config(n: usize, epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig::new(Arc::new(dct2_operator(n)), epochs, seed)
    }

    fn arch(widths: &[usize]) -> Architecture {
        Architecture {
            widths: widths.to_vec(),
            final_activation: FinalActivation::Sigmoid,
        }
    }

    #[test]
    fn sample_gradient_matches_finite_differences() {
        for last in [FinalActivation::Sigmoid, FinalActivation::None] {
            let mut rng = rng_from_seed(3);
            let he = |rng: &mut GcsRng, i: usize, o: usize| {
                let mut l = he_layer(rng, i, o);
                l.bias = Some(gaussian_vec(rng, o).iter().map(|b| 0.1 * b).collect());
                l
            };
            let enc = vec![he(&mut rng, 6, 5), he(&mut rng, 5, 4)];
            let dec = vec![he(&mut rng, 2, 5), he(&mut rng, 5, 6)];
            let x: Vec<f64> = (0..6).map(|i| 0.1 + 0.13 * i as f64).collect();
            let eps = [0.3, -1.1];
            let mut eg: Vec<LayerGrad> = enc.iter().map(LayerGrad::zeros_like).collect();
            let mut dg: Vec<LayerGrad> = dec.iter().map(LayerGrad::zeros_like).collect();
            sample_loss(&enc, &dec, last, &x, &eps, &mut eg, &mut dg);
            let loss = |enc: &[Layer], dec: &[Layer]| {
                let mut a: Vec<LayerGrad> = enc.iter().map(LayerGrad::zeros_like).collect();
                let mut b: Vec<LayerGrad> = dec.iter().map(LayerGrad::zeros_like).collect();
                sample_loss(enc, dec, last, &x, &eps, &mut a, &mut b)
            };
            let h = 1e-6;
            for (which, grads) in [(0, &eg), (1, &dg)] {
                for li in 0..2 {
                    let len = if which == 0 { enc[li].weight.data().len() } else { dec[li].weight.data().len() };
                    for idx in 0..len {
                        let mut e2 = enc.clone();
                        let mut d2 = dec.clone();
                        let mut e3 = enc.clone();
                        let mut d3 = dec.clone();
                        if which == 0 {
                            e2[li].weight.data_mut()[idx] += h;
                            e3[li].weight.data_mut()[idx] -= h;
                        } else {
                            d2[li].weight.data_mut()[idx] += h;
                            d3[li].weight.data_mut()[idx] -= h;
                        }
                        let num = (loss(&e2, &d2) - loss(&e3, &d3)) / (2.0 * h);
                        let ana = grads[li].weight.data()[idx];
                        assert!((num - ana).abs() <= 1e-5 * (1.0 + num.abs()), "{last:?} {which} {li} {idx}: {num} vs {ana}");
                    }
                    let blen = if which == 0 { enc[li].out_dim() } else { dec[li].out_dim() };
                    for idx in 0..blen {
                        let mut e2 = enc.clone();
                        let mut d2 = dec.clone();
                        let mut e3 = enc.clone();
                        let mut d3 = dec.clone();
                        if which == 0 {
                            e2[li].bias.as_mut().unwrap()[idx] += h;
                            e3[li].bias.as_mut().unwrap()[idx] -= h;
                        } else {
                            d2[li].bias.as_mut().unwrap()[idx] += h;
                            d3[li].bias.as_mut().unwrap()[idx] -= h;
                        }
                        let num = (loss(&e2, &d2) - loss(&e3, &d3)) / (2.0 * h);
                        let ana = grads[li].bias[idx];
                        assert!((num - ana).abs() <= 1e-5 * (1.0 + num.abs()), "{last:?} bias {which} {li} {idx}: {num} vs {ana}");
                    }
                }
            }
        }
    }

    #[test]
    fn loss_decreases() {
        let data = synth_dataset(64, 4, 2000, 3);
        let m = train_vae(&data, &arch(&[8, 32, 32, 64]), &config(64, 3, 4), false).unwrap();
        assert_eq!(m.epoch_losses.len(), 3);
        assert!(m.epoch_losses[2] < m.epoch_losses[0], "{:?}", m.epoch_losses);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let data = synth_dataset(16, 2, 100, 1);
        let a = train_vae(&data, &arch(&[4, 8, 16]), &config(16, 2, 9), true).unwrap();
        let b = train_vae(&data, &arch(&[4, 8, 16]), &config(16, 2, 9), true).unwrap();
        assert_eq!(a, b);
        let c = train_vae(&data, &arch(&[4, 8, 16]), &config(16, 2, 10), true).unwrap();
        assert_ne!(a.decoder, c.decoder);
    }

    #[test]
    fn zero_penalty_matches_unregularized() {
        let data = synth_dataset(16, 2, 100, 1);
        let mut cfg = config(16, 2, 9);
        cfg.reg_weight = 0.0;
        let a = train_vae(&data, &arch(&[4, 8, 16]), &cfg, true).unwrap();
        let b = train_vae(&data, &arch(&[4, 8, 16]), &cfg, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn penalty_lowers_heuristic_coherence() {
        let data = synth_dataset(64, 4, 1000, 21);
        let cfg = config(64, 5, 22);
        let a = arch(&[8, 32, 64]);
        let plain = train_vae(&data, &a, &cfg, false).unwrap();
        let reg = train_vae(&data, &a, &cfg, true).unwrap();
        let h_plain = network_coherence_heuristic(&plain.decoder, &cfg.d_op, true).unwrap();
        let h_reg = network_coherence_heuristic(&reg.decoder, &cfg.d_op, true).unwrap();
        assert!(h_reg < h_plain, "regularized {h_reg}, plain {h_plain}");
    }

    #[test]
    fn errors() {
        let empty = Dataset {
            samples: vec![],
            n: 16,
            labels: None,
        };
        assert!(matches!(
            train_vae(&empty, &arch(&[4, 16]), &config(16, 1, 0), false),
            Err(GcsError::EmptyDataset)
        ));
        let data = synth_dataset(16, 2, 10, 1);
        assert!(matches!(
            train_vae(&data, &arch(&[4, 12]), &config(16, 1, 0), false),
            Err(GcsError::DimensionMismatch(_))
        ));
        let mut cfg = config(16, 1, 0);
        cfg.reg_weight = f64::MAX;
        assert!(matches!(
            train_vae(&data, &arch(&[4, 16]), &cfg, true),
            Err(GcsError::NonfiniteLoss { epoch: 0, step: 0, .. })
        ));
    }

    #[test]
    fn weight_file_carries_encoder() {
        let data = synth_dataset(16, 2, 10, 1);
        let m = train_vae(&data, &arch(&[4, 8, 16]), &config(16, 1, 0), false).unwrap();
        let f = m.weight_file();
        assert_eq!(f.encoder.as_ref().unwrap().len(), 2);
        let g: GenerativeNetwork = f.clone().try_into().unwrap();
        assert_eq!(g, m.decoder);
        let back = VaeModel::try_from(f.clone()).unwrap();
        assert_eq!((back.encoder, back.decoder), (m.encoder.clone(), m.decoder.clone()));
        let mut bare = f;
        bare.encoder = None;
        assert!(VaeModel::try_from(bare).is_err());
    }
}
