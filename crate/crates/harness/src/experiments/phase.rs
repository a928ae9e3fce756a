//! Recovery success over a grid of (final-layer interpolation, measurement count).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use gcs_core::coherence::matrix_coherence_heuristic;
use gcs_core::gnn::{random_network, GenerativeNetwork, Layer};
use gcs_core::recovery::recover;
use gcs_core::rng::{derive_seed, derive_seed_path, gaussian_matrix, gaussian_vec, rng_from_seed};
use gcs_core::sampling::sample;
use gcs_core::{GcsError, RealMatrix, UnitaryOperator};
use serde::{Deserialize, Serialize};

use crate::config::{PairSource, PhaseConfig};
use crate::error::{HarnessError, Result};
use crate::output::{emit_csv, emit_svg_heatmap, Heatmap};
use crate::stats::binomial_se;

use super::{run_indexed, unitary};

/// Shared inner layers with a high- and a low-coherence final layer.
#[derive(Clone, Debug)]
pub struct PhasePair {
    pub high: GenerativeNetwork,
    pub low: GenerativeNetwork,
}

impl PhasePair {
    /// `G_beta` with final layer `beta W_high + (1 - beta) W_low` (biases likewise).
    pub fn interpolate(&self, beta: f64) -> Result<GenerativeNetwork> {
        let hi = self.high.layers().last().expect("nonempty");
        let lo = self.low.layers().last().expect("nonempty");
        let w = RealMatrix::from_fn(hi.out_dim(), hi.in_dim(), |i, j| {
            beta * hi.weight[(i, j)] + (1.0 - beta) * lo.weight[(i, j)]
        });
        let last = match (&hi.bias, &lo.bias) {
            (Some(bh), Some(bl)) => Layer::with_bias(
                w,
                bh.iter().zip(bl).map(|(a, b)| beta * a + (1.0 - beta) * b).collect(),
            ),
            _ => Layer::new(w),
        };
        let mut layers = self.high.layers().to_vec();
        *layers.last_mut().expect("nonempty") = last;
        Ok(GenerativeNetwork::new(layers, self.high.final_activation())?)
    }
}

/// Gaussian network plus a final layer of equal Frobenius norm whose range is
/// spanned by the first `k_{d-1}` rows of the (real) unitary.
pub fn synthetic_pair(widths: &[usize], seed: u64, u: &UnitaryOperator) -> Result<PhasePair> {
    let low = random_network(widths, seed)?;
    let d = u
        .real_matrix()
        .ok_or_else(|| HarnessError::Config("the synthetic pair needs a real unitary".into()))?;
    let w_low = low.final_weight();
    let (n, kk) = w_low.shape();
    if u.n() != n {
        return Err(GcsError::DimensionMismatch(format!("unitary size {} but network output {n}", u.n())).into());
    }
    let c = gaussian_matrix(&mut rng_from_seed(derive_seed(seed, 1)), kk, kk);
    let basis = RealMatrix::from_fn(n, kk, |i, j| d[(j, i)]);
    let w_high = basis.matmul(&c)?;
    let s = w_low.frobenius_norm() / w_high.frobenius_norm();
    let high = low.with_final_weight(w_high.scaled(s))?;
    Ok(PhasePair { high, low })
}

pub fn load_pair(src: &PairSource, u: &UnitaryOperator) -> Result<PhasePair> {
    match src {
        PairSource::Synthetic { widths, seed } => synthetic_pair(widths, *seed, u),
        PairSource::Files { high, low } => {
            let high = GenerativeNetwork::load(high)?;
            let low = GenerativeNetwork::load(low)?;
            let (a, b) = (high.final_weight().shape(), low.final_weight().shape());
            if a != b {
                return Err(GcsError::ShapeMismatch(format!("final layers {a:?} and {b:?}")).into());
            }
            Ok(PhasePair { high, low })
        }
    }
}

/// One recovery trial. Columns: beta, coherence_heuristic, m, trial, rre, success, seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub beta: f64,
    pub coherence_heuristic: f64,
    pub m: usize,
    pub trial: usize,
    pub rre: f64,
    pub success: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub beta: f64,
    pub coherence_heuristic: f64,
    pub m: usize,
    pub trials: usize,
    pub successes: usize,
    pub fraction: f64,
    pub binomial_se: f64,
}

#[derive(Clone, Debug)]
pub struct PhaseReport {
    pub records: Vec<PhaseRecord>,
    pub cells: Vec<PhaseCell>,
    pub betas: Vec<f64>,
    pub m_list: Vec<usize>,
}

pub fn run_phase_portrait(cfg: &PhaseConfig, threads: usize) -> Result<PhaseReport> {
    let n = match &cfg.pair {
        PairSource::Synthetic { widths, .. } => *widths.last().ok_or_else(|| HarnessError::Config("empty widths".into()))?,
        PairSource::Files { high, .. } => GenerativeNetwork::load(high)?.output_dim(),
    };
    let u: Arc<UnitaryOperator> = unitary(&cfg.unitary, n)?;
    let pair = load_pair(&cfg.pair, &u)?;
    let nets = cfg.betas.iter().map(|&b| pair.interpolate(b)).collect::<Result<Vec<_>>>()?;
    let coherence = nets
        .iter()
        .map(|g| matrix_coherence_heuristic(g.final_weight(), &u).map_err(HarnessError::from))
        .collect::<Result<Vec<_>>>()?;

    let (nb, nm, t) = (cfg.betas.len(), cfg.m_list.len(), cfg.trials);
    let records = run_indexed(threads, nb * nm * t, |job| {
        let (bi, rest) = (job / (nm * t), job % (nm * t));
        let (mi, trial) = (rest / t, rest % t);
        let g = &nets[bi];
        let m = cfg.m_list[mi];
        let seed = derive_seed_path(cfg.seed, &[bi as u64, mi as u64, trial as u64]);
        let a = sample(cfg.model, u.clone(), m, derive_seed(seed, 0))?;
        let z0 = gaussian_vec(&mut rng_from_seed(derive_seed(seed, 1)), g.latent_dim());
        let x0 = g.forward(&z0)?;
        let b = a.apply(&x0)?;
        let mut res = recover(g, &a, &b, &cfg.recovery.with_seed(derive_seed(seed, 2)))?;
        res.score(&x0)?;
        Ok(PhaseRecord {
            beta: cfg.betas[bi],
            coherence_heuristic: coherence[bi],
            m,
            trial,
            rre: res.rre.unwrap_or(f64::NAN),
            success: res.success(),
            seed,
        })
    })?;

    let cells = records
        .chunks(t)
        .map(|chunk| {
            let successes = chunk.iter().filter(|r| r.success).count();
            let fraction = successes as f64 / t as f64;
            PhaseCell {
                beta: chunk[0].beta,
                coherence_heuristic: chunk[0].coherence_heuristic,
                m: chunk[0].m,
                trials: t,
                successes,
                fraction,
                binomial_se: binomial_se(fraction, t),
            }
        })
        .collect();
    Ok(PhaseReport {
        records,
        cells,
        betas: cfg.betas.clone(),
        m_list: cfg.m_list.clone(),
    })
}

impl PhaseReport {
    /// Success fractions indexed `[beta][m]`.
    pub fn fractions(&self) -> Vec<Vec<f64>> {
        self.cells
            .chunks(self.m_list.len())
            .map(|row| row.iter().map(|c| c.fraction).collect())
            .collect()
    }

    pub fn coherences(&self) -> Vec<f64> {
        self.cells
            .chunks(self.m_list.len())
            .map(|row| row[0].coherence_heuristic)
            .collect()
    }

    pub fn write(&self, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let trials = out_dir.join("phase.csv");
        let cells = out_dir.join("phase_cells.csv");
        let svg = out_dir.join("phase.svg");
        emit_csv(&self.records, &trials)?;
        emit_csv(&self.cells, &cells)?;
        // rows ordered by coherence, as the figure's vertical axis
        let coh = self.coherences();
        let fr = self.fractions();
        let mut order: Vec<usize> = (0..coh.len()).collect();
        order.sort_by(|&a, &b| coh[a].total_cmp(&coh[b]));
        let map = Heatmap {
            title: "Recovery success fraction".into(),
            x_label: "measurements m".into(),
            y_label: "coherence heuristic".into(),
            x_ticks: self.m_list.iter().map(|m| m.to_string()).collect(),
            y_ticks: order.iter().map(|&i| format!("{:.3}", coh[i])).collect(),
            values: order.iter().map(|&i| fr[i].clone()).collect(),
        };
        emit_svg_heatmap(&map, &svg)?;
        Ok(vec![trials, cells, svg])
    }
}
