//! Restricted-isometry deviation of subsampled isometries over sampled chords
//! of a network's range.

use std::path::{Path, PathBuf};

use gcs_core::coherence::{network_coherence_heuristic, CHORD_TOL};
use gcs_core::gnn::{log_region_bound, FinalActivation, GenerativeNetwork};
use gcs_core::linops::norm2;
use gcs_core::rng::{derive_seed, derive_seed_path, gaussian_vec, rng_from_seed};
use gcs_core::sampling::sample;
use gcs_core::GcsError;
use serde::{Deserialize, Serialize};

use crate::config::RipConfig;
use crate::error::Result;
use crate::output::emit_csv;
use crate::stats::binomial_se;

use super::{build_network, run_indexed, unitary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RipRecord {
    pub m: usize,
    pub trial: usize,
    /// `max |‖Ax‖ - 1|` over the sampled unit chords.
    pub deviation: f64,
    pub exceeded: bool,
    /// `min(sqrt(n/m), alpha sqrt(n |J| / m)) + 1`.
    pub envelope: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RipSummary {
    pub m: usize,
    pub trials: usize,
    pub exceedances: usize,
    pub frequency: f64,
    pub binomial_se: f64,
    /// Failure probability from inverting the difference-set sample complexity.
    pub analytic_tail: f64,
    pub alpha: f64,
    pub complexity_c: f64,
}

#[derive(Clone, Debug)]
pub struct RipReport {
    pub records: Vec<RipRecord>,
    pub summary: Vec<RipSummary>,
}

/// `min(1, 4k exp(2L - m delta^2 / (c alpha^2 n)))` with `L = k sum ln(2e k_i/k)`.
pub fn difference_set_tail(widths: &[usize], alpha: f64, delta: f64, m: usize, c: f64) -> f64 {
    let k = widths[0] as f64;
    let n = *widths.last().expect("nonempty") as f64;
    let l = log_region_bound(widths);
    (4.0 * k * (2.0 * l - m as f64 * delta * delta / (c * alpha * alpha * n)).exp()).min(1.0)
}

pub fn run_rip_check_with(g: &GenerativeNetwork, cfg: &RipConfig, threads: usize) -> Result<RipReport> {
    if g.has_biases() || g.final_activation() != FinalActivation::None {
        return Err(GcsError::Unsupported("RIP check needs a bias-free network with a linear output".into()).into());
    }
    let n = g.output_dim();
    let u = unitary(&cfg.unitary, n)?;
    let alpha = network_coherence_heuristic(g, &u, false)?;
    let (nm, t) = (cfg.m_list.len(), cfg.trials);
    let records = run_indexed(threads, nm * t, |job| {
        let (mi, trial) = (job / t, job % t);
        let m = cfg.m_list[mi];
        let seed = derive_seed_path(cfg.seed, &[mi as u64, trial as u64]);
        let a = sample(cfg.model, u.clone(), m, derive_seed(seed, 0))?;
        let mut rng = rng_from_seed(derive_seed(seed, 1));
        let mut deviation: Option<f64> = None;
        for _ in 0..cfg.chord_samples {
            let x1 = g.forward(&gaussian_vec(&mut rng, g.latent_dim()))?;
            let x2 = g.forward(&gaussian_vec(&mut rng, g.latent_dim()))?;
            let chord: Vec<f64> = x1.iter().zip(&x2).map(|(p, q)| p - q).collect();
            let len = norm2(&chord);
            if len <= CHORD_TOL {
                continue;
            }
            let dev = (norm2(&a.apply(&chord)?) / len - 1.0).abs();
            deviation = Some(deviation.map_or(dev, |d: f64| d.max(dev)));
        }
        let deviation = deviation.ok_or(GcsError::DegenerateRange(CHORD_TOL))?;
        let ratio = n as f64 / m as f64;
        let envelope = ratio.sqrt().min(alpha * (ratio * a.num_rows() as f64).sqrt()) + 1.0;
        Ok(RipRecord {
            m,
            trial,
            deviation,
            exceeded: deviation > cfg.delta,
            envelope,
            seed,
        })
    })?;
    let widths = g.widths();
    let summary = cfg
        .m_list
        .iter()
        .enumerate()
        .map(|(mi, &m)| {
            let chunk = &records[mi * t..(mi + 1) * t];
            let exceedances = chunk.iter().filter(|r| r.exceeded).count();
            let frequency = exceedances as f64 / t as f64;
            RipSummary {
                m,
                trials: t,
                exceedances,
                frequency,
                binomial_se: binomial_se(frequency, t),
                analytic_tail: difference_set_tail(&widths, alpha, cfg.delta, m, cfg.complexity_c),
                alpha,
                complexity_c: cfg.complexity_c,
            }
        })
        .collect();
    Ok(RipReport { records, summary })
}

pub fn run_rip_check(cfg: &RipConfig, threads: usize) -> Result<RipReport> {
    let g = build_network(&cfg.network, &cfg.unitary)?.decoder;
    run_rip_check_with(&g, cfg, threads)
}

impl RipReport {
    pub fn write(&self, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let trials = out_dir.join("rip.csv");
        let summary = out_dir.join("rip_summary.csv");
        emit_csv(&self.records, &trials)?;
        emit_csv(&self.summary, &summary)?;
        Ok(vec![trials, summary])
    }
}
