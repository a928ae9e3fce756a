//! Reconstruction error versus measurement count for one or more networks.

use std::path::{Path, PathBuf};

use gcs_core::coherence::network_coherence_heuristic;
use gcs_core::gnn::GenerativeNetwork;
use gcs_core::recovery::recover;
use gcs_core::rng::{derive_seed, derive_seed_path, gaussian_vec, rng_from_seed};
use gcs_core::sampling::sample;
use gcs_core::training::{Dataset, VaeModel};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{SweepConfig, TargetSource};
use crate::error::{HarnessError, Result};
use crate::output::{emit_csv, emit_svg_scatter, Scatter, Series};
use crate::stats::{geometric_stats, LOG_FLOOR};

use super::{build_network, load_data, run_indexed, unitary, BuiltNetwork};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub network: String,
    pub m: usize,
    pub trial: usize,
    pub rre: f64,
    /// `rre` was below the logarithm floor.
    pub floored: bool,
    pub success: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub network: String,
    pub coherence_heuristic: f64,
    pub m: usize,
    pub trials: usize,
    pub geo_mean_rre: f64,
    pub geo_sd_rre: f64,
    pub floored: usize,
    pub success_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub records: Vec<SweepRecord>,
    pub summary: Vec<SweepSummary>,
}

pub struct SweepNetwork {
    pub name: String,
    pub decoder: GenerativeNetwork,
    pub vae: Option<VaeModel>,
}

fn target(net: &SweepNetwork, data: Option<&Dataset>, seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    match (data, &net.vae) {
        (Some(d), Some(vae)) => {
            if d.is_empty() {
                return Err(HarnessError::Config("target dataset is empty".into()));
            }
            let x = &d.samples[rng.random_range(0..d.len())];
            let (mu, _) = vae.encode(x);
            Ok(net.decoder.forward(&mu)?)
        }
        (Some(_), None) => Err(HarnessError::Config(format!(
            "network {} has no encoder for encoder targets",
            net.name
        ))),
        (None, _) => Ok(net.decoder.forward(&gaussian_vec(&mut rng, net.decoder.latent_dim()))?),
    }
}

/// Sweeps prebuilt networks. Trial `(m, t)` uses the same measurement matrix
/// and the same target draw for every network.
pub fn run_sweep_with(cfg: &SweepConfig, nets: &[SweepNetwork], threads: usize) -> Result<SweepReport> {
    let n = nets
        .first()
        .ok_or_else(|| HarnessError::Config("no networks".into()))?
        .decoder
        .output_dim();
    if nets.iter().any(|g| g.decoder.output_dim() != n) {
        return Err(HarnessError::Config("networks disagree on output dimension".into()));
    }
    let u = unitary(&cfg.unitary, n)?;
    let data = match &cfg.targets {
        TargetSource::Gaussian => None,
        TargetSource::Encoder { data } => Some(load_data(data, n)?),
    };
    let (nn, nm, t) = (nets.len(), cfg.m_list.len(), cfg.trials);
    let records = run_indexed(threads, nn * nm * t, |job| {
        let (ni, rest) = (job / (nm * t), job % (nm * t));
        let (mi, trial) = (rest / t, rest % t);
        let net = &nets[ni];
        let m = cfg.m_list[mi];
        let seed = derive_seed_path(cfg.seed, &[mi as u64, trial as u64]);
        let a = sample(cfg.model, u.clone(), m, derive_seed(seed, 0))?;
        let x0 = target(net, data.as_ref(), derive_seed(seed, 1))?;
        let b = a.apply(&x0)?;
        let mut res = recover(&net.decoder, &a, &b, &cfg.recovery.with_seed(derive_seed(seed, 2)))?;
        res.score(&x0)?;
        let rre = res.rre.unwrap_or(f64::NAN);
        Ok(SweepRecord {
            network: net.name.clone(),
            m,
            trial,
            rre,
            floored: rre < LOG_FLOOR,
            success: res.success(),
            seed,
        })
    })?;

    let mut summary = Vec::with_capacity(nn * nm);
    for (ni, net) in nets.iter().enumerate() {
        let coherence = network_coherence_heuristic(&net.decoder, &u, true)?;
        for (mi, &m) in cfg.m_list.iter().enumerate() {
            let chunk = &records[(ni * nm + mi) * t..(ni * nm + mi + 1) * t];
            let rres: Vec<f64> = chunk.iter().map(|r| r.rre).filter(|r| r.is_finite()).collect();
            let stats = geometric_stats(&rres);
            summary.push(SweepSummary {
                network: net.name.clone(),
                coherence_heuristic: coherence,
                m,
                trials: t,
                geo_mean_rre: stats.map_or(f64::NAN, |s| s.geo_mean),
                geo_sd_rre: stats.map_or(f64::NAN, |s| s.geo_sd),
                floored: stats.map_or(0, |s| s.floored),
                success_fraction: chunk.iter().filter(|r| r.success).count() as f64 / t as f64,
            });
        }
    }
    Ok(SweepReport { records, summary })
}

/// Builds (or trains) the configured networks, then sweeps them.
pub fn run_measurement_sweep(cfg: &SweepConfig, threads: usize) -> Result<SweepReport> {
    let nets = cfg
        .networks
        .iter()
        .map(|nw| {
            let BuiltNetwork { decoder, vae } = build_network(&nw.source, &cfg.unitary)?;
            Ok(SweepNetwork {
                name: nw.name.clone(),
                decoder,
                vae,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    run_sweep_with(cfg, &nets, threads)
}

impl SweepReport {
    /// Geometric-mean rre of `network` at each m, in grid order.
    pub fn geo_means(&self, network: &str) -> Vec<f64> {
        self.summary
            .iter()
            .filter(|s| s.network == network)
            .map(|s| s.geo_mean_rre)
            .collect()
    }

    pub fn write(&self, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let trials = out_dir.join("sweep.csv");
        let summary = out_dir.join("sweep_summary.csv");
        let svg = out_dir.join("sweep.svg");
        emit_csv(&self.records, &trials)?;
        emit_csv(&self.summary, &summary)?;
        let mut names: Vec<&str> = Vec::new();
        for s in &self.summary {
            if !names.contains(&s.network.as_str()) {
                names.push(&s.network);
            }
        }
        let series = names
            .iter()
            .map(|&name| Series {
                name: name.to_string(),
                points: self
                    .summary
                    .iter()
                    .filter(|s| s.network == name && s.geo_mean_rre.is_finite())
                    .map(|s| {
                        (
                            s.m as f64,
                            s.geo_mean_rre,
                            Some((s.geo_mean_rre / s.geo_sd_rre, s.geo_mean_rre * s.geo_sd_rre)),
                        )
                    })
                    .collect(),
            })
            .collect();
        emit_svg_scatter(
            &Scatter {
                title: "Geometric mean rre (one geometric SD)".into(),
                x_label: "measurements m".into(),
                y_label: "rre".into(),
                log_y: true,
                series,
            },
            &svg,
        )?;
        Ok(vec![trials, summary, svg])
    }
}
