//! Experiment drivers. Every trial draws from its own derived seed and results
//! are collected in job order, so the output does not depend on the number of
//! worker threads.

pub mod phase;
pub mod rip;
pub mod subspace_rip;
pub mod sweep;

use std::path::PathBuf;
use std::sync::Arc;

use gcs_core::gnn::{random_network, GenerativeNetwork, WeightFile};
use gcs_core::training::{load_idx, synth_dataset, train_vae, Architecture, Dataset, TrainConfig, VaeModel};
use gcs_core::transforms::parse_unitary;
use gcs_core::UnitaryOperator;
use rayon::prelude::*;

use crate::config::{DataSource, NetworkSource, TrainSpec};
use crate::error::{HarnessError, Result};

pub const DATA_DIR_ENV: &str = "GCS_DATA_DIR";

/// Runs `f(0..jobs)` on a pool of `threads` workers (0 picks the default) and
/// returns the results in index order.
pub fn run_indexed<T, F>(threads: usize, jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    pool.install(|| (0..jobs).into_par_iter().map(&f).collect())
}

pub fn unitary(spec: &str, n: usize) -> Result<Arc<UnitaryOperator>> {
    Ok(Arc::new(parse_unitary(spec, n)?))
}

fn data_dir_file(name: &str) -> Result<PathBuf> {
    let dir = std::env::var_os(DATA_DIR_ENV)
        .ok_or_else(|| HarnessError::Config(format!("{DATA_DIR_ENV} is not set and no IDX path was given")))?;
    Ok(PathBuf::from(dir).join(name))
}

/// Loads a dataset; synthetic data takes its dimension from `n`.
pub fn load_data(src: &DataSource, n: usize) -> Result<Dataset> {
    match src {
        DataSource::Synth { k_true, count, seed } => {
            if *k_true == 0 || *k_true > n {
                return Err(HarnessError::Config(format!("synthetic k_true {k_true} must lie in 1..={n}")));
            }
            Ok(synth_dataset(n, *k_true, *count, *seed))
        }
        DataSource::Idx { images, labels, test } => {
            let prefix = if *test { "t10k" } else { "train" };
            let images = match images {
                Some(p) => p.clone(),
                None => data_dir_file(&format!("{prefix}-images-idx3-ubyte"))?,
            };
            let labels = match labels {
                Some(p) => Some(p.clone()),
                None if images.parent().is_some() => {
                    let guess = images.with_file_name(format!("{prefix}-labels-idx1-ubyte"));
                    guess.exists().then_some(guess)
                }
                None => None,
            };
            let data = load_idx(&images, labels.as_deref())?;
            if data.n != n {
                return Err(HarnessError::Config(format!("data dimension {} but network output {n}", data.n)));
            }
            Ok(data)
        }
    }
}

pub struct BuiltNetwork {
    pub decoder: GenerativeNetwork,
    pub vae: Option<VaeModel>,
}

pub fn train_network(spec: &TrainSpec, d_op: Arc<UnitaryOperator>) -> Result<VaeModel> {
    let n = *spec
        .widths
        .last()
        .ok_or_else(|| HarnessError::Config("empty architecture".into()))?;
    let data = load_data(&spec.data, n)?;
    let arch = Architecture {
        widths: spec.widths.clone(),
        final_activation: spec.final_activation,
    };
    let cfg = TrainConfig {
        learning_rate: spec.learning_rate,
        batch_size: spec.batch_size,
        epochs: spec.epochs,
        reg_weight: spec.reg_weight,
        lambda: spec.lambda,
        seed: spec.seed,
        d_op,
    };
    Ok(train_vae(&data, &arch, &cfg, spec.regularized)?)
}

/// Builds a network; `unitary_spec` supplies the regularizer reference for training.
pub fn build_network(src: &NetworkSource, unitary_spec: &str) -> Result<BuiltNetwork> {
    match src {
        NetworkSource::Weights { path } => {
            let file = WeightFile::load(path)?;
            if file.encoder.is_some() {
                let vae = VaeModel::try_from(file)?;
                Ok(BuiltNetwork {
                    decoder: vae.decoder.clone(),
                    vae: Some(vae),
                })
            } else {
                Ok(BuiltNetwork {
                    decoder: file.try_into()?,
                    vae: None,
                })
            }
        }
        NetworkSource::Random { widths, seed } => Ok(BuiltNetwork {
            decoder: random_network(widths, *seed)?,
            vae: None,
        }),
        NetworkSource::Train(spec) => {
            let n = *spec
                .widths
                .last()
                .ok_or_else(|| HarnessError::Config("empty architecture".into()))?;
            let vae = train_network(spec, unitary(unitary_spec, n)?)?;
            Ok(BuiltNetwork {
                decoder: vae.decoder.clone(),
                vae: Some(vae),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_preserves_order() {
        let a = run_indexed(1, 50, |i| Ok(i * i)).unwrap();
        let b = run_indexed(4, 50, |i| Ok(i * i)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[7], 49);
        assert!(run_indexed(2, 5, |i| if i == 3 { Err(HarnessError::Config("x".into())) } else { Ok(i) }).is_err());
    }

    #[test]
    fn synth_data_checks_dimension() {
        let src = DataSource::Synth { k_true: 2, count: 3, seed: 0 };
        assert_eq!(load_data(&src, 8).unwrap().n, 8);
        let big = DataSource::Synth { k_true: 9, count: 3, seed: 0 };
        assert!(load_data(&big, 8).is_err());
    }
}
