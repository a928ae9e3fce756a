use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gcs_core::coherence::coherence_report;
use gcs_core::gnn::{FinalActivation, GenerativeNetwork};
use gcs_core::recovery::{recover, RecoveryConfig};
use gcs_core::rng::{derive_seed, gaussian_vec, rng_from_seed};
use gcs_core::sampling::{sample, SamplingModel};
use gcs_core::transforms::parse_unitary;
use num_complex::Complex64;
use gcs_harness::config::{builtin_config, DataSource, ExperimentConfig, TrainSpec};
use gcs_harness::experiments::{phase, rip, subspace_rip, sweep, train_network};

#[derive(Parser)]
#[command(name = "gcs", version, about = "Generative compressed sensing experiments")]
struct Cli {
    /// Overrides the seed of the selected configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Use the full-size grids instead of the desk-scale defaults.
    #[arg(long, global = true)]
    paper_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coherence report of a network as JSON.
    Coherence {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value = "dct")]
        unitary: String,
        #[arg(long, default_value_t = 10_000)]
        mc_samples: usize,
    },
    /// Train a VAE and write its weights.
    Train(TrainArgs),
    /// Recover a random in-range signal from subsampled measurements.
    Recover {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value = "dct")]
        unitary: String,
        #[arg(long, default_value = "fixed")]
        model: SamplingModel,
        #[arg(long)]
        m: usize,
        /// Standard deviation of additive measurement noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
    },
    /// Success fraction over interpolated final layers and measurement counts.
    Phase(ExperimentArgs),
    /// Geometric-mean rre versus measurement count.
    Sweep(ExperimentArgs),
    /// Restricted-isometry deviation over sampled chords.
    Rip(ExperimentArgs),
    /// Exact restricted-isometry deviation on a random subspace.
    SubspaceRip(ExperimentArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON configuration; defaults to the shipped one.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// `synth`, `synth:<k_true>,<count>,<seed>`, `idx` (files under GCS_DATA_DIR)
    /// or `idx:<images>[,<labels>]`.
    #[arg(long, default_value = "synth")]
    data: String,
    /// Decoder widths `k,k1,...,n`.
    #[arg(long, value_delimiter = ',', default_value = "8,32,32,64")]
    arch: Vec<usize>,
    #[arg(long, default_value = "sigmoid")]
    r#final: FinalActivation,
    #[arg(long)]
    regularized: bool,
    #[arg(long, default_value_t = 1e4)]
    reg_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    /// Reference unitary of the coherence penalty.
    #[arg(long, default_value = "dct")]
    unitary: String,
    #[arg(long, default_value = "weights.json")]
    out: PathBuf,
}

fn parse_data(spec: &str) -> Result<DataSource> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "synth" if rest.is_empty() => Ok(DataSource::Synth { k_true: 4, count: 2000, seed: 0 }),
        "synth" => {
            let v: Vec<u64> = rest
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .context("synth parameters must be integers")?;
            let [k_true, count, seed] = v[..] else {
                bail!("expected synth:<k_true>,<count>,<seed>");
            };
            Ok(DataSource::Synth { k_true: k_true as usize, count: count as usize, seed })
        }
        "idx" => {
            let mut parts = rest.split(',').filter(|s| !s.is_empty()).map(PathBuf::from);
            Ok(DataSource::Idx { images: parts.next(), labels: parts.next(), test: false })
        }
        _ => bail!("unknown data source {spec}"),
    }
}

fn experiment_config(args: &ExperimentArgs, cli: &Cli, desk: &str, paper: &str) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => builtin_config(if cli.paper_scale { paper } else { desk })?,
    };
    if let Some(s) = cli.seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

fn report_files(files: &[PathBuf]) {
    for f in files {
        eprintln!("wrote {}", f.display());
    }
}

fn run_experiment(cfg: ExperimentConfig, threads: usize, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let start = std::time::Instant::now();
    let files = match cfg {
        ExperimentConfig::PhasePortrait(c) => phase::run_phase_portrait(&c, threads)?.write(out_dir)?,
        ExperimentConfig::MeasurementSweep(c) => sweep::run_measurement_sweep(&c, threads)?.write(out_dir)?,
        ExperimentConfig::RipCheck(c) => rip::run_rip_check(&c, threads)?.write(out_dir)?,
        ExperimentConfig::SubspaceRip(c) => subspace_rip::run_subspace_rip(&c, threads)?.write(out_dir)?,
    };
    report_files(&files);
    eprintln!("finished in {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Coherence { weights, unitary, mc_samples } => {
            let g = GenerativeNetwork::load(weights)?;
            let u = parse_unitary(unitary, g.output_dim())?;
            let report = coherence_report(&g, &u, *mc_samples, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Train(t) => {
            let n = *t.arch.last().context("empty --arch")?;
            let spec = TrainSpec {
                widths: t.arch.clone(),
                final_activation: t.r#final,
                regularized: t.regularized,
                reg_weight: t.reg_weight,
                lambda: t.lambda,
                learning_rate: t.lr,
                batch_size: t.batch,
                epochs: t.epochs,
                seed,
                data: parse_data(&t.data)?,
            };
            let vae = train_network(&spec, Arc::new(parse_unitary(&t.unitary, n)?))?;
            for (e, l) in vae.epoch_losses.iter().enumerate() {
                eprintln!("epoch {} loss {l:.6}", e + 1);
            }
            vae.weight_file().save(&t.out)?;
            eprintln!("wrote {}", t.out.display());
        }
        Command::Recover { weights, unitary, model, m, noise, restarts } => {
            let g = GenerativeNetwork::load(weights)?;
            let u = Arc::new(parse_unitary(unitary, g.output_dim())?);
            let complex = !u.is_real();
            let a = sample(*model, u, *m, derive_seed(seed, 0))?;
            let x0 = g.forward(&gaussian_vec(&mut rng_from_seed(derive_seed(seed, 1)), g.latent_dim()))?;
            let mut b = a.apply(&x0)?;
            if *noise > 0.0 {
                let mut rng = rng_from_seed(derive_seed(seed, 3));
                for v in &mut b {
                    *v += if complex {
                        let e = gaussian_vec(&mut rng, 2);
                        Complex64::new(e[0], e[1]) * (*noise / 2f64.sqrt())
                    } else {
                        Complex64::new(*noise * gaussian_vec(&mut rng, 1)[0], 0.0)
                    };
                }
            }
            let cfg = RecoveryConfig { restarts: *restarts, seed: derive_seed(seed, 2), ..RecoveryConfig::default() };
            let mut result = recover(&g, &a, &b, &cfg)?;
            result.score(&x0)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
        }
        Command::Phase(args) => {
            let cfg = experiment_config(args, &cli, "phase_desk", "phase_paper")?;
            run_experiment(cfg, cli.threads, &cli.out_dir)?;
        }
        Command::Sweep(args) => {
            let cfg = experiment_config(args, &cli, "sweep_desk", "sweep_paper")?;
            run_experiment(cfg, cli.threads, &cli.out_dir)?;
        }
        Command::Rip(args) => {
            let cfg = experiment_config(args, &cli, "rip_desk", "rip_desk")?;
            run_experiment(cfg, cli.threads, &cli.out_dir)?;
        }
        Command::SubspaceRip(args) => {
            let cfg = experiment_config(args, &cli, "subspace_rip_desk", "subspace_rip_desk")?;
            run_experiment(cfg, cli.threads, &cli.out_dir)?;
        }
    }
    Ok(())
}
