mod config;
mod error;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seislabel::corpus::{MaskSet, PatchCorpus};
use seislabel::features::Measure;
use seislabel::labelmap::NmfConfig;
use seislabel::seed::derive_seed;

use config::PipelineConfig;
use error::{CliError, StageExt};
use stages::{EvalArgs, RobustnessArgs, SynthArgs, LABELMAP_STREAM};

/// Weakly supervised pixel labeling of seismic patches.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus, masks, exemplars and a quickstart config.
    Synth {
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 50)]
        per_class: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        exemplars_per_class: usize,
        #[arg(long, default_value = "synth")]
        out: PathBuf,
    },
    /// Curvelet-SVD feature vectors and the similarity matrix of a corpus.
    Features {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "curvelet-svd")]
        measure: Measure,
        #[arg(long, default_value = "features")]
        out: PathBuf,
    },
    /// Weak image labels from per-class exemplars.
    Retrieve {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        exemplars: PathBuf,
        #[arg(long, default_value_t = 500)]
        m: usize,
        #[arg(long, default_value = "curvelet-svd")]
        measure: Measure,
        /// Ground-truth masks to subset alongside the labeled patches.
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long, default_value = "retrieve")]
        out: PathBuf,
    },
    /// Pixel labels for a labeled corpus.
    Labelmap {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 300)]
        k: usize,
        #[arg(long, default_value_t = 0.4)]
        rho_w: f64,
        #[arg(long, default_value_t = 0.001)]
        tau: f64,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value_t = 0.1)]
        lambda1: f64,
        #[arg(long, default_value_t = 0.5)]
        lambda2: f64,
        #[arg(long, default_value_t = 5.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "labelmap")]
        out: PathBuf,
    },
    /// Retrieval metrics, pixel accuracy and the mislabeling sweep.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "curvelet-svd")]
        measure: Measure,
        /// Precomputed similarity matrix (`SLS1`) for the corpus.
        #[arg(long)]
        similarity: Option<PathBuf>,
        /// Predicted labels (`SLM1`); scored against `--masks`.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        max_m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run the mislabeling sweep on the (labeled) corpus.
        #[arg(long)]
        robustness: bool,
        #[arg(long, value_delimiter = ',', default_values_t = [100, 300])]
        robustness_k: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.05, 0.1, 0.15, 0.2])]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value = "evaluate")]
        out: PathBuf,
    },
    /// Run retrieve, labelmap and evaluate from a config file.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Override a config entry, e.g. `--set k=50`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth {
            classes,
            per_class,
            size,
            seed,
            exemplars_per_class,
            out,
        } => {
            let args = SynthArgs {
                classes,
                per_class,
                size,
                seed,
                exemplars_per_class,
            };
            stages::synth(&args, &out).map(|_| ())
        }
        Command::Features { corpus, measure, out } => stages::features(&corpus, measure, &out),
        Command::Retrieve {
            corpus,
            exemplars,
            m,
            measure,
            masks,
            out,
        } => stages::retrieve(&corpus, masks.as_deref(), &exemplars, m, measure, &out).map(|_| ()),
        Command::Labelmap {
            corpus,
            k,
            rho_w,
            tau,
            iters,
            lambda1,
            lambda2,
            gamma,
            seed,
            out,
        } => {
            let config = NmfConfig {
                lambda1,
                lambda2,
                gamma,
                rho_w,
                tau,
                k,
                iterations: iters,
                seed: derive_seed(seed, LABELMAP_STREAM),
                ..NmfConfig::default()
            };
            config.validate().map_err(|e| CliError::Config(e.to_string()))?;
            let corpus = PatchCorpus::load(&corpus).stage("labelmap")?;
            stages::labelmap(&corpus, &config, &out).map(|_| ())
        }
        Command::Evaluate {
            corpus,
            measure,
            similarity,
            labels,
            masks,
            max_m,
            seed,
            robustness,
            robustness_k,
            fractions,
            trials,
            iters,
            out,
        } => {
            let corpus = PatchCorpus::load(&corpus).stage("evaluate")?;
            let masks = masks.map(|p| MaskSet::load(&p)).transpose().stage("evaluate")?;
            let labels = labels.map(|p| MaskSet::load(&p)).transpose().stage("evaluate")?;
            let pixel_labels = match (&labels, &masks) {
                (Some(l), Some(m)) => Some((l, m)),
                (None, _) => None,
                (Some(_), None) => return Err(CliError::Config("labels: scoring needs --masks".into())),
            };
            stages::evaluate(
                &EvalArgs {
                    corpus: &corpus,
                    measure,
                    similarity: similarity.as_deref(),
                    pixel_labels,
                    max_m,
                    seed,
                },
                &out,
            )?;
            if robustness {
                let base = NmfConfig {
                    iterations: iters,
                    seed: derive_seed(seed, LABELMAP_STREAM),
                    ..NmfConfig::default()
                };
                let args = RobustnessArgs {
                    base,
                    ks: &robustness_k,
                    fractions: &fractions,
                    trials,
                    seed,
                };
                stages::robustness(&corpus, masks.as_ref(), &args, &out)?;
            }
            Ok(())
        }
        Command::Pipeline { config, overrides } => {
            let mut c = PipelineConfig::load(&config)?;
            c.apply_overrides(&overrides)?;
            stages::pipeline(&c)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
