//! Command-line surface. Flags override values from `--config`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use oodkit_core::synth::Regime;
use oodkit_core::{FprMode, Method};

use crate::commands::{self, SynthArgs};
use crate::config::{ConfigFile, RunConfig};
use crate::format::{CsvKind, Format};
use crate::{report, CliError};

#[derive(Debug, Parser)]
#[command(
    name = "oodkit",
    version,
    about = "Embedding-space out-of-distribution detection"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `ood-recall` (default) or `id-tpr`.
    #[arg(long, global = true)]
    pub fpr_mode: Option<FprMode>,
    /// Neighbour rank for kNN scoring.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Energy-score temperature.
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    /// Covariance shrinkage as a fraction of the mean variance.
    #[arg(long, global = true)]
    pub eps_scale: Option<f64>,
    /// Rebalancing exponent.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Labeled training embeddings.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub id_test: Option<PathBuf>,
    #[arg(long)]
    pub ood_test: Option<PathBuf>,
    #[arg(long)]
    pub id_logits: Option<PathBuf>,
    #[arg(long)]
    pub ood_logits: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate an embedding/logit file and optionally convert it to OODB.
    Ingest {
        input: PathBuf,
        /// Defaults to the file extension.
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// How to read CSV columns.
        #[arg(long, value_enum, default_value = "embeddings")]
        kind: CsvKind,
        /// OODB output path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic regime into the output directory.
    Synth {
        #[arg(long)]
        regime: Regime,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        /// Resample the training set to this many rows.
        #[arg(long)]
        rebalance: Option<usize>,
    },
    /// Score and evaluate detectors.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated subset of maha, knn, msp, energy.
        #[arg(long, value_delimiter = ',', value_parser = parse_method, num_args = 0..)]
        methods: Option<Vec<Method>>,
        /// ID acceptance rate used to calibrate the reported threshold.
        #[arg(long)]
        target_id_tpr: Option<f64>,
    },
    /// Embedding geometry: dispersion, compactness, separability.
    Quality {
        #[command(flatten)]
        data: DataArgs,
    },
    /// kNN ablation over several k.
    SweepK {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated neighbour ranks.
        #[arg(long, value_delimiter = ',', default_value = "1,5,10,50")]
        ks: Vec<usize>,
    },
    /// Finite-difference check of the CE and SupCon gradients.
    LossCheck {
        #[arg(long, default_value_t = 50)]
        batches: usize,
    },
    /// synth → eval → quality for each configured regime (or given files).
    Pipeline {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',')]
        regimes: Option<Vec<Regime>>,
        #[arg(long, value_delimiter = ',', value_parser = parse_method)]
        methods: Option<Vec<Method>>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::from_name(s)
        .ok_or_else(|| format!("unknown method `{s}`; expected maha, knn, msp or energy"))
}

impl GlobalArgs {
    fn overrides(&self) -> ConfigFile {
        ConfigFile {
            out: self.out.clone(),
            seed: self.seed,
            fpr_mode: self.fpr_mode,
            k: self.k,
            temperature: self.temperature,
            eps_scale: self.eps_scale,
            alpha: self.alpha,
            ..Default::default()
        }
    }

    fn base(&self) -> Result<ConfigFile, CliError> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        Ok(file.overlay(self.overrides()))
    }
}

impl DataArgs {
    fn overrides(self) -> ConfigFile {
        ConfigFile {
            train: self.train,
            id_test: self.id_test,
            ood_test: self.ood_test,
            id_logits: self.id_logits,
            ood_logits: self.ood_logits,
            ..Default::default()
        }
    }
}

fn resolve(global: &GlobalArgs, over: ConfigFile) -> Result<RunConfig, CliError> {
    RunConfig::resolve(global.base()?.overlay(over))
}

/// Parses `args` and runs the selected subcommand; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { crate::EXIT_INPUT } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let global = cli.global;
    match cli.command {
        Command::Ingest {
            input,
            format,
            kind,
            output,
        } => {
            let data = commands::ingest(&input, format, kind, output.as_deref())?;
            println!(
                "{}: {} {} x {}",
                input.display(),
                data.kind(),
                data.rows(),
                data.cols()
            );
            if let Some(out) = output {
                println!("wrote {}", out.display());
            }
        }
        Command::Synth {
            regime,
            classes,
            per_class,
            dim,
            rebalance,
        } => {
            let cfg = resolve(
                &global,
                ConfigFile {
                    classes,
                    per_class,
                    dim,
                    rebalance,
                    ..Default::default()
                },
            )?;
            let args = SynthArgs {
                regime,
                classes: cfg.classes,
                per_class: cfg.per_class,
                dim: cfg.dim,
                seed: cfg.seed,
                params: cfg.regime_params(),
                rebalance: cfg.rebalance,
                alpha: cfg.alpha,
            };
            commands::synth(&args, &cfg.out)?;
            println!("wrote {regime} data to {}", display_dir(&cfg.out));
        }
        Command::Eval {
            data,
            methods,
            target_id_tpr,
        } => {
            let cfg = resolve(
                &global,
                ConfigFile {
                    methods,
                    target_id_tpr,
                    ..data.overrides()
                },
            )?;
            let records = commands::eval(&cfg)?;
            print!("{}", report::eval_table(&records));
        }
        Command::Quality { data } => {
            let cfg = resolve(&global, data.overrides())?;
            let g = commands::quality(&cfg)?;
            match g.dispersion_deg {
                Some(d) => println!("dispersion_deg {d:.4}"),
                None => println!("dispersion_deg -"),
            }
            println!("compactness_deg {:.4}", g.compactness_deg);
            println!("separability_deg {:.4}", g.separability_deg);
        }
        Command::SweepK { data, ks } => {
            let cfg = resolve(&global, data.overrides())?;
            for row in commands::sweep(&cfg, &ks)? {
                println!(
                    "k={:<6} auroc {:.6} fpr95 {:.6}",
                    row.k, row.auroc, row.fpr95
                );
            }
        }
        Command::LossCheck { batches } => {
            let cfg = resolve(&global, ConfigFile::default())?;
            let check = commands::loss_check(cfg.seed, batches)?;
            println!("ce max rel err {:.3e}", check.ce_max_rel_err);
            for (tau, err) in &check.supcon_max_rel_err {
                println!("supcon tau={tau} max rel err {err:.3e}");
            }
            if !check.passed() {
                return Err(CliError::numerical(format!(
                    "gradient check exceeded tolerance {:.0e}",
                    check.tolerance
                )));
            }
        }
        Command::Pipeline {
            data,
            regimes,
            methods,
            classes,
            per_class,
            dim,
        } => {
            let over = ConfigFile {
                regimes,
                methods,
                classes,
                per_class,
                dim,
                ..data.overrides()
            };
            let file = global.base()?.overlay(over);
            for run in commands::pipeline(file)? {
                println!("[{}] {}", run.name, display_dir(&run.dir));
                print!("{}", report::eval_table(&run.eval));
            }
        }
    }
    Ok(())
}

fn display_dir(p: &Path) -> String {
    p.display().to_string()
}
