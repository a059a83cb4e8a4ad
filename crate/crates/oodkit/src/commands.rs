//! Subcommand implementations. Each returns data for tests and writes its
//! artifacts under the configured output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use oodkit_core::objectives::{ce_loss, gradcheck, supcon_loss, SupConBatch};
use oodkit_core::synth::{self, CounterRng, Regime, RegimeParams};
use oodkit_core::{
    evaluate, fit_gaussian, score_energy, score_knn, score_maha, score_msp, sweep_k,
    EmbeddingMatrix, EvalConfig, GeometryReport, KnnIndex, LabeledEmbeddings, LogitMatrix, Method,
    ScoreVector, SweepRow,
};
use serde::Serialize;

use crate::config::{ConfigFile, RunConfig};
use crate::format::{read_dataset, write_oodb, CsvKind, Dataset, Format};
use crate::report::{self, EvalRecord, GeometryRecord};
use crate::CliError;

pub const TRAIN_FILE: &str = "train.oodb";
pub const ID_TEST_FILE: &str = "id_test.oodb";
pub const OOD_TEST_FILE: &str = "ood_test.oodb";
pub const ID_LOGITS_FILE: &str = "id_logits.oodb";
pub const OOD_LOGITS_FILE: &str = "ood_logits.oodb";

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))
}

fn require<'a>(path: &'a Option<PathBuf>, what: &str, why: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::input(format!("missing input: {what} ({why})")))
}

fn core_err(context: &str, e: oodkit_core::Error) -> CliError {
    CliError::from_core(e).context(context)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Train files must carry labels; CSV train files are read with a label column.
pub fn load_train(path: &Path) -> Result<LabeledEmbeddings, CliError> {
    match read_dataset(path, None, CsvKind::Labeled)? {
        Dataset::Labeled(l) => Ok(l),
        other => Err(CliError::input(format!(
            "{}: expected labeled embeddings, found {}",
            path.display(),
            other.kind()
        ))),
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix, CliError> {
    match read_dataset(path, None, CsvKind::Embeddings)? {
        Dataset::Embeddings(m) => Ok(m),
        Dataset::Labeled(l) => Ok(l.into_parts().0),
        Dataset::Logits(_) => Err(CliError::input(format!(
            "{}: expected embeddings, found logits",
            path.display()
        ))),
    }
}

pub fn load_logits(path: &Path) -> Result<LogitMatrix, CliError> {
    match read_dataset(path, None, CsvKind::Logits)? {
        Dataset::Logits(l) => Ok(l),
        other => Err(CliError::input(format!(
            "{}: expected logits, found {}",
            path.display(),
            other.kind()
        ))),
    }
}

/// Converts or validates one file. Writes OODB to `out` when given.
pub fn ingest(
    input: &Path,
    format: Option<Format>,
    kind: CsvKind,
    out: Option<&Path>,
) -> Result<Dataset, CliError> {
    let data = read_dataset(input, format, kind)?;
    if let Some(out) = out {
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            ensure_dir(parent)?;
        }
        write_oodb(&data, out)?;
    }
    Ok(data)
}

/// Paths written by [`synth`].
#[derive(Debug, Clone, Serialize)]
pub struct SynthOutput {
    pub train: PathBuf,
    pub id_test: PathBuf,
    pub ood_test: PathBuf,
    pub id_logits: PathBuf,
    pub ood_logits: PathBuf,
}

#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub regime: Regime,
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub seed: u64,
    pub params: RegimeParams,
    /// Resample the training rows to this many with the multinomial scheme.
    pub rebalance: Option<usize>,
    pub alpha: f64,
}

/// Generates a regime preset and writes train/test embeddings plus
/// nearest-centroid logits for the test sets.
pub fn synth(args: &SynthArgs, out: &Path) -> Result<SynthOutput, CliError> {
    let spec = synth::preset(
        args.regime,
        &args.params,
        args.classes,
        args.per_class,
        args.dim,
        args.seed,
    )
    .map_err(|e| core_err("synth", e))?;
    let mut data = synth::generate(&spec).map_err(|e| core_err("synth", e))?;
    if let Some(n) = args.rebalance {
        let idx = synth::rebalance(data.train.labels(), args.alpha, n, args.seed)
            .map_err(|e| core_err("rebalance", e))?;
        let x = data
            .train
            .embeddings()
            .select_rows(&idx)
            .map_err(|e| core_err("rebalance", e))?;
        let labels = idx.iter().map(|&i| data.train.labels()[i]).collect();
        data.train = LabeledEmbeddings::new(x, labels, data.train.classes())
            .map_err(|e| core_err("rebalance", e))?;
    }
    let id_logits = synth::nearest_centroid_logits(&data.train, &data.id_test)
        .map_err(|e| core_err("synth", e))?;
    let ood_logits = synth::nearest_centroid_logits(&data.train, &data.ood_test)
        .map_err(|e| core_err("synth", e))?;

    ensure_dir(out)?;
    let paths = SynthOutput {
        train: out.join(TRAIN_FILE),
        id_test: out.join(ID_TEST_FILE),
        ood_test: out.join(OOD_TEST_FILE),
        id_logits: out.join(ID_LOGITS_FILE),
        ood_logits: out.join(OOD_LOGITS_FILE),
    };
    write_oodb(&data.train.into(), &paths.train)?;
    write_oodb(&data.id_test.into(), &paths.id_test)?;
    write_oodb(&data.ood_test.into(), &paths.ood_test)?;
    write_oodb(&id_logits.into(), &paths.id_logits)?;
    write_oodb(&ood_logits.into(), &paths.ood_logits)?;
    Ok(paths)
}

fn scores_for(method: Method, cfg: &RunConfig) -> Result<(ScoreVector, ScoreVector), CliError> {
    let ctx = method.name();
    if method.needs_logits() {
        let id = load_logits(require(
            &cfg.id_logits,
            "id_logits",
            &format!("method {ctx} reads classifier logits"),
        )?)?;
        let ood = load_logits(require(
            &cfg.ood_logits,
            "ood_logits",
            &format!("method {ctx} reads classifier logits"),
        )?)?;
        let score = |l: &LogitMatrix| match method {
            Method::Msp => score_msp(l),
            _ => score_energy(l, cfg.temperature),
        };
        return Ok((
            score(&id).map_err(|e| core_err(ctx, e))?,
            score(&ood).map_err(|e| core_err(ctx, e))?,
        ));
    }
    let why = format!("method {ctx} needs train, id_test and ood_test embeddings");
    let train_path = require(&cfg.train, "train", &why)?;
    let id = load_embeddings(require(&cfg.id_test, "id_test", &why)?)?;
    let ood = load_embeddings(require(&cfg.ood_test, "ood_test", &why)?)?;
    match method {
        Method::Maha => {
            let model = fit_gaussian(&load_train(train_path)?, cfg.eps_scale)
                .map_err(|e| core_err(ctx, e))?;
            Ok((
                score_maha(&model, &id).map_err(|e| core_err(ctx, e))?,
                score_maha(&model, &ood).map_err(|e| core_err(ctx, e))?,
            ))
        }
        _ => {
            let reference = load_embeddings(train_path)?;
            let index = KnnIndex::new(&reference, cfg.k).map_err(|e| core_err(ctx, e))?;
            Ok((
                score_knn(&index, &id).map_err(|e| core_err(ctx, e))?,
                score_knn(&index, &ood).map_err(|e| core_err(ctx, e))?,
            ))
        }
    }
}

fn check_inputs(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.methods.is_empty() {
        return Err(CliError::input(
            "method set is empty; choose from maha, knn, msp, energy",
        ));
    }
    for &m in &cfg.methods {
        let needed: &[(&Option<PathBuf>, &str)] = if m.needs_logits() {
            &[
                (&cfg.id_logits, "id_logits"),
                (&cfg.ood_logits, "ood_logits"),
            ]
        } else {
            &[
                (&cfg.train, "train"),
                (&cfg.id_test, "id_test"),
                (&cfg.ood_test, "ood_test"),
            ]
        };
        for (path, name) in needed {
            let p = require(path, name, &format!("required by method {m}"))?;
            if !p.exists() {
                return Err(CliError::input(format!(
                    "{}: {name} file does not exist",
                    p.display()
                )));
            }
        }
    }
    Ok(())
}

/// Scores and evaluates every configured method; writes `report.json` and
/// `report.csv` into `cfg.out`.
pub fn eval(cfg: &RunConfig) -> Result<Vec<EvalRecord>, CliError> {
    check_inputs(cfg)?;
    let eval_cfg = EvalConfig {
        fpr_mode: cfg.fpr_mode,
        target_id_tpr: cfg.target_id_tpr,
    };
    let names = |id: &Option<PathBuf>, ood: &Option<PathBuf>| {
        (
            id.as_deref().map(dataset_name).unwrap_or_default(),
            ood.as_deref().map(dataset_name).unwrap_or_default(),
        )
    };
    let mut records = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let (id, ood) = scores_for(method, cfg)?;
        let report = evaluate(&id, &ood, &eval_cfg).map_err(|e| core_err(method.name(), e))?;
        let (id_dataset, ood_dataset) = if method.needs_logits() {
            names(&cfg.id_logits, &cfg.ood_logits)
        } else {
            names(&cfg.id_test, &cfg.ood_test)
        };
        records.push(EvalRecord {
            id_dataset,
            ood_dataset,
            report,
        });
    }
    ensure_dir(&cfg.out)?;
    report::write_json(&cfg.out.join("report.json"), &records)?;
    report::write_eval_csv(&cfg.out.join("report.csv"), &records)?;
    Ok(records)
}

/// Embedding geometry of the training set and the ID/OOD test sets; writes
/// `geometry.json` and `geometry.csv`.
pub fn quality(cfg: &RunConfig) -> Result<GeometryReport, CliError> {
    let why = "quality needs train, id_test and ood_test";
    let train = load_train(require(&cfg.train, "train", why)?)?;
    let id_path = require(&cfg.id_test, "id_test", why)?;
    let ood_path = require(&cfg.ood_test, "ood_test", why)?;
    let id = load_embeddings(id_path)?;
    let ood = load_embeddings(ood_path)?;
    let report = GeometryReport::compute(&train, &id, &ood).map_err(|e| core_err("quality", e))?;
    if report.dispersion_deg.is_none() {
        eprintln!("warning: dispersion needs at least two classes; left empty");
    }
    ensure_dir(&cfg.out)?;
    let record = GeometryRecord {
        id_dataset: dataset_name(id_path),
        ood_dataset: dataset_name(ood_path),
        report: report.clone(),
    };
    report::write_json(&cfg.out.join("geometry.json"), &record)?;
    report::write_geometry_csv(&cfg.out.join("geometry.csv"), &report)?;
    Ok(report)
}

/// kNN ablation over `ks`; writes `sweep_k.json` and `sweep_k.csv`.
pub fn sweep(cfg: &RunConfig, ks: &[usize]) -> Result<Vec<SweepRow>, CliError> {
    let why = "sweep-k needs train, id_test and ood_test";
    let train = load_train(require(&cfg.train, "train", why)?)?;
    let id = load_embeddings(require(&cfg.id_test, "id_test", why)?)?;
    let ood = load_embeddings(require(&cfg.ood_test, "ood_test", why)?)?;
    let rows = sweep_k(&train, &id, &ood, ks, cfg.fpr_mode).map_err(|e| core_err("sweep-k", e))?;
    ensure_dir(&cfg.out)?;
    report::write_json(&cfg.out.join("sweep_k.json"), &rows)?;
    report::write_sweep_csv(&cfg.out.join("sweep_k.csv"), &rows)?;
    Ok(rows)
}

/// Worst relative gradient error seen per objective.
#[derive(Debug, Clone, Serialize)]
pub struct LossCheck {
    pub batches: usize,
    pub tolerance: f64,
    pub ce_max_rel_err: f64,
    pub supcon_max_rel_err: Vec<(f64, f64)>,
}

impl LossCheck {
    pub fn passed(&self) -> bool {
        self.ce_max_rel_err <= self.tolerance
            && self
                .supcon_max_rel_err
                .iter()
                .all(|&(_, e)| e <= self.tolerance)
    }
}

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Denominator floor for component-wise relative error.
pub const GRADCHECK_FLOOR: f64 = 1e-6;
pub const SUPCON_TEMPERATURES: [f64; 2] = [0.1, 0.7];

/// Compares analytic CE and SupCon gradients with central differences on
/// `batches` random batches per objective (and per temperature).
pub fn loss_check(seed: u64, batches: usize) -> Result<LossCheck, CliError> {
    let mut rng = CounterRng::new(seed, 0x1055);
    let mut ce_worst: f64 = 0.0;
    for _ in 0..batches {
        let (n, c) = (4, 3);
        let raw: Vec<f64> = (0..n * c).map(|_| 2.0 * rng.normal()).collect();
        let labels: Vec<u32> = (0..n).map(|_| rng.below(c) as u32).collect();
        let logits = LogitMatrix::new(n, c, raw.clone()).map_err(|e| core_err("loss-check", e))?;
        let analytic = ce_loss(&logits, &labels)
            .map_err(|e| core_err("loss-check", e))?
            .grad;
        let numeric = gradcheck::central_difference(&raw, GRADCHECK_STEP, |v| {
            LogitMatrix::new(n, c, v.to_vec())
                .and_then(|l| ce_loss(&l, &labels))
                .map(|r| r.loss)
                .unwrap_or(f64::NAN)
        });
        ce_worst = ce_worst.max(gradcheck::max_relative_error(
            &analytic,
            &numeric,
            GRADCHECK_FLOOR,
        ));
    }
    let mut supcon = Vec::new();
    for tau in SUPCON_TEMPERATURES {
        let mut worst: f64 = 0.0;
        for _ in 0..batches {
            let (n, d) = (6, 4);
            let raw: Vec<f64> = (0..n * d).map(|_| rng.normal()).collect();
            let labels: Vec<u32> = (0..n as u32).map(|i| i % 2).collect();
            let batch = EmbeddingMatrix::new(n, d, raw.clone())
                .and_then(|x| SupConBatch::new(x, labels.clone(), tau))
                .map_err(|e| core_err("loss-check", e))?;
            let analytic = supcon_loss(&batch)
                .map_err(|e| core_err("loss-check", e))?
                .grad;
            let numeric = gradcheck::central_difference(&raw, GRADCHECK_STEP, |v| {
                EmbeddingMatrix::new(n, d, v.to_vec())
                    .and_then(|x| SupConBatch::new(x, labels.clone(), tau))
                    .and_then(|b| supcon_loss(&b))
                    .map(|r| r.loss)
                    .unwrap_or(f64::NAN)
            });
            worst = worst.max(gradcheck::max_relative_error(
                &analytic,
                &numeric,
                GRADCHECK_FLOOR,
            ));
        }
        supcon.push((tau, worst));
    }
    Ok(LossCheck {
        batches,
        tolerance: GRADCHECK_TOLERANCE,
        ce_max_rel_err: ce_worst,
        supcon_max_rel_err: supcon,
    })
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    config_hash: String,
    created_unix: u64,
    config: &'a RunConfig,
    runs: Vec<String>,
}

/// Everything a pipeline run produced, per data set.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub name: String,
    pub dir: PathBuf,
    pub eval: Vec<EvalRecord>,
    pub geometry: GeometryReport,
}

/// synth (when regimes are configured) → score → eval → quality, then a
/// `manifest.json` with the config hash at the top of `out`.
pub fn pipeline(file: ConfigFile) -> Result<Vec<PipelineRun>, CliError> {
    let cfg = RunConfig::resolve(file)?;
    ensure_dir(&cfg.out)?;
    let mut runs = Vec::new();
    if cfg.regimes.is_empty() {
        runs.push(run_stages("data", &cfg)?);
    } else {
        for &regime in &cfg.regimes {
            let dir = cfg.out.join(regime.name());
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
            let paths = synth(&args, &dir)?;
            let stage_cfg = RunConfig {
                train: Some(paths.train),
                id_test: Some(paths.id_test),
                ood_test: Some(paths.ood_test),
                id_logits: Some(paths.id_logits),
                ood_logits: Some(paths.ood_logits),
                out: dir,
                ..cfg.clone()
            };
            runs.push(run_stages(regime.name(), &stage_cfg)?);
        }
    }
    let manifest = Manifest {
        config_hash: cfg.hash(),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config: &cfg,
        runs: runs.iter().map(|r| r.name.clone()).collect(),
    };
    report::write_json(&cfg.out.join("manifest.json"), &manifest)?;
    fs::write(cfg.out.join("config.toml"), cfg.canonical())
        .map_err(|e| CliError::input(format!("{}: {e}", cfg.out.display())))?;
    Ok(runs)
}

fn run_stages(name: &str, cfg: &RunConfig) -> Result<PipelineRun, CliError> {
    let eval = eval(cfg)?;
    let geometry = quality(cfg)?;
    Ok(PipelineRun {
        name: name.to_string(),
        dir: cfg.out.clone(),
        eval,
        geometry,
    })
}
