//! Config-driven commands behind the `regcca` binary. Every run writes its
//! artifacts under one output directory plus a `run_manifest.json` with the
//! config hash, seed, version and a hash of every file written.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::biplot::{export_biplot, structure_correlations, BiplotSource, View};
use crate::cca::{cca_from_covariance, CcaEstimate, FoldId};
use crate::compare::{overlap_matrix, register, trajectory_comparison, ComparisonMetric, RegistrationMode};
use crate::data::{make_folds, read_paired_csv, write_paired_csv, CovarianceModel, PairedDataset};
use crate::error::{Error, Result};
use crate::estimators::{sweep_trajectory, EstimatorKind, EstimatorSpec, SolverKnobs};
use crate::experiments::{
    default_grid, grid_best_median, log_grid, run_bootstrap_panel, run_canonical_pair, selected_median, write_bench_csv,
    BenchRecord, BootstrapPanel, CanonicalPairBench,
};
use crate::linalg::{self, Matrix};
use crate::metrics::{fmt_num, trajectory_report, AggregationKind, MetricReport, Oracle};
use crate::persist::save_estimate;
use crate::synth::{canonical_pair_covariance, mvn_sample, powerlaw_precision, WithinView};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fit,
    Sweep,
    Compare,
    Biplot,
    SynthBench,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Sweep => "sweep",
            Command::Compare => "compare",
            Command::Biplot => "biplot",
            Command::SynthBench => "synth-bench",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Command::Fit, Command::Sweep, Command::Compare, Command::Biplot, Command::SynthBench]
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub data: Option<DataConfig>,
    pub generator: Option<GeneratorConfig>,
    #[serde(default)]
    pub estimators: Vec<EstimatorConfig>,
    /// Grid shared by estimators that do not set their own.
    pub grid: Option<GridConfig>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub folds: FoldsConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub registration: RegistrationConfig,
    #[serde(default)]
    pub biplot: BiplotConfig,
    pub bench: Option<BenchConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_k() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// CSV files with a header row; relative paths resolve against the config file.
    pub x: PathBuf,
    pub y: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorConfig {
    CanonicalPair {
        p: usize,
        q: usize,
        rhos: Vec<f64>,
        support: usize,
        #[serde(default)]
        within_view: WithinView,
        n: usize,
    },
    Powerlaw {
        p: usize,
        q: usize,
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_edge_scale")]
        edge_weight_scale: f64,
        n: usize,
    },
}

fn default_gamma() -> f64 {
    3.0
}

fn default_edge_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    /// Single penalty for `fit`, `biplot` and the `compare` overlap estimate.
    pub penalty: Option<f64>,
    pub grid: Option<GridConfig>,
    /// Defaults to the top-level `k`.
    pub k: Option<usize>,
    /// Defaults to the estimator name.
    pub label: Option<String>,
    #[serde(default)]
    pub knobs: SolverKnobs,
}

/// Either explicit `values` or a log-spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub values: Option<Vec<f64>>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    #[serde(default = "default_per_decade")]
    pub per_decade: usize,
}

fn default_per_decade() -> usize {
    9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldsConfig {
    #[serde(rename = "V", alias = "v")]
    pub v: usize,
    /// Defaults to the run seed.
    pub seed: Option<u64>,
}

impl Default for FoldsConfig {
    fn default() -> Self {
        FoldsConfig { v: 5, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Defaults to those of 1, 3, 5 within each estimator's `K`.
    pub k_list: Option<Vec<usize>>,
    pub aggregations: Vec<AggregationKind>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            k_list: None,
            aggregations: vec![AggregationKind::SqSum],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    pub mode: RegistrationMode,
    /// Index into `estimators` of the reference estimate.
    pub reference: usize,
    pub metric: ComparisonMetric,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        RegistrationConfig {
            mode: RegistrationMode::Orthogonal,
            reference: 0,
            metric: ComparisonMetric::VariateSubspace,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiplotConfig {
    pub view: View,
    /// Defaults to `min(2, k)`.
    pub k: Option<usize>,
    pub threshold: f64,
}

impl Default for BiplotConfig {
    fn default() -> Self {
        BiplotConfig {
            view: View::X,
            k: None,
            threshold: 0.0,
        }
    }
}

/// Named synthetic experiment; its `base_seed` is replaced by the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum BenchConfig {
    CanonicalPair(CanonicalPairBench),
    BootstrapPanel(BootstrapPanel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Write every sweep cell's estimate files, not just the summaries.
    pub cell_estimates: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { cell_estimates: true }
    }
}

/// Parse a config document, reporting syntax and schema errors as config errors.
pub fn parse_config(text: &str) -> Result<Config> {
    serde_json::from_str(text).map_err(|e| Error::config(format!("line {} column {}", e.line(), e.column()), e.to_string()))
}

impl GridConfig {
    fn resolve(&self, field: &str) -> Result<Vec<f64>> {
        match (&self.values, self.lo, self.hi) {
            (Some(v), None, None) => {
                if v.is_empty() {
                    return Err(Error::config(format!("{field}.values"), "grid is empty"));
                }
                Ok(v.clone())
            }
            (None, Some(lo), Some(hi)) => log_grid(lo, hi, self.per_decade).map_err(|e| Error::config(field, e.to_string())),
            _ => Err(Error::config(field, "give either `values` or both `lo` and `hi`")),
        }
    }
}

/// Everything a command needs, validated.
struct Prepared {
    data: PairedDataset,
    model: Option<(CovarianceModel, CcaEstimate)>,
    estimators: Vec<Resolved>,
    seed: u64,
}

struct Resolved {
    label: String,
    spec: EstimatorSpec,
    penalty: Option<f64>,
    grid: Vec<f64>,
}

fn load_data(cfg: &Config, base: &Path, seed: u64) -> Result<(PairedDataset, Option<(CovarianceModel, CcaEstimate)>)> {
    match (&cfg.data, &cfg.generator) {
        (Some(d), None) => {
            let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
            Ok((read_paired_csv(&resolve(&d.x), &resolve(&d.y))?, None))
        }
        (None, Some(GeneratorConfig::CanonicalPair { p, q, rhos, support, within_view, n })) => {
            let (cov, truth) = canonical_pair_covariance(*p, *q, rhos, *support, *within_view, seed)
                .map_err(|e| Error::config("generator", e.to_string()))?;
            let data = mvn_sample(&cov, *n, seed.wrapping_add(1))?;
            Ok((data, Some((cov, truth))))
        }
        (None, Some(GeneratorConfig::Powerlaw { p, q, gamma, edge_weight_scale, n })) => {
            let omega = powerlaw_precision(p + q, *gamma, *edge_weight_scale, seed)
                .map_err(|e| Error::config("generator", e.to_string()))?;
            let cov = CovarianceModel::from_joint(&linalg::spd_inverse(&omega)?, *p)?;
            let truth = cca_from_covariance(&cov, (*p).min(*q), None)?;
            let data = mvn_sample(&cov, *n, seed.wrapping_add(1))?;
            Ok((data, Some((cov, truth))))
        }
        (Some(_), Some(_)) => Err(Error::config("data", "give either `data` or `generator`, not both")),
        (None, None) => Err(Error::config("data", "one of `data` or `generator` is required")),
    }
}

fn prepare(cfg: &Config, base: &Path, seed: u64, needs_penalty: bool) -> Result<Prepared> {
    if cfg.estimators.is_empty() {
        return Err(Error::config("estimators", "at least one estimator is required"));
    }
    let (data, model) = load_data(cfg, base, seed)?;
    let kmax = data.p().min(data.q());
    let mut labels = BTreeSet::new();
    let mut estimators = Vec::new();
    for (i, e) in cfg.estimators.iter().enumerate() {
        let field = format!("estimators[{i}]");
        let label = e.label.clone().unwrap_or_else(|| e.kind.name().to_string());
        if label.is_empty() || label.contains(['/', '\\']) {
            return Err(Error::config(format!("{field}.label"), "labels must be non-empty file-name fragments"));
        }
        if !labels.insert(label.clone()) {
            return Err(Error::config(format!("{field}.label"), format!("duplicate label `{label}`")));
        }
        let k = e.k.unwrap_or(cfg.k);
        if k == 0 || k > kmax {
            return Err(Error::config(format!("{field}.k"), format!("K = {k} must lie in 1..={kmax}")));
        }
        if let Some(pen) = e.penalty {
            e.kind
                .check_penalty(pen)
                .map_err(|err| Error::config(format!("{field}.penalty"), err.to_string()))?;
        } else if needs_penalty {
            return Err(Error::config(format!("{field}.penalty"), "required for this command"));
        }
        let grid = match (&e.grid, &cfg.grid) {
            (Some(g), _) => g.resolve(&format!("{field}.grid"))?,
            (None, Some(g)) => g.resolve("grid")?,
            (None, None) => default_grid(e.kind, data.p(), data.q(), default_per_decade())?,
        };
        for &pen in &grid {
            e.kind
                .check_penalty(pen)
                .map_err(|err| Error::config(format!("{field}.grid"), err.to_string()))?;
        }
        estimators.push(Resolved {
            label,
            spec: EstimatorSpec {
                kind: e.kind,
                penalty: e.penalty.unwrap_or(grid[0]),
                k,
                knobs: e.knobs,
            },
            penalty: e.penalty,
            grid,
        });
    }
    Ok(Prepared {
        data,
        model,
        estimators,
        seed,
    })
}

/// Bookkeeping for files written during a run.
struct Outputs {
    root: PathBuf,
    files: Vec<PathBuf>,
    warnings: Vec<String>,
}

impl Outputs {
    fn dir(&self, rel: &str) -> Result<PathBuf> {
        let d = self.root.join(rel);
        std::fs::create_dir_all(&d)?;
        Ok(d)
    }

    fn add(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.files.extend(paths);
    }

    fn write(&mut self, path: PathBuf, text: &str) -> Result<()> {
        std::fs::write(&path, text)?;
        self.files.push(path);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub warnings: Vec<String>,
    /// Output files (relative to the output directory) and their SHA-256.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Execute `command` with the config at `config_path`, writing under `out`.
/// `seed` overrides the config seed.
pub fn run(command: Command, config_path: &Path, out: &Path, seed: Option<u64>) -> Result<RunSummary> {
    let text = std::fs::read_to_string(config_path)?;
    let cfg = parse_config(&text)?;
    let seed = seed.unwrap_or(cfg.seed);
    let base = config_path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(out)?;
    let mut outputs = Outputs {
        root: out.to_path_buf(),
        files: Vec::new(),
        warnings: Vec::new(),
    };
    match command {
        Command::SynthBench => synth_bench(&cfg, seed, &mut outputs)?,
        _ => {
            let needs_penalty = matches!(command, Command::Fit | Command::Biplot);
            let prep = prepare(&cfg, base, seed, needs_penalty)?;
            if cfg.generator.is_some() {
                let d = outputs.dir("data")?;
                let (x, y) = (d.join("x.csv"), d.join("y.csv"));
                write_paired_csv(&prep.data, &x, &y)?;
                outputs.add([x, y]);
            }
            match command {
                Command::Fit => fit(&prep, &mut outputs)?,
                Command::Sweep => sweep(&cfg, &prep, &mut outputs)?,
                Command::Compare => compare(&cfg, &prep, &mut outputs)?,
                Command::Biplot => biplot(&cfg, &prep, &mut outputs)?,
                Command::SynthBench => unreachable!(),
            }
        }
    }
    let mut files = BTreeMap::new();
    for f in &outputs.files {
        let rel = f.strip_prefix(out).unwrap_or(f).to_string_lossy().replace('\\', "/");
        files.insert(rel, sha256_hex(&std::fs::read(f)?));
    }
    let manifest = RunManifest {
        command: command.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: sha256_hex(text.as_bytes()),
        seed,
        warnings: outputs.warnings,
        files,
    };
    let manifest_path = out.join("run_manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(RunSummary { manifest, manifest_path })
}

fn fit_single(prep: &Prepared, r: &Resolved) -> Result<CcaEstimate> {
    let pen = r.penalty.ok_or_else(|| Error::config(&r.label, "penalty required"))?;
    r.spec.with_penalty(pen).fit(&prep.data)
}

fn fit(prep: &Prepared, outputs: &mut Outputs) -> Result<()> {
    let dir = outputs.dir("fit")?;
    for r in &prep.estimators {
        let est = fit_single(prep, r)?;
        let paths = save_estimate(&est, &dir, &r.label, &prep.data.x_names, &prep.data.y_names)?;
        outputs.add(paths);
    }
    Ok(())
}

#[derive(Serialize)]
struct CellSummary {
    penalty_index: usize,
    penalty: f64,
    fold: FoldId,
    status: &'static str,
    message: Option<String>,
}

#[derive(Serialize)]
struct TrajectorySummary<'a> {
    algorithm: &'a str,
    label: &'a str,
    k: usize,
    grid: &'a [f64],
    folds: usize,
    fold_seed: u64,
    cells: Vec<CellSummary>,
}

fn k_list_for(cfg: &Config, r: &Resolved) -> Result<Vec<usize>> {
    match &cfg.metrics.k_list {
        None => Ok(DEFAULT_K_LIST.iter().copied().filter(|&k| k <= r.spec.k).collect()),
        Some(list) => match list.iter().find(|&&k| k == 0 || k > r.spec.k) {
            Some(bad) => Err(Error::config(
                "metrics.k_list",
                format!("k = {bad} is outside 1..={} for estimator `{}`", r.spec.k, r.label),
            )),
            None if list.is_empty() => Err(Error::config("metrics.k_list", "list is empty")),
            None => Ok(list.clone()),
        },
    }
}

const DEFAULT_K_LIST: [usize; 3] = [1, 3, 5];

fn sweep(cfg: &Config, prep: &Prepared, outputs: &mut Outputs) -> Result<()> {
    if cfg.metrics.aggregations.is_empty() {
        return Err(Error::config("metrics.aggregations", "at least one aggregation is required"));
    }
    let k_lists = prep.estimators.iter().map(|r| k_list_for(cfg, r)).collect::<Result<Vec<_>>>()?;
    let fold_seed = cfg.folds.seed.unwrap_or(prep.seed);
    let plan = make_folds(prep.data.n(), cfg.folds.v, fold_seed).map_err(|e| Error::config("folds", e.to_string()))?;
    let oracle = prep.model.as_ref().map(|(cov, truth)| Oracle { cov, truth });
    let mut report = MetricReport::default();
    for (r, k_list) in prep.estimators.iter().zip(&k_lists) {
        let traj = sweep_trajectory(&r.spec, &prep.data, &r.grid, &plan)?;
        let dir = outputs.dir(&format!("sweep/{}", r.label))?;
        let mut cells = Vec::new();
        for cell in &traj.cells {
            let (status, message) = match &cell.outcome {
                Ok(est) => {
                    if cfg.output.cell_estimates {
                        let stem = format!("p{:03}_{}", cell.penalty_index, cell.fold);
                        let paths = save_estimate(est, &dir, &stem, &prep.data.x_names, &prep.data.y_names)?;
                        outputs.add(paths);
                    }
                    ("ok", None)
                }
                Err(f) => {
                    outputs.warnings.push(format!(
                        "{}: penalty {} fold {} failed: {}",
                        r.label, cell.penalty, cell.fold, f.message
                    ));
                    ("failed", Some(f.message.clone()))
                }
            };
            cells.push(CellSummary {
                penalty_index: cell.penalty_index,
                penalty: cell.penalty,
                fold: cell.fold,
                status,
                message,
            });
        }
        let summary = TrajectorySummary {
            algorithm: r.spec.kind.name(),
            label: &r.label,
            k: r.spec.k,
            grid: &r.grid,
            folds: plan.folds,
            fold_seed,
            cells,
        };
        outputs.write(dir.join("trajectory.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
        let mut part = trajectory_report(&traj, &prep.data, k_list, &cfg.metrics.aggregations, oracle);
        for rec in &mut part.records {
            rec.algorithm = r.label.clone();
        }
        report.records.extend(part.records);
    }
    let path = outputs.root.join("metrics.csv");
    report.write_csv(&path)?;
    outputs.add([path]);
    Ok(())
}

/// Orthonormal basis of the centred variates `X·U_k`, built column by column so
/// that column `j` spans the first `j` variates. `None` if the variates are rank deficient.
fn variate_basis(data: &PairedDataset, est: &CcaEstimate, k: usize) -> Option<Matrix> {
    let z = &data.ensure_centred().x * est.u_k(k);
    let (basis, kept) = linalg::gram_schmidt_reduced(&z, 1e-10);
    (kept.len() == k).then_some(basis)
}

fn compare(cfg: &Config, prep: &Prepared, outputs: &mut Outputs) -> Result<()> {
    let reg = &cfg.registration;
    if reg.reference >= prep.estimators.len() {
        return Err(Error::config("registration.reference", "index is out of range"));
    }
    let k = prep.estimators.iter().map(|r| r.spec.k).min().unwrap_or(1);
    let dir = outputs.dir("compare")?;

    // Full-data path of every estimator.
    let tasks: Vec<(usize, f64)> = prep
        .estimators
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.grid.iter().map(move |&p| (i, p)))
        .collect();
    let fits: Vec<Result<CcaEstimate>> = tasks
        .par_iter()
        .map(|&(i, pen)| prep.estimators[i].spec.with_penalty(pen).fit(&prep.data))
        .collect();
    let mut path = Vec::new();
    for (&(i, pen), fit) in tasks.iter().zip(fits) {
        match fit {
            Ok(mut est) => {
                est.provenance.algorithm = prep.estimators[i].label.clone();
                path.push(est);
            }
            Err(e) => outputs
                .warnings
                .push(format!("{}: penalty {pen} failed: {e}", prep.estimators[i].label)),
        }
    }
    let refs: Vec<&CcaEstimate> = path.iter().collect();
    let cmp = trajectory_comparison(&refs, &prep.data, reg.metric, k)?;
    let p = dir.join("trajectory_comparison.csv");
    cmp.write_csv(&p)?;
    outputs.add([p]);

    // Registered overlap of each selected estimate against the reference.
    let selected: Vec<CcaEstimate> = prep
        .estimators
        .iter()
        .map(|r| {
            let pen = r.penalty.unwrap_or(r.grid[r.grid.len() / 2]);
            r.spec.with_penalty(pen).fit(&prep.data)
        })
        .collect::<Result<_>>()?;
    let reference = &prep.estimators[reg.reference];
    let z0 = variate_basis(&prep.data, &selected[reg.reference], k)
        .ok_or_else(|| Error::invalid(format!("reference `{}` has rank-deficient variates", reference.label)))?;
    let names = |label: &str| (1..=k).map(|j| format!("{label}_{j}")).collect::<Vec<_>>();
    let mut residuals = String::from("label,mode,residual\n");
    for (r, est) in prep.estimators.iter().zip(&selected) {
        let Some(z1) = variate_basis(&prep.data, est, k) else {
            outputs.warnings.push(format!("{}: rank-deficient variates, no overlap written", r.label));
            continue;
        };
        let registration = match register(&z0, &z1, reg.mode) {
            Ok(x) => x,
            Err(e) => {
                outputs.warnings.push(format!("{}: registration failed: {e}", r.label));
                continue;
            }
        };
        let aligned = z1 * &registration.transform;
        let overlap = overlap_matrix(&z0, &aligned, true, false)?;
        let p = dir.join(format!("overlap_{}.csv", r.label));
        overlap.write_csv(&p, &names(&reference.label), &names(&r.label))?;
        outputs.add([p]);
        let mode = serde_json::to_value(reg.mode)?;
        residuals.push_str(&format!(
            "{},{},{}\n",
            r.label,
            mode.as_str().unwrap_or_default(),
            fmt_num(registration.residual)
        ));
    }
    outputs.write(dir.join("registration.csv"), &residuals)?;
    Ok(())
}

fn biplot(cfg: &Config, prep: &Prepared, outputs: &mut Outputs) -> Result<()> {
    let dir = outputs.dir("biplot")?;
    for r in &prep.estimators {
        let k = cfg.biplot.k.unwrap_or(r.spec.k.min(2));
        if k == 0 || k > r.spec.k {
            return Err(Error::config("biplot.k", format!("must lie in 1..={}", r.spec.k)));
        }
        let est = fit_single(prep, r)?;
        let coords = structure_correlations(BiplotSource::Sample(&prep.data), &est, cfg.biplot.view, k)?;
        outputs
            .warnings
            .extend(coords.warnings.iter().map(|w| format!("{}: {w}", r.label)));
        let p = dir.join(format!("{}.csv", r.label));
        export_biplot(&coords, cfg.biplot.threshold, &p)?;
        outputs.add([p]);
    }
    Ok(())
}

fn synth_bench(cfg: &Config, seed: u64, outputs: &mut Outputs) -> Result<()> {
    let bench = cfg.bench.as_ref().ok_or_else(|| Error::config("bench", "required for synth-bench"))?;
    let dir = outputs.dir("bench")?;
    let mut summary = String::from("experiment,estimator,n,selection,metric,median\n");
    let records: Vec<BenchRecord> = match bench {
        BenchConfig::CanonicalPair(b) => {
            let b = CanonicalPairBench {
                base_seed: seed,
                ..b.clone()
            };
            let recs = run_canonical_pair(&b)?;
            for kind in &b.estimators {
                for &n in &b.n_list {
                    for (metric, maximise) in [("r1s1", true), ("vt-u1", false), ("wt-u1", false)] {
                        let m = grid_best_median(&recs, kind.name(), n, metric, maximise);
                        summary.push_str(&format!("canonical_pair,{},{n},grid_best,{metric},{}\n", kind, fmt_num(m)));
                    }
                }
            }
            recs
        }
        BenchConfig::BootstrapPanel(b) => {
            let b = BootstrapPanel {
                base_seed: seed,
                ..b.clone()
            };
            let recs = run_bootstrap_panel(&b)?;
            let keys: BTreeSet<(String, String, String)> = recs
                .iter()
                .map(|r| (r.estimator.clone(), r.selection.clone(), r.metric.clone()))
                .collect();
            for kind in &b.estimators {
                for (est, sel, metric) in keys.iter().filter(|k| k.0 == kind.name()) {
                    let m = selected_median(&recs, est, sel, metric);
                    summary.push_str(&format!("bootstrap_panel,{est},{},{sel},{metric},{}\n", b.n, fmt_num(m)));
                }
            }
            recs
        }
    };
    let p = dir.join("records.csv");
    write_bench_csv(&records, &p)?;
    outputs.add([p]);
    outputs.write(dir.join("summary.csv"), &summary)?;
    Ok(())
}

/// Process exit status for a failed run: 2 for configuration problems, 3 for
/// solver hard failures, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => 2,
        Error::Convergence { .. }
        | Error::RankDeficient { .. }
        | Error::ZeroVariance { .. }
        | Error::NonFinite
        | Error::NotOrthonormal { .. } => 3,
        _ => 1,
    }
}
