//! Scaled-down synthetic benchmarks: estimation error against sample size on
//! canonical-pair models, and a parametric-bootstrap panel with CV-selected
//! penalties.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cca::cca_from_covariance;
use crate::data::{make_folds, CovarianceModel};
use crate::error::{Error, Result};
use crate::estimators::{sweep_trajectory, EstimatorKind, EstimatorSpec, SolverKnobs};
use crate::linalg::{self, Matrix};
use crate::metrics::{estimation_error, fmt_num, oracle_correlations, trajectory_report, AggregationKind, Oracle};
use crate::synth::{bootstrap_covariance, canonical_pair_covariance, mvn_sample, powerlaw_precision, BootstrapMode, WithinView};

/// Log-spaced grid from `lo` upwards with `per_decade` points per factor of
/// ten, stopping at `hi` (included when it falls on the grid).
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || per_decade == 0 {
        return Err(Error::invalid("log grid needs 0 < lo <= hi and per_decade >= 1"));
    }
    let steps = ((hi / lo).log10() * per_decade as f64 + 1e-9).floor() as usize;
    Ok((0..=steps)
        .map(|i| lo * 10f64.powf(i as f64 / per_decade as f64))
        .collect())
}

/// Default penalty range for an estimator on `p × q` data.
pub fn default_grid(kind: EstimatorKind, p: usize, q: usize, per_decade: usize) -> Result<Vec<f64>> {
    match kind {
        EstimatorKind::Rcca => log_grid(1e-3, 1.0, per_decade),
        EstimatorKind::Spls => log_grid(1.0, (p.min(q) as f64).sqrt(), per_decade),
        EstimatorKind::Scca => log_grid(1e-3, 0.3, per_decade),
        EstimatorKind::Gcca => log_grid(1e-3, 1.0, per_decade),
    }
}

fn data_seed(seed: u64, salt: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt
}

/// One long-format benchmark row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub experiment: String,
    pub estimator: String,
    pub n: usize,
    pub seed: u64,
    /// How the penalty was chosen: `grid` for every grid point, otherwise
    /// the name of the CV criterion that selected it.
    pub selection: String,
    pub penalty: f64,
    pub metric: String,
    pub value: f64,
}

pub fn write_bench_csv(records: &[BenchRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["experiment", "estimator", "n", "seed", "selection", "penalty", "metric", "value"])?;
    for r in records {
        w.write_record([
            r.experiment.clone(),
            r.estimator.clone(),
            r.n.to_string(),
            r.seed.to_string(),
            r.selection.clone(),
            fmt_num(r.penalty),
            r.metric.clone(),
            fmt_num(r.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CanonicalPairBench {
    pub p: usize,
    pub q: usize,
    pub rhos: Vec<f64>,
    pub support: usize,
    pub within_view: WithinView,
    pub n_list: Vec<usize>,
    pub seeds: usize,
    pub base_seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub per_decade: usize,
    pub knobs: SolverKnobs,
}

impl Default for CanonicalPairBench {
    fn default() -> Self {
        CanonicalPairBench {
            p: 30,
            q: 30,
            rhos: vec![0.9],
            support: 5,
            within_view: WithinView::SuoSp,
            n_list: vec![100, 400],
            seeds: 10,
            base_seed: 0,
            estimators: EstimatorKind::ALL.to_vec(),
            per_decade: 4,
            knobs: SolverKnobs::default(),
        }
    }
}

/// Fit every estimator at every grid penalty on full samples of each size and
/// record the oracle first-pair correlation `r1s1` and the errors `vt-u1`, `wt-u1`.
pub fn run_canonical_pair(cfg: &CanonicalPairBench) -> Result<Vec<BenchRecord>> {
    let mut tasks = Vec::new();
    for s in 0..cfg.seeds as u64 {
        let seed = cfg.base_seed + s;
        for &n in &cfg.n_list {
            for &kind in &cfg.estimators {
                for pen in default_grid(kind, cfg.p, cfg.q, cfg.per_decade)? {
                    tasks.push((seed, n, kind, pen));
                }
            }
        }
    }
    let models = (0..cfg.seeds as u64)
        .map(|s| {
            let seed = cfg.base_seed + s;
            canonical_pair_covariance(cfg.p, cfg.q, &cfg.rhos, cfg.support, cfg.within_view, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let samples = tasks
        .iter()
        .map(|&(seed, n, _, _)| (seed, n))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .map(|(seed, n)| {
            let (cov, _) = &models[(seed - cfg.base_seed) as usize];
            Ok(((seed, n), mvn_sample(cov, n, data_seed(seed, n as u64))?.centred()))
        })
        .collect::<Result<std::collections::BTreeMap<_, _>>>()?;

    let rows: Vec<Vec<BenchRecord>> = tasks
        .into_par_iter()
        .map(|(seed, n, kind, pen)| {
            let (cov, truth) = &models[(seed - cfg.base_seed) as usize];
            let data = &samples[&(seed, n)];
            let spec = EstimatorSpec {
                kind,
                penalty: pen,
                k: 1,
                knobs: cfg.knobs,
            };
            let (r1, err) = match spec.fit(data) {
                Ok(est) => (
                    oracle_correlations(cov, &est.u, &est.v, 1).map(|r| r[0].abs()).unwrap_or(f64::NAN),
                    estimation_error(cov, truth, &est, 1).ok(),
                ),
                Err(_) => (f64::NAN, None),
            };
            let rec = |metric: &str, value: f64| BenchRecord {
                experiment: "canonical_pair".into(),
                estimator: kind.name().into(),
                n,
                seed,
                selection: "grid".into(),
                penalty: pen,
                metric: metric.into(),
                value,
            };
            vec![
                rec("r1s1", r1),
                rec("vt-u1", err.map(|e| e.vt_uk).unwrap_or(f64::NAN)),
                rec("wt-u1", err.map(|e| e.wt_uk).unwrap_or(f64::NAN)),
            ]
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Median over seeds of the per-seed grid optimum of `metric` (largest when
/// `maximise`, else smallest). NaN cells are ignored.
pub fn grid_best_median(records: &[BenchRecord], estimator: &str, n: usize, metric: &str, maximise: bool) -> f64 {
    let mut best = std::collections::BTreeMap::<u64, f64>::new();
    for r in records {
        if r.estimator == estimator && r.n == n && r.metric == metric && !r.value.is_nan() {
            let e = best.entry(r.seed).or_insert(r.value);
            *e = if maximise { e.max(r.value) } else { e.min(r.value) };
        }
    }
    median(&mut best.into_values().collect::<Vec<_>>())
}

/// Median over seeds of a metric recorded under a given selection rule.
pub fn selected_median(records: &[BenchRecord], estimator: &str, selection: &str, metric: &str) -> f64 {
    let mut vals: Vec<f64> = records
        .iter()
        .filter(|r| r.estimator == estimator && r.selection == selection && r.metric == metric)
        .map(|r| r.value)
        .collect();
    median(&mut vals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapPanel {
    pub p: usize,
    pub q: usize,
    /// Size of the synthetic seed dataset the bootstrap model is fitted to.
    pub seed_n: usize,
    pub gamma: f64,
    pub edge_weight_scale: f64,
    pub bootstrap_lambda: f64,
    pub n: usize,
    pub folds: usize,
    pub seeds: usize,
    pub base_seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub per_decade: usize,
    pub knobs: SolverKnobs,
}

impl Default for BootstrapPanel {
    fn default() -> Self {
        BootstrapPanel {
            p: 60,
            q: 30,
            seed_n: 458,
            gamma: 3.0,
            edge_weight_scale: 1.0,
            bootstrap_lambda: 0.05,
            n: 500,
            folds: 5,
            seeds: 10,
            base_seed: 0,
            estimators: EstimatorKind::ALL.to_vec(),
            per_decade: 3,
            knobs: SolverKnobs::default(),
        }
    }
}

/// Selection criteria and the oracle/CV quantities reported at each.
const PANEL_SELECTIONS: [(&str, &[&str]); 2] = [
    ("r2s1-cv", &["r2s1-cv", "r2s1", "vt-U1", "wt-U1"]),
    ("r2s3-cv", &["r2s3-cv", "R2s3-cv", "r2s3", "vt-U3", "wt-U3"]),
];

/// Bootstrap covariance for one seed: power-law precision, rescaled to unit
/// variances, sampled, then re-estimated by the graphical lasso.
pub fn panel_model(cfg: &BootstrapPanel, seed: u64) -> Result<CovarianceModel> {
    let d = cfg.p + cfg.q;
    let omega = powerlaw_precision(d, cfg.gamma, cfg.edge_weight_scale, seed)?;
    let sigma = linalg::spd_inverse(&omega)?;
    let sd: Vec<f64> = sigma.diagonal().iter().map(|v| 1.0 / v.sqrt()).collect();
    let corr = linalg::symmetrize(&Matrix::from_fn(d, d, |i, j| sigma[(i, j)] * sd[i] * sd[j]));
    let base = CovarianceModel::from_joint(&corr, cfg.p)?;
    let seed_data = mvn_sample(&base, cfg.seed_n, data_seed(seed, 1))?;
    Ok(bootstrap_covariance(&seed_data, BootstrapMode::Glasso { lambda: cfg.bootstrap_lambda })?.cov)
}

/// For each seed and estimator: sweep the grid with V-fold CV on a bootstrap
/// sample, pick the penalty maximising each CV criterion, and record oracle
/// and CV quantities there.
pub fn run_bootstrap_panel(cfg: &BootstrapPanel) -> Result<Vec<BenchRecord>> {
    let k = 3;
    let mut out = Vec::new();
    for s in 0..cfg.seeds as u64 {
        let seed = cfg.base_seed + s;
        let cov = panel_model(cfg, seed)?;
        let truth = cca_from_covariance(&cov, k, None)?;
        let data = mvn_sample(&cov, cfg.n, data_seed(seed, 2))?.centred();
        let plan = make_folds(cfg.n, cfg.folds, data_seed(seed, 3))?;
        for &kind in &cfg.estimators {
            let grid = default_grid(kind, cfg.p, cfg.q, cfg.per_decade)?;
            let spec = EstimatorSpec {
                kind,
                penalty: grid[0],
                k,
                knobs: cfg.knobs,
            };
            let traj = sweep_trajectory(&spec, &data, &grid, &plan)?;
            let report = trajectory_report(
                &traj,
                &data,
                &[1, k],
                &[AggregationKind::SqSum],
                Some(Oracle { cov: &cov, truth: &truth }),
            );
            for (selection, metrics) in PANEL_SELECTIONS {
                let best = grid
                    .iter()
                    .copied()
                    .filter_map(|pen| report.find(kind.name(), pen, selection).map(|r| (pen, r.value)))
                    .filter(|(_, v)| !v.is_nan())
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                let Some((pen, _)) = best else { continue };
                for &metric in metrics {
                    let value = report.find(kind.name(), pen, metric).map(|r| r.value).unwrap_or(f64::NAN);
                    out.push(BenchRecord {
                        experiment: "bootstrap_panel".into(),
                        estimator: kind.name().into(),
                        n: cfg.n,
                        seed,
                        selection: selection.into(),
                        penalty: pen,
                        metric: metric.into(),
                        value,
                    });
                }
            }
        }
    }
    Ok(out)
}
