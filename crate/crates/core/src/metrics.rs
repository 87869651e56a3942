//! Correlation-captured and estimation-accuracy criteria, in oracle and
//! cross-validated forms, plus Gaussian mutual information.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cca::{cca_from_covariance, empirical_canonical_correlations, CcaEstimate, FoldId};
use crate::data::{CovarianceModel, FoldPlan, PairedDataset};
use crate::error::{Error, Result};
use crate::estimators::TrajectoryResult;
use crate::linalg::{self, Matrix, MatrixPower, Vector};

/// Correlations are clamped to this magnitude before taking `log(1 − ρ²)`.
pub const MI_CLAMP: f64 = 1.0 - 1e-9;

/// Maps a vector of correlations to a scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationKind {
    L1Sum,
    SqSum,
    MutualInfo,
}

impl AggregationKind {
    pub const ALL: [AggregationKind; 3] = [AggregationKind::L1Sum, AggregationKind::SqSum, AggregationKind::MutualInfo];

    pub fn apply(self, rho: &[f64]) -> f64 {
        match self {
            AggregationKind::L1Sum => rho.iter().map(|r| r.abs()).sum(),
            AggregationKind::SqSum => rho.iter().map(|r| r * r).sum(),
            AggregationKind::MutualInfo => mutual_information(rho),
        }
    }

    /// Short stem used in metric names: `r2s3`, `R2s3-cv`, ...
    fn stems(self) -> (&'static str, &'static str) {
        match self {
            AggregationKind::L1Sum => ("r1s", "R1s"),
            AggregationKind::SqSum => ("r2s", "R2s"),
            AggregationKind::MutualInfo => ("mis", "MIs"),
        }
    }

    pub fn successive_name(self, k: usize, cv: bool) -> String {
        format!("{}{k}{}", self.stems().0, if cv { "-cv" } else { "" })
    }

    pub fn subspace_name(self, k: usize, cv: bool) -> String {
        format!("{}{k}{}", self.stems().1, if cv { "-cv" } else { "" })
    }
}

/// `−½ Σ log(1 − ρ_k²)`, with `|ρ_k|` clamped at [`MI_CLAMP`].
pub fn mutual_information(rho: &[f64]) -> f64 {
    rho.iter()
        .map(|r| {
            let r = r.abs().min(MI_CLAMP);
            -0.5 * (1.0 - r * r).ln()
        })
        .sum()
}

/// `½ log(|Σxx||Σyy| / |Σ|)` for a positive definite joint covariance.
pub fn gauss_mutual_info(cov: &CovarianceModel) -> Result<f64> {
    let lx = linalg::log_det_spd(&cov.sxx)?;
    let ly = linalg::log_det_spd(&cov.syy)?;
    let lj = linalg::log_det_spd(&cov.joint())?;
    Ok((0.5 * (lx + ly - lj)).max(0.0))
}

/// Population correlation of the variates `uᵀX` and `vᵀY`.
pub fn oracle_corr(cov: &CovarianceModel, u: &Vector, v: &Vector) -> Result<f64> {
    if u.len() != cov.p() || v.len() != cov.q() {
        return Err(Error::invalid("direction lengths do not match the covariance blocks"));
    }
    let vx = u.dot(&(&cov.sxx * u));
    let vy = v.dot(&(&cov.syy * v));
    if !(vx > 0.0) || !(vy > 0.0) {
        return Err(Error::ZeroVariance {
            block: if vx > 0.0 { "y variate" } else { "x variate" },
            column: 0,
        });
    }
    Ok(u.dot(&(&cov.sxy * v)) / (vx * vy).sqrt())
}

fn check_pairs(u: &Matrix, v: &Matrix, k: usize) -> Result<()> {
    if u.ncols() < k || v.ncols() < k {
        return Err(Error::invalid(format!(
            "need {k} direction pairs, have {} and {}",
            u.ncols(),
            v.ncols()
        )));
    }
    Ok(())
}

/// Oracle correlations of the first `k` pairs; zero directions score 0.
pub fn oracle_correlations(cov: &CovarianceModel, u: &Matrix, v: &Matrix, k: usize) -> Result<Vector> {
    check_pairs(u, v, k)?;
    let mut out = Vector::zeros(k);
    for j in 0..k {
        out[j] = match oracle_corr(cov, &u.column(j).into_owned(), &v.column(j).into_owned()) {
            Ok(r) => r,
            Err(Error::ZeroVariance { .. }) => 0.0,
            Err(e) => return Err(e),
        };
    }
    Ok(out)
}

/// `f` applied to the oracle correlations of the successive pairs of `(U, V)`.
pub fn succ_cc_agg(f: AggregationKind, cov: &CovarianceModel, u: &Matrix, v: &Matrix) -> Result<f64> {
    let rho = oracle_correlations(cov, u, v, u.ncols().min(v.ncols()))?;
    Ok(f.apply(rho.as_slice()))
}

/// Orthonormal basis for the span of the first `k` columns (dependent columns dropped).
fn span_basis(m: &Matrix, k: usize) -> Matrix {
    linalg::gram_schmidt_reduced(&m.columns(0, k).into_owned(), 1e-10).0
}

/// `f` applied to the canonical correlations between the projected blocks
/// `U_kᵀX` and `V_kᵀY`. Rank-deficient blocks are reduced to their span.
pub fn subsp_cc_agg(f: AggregationKind, cov: &CovarianceModel, u: &Matrix, v: &Matrix, k: usize) -> Result<f64> {
    check_pairs(u, v, k)?;
    let a = span_basis(u, k);
    let b = span_basis(v, k);
    if a.ncols() == 0 || b.ncols() == 0 {
        return Ok(0.0);
    }
    let projected = CovarianceModel {
        sxx: linalg::symmetrize(&(a.transpose() * &cov.sxx * &a)),
        sxy: a.transpose() * &cov.sxy * &b,
        syy: linalg::symmetrize(&(b.transpose() * &cov.syy * &b)),
    };
    let kk = a.ncols().min(b.ncols());
    let rho = cca_from_covariance(&projected, kk, None)?.rho;
    Ok(f.apply(rho.as_slice()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMode {
    Successive,
    Subspace,
}

fn check_fold_estimates(fold_estimates: &[&CcaEstimate], folds: &FoldPlan, k: usize) -> Result<()> {
    if fold_estimates.len() != folds.folds {
        return Err(Error::invalid(format!(
            "{} fold estimates for {} folds",
            fold_estimates.len(),
            folds.folds
        )));
    }
    for (i, est) in fold_estimates.iter().enumerate() {
        if est.k() < k {
            return Err(Error::invalid(format!("fold {i} estimate has {} < {k} pairs", est.k())));
        }
        if let FoldId::Fold(f) = est.provenance.fold {
            if f != i {
                return Err(Error::invalid(format!("estimate in slot {i} was fitted on fold {f}")));
            }
        }
    }
    Ok(())
}

/// Signed correlation of two validation variates, centred by training means
/// (so no further centring here). Constant variates score 0.
fn validation_corr(a: &Vector, b: &Vector) -> f64 {
    let denom = (a.norm_squared() * b.norm_squared()).sqrt();
    if denom > 0.0 {
        a.dot(b) / denom
    } else {
        0.0
    }
}

/// Per-fold validation correlations: per pair (successive) or canonical
/// correlations of the variate blocks (subspace).
pub fn cv_correlations(
    mode: CvMode,
    data: &PairedDataset,
    fold_estimates: &[&CcaEstimate],
    folds: &FoldPlan,
    k: usize,
) -> Result<Vec<Vector>> {
    check_fold_estimates(fold_estimates, folds, k)?;
    let mut out = Vec::with_capacity(folds.folds);
    for (f, est) in fold_estimates.iter().enumerate() {
        let split = folds.split(data, f)?;
        let zx = &split.validation.x * est.u_k(k);
        let zy = &split.validation.y * est.v_k(k);
        let rho = match mode {
            CvMode::Successive => Vector::from_fn(k, |j, _| {
                validation_corr(&zx.column(j).into_owned(), &zy.column(j).into_owned())
            }),
            CvMode::Subspace => {
                let keep = |z: &Matrix| -> Matrix {
                    let cols: Vec<Vector> = z
                        .column_iter()
                        .filter(|c| c.norm_squared() > 0.0)
                        .map(|c| c.into_owned())
                        .collect();
                    if cols.is_empty() {
                        Matrix::zeros(z.nrows(), 0)
                    } else {
                        Matrix::from_columns(&cols)
                    }
                };
                let (a, b) = (keep(&zx), keep(&zy));
                if a.ncols() == 0 || b.ncols() == 0 {
                    Vector::zeros(0)
                } else {
                    // Reduce to a basis so degenerate blocks do not break the CCA.
                    let (qa, _) = linalg::gram_schmidt_reduced(&a, 1e-10);
                    let (qb, _) = linalg::gram_schmidt_reduced(&b, 1e-10);
                    empirical_canonical_correlations(&qa, &qb)?
                }
            }
        };
        out.push(rho);
    }
    Ok(out)
}

/// Fold-averaged aggregation of validation correlations, with the standard
/// deviation across folds.
pub fn cv_cc_agg_with_spread(
    mode: CvMode,
    f: AggregationKind,
    data: &PairedDataset,
    fold_estimates: &[&CcaEstimate],
    folds: &FoldPlan,
    k: usize,
) -> Result<(f64, f64)> {
    let per_fold: Vec<f64> = cv_correlations(mode, data, fold_estimates, folds, k)?
        .iter()
        .map(|r| f.apply(r.as_slice()))
        .collect();
    Ok(mean_and_sd(&per_fold))
}

pub fn cv_cc_agg(
    mode: CvMode,
    f: AggregationKind,
    data: &PairedDataset,
    fold_estimates: &[&CcaEstimate],
    folds: &FoldPlan,
    k: usize,
) -> Result<f64> {
    Ok(cv_cc_agg_with_spread(mode, f, data, fold_estimates, folds, k)?.0)
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `sin²` of the angle between two vectors; 1 if either is zero.
pub fn pair_sin_sq(a: &Vector, b: &Vector) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return 1.0;
    }
    let c = (a.dot(b) / denom).clamp(-1.0, 1.0);
    (1.0 - c * c).max(0.0)
}

/// `k − ‖QaᵀQb‖²_F` for orthonormal bases of the two column spans. Missing
/// dimensions of a rank-deficient block count as orthogonal.
pub fn subspace_sin_sq(a: &Matrix, b: &Matrix, k: usize) -> f64 {
    let qa = span_basis(a, k);
    let qb = span_basis(b, k);
    if qa.ncols() == 0 || qb.ncols() == 0 {
        return k as f64;
    }
    let cos_sq = (qa.transpose() * qb).norm_squared();
    (k as f64 - cos_sq).clamp(0.0, k as f64)
}

/// Squared-sin distances between truth and estimate, in weight and variate space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationError {
    pub k: usize,
    pub wt_uk: f64,
    pub vt_uk: f64,
    pub wt_uk_subspace: f64,
    pub vt_uk_subspace: f64,
}

impl EstimationError {
    /// `(name, value)` pairs using the `wt-uk`/`wt-Uk` vocabulary.
    pub fn named(&self, cv: bool) -> [(String, f64); 4] {
        let s = if cv { "-cv" } else { "" };
        let k = self.k;
        [
            (format!("wt-u{k}{s}"), self.wt_uk),
            (format!("vt-u{k}{s}"), self.vt_uk),
            (format!("wt-U{k}{s}"), self.wt_uk_subspace),
            (format!("vt-U{k}{s}"), self.vt_uk_subspace),
        ]
    }
}

fn distances(ua: &Matrix, ub: &Matrix, za: &Matrix, zb: &Matrix, k: usize) -> EstimationError {
    let col = |m: &Matrix| m.column(k - 1).into_owned();
    EstimationError {
        k,
        wt_uk: pair_sin_sq(&col(ua), &col(ub)),
        vt_uk: pair_sin_sq(&col(za), &col(zb)),
        wt_uk_subspace: subspace_sin_sq(ua, ub, k),
        vt_uk_subspace: subspace_sin_sq(za, zb, k),
    }
}

/// Oracle estimation error of `est` against `truth` for the first `k` pairs
/// (x-view directions).
pub fn estimation_error(cov: &CovarianceModel, truth: &CcaEstimate, est: &CcaEstimate, k: usize) -> Result<EstimationError> {
    if k == 0 || k > truth.k() || k > est.k() {
        return Err(Error::invalid(format!("k = {k} exceeds available pairs")));
    }
    let root = linalg::sym_matrix_power(&cov.sxx, MatrixPower::Sqrt, None)?;
    let (ut, ue) = (truth.u_k(k), est.u_k(k));
    Ok(distances(&ut, &ue, &(&root * &ut), &(&root * &ue), k))
}

/// Fold-pair instability: mean squared-sin distance between estimates from
/// different training folds. Variate versions use the full centred data.
pub fn cv_instability(data: &PairedDataset, fold_estimates: &[&CcaEstimate], k: usize) -> Result<EstimationError> {
    if fold_estimates.len() < 2 {
        return Err(Error::invalid("instability needs at least two fold estimates"));
    }
    if k == 0 || fold_estimates.iter().any(|e| e.k() < k) {
        return Err(Error::invalid(format!("k = {k} exceeds available pairs")));
    }
    let x = data.ensure_centred().x;
    let mut sum = [0.0; 4];
    let mut count = 0.0;
    for i in 0..fold_estimates.len() {
        for j in (i + 1)..fold_estimates.len() {
            let (a, b) = (fold_estimates[i].u_k(k), fold_estimates[j].u_k(k));
            let d = distances(&a, &b, &(&x * &a), &(&x * &b), k);
            for (s, v) in sum.iter_mut().zip([d.wt_uk, d.vt_uk, d.wt_uk_subspace, d.vt_uk_subspace]) {
                *s += v;
            }
            count += 1.0;
        }
    }
    Ok(EstimationError {
        k,
        wt_uk: sum[0] / count,
        vt_uk: sum[1] / count,
        wt_uk_subspace: sum[2] / count,
        vt_uk_subspace: sum[3] / count,
    })
}

/// One long-format metric row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub algorithm: String,
    pub penalty: Option<f64>,
    /// `cv` for fold-averaged values, `full` for full-sample ones.
    pub fold: String,
    pub metric: String,
    pub k: usize,
    pub value: f64,
    /// Standard deviation across folds, where applicable.
    pub dispersion: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub records: Vec<MetricRecord>,
}

/// Fixed-precision rendering so repeated runs give identical bytes.
pub(crate) fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v:.12e}")
    }
}

impl MetricReport {
    pub fn push(&mut self, record: MetricRecord) {
        self.records.push(record);
    }

    pub fn find(&self, algorithm: &str, penalty: f64, metric: &str) -> Option<&MetricRecord> {
        self.records
            .iter()
            .find(|r| r.algorithm == algorithm && r.penalty == Some(penalty) && r.metric == metric)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["algorithm", "penalty", "fold", "metric", "k", "value", "dispersion"])?;
        for r in &self.records {
            w.write_record([
                r.algorithm.clone(),
                r.penalty.map(fmt_num).unwrap_or_default(),
                r.fold.clone(),
                r.metric.clone(),
                r.k.to_string(),
                fmt_num(r.value),
                r.dispersion.map(fmt_num).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Known generating model for oracle metrics.
#[derive(Debug, Clone, Copy)]
pub struct Oracle<'a> {
    pub cov: &'a CovarianceModel,
    pub truth: &'a CcaEstimate,
}

fn penalty_record(algorithm: &str, penalty: f64, fold: &str, metric: String, k: usize, value: f64, dispersion: Option<f64>) -> MetricRecord {
    MetricRecord {
        algorithm: algorithm.to_string(),
        penalty: Some(penalty),
        fold: fold.to_string(),
        metric,
        k,
        value,
        dispersion,
    }
}

/// Long-format metrics for every penalty of a sweep: CV correlation
/// aggregates and fold instabilities for each `k`, plus oracle correlations
/// and estimation errors of the full-sample fit when the model is known.
/// Metrics that cannot be computed (failed or too-short cells) are NaN.
pub fn trajectory_report(
    result: &TrajectoryResult,
    data: &PairedDataset,
    k_list: &[usize],
    aggregations: &[AggregationKind],
    oracle: Option<Oracle<'_>>,
) -> MetricReport {
    let data = data.ensure_centred();
    let alg = result.kind.name();
    let mut report = MetricReport::default();
    for (i, &pen) in result.grid.iter().enumerate() {
        let folds = result.fold_estimates(i);
        let full = result.full(i);
        for &k in k_list {
            for &f in aggregations {
                for (mode, name) in [
                    (CvMode::Successive, f.successive_name(k, true)),
                    (CvMode::Subspace, f.subspace_name(k, true)),
                ] {
                    let (v, sd) = folds
                        .as_ref()
                        .and_then(|fe| cv_cc_agg_with_spread(mode, f, &data, fe, &result.folds, k).ok())
                        .unwrap_or((f64::NAN, f64::NAN));
                    report.push(penalty_record(alg, pen, "cv", name, k, v, Some(sd)));
                }
            }
            let inst = folds.as_ref().and_then(|fe| cv_instability(&data, fe, k).ok());
            let names = EstimationError {
                k,
                wt_uk: f64::NAN,
                vt_uk: f64::NAN,
                wt_uk_subspace: f64::NAN,
                vt_uk_subspace: f64::NAN,
            };
            for (name, v) in inst.unwrap_or(names).named(true) {
                report.push(penalty_record(alg, pen, "cv", name, k, v, None));
            }
            if let Some(o) = oracle {
                let est = full.filter(|e| e.k() >= k);
                for &f in aggregations {
                    let succ = est
                        .and_then(|e| succ_cc_agg(f, o.cov, &e.u_k(k), &e.v_k(k)).ok())
                        .unwrap_or(f64::NAN);
                    let sub = est.and_then(|e| subsp_cc_agg(f, o.cov, &e.u, &e.v, k).ok()).unwrap_or(f64::NAN);
                    report.push(penalty_record(alg, pen, "full", f.successive_name(k, false), k, succ, None));
                    report.push(penalty_record(alg, pen, "full", f.subspace_name(k, false), k, sub, None));
                }
                let err = est.and_then(|e| estimation_error(o.cov, o.truth, e, k).ok());
                for (name, v) in err.unwrap_or(names).named(false) {
                    report.push(penalty_record(alg, pen, "full", name, k, v, None));
                }
            }
        }
    }
    report
}
