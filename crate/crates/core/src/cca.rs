//! Exact canonical decomposition through the SVD of
//! `T = Σxx^{-1/2} Σxy Σyy^{-1/2}`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{CovarianceModel, PairedDataset};
use crate::error::{Diagnostics, Error, Result};
use crate::linalg::{self, Matrix, MatrixPower, Vector};

/// Which data an estimate was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldId {
    Fold(usize),
    Full,
}

impl fmt::Display for FoldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FoldId::Fold(i) => write!(f, "{i}"),
            FoldId::Full => f.write_str("full"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub algorithm: String,
    pub penalty: Option<f64>,
    pub fold: FoldId,
    pub seed: Option<u64>,
    pub floor_eps: Option<f64>,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

impl Provenance {
    pub fn new(algorithm: impl Into<String>) -> Self {
        Provenance {
            algorithm: algorithm.into(),
            penalty: None,
            fold: FoldId::Full,
            seed: None,
            floor_eps: None,
            diagnostics: Diagnostics::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateFlags {
    /// Some direction is identically zero or every correlation vanished.
    pub degenerate: bool,
    /// A within-view sample covariance is rank deficient (`max(p, q) >= n`).
    pub rank_deficient: bool,
    /// An iterative solver stopped at its iteration cap.
    pub not_converged: bool,
}

/// `K` pairs of canonical directions with their correlations.
#[derive(Debug, Clone)]
pub struct CcaEstimate {
    pub u: Matrix,
    pub v: Matrix,
    pub rho: Vector,
    pub provenance: Provenance,
    pub flags: EstimateFlags,
}

impl CcaEstimate {
    pub fn k(&self) -> usize {
        self.rho.len()
    }

    pub fn u_k(&self, k: usize) -> Matrix {
        self.u.columns(0, k).into_owned()
    }

    pub fn v_k(&self, k: usize) -> Matrix {
        self.v.columns(0, k).into_owned()
    }

    /// Rescale each direction pair so its variates have unit empirical
    /// variance on `data`. Zero-variance columns are left untouched.
    pub fn normalise_variates(&mut self, data: &PairedDataset) {
        let n = data.n().max(1) as f64;
        for (dirs, view) in [(&mut self.u, &data.x), (&mut self.v, &data.y)] {
            let variates = view * &*dirs;
            for j in 0..dirs.ncols() {
                let var = variates.column(j).norm_squared() / n;
                if var > 0.0 {
                    dirs.column_mut(j).unscale_mut(var.sqrt());
                }
            }
        }
    }

    /// True when any direction column is identically zero.
    pub fn has_zero_direction(&self) -> bool {
        let zero = |m: &Matrix| m.column_iter().any(|c| c.iter().all(|&v| v == 0.0));
        zero(&self.u) || zero(&self.v)
    }
}

/// Canonical decomposition of a covariance model, keeping the top `k` pairs.
pub fn cca_from_covariance(cov: &CovarianceModel, k: usize, floor_eps: Option<f64>) -> Result<CcaEstimate> {
    let (p, q) = (cov.p(), cov.q());
    if k > p.min(q) {
        return Err(Error::invalid(format!("K = {k} exceeds min(p, q) = {}", p.min(q))));
    }
    let floor_x = floor_eps.unwrap_or_else(|| linalg::default_floor(&cov.sxx));
    let floor_y = floor_eps.unwrap_or_else(|| linalg::default_floor(&cov.syy));
    let sxx_isqrt = linalg::sym_matrix_power(&cov.sxx, MatrixPower::InverseSqrt, Some(floor_x))?;
    let syy_isqrt = linalg::sym_matrix_power(&cov.syy, MatrixPower::InverseSqrt, Some(floor_y))?;
    let target = &sxx_isqrt * &cov.sxy * &syy_isqrt;
    let svd = linalg::compact_svd(&target, 0.0)?;
    let a = svd.left.columns(0, k).into_owned();
    let b = svd.right.columns(0, k).into_owned();
    let rho = Vector::from_iterator(k, svd.singular_values.iter().take(k).copied());
    let mut provenance = Provenance::new("cca");
    provenance.floor_eps = Some(floor_x.max(floor_y));
    let degenerate = k > 0 && rho[0] <= 1e-10;
    Ok(CcaEstimate {
        u: sxx_isqrt * a,
        v: syy_isqrt * b,
        rho,
        provenance,
        flags: EstimateFlags {
            degenerate,
            ..EstimateFlags::default()
        },
    })
}

/// Classical sample CCA. Flags rank deficiency when `max(p, q) >= n`.
pub fn sample_cca(data: &PairedDataset, k: usize) -> Result<CcaEstimate> {
    let centred = data.ensure_centred();
    let cov = CovarianceModel::from_centred_data(&centred);
    let mut est = cca_from_covariance(&cov, k, None)?;
    est.provenance.algorithm = "sample-cca".into();
    est.flags.rank_deficient = data.p().max(data.q()) >= data.n();
    Ok(est)
}

/// Sample canonical correlations between two variate blocks.
pub fn empirical_canonical_correlations(z: &Matrix, w: &Matrix) -> Result<Vector> {
    if z.nrows() != w.nrows() {
        return Err(Error::invalid("variate blocks have different row counts"));
    }
    let n = z.nrows().max(1) as f64;
    let scale = z
        .column_iter()
        .chain(w.column_iter())
        .map(|c| c.norm_squared() / n)
        .fold(0.0f64, f64::max);
    for (block, m) in [("first block", z), ("second block", w)] {
        for (j, c) in m.column_iter().enumerate() {
            let var = c.norm_squared() / n;
            if var <= 1e-24 * scale || var == 0.0 {
                return Err(Error::ZeroVariance { block, column: j });
            }
        }
    }
    let cov = CovarianceModel {
        sxx: linalg::symmetrize(&(z.transpose() * z / n)),
        sxy: z.transpose() * w / n,
        syy: linalg::symmetrize(&(w.transpose() * w / n)),
    };
    let k = z.ncols().min(w.ncols());
    Ok(cca_from_covariance(&cov, k, None)?.rho)
}
