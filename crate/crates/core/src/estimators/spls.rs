//! Sparse PLS by penalised matrix decomposition: alternating ℓ1/ℓ2-constrained
//! power iterations on successively deflated cross-covariances.

use serde::{Deserialize, Serialize};

use crate::cca::{CcaEstimate, EstimateFlags, Provenance};
use crate::data::{CovarianceModel, PairedDataset};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

use super::{check_k, finish, variate_correlations, EstimatorKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplsOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SplsOptions {
    fn default() -> Self {
        SplsOptions {
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

fn soft(z: &Vector, t: f64) -> Vector {
    z.map(|x| x.signum() * (x.abs() - t).max(0.0))
}

/// Maximiser of `uᵀz` over `‖u‖₂ ≤ 1, ‖u‖₁ ≤ s`, i.e. `S(z, Δ)/‖S(z, Δ)‖₂`
/// with the smallest threshold `Δ ≥ 0` that makes the ℓ1 constraint hold.
pub fn l1_constrained_unit(z: &Vector, s: f64) -> Vector {
    let zn = z.norm();
    if zn == 0.0 {
        return z.clone();
    }
    let unit = z / zn;
    if unit.lp_norm(1) <= s {
        return unit;
    }
    let ratio = |v: &Vector| {
        let n = v.norm();
        if n == 0.0 {
            0.0
        } else {
            v.lp_norm(1) / n
        }
    };
    let mut lo = 0.0;
    let mut hi = z.amax();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(&soft(z, mid)) > s {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * z.amax() {
            break;
        }
    }
    let mut out = soft(z, hi);
    if out.norm() == 0.0 {
        out = soft(z, lo);
    }
    let n = out.norm();
    out / n
}

pub(crate) struct PmdPairs {
    pub u: Matrix,
    pub v: Matrix,
    pub iterations: usize,
    pub not_converged: bool,
    pub degenerate: bool,
}

/// Unit-ℓ2 sparse singular pairs of `cxy` with deflation after each pair.
pub(crate) fn pmd_pairs(cxy: &Matrix, s: f64, k: usize, opts: &SplsOptions) -> Result<PmdPairs> {
    let (p, q) = cxy.shape();
    let mut c = cxy.clone();
    let mut out = PmdPairs {
        u: Matrix::zeros(p, k),
        v: Matrix::zeros(q, k),
        iterations: 0,
        not_converged: false,
        degenerate: false,
    };
    for j in 0..k {
        let svd = linalg::compact_svd(&c, 0.0)?;
        if svd.singular_values.is_empty() || svd.singular_values[0] <= 1e-14 * cxy.amax().max(f64::MIN_POSITIVE) {
            out.degenerate = true;
            break;
        }
        let mut u: Vector = svd.left.column(0).into_owned();
        let mut v: Vector = svd.right.column(0).into_owned();
        let mut converged = false;
        for _ in 0..opts.max_iter {
            out.iterations += 1;
            let u_new = l1_constrained_unit(&(&c * &v), s);
            let v_new = l1_constrained_unit(&(c.transpose() * &u_new), s);
            let change = (&u_new - &u).norm().max((&v_new - &v).norm());
            u = u_new;
            v = v_new;
            if change < opts.tol {
                converged = true;
                break;
            }
        }
        out.not_converged |= !converged;
        if u.norm() == 0.0 || v.norm() == 0.0 {
            out.degenerate = true;
            break;
        }
        let idx = u.iamax();
        if u[idx] < 0.0 {
            u.neg_mut();
            v.neg_mut();
        }
        let d = u.dot(&(&c * &v));
        c -= &u * v.transpose() * d;
        out.u.set_column(j, &u);
        out.v.set_column(j, &v);
    }
    Ok(out)
}

/// Sparse PLS with tied ℓ1 radius `s ≥ 1`. `rho` holds the empirical
/// correlations of the fitted variates.
pub fn spls_fit(data: &PairedDataset, s: f64, k: usize, opts: &SplsOptions) -> Result<CcaEstimate> {
    if !(s >= 1.0) {
        return Err(Error::invalid(format!("spls radius s = {s} must be at least 1")));
    }
    EstimatorKind::Spls.check_penalty(s)?;
    check_k(data, k)?;
    let data = data.ensure_centred();
    let cov = CovarianceModel::from_centred_data(&data);
    let pairs = pmd_pairs(&cov.sxy, s, k, opts)?;
    let rho = variate_correlations(&data, &pairs.u, &pairs.v);
    let mut provenance = Provenance::new("spls");
    provenance.penalty = Some(s);
    provenance.diagnostics.insert("iterations".into(), pairs.iterations as f64);
    let est = CcaEstimate {
        u: pairs.u,
        v: pairs.v,
        rho,
        provenance,
        flags: EstimateFlags {
            degenerate: pairs.degenerate,
            not_converged: pairs.not_converged,
            ..EstimateFlags::default()
        },
    };
    Ok(finish(est, &data))
}
