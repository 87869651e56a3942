//! Sparse CCA by alternating convex search with interleaved linearised ADMM
//! blocks and recycled dual variables.
//!
//! For fixed `v`, the `u` block solves
//! `min −uᵀXᵀYv + τ‖u‖₁  s.t.  X̃u = Ĩz, ‖z‖₂ ≤ 1` with `X̃ = [X; UᵀXᵀX]`
//! and `Ĩ = [I_N; 0]`, where `U` holds the previously fitted directions.
//! Data are scaled by `1/√N` so that `XᵀX` is the sample covariance.

use serde::{Deserialize, Serialize};

use crate::cca::{CcaEstimate, EstimateFlags, Provenance};
use crate::data::PairedDataset;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

use super::{check_k, finish, variate_correlations, EstimatorKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadmmOptions {
    /// ADMM step parameter `λ`; the linearisation step is `μ = λ / (2‖X̃‖²)`.
    pub lambda_step: f64,
    /// Inner steps per block before switching to the other view.
    pub n_steps_admm: usize,
    /// Outer stopping threshold on the ℓ2 change of both weight vectors.
    pub tol: f64,
    pub max_outer: usize,
    /// Carry `(z, ξ)` from one block to the next instead of re-initialising.
    pub recycle_duals: bool,
}

impl Default for LadmmOptions {
    fn default() -> Self {
        LadmmOptions {
            lambda_step: 1.0,
            n_steps_admm: 5,
            tol: 1e-6,
            max_outer: 500,
            recycle_duals: true,
        }
    }
}

fn normalise(z: Vector) -> Vector {
    let n = z.norm();
    if n > 1.0 {
        z / n
    } else {
        z
    }
}

/// One view's lADMM state for the current pair.
struct Block {
    /// `X̃`, whose first `n` rows are the scaled data.
    xt: Matrix,
    n: usize,
    /// `1 / (2‖X̃‖²)`; the step is this times `λ`.
    inv_sq_norm: f64,
    z: Vector,
    xi: Vector,
}

impl Block {
    fn new(x: &Matrix, gram: &Matrix, previous: &Matrix) -> Self {
        let n = x.nrows();
        let extra = previous.transpose() * gram;
        let mut xt = Matrix::zeros(n + extra.nrows(), x.ncols());
        xt.rows_mut(0, n).copy_from(x);
        xt.rows_mut(n, extra.nrows()).copy_from(&extra);
        let norm = linalg::operator_norm(&xt, 1e-8, 10_000);
        Block {
            inv_sq_norm: if norm > 0.0 { 0.5 / (norm * norm) } else { 0.0 },
            z: Vector::zeros(n),
            xi: Vector::zeros(xt.nrows()),
            xt,
            n,
        }
    }

    /// Dual initialisation: `z = normalise(Xu)`, `ξ = X̃u − Ĩz`.
    fn reset_duals(&mut self, u: &Vector) {
        let xu = &self.xt * u;
        self.z = normalise(xu.rows(0, self.n).into_owned());
        self.xi = xu;
        for i in 0..self.n {
            self.xi[i] -= self.z[i];
        }
    }

    fn steps(&mut self, u: &mut Vector, c: &Vector, tau: f64, lambda: f64, steps: usize) {
        let mu = self.inv_sq_norm * lambda;
        let n = self.n;
        for _ in 0..steps {
            let mut r = &self.xt * &*u + &self.xi;
            for i in 0..n {
                r[i] -= self.z[i];
            }
            let grad = self.xt.transpose() * r;
            let shifted = &*u - grad * (mu / lambda) + c * mu;
            let t = mu * tau;
            *u = shifted.map(|x| x.signum() * (x.abs() - t).max(0.0));
            let xu = &self.xt * &*u;
            self.z = normalise(xu.rows(0, n) + self.xi.rows(0, n));
            self.xi += xu;
            for i in 0..n {
                self.xi[i] -= self.z[i];
            }
        }
    }
}

/// `k`-th singular pair (0-based) of `S(Cxy, τ)`, or of `Cxy` when the
/// thresholded matrix has fewer than `k + 1` nonzero singular values.
fn initial_pair(cxy: &Matrix, tau: f64, k: usize) -> Result<(Vector, Vector)> {
    let thresholded = cxy.map(|x| x.signum() * (x.abs() - tau).max(0.0));
    for m in [&thresholded, cxy] {
        let svd = linalg::compact_svd(m, 1e-12)?;
        if svd.rank() > k {
            return Ok((svd.left.column(k).into_owned(), svd.right.column(k).into_owned()));
        }
    }
    let full = linalg::compact_svd(cxy, 0.0)?;
    Ok((full.left.column(k).into_owned(), full.right.column(k).into_owned()))
}

/// Sparse CCA with tied ℓ1 penalty `tau`. `rho` holds empirical variate correlations.
pub fn scca_fit(data: &PairedDataset, tau: f64, k: usize, opts: &LadmmOptions) -> Result<CcaEstimate> {
    EstimatorKind::Scca.check_penalty(tau)?;
    check_k(data, k)?;
    if !(opts.lambda_step > 0.0) || opts.n_steps_admm == 0 || opts.max_outer == 0 {
        return Err(Error::invalid("lambda_step, n_steps_admm and max_outer must be positive"));
    }
    let data = data.ensure_centred();
    let root_n = (data.n() as f64).sqrt();
    let x = &data.x / root_n;
    let y = &data.y / root_n;
    let cxx = linalg::symmetrize(&(x.transpose() * &x));
    let cyy = linalg::symmetrize(&(y.transpose() * &y));
    let cxy = x.transpose() * &y;

    let (p, q) = (data.p(), data.q());
    let mut u_all = Matrix::zeros(p, k);
    let mut v_all = Matrix::zeros(q, k);
    let mut flags = EstimateFlags::default();
    let mut inner_steps = 0usize;
    let mut outer_total = 0usize;
    let mut last_change = 0.0f64;

    for j in 0..k {
        let prev_u = u_all.columns(0, j).into_owned();
        let prev_v = v_all.columns(0, j).into_owned();
        let mut bu = Block::new(&x, &cxx, &prev_u);
        let mut bv = Block::new(&y, &cyy, &prev_v);
        let (mut u, mut v) = initial_pair(&cxy, tau, j)?;
        bu.reset_duals(&u);
        bv.reset_duals(&v);

        let mut converged = false;
        for _ in 0..opts.max_outer {
            outer_total += 1;
            let (u_old, v_old) = (u.clone(), v.clone());
            if !opts.recycle_duals {
                bu.reset_duals(&u);
            }
            let cu = &cxy * &v;
            bu.steps(&mut u, &cu, tau, opts.lambda_step, opts.n_steps_admm);
            if !opts.recycle_duals {
                bv.reset_duals(&v);
            }
            let cv = cxy.transpose() * &u;
            bv.steps(&mut v, &cv, tau, opts.lambda_step, opts.n_steps_admm);
            inner_steps += 2 * opts.n_steps_admm;
            last_change = (&u - &u_old).norm().max((&v - &v_old).norm());
            if last_change < opts.tol {
                converged = true;
                break;
            }
        }
        flags.not_converged |= !converged;
        if u.iter().all(|&a| a == 0.0) || v.iter().all(|&a| a == 0.0) {
            flags.degenerate = true;
            u.fill(0.0);
            v.fill(0.0);
        } else {
            let idx = u.iamax();
            if u[idx] < 0.0 {
                u.neg_mut();
                v.neg_mut();
            }
        }
        u_all.set_column(j, &u);
        v_all.set_column(j, &v);
    }

    let rho = variate_correlations(&data, &u_all, &v_all);
    let mut provenance = Provenance::new("scca");
    provenance.penalty = Some(tau);
    provenance.diagnostics.insert("inner_steps".into(), inner_steps as f64);
    provenance.diagnostics.insert("outer_iterations".into(), outer_total as f64);
    provenance.diagnostics.insert("final_change".into(), last_change);
    let est = CcaEstimate {
        u: u_all,
        v: v_all,
        rho,
        provenance,
        flags,
    };
    Ok(finish(est, &data))
}
