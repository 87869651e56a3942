//! Dense linear-algebra kernels shared by every estimator.
//!
//! Matrices are `nalgebra` types; the symmetric eigensolver and SVD run on
//! `faer`. This module adds the ordering and sign conventions the rest of
//! the crate relies on, plus the subspace tools (canonical angles, metric
//! Gram–Schmidt).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative tolerance for dropping singular values in [`compact_svd`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Symmetric eigendecomposition `A = Q diag(λ) Qᵀ` with λ sorted descending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vector,
    pub eigenvectors: Matrix,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> Matrix {
        let scaled = scale_columns(&self.eigenvectors, self.eigenvalues.as_slice());
        &scaled * self.eigenvectors.transpose()
    }

    /// `Q f(Λ) Qᵀ` for an arbitrary scalar map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let scaled = scale_columns(&self.eigenvectors, &mapped);
        symmetrize(&(&scaled * self.eigenvectors.transpose()))
    }
}

/// Thin SVD restricted to the numerical rank.
#[derive(Debug, Clone)]
pub struct CompactSvd {
    pub left: Matrix,
    pub singular_values: Vector,
    pub right: Matrix,
}

impl CompactSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        let scaled = scale_columns(&self.left, self.singular_values.as_slice());
        &scaled * self.right.transpose()
    }
}

/// Cosines of the principal angles between two subspaces, descending.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalAngles {
    pub cosines: Vec<f64>,
    /// Dimension of the first subspace.
    pub dim_left: usize,
    /// Dimension of the second subspace.
    pub dim_right: usize,
}

impl PrincipalAngles {
    /// `cos²Θ = Σ cos²θ_k`.
    pub fn cos_sq(&self) -> f64 {
        self.cosines.iter().map(|c| c * c).sum()
    }

    /// `sin²Θ = K − Σ cos²θ_k` with `K` the smaller of the two dimensions.
    pub fn sin_sq(&self) -> f64 {
        let k = self.dim_left.min(self.dim_right) as f64;
        (k - self.cos_sq()).max(0.0)
    }
}

/// Exponents supported by [`sym_matrix_power`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixPower {
    Inverse,
    InverseSqrt,
    Sqrt,
}

impl MatrixPower {
    pub fn exponent(self) -> f64 {
        match self {
            MatrixPower::Inverse => -1.0,
            MatrixPower::InverseSqrt => -0.5,
            MatrixPower::Sqrt => 0.5,
        }
    }
}

pub fn check_finite(a: &Matrix) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn max_asymmetry(a: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

fn require_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(a)?;
    let scale = a.amax().max(1.0);
    let asym = max_asymmetry(a);
    if asym > 1e-10 * scale {
        return Err(Error::invalid(format!(
            "matrix is not symmetric (max |a_ij - a_ji| = {asym:.3e})"
        )));
    }
    Ok(())
}

/// Multiply column `j` of `m` by `factors[j]`.
pub fn scale_columns(m: &Matrix, factors: &[f64]) -> Matrix {
    let mut out = m.clone();
    for (j, &f) in factors.iter().enumerate() {
        out.column_mut(j).scale_mut(f);
    }
    out
}

/// Index of the largest-magnitude entry; ties resolve to the lowest index.
fn dominant_index(col: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, v) in col.enumerate() {
        if v.abs() > best_abs {
            best = i;
            best_abs = v.abs();
        }
    }
    best
}

/// Flip column signs of `left` so each has a positive dominant entry and
/// mirror the flips onto `right` (when given).
fn canonicalise_signs(left: &mut Matrix, mut right: Option<&mut Matrix>) {
    for j in 0..left.ncols() {
        let idx = dominant_index(left.column(j).iter().copied());
        if left[(idx, j)] < 0.0 {
            left.column_mut(j).neg_mut();
            if let Some(r) = right.as_deref_mut() {
                r.column_mut(j).neg_mut();
            }
        }
    }
}

fn no_convergence(solver: &'static str) -> Error {
    Error::Convergence {
        solver,
        diagnostics: Default::default(),
    }
}

fn to_faer(a: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Symmetric eigendecomposition with descending eigenvalues and canonical signs.
pub fn sym_eig(a: &Matrix) -> Result<SpectralDecomposition> {
    require_symmetric(a)?;
    let d = a.nrows();
    if d == 0 {
        return Ok(SpectralDecomposition {
            eigenvalues: Vector::zeros(0),
            eigenvectors: Matrix::zeros(0, 0),
        });
    }
    let sym = symmetrize(a);
    let eig = to_faer(&sym)
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| no_convergence("symmetric eigendecomposition"))?;
    let (vals, vecs) = (eig.S().column_vector(), eig.U());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    let eigenvalues = Vector::from_iterator(d, order.iter().map(|&i| vals[i]));
    let mut eigenvectors = Matrix::from_fn(d, d, |r, c| vecs[(r, order[c])]);
    canonicalise_signs(&mut eigenvectors, None);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Thin SVD with descending singular values, dropping those below
/// `rank_tol · σ₁`. Left vectors are sign-canonicalised and right vectors
/// follow them.
pub fn compact_svd(a: &Matrix, rank_tol: f64) -> Result<CompactSvd> {
    check_finite(a)?;
    if rank_tol.is_nan() || rank_tol < 0.0 {
        return Err(Error::invalid("rank_tol must be nonnegative"));
    }
    let (p, q) = a.shape();
    let m = p.min(q);
    if m == 0 {
        return Ok(CompactSvd {
            left: Matrix::zeros(p, 0),
            singular_values: Vector::zeros(0),
            right: Matrix::zeros(q, 0),
        });
    }
    let svd = to_faer(a).thin_svd().map_err(|_| no_convergence("svd"))?;
    let (u, v) = (svd.U(), svd.V());
    let values: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let sigma1 = values[order[0]];
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| {
            let s = values[i];
            if rank_tol == 0.0 {
                true
            } else {
                sigma1 > 0.0 && s >= rank_tol * sigma1
            }
        })
        .collect();
    let k = keep.len();
    let mut left = Matrix::from_fn(p, k, |r, c| u[(r, keep[c])]);
    let mut right = Matrix::from_fn(q, k, |r, c| v[(r, keep[c])]);
    let singular_values = Vector::from_iterator(k, keep.iter().map(|&i| values[i].max(0.0)));
    canonicalise_signs(&mut left, Some(&mut right));
    Ok(CompactSvd {
        left,
        singular_values,
        right,
    })
}

/// Default eigenvalue floor: `1e-12 · trace(A) / d`.
pub fn default_floor(a: &Matrix) -> f64 {
    let d = a.nrows().max(1) as f64;
    let floor = 1e-12 * a.trace().abs() / d;
    if floor > 0.0 {
        floor
    } else {
        f64::MIN_POSITIVE
    }
}

/// `A^e` for symmetric PSD `A`, flooring eigenvalues at `floor_eps` first.
pub fn sym_matrix_power(a: &Matrix, power: MatrixPower, floor_eps: Option<f64>) -> Result<Matrix> {
    let floor = floor_eps.unwrap_or_else(|| default_floor(a));
    if !(floor > 0.0) {
        return Err(Error::invalid("floor_eps must be positive"));
    }
    let eig = sym_eig(a)?;
    let e = power.exponent();
    Ok(eig.map(|l| l.max(floor).powf(e)))
}

/// Maximum deviation of `ZᵀZ` from the identity.
pub fn orthonormality_deviation(z: &Matrix) -> f64 {
    let gram = z.transpose() * z;
    let k = gram.nrows();
    (gram - Matrix::identity(k, k)).amax()
}

/// Principal angles between `span(Z)` and `span(W)` for orthonormal-column inputs.
pub fn canonical_angles(z: &Matrix, w: &Matrix) -> Result<PrincipalAngles> {
    if z.nrows() != w.nrows() {
        return Err(Error::invalid(format!(
            "row mismatch: {} vs {}",
            z.nrows(),
            w.nrows()
        )));
    }
    check_finite(z)?;
    check_finite(w)?;
    let deviation = orthonormality_deviation(z).max(orthonormality_deviation(w));
    if deviation > 1e-8 {
        return Err(Error::NotOrthonormal { deviation });
    }
    let cross = z.transpose() * w;
    let k = cross.nrows().min(cross.ncols());
    let mut cosines: Vec<f64> = if k == 0 {
        Vec::new()
    } else {
        to_faer(&cross)
            .singular_values()
            .map_err(|_| no_convergence("svd"))?
            .into_iter()
            .map(|s| s.clamp(0.0, 1.0))
            .collect()
    };
    cosines.sort_by(|a, b| b.total_cmp(a));
    Ok(PrincipalAngles {
        cosines,
        dim_left: z.ncols(),
        dim_right: w.ncols(),
    })
}

/// Orthonormalise the columns of `m` in the inner product `⟨a, b⟩ = aᵀ G b`.
///
/// Uses modified Gram–Schmidt with one re-orthogonalisation pass, so column
/// `k` of the output lies in the span of the first `k` input columns.
pub fn gram_schmidt_metric(m: &Matrix, g: &Matrix) -> Result<Matrix> {
    let d = m.nrows();
    if g.shape() != (d, d) {
        return Err(Error::invalid(format!(
            "metric is {}x{}, expected {d}x{d}",
            g.nrows(),
            g.ncols()
        )));
    }
    check_finite(m)?;
    require_symmetric(g)?;
    let mut out = Matrix::zeros(d, m.ncols());
    for k in 0..m.ncols() {
        let mut col: Vector = m.column(k).into_owned();
        let start_norm = (col.dot(&(g * &col))).max(0.0).sqrt();
        for _pass in 0..2 {
            for j in 0..k {
                let basis = out.column(j);
                let coef = basis.dot(&(g * &col));
                col -= basis * coef;
            }
        }
        let norm_sq = col.dot(&(g * &col));
        let norm = norm_sq.max(0.0).sqrt();
        if !(norm > 1e-10 * start_norm.max(f64::MIN_POSITIVE)) || norm == 0.0 {
            return Err(Error::RankDeficient {
                column: k,
                residual: norm,
            });
        }
        out.set_column(k, &(col / norm));
    }
    Ok(out)
}

/// Euclidean Gram–Schmidt that skips dependent columns instead of failing.
/// Returns the orthonormal block (possibly with fewer columns) and the indices kept.
pub fn gram_schmidt_reduced(m: &Matrix, rel_tol: f64) -> (Matrix, Vec<usize>) {
    let scale = (0..m.ncols())
        .map(|j| m.column(j).norm())
        .fold(0.0f64, f64::max);
    let mut cols: Vec<Vector> = Vec::new();
    let mut kept = Vec::new();
    for k in 0..m.ncols() {
        let mut col: Vector = m.column(k).into_owned();
        for _pass in 0..2 {
            for b in &cols {
                let coef = b.dot(&col);
                col -= b * coef;
            }
        }
        let norm = col.norm();
        if scale > 0.0 && norm > rel_tol * scale {
            cols.push(col / norm);
            kept.push(k);
        }
    }
    let out = if cols.is_empty() {
        Matrix::zeros(m.nrows(), 0)
    } else {
        Matrix::from_columns(&cols)
    };
    (out, kept)
}

/// Largest singular value by power iteration on `AᵀA`.
pub fn operator_norm(a: &Matrix, tol: f64, max_iter: usize) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut x = Vector::from_element(n, 1.0 / (n as f64).sqrt());
    // A deterministic start with a small tilt avoids an exactly orthogonal guess.
    for (i, v) in x.iter_mut().enumerate() {
        *v *= 1.0 + 1e-3 * (i as f64 + 1.0).sqrt();
    }
    x /= x.norm();
    let mut sigma = 0.0;
    for _ in 0..max_iter {
        let ax = a * &x;
        let y = a.transpose() * &ax;
        let ny = y.norm();
        if ny == 0.0 {
            return 0.0;
        }
        let next = ax.norm();
        x = y / ny;
        if (next - sigma).abs() <= tol * next.max(1e-300) {
            sigma = next;
            break;
        }
        sigma = next;
    }
    (a * &x).norm().max(sigma)
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    use faer::linalg::solvers::DenseSolveCore;
    let chol = to_faer(&symmetrize(a))
        .llt(faer::Side::Lower)
        .map_err(|_| Error::invalid("matrix is not positive definite"))?;
    let inv = chol.inverse();
    Ok(symmetrize(&Matrix::from_fn(a.nrows(), a.ncols(), |i, j| inv[(i, j)])))
}

/// `log det A` for symmetric positive definite `A`.
pub fn log_det_spd(a: &Matrix) -> Result<f64> {
    let chol = nalgebra::Cholesky::new(symmetrize(a))
        .ok_or_else(|| Error::invalid("matrix is not positive definite"))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn min_eigenvalue(a: &Matrix) -> Result<f64> {
    let eig = sym_eig(a)?;
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}
