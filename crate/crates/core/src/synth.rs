//! Synthetic covariance models and Gaussian sampling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cca::{CcaEstimate, EstimateFlags, Provenance};
use crate::data::{CovarianceModel, PairedDataset};
use crate::error::{Error, Result};
use crate::estimators::{scca_fit, variate_correlations, LadmmOptions};
use crate::glasso::{glasso_fit, GlassoOptions};
use crate::linalg::{self, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WithinView {
    /// `Σ = W⁻¹` with `W` pentadiagonal (1, 0.5, 0.4).
    #[default]
    SuoSp,
    Identity,
}

/// Pentadiagonal `W_m` with unit diagonal, 0.5 on the first and 0.4 on the
/// second off-diagonals.
pub fn banded_precision(m: usize) -> Matrix {
    Matrix::from_fn(m, m, |i, j| match i.abs_diff(j) {
        0 => 1.0,
        1 => 0.5,
        2 => 0.4,
        _ => 0.0,
    })
}

fn within_view_cov(m: usize, kind: WithinView) -> Result<Matrix> {
    match kind {
        WithinView::Identity => Ok(Matrix::identity(m, m)),
        WithinView::SuoSp => Ok(linalg::symmetrize(&linalg::spd_inverse(&banded_precision(m))?)),
    }
}

fn sparse_directions(rng: &mut ChaCha8Rng, m: usize, k: usize, support: usize, metric: &Matrix) -> Result<Matrix> {
    let mut raw = Matrix::zeros(m, k);
    for j in 0..k {
        for i in j * support..(j + 1) * support {
            raw[(i, j)] = rng.gen_range(-1.0..=1.0);
        }
    }
    linalg::gram_schmidt_metric(&raw, metric)
}

/// Covariance with prescribed canonical structure
/// `Σxy = Σxx (Σ_k ρ_k u_k v_kᵀ) Σyy`, plus the generating decomposition.
/// Direction supports are consecutive disjoint blocks starting at index 0.
pub fn canonical_pair_covariance(
    p: usize,
    q: usize,
    rhos: &[f64],
    support_size: usize,
    within_view: WithinView,
    seed: u64,
) -> Result<(CovarianceModel, CcaEstimate)> {
    let k = rhos.len();
    if k == 0 {
        return Err(Error::invalid("at least one canonical correlation is required"));
    }
    if rhos.iter().any(|&r| !(r > 0.0 && r < 1.0)) || rhos.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("rhos must be descending in (0, 1)"));
    }
    if support_size == 0 || k * support_size > p.min(q) {
        return Err(Error::invalid(format!(
            "{k} supports of size {support_size} do not fit in min(p, q) = {}",
            p.min(q)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sxx = within_view_cov(p, within_view)?;
    let syy = within_view_cov(q, within_view)?;
    let mut u = sparse_directions(&mut rng, p, k, support_size, &sxx)?;
    let mut v = sparse_directions(&mut rng, q, k, support_size, &syy)?;
    // Same orientation rule as the exact solver's left vectors.
    for j in 0..k {
        let col = u.column(j);
        let idx = col.iamax();
        if col[idx] < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
    let rho = Vector::from_column_slice(rhos);
    let sxy = &sxx * &u * Matrix::from_diagonal(&rho) * v.transpose() * &syy;
    let cov = CovarianceModel::new(sxx, sxy, syy)?;
    let mut provenance = Provenance::new("truth");
    provenance.seed = Some(seed);
    Ok((
        cov,
        CcaEstimate {
            u,
            v,
            rho,
            provenance,
            flags: EstimateFlags::default(),
        },
    ))
}

/// Undirected edge list from preferential attachment with one edge per new
/// node and attachment weight `degree + a`, where `a = γ − 3` gives a degree
/// tail `P(D = k) ∝ k^{−γ}`. For `γ ≤ 2` the offset is clamped just above −1.
pub fn preferential_attachment(d: usize, gamma: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let offset = (gamma - 3.0).max(-0.99);
    let mut degree = vec![0usize; d];
    let mut edges = Vec::with_capacity(d.saturating_sub(1));
    if d < 2 {
        return edges;
    }
    edges.push((0, 1));
    degree[0] = 1;
    degree[1] = 1;
    for new in 2..d {
        let total: f64 = degree[..new].iter().map(|&k| k as f64 + offset).sum();
        let mut pick = rng.gen::<f64>() * total;
        let mut target = new - 1;
        for (i, &k) in degree[..new].iter().enumerate() {
            pick -= k as f64 + offset;
            if pick < 0.0 {
                target = i;
                break;
            }
        }
        edges.push((target, new));
        degree[target] += 1;
        degree[new] += 1;
    }
    edges
}

/// Sparse precision matrix on a preferential-attachment graph. Edge weights
/// are `±U(scale/2, scale)`; each diagonal entry is `1.1·Σ_j |ω_ij|`, which
/// makes the matrix strictly diagonally dominant and hence PD.
pub fn powerlaw_precision(d: usize, gamma: f64, edge_weight_scale: f64, seed: u64) -> Result<Matrix> {
    if d < 4 {
        return Err(Error::invalid(format!("need d >= 4, got {d}")));
    }
    if !(gamma > 1.0) || !(edge_weight_scale > 0.0) {
        return Err(Error::invalid("gamma must exceed 1 and the edge scale must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = preferential_attachment(d, gamma, &mut rng);
    // Relabel so hubs are not always the lowest indices.
    let mut labels: Vec<usize> = (0..d).collect();
    labels.shuffle(&mut rng);
    for e in &mut edges {
        *e = (labels[e.0], labels[e.1]);
    }
    let mut omega = Matrix::zeros(d, d);
    for &(i, j) in &edges {
        let mag = rng.gen_range(0.5 * edge_weight_scale..=edge_weight_scale);
        let w = if rng.gen::<bool>() { mag } else { -mag };
        omega[(i, j)] = w;
        omega[(j, i)] = w;
    }
    for i in 0..d {
        let row: f64 = omega.row(i).iter().map(|v| v.abs()).sum();
        omega[(i, i)] = if row > 0.0 { 1.1 * row } else { 1.0 };
    }
    if linalg::min_eigenvalue(&omega)? <= 0.0 {
        return Err(Error::invalid("generated precision is not positive definite"));
    }
    Ok(omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BootstrapMode {
    Glasso { lambda: f64 },
    SccaRidge { lambda: f64, alpha: f64, k: usize },
}

#[derive(Debug, Clone)]
pub struct BootstrapModel {
    pub cov: CovarianceModel,
    /// Diagonal of `D̂` for the sCCA-ridge construction; empty for glasso.
    pub rho: Vector,
}

/// Regularised covariance of a dataset for parametric bootstrapping.
///
/// The sCCA-ridge construction orthonormalises the fitted directions in the
/// ridge metrics before assembling `Σ̂xy = Σ̂xx Û D̂ V̂ᵀ Σ̂yy`, so the recorded
/// `D̂` are exactly the canonical correlations of the result.
pub fn bootstrap_covariance(data: &PairedDataset, mode: BootstrapMode) -> Result<BootstrapModel> {
    let data = data.ensure_centred();
    let sample = CovarianceModel::from_centred_data(&data);
    match mode {
        BootstrapMode::Glasso { lambda } => {
            let fit = glasso_fit(&sample.joint(), lambda, &GlassoOptions::default())?;
            let sigma = linalg::symmetrize(&fit.sigma);
            Ok(BootstrapModel {
                cov: CovarianceModel::from_joint(&sigma, data.p())?,
                rho: Vector::zeros(0),
            })
        }
        BootstrapMode::SccaRidge { lambda, alpha, k } => {
            if !(alpha >= 0.0) {
                return Err(Error::invalid("ridge alpha must be nonnegative"));
            }
            let sxx = &sample.sxx + Matrix::identity(data.p(), data.p()) * alpha;
            let syy = &sample.syy + Matrix::identity(data.q(), data.q()) * alpha;
            let est = scca_fit(&data, lambda, k, &LadmmOptions::default())?;
            let u = linalg::gram_schmidt_metric(&est.u, &sxx)?;
            let mut v = linalg::gram_schmidt_metric(&est.v, &syy)?;
            let mut rho = variate_correlations(&data, &u, &v);
            for j in 0..k {
                if rho[j] < 0.0 {
                    rho[j] = -rho[j];
                    v.column_mut(j).neg_mut();
                }
            }
            let sxy = &sxx * &u * Matrix::from_diagonal(&rho) * v.transpose() * &syy;
            Ok(BootstrapModel {
                cov: CovarianceModel::new(sxx, sxy, syy)?,
                rho,
            })
        }
    }
}

/// `n` draws from `N(0, Σ)` using the symmetric square root of the joint matrix.
pub fn mvn_sample(cov: &CovarianceModel, n: usize, seed: u64) -> Result<PairedDataset> {
    let joint = cov.joint();
    linalg::check_finite(&joint)?;
    let eig = linalg::sym_eig(&joint)?;
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
        return Err(Error::invalid("joint covariance is not positive semidefinite"));
    }
    let root = eig.map(|l| l.max(0.0).sqrt());
    let d = joint.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Matrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let draws = z * root;
    let p = cov.p();
    PairedDataset::new(draws.columns(0, p).into_owned(), draws.columns(p, d - p).into_owned())
}
