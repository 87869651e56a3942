//! Registration of variate subspaces, overlap matrices, and distance matrices
//! between estimates along regularisation paths.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cca::CcaEstimate;
use crate::data::PairedDataset;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::metrics::{fmt_num, subspace_sin_sq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegistrationMode {
    Signs,
    SignedPermutation,
    Orthogonal,
    Linear,
}

#[derive(Debug, Clone)]
pub struct Registration {
    /// `K′ × K` transform applied on the right of the target.
    pub transform: Matrix,
    /// `‖Z₁M − Z₀‖²_F`.
    pub residual: f64,
}

/// Minimum-cost assignment of every row to a distinct column (`rows ≤ cols`),
/// by the shortest augmenting path method with potentials.
pub fn assignment(cost: &Matrix) -> Vec<usize> {
    let (n, m) = cost.shape();
    assert!(n <= m, "assignment needs rows <= cols");
    let inf = f64::INFINITY;
    // 1-based arrays with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}

/// Best `M` within the chosen class minimising `‖Z₁M − Z₀‖²_F`.
pub fn register(reference: &Matrix, target: &Matrix, mode: RegistrationMode) -> Result<Registration> {
    let (z0, z1) = (reference, target);
    if z0.nrows() != z1.nrows() {
        return Err(Error::invalid("reference and target have different row counts"));
    }
    let (k, kp) = (z0.ncols(), z1.ncols());
    if k > kp {
        return Err(Error::invalid(format!("reference has {k} columns but target only {kp}")));
    }
    linalg::check_finite(z0)?;
    linalg::check_finite(z1)?;
    let g = z1.transpose() * z0;
    let transform = match mode {
        RegistrationMode::Signs => {
            if k != kp {
                return Err(Error::invalid("sign registration needs equal column counts"));
            }
            Matrix::from_fn(k, k, |i, j| match (i == j, g[(i, i)] < 0.0) {
                (false, _) => 0.0,
                (true, true) => -1.0,
                (true, false) => 1.0,
            })
        }
        RegistrationMode::SignedPermutation => {
            // Matching target j to reference i with the best sign costs ‖z₁ⱼ‖² − 2|gⱼᵢ|.
            let cost = Matrix::from_fn(k, kp, |i, j| z1.column(j).norm_squared() - 2.0 * g[(j, i)].abs());
            let perm = assignment(&cost);
            let mut m = Matrix::zeros(kp, k);
            for (i, &j) in perm.iter().enumerate() {
                m[(j, i)] = if g[(j, i)] < 0.0 { -1.0 } else { 1.0 };
            }
            m
        }
        RegistrationMode::Orthogonal => {
            if k == 0 {
                Matrix::zeros(kp, 0)
            } else {
                let svd = linalg::compact_svd(&g, 0.0)?;
                &svd.left * svd.right.transpose()
            }
        }
        RegistrationMode::Linear => {
            linalg::gram_schmidt_metric(z1, &Matrix::identity(z1.nrows(), z1.nrows()))?;
            let gram = linalg::symmetrize(&(z1.transpose() * z1));
            let chol = nalgebra::Cholesky::new(gram).ok_or(Error::RankDeficient {
                column: 0,
                residual: 0.0,
            })?;
            chol.solve(&g)
        }
    };
    let residual = (z1 * &transform - z0).norm_squared();
    Ok(Registration { transform, residual })
}

#[derive(Debug, Clone)]
pub struct Overlap {
    pub matrix: Matrix,
    pub row_sums: Vec<f64>,
    pub col_sums: Vec<f64>,
    /// Whether both blocks had orthonormal columns, so squared sums read as cos²Θ.
    pub orthonormal: bool,
}

/// `ZᵀW` (or its elementwise square), optionally after orthonormalising both blocks.
pub fn overlap_matrix(z: &Matrix, w: &Matrix, squared: bool, orthogonalise_first: bool) -> Result<Overlap> {
    if z.nrows() != w.nrows() {
        return Err(Error::invalid(format!(
            "blocks have {} and {} rows",
            z.nrows(),
            w.nrows()
        )));
    }
    let (z, w) = if orthogonalise_first {
        let id = Matrix::identity(z.nrows(), z.nrows());
        (linalg::gram_schmidt_metric(z, &id)?, linalg::gram_schmidt_metric(w, &id)?)
    } else {
        (z.clone(), w.clone())
    };
    let orthonormal = linalg::orthonormality_deviation(&z) <= 1e-8 && linalg::orthonormality_deviation(&w) <= 1e-8;
    // Entry-by-entry dot products keep overlap(Z, W)ᵀ == overlap(W, Z) bit for bit.
    let matrix = Matrix::from_fn(z.ncols(), w.ncols(), |i, j| {
        let d = z.column(i).dot(&w.column(j));
        if squared {
            d * d
        } else {
            d
        }
    });
    let row_sums = matrix.row_iter().map(|r| r.sum()).collect();
    let col_sums = matrix.column_iter().map(|c| c.sum()).collect();
    Ok(Overlap {
        matrix,
        row_sums,
        col_sums,
        orthonormal,
    })
}

impl Overlap {
    /// Matrix with a trailing row and column of sums, labelled for CSV export.
    pub fn write_csv(&self, path: &Path, row_labels: &[String], col_labels: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec![String::new()];
        header.extend(col_labels.iter().cloned());
        header.push("row_sum".into());
        w.write_record(&header)?;
        for (i, label) in row_labels.iter().enumerate() {
            let mut rec = vec![label.clone()];
            rec.extend(self.matrix.row(i).iter().map(|&v| fmt_num(v)));
            rec.push(fmt_num(self.row_sums[i]));
            w.write_record(&rec)?;
        }
        let mut rec = vec!["col_sum".to_string()];
        rec.extend(self.col_sums.iter().map(|&v| fmt_num(v)));
        rec.push(fmt_num(self.col_sums.iter().sum()));
        w.write_record(&rec)?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComparisonMetric {
    #[serde(rename = "vt_Uk")]
    VariateSubspace,
    #[serde(rename = "wt_Uk")]
    WeightSubspace,
}

/// Symmetric distance matrix between estimates; masked entries are NaN.
#[derive(Debug, Clone)]
pub struct ComparisonMatrix {
    pub labels: Vec<String>,
    pub values: Matrix,
}

impl ComparisonMatrix {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut rec = vec![label.clone()];
            rec.extend(self.values.row(i).iter().map(|&v| fmt_num(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Label `algorithm:penalty:fold` for an estimate.
pub fn estimate_label(est: &CcaEstimate) -> String {
    let pen = est.provenance.penalty.map(|p| format!("{p}")).unwrap_or_else(|| "-".into());
    format!("{}:{}:{}", est.provenance.algorithm, pen, est.provenance.fold)
}

/// Pairwise squared-sin distances between top-`k` subspaces. Variate
/// subspaces use `X·U_k` on the full centred data with unit-norm columns.
pub fn trajectory_comparison(
    estimates: &[&CcaEstimate],
    data: &PairedDataset,
    metric: ComparisonMetric,
    k: usize,
) -> Result<ComparisonMatrix> {
    if let Some(e) = estimates.iter().find(|e| e.k() < k) {
        return Err(Error::invalid(format!("estimate {} has fewer than {k} pairs", estimate_label(e))));
    }
    let x = data.ensure_centred().x;
    let blocks: Vec<Option<Matrix>> = estimates
        .iter()
        .map(|e| {
            let u = e.u_k(k);
            if e.flags.degenerate || u.column_iter().any(|c| c.iter().all(|&v| v == 0.0)) {
                return None;
            }
            Some(match metric {
                ComparisonMetric::WeightSubspace => u,
                ComparisonMetric::VariateSubspace => {
                    let mut z = &x * u;
                    for mut c in z.column_iter_mut() {
                        let n = c.norm();
                        if n > 0.0 {
                            c /= n;
                        }
                    }
                    z
                }
            })
        })
        .collect();
    let m = estimates.len();
    let mut values = Matrix::from_element(m, m, f64::NAN);
    for i in 0..m {
        for j in i..m {
            if let (Some(a), Some(b)) = (&blocks[i], &blocks[j]) {
                let d = if i == j { 0.0 } else { subspace_sin_sq(a, b, k) };
                values[(i, j)] = d;
                values[(j, i)] = d;
            }
        }
    }
    Ok(ComparisonMatrix {
        labels: estimates.iter().map(|e| estimate_label(e)).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cca::{sample_cca, FoldId};
    use crate::linalg::canonical_angles;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    fn random_orthogonal(rng: &mut ChaCha8Rng, k: usize) -> Matrix {
        let a = gaussian(rng, k, k);
        linalg::gram_schmidt_metric(&a, &Matrix::identity(k, k)).unwrap()
    }

    fn orthonormal_block(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Matrix {
        linalg::gram_schmidt_metric(&gaussian(rng, n, k), &Matrix::identity(n, n)).unwrap()
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (n, m) in [(3, 3), (4, 4), (3, 5), (5, 5)] {
            let cost = Matrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
            let perm = assignment(&cost);
            let got: f64 = perm.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
            let mut best = f64::INFINITY;
            let mut cols: Vec<usize> = (0..m).collect();
            permute(&mut cols, 0, n, &mut |p| {
                best = best.min((0..n).map(|i| cost[(i, p[i])]).sum());
            });
            assert!((got - best).abs() < 1e-12);
        }
    }

    fn permute(v: &mut Vec<usize>, start: usize, n: usize, f: &mut impl FnMut(&[usize])) {
        if start == n {
            f(&v[..n]);
            return;
        }
        for i in start..v.len() {
            v.swap(start, i);
            permute(v, start + 1, n, f);
            v.swap(start, i);
        }
    }

    #[test]
    fn orthogonal_alignment_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z0 = gaussian(&mut rng, 30, 3);
        let o = random_orthogonal(&mut rng, 3);
        let z1 = &z0 * &o;
        let reg = register(&z0, &z1, RegistrationMode::Orthogonal).unwrap();
        assert!((&reg.transform - o.transpose()).amax() < 1e-10);
        assert!(reg.residual <= 1e-10);
    }

    #[test]
    fn linear_minimum_is_sin_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z0 = orthonormal_block(&mut rng, 20, 3);
        let z1 = gaussian(&mut rng, 20, 3);
        let reg = register(&z0, &z1, RegistrationMode::Linear).unwrap();
        let q1 = orthonormal_block_of(&z1);
        let sin_sq = canonical_angles(&z0, &q1).unwrap().sin_sq();
        assert!((reg.residual - sin_sq).abs() < 1e-9);

        let mut deficient = z1.clone();
        let c0 = deficient.column(0).into_owned();
        deficient.set_column(2, &(c0 * 2.0));
        assert!(register(&z0, &deficient, RegistrationMode::Linear).is_err());
    }

    fn orthonormal_block_of(m: &Matrix) -> Matrix {
        linalg::gram_schmidt_metric(m, &Matrix::identity(m.nrows(), m.nrows())).unwrap()
    }

    #[test]
    fn orthogonal_matches_rotation_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z0 = gaussian(&mut rng, 15, 2);
        let z1 = gaussian(&mut rng, 15, 2);
        let reg = register(&z0, &z1, RegistrationMode::Orthogonal).unwrap();
        let mut best = f64::INFINITY;
        let steps = (2.0 * std::f64::consts::PI / 0.001) as usize;
        for s in 0..=steps {
            let t = s as f64 * 0.001;
            let (c, sn) = (t.cos(), t.sin());
            for m in [
                Matrix::from_row_slice(2, 2, &[c, -sn, sn, c]),
                Matrix::from_row_slice(2, 2, &[c, sn, sn, -c]),
            ] {
                best = best.min((&z1 * m - &z0).norm_squared());
            }
        }
        assert!((reg.residual - best).abs() < 1e-4);
        assert!(reg.residual <= best + 1e-12);
    }

    #[test]
    fn registration_hierarchy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let z0 = gaussian(&mut rng, 25, 4);
            let z1 = gaussian(&mut rng, 25, 4);
            let r = |m| register(&z0, &z1, m).unwrap().residual;
            let (lin, orth, perm, signs) = (
                r(RegistrationMode::Linear),
                r(RegistrationMode::Orthogonal),
                r(RegistrationMode::SignedPermutation),
                r(RegistrationMode::Signs),
            );
            assert!(lin <= orth + 1e-10 && orth <= perm + 1e-10 && perm <= signs + 1e-10);
        }
    }

    #[test]
    fn signed_permutation_undoes_shuffles() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let z0 = gaussian(&mut rng, 40, 4);
        let mut z1 = Matrix::zeros(40, 5);
        let perm = [2usize, 0, 4, 1];
        for (i, &j) in perm.iter().enumerate() {
            let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
            z1.set_column(j, &(z0.column(i) * sign));
        }
        z1.set_column(3, &gaussian(&mut rng, 40, 1).column(0));
        let reg = register(&z0, &z1, RegistrationMode::SignedPermutation).unwrap();
        assert!(reg.residual < 1e-20);
        assert!(register(&z0, &z1, RegistrationMode::Signs).is_err());
    }

    #[test]
    fn overlap_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = orthonormal_block(&mut rng, 10, 3);
        let same = overlap_matrix(&z, &z, true, false).unwrap();
        assert!((&same.matrix - Matrix::identity(3, 3)).amax() < 1e-12);
        assert!(same.row_sums.iter().chain(&same.col_sums).all(|s| (s - 1.0).abs() < 1e-12));

        let mut a = Matrix::zeros(6, 2);
        let mut b = Matrix::zeros(6, 2);
        a[(0, 0)] = 1.0;
        a[(1, 1)] = 1.0;
        b[(2, 0)] = 1.0;
        b[(3, 1)] = 1.0;
        assert_eq!(overlap_matrix(&a, &b, false, false).unwrap().matrix, Matrix::zeros(2, 2));
        assert!(overlap_matrix(&a, &Matrix::zeros(5, 2), false, false).is_err());
    }

    #[test]
    fn overlap_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let z = gaussian(&mut rng, 30, 4);
            let w = gaussian(&mut rng, 30, 4);
            let a = overlap_matrix(&z, &w, false, false).unwrap();
            let b = overlap_matrix(&w, &z, false, false).unwrap();
            assert_eq!(a.matrix.transpose(), b.matrix);

            let sq = overlap_matrix(&z, &w, true, true).unwrap();
            assert!(sq.orthonormal);
            let (qz, qw) = (orthonormal_block_of(&z), orthonormal_block_of(&w));
            let total: f64 = sq.matrix.sum();
            assert!((total - canonical_angles(&qz, &qw).unwrap().cos_sq()).abs() < 1e-9);
            // Contiguous sub-block sums.
            for (r0, r1, c0, c1) in [(0, 2, 1, 3), (1, 4, 0, 1), (2, 3, 2, 4)] {
                let block: f64 = sq.matrix.view((r0, c0), (r1 - r0, c1 - c0)).sum();
                let za = qz.columns(r0, r1 - r0).into_owned();
                let wb = qw.columns(c0, c1 - c0).into_owned();
                assert!((block - canonical_angles(&za, &wb).unwrap().cos_sq()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn comparison_matrix_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = PairedDataset::new(gaussian(&mut rng, 60, 5), gaussian(&mut rng, 60, 4)).unwrap();
        let mut ests = Vec::new();
        for i in 0..3 {
            let sub = data.subset(&(i * 10..i * 10 + 40).collect::<Vec<_>>());
            let mut e = sample_cca(&sub, 3).unwrap();
            e.provenance.fold = FoldId::Fold(i);
            ests.push(e);
        }
        ests.push(ests[0].clone());
        let mut degenerate = ests[1].clone();
        degenerate.flags.degenerate = true;
        ests.push(degenerate);
        let refs: Vec<&CcaEstimate> = ests.iter().collect();
        for metric in [ComparisonMetric::VariateSubspace, ComparisonMetric::WeightSubspace] {
            let cmp = trajectory_comparison(&refs, &data, metric, 2).unwrap();
            let v = &cmp.values;
            for i in 0..4 {
                assert_eq!(v[(i, i)], 0.0);
                for j in 0..4 {
                    assert!((v[(i, j)] - v[(j, i)]).abs() <= 1e-10);
                    assert!((0.0..=2.0).contains(&v[(i, j)]));
                }
            }
            assert!(v[(0, 3)].abs() < 1e-10);
            assert!(v[(4, 0)].is_nan() && v[(4, 4)].is_nan());
        }
    }
}
