//! Ridge-regularised CCA: shrink each within-view covariance towards the identity.

use crate::cca::{cca_from_covariance, CcaEstimate};
use crate::data::{CovarianceModel, PairedDataset};
use crate::error::Result;
use crate::linalg::{self, Matrix};

use super::{check_k, finish, EstimatorKind};

/// The plug-in covariance `((1−c)Cxx + cI, Cxy, (1−c)Cyy + cI)`.
pub(crate) fn ridge_model(sample: &CovarianceModel, c: f64) -> CovarianceModel {
    let shrink = |m: &Matrix| linalg::symmetrize(&(m * (1.0 - c) + Matrix::identity(m.nrows(), m.ncols()) * c));
    CovarianceModel {
        sxx: shrink(&sample.sxx),
        sxy: sample.sxy.clone(),
        syy: shrink(&sample.syy),
    }
}

/// Ridge CCA with tied parameter `c ∈ [0, 1]`; `c = 1` is PLS.
///
/// `rho` holds the canonical correlations of the regularised model.
pub fn rcca_fit(data: &PairedDataset, c: f64, k: usize) -> Result<CcaEstimate> {
    EstimatorKind::Rcca.check_penalty(c)?;
    check_k(data, k)?;
    let data = data.ensure_centred();
    let model = ridge_model(&CovarianceModel::from_centred_data(&data), c);
    let mut est = cca_from_covariance(&model, k, None)?;
    est.provenance.algorithm = "rcca".into();
    est.provenance.penalty = Some(c);
    Ok(finish(est, &data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cca::sample_cca;
    use crate::estimators::test_util::{assert_unit_variance, latent_data, variate_sin_sq};
    use crate::linalg::Vector;

    fn col(m: &Matrix, j: usize) -> Vector {
        m.column(j).into_owned()
    }

    fn cos_sq(a: &Vector, b: &Vector) -> f64 {
        let c = a.dot(b) / (a.norm() * b.norm());
        c * c
    }

    #[test]
    fn unit_penalty_is_pls() {
        let data = latent_data(1, 80, 5, 4, 2);
        let est = rcca_fit(&data, 1.0, 3).unwrap();
        let cov = CovarianceModel::from_centred_data(&data);
        let svd = linalg::compact_svd(&cov.sxy, 0.0).unwrap();
        for k in 0..3 {
            assert!((est.rho[k] - svd.singular_values[k]).abs() < 1e-10);
            assert!(cos_sq(&col(&est.u, k), &col(&svd.left, k)) > 1.0 - 1e-10);
            assert!(cos_sq(&col(&est.v, k), &col(&svd.right, k)) > 1.0 - 1e-10);
        }
        assert_unit_variance(&est, &data);
    }

    #[test]
    fn zero_penalty_is_sample_cca() {
        let data = latent_data(2, 200, 6, 5, 2);
        let est = rcca_fit(&data, 0.0, 3).unwrap();
        let reference = sample_cca(&data, 3).unwrap();
        assert!((&est.rho - &reference.rho).amax() < 1e-8);
        assert!((&est.u - &reference.u).amax() < 1e-8);
        assert!((&est.v - &reference.v).amax() < 1e-8);
    }

    #[test]
    fn matches_direct_plug_in_construction() {
        let data = latent_data(3, 40, 3, 3, 1);
        let c = 0.5;
        let n = data.n() as f64;
        let cxx = data.x.transpose() * &data.x / n;
        let cyy = data.y.transpose() * &data.y / n;
        let cxy = data.x.transpose() * &data.y / n;
        let model = CovarianceModel::new(
            cxx * 0.5 + Matrix::identity(3, 3) * 0.5,
            cxy,
            cyy * 0.5 + Matrix::identity(3, 3) * 0.5,
        )
        .unwrap();
        let direct = cca_from_covariance(&model, 3, None).unwrap();
        let est = rcca_fit(&data, c, 3).unwrap();
        assert!((&est.rho - &direct.rho).amax() < 1e-12);
        for k in 0..3 {
            // Same direction up to positive rescaling.
            let (a, b) = (col(&est.u, k), col(&direct.u, k));
            assert!(a.dot(&b) > 0.0);
            assert!(cos_sq(&a, &b) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn rho_is_continuous_in_c() {
        let data = latent_data(4, 150, 5, 5, 2);
        for i in 0..=20 {
            let c = i as f64 / 20.0 * (1.0 - 1e-3);
            let a = rcca_fit(&data, c, 2).unwrap();
            let b = rcca_fit(&data, c + 1e-3, 2).unwrap();
            assert!((&a.rho - &b.rho).amax() <= 0.05);
            assert!(variate_sin_sq(&data, &col(&a.u, 0), &col(&b.u, 0)) < 1e-2);
        }
    }

    #[test]
    fn rejects_out_of_range_penalty() {
        let data = latent_data(5, 30, 3, 3, 1);
        assert!(rcca_fit(&data, -0.1, 1).is_err());
        assert!(rcca_fit(&data, 1.1, 1).is_err());
        assert!(rcca_fit(&data, 0.5, 4).is_err());
    }
}
