//! Graphical CCA: exact CCA on the covariance implied by a Graphical Lasso
//! precision estimate of the joint sample covariance.

use crate::cca::{cca_from_covariance, CcaEstimate};
use crate::data::{CovarianceModel, PairedDataset};
use crate::error::Result;
use crate::glasso::{glasso_fit, GlassoOptions};

use super::{check_k, finish, EstimatorKind};

/// Graphical CCA at penalty `lambda`. `rho` holds the canonical correlations of `Ω̂⁻¹`.
pub fn gcca_fit(data: &PairedDataset, lambda: f64, k: usize, opts: &GlassoOptions) -> Result<CcaEstimate> {
    EstimatorKind::Gcca.check_penalty(lambda)?;
    check_k(data, k)?;
    let data = data.ensure_centred();
    let sample = CovarianceModel::from_centred_data(&data);
    let precision = glasso_fit(&sample.joint(), lambda, opts)?;
    let model = CovarianceModel::from_joint(&precision.sigma, data.p())?;
    let mut est = cca_from_covariance(&model, k, None)?;
    est.provenance.algorithm = "gcca".into();
    est.provenance.penalty = Some(lambda);
    let d = &precision.diagnostics;
    let diag = &mut est.provenance.diagnostics;
    diag.insert("glasso_iterations".into(), d.iterations as f64);
    diag.insert("glasso_kkt".into(), d.kkt_residual);
    diag.insert("precision_support".into(), precision.off_diagonal_support() as f64);
    Ok(finish(est, &data))
}
