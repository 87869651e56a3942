//! The four regularised estimators behind one interface, plus grid sweeps.
//!
//! Every estimator returns directions scaled so the training variates have
//! unit empirical variance; flagged degenerate estimates are exempt.

mod gcca;
mod rcca;
mod scca;
mod spls;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cca::CcaEstimate;
use crate::data::PairedDataset;
use crate::error::{Error, Result};
use crate::glasso::GlassoOptions;
use crate::linalg::{Matrix, Vector};

pub use gcca::gcca_fit;
pub use rcca::rcca_fit;
pub use scca::{scca_fit, LadmmOptions};
pub use spls::{l1_constrained_unit, spls_fit, SplsOptions};
pub use sweep::{sweep_trajectory, CellFailure, SweepCell, TrajectoryResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Rcca,
    Spls,
    Scca,
    Gcca,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [EstimatorKind::Rcca, EstimatorKind::Spls, EstimatorKind::Scca, EstimatorKind::Gcca];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Rcca => "rcca",
            EstimatorKind::Spls => "spls",
            EstimatorKind::Scca => "scca",
            EstimatorKind::Gcca => "gcca",
        }
    }

    pub fn check_penalty(self, penalty: f64) -> Result<()> {
        let ok = match self {
            EstimatorKind::Rcca => (0.0..=1.0).contains(&penalty),
            EstimatorKind::Spls => penalty >= 1.0 && penalty.is_finite(),
            EstimatorKind::Scca => penalty >= 0.0 && penalty.is_finite(),
            EstimatorKind::Gcca => penalty > 0.0 && penalty.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            let range = match self {
                EstimatorKind::Rcca => "[0, 1]",
                EstimatorKind::Spls => "[1, inf)",
                EstimatorKind::Scca => "[0, inf)",
                EstimatorKind::Gcca => "(0, inf)",
            };
            Err(Error::invalid(format!("{} penalty {penalty} outside {range}", self.name())))
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rcca" => Ok(EstimatorKind::Rcca),
            "spls" => Ok(EstimatorKind::Spls),
            "scca" => Ok(EstimatorKind::Scca),
            "gcca" => Ok(EstimatorKind::Gcca),
            other => Err(Error::invalid(format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverKnobs {
    pub glasso: GlassoOptions,
    pub ladmm: LadmmOptions,
    pub spls: SplsOptions,
}

/// An algorithm together with its (tied) penalty and the number of pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub penalty: f64,
    pub k: usize,
    pub knobs: SolverKnobs,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind, penalty: f64, k: usize) -> Self {
        EstimatorSpec {
            kind,
            penalty,
            k,
            knobs: SolverKnobs::default(),
        }
    }

    pub fn with_penalty(&self, penalty: f64) -> Self {
        EstimatorSpec { penalty, ..*self }
    }

    pub fn fit(&self, data: &PairedDataset) -> Result<CcaEstimate> {
        self.kind.check_penalty(self.penalty)?;
        match self.kind {
            EstimatorKind::Rcca => rcca_fit(data, self.penalty, self.k),
            EstimatorKind::Spls => spls_fit(data, self.penalty, self.k, &self.knobs.spls),
            EstimatorKind::Scca => scca_fit(data, self.penalty, self.k, &self.knobs.ladmm),
            EstimatorKind::Gcca => gcca_fit(data, self.penalty, self.k, &self.knobs.glasso),
        }
    }
}

fn check_k(data: &PairedDataset, k: usize) -> Result<()> {
    if k == 0 || k > data.p().min(data.q()) {
        return Err(Error::invalid(format!(
            "K = {k} must lie in 1..={}",
            data.p().min(data.q())
        )));
    }
    if data.n() < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {}", data.n())));
    }
    Ok(())
}

/// Signed empirical correlation between matching columns of `XU` and `YV`;
/// zero where either variate is constant.
pub fn variate_correlations(data: &PairedDataset, u: &Matrix, v: &Matrix) -> Vector {
    let zx = &data.x * u;
    let zy = &data.y * v;
    Vector::from_fn(u.ncols(), |k, _| {
        let a = zx.column(k);
        let b = zy.column(k);
        let denom = (a.norm_squared() * b.norm_squared()).sqrt();
        if denom > 0.0 {
            a.dot(&b) / denom
        } else {
            0.0
        }
    })
}

/// Apply the common output contract: flag zero directions, then rescale to
/// unit training variance.
fn finish(mut est: CcaEstimate, data: &PairedDataset) -> CcaEstimate {
    if est.has_zero_direction() {
        est.flags.degenerate = true;
    }
    est.normalise_variates(data);
    est
}
