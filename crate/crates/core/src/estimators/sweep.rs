//! Penalty-grid × fold sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cca::{CcaEstimate, FoldId};
use crate::data::{FoldPlan, PairedDataset};
use crate::error::{Error, Result, SolverDiagnostics};

use super::{EstimatorKind, EstimatorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub message: String,
    pub diagnostics: Option<SolverDiagnostics>,
}

impl From<Error> for CellFailure {
    fn from(e: Error) -> Self {
        let diagnostics = match &e {
            Error::Convergence { diagnostics, .. } => Some(diagnostics.clone()),
            _ => None,
        };
        CellFailure {
            message: e.to_string(),
            diagnostics,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub penalty_index: usize,
    pub penalty: f64,
    pub fold: FoldId,
    pub outcome: std::result::Result<CcaEstimate, CellFailure>,
}

/// Estimates for every (penalty, fold) cell plus the full-sample fit.
#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    pub kind: EstimatorKind,
    pub grid: Vec<f64>,
    pub folds: FoldPlan,
    pub k: usize,
    /// Ordered by penalty index, then folds `0..V`, then the full sample.
    pub cells: Vec<SweepCell>,
}

impl TrajectoryResult {
    fn index(&self, penalty_index: usize, fold: FoldId) -> usize {
        let per = self.folds.folds + 1;
        penalty_index * per
            + match fold {
                FoldId::Fold(f) => f,
                FoldId::Full => self.folds.folds,
            }
    }

    pub fn cell(&self, penalty_index: usize, fold: FoldId) -> &SweepCell {
        &self.cells[self.index(penalty_index, fold)]
    }

    pub fn estimate(&self, penalty_index: usize, fold: FoldId) -> Option<&CcaEstimate> {
        self.cell(penalty_index, fold).outcome.as_ref().ok()
    }

    pub fn full(&self, penalty_index: usize) -> Option<&CcaEstimate> {
        self.estimate(penalty_index, FoldId::Full)
    }

    /// Training-fold estimates at one penalty; `None` if any fold failed.
    pub fn fold_estimates(&self, penalty_index: usize) -> Option<Vec<&CcaEstimate>> {
        (0..self.folds.folds)
            .map(|f| self.estimate(penalty_index, FoldId::Fold(f)))
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }
}

/// Fit `spec` at every grid penalty on each training fold and on the full data.
///
/// Cells run in parallel on the current rayon pool; the result order and
/// values do not depend on scheduling. Per-cell failures are recorded.
pub fn sweep_trajectory(spec: &EstimatorSpec, data: &PairedDataset, grid: &[f64], folds: &FoldPlan) -> Result<TrajectoryResult> {
    if grid.is_empty() {
        return Err(Error::invalid("penalty grid is empty"));
    }
    let increasing = grid.windows(2).all(|w| w[0] < w[1]);
    let decreasing = grid.windows(2).all(|w| w[0] > w[1]);
    if !(increasing || decreasing) {
        return Err(Error::invalid("penalty grid must be strictly monotone"));
    }
    for &pen in grid {
        spec.kind.check_penalty(pen)?;
    }
    let splits = (0..folds.folds)
        .map(|f| folds.split(data, f))
        .collect::<Result<Vec<_>>>()?;
    let full = data.ensure_centred();

    let mut tasks = Vec::with_capacity(grid.len() * (folds.folds + 1));
    for (i, &pen) in grid.iter().enumerate() {
        for f in 0..folds.folds {
            tasks.push((i, pen, FoldId::Fold(f)));
        }
        tasks.push((i, pen, FoldId::Full));
    }
    let cells = tasks
        .into_par_iter()
        .map(|(i, pen, fold)| {
            let train = match fold {
                FoldId::Fold(f) => &splits[f].train,
                FoldId::Full => &full,
            };
            let outcome = spec
                .with_penalty(pen)
                .fit(train)
                .map(|mut est| {
                    est.provenance.fold = fold;
                    est.provenance.seed = Some(folds.seed);
                    est
                })
                .map_err(CellFailure::from);
            SweepCell {
                penalty_index: i,
                penalty: pen,
                fold,
                outcome,
            }
        })
        .collect();
    Ok(TrajectoryResult {
        kind: spec.kind,
        grid: grid.to_vec(),
        folds: folds.clone(),
        k: spec.k,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_folds;
    use crate::estimators::test_util::latent_data;

    #[test]
    fn counts_cells() {
        let data = latent_data(1, 40, 3, 3, 1);
        let folds = make_folds(40, 2, 7).unwrap();
        let spec = EstimatorSpec::new(EstimatorKind::Rcca, 0.5, 1);
        let res = sweep_trajectory(&spec, &data, &[0.5], &folds).unwrap();
        assert_eq!(res.cells.len(), 3);
        assert_eq!(res.cells[2].fold, FoldId::Full);
        assert_eq!(res.failures(), 0);
        assert_eq!(res.fold_estimates(0).unwrap().len(), 2);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let data = latent_data(2, 120, 5, 4, 2);
        let folds = make_folds(120, 4, 3).unwrap();
        let grid = [0.001, 0.01, 0.05];
        let spec = EstimatorSpec::new(EstimatorKind::Scca, 0.0, 2);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| sweep_trajectory(&spec, &data, &grid, &folds).unwrap())
        };
        let a = run(1);
        let b = run(4);
        for (x, y) in a.cells.iter().zip(&b.cells) {
            let (ex, ey) = (x.outcome.as_ref().unwrap(), y.outcome.as_ref().unwrap());
            assert_eq!(ex.rho.as_slice(), ey.rho.as_slice());
            assert_eq!(ex.u.as_slice(), ey.u.as_slice());
        }
    }

    #[test]
    fn failures_are_recorded_not_raised() {
        let data = latent_data(3, 60, 4, 4, 1);
        let folds = make_folds(60, 3, 1).unwrap();
        let mut spec = EstimatorSpec::new(EstimatorKind::Gcca, 0.1, 1);
        spec.knobs.glasso.max_iter = 1;
        spec.knobs.glasso.tol = 1e-15;
        let res = sweep_trajectory(&spec, &data, &[0.01, 0.1], &folds).unwrap();
        assert_eq!(res.cells.len(), 8);
        assert!(res.failures() > 0);
        let failed = res.cells.iter().find(|c| c.outcome.is_err()).unwrap();
        assert!(failed.outcome.as_ref().unwrap_err().diagnostics.is_some());
    }

    #[test]
    fn rejects_bad_grids() {
        let data = latent_data(4, 30, 3, 3, 1);
        let folds = make_folds(30, 2, 1).unwrap();
        let spec = EstimatorSpec::new(EstimatorKind::Rcca, 0.5, 1);
        assert!(sweep_trajectory(&spec, &data, &[], &folds).is_err());
        assert!(sweep_trajectory(&spec, &data, &[0.1, 0.1], &folds).is_err());
        assert!(sweep_trajectory(&spec, &data, &[0.1, 2.0], &folds).is_err());
    }
}
