//! Two-view datasets, partitioned covariances and cross-validation folds.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Paired sample matrices sharing the row (sample) axis.
#[derive(Debug, Clone)]
pub struct PairedDataset {
    pub x: Matrix,
    pub y: Matrix,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    /// Column means removed by centring, if the data has been centred.
    pub centring_means: Option<(Vector, Vector)>,
}

pub fn default_names(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

fn column_means(m: &Matrix) -> Vector {
    let n = m.nrows().max(1) as f64;
    Vector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

fn subtract_means(m: &Matrix, means: &Vector) -> Matrix {
    let mut out = m.clone();
    for (j, mean) in means.iter().enumerate() {
        out.column_mut(j).add_scalar_mut(-mean);
    }
    out
}

fn select_rows(m: &Matrix, rows: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

impl PairedDataset {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        let p = x.ncols();
        let q = y.ncols();
        Self::with_names(x, y, default_names("X", p), default_names("Y", q))
    }

    pub fn with_names(x: Matrix, y: Matrix, x_names: Vec<String>, y_names: Vec<String>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::invalid(format!(
                "views have different sample counts ({} vs {})",
                x.nrows(),
                y.nrows()
            )));
        }
        if x_names.len() != x.ncols() || y_names.len() != y.ncols() {
            return Err(Error::invalid("variable name count does not match column count"));
        }
        linalg::check_finite(&x)?;
        linalg::check_finite(&y)?;
        Ok(PairedDataset {
            x,
            y,
            x_names,
            y_names,
            centring_means: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    pub fn is_centred(&self) -> bool {
        self.centring_means.is_some()
    }

    /// Column-centred copy. Centring an already centred dataset is a no-op
    /// apart from removing residual rounding.
    pub fn centred(&self) -> PairedDataset {
        let mx = column_means(&self.x);
        let my = column_means(&self.y);
        let (prev_x, prev_y) = self
            .centring_means
            .clone()
            .unwrap_or_else(|| (Vector::zeros(self.p()), Vector::zeros(self.q())));
        PairedDataset {
            x: subtract_means(&self.x, &mx),
            y: subtract_means(&self.y, &my),
            x_names: self.x_names.clone(),
            y_names: self.y_names.clone(),
            centring_means: Some((prev_x + mx, prev_y + my)),
        }
    }

    /// Centred copy unless the dataset is already flagged as centred.
    pub fn ensure_centred(&self) -> PairedDataset {
        if self.is_centred() {
            self.clone()
        } else {
            self.centred()
        }
    }

    /// Rows `rows` of both views (no re-centring).
    pub fn subset(&self, rows: &[usize]) -> PairedDataset {
        PairedDataset {
            x: select_rows(&self.x, rows),
            y: select_rows(&self.y, rows),
            x_names: self.x_names.clone(),
            y_names: self.y_names.clone(),
            centring_means: None,
        }
    }
}

/// Joint covariance in `(xx, xy, yy)` block form.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    pub sxx: Matrix,
    pub sxy: Matrix,
    pub syy: Matrix,
}

impl CovarianceModel {
    pub fn new(sxx: Matrix, sxy: Matrix, syy: Matrix) -> Result<Self> {
        let (p, q) = sxy.shape();
        if sxx.shape() != (p, p) || syy.shape() != (q, q) {
            return Err(Error::invalid(format!(
                "block shapes inconsistent: sxx {:?}, sxy {:?}, syy {:?}",
                sxx.shape(),
                sxy.shape(),
                syy.shape()
            )));
        }
        Ok(CovarianceModel { sxx, sxy, syy })
    }

    /// Split a `(p+q)×(p+q)` joint matrix after its first `p` rows/columns.
    pub fn from_joint(joint: &Matrix, p: usize) -> Result<Self> {
        let d = joint.nrows();
        if !joint.is_square() || p > d {
            return Err(Error::invalid("joint matrix must be square with p <= dimension"));
        }
        let q = d - p;
        CovarianceModel::new(
            joint.view((0, 0), (p, p)).into_owned(),
            joint.view((0, p), (p, q)).into_owned(),
            joint.view((p, p), (q, q)).into_owned(),
        )
    }

    /// Sample covariance `(1/n)·[X Y]ᵀ[X Y]` of data taken as already centred.
    pub fn from_centred_data(data: &PairedDataset) -> Self {
        let n = data.n().max(1) as f64;
        CovarianceModel {
            sxx: linalg::symmetrize(&(data.x.transpose() * &data.x / n)),
            sxy: data.x.transpose() * &data.y / n,
            syy: linalg::symmetrize(&(data.y.transpose() * &data.y / n)),
        }
    }

    pub fn p(&self) -> usize {
        self.sxx.nrows()
    }

    pub fn q(&self) -> usize {
        self.syy.nrows()
    }

    pub fn joint(&self) -> Matrix {
        let (p, q) = (self.p(), self.q());
        let mut j = Matrix::zeros(p + q, p + q);
        j.view_mut((0, 0), (p, p)).copy_from(&self.sxx);
        j.view_mut((0, p), (p, q)).copy_from(&self.sxy);
        j.view_mut((p, 0), (q, p)).copy_from(&self.sxy.transpose());
        j.view_mut((p, p), (q, q)).copy_from(&self.syy);
        j
    }

    /// Check the type invariants: symmetric joint matrix, PSD diagonal blocks.
    pub fn validate(&self) -> Result<()> {
        let j = self.joint();
        linalg::check_finite(&j)?;
        let scale = j.amax().max(1.0);
        if linalg::max_asymmetry(&self.sxx) > 1e-10 * scale || linalg::max_asymmetry(&self.syy) > 1e-10 * scale {
            return Err(Error::invalid("within-view covariance blocks are not symmetric"));
        }
        for (name, block) in [("sxx", &self.sxx), ("syy", &self.syy)] {
            if block.nrows() > 0 && linalg::min_eigenvalue(block)? < -1e-10 * scale {
                return Err(Error::invalid(format!("{name} is not positive semidefinite")));
            }
        }
        Ok(())
    }
}

/// Centre both views and return them with their sample covariance (divisor `n`).
pub fn center_and_covariance(data: &PairedDataset) -> Result<(PairedDataset, CovarianceModel)> {
    if data.n() < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {}", data.n())));
    }
    let centred = data.centred();
    let cov = CovarianceModel::from_centred_data(&centred);
    Ok((centred, cov))
}

/// Assignment of samples to `V` cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n: usize,
    pub folds: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

/// Balanced, seeded fold assignment.
pub fn make_folds(n: usize, folds: usize, seed: u64) -> Result<FoldPlan> {
    if folds < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {folds}")));
    }
    if folds > n {
        return Err(Error::invalid(format!("{folds} folds requested for {n} samples")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        assignments[row] = pos % folds;
    }
    Ok(FoldPlan {
        n,
        folds,
        seed,
        assignments,
    })
}

/// Training and validation halves of one fold.
#[derive(Debug, Clone)]
pub struct FoldSplit {
    pub fold: usize,
    /// Training rows, centred by their own means.
    pub train: PairedDataset,
    /// Validation rows, shifted by the training means.
    pub validation: PairedDataset,
    pub train_rows: Vec<usize>,
    pub validation_rows: Vec<usize>,
}

impl FoldPlan {
    pub fn validation_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn training_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Split `data` for fold `fold`, centring validation rows with training means.
    pub fn split(&self, data: &PairedDataset, fold: usize) -> Result<FoldSplit> {
        if data.n() != self.n {
            return Err(Error::invalid(format!(
                "fold plan covers {} samples but data has {}",
                self.n,
                data.n()
            )));
        }
        if fold >= self.folds {
            return Err(Error::invalid(format!("fold {fold} out of range 0..{}", self.folds)));
        }
        let train_rows = self.training_rows(fold);
        let validation_rows = self.validation_rows(fold);
        let raw_train = data.subset(&train_rows);
        let mx = column_means(&raw_train.x);
        let my = column_means(&raw_train.y);
        let train = raw_train.centred();
        let raw_val = data.subset(&validation_rows);
        let validation = PairedDataset {
            x: subtract_means(&raw_val.x, &mx),
            y: subtract_means(&raw_val.y, &my),
            x_names: data.x_names.clone(),
            y_names: data.y_names.clone(),
            centring_means: Some((mx, my)),
        };
        Ok(FoldSplit {
            fold,
            train,
            validation,
            train_rows,
            validation_rows,
        })
    }
}

fn parse_view(path: &Path) -> Result<(Vec<String>, Matrix)> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let names: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if names.is_empty() {
        return Err(parse_err("header row is empty".into()));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != names.len() {
            return Err(parse_err(format!(
                "row {} has {} fields, expected {}",
                r + 2,
                record.len(),
                names.len()
            )));
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(format!("row {} column `{}`: cannot parse `{field}` as a number", r + 2, names[c]))
            })?;
            if !v.is_finite() {
                return Err(parse_err(format!(
                    "row {} column `{}`: missing or non-finite value",
                    r + 2,
                    names[c]
                )));
            }
            values.push(v);
        }
        rows += 1;
    }
    Ok((names.clone(), Matrix::from_row_slice(rows, names.len(), &values)))
}

/// Load a two-view dataset from one CSV per view (header row of variable names).
pub fn read_paired_csv(x_path: &Path, y_path: &Path) -> Result<PairedDataset> {
    let (x_names, x) = parse_view(x_path)?;
    let (y_names, y) = parse_view(y_path)?;
    if x.nrows() != y.nrows() {
        return Err(Error::invalid(format!(
            "{} has {} rows but {} has {}",
            x_path.display(),
            x.nrows(),
            y_path.display(),
            y.nrows()
        )));
    }
    PairedDataset::with_names(x, y, x_names, y_names)
}

/// Write a matrix as CSV with the given header.
pub fn write_matrix_csv(path: &Path, header: &[String], m: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in 0..m.nrows() {
        w.write_record(m.row(r).iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_paired_csv(data: &PairedDataset, x_path: &Path, y_path: &Path) -> Result<()> {
    write_matrix_csv(x_path, &data.x_names, &data.x)?;
    write_matrix_csv(y_path, &data.y_names, &data.y)
}
