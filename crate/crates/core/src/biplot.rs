//! Structure-correlation biplots: variables of both views represented by
//! their correlations with one view's canonical variates.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cca::{cca_from_covariance, CcaEstimate};
use crate::data::{default_names, CovarianceModel, PairedDataset};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::fmt_num;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    #[default]
    X,
    Y,
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            View::X => "x",
            View::Y => "y",
        })
    }
}

impl FromStr for View {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(View::X),
            "y" => Ok(View::Y),
            other => Err(Error::invalid(format!("unknown view `{other}`"))),
        }
    }
}

pub enum BiplotSource<'a> {
    /// Empirical correlations on the (full) dataset used for fitting.
    Sample(&'a PairedDataset),
    Population(&'a CovarianceModel),
}

#[derive(Debug, Clone)]
pub struct BiplotCoordinates {
    pub variate_view: View,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    /// `p × K`; masked rows are NaN.
    pub x: Matrix,
    /// `q × K`; masked rows are NaN.
    pub y: Matrix,
    pub warnings: Vec<String>,
}

impl BiplotCoordinates {
    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn sq_norms(&self, view: View) -> Vec<f64> {
        let m = match view {
            View::X => &self.x,
            View::Y => &self.y,
        };
        m.row_iter().map(|r| r.norm_squared()).collect()
    }
}

/// Correlations of every variable with the first `k` variates of `variate_view`.
pub fn structure_correlations(
    source: BiplotSource<'_>,
    estimate: &CcaEstimate,
    variate_view: View,
    k: usize,
) -> Result<BiplotCoordinates> {
    if k > estimate.k() {
        return Err(Error::invalid(format!("estimate has {} pairs, K = {k} requested", estimate.k())));
    }
    let (cov, x_names, y_names) = match source {
        BiplotSource::Sample(data) => {
            let c = data.ensure_centred();
            (CovarianceModel::from_centred_data(&c), data.x_names.clone(), data.y_names.clone())
        }
        BiplotSource::Population(cov) => (cov.clone(), default_names("x", cov.p()), default_names("y", cov.q())),
    };
    if estimate.u.nrows() != cov.p() || estimate.v.nrows() != cov.q() {
        return Err(Error::invalid("estimate dimensions do not match the covariance source"));
    }
    let (cov_x, cov_y, var) = match variate_view {
        View::X => {
            let u = estimate.u_k(k);
            let sx = &cov.sxx * &u;
            let var = (u.transpose() * &sx).diagonal();
            (sx, cov.sxy.transpose() * &u, var)
        }
        View::Y => {
            let v = estimate.v_k(k);
            let sy = &cov.syy * &v;
            let var = (v.transpose() * &sy).diagonal();
            (&cov.sxy * &v, sy, var)
        }
    };
    let scale = cov.sxx.diagonal().amax().max(cov.syy.diagonal().amax());
    for (j, &s) in var.iter().enumerate() {
        if !(s > 1e-14 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::ZeroVariance {
                block: "variates",
                column: j,
            });
        }
    }
    let mut warnings = Vec::new();
    let mut normalise = |c: Matrix, diag: &Matrix, names: &[String]| {
        let mut out = c;
        for i in 0..out.nrows() {
            let d = diag[(i, i)];
            if d <= 1e-14 * scale {
                warnings.push(format!("variable {} has zero variance; coordinate masked", names[i]));
                out.row_mut(i).fill(f64::NAN);
                continue;
            }
            for j in 0..out.ncols() {
                out[(i, j)] /= (d * var[j]).sqrt();
            }
        }
        out
    };
    let x = normalise(cov_x, &cov.sxx, &x_names);
    let y = normalise(cov_y, &cov.syy, &y_names);
    Ok(BiplotCoordinates {
        variate_view,
        x_names,
        y_names,
        x,
        y,
        warnings,
    })
}

/// Largest excess of each bound family over its right-hand side; every
/// entry should be `≤ 0` up to rounding for an exact decomposition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BoundViolations {
    /// `max ‖φ‖² − 1`.
    pub norm: f64,
    pub within_x: f64,
    pub within_y: f64,
    pub between: f64,
}

impl BoundViolations {
    pub fn max(&self) -> f64 {
        self.norm.max(self.within_x).max(self.within_y).max(self.between)
    }
}

/// Check the norm, within-view and between-view bounds of a population
/// biplot built from x-view variates. `K = 0` is vacuous and reports zeros.
pub fn verify_biplot_bounds(cov: &CovarianceModel, estimate: &CcaEstimate, k: usize) -> Result<BoundViolations> {
    if k == 0 {
        return Ok(BoundViolations::default());
    }
    let coords = structure_correlations(BiplotSource::Population(cov), estimate, View::X, k)?;
    let full = cca_from_covariance(cov, cov.p().min(cov.q()), None)?;
    let rho_next = full.rho.get(k).copied().unwrap_or(0.0);
    let dx = cov.sxx.diagonal().map(f64::sqrt);
    let dy = cov.syy.diagonal().map(f64::sqrt);
    let slack = |sq: f64| (1.0 - sq).max(0.0).sqrt();
    let nx = coords.sq_norms(View::X);
    let ny = coords.sq_norms(View::Y);
    let mut out = BoundViolations {
        norm: nx.iter().chain(&ny).map(|s| s - 1.0).fold(f64::NEG_INFINITY, f64::max),
        ..Default::default()
    };
    let within = |s: &Matrix, d: &crate::linalg::Vector, phi: &Matrix, norms: &[f64]| {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..s.nrows() {
            for j in 0..s.nrows() {
                let corr = s[(i, j)] / (d[i] * d[j]);
                let approx = phi.row(i).dot(&phi.row(j));
                worst = worst.max((corr - approx).abs() - slack(norms[i]) * slack(norms[j]));
            }
        }
        worst
    };
    out.within_x = within(&cov.sxx, &dx, &coords.x, &nx);
    out.within_y = within(&cov.syy, &dy, &coords.y, &ny);
    let mut between = f64::NEG_INFINITY;
    for i in 0..cov.p() {
        for j in 0..cov.q() {
            let corr = cov.sxy[(i, j)] / (dx[i] * dy[j]);
            let approx = coords.x.row(i).dot(&coords.y.row(j));
            between = between.max((corr - approx).abs() - rho_next * slack(nx[i]) * slack(ny[j]));
        }
    }
    out.between = between;
    Ok(out)
}

/// One exported biplot row.
#[derive(Debug, Clone, PartialEq)]
pub struct BiplotRow {
    pub view: View,
    pub name: String,
    pub coords: Vec<f64>,
    pub sq_norm: f64,
}

/// Rows with squared norm at least `threshold`, ordered by view then name.
/// Masked variables appear only when `threshold <= 0`.
pub fn biplot_rows(coords: &BiplotCoordinates, threshold: f64) -> Vec<BiplotRow> {
    let mut rows = Vec::new();
    for (view, m, names) in [(View::X, &coords.x, &coords.x_names), (View::Y, &coords.y, &coords.y_names)] {
        for (i, name) in names.iter().enumerate() {
            let c: Vec<f64> = m.row(i).iter().copied().collect();
            let sq: f64 = c.iter().map(|v| v * v).sum();
            let keep = if sq.is_nan() { threshold <= 0.0 } else { sq >= threshold };
            if keep {
                rows.push(BiplotRow {
                    view,
                    name: name.clone(),
                    coords: c,
                    sq_norm: sq,
                });
            }
        }
    }
    rows.sort_by(|a, b| a.view.cmp(&b.view).then_with(|| a.name.cmp(&b.name)));
    rows
}

pub fn export_biplot(coords: &BiplotCoordinates, threshold: f64, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["view".to_string(), "name".to_string()];
    header.extend((1..=coords.k()).map(|k| format!("coord_{k}")));
    header.push("sq_norm".into());
    w.write_record(&header)?;
    for row in biplot_rows(coords, threshold) {
        let mut rec = vec![row.view.to_string(), row.name];
        rec.extend(row.coords.iter().map(|&v| fmt_num(v)));
        rec.push(fmt_num(row.sq_norm));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_biplot(path: &Path) -> Result<Vec<BiplotRow>> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len();
    if width < 3 {
        return Err(parse_err("expected view, name, coordinates and sq_norm columns".into()));
    }
    let num = |s: &str| -> Result<f64> {
        if s == "NA" {
            Ok(f64::NAN)
        } else {
            s.parse().map_err(|_| parse_err(format!("bad number `{s}`")))
        }
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let coords = (2..width - 1).map(|i| num(&rec[i])).collect::<Result<Vec<_>>>()?;
        rows.push(BiplotRow {
            view: rec[0].parse()?,
            name: rec[1].to_string(),
            coords,
            sq_norm: num(&rec[width - 1])?,
        });
    }
    Ok(rows)
}
