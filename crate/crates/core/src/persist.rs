//! Estimate files: a JSON manifest with provenance, correlations and flags,
//! and one CSV per direction matrix (rows are variables).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cca::{CcaEstimate, EstimateFlags, Provenance};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateManifest {
    pub provenance: Provenance,
    pub k: usize,
    pub p: usize,
    pub q: usize,
    pub rho: Vec<f64>,
    pub flags: EstimateFlags,
    /// Paths relative to the manifest.
    pub u_file: String,
    pub v_file: String,
}

fn write_directions(path: &Path, names: &[String], prefix: &str, m: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["variable".to_string()];
    header.extend((1..=m.ncols()).map(|k| format!("{prefix}{k}")));
    w.write_record(&header)?;
    for (i, name) in names.iter().enumerate() {
        let mut rec = vec![name.clone()];
        // Shortest round-trip representation.
        rec.extend(m.row(i).iter().map(|v| format!("{v:e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn read_directions(path: &Path, rows: usize, cols: usize) -> Result<Matrix> {
    let bad = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path)?;
    let mut m = Matrix::zeros(rows, cols);
    let mut count = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if i >= rows || rec.len() != cols + 1 {
            return Err(bad(format!("unexpected shape at data row {}", i + 1)));
        }
        for j in 0..cols {
            m[(i, j)] = rec[j + 1]
                .parse()
                .map_err(|_| bad(format!("bad number `{}` at data row {}", &rec[j + 1], i + 1)))?;
        }
        count += 1;
    }
    if count != rows {
        return Err(bad(format!("expected {rows} rows, found {count}")));
    }
    Ok(m)
}

/// Write `<stem>.json`, `<stem>_u.csv` and `<stem>_v.csv` into `dir`; returns
/// the paths written, manifest first.
pub fn save_estimate(est: &CcaEstimate, dir: &Path, stem: &str, x_names: &[String], y_names: &[String]) -> Result<Vec<PathBuf>> {
    if x_names.len() != est.u.nrows() || y_names.len() != est.v.nrows() {
        return Err(Error::invalid("variable names do not match direction rows"));
    }
    let u_file = format!("{stem}_u.csv");
    let v_file = format!("{stem}_v.csv");
    let manifest = EstimateManifest {
        provenance: est.provenance.clone(),
        k: est.k(),
        p: est.u.nrows(),
        q: est.v.nrows(),
        rho: est.rho.iter().copied().collect(),
        flags: est.flags.clone(),
        u_file: u_file.clone(),
        v_file: v_file.clone(),
    };
    let paths = vec![dir.join(format!("{stem}.json")), dir.join(&u_file), dir.join(&v_file)];
    std::fs::write(&paths[0], serde_json::to_string_pretty(&manifest)? + "\n")?;
    write_directions(&paths[1], x_names, "u", &est.u)?;
    write_directions(&paths[2], y_names, "v", &est.v)?;
    Ok(paths)
}

pub fn load_estimate(manifest_path: &Path) -> Result<CcaEstimate> {
    let text = std::fs::read_to_string(manifest_path)?;
    let m: EstimateManifest = serde_json::from_str(&text)?;
    if m.rho.len() != m.k {
        return Err(Error::Parse {
            path: manifest_path.to_path_buf(),
            message: format!("{} correlations for K = {}", m.rho.len(), m.k),
        });
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    Ok(CcaEstimate {
        u: read_directions(&dir.join(&m.u_file), m.p, m.k)?,
        v: read_directions(&dir.join(&m.v_file), m.q, m.k)?,
        rho: Vector::from_vec(m.rho),
        provenance: m.provenance,
        flags: m.flags,
    })
}
