//! Pearson correlation matrices, difference matrices and heatmaps.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::preprocess::PreprocessPlan;
use crate::table::Table;

/// Default shared colour scale for difference heatmaps.
pub const DEFAULT_SCALE: (f64, f64) = (-0.5, 0.5);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrMatrix {
    pub names: Vec<String>,
    pub matrix: Mat,
    /// Columns with zero variance; their row and column are all zero.
    pub constant: Vec<bool>,
}

/// Pearson correlations of the plan-encoded columns of `table`.
pub fn pearson_matrix(table: &Table, plan: &PreprocessPlan) -> Result<CorrMatrix> {
    let enc = plan.encode(table)?.matrix;
    Ok(pearson_of(&enc, plan.schema.names().into_iter().map(String::from).collect()))
}

/// Pearson correlations between the columns of `m`.
pub fn pearson_of(m: &Mat, names: Vec<String>) -> CorrMatrix {
    let (n, d) = (m.rows(), m.cols());
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let c = m.column(j);
            let mean = c.iter().sum::<f64>() / n.max(1) as f64;
            c.into_iter().map(|v| v - mean).collect()
        })
        .collect();
    let ss: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    // relative tolerance: a column is constant when its centred values vanish
    let constant: Vec<bool> = (0..d)
        .map(|j| {
            let scale = m.column(j).iter().fold(0.0f64, |a, v| a.max(libm::fabs(*v)));
            !(ss[j] > (1e-12 * scale) * (1e-12 * scale) * n as f64)
        })
        .collect();
    let mut out = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            if constant[i] || constant[j] {
                continue;
            }
            let r = if i == j {
                1.0
            } else {
                let s: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
                (s / libm::sqrt(ss[i] * ss[j])).clamp(-1.0, 1.0)
            };
            out[(i, j)] = r;
            out[(j, i)] = r;
        }
    }
    CorrMatrix { names, matrix: out, constant }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffMatrix {
    pub names: Vec<String>,
    pub matrix: Mat,
    /// Mean absolute off-diagonal difference.
    pub mad: f64,
}

/// Mean absolute off-diagonal entry.
pub fn off_diagonal_mad(m: &Mat) -> f64 {
    let d = m.rows();
    if d < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                s += libm::fabs(m[(i, j)]);
            }
        }
    }
    s / (d * (d - 1)) as f64
}

/// `a − b` with its MAD.
pub fn diff_matrix(a: &CorrMatrix, b: &CorrMatrix) -> Result<DiffMatrix> {
    if a.names != b.names {
        let bad = a.names.iter().zip(&b.names).find(|(x, y)| x != y).map(|(x, _)| x.clone());
        return Err(Error::Schema(format!(
            "correlation matrices bind different columns{}",
            bad.map(|c| format!(" (first mismatch at `{c}`)")).unwrap_or_default()
        )));
    }
    let d = a.names.len();
    let mut m = Mat::zeros(d, d);
    for (o, (x, y)) in m.as_mut_slice().iter_mut().zip(a.matrix.as_slice().iter().zip(b.matrix.as_slice())) {
        *o = x - y;
    }
    let mad = off_diagonal_mad(&m);
    Ok(DiffMatrix { names: a.names.clone(), matrix: m, mad })
}

const LOW: [f64; 3] = [33.0, 102.0, 172.0];
const MID: [f64; 3] = [247.0, 247.0, 247.0];
const HIGH: [f64; 3] = [178.0, 24.0, 43.0];

/// Diverging blue-white-red colour for `v` on `[lo, hi]`, clamped.
pub fn ramp(v: f64, lo: f64, hi: f64) -> [u8; 3] {
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    let (a, b, u) = if t < 0.5 { (LOW, MID, t * 2.0) } else { (MID, HIGH, (t - 0.5) * 2.0) };
    let mut c = [0u8; 3];
    for k in 0..3 {
        c[k] = libm::round(a[k] + (b[k] - a[k]) * u) as u8;
    }
    c
}

/// Binary PPM (P6) with one `cell × cell` pixel block per matrix entry.
pub fn render_heatmap(m: &Mat, scale: (f64, f64), cell: usize) -> Result<Vec<u8>> {
    let (lo, hi) = scale;
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("heatmap scale needs lo < hi, got ({lo}, {hi})")));
    }
    if !m.is_finite() {
        return Err(Error::InvalidArgument("heatmap input has non-finite entries".into()));
    }
    let cell = cell.max(1);
    let (w, h) = (m.cols() * cell, m.rows() * cell);
    let mut out = Vec::from(format!("P6\n{w} {h}\n255\n").as_bytes());
    out.reserve(w * h * 3);
    for r in 0..h {
        for c in 0..w {
            out.extend_from_slice(&ramp(m[(r / cell, c / cell)], lo, hi));
        }
    }
    Ok(out)
}
