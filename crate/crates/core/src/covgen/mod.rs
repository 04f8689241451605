//! Covariance-conditioned outlier generation.
//!
//! Outlier rows are drawn from a Gaussian copula whose correlation comes
//! from a covariance matrix, with standardized marginals from a chosen
//! tail family. Rows are conditioned to lie beyond a Mahalanobis shell of
//! radius `s·√m` and each coordinate is clipped at `L` standard units.

mod family;

pub use family::{TailFamily, DEFAULT_WEIBULL_SHAPE};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::index;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, forward_substitute, symmetric_eigenvalues, Mat, CHOLESKY_JITTER};
use crate::rng::{derive_seed, rng, tag, Rng};
use crate::table::{ColumnData, ColumnKind, Table};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
/// Rejection sampling is used when at least this fraction of pilot draws pass.
const MIN_ACCEPTANCE: f64 = 1e-3;
const PILOT_DRAWS: usize = 1000;
/// Per-row attempt budget before giving up on the tail shell.
const MAX_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovMatrix {
    pub names: Vec<String>,
    pub matrix: Mat,
}

impl CovMatrix {
    /// Validates shape, symmetry (1e-12), non-negative diagonal and PSD (−1e-10).
    pub fn new(names: Vec<String>, matrix: Mat) -> Result<Self> {
        let d = names.len();
        if matrix.rows() != d || matrix.cols() != d {
            return Err(Error::DimensionMismatch { what: "covariance", expected: d, found: matrix.rows() });
        }
        Self::check(&matrix)?;
        Ok(CovMatrix { names, matrix })
    }

    pub fn check(m: &Mat) -> Result<()> {
        let d = m.rows();
        if !m.is_finite() {
            return Err(Error::InvalidArgument("covariance has non-finite entries".into()));
        }
        for i in 0..d {
            if m[(i, i)] < 0.0 {
                return Err(Error::InvalidArgument(format!("negative variance at {i}")));
            }
            for j in 0..i {
                let scale = 1.0f64.max(m[(i, j)].abs());
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidArgument(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        let min_eig = symmetric_eigenvalues(m).first().copied().unwrap_or(0.0);
        if min_eig < -PSD_TOL * 1.0f64.max(m.max_abs()) {
            return Err(Error::InvalidArgument(format!("covariance not PSD (min eigenvalue {min_eig:e})")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Correlation matrix; a zero-variance coordinate gets unit diagonal and
    /// zero correlations.
    pub fn correlation(&self) -> Mat {
        let d = self.dim();
        let sd: Vec<f64> = (0..d).map(|i| libm::sqrt(self.matrix[(i, i)])).collect();
        let mut c = Mat::identity(d);
        for i in 0..d {
            for j in 0..d {
                if i != j && sd[i] > 0.0 && sd[j] > 0.0 {
                    c[(i, j)] = (self.matrix[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0);
                }
            }
        }
        c
    }
}

/// Unbiased sample covariance of the selected columns of `matrix`,
/// symmetrized, with `CHOLESKY_JITTER` on the diagonal if it does not factor.
pub fn estimate_cov(matrix: &Mat, columns: &[usize], names: Vec<String>) -> Result<CovMatrix> {
    let n = matrix.rows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("covariance needs at least 2 rows, got {n}")));
    }
    if names.len() != columns.len() {
        return Err(Error::DimensionMismatch { what: "covariance names", expected: columns.len(), found: names.len() });
    }
    let d = columns.len();
    let means: Vec<f64> = columns.iter().map(|&c| (0..n).map(|r| matrix[(r, c)]).sum::<f64>() / n as f64).collect();
    let mut cov = Mat::zeros(d, d);
    for r in 0..n {
        let row = matrix.row(r);
        for i in 0..d {
            let di = row[columns[i]] - means[i];
            for j in 0..=i {
                cov[(i, j)] += di * (row[columns[j]] - means[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov[(i, j)] / (n - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    if cholesky(&cov).is_err() || (0..d).any(|i| cov[(i, i)] <= 0.0) {
        for i in 0..d {
            cov[(i, i)] += CHOLESKY_JITTER;
        }
    }
    CovMatrix::new(names, cov)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "matrix", rename_all = "snake_case")]
pub enum CovSource {
    FromData,
    Provided(CovMatrix),
    /// The caller supplies a matrix sampled from a trained cVAE.
    FromCvae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutlierSpec {
    pub columns: Vec<String>,
    pub percent: f64,
    pub family: TailFamily,
    pub sigma_level: f64,
    pub tail_limit: f64,
    pub cov_source: CovSource,
    pub seed: u64,
}

impl Default for OutlierSpec {
    fn default() -> Self {
        OutlierSpec {
            columns: Vec::new(),
            percent: 0.0,
            family: TailFamily::Normal,
            sigma_level: 3.0,
            tail_limit: 6.0,
            cov_source: CovSource::FromData,
            seed: 0,
        }
    }
}

impl OutlierSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.percent) {
            return Err(Error::InvalidArgument(format!("outlier percent {} outside [0, 100]", self.percent)));
        }
        if !(self.sigma_level > 0.0 && self.tail_limit > self.sigma_level) {
            return Err(Error::InvalidArgument("need tail_limit > sigma_level > 0".into()));
        }
        if !self.family.is_valid() {
            return Err(Error::InvalidArgument("Weibull shape must be positive".into()));
        }
        Ok(())
    }

    /// Number of rows replaced in a table of `n` rows (round half away from zero).
    pub fn outlier_count(&self, n: usize) -> usize {
        (libm::round(self.percent / 100.0 * n as f64) as usize).min(n)
    }
}

/// Mahalanobis norm of `q` given the Cholesky factor of its correlation.
pub fn mahalanobis(chol: &Mat, q: &[f64]) -> f64 {
    let y = forward_substitute(chol, q);
    libm::sqrt(y.iter().map(|v| v * v).sum())
}

/// Copula sampler for standardized rows.
#[derive(Debug, Clone)]
pub struct TailSampler {
    family: TailFamily,
    chol: Mat,
    /// `None` disables tail conditioning.
    shell: Option<f64>,
    limit: f64,
}

impl TailSampler {
    pub fn new(cov: &CovMatrix, family: TailFamily, sigma_level: f64, tail_limit: f64) -> Result<Self> {
        let m = cov.dim();
        Ok(TailSampler {
            family,
            chol: cholesky(&cov.correlation())?,
            shell: Some(sigma_level * libm::sqrt(m as f64)),
            limit: tail_limit,
        })
    }

    /// Plain copula draws: no shell, no clipping.
    pub fn unconditioned(cov: &CovMatrix, family: TailFamily) -> Result<Self> {
        Ok(TailSampler { family, chol: cholesky(&cov.correlation())?, shell: None, limit: f64::INFINITY })
    }

    pub fn chol(&self) -> &Mat {
        &self.chol
    }

    fn latent(&self, e: &[f64]) -> Vec<f64> {
        let d = e.len();
        (0..d).map(|i| (0..=i).map(|k| self.chol[(i, k)] * e[k]).sum()).collect()
    }

    fn transform(&self, e: &[f64]) -> Vec<f64> {
        self.latent(e)
            .into_iter()
            .map(|z| {
                let q = self.family.standardized(z);
                if q.is_nan() {
                    0.0
                } else {
                    q.clamp(-self.limit, self.limit)
                }
            })
            .collect()
    }

    fn accepts(&self, q: &[f64]) -> bool {
        match self.shell {
            None => true,
            Some(r) => mahalanobis(&self.chol, q) >= r,
        }
    }

    fn normal(&self, r: &mut Rng) -> Vec<f64> {
        (0..self.chol.rows()).map(|_| r.sample(StandardNormal)).collect()
    }

    fn pilot_acceptance(&self, r: &mut Rng) -> f64 {
        let hits = (0..PILOT_DRAWS).filter(|_| self.accepts(&self.transform(&self.normal(r)))).count();
        hits as f64 / PILOT_DRAWS as f64
    }

    /// One accepted row, by rejection or (rare shells) radial push-out.
    fn draw(&self, radial: bool, r: &mut Rng) -> Result<Vec<f64>> {
        let shell = self.shell.unwrap_or(0.0);
        let mut attempts = 0;
        while attempts < MAX_ATTEMPTS {
            let mut e = self.normal(r);
            if radial {
                let norm = libm::sqrt(e.iter().map(|v| v * v).sum());
                if norm == 0.0 {
                    continue;
                }
                let mut radius = norm.max(shell);
                // push outward a few times along this direction before redrawing it
                for _ in 0..32 {
                    attempts += 1;
                    let scaled: Vec<f64> = e.iter().map(|v| v * radius / norm).collect();
                    let q = self.transform(&scaled);
                    if self.accepts(&q) {
                        return Ok(q);
                    }
                    radius *= 1.05;
                }
                e.clear();
            } else {
                attempts += 1;
                let q = self.transform(&e);
                if self.accepts(&q) {
                    return Ok(q);
                }
            }
        }
        Err(Error::TailUnreachable)
    }

    /// `n` standardized rows (row-major `n × m`).
    pub fn sample(&self, n: usize, r: &mut Rng) -> Result<Mat> {
        let m = self.chol.rows();
        let radial = self.shell.is_some() && n > 0 && self.pilot_acceptance(r) < MIN_ACCEPTANCE;
        let mut data = Vec::with_capacity(n * m);
        for _ in 0..n {
            data.extend(self.draw(radial, r)?);
        }
        Mat::from_vec(n, m, data)
    }
}

/// Tail rows in data units: `v = mean + q·std`.
pub fn sample_tail(spec: &OutlierSpec, cov: &CovMatrix, means: &[f64], stds: &[f64], n: usize) -> Result<Mat> {
    spec.validate()?;
    let m = cov.dim();
    if means.len() != m || stds.len() != m {
        return Err(Error::DimensionMismatch { what: "tail moments", expected: m, found: means.len().min(stds.len()) });
    }
    let sampler = TailSampler::new(cov, spec.family, spec.sigma_level, spec.tail_limit)?;
    let mut r = rng(derive_seed(spec.seed, &[tag("covgen.sample_tail")]));
    let mut q = sampler.sample(n, &mut r)?;
    for i in 0..n {
        for (j, v) in q.row_mut(i).iter_mut().enumerate() {
            *v = means[j] + *v * stds[j];
        }
    }
    Ok(q)
}

/// Mean and population standard deviation of the observed cells.
pub(crate) fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

/// Observed values of the target columns on rows where all are present.
pub(crate) fn complete_rows(table: &Table, cols: &[usize]) -> Mat {
    let mut data = Vec::new();
    let mut rows = 0;
    for r in 0..table.n_rows() {
        let vals: Vec<Option<f64>> = cols.iter().map(|&c| table.column(c).as_f64(r)).collect();
        if vals.iter().all(Option::is_some) {
            data.extend(vals.into_iter().map(|v| v.unwrap_or(0.0)));
            rows += 1;
        }
    }
    Mat::from_vec(rows, cols.len(), data).expect("complete-row shape")
}

/// Replaces the spec's columns on `round(p/100·n)` random rows with tail
/// samples. Returns the new table and the replaced-row mask.
pub fn inject(table: &Table, spec: &OutlierSpec, cov: Option<&CovMatrix>) -> Result<(Table, Vec<bool>)> {
    spec.validate()?;
    let n = table.n_rows();
    let cols: Vec<usize> = spec.columns.iter().map(|c| table.schema().require(c)).collect::<Result<_>>()?;
    if cols.is_empty() {
        return Err(Error::InvalidArgument("outlier spec names no columns".into()));
    }
    for (&c, name) in cols.iter().zip(&spec.columns) {
        if table.column(c).kind() != ColumnKind::Numeric {
            return Err(Error::WrongKind(format!("outlier column `{name}` must be numeric")));
        }
    }
    let k = spec.outlier_count(n);
    let mut mask = vec![false; n];
    if k == 0 {
        return Ok((table.clone(), mask));
    }

    let (means, stds): (Vec<f64>, Vec<f64>) = cols.iter().map(|&c| moments(&table.column(c).observed_f64())).unzip();
    if let Some(j) = stds.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::ConstantColumn(spec.columns[j].clone()));
    }
    let estimated;
    let cov = match (&spec.cov_source, cov) {
        (_, Some(c)) => c,
        (CovSource::Provided(c), None) => c,
        (CovSource::FromData, None) => {
            estimated = estimate_cov(&complete_rows(table, &cols), &(0..cols.len()).collect::<Vec<_>>(), spec.columns.clone())?;
            &estimated
        }
        (CovSource::FromCvae, None) => {
            return Err(Error::InvalidArgument("cVAE covariance source requires a sampled matrix".into()));
        }
    };
    if cov.dim() != cols.len() {
        return Err(Error::DimensionMismatch { what: "outlier covariance", expected: cols.len(), found: cov.dim() });
    }

    let mut r = rng(derive_seed(spec.seed, &[tag("covgen.inject.rows")]));
    let mut rows = index::sample(&mut r, n, k).into_vec();
    rows.sort_unstable();
    let values = sample_tail(spec, cov, &means, &stds, k)?;

    let mut out = table.clone();
    for (j, &c) in cols.iter().enumerate() {
        let col = out.column_mut(c);
        if let ColumnData::Numeric(v) = &mut col.data {
            for (i, &row) in rows.iter().enumerate() {
                v[row] = values[(i, j)];
                col.missing[row] = false;
            }
        }
    }
    for &row in &rows {
        mask[row] = true;
    }
    Ok((out, mask))
}
