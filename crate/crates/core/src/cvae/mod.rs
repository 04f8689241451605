//! Conditional VAE over covariance matrices.
//!
//! Matrices are represented by their log-Cholesky vector, so every decoded
//! vector maps back to a symmetric PSD matrix. The condition vector (column
//! means and standard deviations of the source table) is appended to both
//! encoder and decoder inputs.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::covgen::{complete_rows, estimate_cov, moments, CovMatrix};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, Mat};
use crate::nnet::loss::{kl_std_normal, kl_std_normal_grad, mse, mse_grad};
use crate::nnet::{Activation, Adam, AdamConfig, DenseNet, DenseNetSpec, LayerSpec};
use crate::rng::{derive_seed, rng, tag, Rng};
use crate::table::{ColumnKind, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvaeConfig {
    pub latent_dim: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// KL weight β.
    pub beta: f64,
    pub lr: f64,
    /// Learning rate at the last epoch as a fraction of `lr` (exponential decay).
    pub lr_final_fraction: f64,
    /// Number of bootstrap covariance matrices M.
    pub bootstrap_count: usize,
    pub bootstrap_fraction: f64,
    pub seed: u64,
}

impl Default for CvaeConfig {
    fn default() -> Self {
        CvaeConfig {
            latent_dim: 8,
            hidden: 64,
            epochs: 300,
            batch_size: 256,
            beta: 1.0,
            lr: 1e-3,
            lr_final_fraction: 0.05,
            bootstrap_count: 256,
            bootstrap_fraction: 0.5,
            seed: 0,
        }
    }
}

impl CvaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.hidden == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("cVAE sizes must be positive".into()));
        }
        if self.bootstrap_count < 2 {
            return Err(Error::InvalidArgument("cVAE needs at least 2 bootstrap matrices".into()));
        }
        if !(self.beta >= 0.0 && self.lr > 0.0 && self.bootstrap_fraction > 0.0 && self.lr_final_fraction > 0.0) {
            return Err(Error::InvalidArgument("cVAE beta must be ≥ 0; lr, decay and fraction > 0".into()));
        }
        Ok(())
    }
}

/// Length of the log-Cholesky vector of a `d × d` matrix.
pub fn vec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Dimension `d` with `d(d+1)/2 = len`.
pub fn dim_for_len(len: usize) -> Option<usize> {
    let d = (libm::sqrt(8.0 * len as f64 + 1.0) as usize).saturating_sub(1) / 2;
    (vec_len(d) == len).then_some(d)
}

/// Lower triangle of the Cholesky factor, row-major, with logged diagonal.
pub fn cov_to_vec(cov: &Mat) -> Result<Vec<f64>> {
    let l = cholesky(cov)?;
    let d = cov.rows();
    let mut v = Vec::with_capacity(vec_len(d));
    for i in 0..d {
        for j in 0..=i {
            v.push(if i == j { libm::log(l[(i, i)]) } else { l[(i, j)] });
        }
    }
    Ok(v)
}

/// Inverse of [`cov_to_vec`]; symmetric PSD for any finite input.
pub fn vec_to_cov(v: &[f64]) -> Result<Mat> {
    let d = dim_for_len(v.len()).ok_or(Error::DimensionMismatch { what: "log-Cholesky vector", expected: 0, found: v.len() })?;
    let mut l = Mat::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in 0..=i {
            l[(i, j)] = if i == j { libm::exp(v[k]) } else { v[k] };
            k += 1;
        }
    }
    let mut c = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..=j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            c[(i, j)] = s;
            c[(j, i)] = s;
        }
    }
    Ok(c)
}

/// `M` covariances of bootstrap subsamples (with replacement) of `matrix`'s
/// selected columns.
pub fn build_training_set(matrix: &Mat, columns: &[usize], config: &CvaeConfig) -> Result<Vec<Mat>> {
    config.validate()?;
    let n = matrix.rows();
    let d = columns.len();
    let size = libm::round(config.bootstrap_fraction * n as f64) as usize;
    if size < d + 1 || n == 0 {
        return Err(Error::InvalidArgument(format!("bootstrap subsample of {size} rows is too small for {d} columns")));
    }
    let mut r = rng(derive_seed(config.seed, &[tag("cvae.bootstrap")]));
    let names: Vec<String> = (0..d).map(|i| format!("{i}")).collect();
    let local: Vec<usize> = (0..d).collect();
    (0..config.bootstrap_count)
        .map(|_| {
            let idx: Vec<usize> = (0..size).map(|_| r.random_range(0..n)).collect();
            let sub = matrix.select_rows(&idx).select_cols(columns);
            Ok(estimate_cov(&sub, &local, names.clone())?.matrix)
        })
        .collect()
}

/// Per-coordinate standardization of the training vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(rows: &[Vec<f64>]) -> Self {
        let p = rows[0].len();
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..p)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]) * (r[j] - mean[j])).sum::<f64>() / n;
                let sd = libm::sqrt(var);
                if sd > 1e-8 { sd } else { 1.0 }
            })
            .collect();
        Standardizer { mean, scale }
    }
}

/// Signed log squash keeps raw column moments at a workable input scale.
fn squash(c: &[f64]) -> Vec<f64> {
    c.iter().map(|&x| x.signum() * libm::log1p(x.abs())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvaeModel {
    pub config: CvaeConfig,
    pub dim: usize,
    pub names: Vec<String>,
    /// Column means followed by column standard deviations.
    pub condition: Vec<f64>,
    pub encoder: DenseNet,
    pub decoder: DenseNet,
    standardizer: Standardizer,
    pub loss_trace: Vec<f64>,
    /// Set when the final epoch loss exceeds half the first epoch loss.
    pub weak_convergence: bool,
}

fn concat_cols(a: &Mat, cond: &[f64]) -> Mat {
    let (n, p) = (a.rows(), a.cols());
    let mut out = Mat::zeros(n, p + cond.len());
    for r in 0..n {
        let row = out.row_mut(r);
        row[..p].copy_from_slice(a.row(r));
        row[p..].copy_from_slice(cond);
    }
    out
}

/// One reparameterized forward pass through encoder and decoder.
struct Pass {
    enc: crate::nnet::ForwardCache,
    dec: crate::nnet::ForwardCache,
    mu: Mat,
    lv: Mat,
    loss: f64,
}

impl Pass {
    fn run(encoder: &DenseNet, decoder: &DenseNet, x: &Mat, cond: &[f64], eps: &Mat, beta: f64) -> Result<Pass> {
        let latent = eps.cols();
        let enc = encoder.forward(&concat_cols(x, cond), None)?;
        let h = enc.output();
        let mu = h.select_cols(&(0..latent).collect::<Vec<_>>());
        let lv = h.select_cols(&(latent..2 * latent).collect::<Vec<_>>());
        let mut z = Mat::zeros(x.rows(), latent);
        for i in 0..z.as_slice().len() {
            z.as_mut_slice()[i] = mu.as_slice()[i] + libm::exp(0.5 * lv.as_slice()[i]) * eps.as_slice()[i];
        }
        let dec = decoder.forward(&concat_cols(&z, cond), None)?;
        let loss = mse(dec.output(), x) + beta * kl_std_normal(&mu, &lv);
        Ok(Pass { enc, dec, mu, lv, loss })
    }

    fn gradients(
        &self,
        encoder: &DenseNet,
        decoder: &DenseNet,
        x: &Mat,
        eps: &Mat,
        beta: f64,
    ) -> Result<(crate::nnet::Gradients, crate::nnet::Gradients)> {
        let (b, latent) = (eps.rows(), eps.cols());
        let (gd, dz_full) = decoder.backward(&self.dec, &mse_grad(self.dec.output(), x))?;
        let (gmu, glv) = kl_std_normal_grad(&self.mu, &self.lv);
        let mut dh = Mat::zeros(b, 2 * latent);
        for i in 0..b {
            for k in 0..latent {
                let dz = dz_full[(i, k)];
                let s = libm::exp(0.5 * self.lv[(i, k)]);
                dh[(i, k)] = dz + beta * gmu[(i, k)];
                dh[(i, latent + k)] = dz * eps[(i, k)] * 0.5 * s + beta * glv[(i, k)];
            }
        }
        let (ge, _) = encoder.backward(&self.enc, &dh)?;
        Ok((ge, gd))
    }
}

/// Fits a cVAE to bootstrap covariances of the named numeric columns
/// (complete rows only), conditioned on their means and standard deviations.
pub fn fit_cvae_on_table(table: &Table, columns: &[String], config: &CvaeConfig) -> Result<CvaeModel> {
    let cols: Vec<usize> = columns.iter().map(|c| table.schema().require(c)).collect::<Result<_>>()?;
    for (&c, name) in cols.iter().zip(columns) {
        if table.column(c).kind() != ColumnKind::Numeric {
            return Err(Error::WrongKind(name.clone()));
        }
    }
    let m = complete_rows(table, &cols);
    let all: Vec<usize> = (0..cols.len()).collect();
    let matrices = build_training_set(&m, &all, config)?;
    let mut condition = Vec::with_capacity(2 * cols.len());
    let (means, stds): (Vec<f64>, Vec<f64>) = cols.iter().map(|&c| moments(&table.column(c).observed_f64())).unzip();
    condition.extend(means);
    condition.extend(stds);
    fit_cvae(&matrices, columns.to_vec(), &condition, config)
}
/// Trains on `matrices` (all `d × d`). `names` binds the columns of sampled matrices.
pub fn fit_cvae(matrices: &[Mat], names: Vec<String>, condition: &[f64], config: &CvaeConfig) -> Result<CvaeModel> {
    config.validate()?;
    if matrices.len() < 2 {
        return Err(Error::InvalidArgument("cVAE needs at least 2 matrices".into()));
    }
    let d = names.len();
    let vecs: Vec<Vec<f64>> = matrices
        .iter()
        .map(|m| {
            if m.rows() != d || m.cols() != d {
                return Err(Error::DimensionMismatch { what: "training covariance", expected: d, found: m.rows() });
            }
            cov_to_vec(m)
        })
        .collect::<Result<_>>()?;
    let std = Standardizer::fit(&vecs);
    let p = vec_len(d);
    let x_all = Mat::from_rows(
        &vecs.iter().map(|v| (0..p).map(|j| (v[j] - std.mean[j]) / std.scale[j]).collect()).collect::<Vec<Vec<f64>>>(),
    )?;
    let cond = squash(condition);
    let latent = config.latent_dim;
    let act = Activation::LeakyRelu(0.2);
    let mut encoder = DenseNet::new(&DenseNetSpec {
        input: p + cond.len(),
        layers: vec![LayerSpec::new(config.hidden, act), LayerSpec::new(2 * latent, Activation::Identity)],
        seed: derive_seed(config.seed, &[tag("cvae.encoder")]),
    })?;
    let mut decoder = DenseNet::new(&DenseNetSpec {
        input: latent + cond.len(),
        layers: vec![LayerSpec::new(config.hidden, act), LayerSpec::new(p, Activation::Identity)],
        seed: derive_seed(config.seed, &[tag("cvae.decoder")]),
    })?;
    let adam = AdamConfig { lr: config.lr, ..AdamConfig::default() };
    let mut opt_e = Adam::new(&encoder, adam);
    let mut opt_d = Adam::new(&decoder, adam);
    let mut r = rng(derive_seed(config.seed, &[tag("cvae.train")]));
    let mut order: Vec<usize> = (0..x_all.rows()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);

    // Per-epoch loss is evaluated on the whole set with one fixed noise draw
    // (common random numbers), so the trace reflects parameter progress
    // rather than reparameterization noise.
    let mut eval_rng = rng(derive_seed(config.seed, &[tag("cvae.eval")]));
    let m = x_all.rows();
    let eval_eps = Mat::from_vec(m, latent, (0..m * latent).map(|_| eval_rng.sample(StandardNormal)).collect())?;
    let all: Vec<usize> = (0..m).collect();

    for epoch in 0..config.epochs {
        let lr = config.lr * libm::pow(config.lr_final_fraction, epoch as f64 / config.epochs as f64);
        opt_e.config.lr = lr;
        opt_d.config.lr = lr;
        order.shuffle(&mut r);
        for chunk in order.chunks(config.batch_size) {
            let x = x_all.select_rows(chunk);
            let eps = Mat::from_vec(chunk.len(), latent, (0..chunk.len() * latent).map(|_| r.sample(StandardNormal)).collect())?;
            let pass = Pass::run(&encoder, &decoder, &x, &cond, &eps, config.beta)?;
            if !pass.loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            let (ge, gd) = pass.gradients(&encoder, &decoder, &x, &eps, config.beta)?;
            opt_d.step(&mut decoder, &gd)?;
            opt_e.step(&mut encoder, &ge)?;
        }
        let loss = Pass::run(&encoder, &decoder, &x_all.select_rows(&all), &cond, &eval_eps, config.beta)?.loss;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        loss_trace.push(loss);
    }
    let weak_convergence = loss_trace.last().copied().unwrap_or(0.0) > 0.5 * loss_trace[0];
    Ok(CvaeModel {
        config: config.clone(),
        dim: d,
        names,
        condition: condition.to_vec(),
        encoder,
        decoder,
        standardizer: std,
        loss_trace,
        weak_convergence,
    })
}

impl CvaeModel {
    /// Decodes one latent draw into a covariance matrix.
    pub fn sample_cov(&self, seed: u64) -> Result<CovMatrix> {
        let mut r: Rng = rng(derive_seed(seed, &[tag("cvae.sample")]));
        let latent = self.config.latent_dim;
        let z = Mat::from_vec(1, latent, (0..latent).map(|_| r.sample(StandardNormal)).collect())?;
        let out = self.decoder.predict(&concat_cols(&z, &squash(&self.condition)))?;
        let v: Vec<f64> = out
            .row(0)
            .iter()
            .enumerate()
            .map(|(j, &y)| y * self.standardizer.scale[j] + self.standardizer.mean[j])
            .collect();
        CovMatrix::new(self.names.clone(), vec_to_cov(&v)?)
    }
}

#[cfg(test)]
mod tests;
