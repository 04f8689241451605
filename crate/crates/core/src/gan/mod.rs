//! Adversarial generator for mixed numeric/categorical tables.
//!
//! Numeric and datetime columns are generated in z-scored space, passed
//! through a per-column rank-to-normal-score map so skewed columns and the
//! missing-value sentinel do not dominate; each categorical column is a block
//! of logits over its codes (MISSING included). Training feeds the discriminator Gumbel-softmax relaxations of
//! those blocks; sampling takes the arg-max.

pub mod filter;
mod train;

pub use filter::{row_hash, similarity_filter, HashSet64, Verdict};
pub use train::{discriminator_accuracy, fit_gan};

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nnet::DenseNet;
use crate::preprocess::PreprocessPlan;
use crate::rng::{derive_seed, rng, Rng};
use crate::table::Table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanConfig {
    pub noise_dim: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    /// Gumbel-softmax temperature.
    pub tau: f64,
    /// Target label for real rows in the discriminator loss.
    pub label_smoothing: f64,
    pub dropout: f64,
    /// Rows the discriminator judges jointly; divides the batch size.
    pub pac: usize,
    /// Decimal digits kept by the similarity filter, in z-scored space.
    pub filter_precision: u32,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            noise_dim: 64,
            hidden: vec![128, 128],
            epochs: 300,
            batch_size: 500,
            lr_generator: 2e-4,
            lr_discriminator: 2e-4,
            tau: 0.5,
            label_smoothing: 0.9,
            dropout: 0.3,
            pac: 2,
            filter_precision: 3,
            seed: 0,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.noise_dim > 0
            && self.epochs > 0
            && self.batch_size > 0
            && self.pac > 0
            && self.batch_size % self.pac == 0
            && self.lr_generator > 0.0
            && self.lr_discriminator > 0.0
            && self.tau > 0.0
            && self.label_smoothing > 0.0
            && self.label_smoothing <= 1.0
            && (0.0..1.0).contains(&self.dropout)
            && self.hidden.iter().all(|&h| h > 0);
        if positive {
            Ok(())
        } else {
            Err(Error::InvalidArgument("GAN configuration values must be positive (tau > 0, smoothing in (0, 1], pac divides the batch size)".into()))
        }
    }
}

/// Where each plan column lives in the generator output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputBlock {
    Scalar { offset: usize },
    OneHot { offset: usize, cardinality: usize },
}

/// Most knots kept per quantile map.
const MAX_KNOTS: usize = 1024;

/// Monotone piecewise-linear map from encoded values to normal scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileMap {
    pub xs: Vec<f64>,
    pub zs: Vec<f64>,
}

fn interp(from: &[f64], to: &[f64], v: f64) -> f64 {
    let k = from.partition_point(|&a| a < v);
    if k == 0 {
        return to[0];
    }
    if k == from.len() {
        return to[k - 1];
    }
    let t = (v - from[k - 1]) / (from[k] - from[k - 1]);
    to[k - 1] + t * (to[k] - to[k - 1])
}

impl QuantileMap {
    /// Mid-rank normal scores of the distinct values in `values`.
    pub fn fit(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let (mut xs, mut zs) = (Vec::new(), Vec::new());
        let mut i = 0;
        while i < v.len() {
            let mut j = i;
            while j + 1 < v.len() && v[j + 1] == v[i] {
                j += 1;
            }
            xs.push(v[i]);
            zs.push(crate::special::norm_ppf((i as f64 + (j - i + 1) as f64 / 2.0) / n));
            i = j + 1;
        }
        if xs.len() > MAX_KNOTS {
            let last = xs.len() - 1;
            let pick: Vec<usize> = (0..MAX_KNOTS).map(|k| k * last / (MAX_KNOTS - 1)).collect();
            xs = pick.iter().map(|&k| xs[k]).collect();
            zs = pick.iter().map(|&k| zs[k]).collect();
        }
        if xs.len() == 1 {
            zs[0] = 0.0;
        }
        QuantileMap { xs, zs }
    }

    pub fn forward(&self, x: f64) -> f64 {
        interp(&self.xs, &self.zs, x)
    }

    pub fn inverse(&self, z: f64) -> f64 {
        interp(&self.zs, &self.xs, z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputLayout {
    pub blocks: Vec<OutputBlock>,
    pub width: usize,
    /// One map per plan column; `None` for categorical columns.
    #[serde(default)]
    pub maps: Vec<Option<QuantileMap>>,
    /// Per categorical column, which codes occur in training; sampling
    /// arg-maxes over these only.
    #[serde(default)]
    pub support: Vec<Option<Vec<bool>>>,
}

impl OutputLayout {
    /// Layout for `plan`, with quantile maps fitted on the encoded training rows.
    pub fn fit(plan: &PreprocessPlan, encoded: &Mat) -> Self {
        let mut layout = Self::for_plan(plan);
        layout.maps = layout
            .blocks
            .iter()
            .enumerate()
            .map(|(j, b)| match b {
                OutputBlock::Scalar { .. } => Some(QuantileMap::fit(&encoded.column(j))),
                OutputBlock::OneHot { .. } => None,
            })
            .collect();
        layout.support = layout
            .blocks
            .iter()
            .enumerate()
            .map(|(j, b)| match *b {
                OutputBlock::OneHot { cardinality, .. } => {
                    let mut seen = vec![false; cardinality];
                    for v in encoded.column(j) {
                        seen[(libm::round(v).max(0.0) as usize).min(cardinality - 1)] = true;
                    }
                    Some(seen)
                }
                OutputBlock::Scalar { .. } => None,
            })
            .collect();
        layout
    }

    fn map(&self, j: usize) -> Option<&QuantileMap> {
        self.maps.get(j).and_then(Option::as_ref)
    }

    /// Identity-mapped layout for `plan`.
    pub fn for_plan(plan: &PreprocessPlan) -> Self {
        let mut offset = 0;
        let blocks = plan
            .columns
            .iter()
            .map(|c| match c.cardinality() {
                Some(k) => {
                    let b = OutputBlock::OneHot { offset, cardinality: k };
                    offset += k;
                    b
                }
                None => {
                    let b = OutputBlock::Scalar { offset };
                    offset += 1;
                    b
                }
            })
            .collect();
        OutputLayout { blocks, width: offset, maps: Vec::new(), support: Vec::new() }
    }

    /// Plan-encoded rows (codes) to the one-hot layout.
    pub fn expand(&self, encoded: &Mat) -> Mat {
        let mut out = Mat::zeros(encoded.rows(), self.width);
        for r in 0..encoded.rows() {
            for (j, b) in self.blocks.iter().enumerate() {
                let x = encoded[(r, j)];
                match *b {
                    OutputBlock::Scalar { offset } => out[(r, offset)] = self.map(j).map_or(x, |m| m.forward(x)),
                    OutputBlock::OneHot { offset, cardinality } => {
                        let code = (libm::round(x).max(0.0) as usize).min(cardinality - 1);
                        out[(r, offset + code)] = 1.0;
                    }
                }
            }
        }
        out
    }

    /// Generator output to plan-encoded rows, arg-maxing each one-hot block.
    pub fn collapse(&self, raw: &Mat) -> Mat {
        let mut out = Mat::zeros(raw.rows(), self.blocks.len());
        for r in 0..raw.rows() {
            let row = raw.row(r);
            for (j, b) in self.blocks.iter().enumerate() {
                out[(r, j)] = match *b {
                    OutputBlock::Scalar { offset } => self.map(j).map_or(row[offset], |m| m.inverse(row[offset])),
                    OutputBlock::OneHot { offset, cardinality } => {
                        let block = &row[offset..offset + cardinality];
                        let allowed = |k: usize| self.support.get(j).and_then(Option::as_ref).is_none_or(|s| s[k]);
                        let mut best: Option<usize> = None;
                        for (k, &v) in block.iter().enumerate() {
                            if allowed(k) && best.is_none_or(|b| v > block[b]) {
                                best = Some(k);
                            }
                        }
                        best.unwrap_or(0) as f64
                    }
                };
            }
        }
        out
    }
}

/// Per-epoch mean losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub discriminator: f64,
    pub generator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanModel {
    pub config: GanConfig,
    pub generator: DenseNet,
    pub discriminator: DenseNet,
    pub plan: PreprocessPlan,
    pub layout: OutputLayout,
    pub real_hashes: HashSet64,
    pub loss_trace: Vec<EpochLoss>,
}

/// Rows drawn per generator batch while sampling.
const SAMPLE_BATCH: usize = 1024;

impl GanModel {
    fn noise(&self, rows: usize, r: &mut Rng) -> Mat {
        let d = self.config.noise_dim;
        Mat::from_vec(rows, d, (0..rows * d).map(|_| r.sample(StandardNormal)).collect()).expect("noise shape")
    }

    /// Draws `rows` encoded rows (plan layout) snapped onto the training support.
    pub fn sample_encoded(&self, rows: usize, r: &mut Rng) -> Result<Mat> {
        let raw = self.generator.predict(&self.noise(rows, r))?;
        let mut enc = self.layout.collapse(&raw);
        self.plan.snap_to_support(&mut enc);
        Ok(enc)
    }

    /// Generates `n` rows. With `filter`, rows whose canonical hash matches a
    /// training row are discarded and redrawn, up to `50 · n` draws in total.
    pub fn generate(&self, n: usize, seed: u64, filter: bool) -> Result<Table> {
        if n == 0 {
            return Err(Error::InvalidArgument("cannot generate zero rows".into()));
        }
        let mut r = rng(derive_seed(seed, &[crate::rng::tag("gan.generate")]));
        let width = self.plan.width();
        let budget = 50 * n;
        let mut kept: Vec<f64> = Vec::with_capacity(n * width);
        let mut survivors = 0;
        let mut drawn = 0;
        while survivors < n {
            if drawn >= budget {
                return Err(Error::RetryBudgetExhausted { survivors, requested: n });
            }
            let want = if filter { SAMPLE_BATCH.min(budget - drawn) } else { n - survivors };
            let batch = self.sample_encoded(want, &mut r)?;
            drawn += want;
            for i in 0..batch.rows() {
                if survivors == n {
                    break;
                }
                let row = batch.row(i);
                if filter && similarity_filter(&self.real_hashes, &self.plan, row, self.config.filter_precision) == Verdict::Reject {
                    continue;
                }
                kept.extend_from_slice(row);
                survivors += 1;
            }
        }
        self.plan.decode(&Mat::from_vec(n, width, kept)?)
    }

    /// Whether a decoded table collides with the training hash set.
    pub fn collisions(&self, table: &Table) -> Result<usize> {
        let enc = self.plan.encode(table)?.matrix;
        Ok((0..enc.rows())
            .filter(|&r| self.real_hashes.contains(row_hash(&self.plan, enc.row(r), self.config.filter_precision)))
            .count())
    }
}
