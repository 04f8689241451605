//! Gradient-boosted decision trees for binary targets.
//!
//! Logistic loss, second-order (Newton) leaf weights, exact greedy splits:
//! thresholds at midpoints between sorted numeric values and one-vs-rest
//! splits on categorical codes.

mod auc;
mod tree;

pub use auc::auc;
pub use tree::{Node, SplitTest, Tree};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnet::sigmoid;
use crate::table::{ColumnData, ColumnKind, Role, Table};

/// L2 penalty on leaf weights.
pub const LAMBDA: f64 = 1.0;
const PROBA_FLOOR: f64 = f64::EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    /// Drop `Macro`-role columns from the feature set.
    pub exclude_macro: bool,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig { trees: 200, max_depth: 4, learning_rate: 0.1, min_leaf: 5, exclude_macro: false, seed: 0 }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.max_depth > 12 || self.min_leaf == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("GBDT needs depth in 1..=12, min_leaf ≥ 1, lr > 0".into()));
        }
        Ok(())
    }

    /// Depth {3,4,6} × trees {100,200,400} × lr {0.05,0.1}.
    pub fn default_grid() -> Vec<GbdtConfig> {
        let mut grid = Vec::new();
        for max_depth in [3, 4, 6] {
            for trees in [100, 200, 400] {
                for learning_rate in [0.05, 0.1] {
                    grid.push(GbdtConfig { trees, max_depth, learning_rate, ..GbdtConfig::default() });
                }
            }
        }
        grid
    }
}

/// How a source column becomes a tree feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    /// Missing cells take `sentinel`.
    Numeric { name: String, sentinel: f64 },
    /// Code 0 is missing; observed categories follow in sorted order.
    Categorical { name: String, categories: Vec<String> },
}

/// Code assigned to categories never seen in training.
pub const UNSEEN: f64 = -1.0;

impl FeatureMap {
    pub fn name(&self) -> &str {
        match self {
            FeatureMap::Numeric { name, .. } | FeatureMap::Categorical { name, .. } => name,
        }
    }

    fn fit(name: &str, table: &Table, idx: usize) -> Self {
        let col = table.column(idx);
        match col.kind() {
            ColumnKind::Categorical => FeatureMap::Categorical { name: name.into(), categories: col.categories() },
            _ => {
                let obs = col.observed_f64();
                let (lo, hi) = obs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
                let sentinel = if obs.is_empty() { 0.0 } else { lo - 10.0 * (1.0 + hi - lo) };
                FeatureMap::Numeric { name: name.into(), sentinel }
            }
        }
    }

    fn values(&self, table: &Table) -> Result<Vec<f64>> {
        let idx = table.schema().index_of(self.name()).ok_or_else(|| Error::UnknownColumn(self.name().into()))?;
        let col = table.column(idx);
        match (self, &col.data) {
            (FeatureMap::Categorical { categories, .. }, ColumnData::Categorical(v)) => Ok(v
                .iter()
                .zip(&col.missing)
                .map(|(s, &m)| {
                    if m {
                        0.0
                    } else {
                        categories.binary_search(s).map_or(UNSEEN, |k| (k + 1) as f64)
                    }
                })
                .collect()),
            (FeatureMap::Numeric { sentinel, .. }, ColumnData::Numeric(_) | ColumnData::Datetime(_)) => {
                Ok((0..table.n_rows()).map(|r| col.as_f64(r).unwrap_or(*sentinel)).collect())
            }
            _ => Err(Error::Schema(format!("column `{}` changed kind since training", self.name()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub config: GbdtConfig,
    pub features: Vec<FeatureMap>,
    pub target: String,
    /// Target values written for labels 0 and 1 by [`predict_target`].
    pub label_names: (String, String),
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

/// Feature columns: everything except the target, the time index and
/// (optionally) macro columns.
pub fn feature_columns(table: &Table, exclude_macro: bool) -> Vec<usize> {
    table
        .schema()
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| match c.role {
            Role::Target | Role::TimeIndex => false,
            Role::Macro => !exclude_macro,
            Role::Feature => true,
        })
        .map(|(i, _)| i)
        .collect()
}

fn label_names(table: &Table) -> (String, String) {
    let t = table.schema().target().expect("target checked by caller");
    let col = table.column(t);
    match col.kind() {
        ColumnKind::Categorical => {
            let cats = col.categories();
            match cats.len() {
                2 => (cats[0].clone(), cats[1].clone()),
                _ => ("0".into(), "1".into()),
            }
        }
        _ => ("0".into(), "1".into()),
    }
}

/// Column-major feature matrix.
fn feature_matrix(features: &[FeatureMap], table: &Table) -> Result<Vec<Vec<f64>>> {
    features.iter().map(|f| f.values(table)).collect()
}

pub fn logistic_loss(margins: &[f64], labels: &[u8]) -> f64 {
    let n = margins.len().max(1) as f64;
    margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| m.max(0.0) - m * f64::from(y) + libm::log1p(libm::exp(-m.abs())))
        .sum::<f64>()
        / n
}

pub fn fit_gbdt(train: &Table, config: &GbdtConfig) -> Result<GbdtModel> {
    fit_gbdt_traced(train, config, |_, _| {})
}

/// As [`fit_gbdt`], reporting `(tree count, training margins)` after each tree.
pub fn fit_gbdt_traced(train: &Table, config: &GbdtConfig, mut trace: impl FnMut(usize, &[f64])) -> Result<GbdtModel> {
    config.validate()?;
    let labels = train.binary_labels()?;
    let n = labels.len();
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::SingleClass);
    }
    if n < 2 * config.min_leaf {
        return Err(Error::InvalidArgument(format!("{n} rows cannot form two leaves of {}", config.min_leaf)));
    }
    let cols = feature_columns(train, config.exclude_macro);
    let features: Vec<FeatureMap> =
        cols.iter().map(|&i| FeatureMap::fit(&train.schema().columns()[i].name, train, i)).collect();
    let x = feature_matrix(&features, train)?;
    let categorical: Vec<bool> = features.iter().map(|f| matches!(f, FeatureMap::Categorical { .. })).collect();
    let order = tree::presort(&x);

    let p = pos as f64 / n as f64;
    let base_score = libm::log(p / (1.0 - p));
    let mut margin = alloc::vec![base_score; n];
    let mut trees = Vec::with_capacity(config.trees);
    trace(0, &margin);
    let mut grad = alloc::vec![0.0; n];
    let mut hess = alloc::vec![0.0; n];
    for t in 0..config.trees {
        for i in 0..n {
            let pr = sigmoid(margin[i]);
            grad[i] = pr - f64::from(labels[i]);
            hess[i] = (pr * (1.0 - pr)).max(1e-16);
        }
        let tree = tree::grow(&x, &categorical, &order, &grad, &hess, config);
        for (i, m) in margin.iter_mut().enumerate() {
            *m += config.learning_rate * tree.predict_row(|f| x[f][i]);
        }
        trees.push(tree);
        trace(t + 1, &margin);
    }
    Ok(GbdtModel {
        config: config.clone(),
        features,
        target: train.schema().columns()[train.schema().target().ok_or(Error::NoTarget)?].name.clone(),
        label_names: label_names(train),
        base_score,
        trees,
    })
}

impl GbdtModel {
    /// Raw log-odds for each row.
    pub fn margins(&self, table: &Table) -> Result<Vec<f64>> {
        let x = feature_matrix(&self.features, table)?;
        let lr = self.config.learning_rate;
        Ok((0..table.n_rows())
            .map(|i| self.base_score + lr * self.trees.iter().map(|t| t.predict_row(|f| x[f][i])).sum::<f64>())
            .collect())
    }

    /// Probabilities, clamped strictly inside (0, 1).
    pub fn predict_proba(&self, table: &Table) -> Result<Vec<f64>> {
        Ok(self.margins(table)?.into_iter().map(|m| sigmoid(m).clamp(PROBA_FLOOR, 1.0 - PROBA_FLOOR)).collect())
    }
}

/// Fits on `train` and scores `test` by AUC.
pub fn fit_and_score(train: &Table, test: &Table, config: &GbdtConfig) -> Result<f64> {
    let model = fit_gbdt(train, config)?;
    auc(&model.predict_proba(test)?, &test.binary_labels()?)
}

/// Grid point with the best validation AUC. Ties (within 1e-12) prefer
/// fewer trees, then shallower trees, then lower learning rate, then grid order.
pub fn grid_search(train: &Table, validation: &Table, grid: &[GbdtConfig]) -> Result<GbdtConfig> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    let mut best: Option<(f64, &GbdtConfig)> = None;
    for cfg in grid {
        let score = fit_and_score(train, validation, cfg)?;
        let better = match best {
            None => true,
            Some((b, bc)) => {
                if score > b + 1e-12 {
                    true
                } else if score >= b - 1e-12 {
                    (cfg.trees, cfg.max_depth).cmp(&(bc.trees, bc.max_depth)).then(cfg.learning_rate.total_cmp(&bc.learning_rate))
                        == core::cmp::Ordering::Less
                } else {
                    false
                }
            }
        };
        if better {
            best = Some((score, cfg));
        }
    }
    Ok(best.map(|(_, c)| c.clone()).expect("grid is non-empty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "threshold", rename_all = "snake_case")]
pub enum LabelMode {
    Proba,
    Threshold(f64),
}

/// Overwrites the target column of `synthetic` with the model's output.
pub fn predict_target(model: &GbdtModel, synthetic: &Table, mode: LabelMode) -> Result<Table> {
    let t = synthetic.schema().target().ok_or(Error::NoTarget)?;
    if synthetic.schema().columns()[t].name != model.target {
        return Err(Error::Schema(format!("target `{}` does not match model target `{}`", synthetic.schema().columns()[t].name, model.target)));
    }
    let p = model.predict_proba(synthetic)?;
    match mode {
        LabelMode::Proba => synthetic.with_scores(&p),
        LabelMode::Threshold(th) => {
            let labels: Vec<u8> = p.iter().map(|&v| u8::from(v >= th)).collect();
            synthetic.with_labels(&labels, &model.label_names.0, &model.label_names.1)
        }
    }
}
