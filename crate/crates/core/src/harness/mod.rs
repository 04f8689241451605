//! Experiment protocols: repeated-subsample AUC (OOS), out-of-time mixing
//! (OOT) and outlier-percentage sweeps.
//!
//! Every random choice is seeded by `derive_seed(master, [protocol tag, …,
//! iteration])`, so the work can be fanned out through any [`ParMap`]
//! without changing results.

mod report;

pub use report::{Comparison, ConditionResult, ExperimentReport};

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::classifier::{auc, fit_gbdt, predict_target, GbdtConfig, GbdtModel, LabelMode};
use crate::covgen::{inject, CovMatrix, OutlierSpec};
use crate::error::{Error, Result};
use crate::gan::{fit_gan, GanConfig, GanModel};
use crate::rng::{derive_seed, rng, tag};
use crate::split::{augment_random, split_at_time, split_oot, subsample};
use crate::stats::wilcoxon;
use crate::table::Table;

/// Attempts allowed for drawing a subsample that keeps both classes.
pub const RESAMPLE_ATTEMPTS: usize = 100;

/// Order-preserving map over `0..n`.
pub trait ParMap: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ParMap for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// What an evaluator knows about the run it is scoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalContext {
    pub seed: u64,
    pub iteration: usize,
    /// Outlier percentage, in sweeps.
    pub level: Option<f64>,
}

/// Fits a classifier on `train` and returns its AUC on `test`.
pub trait AucEvaluator: Sync {
    fn auc(&self, train: &Table, test: &Table, ctx: &EvalContext) -> Result<f64>;
}

/// The built-in gradient-boosted trees.
#[derive(Debug, Clone, Default)]
pub struct GbdtEvaluator {
    pub config: GbdtConfig,
}

impl AucEvaluator for GbdtEvaluator {
    fn auc(&self, train: &Table, test: &Table, ctx: &EvalContext) -> Result<f64> {
        let model = fit_gbdt(train, &GbdtConfig { seed: ctx.seed, ..self.config.clone() })?;
        auc(&model.predict_proba(test)?, &test.binary_labels()?)
    }
}

/// A fitted generator. Rows pass through [`SyntheticSource::label`] after
/// any outlier injection.
pub trait SyntheticSource: Sync {
    fn generate(&self, rows: usize, seed: u64) -> Result<Table>;

    /// Assigns target labels; the default keeps the generator's own.
    fn label(&self, table: Table) -> Result<Table> {
        Ok(table)
    }
}

/// Fits a [`SyntheticSource`] on real training rows.
pub trait GeneratorFactory: Sync {
    fn fit(&self, train: &Table, seed: u64) -> Result<Box<dyn SyntheticSource>>;
}

/// GAN rows labelled by a GBDT target model fitted on the real rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanFactory {
    pub gan: GanConfig,
    /// Bootstrap the real rows up to this count before GAN training.
    pub augment_rows: Option<usize>,
    pub target: GbdtConfig,
    pub label_mode: LabelMode,
    pub filter: bool,
}

impl Default for GanFactory {
    fn default() -> Self {
        GanFactory {
            gan: GanConfig::default(),
            augment_rows: None,
            target: GbdtConfig::default(),
            label_mode: LabelMode::Threshold(0.5),
            filter: true,
        }
    }
}

pub struct GanSource {
    pub model: GanModel,
    pub target: GbdtModel,
    pub label_mode: LabelMode,
    pub filter: bool,
}

impl SyntheticSource for GanSource {
    fn generate(&self, rows: usize, seed: u64) -> Result<Table> {
        self.model.generate(rows, seed, self.filter)
    }

    fn label(&self, table: Table) -> Result<Table> {
        predict_target(&self.target, &table, self.label_mode)
    }
}

impl GeneratorFactory for GanFactory {
    fn fit(&self, train: &Table, seed: u64) -> Result<Box<dyn SyntheticSource>> {
        let gan_train = match self.augment_rows {
            Some(n) if n > train.n_rows() => augment_random(train, n, derive_seed(seed, &[tag("gan.augment")]))?,
            _ => train.clone(),
        };
        let model = fit_gan(&gan_train, &GanConfig { seed: derive_seed(seed, &[tag("gan.fit")]), ..self.gan.clone() })?;
        let target = fit_gbdt(train, &self.target)?;
        Ok(Box::new(GanSource { model, target, label_mode: self.label_mode, filter: self.filter }))
    }
}

fn has_both_classes(t: &Table) -> Result<bool> {
    let y = t.binary_labels()?;
    Ok(y.contains(&0) && y.contains(&1))
}

/// Subsample that keeps both classes, retrying with fresh seeds.
pub fn subsample_two_class(t: &Table, fraction: f64, seed: u64) -> Result<Table> {
    for attempt in 0..RESAMPLE_ATTEMPTS {
        let s = subsample(t, fraction, derive_seed(seed, &[attempt as u64]));
        if has_both_classes(&s)? {
            return Ok(s);
        }
    }
    Err(Error::ResampleExhausted { attempts: RESAMPLE_ATTEMPTS })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OosProtocol {
    pub iterations: usize,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for OosProtocol {
    fn default() -> Self {
        OosProtocol { iterations: 51, subsample: 0.8, seed: 0 }
    }
}

impl OosProtocol {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 || !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::InvalidArgument("OOS needs ≥ 1 iteration and a subsample fraction in (0, 1]".into()));
        }
        Ok(())
    }
}

/// The OOS AUC values: fresh subsamples of both sides per iteration, the
/// last iteration on the full tables.
pub fn oos_aucs<E: AucEvaluator, P: ParMap>(train: &Table, test: &Table, eval: &E, protocol: &OosProtocol, par: &P) -> Result<Vec<f64>> {
    protocol.validate()?;
    let last = protocol.iterations - 1;
    par.map(protocol.iterations, |i| {
        let it = i as u64;
        let ctx = EvalContext { seed: derive_seed(protocol.seed, &[tag("oos.fit"), it]), iteration: i, level: None };
        if i == last {
            return eval.auc(train, test, &ctx);
        }
        let tr = subsample_two_class(train, protocol.subsample, derive_seed(protocol.seed, &[tag("oos.train"), it]))?;
        let te = subsample_two_class(test, protocol.subsample, derive_seed(protocol.seed, &[tag("oos.test"), it]))?;
        eval.auc(&tr, &te, &ctx)
    })
    .into_iter()
    .collect()
}

/// Single-condition OOS report. `label` names the training source.
pub fn run_oos<E: AucEvaluator, P: ParMap>(
    train: &Table,
    test: &Table,
    label: &str,
    eval: &E,
    protocol: &OosProtocol,
    par: &P,
) -> Result<ExperimentReport> {
    let aucs = oos_aucs(train, test, eval, protocol, par)?;
    let mut report = ExperimentReport::new("oos", protocol.seed);
    report.push_param("iterations", protocol.iterations);
    report.push_param("subsample", protocol.subsample);
    report.push_param("train_rows", train.n_rows());
    report.push_param("test_rows", test.n_rows());
    report.conditions.push(ConditionResult::new(label, aucs)?);
    Ok(report)
}

/// Synthetic share of an OOT training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixRatio {
    /// Synthetic rows only.
    PureSynthetic,
    /// `ratio × real` synthetic rows on top of all real rows; 0 is pure real.
    Ratio(f64),
}

impl MixRatio {
    pub fn label(&self) -> String {
        match self {
            MixRatio::PureSynthetic => "100% synthetic".into(),
            MixRatio::Ratio(r) if *r == 0.0 => "100% real".into(),
            MixRatio::Ratio(r) => format!("{r}:1"),
        }
    }

    /// Synthetic rows to add for `real` training rows, capped by `pool`.
    pub fn synthetic_count(&self, real: usize, pool: usize) -> usize {
        match self {
            MixRatio::PureSynthetic => pool,
            MixRatio::Ratio(r) => (libm::round(r * real as f64) as usize).min(pool),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OotProtocol {
    pub train_fractions: Vec<f64>,
    pub ratios: Vec<MixRatio>,
    /// Synthetic pool generated per train fraction.
    pub synthetic_rows: usize,
    pub oos: OosProtocol,
}

impl Default for OotProtocol {
    fn default() -> Self {
        OotProtocol {
            train_fractions: vec![0.5, 0.8],
            ratios: vec![
                MixRatio::PureSynthetic,
                MixRatio::Ratio(1.0),
                MixRatio::Ratio(0.1),
                MixRatio::Ratio(0.01),
                MixRatio::Ratio(0.001),
                MixRatio::Ratio(0.0),
            ],
            synthetic_rows: 4000,
            oos: OosProtocol::default(),
        }
    }
}

/// Real rows plus `count` synthetic rows drawn without replacement.
pub fn mix(real: &Table, pool: &Table, ratio: MixRatio, seed: u64) -> Result<Table> {
    let k = ratio.synthetic_count(real.n_rows(), pool.n_rows());
    let mut idx = index::sample(&mut rng(seed), pool.n_rows(), k).into_vec();
    idx.sort_unstable();
    let synth = pool.select_rows(&idx);
    match ratio {
        MixRatio::PureSynthetic => Ok(synth),
        MixRatio::Ratio(_) if k == 0 => Ok(real.clone()),
        MixRatio::Ratio(_) => Table::concat(&[real, &synth]),
    }
}

pub fn run_oot<E: AucEvaluator, P: ParMap>(
    table: &Table,
    generator: &dyn GeneratorFactory,
    eval: &E,
    protocol: &OotProtocol,
    par: &P,
) -> Result<ExperimentReport> {
    table.schema().time_index().ok_or(Error::NoTimeIndex)?;
    let master = protocol.oos.seed;
    let mut report = ExperimentReport::new("oot", master);
    report.push_param("iterations", protocol.oos.iterations);
    report.push_param("subsample", protocol.oos.subsample);
    report.push_param("synthetic_rows", protocol.synthetic_rows);
    for (fi, &fraction) in protocol.train_fractions.iter().enumerate() {
        let (train, test) = split_oot(table, fraction)?;
        let fseed = derive_seed(master, &[tag("oot.fraction"), fi as u64]);
        let needs_synth = protocol.ratios.iter().any(|r| r.synthetic_count(train.n_rows(), usize::MAX) > 0);
        let pool = if needs_synth {
            let source = generator.fit(&train, derive_seed(fseed, &[tag("oot.fit")]))?;
            Some(source.label(source.generate(protocol.synthetic_rows, derive_seed(fseed, &[tag("oot.generate")]))?)?)
        } else {
            None
        };
        for (ri, ratio) in protocol.ratios.iter().enumerate() {
            let mixed = match &pool {
                Some(p) => mix(&train, p, *ratio, derive_seed(fseed, &[tag("oot.mix"), ri as u64]))?,
                None => train.clone(),
            };
            let oos = OosProtocol { seed: fseed, ..protocol.oos.clone() };
            let aucs = oos_aucs(&mixed, &test, eval, &oos, par)?;
            let label = format!("{}% train / {}", libm::round(fraction * 100.0), ratio.label());
            report.conditions.push(ConditionResult::new(&label, aucs)?);
        }
    }
    Ok(report)
}

/// How a sweep separates training and test rows in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepSplit {
    /// Rows with time before the cutoff (seconds since the epoch) train.
    Cutoff(f64),
    /// Earliest fraction of rows train.
    TrainFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutlierSweep {
    /// Outlier percentages; 0 is the baseline.
    pub levels: Vec<f64>,
    pub datasets: usize,
    pub synthetic_rows: usize,
    pub test_subsample: f64,
    pub split: SweepSplit,
    pub seed: u64,
}

impl Default for OutlierSweep {
    fn default() -> Self {
        OutlierSweep {
            levels: vec![100.0, 50.0, 10.0, 7.7, 7.4, 7.1, 7.0, 6.9, 6.6, 6.3, 6.0, 5.0, 3.0, 1.0, 0.0],
            datasets: 80,
            synthetic_rows: 4000,
            test_subsample: 0.8,
            // 2022-01-01T00:00:00Z
            split: SweepSplit::Cutoff(1_640_995_200.0),
            seed: 0,
        }
    }
}

pub fn level_label(level: f64) -> String {
    if level == 0.0 {
        "without".into()
    } else {
        format!("{level}%")
    }
}

/// Outlier sweep: `datasets` synthetic tables per level, each injected,
/// labelled and scored on its own test subsample, plus one fit on their concatenation
/// scored on the full test side. Iteration `i` shares its synthetic table,
/// classifier seed and test subsample across levels, so levels are paired.
pub fn run_outlier_sweep<E: AucEvaluator, P: ParMap>(
    table: &Table,
    generator: &dyn GeneratorFactory,
    eval: &E,
    template: &OutlierSpec,
    sweep: &OutlierSweep,
    cov: Option<&CovMatrix>,
    par: &P,
) -> Result<ExperimentReport> {
    table.schema().time_index().ok_or(Error::NoTimeIndex)?;
    if sweep.datasets == 0 || sweep.levels.is_empty() {
        return Err(Error::InvalidArgument("a sweep needs at least one level and one dataset".into()));
    }
    let master = sweep.seed;
    let (train, test) = match sweep.split {
        SweepSplit::Cutoff(t) => split_at_time(table, t)?,
        SweepSplit::TrainFraction(f) => split_oot(table, f)?,
    };
    let source = generator.fit(&train, derive_seed(master, &[tag("sweep.fit")]))?;
    let n = sweep.datasets;
    let datasets: Vec<Table> = par
        .map(n, |i| source.generate(sweep.synthetic_rows, derive_seed(master, &[tag("sweep.generate"), i as u64])))
        .into_iter()
        .collect::<Result<_>>()?;
    let tests: Vec<Table> = par
        .map(n, |i| subsample_two_class(&test, sweep.test_subsample, derive_seed(master, &[tag("sweep.test"), i as u64])))
        .into_iter()
        .collect::<Result<_>>()?;
    let ctx = |i: usize, level: f64| EvalContext { seed: derive_seed(master, &[tag("sweep.classifier"), i as u64]), iteration: i, level: Some(level) };

    let mut report = ExperimentReport::new("sweep", master);
    report.push_param("datasets", n);
    report.push_param("synthetic_rows", sweep.synthetic_rows);
    report.push_param("test_subsample", sweep.test_subsample);
    report.push_param("train_rows", train.n_rows());
    report.push_param("test_rows", test.n_rows());
    for &level in &sweep.levels {
        let injected: Vec<Table> = par
            .map(n, |i| {
                let spec = OutlierSpec { percent: level, seed: derive_seed(master, &[tag("sweep.inject"), i as u64]), ..template.clone() };
                source.label(inject(&datasets[i], &spec, cov)?.0)
            })
            .into_iter()
            .collect::<Result<_>>()?;
        let aucs: Vec<f64> = par
            .map(n + 1, |i| {
                if i < n {
                    eval.auc(&injected[i], &tests[i], &ctx(i, level))
                } else {
                    let all: Vec<&Table> = injected.iter().collect();
                    eval.auc(&Table::concat(&all)?, &test, &ctx(i, level))
                }
            })
            .into_iter()
            .collect::<Result<_>>()?;
        report.conditions.push(ConditionResult::new(&level_label(level), aucs)?);
    }
    if let Some(b) = sweep.levels.iter().position(|&l| l == 0.0) {
        let base = report.conditions[b].clone();
        for (li, c) in report.conditions.iter().enumerate() {
            if li != b {
                report.comparisons.push(Comparison {
                    label: c.label.clone(),
                    baseline: base.label.clone(),
                    delta_median: c.summary.median - base.summary.median,
                    test: wilcoxon(&c.aucs, &base.aucs)?,
                });
            }
        }
    }
    Ok(report)
}
