use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::stats::{summarize, Summary, Wilcoxon};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub label: String,
    pub aucs: Vec<f64>,
    pub summary: Summary,
}

impl ConditionResult {
    pub fn new(label: &str, aucs: Vec<f64>) -> Result<Self> {
        let summary = summarize(&aucs)?;
        Ok(ConditionResult { label: label.into(), aucs, summary })
    }
}

/// A condition tested against the baseline condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label: String,
    pub baseline: String,
    /// Median AUC change relative to the baseline.
    pub delta_median: f64,
    pub test: Wilcoxon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub protocol: String,
    pub master_seed: u64,
    /// Parameters, configs and input hashes, in insertion order.
    pub provenance: Vec<(String, String)>,
    pub conditions: Vec<ConditionResult>,
    pub comparisons: Vec<Comparison>,
}

impl ExperimentReport {
    pub fn new(protocol: &str, master_seed: u64) -> Self {
        ExperimentReport { protocol: protocol.into(), master_seed, provenance: Vec::new(), conditions: Vec::new(), comparisons: Vec::new() }
    }

    pub fn push_param(&mut self, key: &str, value: impl ToString) {
        self.provenance.push((key.into(), value.to_string()));
    }

    /// Aligned plain-text tables.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# protocol: {}", self.protocol);
        let _ = writeln!(s, "# seed: {}", self.master_seed);
        for (k, v) in &self.provenance {
            let _ = writeln!(s, "# {k}: {v}");
        }
        let w = self.conditions.iter().map(|c| c.label.chars().count()).max().unwrap_or(0).max("condition".len());
        let _ = writeln!(s, "{:<w$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>4}", "condition", "median", "min", "max", "iqr", "n");
        for c in &self.conditions {
            let m = &c.summary;
            let _ = writeln!(s, "{:<w$}  {:.4}  {:.4}  {:.4}  {:.4}  {:>4}", c.label, m.median, m.min, m.max, m.iqr, m.n);
        }
        if !self.comparisons.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "vs {}", self.comparisons[0].baseline);
            let w = self.comparisons.iter().map(|c| c.label.chars().count()).max().unwrap_or(0);
            for c in &self.comparisons {
                let m = &self.conditions.iter().find(|x| x.label == c.label).map(|x| x.summary);
                let (med, lo, hi) = m.map_or((f64::NAN, f64::NAN, f64::NAN), |m| (m.median, m.min, m.max));
                let flag = if c.test.significant { "significant" } else { "not significant" };
                let _ = writeln!(
                    s,
                    "{:<w$} → {med:.4} ({lo:.4}:{hi:.4}), ΔAUC {:+.4}, W {}, p {:.4}, {flag}",
                    c.label,
                    c.delta_median,
                    format!("{:.1}", c.test.statistic),
                    c.test.p_value
                );
            }
        }
        s
    }
}
