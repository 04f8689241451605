//! Hash-based similarity filter.
//!
//! Rows are canonicalized in encoded space (numeric cells rounded to a fixed
//! number of decimals, category codes verbatim) and hashed with FNV-1a. Only
//! the sorted hash list is kept after training.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::preprocess::{ColumnPlan, PreprocessPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Reject,
}

/// Canonical hash of one encoded row.
pub fn row_hash(plan: &PreprocessPlan, row: &[f64], precision: u32) -> u64 {
    let scale = libm::pow(10.0, precision as f64);
    let mut bytes = Vec::with_capacity(row.len() * 9);
    for (plan, &x) in plan.columns.iter().zip(row) {
        match plan {
            ColumnPlan::Categorical { .. } => {
                bytes.push(b'c');
                bytes.extend_from_slice(&(libm::round(x) as i64).to_le_bytes());
            }
            _ => {
                bytes.push(b'n');
                let q = libm::round(x * scale) as i64;
                bytes.extend_from_slice(&q.to_le_bytes());
            }
        }
    }
    crate::stable_hash(&bytes)
}

/// Sorted, deduplicated hashes of real rows.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashSet64 {
    hashes: Vec<u64>,
}

impl HashSet64 {
    pub fn from_hashes(mut hashes: Vec<u64>) -> Self {
        hashes.sort_unstable();
        hashes.dedup();
        HashSet64 { hashes }
    }

    pub fn contains(&self, h: u64) -> bool {
        self.hashes.binary_search(&h).is_ok()
    }

    pub fn len(&self) -> usize {
        self.hashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hashes.is_empty()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.hashes
    }
}

/// Keep/reject decision for one encoded candidate row.
pub fn similarity_filter(real: &HashSet64, plan: &PreprocessPlan, candidate: &[f64], precision: u32) -> Verdict {
    if real.contains(row_hash(plan, candidate, precision)) {
        Verdict::Reject
    } else {
        Verdict::Keep
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{ColumnKind, ColumnSpec, Role, Schema, Table, Value};
    use alloc::vec;

    fn plan_and_rows() -> (PreprocessPlan, crate::linalg::Mat) {
        let schema = Schema::new(vec![
            ColumnSpec::new("x", ColumnKind::Numeric, Role::Feature),
            ColumnSpec::new("c", ColumnKind::Categorical, Role::Feature),
        ])
        .unwrap();
        let rows = vec![
            vec![Value::Num(1.0), Value::Cat("a".into())],
            vec![Value::Num(2.5), Value::Cat("b".into())],
            vec![Value::Missing, Value::Cat("a".into())],
        ];
        let t = Table::from_rows(schema, &rows).unwrap();
        let plan = PreprocessPlan::fit(&t).unwrap();
        let enc = plan.encode(&t).unwrap().matrix;
        (plan, enc)
    }

    #[test]
    fn exact_copy_rejected_and_perturbation_kept() {
        let (plan, enc) = plan_and_rows();
        let set = HashSet64::from_hashes((0..enc.rows()).map(|r| row_hash(&plan, enc.row(r), 3)).collect());
        assert_eq!(similarity_filter(&set, &plan, enc.row(1), 3), Verdict::Reject);
        let mut moved = enc.row(1).to_vec();
        moved[0] += 0.002;
        assert_eq!(similarity_filter(&set, &plan, &moved, 3), Verdict::Keep);
        let mut jitter = enc.row(1).to_vec();
        jitter[0] += 1e-6;
        assert_eq!(similarity_filter(&set, &plan, &jitter, 3), Verdict::Reject);
    }

    #[test]
    fn empty_set_keeps_everything() {
        let (plan, enc) = plan_and_rows();
        let empty = HashSet64::default();
        for r in 0..enc.rows() {
            assert_eq!(similarity_filter(&empty, &plan, enc.row(r), 3), Verdict::Keep);
        }
    }
}
