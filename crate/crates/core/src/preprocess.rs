//! Missing-value fill, label encoding and z-scoring.
//!
//! Numeric and datetime columns: missing cells take a sentinel well below
//! the observed range, then the column is standardized. Categorical
//! columns: code 0 is the dedicated MISSING category, observed categories
//! follow in lexicographic order.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::table::{Column, ColumnKind, Schema, Table};

/// Code reserved for missing (and unseen) categories.
pub const MISSING_CODE: usize = 0;

/// Relative tolerance used when recognising a decoded sentinel.
const SENTINEL_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalePlan {
    pub sentinel: f64,
    pub observed_min: f64,
    pub observed_max: f64,
    /// Mean after sentinel fill; for datetime columns this is the epoch offset.
    pub mean: f64,
    pub std: f64,
    pub constant: bool,
    /// Whether the fitted column had missing cells.
    #[serde(default)]
    pub has_missing: bool,
}

impl ScalePlan {
    fn fit(observed: &[f64], n_missing: usize) -> Self {
        let (lo, hi) = if observed.is_empty() {
            (0.0, 0.0)
        } else {
            observed.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
        };
        let sentinel = lo - 10.0 * (1.0 + hi - lo);
        assert!(observed.iter().all(|&v| v != sentinel), "sentinel collides with an observed value");
        let n = (observed.len() + n_missing) as f64;
        let mean = (observed.iter().sum::<f64>() + sentinel * n_missing as f64) / n;
        let var = (observed.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            + n_missing as f64 * (sentinel - mean) * (sentinel - mean))
            / n;
        let std = libm::sqrt(var);
        let constant = !(std > 0.0) || !std.is_finite();
        ScalePlan {
            sentinel,
            observed_min: lo,
            observed_max: hi,
            mean,
            std: if constant { 1.0 } else { std },
            constant,
            has_missing: n_missing > 0,
        }
    }

    pub fn encode(&self, v: Option<f64>) -> f64 {
        (v.unwrap_or(self.sentinel) - self.mean) / self.std
    }

    pub fn decode(&self, z: f64) -> Option<f64> {
        let v = z * self.std + self.mean;
        if (v - self.sentinel).abs() <= SENTINEL_RTOL * self.sentinel.abs().max(1.0) {
            None
        } else {
            Some(v)
        }
    }

    /// Encoded-space midpoint between the sentinel and the observed minimum.
    pub fn missing_threshold(&self) -> f64 {
        (self.encode(None) + self.encode(Some(self.observed_min))) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnPlan {
    Numeric(ScalePlan),
    Datetime(ScalePlan),
    /// Observed categories in code order; code `i + 1` is `categories[i]`.
    Categorical { categories: Vec<String> },
}

impl ColumnPlan {
    /// Number of distinct codes including MISSING.
    pub fn cardinality(&self) -> Option<usize> {
        match self {
            ColumnPlan::Categorical { categories } => Some(categories.len() + 1),
            _ => None,
        }
    }

    pub fn code_of(&self, s: &str) -> Option<usize> {
        match self {
            ColumnPlan::Categorical { categories } => {
                categories.binary_search_by(|c| c.as_str().cmp(s)).ok().map(|i| i + 1)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessPlan {
    pub schema: Schema,
    pub columns: Vec<ColumnPlan>,
}

/// Encoder output plus the count of categories not seen at fit time.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub matrix: Mat,
    pub unseen: usize,
}

impl PreprocessPlan {
    pub fn fit(table: &Table) -> Result<Self> {
        if table.n_rows() == 0 {
            return Err(Error::InvalidArgument("cannot fit preprocessing on an empty table".into()));
        }
        let columns = table
            .columns()
            .iter()
            .map(|col| {
                let n_missing = col.missing.iter().filter(|&&m| m).count();
                match col.kind() {
                    ColumnKind::Numeric => ColumnPlan::Numeric(ScalePlan::fit(&col.observed_f64(), n_missing)),
                    ColumnKind::Datetime => ColumnPlan::Datetime(ScalePlan::fit(&col.observed_f64(), n_missing)),
                    ColumnKind::Categorical => ColumnPlan::Categorical { categories: col.categories() },
                }
            })
            .collect();
        Ok(PreprocessPlan { schema: table.schema().clone(), columns })
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    fn check_schema(&self, schema: &Schema) -> Result<()> {
        if schema.len() != self.schema.len() {
            return Err(Error::DimensionMismatch { what: "plan columns", expected: self.schema.len(), found: schema.len() });
        }
        for (a, b) in self.schema.columns().iter().zip(schema.columns()) {
            if a.name != b.name {
                return Err(Error::UnknownColumn(b.name.clone()));
            }
            if a.kind != b.kind {
                return Err(Error::WrongKind(b.name.clone()));
            }
        }
        Ok(())
    }

    pub fn encode(&self, table: &Table) -> Result<Encoded> {
        self.check_schema(table.schema())?;
        let n = table.n_rows();
        let mut matrix = Mat::zeros(n, self.width());
        let mut unseen = 0;
        for (j, (plan, col)) in self.columns.iter().zip(table.columns()).enumerate() {
            for r in 0..n {
                matrix[(r, j)] = match plan {
                    ColumnPlan::Numeric(s) | ColumnPlan::Datetime(s) => s.encode(col.as_f64(r)),
                    ColumnPlan::Categorical { .. } => match col.as_str(r) {
                        None => MISSING_CODE as f64,
                        Some(s) => match plan.code_of(s) {
                            Some(code) => code as f64,
                            None => {
                                unseen += 1;
                                MISSING_CODE as f64
                            }
                        },
                    },
                };
            }
        }
        Ok(Encoded { matrix, unseen })
    }

    pub fn decode(&self, matrix: &Mat) -> Result<Table> {
        if matrix.cols() != self.width() {
            return Err(Error::DimensionMismatch { what: "decode width", expected: self.width(), found: matrix.cols() });
        }
        let n = matrix.rows();
        let columns = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, plan)| {
                let mut missing = Vec::with_capacity(n);
                match plan {
                    ColumnPlan::Numeric(s) => {
                        let vals = (0..n)
                            .map(|r| {
                                let v = s.decode(matrix[(r, j)]);
                                missing.push(v.is_none());
                                v.unwrap_or(0.0)
                            })
                            .collect();
                        Column::numeric(vals, missing)
                    }
                    ColumnPlan::Datetime(s) => {
                        let vals = (0..n)
                            .map(|r| {
                                let v = s.decode(matrix[(r, j)]);
                                missing.push(v.is_none());
                                v.map_or(0, |x| libm::round(x) as i64)
                            })
                            .collect();
                        Column::datetime(vals, missing)
                    }
                    ColumnPlan::Categorical { categories } => {
                        let k = categories.len();
                        let vals = (0..n)
                            .map(|r| {
                                let x = matrix[(r, j)];
                                let code = if x.is_nan() { 0 } else { libm::round(x).clamp(0.0, k as f64) as usize };
                                missing.push(code == MISSING_CODE);
                                if code == MISSING_CODE {
                                    String::new()
                                } else {
                                    categories[code - 1].clone()
                                }
                            })
                            .collect();
                        Column::categorical(vals, missing)
                    }
                }
            })
            .collect();
        Table::new(self.schema.clone(), columns)
    }

    /// Maps generated numeric/datetime encodings onto the fitted support.
    /// Values closer to the sentinel than to the observed minimum become the
    /// exact sentinel encoding (decoded as missing) when the column had
    /// missing cells; everything else is clamped to the observed range.
    pub fn snap_to_support(&self, matrix: &mut Mat) {
        for (j, plan) in self.columns.iter().enumerate() {
            if let ColumnPlan::Numeric(s) | ColumnPlan::Datetime(s) = plan {
                let cut = s.missing_threshold();
                let sentinel = s.encode(None);
                let (lo, hi) = (s.encode(Some(s.observed_min)), s.encode(Some(s.observed_max)));
                for r in 0..matrix.rows() {
                    let x = &mut matrix[(r, j)];
                    *x = if s.has_missing && *x < cut { sentinel } else { x.clamp(lo, hi) };
                }
            }
        }
    }
}
