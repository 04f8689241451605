//! Typed column-oriented tables with a per-cell missing mask.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Datetime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Feature,
    Target,
    TimeIndex,
    Macro,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: Role,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind, role: Role) -> Self {
        ColumnSpec { name: name.into(), kind, role }
    }
}

/// Ordered, validated column list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ColumnSpec>", into = "Vec<ColumnSpec>")]
pub struct Schema {
    columns: Vec<ColumnSpec>,
}

impl TryFrom<Vec<ColumnSpec>> for Schema {
    type Error = Error;
    fn try_from(columns: Vec<ColumnSpec>) -> Result<Self> {
        Schema::new(columns)
    }
}

impl From<Schema> for Vec<ColumnSpec> {
    fn from(s: Schema) -> Self {
        s.columns
    }
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{}`", c.name)));
            }
        }
        let count = |role| columns.iter().filter(|c| c.role == role).count();
        if count(Role::Target) > 1 {
            return Err(Error::Schema("more than one target column".to_string()));
        }
        if count(Role::TimeIndex) > 1 {
            return Err(Error::Schema("more than one time index column".to_string()));
        }
        if let Some(t) = columns.iter().find(|c| c.role == Role::TimeIndex && c.kind == ColumnKind::Categorical) {
            return Err(Error::Schema(format!("time index `{}` must be numeric or datetime", t.name)));
        }
        Ok(Schema { columns })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn target(&self) -> Option<usize> {
        self.columns.iter().position(|c| c.role == Role::Target)
    }

    pub fn time_index(&self) -> Option<usize> {
        self.columns.iter().position(|c| c.role == Role::TimeIndex)
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub(crate) fn with_kind(&self, idx: usize, kind: ColumnKind) -> Schema {
        let mut columns = self.columns.clone();
        columns[idx].kind = kind;
        Schema { columns }
    }
}

/// A single cell, used when building tables row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Num(f64),
    Cat(String),
    /// Seconds since the Unix epoch.
    Time(i64),
    Missing,
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
    Datetime(Vec<i64>),
}

impl ColumnData {
    fn empty(kind: ColumnKind) -> Self {
        match kind {
            ColumnKind::Numeric => ColumnData::Numeric(Vec::new()),
            ColumnKind::Categorical => ColumnData::Categorical(Vec::new()),
            ColumnKind::Datetime => ColumnData::Datetime(Vec::new()),
        }
    }

    fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
            ColumnData::Datetime(v) => v.len(),
        }
    }

    fn select(&self, idx: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(idx.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical(v) => ColumnData::Categorical(idx.iter().map(|&i| v[i].clone()).collect()),
            ColumnData::Datetime(v) => ColumnData::Datetime(idx.iter().map(|&i| v[i]).collect()),
        }
    }

    fn extend(&mut self, other: &ColumnData) {
        match (self, other) {
            (ColumnData::Numeric(a), ColumnData::Numeric(b)) => a.extend_from_slice(b),
            (ColumnData::Categorical(a), ColumnData::Categorical(b)) => a.extend(b.iter().cloned()),
            (ColumnData::Datetime(a), ColumnData::Datetime(b)) => a.extend_from_slice(b),
            _ => unreachable!("schemas checked before extend"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub data: ColumnData,
    /// `true` where the cell is missing; the stored value is then ignored.
    pub missing: Vec<bool>,
}

impl Column {
    pub fn numeric(values: Vec<f64>, missing: Vec<bool>) -> Self {
        Column { data: ColumnData::Numeric(values), missing }
    }

    pub fn categorical(values: Vec<String>, missing: Vec<bool>) -> Self {
        Column { data: ColumnData::Categorical(values), missing }
    }

    pub fn datetime(values: Vec<i64>, missing: Vec<bool>) -> Self {
        Column { data: ColumnData::Datetime(values), missing }
    }

    pub fn kind(&self) -> ColumnKind {
        match self.data {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical(_) => ColumnKind::Categorical,
            ColumnData::Datetime(_) => ColumnKind::Datetime,
        }
    }

    pub fn len(&self) -> usize {
        self.missing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn get(&self, row: usize) -> Value {
        if self.missing[row] {
            return Value::Missing;
        }
        match &self.data {
            ColumnData::Numeric(v) => Value::Num(v[row]),
            ColumnData::Categorical(v) => Value::Cat(v[row].clone()),
            ColumnData::Datetime(v) => Value::Time(v[row]),
        }
    }

    /// Numeric view of a numeric or datetime cell; `None` when missing or categorical.
    pub fn as_f64(&self, row: usize) -> Option<f64> {
        if self.missing[row] {
            return None;
        }
        match &self.data {
            ColumnData::Numeric(v) => Some(v[row]),
            ColumnData::Datetime(v) => Some(v[row] as f64),
            ColumnData::Categorical(_) => None,
        }
    }

    pub fn as_str(&self, row: usize) -> Option<&str> {
        match &self.data {
            ColumnData::Categorical(v) if !self.missing[row] => Some(v[row].as_str()),
            _ => None,
        }
    }

    /// Non-missing values of a numeric or datetime column.
    pub fn observed_f64(&self) -> Vec<f64> {
        (0..self.len()).filter_map(|r| self.as_f64(r)).collect()
    }

    /// Distinct non-missing categories, sorted.
    pub fn categories(&self) -> Vec<String> {
        let set: BTreeSet<&str> = (0..self.len()).filter_map(|r| self.as_str(r)).collect();
        set.into_iter().map(String::from).collect()
    }

    fn push(&mut self, v: &Value, name: &str) -> Result<()> {
        match (&mut self.data, v) {
            (_, Value::Missing) => {
                match &mut self.data {
                    ColumnData::Numeric(a) => a.push(0.0),
                    ColumnData::Categorical(a) => a.push(String::new()),
                    ColumnData::Datetime(a) => a.push(0),
                }
                self.missing.push(true);
                return Ok(());
            }
            (ColumnData::Numeric(a), Value::Num(x)) => a.push(*x),
            (ColumnData::Categorical(a), Value::Cat(s)) => a.push(s.clone()),
            (ColumnData::Datetime(a), Value::Time(t)) => a.push(*t),
            (ColumnData::Numeric(a), Value::Time(t)) => a.push(*t as f64),
            _ => return Err(Error::WrongKind(name.to_string())),
        }
        self.missing.push(false);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    schema: Schema,
    columns: Vec<Column>,
}

impl Table {
    pub fn new(schema: Schema, columns: Vec<Column>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::DimensionMismatch { what: "table columns", expected: schema.len(), found: columns.len() });
        }
        let n = columns.first().map_or(0, Column::len);
        for (spec, col) in schema.columns().iter().zip(&columns) {
            if col.kind() != spec.kind {
                return Err(Error::WrongKind(spec.name.clone()));
            }
            if col.len() != n || col.data.len() != n {
                return Err(Error::DimensionMismatch { what: "column length", expected: n, found: col.len() });
            }
        }
        Ok(Table { schema, columns })
    }

    pub fn empty(schema: Schema) -> Self {
        let columns = schema
            .columns()
            .iter()
            .map(|c| Column { data: ColumnData::empty(c.kind), missing: Vec::new() })
            .collect();
        Table { schema, columns }
    }

    pub fn from_rows(schema: Schema, rows: &[Vec<Value>]) -> Result<Self> {
        let mut t = Table::empty(schema);
        for row in rows {
            t.push_row(row)?;
        }
        Ok(t)
    }

    pub fn push_row(&mut self, row: &[Value]) -> Result<()> {
        if row.len() != self.schema.len() {
            return Err(Error::DimensionMismatch { what: "row arity", expected: self.schema.len(), found: row.len() });
        }
        for ((col, spec), v) in self.columns.iter_mut().zip(self.schema.columns()).zip(row) {
            col.push(v, &spec.name)?;
        }
        Ok(())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn column_mut(&mut self, idx: usize) -> &mut Column {
        &mut self.columns[idx]
    }

    pub fn column_by_name(&self, name: &str) -> Result<&Column> {
        Ok(&self.columns[self.schema.require(name)?])
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn row(&self, r: usize) -> Vec<Value> {
        self.columns.iter().map(|c| c.get(r)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Table {
        let columns = self
            .columns
            .iter()
            .map(|c| Column { data: c.data.select(idx), missing: idx.iter().map(|&i| c.missing[i]).collect() })
            .collect();
        Table { schema: self.schema.clone(), columns }
    }

    /// Row-wise concatenation of tables sharing one schema.
    pub fn concat(tables: &[&Table]) -> Result<Table> {
        let first = tables.first().ok_or_else(|| Error::InvalidArgument("concat of zero tables".to_string()))?;
        let mut out = (*first).clone();
        for t in &tables[1..] {
            if t.schema != out.schema {
                return Err(Error::Schema("concat of tables with different schemas".to_string()));
            }
            for (a, b) in out.columns.iter_mut().zip(&t.columns) {
                a.data.extend(&b.data);
                a.missing.extend_from_slice(&b.missing);
            }
        }
        Ok(out)
    }

    /// Keeps the named columns, in the given order.
    pub fn project(&self, names: &[&str]) -> Result<Table> {
        let mut specs = Vec::with_capacity(names.len());
        let mut cols = Vec::with_capacity(names.len());
        for n in names {
            let i = self.schema.require(n)?;
            specs.push(self.schema.columns()[i].clone());
            cols.push(self.columns[i].clone());
        }
        Table::new(Schema::new(specs)?, cols)
    }

    /// Binary labels from the target column.
    ///
    /// Numeric targets are positive above 0.5. Categorical targets must have
    /// exactly two categories; the lexicographically larger one is positive.
    pub fn binary_labels(&self) -> Result<Vec<u8>> {
        let t = self.schema.target().ok_or(Error::NoTarget)?;
        let col = &self.columns[t];
        if col.missing.iter().any(|&m| m) {
            return Err(Error::InvalidArgument(format!("target `{}` has missing values", self.schema.columns()[t].name)));
        }
        match &col.data {
            ColumnData::Numeric(v) => Ok(v.iter().map(|&x| u8::from(x > 0.5)).collect()),
            ColumnData::Datetime(_) => Err(Error::WrongKind(self.schema.columns()[t].name.clone())),
            ColumnData::Categorical(v) => {
                let cats = col.categories();
                match cats.len() {
                    1 => Ok(v.iter().map(|s| u8::from(is_truthy(s))).collect()),
                    2 => Ok(v.iter().map(|s| u8::from(*s == cats[1])).collect()),
                    k => Err(Error::InvalidArgument(format!("binary target expected, found {k} categories"))),
                }
            }
        }
    }

    /// Replaces the target column with binary labels, keeping its kind.
    /// Categorical targets receive `negative`/`positive` category names.
    pub fn with_labels(&self, labels: &[u8], negative: &str, positive: &str) -> Result<Table> {
        let t = self.schema.target().ok_or(Error::NoTarget)?;
        self.check_len(labels.len())?;
        let mut out = self.clone();
        let missing = alloc::vec![false; labels.len()];
        out.columns[t] = match self.columns[t].kind() {
            ColumnKind::Categorical => Column::categorical(
                labels.iter().map(|&l| if l == 1 { positive.to_string() } else { negative.to_string() }).collect(),
                missing,
            ),
            _ => Column::numeric(labels.iter().map(|&l| f64::from(l)).collect(), missing),
        };
        out.schema = out.schema.with_kind(t, out.columns[t].kind());
        Ok(out)
    }

    /// Replaces the target column with numeric scores (the column becomes numeric).
    pub fn with_scores(&self, scores: &[f64]) -> Result<Table> {
        let t = self.schema.target().ok_or(Error::NoTarget)?;
        self.check_len(scores.len())?;
        let mut out = self.clone();
        out.columns[t] = Column::numeric(scores.to_vec(), alloc::vec![false; scores.len()]);
        out.schema = out.schema.with_kind(t, ColumnKind::Numeric);
        Ok(out)
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.n_rows() {
            return Err(Error::DimensionMismatch { what: "row count", expected: self.n_rows(), found: n });
        }
        Ok(())
    }
}

fn is_truthy(s: &str) -> bool {
    matches!(s.trim().to_ascii_lowercase().as_str(), "1" | "true" | "yes" | "y" | "t")
}

/// Minority-to-majority class ratio of a binary target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceRatio(pub f64);

impl ImbalanceRatio {
    pub fn of(labels: &[u8]) -> Result<Self> {
        let pos = labels.iter().filter(|&&l| l == 1).count();
        let neg = labels.len() - pos;
        if pos == 0 || neg == 0 {
            return Err(Error::SingleClass);
        }
        Ok(ImbalanceRatio(pos.min(neg) as f64 / pos.max(neg) as f64))
    }
}
