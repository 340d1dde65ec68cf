//! Tabular data: schema-checked CSV ingestion, outlier filtering and
//! z-scoring, protected-group splits and group-stratified folds.

pub mod compas;

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::stream_rng;
use crate::stats::{mean, percentile, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Binary,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// Column kinds plus the target column, usually read from a JSON sidecar:
///
/// ```json
/// { "columns": [{"name": "age", "kind": "numeric"}, {"name": "y", "kind": "binary"}],
///   "target": "y" }
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    #[serde(default)]
    pub target: Option<String>,
}

impl Schema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let s: Schema = artifact::read_json(path)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Config("schema declares no columns".into()));
        }
        let mut seen = HashMap::new();
        for c in &self.columns {
            if seen.insert(c.name.as_str(), ()).is_some() {
                return Err(Error::Config(format!("duplicate schema column `{}`", c.name)));
            }
        }
        if let Some(t) = &self.target {
            if !seen.contains_key(t.as_str()) {
                return Err(Error::UnknownColumn(t.clone()));
            }
        }
        Ok(())
    }
}

/// Immutable column-typed table. Categorical values are integer codes in
/// first-appearance order; their labels live in `levels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    columns: Vec<ColumnSpec>,
    values: Matrix<f64>,
    target: Option<String>,
    levels: Vec<Vec<String>>,
}

impl Table {
    /// Builds a table from already-encoded values, checking kind invariants.
    pub fn new(columns: Vec<ColumnSpec>, values: Matrix<f64>, target: Option<String>) -> Result<Self> {
        let levels = vec![Vec::new(); columns.len()];
        Self::with_levels(columns, values, target, levels)
    }

    pub(crate) fn with_levels(
        columns: Vec<ColumnSpec>,
        values: Matrix<f64>,
        target: Option<String>,
        levels: Vec<Vec<String>>,
    ) -> Result<Self> {
        if values.n_cols() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                got: values.n_cols(),
            });
        }
        for (j, c) in columns.iter().enumerate() {
            for i in 0..values.n_rows() {
                let v = values.get(i, j);
                let ok = match c.kind {
                    ColumnKind::Numeric => v.is_finite(),
                    ColumnKind::Binary => v == 0.0 || v == 1.0,
                    ColumnKind::Categorical => v >= 0.0 && v.fract() == 0.0,
                };
                if !ok {
                    return Err(Error::Data(format!(
                        "row {i}: value {v} invalid for {:?} column `{}`",
                        c.kind, c.name
                    )));
                }
            }
        }
        let t = Self {
            columns,
            values,
            target,
            levels,
        };
        if let Some(name) = &t.target {
            t.column_index(name)?;
        }
        Ok(t)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.values.n_rows()
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn values(&self) -> &Matrix<f64> {
        &self.values
    }

    pub fn target(&self) -> Option<&str> {
        self.target.as_deref()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn kind(&self, name: &str) -> Result<ColumnKind> {
        Ok(self.columns[self.column_index(name)?].kind)
    }

    /// Category labels of a categorical column (empty for other kinds).
    pub fn levels(&self, name: &str) -> Result<&[String]> {
        Ok(&self.levels[self.column_index(name)?])
    }

    /// Number of distinct codes a discrete column can take.
    pub fn cardinality(&self, name: &str) -> Result<usize> {
        let j = self.column_index(name)?;
        Ok(match self.columns[j].kind {
            ColumnKind::Binary => 2,
            ColumnKind::Categorical => {
                let max = self.values.column(j).into_iter().fold(-1.0f64, f64::max);
                self.levels[j].len().max((max + 1.0) as usize)
            }
            ColumnKind::Numeric => 0,
        })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.values.column(self.column_index(name)?))
    }

    /// Integer labels of a binary or categorical column.
    pub fn labels(&self, name: &str) -> Result<Vec<usize>> {
        let j = self.column_index(name)?;
        if self.columns[j].kind == ColumnKind::Numeric {
            return Err(Error::Data(format!("column `{name}` is numeric, not a label")));
        }
        Ok(self.values.column(j).into_iter().map(|v| v as usize).collect())
    }

    /// All column names except the listed ones, in table order.
    pub fn names_except(&self, exclude: &[&str]) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| !exclude.contains(&c.name.as_str()))
            .map(|c| c.name.clone())
            .collect()
    }

    pub fn select_columns(&self, names: &[String]) -> Result<Matrix<f64>> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.values.select_columns(&idx))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Table {
        Table {
            columns: self.columns.clone(),
            values: self.values.select_rows(idx),
            target: self.target.clone(),
            levels: self.levels.clone(),
        }
    }

    /// Writes the table as CSV with categorical codes mapped back to labels.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(artifact::create(path)?);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in self.values.rows() {
            let rec: Vec<String> = row
                .iter()
                .zip(&self.columns)
                .zip(&self.levels)
                .map(|((&v, c), lv)| match c.kind {
                    ColumnKind::Categorical if !lv.is_empty() => lv[v as usize].clone(),
                    ColumnKind::Binary | ColumnKind::Categorical => format!("{}", v as u64),
                    ColumnKind::Numeric => format!("{v}"),
                })
                .collect();
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn is_missing(tok: &str) -> bool {
    matches!(tok, "" | "NA" | "NaN" | "nan" | "null")
}

/// Loads a CSV file against `schema`. Columns not named in the schema are
/// ignored; rows with a missing target are dropped; any other missing cell is
/// an error.
pub fn load_table(path: &Path, schema: &Schema) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_table(file, schema)
}

pub fn parse_table<R: Read>(reader: R, schema: &Schema) -> Result<Table> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    // first occurrence wins when a header name repeats
    let positions = schema
        .columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == c.name)
                .ok_or_else(|| Error::UnknownColumn(c.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let target_pos = schema
        .target
        .as_ref()
        .map(|t| schema.columns.iter().position(|c| &c.name == t).unwrap_or(0));

    let d = schema.columns.len();
    let mut data = Vec::new();
    let mut levels: Vec<Vec<String>> = vec![Vec::new(); d];
    let mut codes: Vec<HashMap<String, usize>> = vec![HashMap::new(); d];
    let mut n_rows = 0;
    let mut row = vec![0.0; d];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = line + 2;
        if let Some(t) = target_pos {
            if is_missing(rec.get(positions[t]).unwrap_or("")) {
                continue;
            }
        }
        for (j, (spec, &pos)) in schema.columns.iter().zip(&positions).enumerate() {
            let tok = rec.get(pos).unwrap_or("");
            if is_missing(tok) {
                return Err(Error::Data(format!(
                    "line {line}: missing value in column `{}`",
                    spec.name
                )));
            }
            row[j] = match spec.kind {
                ColumnKind::Numeric => match tok.parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => {
                        return Err(Error::Data(format!(
                            "line {line}: non-numeric token {tok:?} in numeric column `{}`",
                            spec.name
                        )))
                    }
                },
                ColumnKind::Binary => match tok {
                    "0" | "0.0" | "false" | "False" => 0.0,
                    "1" | "1.0" | "true" | "True" => 1.0,
                    _ => {
                        return Err(Error::Data(format!(
                            "line {line}: token {tok:?} is not binary in column `{}`",
                            spec.name
                        )))
                    }
                },
                ColumnKind::Categorical => {
                    let next = codes[j].len();
                    let code = *codes[j].entry(tok.to_string()).or_insert_with(|| {
                        levels[j].push(tok.to_string());
                        next
                    });
                    code as f64
                }
            };
        }
        data.extend_from_slice(&row);
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::Empty("table has no usable rows".into()));
    }
    Table::with_levels(
        schema.columns.clone(),
        Matrix::new(n_rows, d, data)?,
        schema.target.clone(),
        levels,
    )
}

/// Per-column z-score transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ScalingParams {
    pub fn apply(&self, table: &Table) -> Result<Table> {
        self.map(table, |v, m, s| (v - m) / s)
    }

    pub fn invert(&self, table: &Table) -> Result<Table> {
        self.map(table, |v, m, s| v * s + m)
    }

    fn map(&self, table: &Table, f: impl Fn(f64, f64, f64) -> f64) -> Result<Table> {
        let mut values = table.values.clone();
        for (k, name) in self.columns.iter().enumerate() {
            let j = table.column_index(name)?;
            for i in 0..values.n_rows() {
                values.set(i, j, f(values.get(i, j), self.means[k], self.stds[k]));
            }
        }
        Ok(Table {
            values,
            ..table.clone()
        })
    }
}

/// Rows whose every listed column lies inside its `[lo_pct, hi_pct]`
/// percentile band (bounds inclusive).
pub fn outlier_mask(
    table: &Table,
    outlier_columns: &[String],
    lo_pct: f64,
    hi_pct: f64,
) -> Result<Vec<bool>> {
    if !(0.0..=100.0).contains(&lo_pct) || !(0.0..=100.0).contains(&hi_pct) || lo_pct > hi_pct {
        return Err(Error::Config(format!(
            "percentile band [{lo_pct}, {hi_pct}] is not within [0, 100]"
        )));
    }
    let mut keep = vec![true; table.n_rows()];
    for name in outlier_columns {
        if table.kind(name)? != ColumnKind::Numeric {
            return Err(Error::Config(format!("outlier column `{name}` is not numeric")));
        }
        let col = table.column(name)?;
        let lo = percentile(&col, lo_pct)?;
        let hi = percentile(&col, hi_pct)?;
        for (k, v) in keep.iter_mut().zip(&col) {
            if *v < lo || *v > hi {
                *k = false;
            }
        }
    }
    Ok(keep)
}

/// Drops percentile outliers in `outlier_columns`, then z-scores every numeric
/// column other than the target (sample standard deviation).
pub fn preprocess(
    table: &Table,
    outlier_columns: &[String],
    lo_pct: f64,
    hi_pct: f64,
) -> Result<(Table, ScalingParams)> {
    let keep = outlier_mask(table, outlier_columns, lo_pct, hi_pct)?;
    let idx: Vec<usize> = (0..table.n_rows()).filter(|&i| keep[i]).collect();
    if idx.is_empty() {
        return Err(Error::Empty("no rows left after outlier filtering".into()));
    }
    let filtered = table.select_rows(&idx);
    let mut params = ScalingParams {
        columns: Vec::new(),
        means: Vec::new(),
        stds: Vec::new(),
    };
    for c in &filtered.columns {
        if c.kind != ColumnKind::Numeric || filtered.target() == Some(c.name.as_str()) {
            continue;
        }
        let col = filtered.column(&c.name)?;
        let sd = sample_variance(&col).sqrt();
        if !(sd > 0.0) {
            return Err(Error::Data(format!(
                "numeric column `{}` is constant after filtering",
                c.name
            )));
        }
        params.columns.push(c.name.clone());
        params.means.push(mean(&col));
        params.stds.push(sd);
    }
    let scaled = params.apply(&filtered)?;
    Ok((scaled, params))
}

/// Row indices of the two protected groups. `g0` is always the smaller one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSplit {
    pub g0_indices: Vec<usize>,
    pub g1_indices: Vec<usize>,
    pub protected_column: String,
    /// Protected-column code carried by `g0`.
    pub g0_code: u8,
}

impl GroupSplit {
    /// Per-row group membership (0 for `g0`, 1 for `g1`).
    pub fn membership(&self, n_rows: usize) -> Vec<u8> {
        let mut m = vec![u8::MAX; n_rows];
        for &i in &self.g0_indices {
            m[i] = 0;
        }
        for &i in &self.g1_indices {
            m[i] = 1;
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.g0_indices.len() + self.g1_indices.len()
    }
}

/// Splits on a binary protected column; code 0 becomes `g0` when sizes tie.
pub fn split_groups(table: &Table, protected_column: &str) -> Result<GroupSplit> {
    if table.kind(protected_column)? != ColumnKind::Binary {
        return Err(Error::Config(format!(
            "protected column `{protected_column}` must be binary"
        )));
    }
    let z = table.column(protected_column)?;
    let zero: Vec<usize> = (0..z.len()).filter(|&i| z[i] == 0.0).collect();
    let one: Vec<usize> = (0..z.len()).filter(|&i| z[i] == 1.0).collect();
    if zero.is_empty() || one.is_empty() {
        return Err(Error::Data(format!(
            "protected column `{protected_column}` has an empty group ({} zeros, {} ones)",
            zero.len(),
            one.len()
        )));
    }
    let (g0_indices, g1_indices, g0_code) = if one.len() < zero.len() {
        (one, zero, 1)
    } else {
        (zero, one, 0)
    };
    Ok(GroupSplit {
        g0_indices,
        g1_indices,
        protected_column: protected_column.to_string(),
        g0_code,
    })
}

pub const FOLD_PLAN_FORMAT: &str = "fold-plan/1";

/// Fold id per row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = artifact::csv_writer(path, FOLD_PLAN_FORMAT)?;
        w.write_record(["row_index", "fold"])?;
        for (i, f) in self.assignments.iter().enumerate() {
            w.serialize((i, f))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a plan written by [`FoldPlan::write_csv`]; the seed is not stored
    /// in the CSV and is supplied by the caller.
    pub fn read_csv(path: &Path, seed: u64) -> Result<Self> {
        let mut r = artifact::csv_reader(path, FOLD_PLAN_FORMAT)?;
        let mut assignments = Vec::new();
        for (expect, rec) in r.deserialize::<(usize, usize)>().enumerate() {
            let (i, f) = rec?;
            if i != expect {
                return Err(Error::Data(format!("fold plan row {expect} out of order")));
            }
            assignments.push(f);
        }
        let k = assignments.iter().max().map_or(0, |m| m + 1);
        Ok(Self {
            k,
            assignments,
            seed,
        })
    }
}

fn check_fold_sizes(k: usize, split: &GroupSplit) -> Result<()> {
    if k < 2 {
        return Err(Error::Config(format!("fold count must be >= 2, got {k}")));
    }
    let smallest = split.g0_indices.len().min(split.g1_indices.len());
    if smallest < k {
        return Err(Error::Data(format!(
            "a group has {smallest} rows, fewer than the {k} folds"
        )));
    }
    Ok(())
}

/// Group-stratified k-fold assignment: each group is shuffled and dealt
/// round-robin, so per-group fold sizes differ by at most one.
pub fn make_folds(table: &Table, k: usize, split: &GroupSplit, seed: u64) -> Result<FoldPlan> {
    make_paired_folds(table, k, split, &[], seed)
}

/// Like [`make_folds`], but both members of each `(g0_row, g1_row)` pair land
/// in the same fold. Pairs are dealt first; each group's unpaired rows then
/// continue that group's round-robin counter.
pub fn make_paired_folds(
    table: &Table,
    k: usize,
    split: &GroupSplit,
    pairs: &[(usize, usize)],
    seed: u64,
) -> Result<FoldPlan> {
    check_fold_sizes(k, split)?;
    let n = table.n_rows();
    if split.n_rows() > n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: split.n_rows(),
        });
    }
    let mut assignments = vec![usize::MAX; n];
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut stream_rng(seed, "folds/pairs", 0));
    for (slot, &p) in order.iter().enumerate() {
        let (a, b) = pairs[p];
        if assignments[a] != usize::MAX || assignments[b] != usize::MAX {
            return Err(Error::Data(format!("row in pair ({a}, {b}) appears in another pair")));
        }
        assignments[a] = slot % k;
        assignments[b] = slot % k;
    }
    for (g, rows) in [&split.g0_indices, &split.g1_indices].into_iter().enumerate() {
        let mut rest: Vec<usize> = rows
            .iter()
            .copied()
            .filter(|&i| assignments[i] == usize::MAX)
            .collect();
        rest.shuffle(&mut stream_rng(seed, "folds/rows", g as u64));
        for (slot, i) in rest.into_iter().enumerate() {
            assignments[i] = (pairs.len() + slot) % k;
        }
    }
    if let Some(i) = assignments.iter().position(|&f| f == usize::MAX) {
        return Err(Error::Data(format!("row {i} belongs to neither group")));
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}
