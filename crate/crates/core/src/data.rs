//! Typed columns with an explicit missingness mask.

use std::collections::HashSet;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnKind {
    Continuous,
    /// Values are stored as level indices into `levels`.
    Categorical { levels: Vec<String> },
    EventTime,
    EventIndicator,
    EntryTime,
}

impl ColumnKind {
    pub fn categorical<S: ToString>(levels: &[S]) -> Self {
        ColumnKind::Categorical {
            levels: levels.iter().map(|l| l.to_string()).collect(),
        }
    }

    pub fn levels(&self) -> Option<&[String]> {
        match self {
            ColumnKind::Categorical { levels } => Some(levels),
            _ => None,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, ColumnKind::Categorical { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    name: String,
    kind: ColumnKind,
    values: Vec<f64>,
    observed: Vec<bool>,
}

impl Column {
    /// Build a column from optional cells. `None` is MISSING; the stored
    /// value of a missing cell is unspecified.
    pub fn new(name: impl Into<String>, kind: ColumnKind, cells: Vec<Option<f64>>) -> Result<Self> {
        let observed = cells.iter().map(Option::is_some).collect();
        let values = cells.into_iter().map(|c| c.unwrap_or(0.0)).collect();
        Self::from_parts(name, kind, values, observed)
    }

    pub fn from_parts(
        name: impl Into<String>,
        kind: ColumnKind,
        values: Vec<f64>,
        observed: Vec<bool>,
    ) -> Result<Self> {
        let col = Column {
            name: name.into(),
            kind,
            values,
            observed,
        };
        col.validate()?;
        Ok(col)
    }

    pub fn continuous(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let observed = vec![true; values.len()];
        Self::from_parts(name, ColumnKind::Continuous, values, observed)
    }

    pub fn categorical<S: ToString>(
        name: impl Into<String>,
        levels: &[S],
        codes: &[usize],
    ) -> Result<Self> {
        let values = codes.iter().map(|&c| c as f64).collect();
        let observed = vec![true; codes.len()];
        Self::from_parts(name, ColumnKind::categorical(levels), values, observed)
    }

    pub fn of_kind(name: impl Into<String>, kind: ColumnKind, values: Vec<f64>) -> Result<Self> {
        let observed = vec![true; values.len()];
        Self::from_parts(name, kind, values, observed)
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidData {
            column: self.name.clone(),
            reason,
        };
        if self.values.len() != self.observed.len() {
            return Err(bad("mask length differs from value length".into()));
        }
        for (i, (&v, &obs)) in self.values.iter().zip(&self.observed).enumerate() {
            if !obs {
                continue;
            }
            if !v.is_finite() {
                return Err(bad(format!("row {i}: non-finite value")));
            }
            match &self.kind {
                ColumnKind::Continuous => {}
                ColumnKind::Categorical { levels } => {
                    if v.fract() != 0.0 || v < 0.0 || v as usize >= levels.len() {
                        return Err(bad(format!("row {i}: {v} is not a level index")));
                    }
                }
                ColumnKind::EventIndicator => {
                    if v != 0.0 && v != 1.0 {
                        return Err(bad(format!("row {i}: indicator {v} not in {{0,1}}")));
                    }
                }
                ColumnKind::EventTime | ColumnKind::EntryTime => {
                    if v < 0.0 {
                        return Err(bad(format!("row {i}: negative time {v}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ColumnKind {
        &self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, row: usize) -> Option<f64> {
        self.observed[row].then(|| self.values[row])
    }

    pub fn is_observed(&self, row: usize) -> bool {
        self.observed[row]
    }

    /// Raw storage; entries at missing positions are meaningless.
    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.observed
    }

    pub fn n_missing(&self) -> usize {
        self.observed.iter().filter(|o| !**o).count()
    }

    /// Observed values, or an error naming the column if any cell is missing.
    pub fn complete_values(&self) -> Result<&[f64]> {
        if self.n_missing() > 0 {
            return Err(Error::MissingValues(self.name.clone()));
        }
        Ok(&self.values)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    fn select(&self, rows: &[usize]) -> Column {
        Column {
            name: self.name.clone(),
            kind: self.kind.clone(),
            values: rows.iter().map(|&r| self.values[r]).collect(),
            observed: rows.iter().map(|&r| self.observed[r]).collect(),
        }
    }

    fn format_cell(&self, row: usize) -> String {
        match self.get(row) {
            None => String::new(),
            Some(v) => match &self.kind {
                ColumnKind::Categorical { levels } => levels[v as usize].clone(),
                _ => format!("{v}"),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    row_count: usize,
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let row_count = columns.first().map_or(0, Column::len);
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
            if c.len() != row_count {
                return Err(Error::InvalidData {
                    column: c.name.clone(),
                    reason: format!("has {} rows, expected {row_count}", c.len()),
                });
            }
        }
        let ds = Dataset { columns, row_count };
        ds.check_time_order()?;
        Ok(ds)
    }

    fn check_time_order(&self) -> Result<()> {
        let entry = self
            .columns
            .iter()
            .find(|c| c.kind == ColumnKind::EntryTime);
        let exit = self
            .columns
            .iter()
            .find(|c| c.kind == ColumnKind::EventTime);
        if let (Some(entry), Some(exit)) = (entry, exit) {
            for row in 0..self.row_count {
                if let (Some(a), Some(b)) = (entry.get(row), exit.get(row)) {
                    if a >= b {
                        return Err(Error::InvalidData {
                            column: exit.name.clone(),
                            reason: format!("row {row}: entry {a} is not before exit {b}"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        Ok(&self.columns[self.column_index(name)?])
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name == name)
    }

    /// Appends a column, returning the extended dataset.
    pub fn with_column(mut self, column: Column) -> Result<Self> {
        self.columns.push(column);
        Dataset::new(self.columns)
    }

    /// Replaces the column of the same name.
    pub fn replace_column(mut self, column: Column) -> Result<Self> {
        let idx = self.column_index(column.name())?;
        self.columns[idx] = column;
        Dataset::new(self.columns)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            row_count: rows.len(),
        }
    }

    pub fn select_columns(&self, names: &[&str]) -> Result<Dataset> {
        let cols = names
            .iter()
            .map(|n| self.column(n).cloned())
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(cols)
    }

    pub fn n_missing(&self) -> usize {
        self.columns.iter().map(Column::n_missing).sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in 0..self.row_count {
            w.write_record(self.columns.iter().map(|c| c.format_cell(row)))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV with a header row. Columns named in `schema` get that
    /// kind; others are inferred (all-numeric -> continuous, otherwise
    /// categorical with sorted labels). Empty fields are MISSING.
    pub fn read_csv<R: Read>(reader: R, schema: &[(&str, ColumnKind)]) -> Result<Dataset> {
        let mut r = csv::Reader::from_reader(reader);
        let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
        for rec in r.records() {
            let rec = rec?;
            for (j, field) in rec.iter().enumerate() {
                raw[j].push(field.to_string());
            }
        }
        let mut columns = Vec::with_capacity(headers.len());
        for (name, cells) in headers.into_iter().zip(raw) {
            let kind = match schema.iter().find(|(n, _)| *n == name) {
                Some((_, k)) => k.clone(),
                None => infer_kind(&cells),
            };
            columns.push(parse_column(name, kind, &cells)?);
        }
        Dataset::new(columns)
    }
}

fn infer_kind(cells: &[String]) -> ColumnKind {
    let numeric = cells
        .iter()
        .filter(|c| !c.is_empty())
        .all(|c| c.parse::<f64>().is_ok());
    if numeric {
        ColumnKind::Continuous
    } else {
        let mut levels: Vec<&str> = cells
            .iter()
            .filter(|c| !c.is_empty())
            .map(String::as_str)
            .collect();
        levels.sort_unstable();
        levels.dedup();
        ColumnKind::categorical(&levels)
    }
}

fn parse_column(name: String, kind: ColumnKind, cells: &[String]) -> Result<Column> {
    let mut parsed = Vec::with_capacity(cells.len());
    for (row, cell) in cells.iter().enumerate() {
        if cell.is_empty() {
            parsed.push(None);
            continue;
        }
        let v = match &kind {
            ColumnKind::Categorical { levels } => levels
                .iter()
                .position(|l| l == cell)
                .map(|i| i as f64)
                .ok_or_else(|| Error::InvalidData {
                    column: name.clone(),
                    reason: format!("row {row}: unknown level `{cell}`"),
                })?,
            _ => cell.parse::<f64>().map_err(|_| Error::InvalidData {
                column: name.clone(),
                reason: format!("row {row}: `{cell}` is not a number"),
            })?,
        };
        parsed.push(Some(v));
    }
    Column::new(name, kind, parsed)
}

/// How MCAR masking is applied across the target columns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    /// A row keeps all targets or loses all of them.
    #[default]
    RowJoint,
    /// Each target cell is kept independently.
    PerCell,
}

/// Row-joint MCAR masking: each row is kept with probability `p_observed`;
/// in the other rows every target column is set MISSING.
pub fn mask_cells(ds: &Dataset, targets: &[&str], p_observed: f64, rng: &mut RngStream) -> Result<Dataset> {
    mask_cells_with(ds, targets, p_observed, MaskMode::RowJoint, rng)
}

pub fn mask_cells_with(
    ds: &Dataset,
    targets: &[&str],
    p_observed: f64,
    mode: MaskMode,
    rng: &mut RngStream,
) -> Result<Dataset> {
    if !(p_observed > 0.0 && p_observed <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "p_observed must lie in (0, 1], got {p_observed}"
        )));
    }
    let idx = targets
        .iter()
        .map(|t| ds.column_index(t))
        .collect::<Result<Vec<_>>>()?;
    let mut out = ds.clone();
    if p_observed == 1.0 {
        return Ok(out);
    }
    match mode {
        MaskMode::RowJoint => {
            for row in 0..ds.row_count {
                if rng.open01() >= p_observed {
                    for &j in &idx {
                        out.columns[j].observed[row] = false;
                    }
                }
            }
        }
        MaskMode::PerCell => {
            for &j in &idx {
                for row in 0..ds.row_count {
                    if rng.open01() >= p_observed {
                        out.columns[j].observed[row] = false;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Rows with no MISSING cell in any column, in original order.
pub fn complete_rows(ds: &Dataset) -> Dataset {
    let rows: Vec<usize> = (0..ds.row_count)
        .filter(|&r| ds.columns.iter().all(|c| c.observed[r]))
        .collect();
    ds.select_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.5).collect();
        let codes: Vec<usize> = (0..n).map(|i| i % 3).collect();
        Dataset::new(vec![
            Column::continuous("x", x.clone()).unwrap(),
            Column::continuous("z", x.iter().map(|v| v * v).collect()).unwrap(),
            Column::categorical("c", &["a", "b", "c"], &codes).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn invariants_rejected() {
        assert!(Column::categorical("c", &["a"], &[1]).is_err());
        assert!(Column::of_kind("d", ColumnKind::EventIndicator, vec![0.0, 2.0]).is_err());
        assert!(Column::of_kind("t", ColumnKind::EventTime, vec![-1.0]).is_err());
        let a = Column::continuous("a", vec![1.0]).unwrap();
        assert!(matches!(
            Dataset::new(vec![a.clone(), a.clone()]),
            Err(Error::DuplicateColumn(_))
        ));
        let b = Column::continuous("b", vec![1.0, 2.0]).unwrap();
        assert!(Dataset::new(vec![a, b]).is_err());
        let entry = Column::of_kind("e", ColumnKind::EntryTime, vec![1.0, 5.0]).unwrap();
        let exit = Column::of_kind("t", ColumnKind::EventTime, vec![2.0, 5.0]).unwrap();
        assert!(Dataset::new(vec![entry, exit]).is_err());
    }

    #[test]
    fn mask_full_observation_is_identity() {
        let ds = toy(50);
        let mut rng = RngStream::new(1, 0);
        let out = mask_cells(&ds, &["x", "c"], 1.0, &mut rng).unwrap();
        assert_eq!(out, ds);
        assert_eq!(out.n_missing(), 0);
    }

    #[test]
    fn mask_errors() {
        let ds = toy(5);
        let mut rng = RngStream::new(1, 0);
        assert!(matches!(
            mask_cells(&ds, &["nope"], 0.5, &mut rng),
            Err(Error::UnknownColumn(_))
        ));
        assert!(mask_cells(&ds, &["x"], 0.0, &mut rng).is_err());
        assert!(mask_cells(&ds, &["x"], 1.5, &mut rng).is_err());
    }

    #[test]
    fn mask_is_deterministic_and_row_joint() {
        let ds = toy(10);
        let a = mask_cells(&ds, &["x", "c"], 0.5, &mut RngStream::new(9, 3)).unwrap();
        let b = mask_cells(&ds, &["x", "c"], 0.5, &mut RngStream::new(9, 3)).unwrap();
        assert_eq!(a, b);
        let x = a.column("x").unwrap();
        let c = a.column("c").unwrap();
        assert_eq!(x.mask(), c.mask());
        assert_eq!(a.column("z").unwrap().n_missing(), 0);
    }

    #[test]
    fn mask_rate_matches_binomial() {
        let n = 100_000;
        let ds = Dataset::new(vec![Column::continuous("x", vec![1.0; n]).unwrap()]).unwrap();
        let out = mask_cells(&ds, &["x"], 0.05, &mut RngStream::new(2024, 1)).unwrap();
        let observed = n - out.n_missing();
        let sd = (n as f64 * 0.05 * 0.95).sqrt();
        assert!((observed as f64 - 5_000.0).abs() < 4.0 * sd, "{observed}");
    }

    #[test]
    fn per_cell_mode_masks_independently() {
        let ds = toy(2_000);
        let out = mask_cells_with(&ds, &["x", "z"], 0.5, MaskMode::PerCell, &mut RngStream::new(5, 0))
            .unwrap();
        assert_ne!(out.column("x").unwrap().mask(), out.column("z").unwrap().mask());
    }

    #[test]
    fn complete_rows_drops_incomplete() {
        let mut cells: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64)).collect();
        cells[2] = None;
        let mut other: Vec<Option<f64>> = (0..10).map(|i| Some(-(i as f64))).collect();
        other[7] = None;
        let ds = Dataset::new(vec![
            Column::new("a", ColumnKind::Continuous, cells).unwrap(),
            Column::new("b", ColumnKind::Continuous, other).unwrap(),
        ])
        .unwrap();
        let cc = complete_rows(&ds);
        assert_eq!(cc.row_count(), 8);
        let a: Vec<f64> = cc.column("a").unwrap().complete_values().unwrap().to_vec();
        assert_eq!(a, vec![0.0, 1.0, 3.0, 4.0, 5.0, 6.0, 8.0, 9.0]);
        let full = toy(6);
        assert_eq!(complete_rows(&full), full);
    }

    #[test]
    fn complete_rows_matches_mask() {
        let n = 100_000;
        let ds = toy(n);
        let masked = mask_cells(&ds, &["x", "c"], 0.2, &mut RngStream::new(77, 2)).unwrap();
        let flagged = masked.column("x").unwrap().mask().iter().filter(|o| **o).count();
        assert_eq!(complete_rows(&masked).row_count(), flagged);
    }

    #[test]
    fn csv_round_trip_preserves_missing_and_labels() {
        let ds = toy(7);
        let masked = mask_cells(&ds, &["x", "c"], 0.5, &mut RngStream::new(4, 4)).unwrap();
        let mut buf = Vec::new();
        masked.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,z,c\n"));
        let back = Dataset::read_csv(&buf[..], &[("c", ColumnKind::categorical(&["a", "b", "c"]))]).unwrap();
        for col in masked.columns() {
            let other = back.column(col.name()).unwrap();
            for r in 0..masked.row_count() {
                assert_eq!(col.get(r), other.get(r));
            }
        }
    }
}
