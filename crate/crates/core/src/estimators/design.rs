use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};

pub const INTERCEPT: &str = "(Intercept)";

/// One input variable for a design matrix.
#[derive(Clone, Copy, Debug)]
pub struct DesignInput<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
    /// `Some(levels)` for categorical inputs stored as level indices.
    pub levels: Option<&'a [String]>,
}

/// Regression design: optional intercept, continuous inputs as-is and
/// categorical inputs dummy-coded against their first level.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    matrix: DMatrix<f64>,
    labels: Vec<String>,
}

impl DesignMatrix {
    pub fn new(matrix: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if matrix.ncols() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} columns",
                labels.len(),
                matrix.ncols()
            )));
        }
        Ok(DesignMatrix { matrix, labels })
    }

    /// Builds the design from the given inputs, restricted to `rows` when given.
    pub fn from_inputs(inputs: &[DesignInput<'_>], rows: Option<&[usize]>, intercept: bool) -> Self {
        let n = rows.map_or_else(|| inputs.first().map_or(0, |i| i.values.len()), <[usize]>::len);
        let mut labels = Vec::new();
        if intercept {
            labels.push(INTERCEPT.to_string());
        }
        for input in inputs {
            match input.levels {
                None => labels.push(input.name.to_string()),
                Some(levels) => labels.extend(levels[1..].iter().map(|l| format!("{}_{l}", input.name))),
            }
        }
        let mut m = DMatrix::zeros(n, labels.len());
        let mut j = 0;
        if intercept {
            m.column_mut(0).fill(1.0);
            j = 1;
        }
        let row_at = |i: usize| rows.map_or(i, |r| r[i]);
        for input in inputs {
            match input.levels {
                None => {
                    let mut col = m.column_mut(j);
                    for i in 0..n {
                        col[i] = input.values[row_at(i)];
                    }
                    j += 1;
                }
                Some(levels) => {
                    for i in 0..n {
                        let code = input.values[row_at(i)] as usize;
                        if code > 0 {
                            m[(i, j + code - 1)] = 1.0;
                        }
                    }
                    j += levels.len() - 1;
                }
            }
        }
        DesignMatrix { matrix: m, labels }
    }

    pub fn intercept_only(n: usize) -> Self {
        DesignMatrix {
            matrix: DMatrix::from_element(n, 1, 1.0),
            labels: vec![INTERCEPT.to_string()],
        }
    }

    /// Design over fully observed dataset columns.
    pub fn from_dataset(ds: &Dataset, columns: &[&str], intercept: bool) -> Result<Self> {
        let mut inputs = Vec::with_capacity(columns.len());
        for name in columns {
            let col = ds.column(name)?;
            let values = col.complete_values()?;
            let levels = match col.kind() {
                ColumnKind::Categorical { levels } => Some(levels.as_slice()),
                _ => None,
            };
            inputs.push(DesignInput { name, values, levels });
        }
        Ok(Self::from_inputs(&inputs, None, intercept))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix {
            matrix: self.matrix.select_rows(rows),
            labels: self.labels.clone(),
        }
    }

    /// Fails with [`Error::RankDeficient`] unless the columns are linearly
    /// independent (checked on the unit-diagonal scaled Gram matrix).
    pub fn check_rank(&self) -> Result<()> {
        let p = self.ncols();
        if p == 0 {
            return Ok(());
        }
        if self.nrows() < p {
            return Err(Error::RankDeficient);
        }
        let gram = self.matrix.tr_mul(&self.matrix);
        let d: Vec<f64> = (0..p).map(|j| gram[(j, j)]).collect();
        if d.iter().any(|&v| v <= 0.0) {
            return Err(Error::RankDeficient);
        }
        let scaled = DMatrix::from_fn(p, p, |i, j| gram[(i, j)] / (d[i] * d[j]).sqrt());
        let eig = SymmetricEigen::new(scaled).eigenvalues;
        let max = eig.iter().cloned().fold(f64::MIN, f64::max);
        let min = eig.iter().cloned().fold(f64::MAX, f64::min);
        if min <= 1e-11 * max {
            return Err(Error::RankDeficient);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;

    #[test]
    fn dummy_coding_against_first_level() {
        let ds = Dataset::new(vec![
            Column::continuous("a", vec![1.5, 2.5, 3.5, 0.5, 4.0]).unwrap(),
            Column::categorical("c", &["lo", "mid", "hi"], &[0, 2, 1, 1, 0]).unwrap(),
        ])
        .unwrap();
        let x = DesignMatrix::from_dataset(&ds, &["a", "c"], true).unwrap();
        assert_eq!(x.labels(), &["(Intercept)", "a", "c_mid", "c_hi"]);
        let m = x.matrix();
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.5, 0.0, 0.0]);
        assert_eq!(m.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.5, 0.0, 1.0]);
        assert_eq!(m.row(2).iter().copied().collect::<Vec<_>>(), vec![1.0, 3.5, 1.0, 0.0]);
        assert!(x.check_rank().is_ok());
    }

    #[test]
    fn rank_deficiency_detected() {
        let ds = Dataset::new(vec![
            Column::continuous("a", vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            Column::continuous("b", vec![2.0, 4.0, 6.0, 8.0]).unwrap(),
            Column::continuous("k", vec![3.0; 4]).unwrap(),
        ])
        .unwrap();
        let collinear = DesignMatrix::from_dataset(&ds, &["a", "b"], true).unwrap();
        assert!(matches!(collinear.check_rank(), Err(Error::RankDeficient)));
        let constant = DesignMatrix::from_dataset(&ds, &["k"], true).unwrap();
        assert!(matches!(constant.check_rank(), Err(Error::RankDeficient)));
    }

    #[test]
    fn missing_cells_rejected() {
        let ds = Dataset::new(vec![Column::new("a", ColumnKind::Continuous, vec![Some(1.0), None]).unwrap()]).unwrap();
        assert!(matches!(
            DesignMatrix::from_dataset(&ds, &["a"], true),
            Err(Error::MissingValues(_))
        ));
    }
}
