//! The labeled input matrix shared by every stage.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary class label, `+1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Class {
    Positive,
    Negative,
}

impl Class {
    pub fn from_sign(v: i64) -> Option<Class> {
        match v {
            1 => Some(Class::Positive),
            -1 => Some(Class::Negative),
            _ => None,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Class::Positive => 1,
            Class::Negative => -1,
        }
    }
}

/// An `n x d` matrix of observations with one binary label per row.
///
/// Values are stored column-major, so each variable is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    values: DMatrix<f64>,
    labels: Vec<Class>,
    names: Vec<String>,
    n1: usize,
    n2: usize,
}

impl LabeledMatrix {
    /// Builds a matrix with default variable names `V1..Vd`.
    pub fn new(values: DMatrix<f64>, labels: Vec<Class>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|k| format!("V{k}")).collect();
        Self::with_names(values, labels, names)
    }

    pub fn with_names(values: DMatrix<f64>, labels: Vec<Class>, names: Vec<String>) -> Result<Self> {
        if values.nrows() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows but {} labels",
                values.nrows(),
                labels.len()
            )));
        }
        if names.len() != values.ncols() {
            return Err(Error::InvalidArgument(format!(
                "{} columns but {} variable names",
                values.ncols(),
                names.len()
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::IllPosed("matrix has no variables".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::IllPosed(format!(
                "non-finite value at row {}, column {}",
                row + 1,
                col + 1
            )));
        }
        let n1 = labels.iter().filter(|&&c| c == Class::Positive).count();
        let n2 = labels.len() - n1;
        if n1 < 2 || n2 < 2 {
            return Err(Error::IllPosed(format!(
                "each class needs at least 2 samples (got n1 = {n1}, n2 = {n2})"
            )));
        }
        Ok(LabeledMatrix {
            values,
            labels,
            names,
            n1,
            n2,
        })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[Class] {
        &self.labels
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Contiguous values of variable `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.values.as_slice()[j * n..(j + 1) * n]
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<LabeledMatrix> {
        let values = self.values.select_columns(cols);
        let names = cols.iter().map(|&c| self.names[c].clone()).collect();
        LabeledMatrix::with_names(values, self.labels.clone(), names)
    }

    /// Same values with a different label vector.
    pub fn relabel(&self, labels: Vec<Class>) -> Result<LabeledMatrix> {
        LabeledMatrix::with_names(self.values.clone(), labels, self.names.clone())
    }
}
