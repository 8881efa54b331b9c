use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metric values along a finite index ladder, with a tail summary standing in
/// for the limit superior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub index_grid: Vec<usize>,
    pub values: Vec<f64>,
    /// Maximum of the last `tail_window` values.
    pub tail_estimate: f64,
    pub tail_window: usize,
}

impl LadderReport {
    pub fn new(index_grid: Vec<usize>, values: Vec<f64>, tail_window: usize) -> Result<Self> {
        validate_grid(&index_grid, "index grid")?;
        if values.len() != index_grid.len() {
            return Err(Error::invalid(format!(
                "{} values for {} grid points",
                values.len(),
                index_grid.len()
            )));
        }
        validate_window(tail_window, index_grid.len())?;
        let tail_estimate = values[values.len() - tail_window..]
            .iter()
            .copied()
            .fold(0.0, f64::max);
        Ok(Self {
            index_grid,
            values,
            tail_estimate,
            tail_window,
        })
    }

    /// The trailing window of values.
    pub fn tail(&self) -> &[f64] {
        &self.values[self.values.len() - self.tail_window..]
    }

    /// True when the trailing window never increases.
    pub fn is_tail_non_increasing(&self) -> bool {
        self.tail().windows(2).all(|w| w[1] <= w[0])
    }
}

pub(crate) fn validate_grid(grid: &[usize], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(format!("{what} is empty")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!(
            "{what} must be strictly increasing"
        )));
    }
    Ok(())
}

pub(crate) fn validate_window(window: usize, len: usize) -> Result<()> {
    if window == 0 || window > len {
        return Err(Error::invalid(format!(
            "tail window {window} must lie in 1..={len}"
        )));
    }
    Ok(())
}
