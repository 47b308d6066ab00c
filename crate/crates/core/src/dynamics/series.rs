use num_complex::Complex64;

use crate::error::{Error, Result};

/// What an [`ElementSeries`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeriesKind {
    Exact,
    Cluster,
    Irreducible,
    Product,
}

/// One central density-matrix element `ρ_ij(t)` on a time grid (ms).
#[derive(Debug, Clone, PartialEq)]
pub struct ElementSeries {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
    pub kind: SeriesKind,
    pub element: (usize, usize),
}

/// `n_points` equally spaced times from 0 to `t_max` inclusive.
pub fn uniform_grid(t_max: f64, n_points: usize) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(Error::invalid(format!("time grid needs at least 2 points, got {n_points}")));
    }
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::invalid(format!("t_max must be positive and finite, got {t_max}")));
    }
    let last = (n_points - 1) as f64;
    Ok((0..n_points).map(|k| t_max * k as f64 / last).collect())
}

pub(crate) fn check_grid(times: &[f64]) -> Result<()> {
    match times.first() {
        None => return Err(Error::invalid("time grid is empty")),
        Some(&t0) if t0 != 0.0 => {
            return Err(Error::invalid(format!("time grid must start at 0, starts at {t0}")))
        }
        _ => {}
    }
    if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(Error::invalid(format!(
            "time grid must be strictly increasing and finite ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

impl ElementSeries {
    pub fn new(
        times: Vec<f64>,
        values: Vec<Complex64>,
        kind: SeriesKind,
        element: (usize, usize),
    ) -> Result<Self> {
        check_grid(&times)?;
        if times.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        Ok(ElementSeries {
            times,
            values,
            kind,
            element,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_diagonal(&self) -> bool {
        self.element.0 == self.element.1
    }

    pub fn last(&self) -> Complex64 {
        *self.values.last().expect("series is never empty")
    }

    /// Values divided by `value(0)`.
    pub fn normalized(&self) -> Self {
        let v0 = self.values[0];
        let mut out = self.clone();
        if v0 != Complex64::from(0.0) {
            for v in &mut out.values {
                *v /= v0;
            }
        }
        out
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn same_grid(&self, other: &ElementSeries) -> bool {
        self.times == other.times
    }

    /// First grid index where a diagonal element leaves `[lo, hi]` (or an
    /// off-diagonal magnitude exceeds `hi`).
    pub fn first_unphysical(&self, lo: f64, hi: f64) -> Option<usize> {
        self.values.iter().position(|z| {
            if self.is_diagonal() {
                z.re < lo || z.re > hi
            } else {
                z.norm() > hi
            }
        })
    }

    /// Mean of `|self − other|` over the grid.
    pub fn mean_abs_error(&self, other: &ElementSeries) -> Result<f64> {
        if !self.same_grid(other) {
            return Err(Error::invalid("series are on different time grids"));
        }
        let n = self.len() as f64;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).sum::<f64>() / n)
    }

    /// Largest `|self − other|` over the grid.
    pub fn max_abs_error(&self, other: &ElementSeries) -> Result<f64> {
        if !self.same_grid(other) {
            return Err(Error::invalid("series are on different time grids"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm())))
    }
}
