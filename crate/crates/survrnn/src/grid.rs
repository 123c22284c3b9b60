//! Discrete time grid.
//!
//! Time is divided into `L` equal right-closed intervals
//! `V_l = (t_{l-1}, t_l]` with `t_l = l * interval_size` and `t_0 = 0`.
//! Every time-valued quantity in the crate (event times, observation times,
//! hazard/survival curves) is indexed by these intervals, 1-based.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    interval_size: f64,
    num_intervals: usize,
}

impl TimeGrid {
    pub fn new(interval_size: f64, num_intervals: usize) -> Result<Self> {
        if !(interval_size > 0.0) || !interval_size.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "interval_size must be positive and finite, got {interval_size}"
            )));
        }
        if num_intervals == 0 {
            return Err(Error::InvalidArgument(
                "num_intervals must be at least 1".into(),
            ));
        }
        Ok(Self {
            interval_size,
            num_intervals,
        })
    }

    pub fn interval_size(&self) -> f64 {
        self.interval_size
    }

    /// Number of intervals `L`.
    pub fn num_intervals(&self) -> usize {
        self.num_intervals
    }

    /// Boundary `t_l = l * interval_size`; `boundary(0) == 0.0`.
    pub fn boundary(&self, l: usize) -> f64 {
        l as f64 * self.interval_size
    }

    /// Upper end of the grid, `t_L`.
    pub fn horizon(&self) -> f64 {
        self.boundary(self.num_intervals)
    }

    /// Maps a time to the 1-based index of the interval containing it,
    /// i.e. the unique `l` with `t_{l-1} < t <= t_l`. Boundary values map to
    /// the interval they close.
    pub fn bucketize(&self, t: f64) -> Result<usize> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidTime(t));
        }
        if t > self.horizon() {
            return Err(Error::OutOfGrid {
                time: t,
                horizon: self.horizon(),
            });
        }
        let mut l = ((t / self.interval_size).ceil() as usize).max(1);
        // Float rounding near a boundary can land one interval off; nudge so
        // that the postcondition holds against the computed boundaries.
        while l > 1 && t <= self.boundary(l - 1) {
            l -= 1;
        }
        while l < self.num_intervals && t > self.boundary(l) {
            l += 1;
        }
        Ok(l.min(self.num_intervals))
    }
}
