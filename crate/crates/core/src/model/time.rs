use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform partition `t0 = τ_0 < … < τ_{Nt−1} = T` of the depth horizon.
///
/// Controls are piecewise constant: interval `[τ_k, τ_{k+1})` uses the
/// measure stored at node `k`; the measure at the last node drives nothing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid<R> {
    pub t0: R,
    #[serde(rename = "t_end")]
    pub t_end: R,
    pub nodes: usize,
}

impl<R: Real> TimeGrid<R> {
    pub fn new(t0: R, t_end: R, nodes: usize) -> Result<Self> {
        let g = Self { t0, t_end, nodes };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 >= R::zero() && self.t0 < self.t_end && self.t_end.is_finite()) {
            return Err(Error::config("grid.t0", "need 0 ≤ t0 < t_end"));
        }
        if self.nodes < 2 {
            return Err(Error::config("grid.nodes", "need at least 2 nodes"));
        }
        Ok(())
    }

    pub fn dt(&self) -> R {
        (self.t_end - self.t0) / R::from_usize_lossy(self.nodes - 1)
    }

    pub fn time(&self, k: usize) -> R {
        if k + 1 == self.nodes {
            self.t_end
        } else {
            self.t0 + self.dt() * R::from_usize_lossy(k)
        }
    }

    pub fn horizon(&self) -> R {
        self.t_end - self.t0
    }

    /// Number of control intervals, `Nt − 1`.
    pub fn intervals(&self) -> usize {
        self.nodes - 1
    }

    /// Same horizon with `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            t0: self.t0,
            t_end: self.t_end,
            nodes: (self.nodes - 1) * factor + 1,
        }
    }

    /// Tail grid starting at node `k`.
    pub fn tail(&self, k: usize) -> Result<Self> {
        Self::new(self.time(k), self.t_end, self.nodes - k)
    }
}
