use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equally spaced discretisation of follow-up. Interval `k` is `(t_{k-1}, t_k]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub k_max: usize,
    pub delta_t: f64,
    #[serde(default)]
    pub origin: f64,
}

impl TimeGrid {
    pub fn new(k_max: usize, delta_t: f64, origin: f64) -> Result<Self> {
        let g = TimeGrid { k_max, delta_t, origin };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max < 1 {
            return Err(Error::InvalidGrid("k_max must be at least 1".into()));
        }
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            return Err(Error::InvalidGrid("delta_t must be positive".into()));
        }
        if !self.origin.is_finite() {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(())
    }

    /// Grid point `t_k`.
    pub fn time(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.delta_t
    }

    pub fn end(&self) -> f64 {
        self.time(self.k_max)
    }

    /// `t_0, ..., t_{k_max}`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.k_max).map(|k| self.time(k)).collect()
    }

    /// Interval containing `t`, closed on the right. Returns 0 for `t <= origin`.
    pub fn interval_of(&self, t: f64) -> usize {
        if t <= self.origin {
            return 0;
        }
        let mut k = ((t - self.origin) / self.delta_t).ceil().max(1.0) as usize;
        while k > 1 && t <= self.time(k - 1) {
            k -= 1;
        }
        while t > self.time(k) {
            k += 1;
        }
        k
    }

    /// Same horizon with `factor` times as many intervals.
    pub fn refine(&self, factor: usize) -> TimeGrid {
        TimeGrid {
            k_max: self.k_max * factor,
            delta_t: self.delta_t / factor as f64,
            origin: self.origin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_are_right_closed() {
        let g = TimeGrid::new(3, 0.1, 0.0).unwrap();
        for k in 1..=3 {
            assert_eq!(g.interval_of(g.time(k)), k);
        }
        assert_eq!(g.interval_of(0.05), 1);
        assert_eq!(g.interval_of(0.1000001), 2);
        assert_eq!(g.interval_of(0.0), 0);
    }

    #[test]
    fn halving_nests_grid_points() {
        let g = TimeGrid::new(10, 1.0, 0.0).unwrap();
        let mut fine = g;
        for _ in 0..4 {
            fine = fine.refine(2);
        }
        for k in 0..=10 {
            assert_eq!(fine.time(16 * k), g.time(k));
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(0, 1.0, 0.0).is_err());
        assert!(TimeGrid::new(2, 0.0, 0.0).is_err());
        assert!(TimeGrid::new(2, -1.0, 0.0).is_err());
    }
}
