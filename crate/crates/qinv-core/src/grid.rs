//! Uniform time grids for fixed-step propagation.

use crate::error::{Error, Result};

/// Uniform grid 0 = t_0 < t_1 < ... < t_steps = t_final.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !t_final.is_finite() || t_final <= 0.0 {
            return Err(Error::InvalidGrid {
                reason: format!("final time must be finite and positive, got {t_final}"),
            });
        }
        if steps == 0 {
            return Err(Error::InvalidGrid {
                reason: "step count must be positive".into(),
            });
        }
        Ok(TimeGrid { t_final, steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points, steps + 1.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// t_k = t_final * k / steps (computed fresh per index; no
    /// accumulated summation error).
    pub fn time(&self, k: usize) -> f64 {
        debug_assert!(k <= self.steps);
        self.t_final * k as f64 / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact() {
        let g = TimeGrid::new(2.0, 7).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(7), 2.0);
        assert_eq!(g.len(), 8);
    }

    #[test]
    fn dt_times_steps_reaches_t_final() {
        let g = TimeGrid::new(1.0, 3).unwrap();
        assert!((g.dt() * 3.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(TimeGrid::new(0.0, 5).is_err());
        assert!(TimeGrid::new(-1.0, 5).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(f64::NAN, 5).is_err());
    }

    #[test]
    fn times_vector_is_monotone() {
        let g = TimeGrid::new(1.5, 10).unwrap();
        let ts = g.times();
        assert_eq!(ts.len(), 11);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }
}
