//! Time-dependent scalar coefficients with exact evaluation, definite
//! integrals from 0, and derivatives.
//!
//! Analytic kinds (constant, polynomial, sinusoid) are defined for all
//! t >= 0; sampled tables are defined on [0, last knot] with linear
//! interpolation and must start exactly at t = 0 so integrals from 0 are
//! well defined.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_zero() -> f64 {
    0.0
}

/// Scalar coefficient of time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CoefficientSchedule {
    /// s(t) = value.
    Constant { value: f64 },
    /// s(t) = coeffs[0] + coeffs[1] t + coeffs[2] t^2 + ...
    Polynomial { coeffs: Vec<f64> },
    /// s(t) = offset + amplitude * sin(omega t + phase).
    Sinusoid {
        amplitude: f64,
        omega: f64,
        #[serde(default = "default_zero")]
        phase: f64,
        #[serde(default = "default_zero")]
        offset: f64,
    },
    /// Piecewise-linear interpolation of (times, values) knots.
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl CoefficientSchedule {
    pub fn constant(value: f64) -> Self {
        CoefficientSchedule::Constant { value }
    }

    /// Checks structural invariants (finite parameters; for tables:
    /// strictly increasing knots starting at 0, matching value count).
    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            CoefficientSchedule::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidSchedule {
                        reason: "constant value must be finite".into(),
                    });
                }
            }
            CoefficientSchedule::Polynomial { coeffs } => {
                if coeffs.is_empty() || !finite(coeffs) {
                    return Err(Error::InvalidSchedule {
                        reason: "polynomial needs at least one finite coefficient".into(),
                    });
                }
            }
            CoefficientSchedule::Sinusoid {
                amplitude,
                omega,
                phase,
                offset,
            } => {
                if ![*amplitude, *omega, *phase, *offset].iter().all(|x| x.is_finite()) {
                    return Err(Error::InvalidSchedule {
                        reason: "sinusoid parameters must be finite".into(),
                    });
                }
            }
            CoefficientSchedule::Table { times, values } => {
                if times.len() < 2 {
                    return Err(Error::InvalidSchedule {
                        reason: "table needs at least two knots".into(),
                    });
                }
                if times.len() != values.len() {
                    return Err(Error::InvalidSchedule {
                        reason: format!(
                            "table has {} times but {} values",
                            times.len(),
                            values.len()
                        ),
                    });
                }
                if !finite(times) || !finite(values) {
                    return Err(Error::InvalidSchedule {
                        reason: "table knots must be finite".into(),
                    });
                }
                if times[0] != 0.0 {
                    return Err(Error::InvalidSchedule {
                        reason: "table must start at t = 0".into(),
                    });
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidSchedule {
                        reason: "table knots must be strictly increasing".into(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Upper end of the domain: infinite for analytic kinds, last knot
    /// for tables.
    pub fn horizon(&self) -> f64 {
        match self {
            CoefficientSchedule::Table { times, .. } => *times.last().unwrap_or(&0.0),
            _ => f64::INFINITY,
        }
    }

    fn check_horizon(&self, t: f64) -> Result<()> {
        let t_max = self.horizon();
        if !t.is_finite() || t < 0.0 || t > t_max {
            return Err(Error::OutsideHorizon { t, t_max });
        }
        Ok(())
    }

    /// Coefficient value at t. Exact for analytic kinds, linear
    /// interpolation for tables.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check_horizon(t)?;
        Ok(match self {
            CoefficientSchedule::Constant { value } => *value,
            CoefficientSchedule::Polynomial { coeffs } => {
                // Horner
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
            }
            CoefficientSchedule::Sinusoid {
                amplitude,
                omega,
                phase,
                offset,
            } => offset + amplitude * (omega * t + phase).sin(),
            CoefficientSchedule::Table { times, values } => {
                let idx = interval_index(times, t);
                let (t0, t1) = (times[idx], times[idx + 1]);
                let (v0, v1) = (values[idx], values[idx + 1]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        })
    }

    /// Definite integral from 0 to t. Closed form for analytic kinds,
    /// composite trapezoid on the knots for tables (exact for the
    /// piecewise-linear interpolant).
    pub fn integral(&self, t: f64) -> Result<f64> {
        self.check_horizon(t)?;
        Ok(match self {
            CoefficientSchedule::Constant { value } => value * t,
            CoefficientSchedule::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c * t.powi(k as i32 + 1) / (k as f64 + 1.0))
                .sum(),
            CoefficientSchedule::Sinusoid {
                amplitude,
                omega,
                phase,
                offset,
            } => {
                if *omega == 0.0 {
                    (offset + amplitude * phase.sin()) * t
                } else {
                    offset * t + amplitude * (phase.cos() - (omega * t + phase).cos()) / omega
                }
            }
            CoefficientSchedule::Table { times, values } => {
                let mut acc = 0.0;
                for w in 0..times.len() - 1 {
                    if times[w + 1] <= t {
                        acc += 0.5 * (values[w] + values[w + 1]) * (times[w + 1] - times[w]);
                    } else {
                        if times[w] < t {
                            let v_t = self.eval(t)?;
                            acc += 0.5 * (values[w] + v_t) * (t - times[w]);
                        }
                        break;
                    }
                }
                acc
            }
        })
    }

    /// Derivative at t: analytic for closed-form kinds; for tables, a
    /// central finite difference with h = 1e-6 * (last knot), shrunk at
    /// the domain boundary, and rejected exactly at a knot where the
    /// interpolant's one-sided slopes disagree.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        self.check_horizon(t)?;
        Ok(match self {
            CoefficientSchedule::Constant { .. } => 0.0,
            CoefficientSchedule::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64 * t.powi(k as i32 - 1))
                .sum(),
            CoefficientSchedule::Sinusoid {
                amplitude,
                omega,
                phase,
                ..
            } => amplitude * omega * (omega * t + phase).cos(),
            CoefficientSchedule::Table { times, .. } => {
                if times.iter().any(|&knot| knot == t) {
                    return Err(Error::DerivativeAtKnot { t });
                }
                let t_max = self.horizon();
                let h = (1e-6 * t_max).min(t).min(t_max - t);
                if h <= 0.0 {
                    return Err(Error::DerivativeAtKnot { t });
                }
                (self.eval(t + h)? - self.eval(t - h)?) / (2.0 * h)
            }
        })
    }
}

/// Index of the knot interval containing t (rightmost interval whose left
/// knot is <= t, clamped so t = last knot lands in the final interval).
fn interval_index(times: &[f64], t: f64) -> usize {
    let n = times.len();
    let mut idx = match times.binary_search_by(|k| k.partial_cmp(&t).unwrap()) {
        Ok(i) => i,
        Err(i) => i.saturating_sub(1),
    };
    if idx >= n - 1 {
        idx = n - 2;
    }
    idx
}
