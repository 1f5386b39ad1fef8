//! Rate schedules `f(t)` used as divisors in the parameter update and as the
//! hyper-rate `μ_t` of the step-size updates.
//!
//! The default schedule is `f(t) = √(t+2)·ln(t+3)`. It satisfies the
//! Robbins–Monro conditions: `Σ 1/f(t)` diverges while `Σ 1/f(t)²` converges.
//! Time is 0-based throughout the crate.

use crate::error::{LlrError, Result};

/// `√(t+2)·ln(t+3)`, the default rate.
///
/// ```
/// let f0 = llr::schedules::rate_f(0);
/// assert!((f0 - 2f64.sqrt() * 3f64.ln()).abs() < 1e-15);
/// ```
#[inline]
pub fn rate_f(t: usize) -> f64 {
    ((t + 2) as f64).sqrt() * ((t + 3) as f64).ln()
}

/// Hyper-rate on `log η`. Same closed form as [`rate_f`].
#[inline]
pub fn rate_mu(t: usize) -> f64 {
    rate_f(t)
}

/// A positive rate `t ↦ f(t)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RateSchedule {
    /// `√(t+2)·ln(t+3)`.
    #[default]
    SqrtLog,
    /// `f(t) = c` for every `t`.
    Constant(f64),
    /// Explicit values; indices past the end hold the last entry.
    Table(Vec<f64>),
}

impl RateSchedule {
    pub fn constant(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(LlrError::InvalidParameter(format!(
                "constant rate must be finite and positive, got {c}"
            )));
        }
        Ok(Self::Constant(c))
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(LlrError::InvalidParameter("empty rate table".into()));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(LlrError::InvalidParameter(format!(
                "rate table entries must be finite and positive, got {bad}"
            )));
        }
        Ok(Self::Table(values))
    }

    #[inline]
    pub fn eval(&self, t: usize) -> f64 {
        match self {
            Self::SqrtLog => rate_f(t),
            Self::Constant(c) => *c,
            Self::Table(values) => values[t.min(values.len() - 1)],
        }
    }
}

/// Partial sums `(Σ_{t<T} 1/f(t), Σ_{t<T} 1/f(t)²)`.
pub fn robbins_monro_partial_sums(schedule: &RateSchedule, horizon: usize) -> Result<(f64, f64)> {
    if horizon == 0 {
        return Err(LlrError::InvalidParameter("horizon must be at least 1".into()));
    }
    Ok((0..horizon).fold((0.0, 0.0), |(s1, s2), t| {
        let inv = 1.0 / schedule.eval(t);
        (s1 + inv, s2 + inv * inv)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(rate_f(0), 2f64.sqrt() * 3f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(rate_f(1), 3f64.sqrt() * 4f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(rate_f(1), 2.401_29, epsilon = 1e-3);
        assert!(rate_f(10) > rate_f(9));
    }

    #[test]
    fn partial_sums_small_horizons() {
        let s = RateSchedule::SqrtLog;
        let (a, b) = robbins_monro_partial_sums(&s, 1).unwrap();
        let f0 = 2f64.sqrt() * 3f64.ln();
        assert_relative_eq!(a, 1.0 / f0, epsilon = 1e-15);
        assert_relative_eq!(b, 1.0 / (f0 * f0), epsilon = 1e-15);
        assert_relative_eq!(a, 0.643_64, epsilon = 1e-4);
        assert_relative_eq!(b, 0.414_27, epsilon = 1e-4);
        let (a2, _) = robbins_monro_partial_sums(&s, 2).unwrap();
        assert_relative_eq!(a2, 1.0 / f0 + 1.0 / (3f64.sqrt() * 4f64.ln()), epsilon = 1e-15);
        assert_relative_eq!(a2, 0.643_64 + 0.416_44, epsilon = 1e-4);

        let c = RateSchedule::constant(1.0).unwrap();
        assert_eq!(robbins_monro_partial_sums(&c, 5).unwrap(), (5.0, 5.0));
    }

    #[test]
    fn divergent_versus_convergent_growth() {
        let s = RateSchedule::SqrtLog;
        let (a3, b3) = robbins_monro_partial_sums(&s, 1_000).unwrap();
        let (a4, b4) = robbins_monro_partial_sums(&s, 10_000).unwrap();
        assert!(a4 - a3 > 10.0 * (b4 - b3));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RateSchedule::constant(0.0).is_err());
        assert!(RateSchedule::constant(f64::NAN).is_err());
        assert!(RateSchedule::table(vec![]).is_err());
        assert!(RateSchedule::table(vec![1.0, -2.0]).is_err());
        assert!(robbins_monro_partial_sums(&RateSchedule::SqrtLog, 0).is_err());
    }

    #[test]
    fn table_holds_last_entry() {
        let s = RateSchedule::table(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.eval(1), 2.0);
        assert_eq!(s.eval(100), 3.0);
    }

    proptest::proptest! {
        #[test]
        fn sqrt_log_is_positive_and_increasing(t in 0usize..1_000_000) {
            let f = rate_f(t);
            proptest::prop_assert!(f > 0.0);
            proptest::prop_assert!(rate_f(t + 1) > f);
            proptest::prop_assert_eq!(f.to_bits(), rate_f(t).to_bits());
        }
    }
}
