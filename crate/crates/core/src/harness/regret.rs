use crate::error::{LlrError, Result};
use crate::models::{running_ml_path, LossStream, ParamVector};

/// Running maximum-likelihood baseline of a stream.
///
/// Where the estimator is flagged undefined, the last defined estimate is
/// carried forward; before the first defined estimate the flagged value
/// itself is used and the row stays flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub thetas: Vec<ParamVector>,
    /// `ℓ_t(θ_ML,t)`.
    pub losses: Vec<f64>,
    /// False where the estimate was not defined at `t`.
    pub defined: Vec<bool>,
}

impl Baseline {
    pub fn compute(stream: &LossStream) -> Result<Self> {
        let path = running_ml_path(stream);
        let mut thetas = Vec::with_capacity(path.len());
        let mut defined = Vec::with_capacity(path.len());
        let mut last: Option<ParamVector> = None;
        for est in path {
            defined.push(est.defined);
            let theta = if est.defined {
                last = Some(est.theta.clone());
                est.theta
            } else {
                last.clone().unwrap_or(est.theta)
            };
            thetas.push(theta);
        }
        let losses = thetas.iter().enumerate().map(|(t, th)| stream.loss(t, th)).collect::<Result<Vec<_>>>()?;
        Ok(Self { thetas, losses, defined })
    }
}

/// `R_t = Σ_{s≤t} (ℓ_s(θ_ML,s) − ℓ_s(θ_s))` from per-step losses.
///
/// ```
/// let r = llr::harness::regret_difference(&[-1.0, -2.0], &[-0.5, -0.5]).unwrap();
/// assert_eq!(r, vec![0.5, 2.0]);
/// ```
pub fn regret_difference(losses: &[f64], ml_losses: &[f64]) -> Result<Vec<f64>> {
    if losses.len() != ml_losses.len() {
        return Err(LlrError::DimensionMismatch { expected: ml_losses.len(), got: losses.len() });
    }
    let mut acc = 0.0;
    Ok(losses
        .iter()
        .zip(ml_losses)
        .map(|(l, m)| {
            acc += m - l;
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use proptest::prelude::*;

    #[test]
    fn self_comparison_is_zero() {
        let stream = LossStream::generate(ModelKind::gaussian(), 3, 50).unwrap();
        let base = Baseline::compute(&stream).unwrap();
        let r = regret_difference(&base.losses, &base.losses).unwrap();
        assert!(r.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(regret_difference(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn bernoulli_carry_rule() {
        let stream = LossStream::generate(ModelKind::bernoulli(), 5, 200).unwrap();
        let base = Baseline::compute(&stream).unwrap();
        // The first sample alone always gives a degenerate frequency.
        assert!(!base.defined[0]);
        let first = base.defined.iter().position(|d| *d).unwrap();
        for t in first..200 {
            if !base.defined[t] {
                assert_eq!(base.thetas[t], base.thetas[t - 1]);
            }
        }
        assert!(base.losses.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn regression_prefix_is_flagged() {
        let stream = LossStream::generate(ModelKind::regression(), 2, 60).unwrap();
        let base = Baseline::compute(&stream).unwrap();
        assert!(base.defined[..49].iter().all(|d| !d));
        assert!(base.defined[49..].iter().all(|d| *d));
    }

    proptest! {
        #[test]
        fn monotone_exactly_when_baseline_dominates(pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..50)) {
            let (l, m): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let r = regret_difference(&l, &m).unwrap();
            for t in 1..r.len() {
                prop_assert_eq!(r[t] >= r[t - 1], m[t] - l[t] >= 0.0);
            }
        }
    }
}
