//! Synthetic loss streams.
//!
//! Every model is written in the maximization convention: `ℓ_t(θ)` is a
//! log-likelihood and the optimizers climb it. Each stream is materialized
//! once from `(kind, seed, horizon)` and is immutable afterwards, so replays,
//! oracles and concurrent runs all read the exact same samples.
//!
//! | model      | `ℓ_t(θ)`                   | `∂_θ ℓ_t`        | `∂²_θ ℓ_t · v`   |
//! |------------|----------------------------|------------------|------------------|
//! | Gaussian   | `−½(x_t − θ)²`             | `x_t − θ`        | `−v`             |
//! | Bernoulli  | `θ x_t − ln(1 + e^θ)`      | `x_t − σ(θ)`     | `−σ(1−σ) v`      |
//! | Regression | `−½(y_t − θ·x_t)²`         | `(y_t − θ·x_t)x_t` | `−(x_t·v) x_t` |
//! | Quadratic  | `−α θ²/2`                  | `−α θ`           | `−α v`           |

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};

use crate::error::{LlrError, Result};

/// Dense parameter vector `θ ∈ ℝⁿ`.
pub type ParamVector = DVector<f64>;

/// Clamp applied to the empirical Bernoulli frequency before taking the logit.
pub const BERNOULLI_ML_CLAMP: f64 = 1e-6;

/// Mixing matrices whose condition number exceeds this are redrawn.
pub const MAX_MIXING_CONDITION: f64 = 1e6;

const MAX_MIXING_ATTEMPTS: usize = 100;

/// Which synthetic model generates the stream, with its generative parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// One-dimensional Gaussian with unit-variance likelihood; data drawn
    /// from `N(mean, sd²)`.
    Gaussian { mean: f64, sd: f64 },
    /// Bernoulli in logit parameterization; data drawn with success rate `p`.
    Bernoulli { p: f64 },
    /// Linear regression `y = first coordinate of z`, `x = M z`, `z ~ N(0, I)`.
    Regression { dim: usize },
    /// Deterministic `−α θ²/2`.
    Quadratic { alpha: f64 },
}

impl ModelKind {
    pub fn gaussian() -> Self {
        Self::Gaussian { mean: 5.0, sd: 2.0 }
    }

    pub fn bernoulli() -> Self {
        Self::Bernoulli { p: 0.3 }
    }

    pub fn regression() -> Self {
        Self::Regression { dim: 50 }
    }

    pub fn quadratic(alpha: f64) -> Self {
        Self::Quadratic { alpha }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Regression { dim } => *dim,
            _ => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::Bernoulli { .. } => "bernoulli",
            Self::Regression { .. } => "regression",
            Self::Quadratic { .. } => "quadratic",
        }
    }

    /// Sample counts used by the reference experiments.
    pub fn default_horizon(&self) -> usize {
        match self {
            Self::Regression { .. } => 7500,
            Self::Quadratic { .. } => 5000,
            _ => 2500,
        }
    }

    /// Starting point of the experiments. The origin, except for the
    /// Bernoulli model which starts at `θ = 2` (success rate ≈ 0.88), on the
    /// far side of the generating `logit(0.3) ≈ −0.85`, and the quadratic
    /// which starts at `θ = 1` away from its maximizer.
    pub fn default_theta0(&self) -> ParamVector {
        match self {
            Self::Bernoulli { .. } => ParamVector::from_element(1, 2.0),
            Self::Quadratic { .. } => ParamVector::from_element(1, 1.0),
            _ => ParamVector::zeros(self.dim()),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Self::Bernoulli { p } => p > 0.0 && p < 1.0,
            Self::Regression { dim } => dim >= 1,
            Self::Quadratic { alpha } => alpha.is_finite() && alpha > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(LlrError::InvalidParameter(format!("invalid model parameters: {self:?}")))
        }
    }
}

/// One observation of a stream.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Scalar(f64),
    Bit(bool),
    Pair { x: ParamVector, y: f64 },
    /// The quadratic model has no data.
    Deterministic,
}

#[derive(Debug, Clone)]
enum StreamData {
    Scalars(Vec<f64>),
    Bits(Vec<bool>),
    Regression { mixing: DMatrix<f64>, xs: Vec<ParamVector>, ys: Vec<f64> },
    Deterministic,
}

/// A materialized, seeded sequence of objectives `ℓ_0, …, ℓ_{T−1}`.
#[derive(Debug, Clone)]
pub struct LossStream {
    kind: ModelKind,
    seed: u64,
    horizon: usize,
    data: StreamData,
}

impl LossStream {
    /// Draws `horizon` samples for `kind` from a ChaCha8 generator seeded
    /// with `seed`.
    pub fn generate(kind: ModelKind, seed: u64, horizon: usize) -> Result<Self> {
        kind.validate()?;
        if horizon == 0 {
            return Err(LlrError::InvalidParameter("horizon must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = match kind {
            ModelKind::Gaussian { mean, sd } => StreamData::Scalars(
                (0..horizon)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        mean + sd * z
                    })
                    .collect(),
            ),
            ModelKind::Bernoulli { p } => {
                let dist = Bernoulli::new(p).map_err(|e| LlrError::InvalidParameter(e.to_string()))?;
                StreamData::Bits((0..horizon).map(|_| dist.sample(&mut rng)).collect())
            }
            ModelKind::Regression { dim } => {
                let mixing = draw_mixing(dim, &mut rng)?;
                let mut xs = Vec::with_capacity(horizon);
                let mut ys = Vec::with_capacity(horizon);
                for _ in 0..horizon {
                    let z = ParamVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
                    xs.push(&mixing * &z);
                    ys.push(z[0]);
                }
                StreamData::Regression { mixing, xs, ys }
            }
            ModelKind::Quadratic { .. } => StreamData::Deterministic,
        };
        Ok(Self { kind, seed, horizon, data })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn sample(&self, t: usize) -> Result<Sample> {
        self.check_time(t)?;
        Ok(match &self.data {
            StreamData::Scalars(xs) => Sample::Scalar(xs[t]),
            StreamData::Bits(xs) => Sample::Bit(xs[t]),
            StreamData::Regression { xs, ys, .. } => Sample::Pair { x: xs[t].clone(), y: ys[t] },
            StreamData::Deterministic => Sample::Deterministic,
        })
    }

    /// All `T` samples in order.
    pub fn samples(&self) -> Vec<Sample> {
        (0..self.horizon).map(|t| self.sample(t).expect("t < horizon")).collect()
    }

    /// The fixed mixing matrix `M` of the regression model.
    pub fn mixing(&self) -> Option<&DMatrix<f64>> {
        match &self.data {
            StreamData::Regression { mixing, .. } => Some(mixing),
            _ => None,
        }
    }

    /// Parameter maximizing every `ℓ_t` when the model is well specified:
    /// first row of `M⁻¹` for the regression, `0` for the quadratic.
    pub fn optimum(&self) -> Option<ParamVector> {
        match (&self.kind, &self.data) {
            (ModelKind::Regression { .. }, StreamData::Regression { mixing, .. }) => {
                let inv = mixing.clone().try_inverse()?;
                Some(inv.row(0).transpose())
            }
            (ModelKind::Quadratic { .. }, _) => Some(ParamVector::zeros(1)),
            _ => None,
        }
    }

    /// Scalar summary of `θ` for traces: `θ` itself in one dimension, the
    /// first entry of `θᵀ M` for the regression (which is `1` at the optimum).
    pub fn report_theta(&self, theta: &ParamVector) -> f64 {
        match &self.data {
            StreamData::Regression { mixing, .. } => theta.dot(&mixing.column(0)),
            _ => theta[0],
        }
    }

    pub fn check_dim(&self, v: &ParamVector) -> Result<()> {
        if v.len() == self.dim() {
            Ok(())
        } else {
            Err(LlrError::DimensionMismatch { expected: self.dim(), got: v.len() })
        }
    }

    pub(crate) fn check_time(&self, t: usize) -> Result<()> {
        if t < self.horizon {
            Ok(())
        } else {
            Err(LlrError::TimeOutOfRange { t, horizon: self.horizon })
        }
    }

    /// `(ℓ_t(θ), ∂_θ ℓ_t(θ))`.
    pub fn loss_and_grad(&self, t: usize, theta: &ParamVector) -> Result<(f64, ParamVector)> {
        self.check_time(t)?;
        self.check_dim(theta)?;
        Ok((self.loss_unchecked(t, theta), self.grad_unchecked(t, theta)))
    }

    pub fn loss(&self, t: usize, theta: &ParamVector) -> Result<f64> {
        self.check_time(t)?;
        self.check_dim(theta)?;
        Ok(self.loss_unchecked(t, theta))
    }

    pub fn grad(&self, t: usize, theta: &ParamVector) -> Result<ParamVector> {
        self.check_time(t)?;
        self.check_dim(theta)?;
        Ok(self.grad_unchecked(t, theta))
    }

    /// Exact `∂²_θ ℓ_t(θ) · v`.
    pub fn hessian_vec(&self, t: usize, theta: &ParamVector, v: &ParamVector) -> Result<ParamVector> {
        self.check_time(t)?;
        self.check_dim(theta)?;
        self.check_dim(v)?;
        Ok(self.hessian_vec_unchecked(t, theta, v))
    }

    pub(crate) fn loss_unchecked(&self, t: usize, theta: &ParamVector) -> f64 {
        match (&self.kind, &self.data) {
            (_, StreamData::Scalars(xs)) => {
                let r = xs[t] - theta[0];
                -0.5 * r * r
            }
            (_, StreamData::Bits(xs)) => {
                let th = theta[0];
                th * bit(xs[t]) - softplus(th)
            }
            (_, StreamData::Regression { xs, ys, .. }) => {
                let r = ys[t] - theta.dot(&xs[t]);
                -0.5 * r * r
            }
            (ModelKind::Quadratic { alpha }, _) => -alpha * theta[0] * theta[0] / 2.0,
            _ => unreachable!("stream data always matches its kind"),
        }
    }

    pub(crate) fn grad_unchecked(&self, t: usize, theta: &ParamVector) -> ParamVector {
        match (&self.kind, &self.data) {
            (_, StreamData::Scalars(xs)) => ParamVector::from_element(1, xs[t] - theta[0]),
            (_, StreamData::Bits(xs)) => ParamVector::from_element(1, bit(xs[t]) - sigmoid(theta[0])),
            (_, StreamData::Regression { xs, ys, .. }) => {
                let r = ys[t] - theta.dot(&xs[t]);
                &xs[t] * r
            }
            (ModelKind::Quadratic { alpha }, _) => ParamVector::from_element(1, -alpha * theta[0]),
            _ => unreachable!("stream data always matches its kind"),
        }
    }

    pub(crate) fn hessian_vec_unchecked(&self, t: usize, theta: &ParamVector, v: &ParamVector) -> ParamVector {
        match (&self.kind, &self.data) {
            (_, StreamData::Scalars(_)) => -v,
            (_, StreamData::Bits(_)) => {
                let s = sigmoid(theta[0]);
                v * (-(s * (1.0 - s)))
            }
            (_, StreamData::Regression { xs, .. }) => &xs[t] * (-xs[t].dot(v)),
            (ModelKind::Quadratic { alpha }, _) => v * (-alpha),
            _ => unreachable!("stream data always matches its kind"),
        }
    }

    /// Writes the samples as CSV, one row per `t`. Regression rows carry the
    /// `x` coordinates followed by `y`.
    pub fn write_samples_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        match &self.data {
            StreamData::Scalars(_) | StreamData::Bits(_) => header.push("x".into()),
            StreamData::Regression { .. } => {
                header.extend((0..self.dim()).map(|i| format!("x{i}")));
                header.push("y".into());
            }
            StreamData::Deterministic => {}
        }
        w.write_record(&header)?;
        for t in 0..self.horizon {
            let mut row = vec![t.to_string()];
            match &self.data {
                StreamData::Scalars(xs) => row.push(crate::harness::fmt_f64(xs[t])),
                StreamData::Bits(xs) => row.push(u8::from(xs[t]).to_string()),
                StreamData::Regression { xs, ys, .. } => {
                    row.extend(xs[t].iter().map(|v| crate::harness::fmt_f64(*v)));
                    row.push(crate::harness::fmt_f64(ys[t]));
                }
                StreamData::Deterministic => {}
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Deterministic stream `ℓ_t(θ) = −α θ²/2` with the given horizon.
pub fn quadratic_stream(alpha: f64, horizon: usize) -> Result<LossStream> {
    LossStream::generate(ModelKind::Quadratic { alpha }, 0, horizon)
}

fn draw_mixing(dim: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    for _ in 0..MAX_MIXING_ATTEMPTS {
        let m = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut *rng));
        let sv = m.singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        if lo > 0.0 && hi / lo <= MAX_MIXING_CONDITION {
            return Ok(m);
        }
    }
    Err(LlrError::SingularMatrix(MAX_MIXING_ATTEMPTS))
}

#[inline]
fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Running maximum-likelihood estimate on samples `0..=t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlEstimate {
    pub theta: ParamVector,
    /// False when the estimator had to be regularized: Bernoulli frequency
    /// clamped away from 0 or 1, or a rank-deficient regression Gram matrix.
    pub defined: bool,
}

/// Incremental accumulator behind [`running_ml`] and [`running_ml_path`].
#[derive(Debug, Clone)]
struct MlAccumulator {
    count: usize,
    sum: f64,
    gram: Option<DMatrix<f64>>,
    moment: Option<ParamVector>,
}

impl MlAccumulator {
    fn new(stream: &LossStream) -> Self {
        let dim = stream.dim();
        let regression = matches!(stream.data, StreamData::Regression { .. });
        Self {
            count: 0,
            sum: 0.0,
            gram: regression.then(|| DMatrix::zeros(dim, dim)),
            moment: regression.then(|| ParamVector::zeros(dim)),
        }
    }

    fn push(&mut self, stream: &LossStream, t: usize) {
        self.count += 1;
        match &stream.data {
            StreamData::Scalars(xs) => self.sum += xs[t],
            StreamData::Bits(xs) => self.sum += bit(xs[t]),
            StreamData::Regression { xs, ys, .. } => {
                let x = &xs[t];
                if let Some(g) = self.gram.as_mut() {
                    g.ger(1.0, x, x, 1.0);
                }
                if let Some(m) = self.moment.as_mut() {
                    m.axpy(ys[t], x, 1.0);
                }
            }
            StreamData::Deterministic => {}
        }
    }

    fn estimate(&self, stream: &LossStream) -> MlEstimate {
        let n = self.count as f64;
        match &stream.data {
            StreamData::Scalars(_) => MlEstimate { theta: ParamVector::from_element(1, self.sum / n), defined: true },
            StreamData::Bits(_) => {
                let freq = self.sum / n;
                let defined = freq > 0.0 && freq < 1.0;
                let p = freq.clamp(BERNOULLI_ML_CLAMP, 1.0 - BERNOULLI_ML_CLAMP);
                MlEstimate { theta: ParamVector::from_element(1, (p / (1.0 - p)).ln()), defined }
            }
            StreamData::Regression { .. } => {
                let gram = self.gram.as_ref().expect("regression accumulator");
                let moment = self.moment.as_ref().expect("regression accumulator");
                solve_normal_equations(gram, moment, self.count)
            }
            StreamData::Deterministic => MlEstimate { theta: ParamVector::zeros(1), defined: true },
        }
    }
}

fn solve_normal_equations(gram: &DMatrix<f64>, moment: &ParamVector, count: usize) -> MlEstimate {
    let dim = gram.nrows();
    if count >= dim {
        if let Some(chol) = gram.clone().cholesky() {
            let theta = chol.solve(moment);
            if theta.iter().all(|v| v.is_finite()) {
                return MlEstimate { theta, defined: true };
            }
        }
    }
    let ridge = 1e-10 * gram.trace() / dim as f64;
    let mut reg = gram.clone();
    for i in 0..dim {
        reg[(i, i)] += ridge;
    }
    let theta = reg
        .cholesky()
        .map(|c| c.solve(moment))
        .unwrap_or_else(|| ParamVector::zeros(dim));
    MlEstimate { theta, defined: false }
}

/// Maximum-likelihood estimate fitted on samples `0..=t`.
pub fn running_ml(stream: &LossStream, t: usize) -> Result<MlEstimate> {
    stream.check_time(t)?;
    let mut acc = MlAccumulator::new(stream);
    for s in 0..=t {
        acc.push(stream, s);
    }
    Ok(acc.estimate(stream))
}

/// [`running_ml`] for every `t < T`, computed incrementally.
pub fn running_ml_path(stream: &LossStream) -> Vec<MlEstimate> {
    let mut acc = MlAccumulator::new(stream);
    (0..stream.horizon())
        .map(|t| {
            acc.push(stream, t);
            acc.estimate(stream)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pv(x: f64) -> ParamVector {
        ParamVector::from_element(1, x)
    }

    fn scalar_stream(kind: ModelKind, xs: Vec<f64>) -> LossStream {
        let horizon = xs.len();
        let data = match kind {
            ModelKind::Bernoulli { .. } => StreamData::Bits(xs.iter().map(|&x| x == 1.0).collect()),
            _ => StreamData::Scalars(xs),
        };
        LossStream { kind, seed: 0, horizon, data }
    }

    #[test]
    fn gaussian_loss_and_grad() {
        let s = scalar_stream(ModelKind::gaussian(), vec![5.0, 2.0]);
        let (l, g) = s.loss_and_grad(0, &pv(5.0)).unwrap();
        assert_eq!((l, g[0]), (0.0, 0.0));
        let (l, g) = s.loss_and_grad(1, &pv(0.0)).unwrap();
        assert_eq!((l, g[0]), (-2.0, 2.0));
        assert_eq!(s.hessian_vec(1, &pv(3.0), &pv(1.0)).unwrap()[0], -1.0);
    }

    #[test]
    fn bernoulli_loss_and_grad() {
        let s = scalar_stream(ModelKind::bernoulli(), vec![1.0]);
        let (l, g) = s.loss_and_grad(0, &pv(0.0)).unwrap();
        assert_relative_eq!(l, -std::f64::consts::LN_2, epsilon = 1e-15);
        assert_eq!(g[0], 0.5);
        assert_eq!(s.hessian_vec(0, &pv(0.0), &pv(1.0)).unwrap()[0], -0.25);
        // large logits stay finite
        assert!(s.loss(0, &pv(800.0)).unwrap().is_finite());
        assert!(s.loss(0, &pv(-800.0)).unwrap().is_finite());
    }

    #[test]
    fn quadratic_values() {
        let s = quadratic_stream(1e8, 3).unwrap();
        assert_eq!(s.grad(0, &pv(0.0)).unwrap()[0], 0.0);
        assert_eq!(s.hessian_vec(2, &pv(0.3), &pv(1.0)).unwrap()[0], -1e8);
        let q = quadratic_stream(1.0, 1).unwrap();
        let (l, g) = q.loss_and_grad(0, &pv(2.0)).unwrap();
        assert_eq!((l, g[0]), (-2.0, -2.0));
        assert!(quadratic_stream(0.0, 1).is_err());
    }

    #[test]
    fn quadratic_stability_edge() {
        // |1 − αη/f| < 1  ⇔  η/(2f) < 1/α
        let alpha = 3.0;
        let f = 2.0;
        let s = quadratic_stream(alpha, 1).unwrap();
        let theta = pv(1.0);
        let g = s.grad(0, &theta).unwrap()[0];
        for eta in [0.1f64, 0.5, 1.0, 1.3, 1.4, 2.0] {
            let contracting = (1.0 + eta / f * g).abs() < 1.0;
            assert_eq!(contracting, eta / (2.0 * f) < 1.0 / alpha, "eta = {eta}");
        }
    }

    #[test]
    fn errors_on_mismatch() {
        let s = LossStream::generate(ModelKind::regression(), 3, 5).unwrap();
        assert!(matches!(
            s.loss_and_grad(0, &pv(0.0)),
            Err(LlrError::DimensionMismatch { expected: 50, got: 1 })
        ));
        assert!(matches!(s.grad(5, &ParamVector::zeros(50)), Err(LlrError::TimeOutOfRange { .. })));
        let z = ParamVector::zeros(50);
        assert!(s.hessian_vec(0, &z, &pv(1.0)).is_err());
        assert!(LossStream::generate(ModelKind::gaussian(), 0, 0).is_err());
        assert!(LossStream::generate(ModelKind::Bernoulli { p: 1.5 }, 0, 3).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        for kind in [ModelKind::gaussian(), ModelKind::bernoulli(), ModelKind::regression()] {
            let a = LossStream::generate(kind.clone(), 42, 60).unwrap();
            let b = LossStream::generate(kind, 42, 60).unwrap();
            assert_eq!(a.samples(), b.samples());
        }
        let a = LossStream::generate(ModelKind::gaussian(), 1, 10).unwrap();
        let b = LossStream::generate(ModelKind::gaussian(), 2, 10).unwrap();
        assert_ne!(a.samples(), b.samples());
    }

    #[test]
    fn gaussian_sample_mean() {
        let s = LossStream::generate(ModelKind::gaussian(), 7, 2500).unwrap();
        let samples = s.samples();
        assert_eq!(samples.len(), 2500);
        let mean: f64 = samples
            .iter()
            .map(|x| match x {
                Sample::Scalar(v) => *v,
                _ => unreachable!(),
            })
            .sum::<f64>()
            / 2500.0;
        assert!((mean - 5.0).abs() < 4.0 * 2.0 / 50.0, "mean {mean}");
    }

    #[test]
    fn bernoulli_frequency() {
        let s = LossStream::generate(ModelKind::bernoulli(), 7, 2500).unwrap();
        let ones = s.samples().iter().filter(|x| matches!(x, Sample::Bit(true))).count();
        let freq = ones as f64 / 2500.0;
        assert!((freq - 0.3).abs() < 4.0 * (0.21f64 / 2500.0).sqrt(), "freq {freq}");
    }

    #[test]
    fn regression_pair_construction() {
        let s = LossStream::generate(ModelKind::regression(), 11, 20).unwrap();
        let m = s.mixing().unwrap();
        let theta_star = s.optimum().unwrap();
        // θ*ᵀ M = e₀ᵀ
        let proj = m.transpose() * &theta_star;
        assert_relative_eq!(proj[0], 1.0, epsilon = 1e-9);
        assert!(proj.rows(1, 49).amax() < 1e-9);
        assert_relative_eq!(s.report_theta(&theta_star), 1.0, epsilon = 1e-9);
        for t in 0..20 {
            let g = s.grad(t, &theta_star).unwrap();
            assert!(g.norm() <= 1e-10, "t={t} |g|={}", g.norm());
        }
        let sv = m.singular_values();
        assert!(sv.max() / sv.min() <= MAX_MIXING_CONDITION);
    }

    #[test]
    fn running_ml_gaussian() {
        let s = scalar_stream(ModelKind::gaussian(), vec![4.0, 6.0]);
        assert_eq!(running_ml(&s, 1).unwrap().theta[0], 5.0);
        let g = LossStream::generate(ModelKind::gaussian(), 5, 300).unwrap();
        let path = running_ml_path(&g);
        let mean = g
            .samples()
            .iter()
            .map(|x| match x {
                Sample::Scalar(v) => *v,
                _ => unreachable!(),
            })
            .sum::<f64>()
            / 300.0;
        assert_relative_eq!(path[299].theta[0], mean, epsilon = 1e-13);
        assert_eq!(running_ml(&g, 299).unwrap(), path[299]);
    }

    #[test]
    fn running_ml_bernoulli_clamp() {
        let s = scalar_stream(ModelKind::bernoulli(), vec![1.0, 1.0, 1.0, 0.0, 1.0]);
        let eps = BERNOULLI_ML_CLAMP;
        let clamped = ((1.0 - eps) / eps).ln();
        for t in 0..3 {
            let est = running_ml(&s, t).unwrap();
            assert!(!est.defined);
            assert_relative_eq!(est.theta[0], clamped, epsilon = 1e-9);
        }
        let est3 = running_ml(&s, 3).unwrap();
        assert!(est3.defined);
        assert_relative_eq!(est3.theta[0], 3f64.ln(), epsilon = 1e-12);
        let est4 = running_ml(&s, 4).unwrap();
        assert!(est4.theta[0] > est3.theta[0]);
        assert!(est3.theta[0] < clamped);
    }

    #[test]
    fn running_ml_regression_residual() {
        let s = LossStream::generate(ModelKind::regression(), 13, 120).unwrap();
        let path = running_ml_path(&s);
        assert!(!path[10].defined);
        assert!(!path[48].defined);
        let mut gram = DMatrix::zeros(50, 50);
        let mut moment = ParamVector::zeros(50);
        for t in 0..120 {
            if let Sample::Pair { x, y } = s.sample(t).unwrap() {
                gram += &x * x.transpose();
                moment += &x * y;
            }
            if t >= 49 {
                let est = &path[t];
                assert!(est.defined, "t = {t}");
                let residual = (&gram * &est.theta - &moment).norm();
                assert!(residual <= 1e-8 * moment.norm(), "t = {t} residual {residual}");
            }
        }
        // noiseless data: the estimator recovers the optimum once identifiable
        let opt = s.optimum().unwrap();
        assert!((&path[119].theta - opt).norm() < 1e-6);
    }

    #[test]
    fn samples_csv_layout() {
        let s = LossStream::generate(ModelKind::regression(), 1, 3).unwrap();
        let mut buf = Vec::new();
        s.write_samples_csv(&mut buf).unwrap();
        let mut r = csv::Reader::from_reader(buf.as_slice());
        assert_eq!(r.headers().unwrap().len(), 52);
        let rows: Vec<_> = r.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 3);
        if let Sample::Pair { x, y } = s.sample(2).unwrap() {
            assert_eq!(rows[2][1].parse::<f64>().unwrap(), x[0]);
            assert_eq!(rows[2][51].parse::<f64>().unwrap(), y);
        }
    }
}
