//! Malliavin-weighted unbiased estimator of the ruin-probability gradient.
//!
//! For a scenario with at least one claim, define
//!
//! ```text
//! D = b r sum w(T_i) e^{r T_i} X_i
//! B = sum w'(T_i) - [sum w(T_i) (r w(T_i) + w'(T_i)) e^{r T_i} X_i] / [sum w(T_i) e^{r T_i} X_i]
//! W_p_j = u S_T^j B / D
//! W_b   = (c2 T - sum e^{r T_i} X_i) B / D - 1 / b
//! ```
//!
//! The vector `1_A 1_{U_T < 0} (W_p, W_b)` has expectation equal to the gradient
//! of `P(U_T < 0)` with respect to `(p, b)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::model::{self, ModelParams, ScenarioSample, Strategy};
use crate::numeric::{tanh_sinh, CompensatedSum, Quadrature};
use crate::rng::StreamKey;

/// Default exponent of the weight function.
pub const DEFAULT_EXPONENT: f64 = 0.125;

/// Smallest sample size accepted by [`lemma3_diagnostic`].
pub const LEMMA3_MIN_SAMPLES: usize = 10_000;

/// `w(t) = t^a (T - t)^a` on `[0, T]`, with `0 < a < 1/4` so that `w^{-1}` is in `L^4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightFunction {
    exponent: f64,
    horizon: f64,
    flip_derivative: bool,
}

impl WeightFunction {
    pub fn new(exponent: f64, horizon: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent < 0.25) {
            return Err(Error::InvalidParameter(format!(
                "weight exponent must lie in (0, 1/4), got {exponent}"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be > 0, got {horizon}"
            )));
        }
        Ok(WeightFunction {
            exponent,
            horizon,
            flip_derivative: false,
        })
    }

    /// Mutation hook: negates `w'`. Only for checking that diagnostics catch it.
    #[doc(hidden)]
    pub fn with_flipped_derivative(mut self) -> Self {
        self.flip_derivative = true;
        self
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn check(&self, t: f64) -> Result<()> {
        if t > 0.0 && t < self.horizon {
            Ok(())
        } else {
            Err(Error::WeightDomain {
                t,
                horizon: self.horizon,
            })
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.value_unchecked(t))
    }

    /// `w'(t) = a w(t) (1/t - 1/(T - t))`.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.derivative_unchecked(t, self.value_unchecked(t)))
    }

    #[inline]
    fn value_unchecked(&self, t: f64) -> f64 {
        (t * (self.horizon - t)).powf(self.exponent)
    }

    #[inline]
    fn derivative_unchecked(&self, t: f64, w: f64) -> f64 {
        let d = self.exponent * w * (1.0 / t - 1.0 / (self.horizon - t));
        if self.flip_derivative {
            -d
        } else {
            d
        }
    }

    /// `int_0^T w(t)^{-4} dt` by tanh-sinh quadrature.
    pub fn inverse_fourth_integral(&self) -> Quadrature {
        let power = -4.0 * self.exponent;
        tanh_sinh(
            |_, from_lo, from_hi| (from_lo * from_hi).powf(power),
            0.0,
            self.horizon,
            1e-13,
        )
    }
}

/// Per-scenario weights `(W_p, W_b)`, before multiplying by the ruin indicator.
#[derive(Clone, Debug, PartialEq)]
pub struct MalliavinWeights {
    pub w_p: Vec<f64>,
    pub w_b: f64,
}

/// Weights for retention `b`. The allocation does not enter the formulas.
pub fn malliavin_weights_at(
    params: &ModelParams,
    b: f64,
    scenario: &ScenarioSample,
    wf: &WeightFunction,
) -> Result<MalliavinWeights> {
    if !scenario.has_claims() {
        return Err(Error::NoClaims);
    }
    if !(b > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "retention must be positive, got {b}"
        )));
    }
    let r = params.r();
    let mut sum_w_prime = CompensatedSum::new();
    let mut sum_w_claim = CompensatedSum::new();
    let mut sum_mixed = CompensatedSum::new();
    let mut sum_claim = CompensatedSum::new();
    for (&t, &x) in scenario.jump_times.iter().zip(&scenario.claim_sizes) {
        wf.check(t)?;
        let w = wf.value_unchecked(t);
        let w_prime = wf.derivative_unchecked(t, w);
        let inflated = (r * t).exp() * x;
        sum_w_prime.add(w_prime);
        sum_w_claim.add(w * inflated);
        sum_mixed.add(w * (r * w + w_prime) * inflated);
        sum_claim.add(inflated);
    }
    let weighted = sum_w_claim.value();
    let bracket = sum_w_prime.value() - sum_mixed.value() / weighted;
    let ratio = bracket / (b * r * weighted);
    let w_p = scenario
        .asset_prices
        .iter()
        .map(|&s| params.u() * s * ratio)
        .collect();
    let w_b = (params.c2() * params.horizon() - sum_claim.value()) * ratio - 1.0 / b;
    Ok(MalliavinWeights { w_p, w_b })
}

pub fn malliavin_weights(
    params: &ModelParams,
    strategy: &Strategy,
    scenario: &ScenarioSample,
    wf: &WeightFunction,
) -> Result<MalliavinWeights> {
    malliavin_weights_at(params, strategy.b(), scenario, wf)
}

/// `1_A 1_{U_T < 0} (W_p, W_b)` for one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSample {
    values: Vec<f64>,
}

impl GradientSample {
    pub fn zero(m: usize) -> Self {
        GradientSample {
            values: vec![0.0; m + 1],
        }
    }

    pub fn from_parts(grad_p: Vec<f64>, grad_b: f64) -> Self {
        let mut values = grad_p;
        values.push(grad_b);
        GradientSample { values }
    }

    pub fn grad_p(&self) -> &[f64] {
        &self.values[..self.values.len() - 1]
    }

    pub fn grad_b(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Flattened `(grad_p, grad_b)`.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

pub fn gradient_sample(
    params: &ModelParams,
    strategy: &Strategy,
    scenario: &ScenarioSample,
    wf: &WeightFunction,
) -> Result<GradientSample> {
    gradient_sample_at(params, strategy.p(), strategy.b(), scenario, wf)
}

pub(crate) fn gradient_sample_at(
    params: &ModelParams,
    p: &[f64],
    b: f64,
    scenario: &ScenarioSample,
    wf: &WeightFunction,
) -> Result<GradientSample> {
    if !scenario.has_claims() || model::surplus_terminal_at(params, p, b, scenario)? >= 0.0 {
        return Ok(GradientSample::zero(p.len()));
    }
    let weights = malliavin_weights_at(params, b, scenario, wf)?;
    Ok(GradientSample::from_parts(weights.w_p, weights.w_b))
}

/// Mini-batch mean of gradient samples plus second-moment diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientEstimate {
    pub mean: Vec<f64>,
    pub batch_size: usize,
    /// Mean of `||G_i||^2` over the batch.
    pub sample_second_moment: f64,
    /// Largest share of `sum ||G_i||^2` owed to a single sample.
    pub max_sample_share: f64,
    /// Standard error of each mean component.
    pub std_errors: Vec<f64>,
    /// Number of samples with a nonzero contribution (ruin scenarios).
    pub nonzero: usize,
}

#[derive(Clone, Debug)]
struct Accumulator {
    sums: Vec<CompensatedSum>,
    squares: Vec<CompensatedSum>,
    norm_sq: CompensatedSum,
    max_norm_sq: f64,
    count: usize,
    nonzero: usize,
}

impl Accumulator {
    fn new(dim: usize) -> Self {
        Accumulator {
            sums: vec![CompensatedSum::new(); dim],
            squares: vec![CompensatedSum::new(); dim],
            norm_sq: CompensatedSum::new(),
            max_norm_sq: 0.0,
            count: 0,
            nonzero: 0,
        }
    }

    fn push(&mut self, sample: &GradientSample) {
        self.count += 1;
        if sample.is_zero() {
            return;
        }
        self.nonzero += 1;
        let mut norm_sq = 0.0;
        for ((s, q), &v) in self
            .sums
            .iter_mut()
            .zip(&mut self.squares)
            .zip(sample.as_slice())
        {
            s.add(v);
            q.add(v * v);
            norm_sq += v * v;
        }
        self.norm_sq.add(norm_sq);
        self.max_norm_sq = self.max_norm_sq.max(norm_sq);
    }

    fn merge(&mut self, other: Accumulator) {
        for (s, o) in self.sums.iter_mut().zip(other.sums) {
            s.merge(o);
        }
        for (s, o) in self.squares.iter_mut().zip(other.squares) {
            s.merge(o);
        }
        self.norm_sq.merge(other.norm_sq);
        self.max_norm_sq = self.max_norm_sq.max(other.max_norm_sq);
        self.count += other.count;
        self.nonzero += other.nonzero;
    }

    fn finish(self) -> GradientEstimate {
        let n = self.count as f64;
        let mean: Vec<f64> = self.sums.iter().map(|s| s.value() / n).collect();
        let std_errors = self
            .squares
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                if self.count < 2 {
                    return 0.0;
                }
                let var = (q.value() / n - m * m).max(0.0) * n / (n - 1.0);
                (var / n).sqrt()
            })
            .collect();
        let total = self.norm_sq.value();
        GradientEstimate {
            mean,
            batch_size: self.count,
            sample_second_moment: total / n,
            max_sample_share: if total > 0.0 {
                self.max_norm_sq / total
            } else {
                0.0
            },
            std_errors,
            nonzero: self.nonzero,
        }
    }
}

/// Component-wise mean over `batch`, summed in index order.
pub fn gradient_estimate(
    params: &ModelParams,
    strategy: &Strategy,
    batch: &[ScenarioSample],
    wf: &WeightFunction,
) -> Result<GradientEstimate> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("gradient batch is empty".into()));
    }
    let mut acc = Accumulator::new(strategy.dim());
    for scenario in batch {
        acc.push(&gradient_sample(params, strategy, scenario, wf)?);
    }
    Ok(acc.finish())
}

/// Averages precomputed samples in order.
pub fn average_samples(samples: &[GradientSample]) -> Result<GradientEstimate> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("gradient batch is empty".into()))?;
    let mut acc = Accumulator::new(first.as_slice().len());
    for s in samples {
        if s.as_slice().len() != first.as_slice().len() {
            return Err(Error::Shape {
                expected: first.as_slice().len(),
                got: s.as_slice().len(),
            });
        }
        acc.push(s);
    }
    Ok(acc.finish())
}

/// Gradient estimate over `n` fresh scenarios drawn from `base.index(0..n)`.
pub fn estimate_gradient(
    params: &ModelParams,
    strategy: &Strategy,
    wf: &WeightFunction,
    n: usize,
    base: StreamKey,
    exec: &Executor,
) -> Result<GradientEstimate> {
    estimate_gradient_at(params, strategy.p(), strategy.b(), wf, n, base, exec)
}

pub(crate) fn estimate_gradient_at(
    params: &ModelParams,
    p: &[f64],
    b: f64,
    wf: &WeightFunction,
    n: usize,
    base: StreamKey,
    exec: &Executor,
) -> Result<GradientEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("gradient batch is empty".into()));
    }
    let dim = p.len() + 1;
    let (acc, error) = exec.fold_chunks(
        n,
        || (Accumulator::new(dim), None::<Error>),
        |(acc, error), i| {
            if error.is_some() {
                return;
            }
            let scenario = model::sample_scenario(params, base.index(i as u64));
            match gradient_sample_at(params, p, b, &scenario, wf) {
                Ok(g) => acc.push(&g),
                Err(e) => *error = Some(e),
            }
        },
        |(acc, error), (part, part_error)| {
            acc.merge(part);
            if error.is_none() {
                *error = part_error;
            }
        },
    );
    match error {
        Some(e) => Err(e),
        None => Ok(acc.finish()),
    }
}

/// Monte Carlo check of `E[1_A sum w(T_i)^{-4}] = lambda int_0^T w^{-4}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lemma3Report {
    pub empirical_mean: f64,
    pub analytic_value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl Lemma3Report {
    /// `|empirical - analytic|` in units of the standard error.
    pub fn z_score(&self) -> f64 {
        (self.empirical_mean - self.analytic_value).abs() / self.std_error
    }
}

pub fn lemma3_diagnostic(
    params: &ModelParams,
    wf: &WeightFunction,
    n_samples: usize,
    base: StreamKey,
    exec: &Executor,
) -> Result<Lemma3Report> {
    if n_samples < LEMMA3_MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "identity check needs at least {LEMMA3_MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    let power = -4.0 * wf.exponent();
    let (sum, sum_sq) = exec.fold_chunks(
        n_samples,
        || (CompensatedSum::new(), CompensatedSum::new()),
        |(s, q), i| {
            let scenario = model::sample_scenario(params, base.index(i as u64));
            let value: f64 = scenario
                .jump_times
                .iter()
                .map(|&t| (t * (wf.horizon() - t)).powf(power))
                .sum();
            s.add(value);
            q.add(value * value);
        },
        |(s, q), (ps, pq)| {
            s.merge(ps);
            q.merge(pq);
        },
    );
    let n = n_samples as f64;
    let mean = sum.value() / n;
    let var = (sum_sq.value() / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(Lemma3Report {
        empirical_mean: mean,
        analytic_value: params.lambda() * wf.inverse_fourth_integral().value,
        std_error: (var / n).sqrt(),
        n_samples,
    })
}
