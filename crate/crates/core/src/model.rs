//! Surplus model: compound Poisson claims with constant inflation, proportional
//! reinsurance, and a static allocation of the initial surplus across assets.
//!
//! Terminal surplus under strategy `(p, b)`:
//!
//! ```text
//! U_T = u <p, S_T> + c1 T - (1 - b) c2 T - sum_{i <= N_T} b e^{r T_i} X_i
//! ```

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamKey;

/// Tolerance on `sum(p) == 1` for feasible allocations.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Claim-size law. Only the gamma family ships.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClaimDistribution {
    /// Gamma law with density proportional to `x^(shape-1) e^(-x/scale)`.
    Gamma { shape: f64, scale: f64 },
}

impl ClaimDistribution {
    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) || !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma claim law needs shape > 0 and scale > 0, got shape={shape}, scale={scale}"
            )));
        }
        Ok(ClaimDistribution::Gamma { shape, scale })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ClaimDistribution::Gamma { shape, scale } => shape * scale,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            ClaimDistribution::Gamma { shape, scale } => shape * (shape + 1.0) * scale * scale,
        }
    }

    fn sampler(&self) -> Gamma<f64> {
        match *self {
            ClaimDistribution::Gamma { shape, scale } => {
                Gamma::new(shape, scale).expect("validated gamma parameters")
            }
        }
    }
}

/// Price dynamics of one investable asset, started at 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AssetModel {
    Cash,
    Gbm { mu: f64, sigma: f64 },
}

impl AssetModel {
    pub fn gbm(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gbm asset needs finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
            )));
        }
        Ok(AssetModel::Gbm { mu, sigma })
    }

    pub fn is_risky(&self) -> bool {
        matches!(self, AssetModel::Gbm { .. })
    }

    /// Terminal price given a standard normal draw `z`.
    pub fn terminal_price(&self, horizon: f64, z: f64) -> f64 {
        match *self {
            AssetModel::Cash => 1.0,
            AssetModel::Gbm { mu, sigma } => {
                ((mu - 0.5 * sigma * sigma) * horizon + sigma * horizon.sqrt() * z).exp()
            }
        }
    }

    pub fn expected_terminal_price(&self, horizon: f64) -> f64 {
        match *self {
            AssetModel::Cash => 1.0,
            AssetModel::Gbm { mu, .. } => (mu * horizon).exp(),
        }
    }
}

/// Premium rates under the expected value principle: `(c1, c2)` with
/// `c1 = lambda (1 + theta) E[X]` and `c2 = lambda (1 + zeta) E[X]`.
pub fn derive_premiums(
    lambda: f64,
    theta: f64,
    zeta: f64,
    claim: &ClaimDistribution,
) -> Result<(f64, f64)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be > 0, got {lambda}"
        )));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "theta must be > 0, got {theta}"
        )));
    }
    if !(zeta > theta) || !zeta.is_finite() {
        return Err(Error::LoadingOrder { theta, zeta });
    }
    let mean = claim.mean();
    let c1 = lambda * (1.0 + theta) * mean;
    let c2 = lambda * (1.0 + zeta) * mean;
    Ok((c1, c2))
}

/// Validated actuarial and market parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    lambda: f64,
    r: f64,
    u: f64,
    horizon: f64,
    theta: f64,
    zeta: f64,
    claim: ClaimDistribution,
    assets: Vec<AssetModel>,
    c1: f64,
    c2: f64,
}

impl ModelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lambda: f64,
        r: f64,
        u: f64,
        horizon: f64,
        theta: f64,
        zeta: f64,
        claim: ClaimDistribution,
        assets: Vec<AssetModel>,
    ) -> Result<Self> {
        if !(u > 0.0 && u.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "initial surplus u must be > 0, got {u}"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon T must be > 0, got {horizon}"
            )));
        }
        if r == 0.0 || !r.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "inflation rate r must be finite and nonzero, got {r}"
            )));
        }
        if assets.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one asset is required".into(),
            ));
        }
        let (c1, c2) = derive_premiums(lambda, theta, zeta, &claim)?;
        Ok(ModelParams {
            lambda,
            r,
            u,
            horizon,
            theta,
            zeta,
            claim,
            assets,
            c1,
            c2,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn u(&self) -> f64 {
        self.u
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn zeta(&self) -> f64 {
        self.zeta
    }
    pub fn claim(&self) -> &ClaimDistribution {
        &self.claim
    }
    pub fn assets(&self) -> &[AssetModel] {
        &self.assets
    }
    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }
    pub fn c1(&self) -> f64 {
        self.c1
    }
    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// `1 - c1/c2`: the smallest retention for which premium income net of
    /// reinsurance stays nonnegative.
    pub fn min_feasible_retention(&self) -> f64 {
        1.0 - self.c1 / self.c2
    }

    /// True when no asset is risky, so only the retention matters.
    pub fn is_reinsurance_only(&self) -> bool {
        self.assets.iter().all(|a| !a.is_risky())
    }

    /// Checks that a retention floor keeps the insurer solvent absent claims.
    pub fn check_retention_floor(&self, b_min: f64) -> Result<()> {
        if !(b_min > 0.0 && b_min <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "b_min must lie in (0, 1], got {b_min}"
            )));
        }
        let floor = self.min_feasible_retention();
        if b_min < floor {
            return Err(Error::Infeasible(format!(
                "b_min={b_min} is below 1 - c1/c2 = {floor}; the insurer could be ruined without claims"
            )));
        }
        Ok(())
    }

    /// Net premium rate kept by the insurer at retention `b`.
    pub fn net_premium_rate(&self, b: f64) -> f64 {
        self.c1 - (1.0 - b) * self.c2
    }
}

/// A decision point: allocation `p` on the simplex and retention `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    p: Vec<f64>,
    b: f64,
}

impl Strategy {
    /// Validates `p` on the unit simplex and `b_min <= b <= 1`.
    pub fn new(p: Vec<f64>, b: f64, b_min: f64) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidArgument("allocation vector is empty".into()));
        }
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "allocation has negative or non-finite entries: {p:?}"
            )));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!(
                "allocation sums to {total}, not 1"
            )));
        }
        if !(b >= b_min && b <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "retention {b} outside [{b_min}, 1]"
            )));
        }
        Ok(Strategy { p, b })
    }

    /// Equal weights over `m` assets with retention `b`.
    pub fn uniform(m: usize, b: f64, b_min: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("allocation vector is empty".into()));
        }
        let mut p = vec![1.0 / m as f64; m];
        // absorb rounding so the sum is exact to the tolerance
        let drift: f64 = 1.0 - p.iter().sum::<f64>();
        p[0] += drift;
        Strategy::new(p, b, b_min)
    }

    /// Built by the projection, which guarantees feasibility.
    pub(crate) fn from_parts(p: Vec<f64>, b: f64) -> Self {
        Strategy { p, b }
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.p.len() + 1
    }

    /// Flattened `(p_1, ..., p_m, b)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.p.clone();
        v.push(self.b);
        v
    }
}

/// One Monte Carlo draw of the claim process and terminal asset prices.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSample {
    /// Jump epochs, strictly increasing, inside `(0, T)`.
    pub jump_times: Vec<f64>,
    pub claim_sizes: Vec<f64>,
    pub asset_prices: Vec<f64>,
}

impl ScenarioSample {
    pub fn n_claims(&self) -> usize {
        self.jump_times.len()
    }

    pub fn has_claims(&self) -> bool {
        !self.jump_times.is_empty()
    }

    /// `sum e^{r T_i} X_i`.
    pub fn inflated_claims(&self, r: f64) -> f64 {
        self.jump_times
            .iter()
            .zip(&self.claim_sizes)
            .map(|(&t, &x)| (r * t).exp() * x)
            .sum()
    }
}

/// Which Poisson construction generates jump epochs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoissonSampler {
    /// `N_T ~ Poisson(lambda T)`, then `N_T` sorted uniforms on `(0, T)`.
    #[default]
    ConditionalUniform,
    /// Cumulative exponential inter-arrival gaps until `T` is passed.
    ExponentialGap,
}

/// Draws one scenario from the stream at `key`.
pub fn sample_scenario(params: &ModelParams, key: StreamKey) -> ScenarioSample {
    sample_scenario_with(params, key, PoissonSampler::ConditionalUniform)
}

pub fn sample_scenario_with(
    params: &ModelParams,
    key: StreamKey,
    sampler: PoissonSampler,
) -> ScenarioSample {
    let mut rng = key.rng();
    let horizon = params.horizon;
    let jump_times = match sampler {
        PoissonSampler::ConditionalUniform => {
            let n = Poisson::new(params.lambda * horizon)
                .expect("validated intensity")
                .sample(&mut rng) as usize;
            let mut times: Vec<f64> = (0..n)
                .map(|_| interior_uniform(&mut rng, horizon))
                .collect();
            times.sort_unstable_by(f64::total_cmp);
            times
        }
        PoissonSampler::ExponentialGap => {
            let gap = Exp::new(params.lambda).expect("validated intensity");
            let mut times = Vec::new();
            let mut t = 0.0;
            loop {
                t += gap.sample(&mut rng);
                if t >= horizon {
                    break;
                }
                if t > 0.0 {
                    times.push(t);
                }
            }
            times
        }
    };
    let claim = params.claim.sampler();
    let claim_sizes: Vec<f64> = (0..jump_times.len())
        .map(|_| claim.sample(&mut rng))
        .collect();
    let asset_prices = params
        .assets
        .iter()
        .map(|asset| match asset {
            AssetModel::Cash => 1.0,
            risky => risky.terminal_price(horizon, StandardNormal.sample(&mut rng)),
        })
        .collect();
    ScenarioSample {
        jump_times,
        claim_sizes,
        asset_prices,
    }
}

// Uniform on the open interval (0, horizon); endpoint draws are redrawn.
fn interior_uniform<R: Rng>(rng: &mut R, horizon: f64) -> f64 {
    loop {
        let t = horizon * rng.random::<f64>();
        if t > 0.0 && t < horizon {
            return t;
        }
    }
}

/// Terminal surplus for an arbitrary point `(p, b)` of `R^{m+1}`, without
/// feasibility checks. Used by finite differences that step off the simplex.
pub fn surplus_terminal_at(
    params: &ModelParams,
    p: &[f64],
    b: f64,
    scenario: &ScenarioSample,
) -> Result<f64> {
    if p.len() != scenario.asset_prices.len() {
        return Err(Error::Shape {
            expected: scenario.asset_prices.len(),
            got: p.len(),
        });
    }
    let invested: f64 = p
        .iter()
        .zip(&scenario.asset_prices)
        .map(|(w, s)| w * s)
        .sum();
    Ok(terminal_from_aggregates(
        params,
        invested,
        b,
        scenario.inflated_claims(params.r),
    ))
}

/// `u <p, S_T> + c1 T - (1 - b) c2 T - b sum e^{r T_i} X_i`.
pub fn surplus_terminal(
    params: &ModelParams,
    strategy: &Strategy,
    scenario: &ScenarioSample,
) -> Result<f64> {
    surplus_terminal_at(params, &strategy.p, strategy.b, scenario)
}

/// Terminal surplus from `<p, S_T>` and the inflated claim total.
#[inline]
pub(crate) fn terminal_from_aggregates(
    params: &ModelParams,
    invested: f64,
    b: f64,
    inflated_claims: f64,
) -> f64 {
    params.u * invested + params.c1 * params.horizon
        - (1.0 - b) * params.c2 * params.horizon
        - b * inflated_claims
}

/// `1_A 1_{U_T < 0}`, with `A = {N_T >= 1}`.
pub fn ruin_indicator(
    params: &ModelParams,
    strategy: &Strategy,
    scenario: &ScenarioSample,
) -> Result<bool> {
    if !scenario.has_claims() {
        return Ok(false);
    }
    Ok(surplus_terminal(params, strategy, scenario)? < 0.0)
}

/// Ruin at any time in `[0, T]` for a model without risky assets.
///
/// The surplus is linear between jumps, so its infimum is attained right after
/// a jump or at `T`; both are checked, which keeps the result exact even when
/// the net premium rate is negative.
pub fn path_ruin_indicator_reinsurance_only(
    params: &ModelParams,
    b: f64,
    scenario: &ScenarioSample,
) -> Result<bool> {
    if !params.is_reinsurance_only() {
        return Err(Error::UnsupportedModel(
            "path ruin is only available for models without risky assets".into(),
        ));
    }
    let drift = params.net_premium_rate(b);
    let mut claims = 0.0;
    for (&t, &x) in scenario.jump_times.iter().zip(&scenario.claim_sizes) {
        claims += b * (params.r * t).exp() * x;
        if params.u + drift * t - claims < 0.0 {
            return Ok(true);
        }
    }
    Ok(params.u + drift * params.horizon - claims < 0.0)
}
