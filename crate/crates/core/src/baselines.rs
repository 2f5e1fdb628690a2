//! Reference quantities: Monte Carlo ruin probabilities, a finite-difference
//! gradient, and the adjustment-coefficient retention level with its numerical
//! Lundberg counterpart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::model::{self, ModelParams, PoissonSampler, ScenarioSample, Strategy};
use crate::rng::StreamKey;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuinKind {
    /// `P(U_T < 0)`.
    Terminal,
    /// `P(inf_{t <= T} U_t < 0)`, reinsurance-only models.
    PathReinsuranceOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RuinEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub kind: RuinKind,
}

impl RuinEstimate {
    pub fn from_count(ruined: usize, n_samples: usize, kind: RuinKind) -> Self {
        let n = n_samples as f64;
        let probability = ruined as f64 / n;
        RuinEstimate {
            probability,
            std_error: (probability * (1.0 - probability) / n).sqrt(),
            n_samples,
            kind,
        }
    }
}

fn indicator(
    params: &ModelParams,
    p: &[f64],
    b: f64,
    scenario: &ScenarioSample,
    kind: RuinKind,
) -> Result<bool> {
    match kind {
        RuinKind::Terminal => {
            Ok(scenario.has_claims() && model::surplus_terminal_at(params, p, b, scenario)? < 0.0)
        }
        RuinKind::PathReinsuranceOnly => {
            model::path_ruin_indicator_reinsurance_only(params, b, scenario)
        }
    }
}

/// Mean ruin indicator over `n` scenarios drawn from `base.index(0..n)`.
pub fn mc_ruin_probability(
    params: &ModelParams,
    strategy: &Strategy,
    n: usize,
    base: StreamKey,
    kind: RuinKind,
    exec: &Executor,
) -> Result<RuinEstimate> {
    mc_ruin_probability_at(
        params,
        strategy.p(),
        strategy.b(),
        n,
        base,
        kind,
        PoissonSampler::default(),
        exec,
    )
}

/// As [`mc_ruin_probability`] at an arbitrary `(p, b)` and with a chosen Poisson construction.
#[allow(clippy::too_many_arguments)]
pub fn mc_ruin_probability_at(
    params: &ModelParams,
    p: &[f64],
    b: f64,
    n: usize,
    base: StreamKey,
    kind: RuinKind,
    sampler: PoissonSampler,
    exec: &Executor,
) -> Result<RuinEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "Monte Carlo sample size must be positive".into(),
        ));
    }
    if kind == RuinKind::PathReinsuranceOnly && !params.is_reinsurance_only() {
        return Err(Error::UnsupportedModel(
            "path ruin is only available for models without risky assets".into(),
        ));
    }
    if p.len() != params.n_assets() {
        return Err(Error::Shape {
            expected: params.n_assets(),
            got: p.len(),
        });
    }
    let ruined = exec.fold_chunks(
        n,
        || 0usize,
        |count, i| {
            let scenario = model::sample_scenario_with(params, base.index(i as u64), sampler);
            // shape and model were checked above, so the indicator cannot fail
            if indicator(params, p, b, &scenario, kind).unwrap_or(false) {
                *count += 1;
            }
        },
        |count, part| *count += part,
    );
    Ok(RuinEstimate::from_count(ruined, n, kind))
}

/// Terminal and path ruin of a reinsurance-only model on one shared scenario set.
pub fn mc_ruin_terminal_and_path(
    params: &ModelParams,
    b: f64,
    n: usize,
    base: StreamKey,
    exec: &Executor,
) -> Result<(RuinEstimate, RuinEstimate)> {
    if !params.is_reinsurance_only() {
        return Err(Error::UnsupportedModel(
            "path ruin is only available for models without risky assets".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "Monte Carlo sample size must be positive".into(),
        ));
    }
    let p = vec![1.0 / params.n_assets() as f64; params.n_assets()];
    let (terminal, path) = exec.fold_chunks(
        n,
        || (0usize, 0usize),
        |(t, q), i| {
            let scenario = model::sample_scenario(params, base.index(i as u64));
            if indicator(params, &p, b, &scenario, RuinKind::Terminal).unwrap_or(false) {
                *t += 1;
            }
            if indicator(params, &p, b, &scenario, RuinKind::PathReinsuranceOnly).unwrap_or(false) {
                *q += 1;
            }
        },
        |(t, q), (pt, pq)| {
            *t += pt;
            *q += pq;
        },
    );
    Ok((
        RuinEstimate::from_count(terminal, n, RuinKind::Terminal),
        RuinEstimate::from_count(path, n, RuinKind::PathReinsuranceOnly),
    ))
}

/// Scenario aggregates reused to score many strategies on the same draws.
///
/// Terminal surplus depends on a scenario only through `S_T` and
/// `sum e^{r T_i} X_i`, so those are all that is kept.
#[derive(Clone, Debug)]
pub struct EvaluationSet {
    m: usize,
    has_claims: Vec<bool>,
    inflated_claims: Vec<f64>,
    prices: Vec<f64>,
}

impl EvaluationSet {
    pub fn generate(
        params: &ModelParams,
        n: usize,
        base: StreamKey,
        exec: &Executor,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "evaluation set must be non-empty".into(),
            ));
        }
        let m = params.n_assets();
        let rows = exec.map(n, |i| {
            let s = model::sample_scenario(params, base.index(i as u64));
            (
                s.has_claims(),
                s.inflated_claims(params.r()),
                s.asset_prices,
            )
        });
        let mut set = EvaluationSet {
            m,
            has_claims: Vec::with_capacity(n),
            inflated_claims: Vec::with_capacity(n),
            prices: Vec::with_capacity(n * m),
        };
        for (claims, inflated, prices) in rows {
            set.has_claims.push(claims);
            set.inflated_claims.push(inflated);
            set.prices.extend(prices);
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.has_claims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.has_claims.is_empty()
    }

    /// Terminal ruin probability of `strategy` on the stored scenarios.
    pub fn terminal_ruin(
        &self,
        params: &ModelParams,
        strategy: &Strategy,
        exec: &Executor,
    ) -> Result<RuinEstimate> {
        if strategy.p().len() != self.m {
            return Err(Error::Shape {
                expected: self.m,
                got: strategy.p().len(),
            });
        }
        let (p, b) = (strategy.p(), strategy.b());
        let ruined = exec.fold_chunks(
            self.len(),
            || 0usize,
            |count, i| {
                if !self.has_claims[i] {
                    return;
                }
                let prices = &self.prices[i * self.m..(i + 1) * self.m];
                let invested: f64 = p.iter().zip(prices).map(|(w, s)| w * s).sum();
                if model::terminal_from_aggregates(params, invested, b, self.inflated_claims[i])
                    < 0.0
                {
                    *count += 1;
                }
            },
            |count, part| *count += part,
        );
        Ok(RuinEstimate::from_count(
            ruined,
            self.len(),
            RuinKind::Terminal,
        ))
    }
}

/// Central difference of one coordinate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoordinateDifference {
    pub value: f64,
    pub std_error: f64,
}

/// Central finite differences of the Monte Carlo terminal ruin probability.
///
/// `steps` has one entry per coordinate `(p_1, ..., p_m, b)`; a zero step skips
/// that coordinate. Every evaluation draws its own stream
/// `base.iteration(2 j + side)`. Allocation coordinates are perturbed one at a
/// time, leaving the simplex; the surplus formula is defined there.
pub fn finite_difference_gradient(
    params: &ModelParams,
    strategy: &Strategy,
    steps: &[f64],
    n: usize,
    base: StreamKey,
    exec: &Executor,
) -> Result<Vec<Option<CoordinateDifference>>> {
    let x = strategy.to_vec();
    if steps.len() != x.len() {
        return Err(Error::Shape {
            expected: x.len(),
            got: steps.len(),
        });
    }
    let m = strategy.p().len();
    let floor = params.min_feasible_retention();
    let mut out = Vec::with_capacity(x.len());
    for (j, &h) in steps.iter().enumerate() {
        if h == 0.0 {
            out.push(None);
            continue;
        }
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step {h} for coordinate {j} must be >= 0"
            )));
        }
        let (lo, hi) = (x[j] - h, x[j] + h);
        let feasible = if j < m {
            lo >= 0.0 && hi <= 1.0
        } else {
            lo >= floor && lo > 0.0 && hi <= 1.0
        };
        if !feasible {
            return Err(Error::InvalidArgument(format!(
                "perturbation of coordinate {j} by {h} leaves the feasible range ({lo}, {hi})"
            )));
        }
        let eval = |value: f64, side: u64| -> Result<RuinEstimate> {
            let mut point = x.clone();
            point[j] = value;
            let (p, b) = point.split_at(m);
            mc_ruin_probability_at(
                params,
                p,
                b[0],
                n,
                base.iteration(2 * j as u64 + side),
                RuinKind::Terminal,
                PoissonSampler::default(),
                exec,
            )
        };
        let plus = eval(hi, 0)?;
        let minus = eval(lo, 1)?;
        out.push(Some(CoordinateDifference {
            value: (plus.probability - minus.probability) / (2.0 * h),
            std_error: (plus.std_error.powi(2) + minus.std_error.powi(2)).sqrt() / (2.0 * h),
        }));
    }
    Ok(out)
}

/// Unclamped closed-form retention ratio for gamma claims with shape `alpha`.
pub fn adjustment_ratio(alpha: f64, theta: f64, zeta: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma shape must be > 0, got {alpha}"
        )));
    }
    if !(theta > 0.0) || zeta < theta {
        return Err(Error::LoadingOrder { theta, zeta });
    }
    let numerator = alpha * (zeta - theta) * (1.0 - (1.0 + zeta).powf(-1.0 / (alpha + 1.0)));
    let denominator =
        alpha * zeta + (alpha + 1.0) * (1.0 - (1.0 + zeta).powf(alpha / (alpha + 1.0)));
    Ok(numerator / denominator)
}

/// Retention maximizing the adjustment coefficient for gamma claims, capped at 1.
///
/// Depends only on the claim shape and the two loadings.
pub fn adjustment_coefficient_b_star(alpha: f64, theta: f64, zeta: f64) -> Result<f64> {
    Ok(adjustment_ratio(alpha, theta, zeta)?.min(1.0))
}

/// Adjustment coefficient `R(b)` of the inflation-free model with claims `b X`:
/// the positive root of `lambda (M_X(b s) - 1) = (c1 - (1 - b) c2) s`.
pub fn adjustment_coefficient(params: &ModelParams, b: f64) -> Result<f64> {
    let model::ClaimDistribution::Gamma { shape, scale } = *params.claim();
    let lambda = params.lambda();
    let premium = params.net_premium_rate(b);
    if !(b > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "retention must be positive, got {b}"
        )));
    }
    // slope at the origin; a root in (0, pole) needs it to be negative
    if lambda * b * shape * scale - premium >= 0.0 {
        return Err(Error::Infeasible(format!(
            "no positive Lundberg root at b={b}: net premium {premium} does not exceed expected retained claims"
        )));
    }
    let lundberg = |s: f64| lambda * ((1.0 - b * scale * s).powf(-shape) - 1.0) - premium * s;
    let pole = 1.0 / (b * scale);
    let mut hi = (1.0 - 1e-9) * pole;
    if lundberg(hi) <= 0.0 {
        return Err(Error::Infeasible(format!(
            "Lundberg equation has no sign change below the mgf pole at b={b}"
        )));
    }
    let mut lo = 0.5 * hi;
    let mut halvings = 0;
    while lundberg(lo) >= 0.0 {
        hi = lo;
        lo *= 0.5;
        halvings += 1;
        if halvings > 1100 {
            return Err(Error::Infeasible(format!(
                "Lundberg root not bracketed at b={b}"
            )));
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lundberg(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Maximizes `R(b)` over `[b_min, 1]`: grid scan with `grid_resolution`
/// intervals, then golden-section refinement around the best grid point.
pub fn lundberg_b_star_oracle(
    params: &ModelParams,
    b_min: f64,
    grid_resolution: usize,
) -> Result<f64> {
    if grid_resolution < 2 {
        return Err(Error::InvalidArgument(
            "grid needs at least two intervals".into(),
        ));
    }
    if !(b_min > 0.0 && b_min <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "b_min must lie in (0, 1], got {b_min}"
        )));
    }
    let coefficient = |b: f64| adjustment_coefficient(params, b).unwrap_or(0.0);
    let grid: Vec<f64> = (0..=grid_resolution)
        .map(|i| b_min + (1.0 - b_min) * i as f64 / grid_resolution as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&b| coefficient(b)).collect();
    let (best, &best_value) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is non-empty");
    if best_value <= 0.0 {
        return Err(Error::Infeasible(
            "no retention in [b_min, 1] admits a positive adjustment coefficient".into(),
        ));
    }
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid_resolution)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (coefficient(x1), coefficient(x2));
    while hi - lo > 1e-11 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = coefficient(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = coefficient(x1);
        }
    }
    let refined = 0.5 * (lo + hi);
    // an edge optimum can sit exactly on the boundary of the bracket
    let candidates = [refined, grid[best], b_min, 1.0];
    Ok(candidates
        .into_iter()
        .max_by(|a, b| coefficient(*a).total_cmp(&coefficient(*b)))
        .expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AssetModel, ClaimDistribution};
    use crate::rng::Purpose;
    use approx::assert_relative_eq;

    fn reinsurance_model(shape: f64, scale: f64) -> ModelParams {
        let claim = ClaimDistribution::gamma(shape, scale).unwrap();
        ModelParams::new(
            40.0,
            0.03,
            200.0,
            5.0,
            0.08,
            0.15,
            claim,
            vec![AssetModel::Cash],
        )
        .unwrap()
    }

    #[test]
    fn b_star_closed_form_values() {
        // frozen from an independent high-precision evaluation of the formula
        assert_relative_eq!(
            adjustment_coefficient_b_star(5.0, 0.08, 0.15).unwrap(),
            0.908_648_228_296_563_6,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            adjustment_coefficient_b_star(10.0, 0.08, 0.15).unwrap(),
            0.910_211_303_890_533_7,
            max_relative = 1e-12
        );
        assert_eq!(adjustment_coefficient_b_star(5.0, 0.1, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn b_star_clamped_at_one() {
        // wide loading gap pushes the ratio above 1
        let ratio = adjustment_ratio(5.0, 0.01, 0.9).unwrap();
        assert!(ratio > 1.0, "ratio {ratio}");
        assert_eq!(adjustment_coefficient_b_star(5.0, 0.01, 0.9).unwrap(), 1.0);
        // the Lundberg maximizer sits on the upper boundary as well
        let claim = ClaimDistribution::gamma(5.0, 3.0).unwrap();
        let params = ModelParams::new(
            40.0,
            0.03,
            200.0,
            5.0,
            0.01,
            0.9,
            claim,
            vec![AssetModel::Cash],
        )
        .unwrap();
        let oracle = lundberg_b_star_oracle(&params, params.min_feasible_retention(), 400).unwrap();
        assert!((oracle - 1.0).abs() < 1e-6, "{oracle}");
    }

    #[test]
    fn lundberg_oracle_agrees_with_closed_form() {
        for alpha in [5.0, 10.0, 15.0] {
            let params = reinsurance_model(alpha, 3.0);
            let oracle = lundberg_b_star_oracle(&params, 0.07, 400).unwrap();
            let closed = adjustment_coefficient_b_star(alpha, 0.08, 0.15).unwrap();
            assert!(
                (oracle - closed).abs() < 1e-4,
                "alpha={alpha}: {oracle} vs {closed}"
            );
        }
    }

    #[test]
    fn lundberg_oracle_is_scale_free() {
        let a = lundberg_b_star_oracle(&reinsurance_model(5.0, 1.0), 0.07, 400).unwrap();
        let b = lundberg_b_star_oracle(&reinsurance_model(5.0, 3.0), 0.07, 400).unwrap();
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn adjustment_coefficient_degenerates_at_break_even() {
        let params = reinsurance_model(5.0, 3.0);
        // net premium equals expected retained claims at b = (zeta - theta) / zeta
        let b = (0.15 - 0.08) / 0.15;
        assert!(adjustment_coefficient(&params, b).is_err());
        assert!(adjustment_coefficient(&params, b - 0.01).is_err());
        assert!(adjustment_coefficient(&params, b + 0.05).unwrap() > 0.0);
    }

    #[test]
    fn lundberg_root_solves_equation() {
        let params = reinsurance_model(5.0, 3.0);
        let b = 0.8;
        let s = adjustment_coefficient(&params, b).unwrap();
        let lhs = 40.0 * ((1.0 - b * 3.0 * s).powf(-5.0) - 1.0);
        let rhs = params.net_premium_rate(b) * s;
        assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
    }

    #[test]
    fn oracle_maximizes() {
        let params = reinsurance_model(5.0, 3.0);
        let best = lundberg_b_star_oracle(&params, 0.07, 400).unwrap();
        let r_best = adjustment_coefficient(&params, best).unwrap();
        for i in 0..100 {
            let b = 0.07 + 0.93 * (i as f64 + 0.5) / 100.0;
            let r = adjustment_coefficient(&params, b).unwrap_or(0.0);
            assert!(r_best >= r, "b={b}");
        }
    }

    #[test]
    fn ruin_estimates_are_deterministic_and_dominated() {
        let params = reinsurance_model(5.0, 3.0);
        let exec = Executor::sequential();
        let s = Strategy::new(vec![1.0], 0.6, 0.07).unwrap();
        let key = StreamKey::new(3, Purpose::MonteCarlo);
        let a = mc_ruin_probability(&params, &s, 2000, key, RuinKind::Terminal, &exec).unwrap();
        let b = mc_ruin_probability(&params, &s, 2000, key, RuinKind::Terminal, &exec).unwrap();
        assert_eq!(a, b);
        let path =
            mc_ruin_probability(&params, &s, 2000, key, RuinKind::PathReinsuranceOnly, &exec)
                .unwrap();
        assert!(path.probability >= a.probability);
        let (t2, p2) = mc_ruin_terminal_and_path(&params, 0.6, 2000, key, &exec).unwrap();
        assert_eq!(t2.probability, a.probability);
        assert_eq!(p2.probability, path.probability);
    }

    #[test]
    fn heavy_claims_ruin_almost_surely() {
        // huge claims relative to u / (lambda T) and premiums of a light law
        let claim = ClaimDistribution::gamma(5.0, 3.0).unwrap();
        let params = ModelParams::new(
            40.0,
            0.03,
            1.0,
            5.0,
            0.001,
            0.002,
            claim,
            vec![AssetModel::Cash],
        )
        .unwrap();
        let heavy = ModelParams::new(
            40.0,
            0.5,
            1.0,
            5.0,
            0.001,
            0.002,
            claim,
            vec![AssetModel::Cash],
        )
        .unwrap();
        let s = Strategy::new(vec![1.0], 1.0, 0.01).unwrap();
        let exec = Executor::sequential();
        let key = StreamKey::new(1, Purpose::MonteCarlo);
        let est = mc_ruin_probability(&heavy, &s, 5000, key, RuinKind::Terminal, &exec).unwrap();
        assert!(est.probability >= 0.99, "{}", est.probability);
        let mild = mc_ruin_probability(&params, &s, 5000, key, RuinKind::Terminal, &exec).unwrap();
        assert!(mild.probability < est.probability);
    }

    #[test]
    fn path_kind_rejects_risky_assets() {
        let claim = ClaimDistribution::gamma(5.0, 3.0).unwrap();
        let params = ModelParams::new(
            40.0,
            0.03,
            200.0,
            5.0,
            0.08,
            0.15,
            claim,
            vec![AssetModel::Cash, AssetModel::gbm(0.05, 0.1).unwrap()],
        )
        .unwrap();
        let s = Strategy::uniform(2, 1.0, 0.07).unwrap();
        let r = mc_ruin_probability(
            &params,
            &s,
            10,
            StreamKey::new(1, Purpose::MonteCarlo),
            RuinKind::PathReinsuranceOnly,
            &Executor::sequential(),
        );
        assert!(matches!(r, Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn evaluation_set_matches_direct_estimate() {
        let params = reinsurance_model(5.0, 3.0);
        let exec = Executor::sequential();
        let key = StreamKey::new(9, Purpose::Evaluation);
        let set = EvaluationSet::generate(&params, 3000, key, &exec).unwrap();
        for b in [0.3, 0.7, 1.0] {
            let s = Strategy::new(vec![1.0], b, 0.07).unwrap();
            let cached = set.terminal_ruin(&params, &s, &exec).unwrap();
            let direct =
                mc_ruin_probability(&params, &s, 3000, key, RuinKind::Terminal, &exec).unwrap();
            assert_eq!(cached.probability, direct.probability);
        }
    }

    #[test]
    fn binomial_standard_error() {
        let e = RuinEstimate::from_count(25, 100, RuinKind::Terminal);
        assert_relative_eq!(e.std_error, (0.25f64 * 0.75 / 100.0).sqrt());
        let params = reinsurance_model(5.0, 3.0);
        let exec = Executor::sequential();
        let s = Strategy::new(vec![1.0], 0.8, 0.07).unwrap();
        let key = StreamKey::new(2, Purpose::MonteCarlo);
        let small = mc_ruin_probability(&params, &s, 5000, key, RuinKind::Terminal, &exec).unwrap();
        let large = mc_ruin_probability(
            &params,
            &s,
            20000,
            key.iteration(1),
            RuinKind::Terminal,
            &exec,
        )
        .unwrap();
        let ratio = small.std_error / large.std_error;
        assert!((ratio - 2.0).abs() < 0.4, "SE ratio {ratio}");
    }

    #[test]
    fn finite_difference_checks() {
        let params = reinsurance_model(5.0, 3.0);
        let exec = Executor::sequential();
        let s = Strategy::new(vec![1.0], 0.5, 0.07).unwrap();
        let key = StreamKey::new(4, Purpose::FiniteDifference);
        assert!(finite_difference_gradient(&params, &s, &[0.02], 10, key, &exec).is_err());
        // b + h > 1
        let top = Strategy::new(vec![1.0], 0.99, 0.07).unwrap();
        assert!(finite_difference_gradient(&params, &top, &[0.0, 0.02], 10, key, &exec).is_err());
        let fd = finite_difference_gradient(&params, &s, &[0.0, 0.02], 100, key, &exec).unwrap();
        assert!(fd[0].is_none());
        assert!(fd[1].is_some());
    }

    #[test]
    fn finite_difference_is_zero_without_ruin() {
        // enormous capital: no scenario is ruined at either side
        let claim = ClaimDistribution::gamma(5.0, 3.0).unwrap();
        let params = ModelParams::new(
            40.0,
            0.03,
            1e7,
            5.0,
            0.08,
            0.15,
            claim,
            vec![AssetModel::Cash],
        )
        .unwrap();
        let s = Strategy::new(vec![1.0], 0.5, 0.07).unwrap();
        let fd = finite_difference_gradient(
            &params,
            &s,
            &[0.0, 0.02],
            500,
            StreamKey::new(5, Purpose::FiniteDifference),
            &Executor::sequential(),
        )
        .unwrap();
        assert_eq!(fd[1].unwrap().value, 0.0);
    }
}
