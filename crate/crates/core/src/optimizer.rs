//! Mini-batch stochastic projected gradient method with diminishing step
//! sizes `gamma_k = gamma~ / (1 + k)^beta1` and growing batches
//! `m_k = ceil(m~ (1 + k)^beta2)`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{EvaluationSet, RuinEstimate};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::malliavin::{self, GradientEstimate, WeightFunction};
use crate::model::{ModelParams, Strategy};
use crate::projection::{self, FeasibleRegion};
use crate::rng::{Purpose, StreamKey};

pub const DEFAULT_BETA1: f64 = 0.67;
pub const DEFAULT_BETA2: f64 = 0.33;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpgConfig {
    pub gamma_tilde: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub m_tilde: f64,
    pub max_iters: usize,
    /// Evaluation scenarios per iterate; 0 disables per-iterate scoring.
    pub eval_batch: usize,
    pub master_seed: u64,
}

impl SpgConfig {
    pub fn new(gamma_tilde: f64, max_iters: usize, master_seed: u64) -> Self {
        SpgConfig {
            gamma_tilde,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            m_tilde: 1.0,
            max_iters,
            eval_batch: 10_000,
            master_seed,
        }
    }

    /// Schedule exponents for a gradient that is Hölder continuous with exponent `nu`.
    pub fn holder_exponents(nu: f64) -> Result<(f64, f64)> {
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Hölder exponent must lie in (0, 1], got {nu}"
            )));
        }
        Ok((1.0 / (1.0 + nu), nu / (1.0 + nu)))
    }

    pub fn with_holder_exponent(mut self, nu: f64) -> Result<Self> {
        let (beta1, beta2) = SpgConfig::holder_exponents(nu)?;
        self.beta1 = beta1;
        self.beta2 = beta2;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.gamma_tilde > 0.0 && self.gamma_tilde.is_finite()) {
            return bad(format!("gamma_tilde must be > 0, got {}", self.gamma_tilde));
        }
        if !(self.m_tilde > 0.0 && self.m_tilde.is_finite()) {
            return bad(format!("m_tilde must be > 0, got {}", self.m_tilde));
        }
        if !(self.beta1 > 0.0 && self.beta1 <= 1.0) {
            return bad(format!("beta1 must lie in (0, 1], got {}", self.beta1));
        }
        if !(self.beta2 >= 0.0 && self.beta2.is_finite()) {
            return bad(format!("beta2 must be >= 0, got {}", self.beta2));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        Ok(())
    }
}

pub fn step_size(k: usize, gamma_tilde: f64, beta1: f64) -> f64 {
    gamma_tilde / (1.0 + k as f64).powf(beta1)
}

pub fn batch_size(k: usize, m_tilde: f64, beta2: f64) -> usize {
    ((m_tilde * (1.0 + k as f64).powf(beta2)).ceil() as usize).max(1)
}

/// State and diagnostics of one iterate `x_k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub strategy: Strategy,
    pub gamma: f64,
    pub batch: usize,
    /// `G_k`; absent for the final iterate, where no step is taken.
    pub gradient: Option<GradientEstimate>,
    /// `||P_C(x_k, G_k, gamma_k)||`.
    pub gradmap_norm: Option<f64>,
    pub ruin: Option<RuinEstimate>,
    /// Smallest ruin estimate among `x_0..=x_k`.
    pub min_ruin: Option<f64>,
    pub wall_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunTrace {
    /// Records for `x_0, ..., x_{N_max}`.
    pub records: Vec<IterationRecord>,
    pub config: SpgConfig,
    pub wall_secs: f64,
}

impl RunTrace {
    pub fn final_strategy(&self) -> &Strategy {
        &self.records.last().expect("trace holds x_0").strategy
    }

    pub fn initial_ruin(&self) -> Option<RuinEstimate> {
        self.records.first().and_then(|r| r.ruin)
    }

    pub fn final_min_ruin(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.min_ruin)
    }

    /// Ruin estimate at the iterate attaining the final minimum.
    pub fn best_ruin(&self) -> Option<RuinEstimate> {
        self.records
            .iter()
            .filter_map(|r| r.ruin)
            .min_by(|a, b| a.probability.total_cmp(&b.probability))
    }
}

/// Uniform allocation without reinsurance.
pub fn default_initial(region: &FeasibleRegion) -> Result<Strategy> {
    Strategy::uniform(region.m(), 1.0, region.b_min())
}

/// One projected step `x+ = proj(x - gamma g)`, returning `x+` and the gradient-mapping norm.
pub fn spg_update(
    region: &FeasibleRegion,
    x: &Strategy,
    g: &[f64],
    gamma: f64,
) -> Result<(Strategy, f64)> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step size must be positive, got {gamma}"
        )));
    }
    let (mapping, next) = projection::gradient_step(region, x, g, gamma)?;
    Ok((next, projection::norm(&mapping)))
}

pub fn run_spg(
    model: &ModelParams,
    region: &FeasibleRegion,
    config: &SpgConfig,
    wf: &WeightFunction,
    initial: &Strategy,
    exec: &Executor,
) -> Result<RunTrace> {
    run_spg_observed(model, region, config, wf, initial, exec, |_| {})
}

/// As [`run_spg`], calling `observe` after each record is complete.
#[allow(clippy::too_many_arguments)]
pub fn run_spg_observed<F: FnMut(&IterationRecord)>(
    model: &ModelParams,
    region: &FeasibleRegion,
    config: &SpgConfig,
    wf: &WeightFunction,
    initial: &Strategy,
    exec: &Executor,
    mut observe: F,
) -> Result<RunTrace> {
    config.validate()?;
    if region.m() != model.n_assets() {
        return Err(Error::Shape {
            expected: model.n_assets(),
            got: region.m(),
        });
    }
    if !region.contains(initial) {
        return Err(Error::InvalidArgument(format!(
            "initial strategy is not feasible: p={:?}, b={}",
            initial.p(),
            initial.b()
        )));
    }
    let started = Instant::now();
    let seed = config.master_seed;
    // common evaluation scenarios for every iterate, disjoint from gradient draws
    let evaluation = if config.eval_batch > 0 {
        Some(EvaluationSet::generate(
            model,
            config.eval_batch,
            StreamKey::new(seed, Purpose::Evaluation),
            exec,
        )?)
    } else {
        None
    };

    let mut records = Vec::with_capacity(config.max_iters + 1);
    let mut x = initial.clone();
    let mut min_ruin: Option<f64> = None;
    for k in 0..=config.max_iters {
        let tick = Instant::now();
        let gamma = step_size(k, config.gamma_tilde, config.beta1);
        let batch = batch_size(k, config.m_tilde, config.beta2);
        let ruin = match &evaluation {
            Some(set) => Some(set.terminal_ruin(model, &x, exec)?),
            None => None,
        };
        if let Some(r) = ruin {
            min_ruin = Some(min_ruin.map_or(r.probability, |m| m.min(r.probability)));
        }

        let (gradient, gradmap_norm, next) = if k < config.max_iters {
            let g = malliavin::estimate_gradient(
                model,
                &x,
                wf,
                batch,
                StreamKey::new(seed, Purpose::Gradient).iteration(k as u64),
                exec,
            )?;
            if let Some(bad) = g.mean.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    iteration: k,
                    detail: format!("component {bad} of G_k is {}", g.mean[bad]),
                });
            }
            let (next, norm) = spg_update(region, &x, &g.mean, gamma)?;
            (Some(g), Some(norm), Some(next))
        } else {
            (None, None, None)
        };

        let record = IterationRecord {
            k,
            strategy: x.clone(),
            gamma,
            batch,
            gradient,
            gradmap_norm,
            ruin,
            min_ruin,
            wall_secs: tick.elapsed().as_secs_f64(),
        };
        observe(&record);
        records.push(record);
        if let Some(next) = next {
            x = next;
        }
    }
    Ok(RunTrace {
        records,
        config: config.clone(),
        wall_secs: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::malliavin::gradient_sample;
    use crate::model::{AssetModel, ClaimDistribution, ScenarioSample};
    use approx::assert_relative_eq;

    #[test]
    fn step_size_schedule() {
        assert_eq!(step_size(0, 10.0, 0.67), 10.0);
        assert_relative_eq!(
            step_size(99, 10.0, 0.67),
            0.457_088_189_614_874_9,
            max_relative = 1e-12
        );
        for k in 0..500 {
            assert!(step_size(k + 1, 1.0, 0.67) < step_size(k, 1.0, 0.67));
        }
    }

    #[test]
    fn batch_size_schedule() {
        assert_eq!(batch_size(0, 1.0, 0.33), 1);
        assert_eq!(batch_size(999, 1.0, 0.33), 10);
        for k in 0..2000 {
            assert!(batch_size(k + 1, 1.0, 0.33) >= batch_size(k, 1.0, 0.33));
        }
        assert_eq!(batch_size(10, 0.01, 0.0), 1);
    }

    #[test]
    fn holder_defaults() {
        let (b1, b2) = SpgConfig::holder_exponents(33.0 / 67.0).unwrap();
        assert_relative_eq!(b1, 0.67, max_relative = 1e-12);
        assert_relative_eq!(b2, 0.33, max_relative = 1e-12);
        assert!(SpgConfig::holder_exponents(0.0).is_err());
        assert!(SpgConfig::holder_exponents(1.5).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = SpgConfig::new(1.0, 10, 0);
        assert!(ok.validate().is_ok());
        assert!(SpgConfig {
            gamma_tilde: 0.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SpgConfig {
            beta1: 0.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SpgConfig {
            beta2: -0.1,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SpgConfig {
            max_iters: 0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SpgConfig { m_tilde: 0.0, ..ok }.validate().is_err());
    }

    fn tiny_claims_model() -> ModelParams {
        let claim = ClaimDistribution::gamma(2.0, 1e-6).unwrap();
        ModelParams::new(
            5.0,
            0.05,
            100.0,
            1.0,
            0.1,
            0.2,
            claim,
            vec![AssetModel::Cash, AssetModel::gbm(0.05, 0.01).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn zero_gradient_fixed_point() {
        let model = tiny_claims_model();
        let region = FeasibleRegion::for_model(&model, 0.5).unwrap();
        let wf = WeightFunction::new(0.125, 1.0).unwrap();
        let mut config = SpgConfig::new(10.0, 20, 3);
        config.eval_batch = 200;
        let x0 = default_initial(&region).unwrap();
        let trace = run_spg(&model, &region, &config, &wf, &x0, &Executor::sequential()).unwrap();
        assert_eq!(trace.records.len(), 21);
        for r in &trace.records {
            assert_eq!(r.strategy, x0);
            assert_eq!(r.ruin.unwrap().probability, 0.0);
        }
        assert!(trace.records[..20].iter().all(|r| r
            .gradient
            .as_ref()
            .unwrap()
            .mean
            .iter()
            .all(|&g| g == 0.0)));
    }

    #[test]
    fn infeasible_start_rejected() {
        let model = tiny_claims_model();
        let region = FeasibleRegion::for_model(&model, 0.5).unwrap();
        let wf = WeightFunction::new(0.125, 1.0).unwrap();
        let config = SpgConfig::new(1.0, 2, 3);
        let outside = Strategy::new(vec![0.5, 0.5], 0.2, 0.1).unwrap();
        assert!(matches!(
            run_spg(
                &model,
                &region,
                &config,
                &wf,
                &outside,
                &Executor::sequential()
            ),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn hand_single_step() {
        // one claim that ruins the insurer, cash asset only
        let claim = ClaimDistribution::gamma(1.0, 1.0).unwrap();
        let model = ModelParams::new(
            1.0,
            0.05,
            100.0,
            1.0,
            9.0,
            11.0,
            claim,
            vec![AssetModel::Cash, AssetModel::Cash],
        )
        .unwrap();
        let region = FeasibleRegion::for_model(&model, 0.2).unwrap();
        let wf = WeightFunction::new(0.125, 1.0).unwrap();
        let x0 = Strategy::new(vec![0.5, 0.5], 0.5, 0.2).unwrap();
        let scenario = ScenarioSample {
            jump_times: vec![0.5],
            claim_sizes: vec![1000.0],
            asset_prices: vec![1.0, 1.0],
        };
        let g = gradient_sample(&model, &x0, &scenario, &wf).unwrap();
        // hand values: W_p = -u / (b e^{r/2} X), W_b = (c2 - e^{r/2} X)(-1)/(b e^{r/2} X) - 1/b
        let infl = 0.025f64.exp() * 1000.0;
        let w_p = -100.0 / (0.5 * infl);
        let w_b = -(12.0 - infl) / (0.5 * infl) - 2.0;
        assert_relative_eq!(g.grad_p()[0], w_p, max_relative = 1e-10);
        assert_relative_eq!(g.grad_b(), w_b, max_relative = 1e-10);

        let gamma = 0.01;
        let (x1, norm) = spg_update(&region, &x0, g.as_slice(), gamma).unwrap();
        // equal p-gradients move along (1,1), which projects back to (0.5, 0.5)
        assert_relative_eq!(x1.p()[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(x1.p()[1], 0.5, epsilon = 1e-15);
        let b_trial: f64 = 0.5 - gamma * w_b;
        let b1 = b_trial.clamp(0.2, 1.0);
        assert_relative_eq!(x1.b(), b1, max_relative = 1e-14);
        assert_relative_eq!(norm, (0.5 - b1).abs() / gamma, max_relative = 1e-12);
    }

    #[test]
    fn traces_are_reproducible_and_feasible() {
        let claim = ClaimDistribution::gamma(5.0, 3.0).unwrap();
        let model = ModelParams::new(
            40.0,
            0.05,
            640.0,
            5.0,
            0.08,
            0.32,
            claim,
            vec![
                AssetModel::Cash,
                AssetModel::gbm(0.08, 0.01).unwrap(),
                AssetModel::gbm(-0.02, 0.008).unwrap(),
            ],
        )
        .unwrap();
        let region = FeasibleRegion::for_model(&model, 0.19).unwrap();
        let wf = WeightFunction::new(0.125, 5.0).unwrap();
        let mut config = SpgConfig::new(10.0, 30, 11);
        config.eval_batch = 500;
        let x0 = default_initial(&region).unwrap();
        let a = run_spg(&model, &region, &config, &wf, &x0, &Executor::sequential()).unwrap();
        let b = run_spg(
            &model,
            &region,
            &config,
            &wf,
            &x0,
            &Executor::with_workers(3).unwrap(),
        )
        .unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.strategy, rb.strategy);
            assert_eq!(ra.ruin, rb.ruin);
            assert!(region.contains(&ra.strategy));
            assert_eq!(ra.gamma, step_size(ra.k, 10.0, 0.67));
            assert_eq!(ra.batch, batch_size(ra.k, 1.0, 0.33));
        }
        let mins: Vec<f64> = a.records.iter().map(|r| r.min_ruin.unwrap()).collect();
        assert!(mins.windows(2).all(|w| w[1] <= w[0]));
    }
}
