//! Experiment configuration files (TOML) with strict key checking.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::malliavin::{WeightFunction, DEFAULT_EXPONENT};
use crate::model::{AssetModel, ClaimDistribution, ModelParams, Strategy};
use crate::optimizer::{self, SpgConfig, DEFAULT_BETA1, DEFAULT_BETA2};
use crate::projection::FeasibleRegion;
use crate::rng::{Purpose, StreamKey};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub assets: AssetsBlock,
    pub spg: SpgBlock,
    pub run: RunBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnose: Option<DiagnoseBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub lambda: f64,
    pub r: f64,
    pub u: f64,
    pub horizon: f64,
    pub theta: f64,
    pub zeta: f64,
    pub claim_shape: f64,
    pub claim_scale: f64,
    pub b_min: f64,
    #[serde(default = "default_exponent")]
    pub weight_exponent: f64,
}

fn default_exponent() -> f64 {
    DEFAULT_EXPONENT
}

/// Either an explicit asset list or a synthetic market: one cash asset plus
/// `count - 1` GBM assets with drifts and volatilities drawn uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list: Option<Vec<AssetModel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<AssetGenerator>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetGenerator {
    /// Total number of assets, the cash asset included.
    pub count: usize,
    pub drift: [f64; 2],
    pub vol: [f64; 2],
    pub seed: u64,
}

impl AssetGenerator {
    pub fn generate(&self) -> Result<Vec<AssetModel>> {
        if self.count == 0 {
            return Err(Error::Config(
                "assets.generator.count must be at least 1".into(),
            ));
        }
        let [mu_lo, mu_hi] = self.drift;
        let [vol_lo, vol_hi] = self.vol;
        if !(mu_lo <= mu_hi) || !(0.0 < vol_lo && vol_lo <= vol_hi) {
            return Err(Error::Config(format!(
                "assets.generator ranges are invalid: drift={:?}, vol={:?}",
                self.drift, self.vol
            )));
        }
        let mut rng = StreamKey::new(self.seed, Purpose::Market).rng();
        let mut assets = vec![AssetModel::Cash];
        for _ in 1..self.count {
            let mu = mu_lo + (mu_hi - mu_lo) * rng.random::<f64>();
            let sigma = vol_lo + (vol_hi - vol_lo) * rng.random::<f64>();
            assets.push(AssetModel::gbm(mu, sigma)?);
        }
        Ok(assets)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpgBlock {
    pub gamma_tilde: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    /// Sets both exponents from the Hölder exponent unless given explicitly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder_nu: Option<f64>,
    #[serde(default = "default_m_tilde")]
    pub m_tilde: f64,
    pub max_iters: usize,
    #[serde(default = "default_eval_batch")]
    pub eval_batch: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_p: Option<Vec<f64>>,
}

fn default_m_tilde() -> f64 {
    1.0
}

fn default_eval_batch() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub master_seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Scenarios for scoring final retentions in `compare`.
    #[serde(default = "default_eval_batch")]
    pub final_eval: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn default_repetitions() -> usize {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseBlock {
    #[serde(default = "default_lemma_samples")]
    pub lemma_samples: usize,
    #[serde(default = "default_gradient_samples")]
    pub gradient_samples: usize,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Retention at which the gradient estimators are compared.
    #[serde(default = "default_probe_b")]
    pub probe_b: f64,
    #[serde(default = "default_projection_points")]
    pub projection_points: usize,
}

fn default_lemma_samples() -> usize {
    100_000
}
fn default_gradient_samples() -> usize {
    200_000
}
fn default_fd_step() -> f64 {
    0.02
}
fn default_probe_b() -> f64 {
    0.5
}
fn default_projection_points() -> usize {
    1000
}

impl Default for DiagnoseBlock {
    fn default() -> Self {
        DiagnoseBlock {
            lemma_samples: default_lemma_samples(),
            gradient_samples: default_gradient_samples(),
            fd_step: default_fd_step(),
            probe_b: default_probe_b(),
            projection_points: default_projection_points(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub repetitions: Option<usize>,
    pub workers: Option<usize>,
}

/// Everything a run needs, validated.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub model: ModelParams,
    pub region: FeasibleRegion,
    pub spg: SpgConfig,
    pub weight: WeightFunction,
    pub initial: Strategy,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.build()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.run.master_seed = seed;
        }
        if let Some(out) = &overrides.out_dir {
            self.run.out_dir = out.clone();
        }
        if let Some(reps) = overrides.repetitions {
            self.run.repetitions = reps;
        }
        if let Some(workers) = overrides.workers {
            self.run.workers = Some(workers);
        }
    }

    pub fn assets(&self) -> Result<Vec<AssetModel>> {
        match (&self.assets.list, &self.assets.generator) {
            (Some(list), None) => {
                for asset in list {
                    if let AssetModel::Gbm { mu, sigma } = *asset {
                        AssetModel::gbm(mu, sigma)?;
                    }
                }
                Ok(list.clone())
            }
            (None, Some(generator)) => generator.generate(),
            _ => Err(Error::Config(
                "[assets] needs exactly one of `list` or `generator`".into(),
            )),
        }
    }

    pub fn spg_config(&self) -> Result<SpgConfig> {
        let s = &self.spg;
        let (mut beta1, mut beta2) = match s.holder_nu {
            Some(nu) => SpgConfig::holder_exponents(nu)?,
            None => (DEFAULT_BETA1, DEFAULT_BETA2),
        };
        if let Some(b1) = s.beta1 {
            beta1 = b1;
        }
        if let Some(b2) = s.beta2 {
            beta2 = b2;
        }
        let config = SpgConfig {
            gamma_tilde: s.gamma_tilde,
            beta1,
            beta2,
            m_tilde: s.m_tilde,
            max_iters: s.max_iters,
            eval_batch: s.eval_batch,
            master_seed: self.run.master_seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn build(&self) -> Result<Experiment> {
        let m = &self.model;
        let claim = ClaimDistribution::gamma(m.claim_shape, m.claim_scale)?;
        let model = ModelParams::new(
            m.lambda,
            m.r,
            m.u,
            m.horizon,
            m.theta,
            m.zeta,
            claim,
            self.assets()?,
        )?;
        let region = FeasibleRegion::for_model(&model, m.b_min)?;
        let weight = WeightFunction::new(m.weight_exponent, m.horizon)?;
        let spg = self.spg_config()?;
        let initial = match (&self.spg.initial_p, self.spg.initial_b) {
            (None, None) => optimizer::default_initial(&region)?,
            (p, b) => {
                let p = p
                    .clone()
                    .unwrap_or_else(|| vec![1.0 / region.m() as f64; region.m()]);
                if p.len() != region.m() {
                    return Err(Error::Config(format!(
                        "spg.initial_p has {} entries for {} assets",
                        p.len(),
                        region.m()
                    )));
                }
                Strategy::new(p, b.unwrap_or(1.0), region.b_min())
                    .map_err(|e| Error::Config(format!("initial strategy: {e}")))?
            }
        };
        if self.run.repetitions == 0 {
            return Err(Error::Config("run.repetitions must be at least 1".into()));
        }
        if self.run.final_eval == 0 {
            return Err(Error::Config("run.final_eval must be at least 1".into()));
        }
        if self.run.workers == Some(0) {
            return Err(Error::Config("run.workers must be at least 1".into()));
        }
        Ok(Experiment {
            model,
            region,
            spg,
            weight,
            initial,
        })
    }
}
