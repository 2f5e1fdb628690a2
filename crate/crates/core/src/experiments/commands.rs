//! The `optimize`, `compare` and `diagnose` experiments.

use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::baselines::{self, RuinEstimate};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::experiments::config::{DiagnoseBlock, ExperimentConfig};
use crate::experiments::output::{self, fmt_float, FULL_ALLOCATION_LIMIT};
use crate::malliavin::{self, Lemma3Report};
use crate::model::{ClaimDistribution, Strategy};
use crate::numeric::quantile;
use crate::optimizer::{self, IterationRecord, RunTrace};
use crate::projection::{self, oracle, FeasibleRegion};
use crate::rng::{Purpose, StreamKey};

pub const TRACE_FILE: &str = "trace.csv";
pub const ENDPOINTS_FILE: &str = "endpoints.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const COMPARE_FILE: &str = "compare.csv";
pub const COMPARE_SUMMARY_FILE: &str = "compare_summary.json";
pub const DIAGNOSE_FILE: &str = "diagnose.json";

/// Golden header of the comparison CSV.
pub const COMPARE_HEADER: &str =
    "run_id,b_final,ruin_terminal,ruin_terminal_se,ruin_path,ruin_path_se";

pub fn executor_for(config: &ExperimentConfig) -> Result<Executor> {
    match config.run.workers {
        Some(n) => Executor::with_workers(n),
        None => Ok(Executor::available()),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizeSummary {
    pub final_strategy: Strategy,
    pub initial_ruin: Option<RuinEstimate>,
    pub final_ruin: Option<RuinEstimate>,
    pub min_ruin: Option<f64>,
    pub iterations: usize,
    pub master_seed: u64,
    pub wall_secs: f64,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub trace: RunTrace,
    pub summary: OptimizeSummary,
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Runs the optimizer once and writes `trace.csv` and `summary.json`.
pub fn cmd_optimize(
    config: &ExperimentConfig,
    mut progress: impl FnMut(&IterationRecord),
) -> Result<OptimizeOutcome> {
    let experiment = config.build()?;
    let exec = executor_for(config)?;
    let trace = optimizer::run_spg_observed(
        &experiment.model,
        &experiment.region,
        &experiment.spg,
        &experiment.weight,
        &experiment.initial,
        &exec,
        &mut progress,
    )?;
    let out_dir = &config.run.out_dir;
    let trace_path = out_dir.join(TRACE_FILE);
    output::write_text(&trace_path, &output::trace_csv(&trace))?;
    if experiment.model.n_assets() > FULL_ALLOCATION_LIMIT {
        output::write_text(
            &out_dir.join(ENDPOINTS_FILE),
            &output::endpoints_csv(&trace),
        )?;
    }
    let last = trace.records.last().expect("trace holds x_0");
    let summary = OptimizeSummary {
        final_strategy: trace.final_strategy().clone(),
        initial_ruin: trace.initial_ruin(),
        final_ruin: last.ruin,
        min_ruin: trace.final_min_ruin(),
        iterations: experiment.spg.max_iters,
        master_seed: config.run.master_seed,
        wall_secs: trace.wall_secs,
        config: config.clone(),
    };
    let summary_path = out_dir.join(SUMMARY_FILE);
    output::write_json(&summary_path, &summary)?;
    Ok(OptimizeOutcome {
        trace,
        summary,
        trace_path,
        summary_path,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub run_id: String,
    pub b_final: f64,
    pub terminal: RuinEstimate,
    pub path: RuinEstimate,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    fn of(values: &[f64]) -> Self {
        Quartiles {
            q1: quantile(values, 0.25),
            median: quantile(values, 0.5),
            q3: quantile(values, 0.75),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareSummary {
    pub b_star: f64,
    pub b_star_terminal: RuinEstimate,
    pub b_star_path: RuinEstimate,
    pub b_final: Quartiles,
    pub ruin_terminal: Quartiles,
    pub ruin_path: Quartiles,
    pub repetitions: usize,
    pub wall_secs: f64,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug)]
pub struct CompareOutcome {
    pub runs: Vec<CompareRow>,
    pub b_star_row: CompareRow,
    pub summary: CompareSummary,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Seed of repetition `rep` under `master_seed`.
pub fn repetition_seed(master_seed: u64, rep: usize) -> u64 {
    StreamKey::new(master_seed, Purpose::Repetition)
        .index(rep as u64)
        .derive_seed()
}

/// Independent optimizer runs against the adjustment-coefficient retention,
/// all scored on one common evaluation stream.
pub fn cmd_compare(
    config: &ExperimentConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<CompareOutcome> {
    let started = Instant::now();
    let experiment = config.build()?;
    let model = &experiment.model;
    if !model.is_reinsurance_only() {
        return Err(Error::UnsupportedModel(
            "compare needs a reinsurance-only model (cash assets only)".into(),
        ));
    }
    let exec = executor_for(config)?;
    let reps = config.run.repetitions;
    let finals = exec.try_map(reps, |rep| {
        let mut spg = experiment.spg.clone();
        spg.master_seed = repetition_seed(config.run.master_seed, rep);
        let trace = optimizer::run_spg(
            model,
            &experiment.region,
            &spg,
            &experiment.weight,
            &experiment.initial,
            &Executor::sequential(),
        )?;
        Ok(trace.final_strategy().b())
    })?;

    let eval_key = StreamKey::new(config.run.master_seed, Purpose::MonteCarlo);
    let n_eval = config.run.final_eval;
    let score = |run_id: String, b: f64| -> Result<CompareRow> {
        let (terminal, path) =
            baselines::mc_ruin_terminal_and_path(model, b, n_eval, eval_key, &exec)?;
        Ok(CompareRow {
            run_id,
            b_final: b,
            terminal,
            path,
        })
    };
    let mut runs = Vec::with_capacity(reps);
    for (rep, &b) in finals.iter().enumerate() {
        let row = score(rep.to_string(), b)?;
        progress(rep, row.terminal.probability);
        runs.push(row);
    }
    let ClaimDistribution::Gamma { shape, .. } = *model.claim();
    let b_star = baselines::adjustment_coefficient_b_star(shape, model.theta(), model.zeta())?;
    let b_star_row = score("b_star".into(), b_star)?;

    let mut csv = format!("{COMPARE_HEADER}\n");
    for row in runs.iter().chain(std::iter::once(&b_star_row)) {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.run_id,
            fmt_float(row.b_final),
            fmt_float(row.terminal.probability),
            fmt_float(row.terminal.std_error),
            fmt_float(row.path.probability),
            fmt_float(row.path.std_error),
        ));
    }
    let csv_path = config.run.out_dir.join(COMPARE_FILE);
    output::write_text(&csv_path, &csv)?;

    let column = |f: fn(&CompareRow) -> f64| runs.iter().map(f).collect::<Vec<f64>>();
    let summary = CompareSummary {
        b_star,
        b_star_terminal: b_star_row.terminal,
        b_star_path: b_star_row.path,
        b_final: Quartiles::of(&column(|r| r.b_final)),
        ruin_terminal: Quartiles::of(&column(|r| r.terminal.probability)),
        ruin_path: Quartiles::of(&column(|r| r.path.probability)),
        repetitions: reps,
        wall_secs: started.elapsed().as_secs_f64(),
        config: config.clone(),
    };
    let summary_path = config.run.out_dir.join(COMPARE_SUMMARY_FILE);
    output::write_json(&summary_path, &summary)?;
    Ok(CompareOutcome {
        runs,
        b_star_row,
        summary,
        csv_path,
        summary_path,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Measured quantity compared against `threshold`.
    pub statistic: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnoseReport {
    pub checks: Vec<CheckResult>,
    pub lemma3: Lemma3Report,
}

impl DiagnoseReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DiagnoseOptions {
    /// Negate `w'` to confirm the unbiasedness check can fail.
    pub corrupt_weight_derivative: bool,
}

/// Worst-case statistics of a random sweep over projection properties.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProjectionSweep {
    pub points: usize,
    /// Largest coordinate gap to the active-set oracle.
    pub max_oracle_gap: f64,
    /// Smallest `<g, P> - ||P||^2`.
    pub min_descent_slack: f64,
    /// Smallest `||g1 - g2|| - ||P(g1) - P(g2)||`.
    pub min_lipschitz_slack: f64,
}

fn random_feasible<R: Rng>(rng: &mut R, region: &FeasibleRegion) -> Strategy {
    let raw: Vec<f64> = (0..region.m())
        .map(|_| -rng.random::<f64>().max(1e-300).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    let mut x: Vec<f64> = raw.iter().map(|v| v / total).collect();
    // sparse corners are where clipping happens
    if rng.random::<f64>() < 0.3 {
        let j = rng.random_range(0..region.m());
        x.iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = if i == j { 1.0 } else { 0.0 });
    }
    x.push(region.b_min() + (1.0 - region.b_min()) * rng.random::<f64>());
    projection::project_feasible(region, &x).expect("dimension matches")
}

fn random_vector<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect::<Vec<f64>>()
}

/// Checks the sort-based projection against the active-set oracle and the
/// two gradient-mapping inequalities on `points` random inputs per dimension.
pub fn projection_sweep(
    dims: &[usize],
    points: usize,
    b_min: f64,
    seed: u64,
) -> Result<ProjectionSweep> {
    let mut sweep = ProjectionSweep {
        points: 0,
        max_oracle_gap: 0.0,
        min_descent_slack: f64::INFINITY,
        min_lipschitz_slack: f64::INFINITY,
    };
    for &m in dims {
        let region = FeasibleRegion::new(m, b_min)?;
        let mut rng = StreamKey::new(seed, Purpose::Sweep)
            .iteration(m as u64)
            .rng();
        for _ in 0..points {
            let v = random_vector(&mut rng, m, 1.5);
            let fast = projection::project_simplex(&v)?;
            let exact = oracle::project_simplex_active_set(&v);
            for (a, b) in fast.iter().zip(&exact) {
                sweep.max_oracle_gap = sweep.max_oracle_gap.max((a - b).abs());
            }

            let x = random_feasible(&mut rng, &region);
            let gamma = 10f64.powf(rng.random_range(-2.0..1.0));
            let g1 = random_vector(&mut rng, m + 1, 2.0);
            let g2 = random_vector(&mut rng, m + 1, 2.0);
            let p1 = projection::projected_gradient_mapping(&region, &x, &g1, gamma)?;
            let p2 = projection::projected_gradient_mapping(&region, &x, &g2, gamma)?;
            let inner: f64 = g1.iter().zip(&p1).map(|(a, b)| a * b).sum();
            let p_norm_sq: f64 = p1.iter().map(|a| a * a).sum();
            sweep.min_descent_slack = sweep.min_descent_slack.min(inner - p_norm_sq);
            let dg: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
            let dp: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a - b).collect();
            sweep.min_lipschitz_slack = sweep
                .min_lipschitz_slack
                .min(projection::norm(&dg) - projection::norm(&dp));
            sweep.points += 1;
        }
    }
    Ok(sweep)
}

fn check(name: &str, passed: bool, statistic: f64, threshold: f64, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        statistic,
        threshold,
        detail,
    }
}

pub fn cmd_diagnose(config: &ExperimentConfig, options: DiagnoseOptions) -> Result<DiagnoseReport> {
    let experiment = config.build()?;
    let exec = executor_for(config)?;
    let settings = config.diagnose.clone().unwrap_or_default();
    let DiagnoseBlock {
        lemma_samples,
        gradient_samples,
        fd_step,
        probe_b,
        projection_points,
    } = settings;
    let model = &experiment.model;
    let seed = config.run.master_seed;
    let mut weight = experiment.weight;
    if options.corrupt_weight_derivative {
        weight = weight.with_flipped_derivative();
    }
    let mut checks = Vec::new();

    let lemma3 = malliavin::lemma3_diagnostic(
        model,
        &weight,
        lemma_samples,
        StreamKey::new(seed, Purpose::Diagnostic),
        &exec,
    )?;
    let z = lemma3.z_score();
    checks.push(check(
        "lemma3_identity",
        z <= 3.0,
        z,
        3.0,
        format!(
            "empirical {:.6} vs analytic {:.6} (se {:.6})",
            lemma3.empirical_mean, lemma3.analytic_value, lemma3.std_error
        ),
    ));
    if weight.exponent() == 0.125 {
        let integral = weight.inverse_fourth_integral().value;
        let gap = (integral - std::f64::consts::PI).abs();
        checks.push(check(
            "weight_integral_quadrature",
            gap <= 1e-8,
            gap,
            1e-8,
            format!("quadrature {integral:.15} vs pi"),
        ));
    }

    let probe = Strategy::new(
        experiment.initial.p().to_vec(),
        probe_b,
        experiment.region.b_min(),
    )
    .map_err(|e| Error::Config(format!("diagnose.probe_b: {e}")))?;
    let malliavin_mean = malliavin::estimate_gradient(
        model,
        &probe,
        &weight,
        gradient_samples,
        StreamKey::new(seed, Purpose::Diagnostic).iteration(1),
        &exec,
    )?;
    let m = model.n_assets();
    let mut steps = vec![0.0; m + 1];
    steps[m] = fd_step;
    if m >= 2 {
        steps[0] = fd_step
            .min(0.5 * probe.p()[0])
            .min(0.5 * (1.0 - probe.p()[0]));
    }
    let fd = baselines::finite_difference_gradient(
        model,
        &probe,
        &steps,
        gradient_samples,
        StreamKey::new(seed, Purpose::FiniteDifference),
        &exec,
    )?;
    for (j, diff) in fd.iter().enumerate() {
        let Some(diff) = diff else { continue };
        let se = (diff.std_error.powi(2) + malliavin_mean.std_errors[j].powi(2)).sqrt();
        let z = (malliavin_mean.mean[j] - diff.value).abs() / se;
        let name = if j == m {
            "gradient_unbiasedness_b".to_string()
        } else {
            format!("gradient_unbiasedness_p{j}")
        };
        checks.push(check(
            &name,
            z <= 3.0,
            z,
            3.0,
            format!(
                "malliavin {:.6} (se {:.6}) vs finite difference {:.6} (se {:.6})",
                malliavin_mean.mean[j], malliavin_mean.std_errors[j], diff.value, diff.std_error
            ),
        ));
    }

    let sweep = projection_sweep(
        &[2, 3, 4, 5],
        projection_points,
        experiment.region.b_min(),
        seed,
    )?;
    checks.push(check(
        "projection_active_set",
        sweep.max_oracle_gap <= 1e-8,
        sweep.max_oracle_gap,
        1e-8,
        format!("{} random points", sweep.points),
    ));
    checks.push(check(
        "gradient_mapping_descent",
        sweep.min_descent_slack >= -1e-10,
        sweep.min_descent_slack,
        -1e-10,
        "min <g, P> - ||P||^2".into(),
    ));
    checks.push(check(
        "gradient_mapping_lipschitz",
        sweep.min_lipschitz_slack >= -1e-10,
        sweep.min_lipschitz_slack,
        -1e-10,
        "min ||g1 - g2|| - ||P1 - P2||".into(),
    ));

    let ClaimDistribution::Gamma { shape, .. } = *model.claim();
    let closed = baselines::adjustment_coefficient_b_star(shape, model.theta(), model.zeta())?;
    match baselines::lundberg_b_star_oracle(model, experiment.region.b_min(), 400) {
        Ok(numeric) => {
            let gap = (closed - numeric).abs();
            checks.push(check(
                "b_star_lundberg",
                gap <= 1e-4,
                gap,
                1e-4,
                format!("closed form {closed:.8} vs Lundberg maximizer {numeric:.8}"),
            ));
        }
        Err(e) => checks.push(check(
            "b_star_lundberg",
            false,
            f64::NAN,
            1e-4,
            e.to_string(),
        )),
    }

    let report = DiagnoseReport { checks, lemma3 };
    output::write_json(&config.run.out_dir.join(DIAGNOSE_FILE), &report)?;
    Ok(report)
}
