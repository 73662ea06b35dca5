//! Batch comparison of two coupled variants on seeded random-step commands.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scenario::{discrepancy, Discrepancy, RandomSteps, RobotRun, RobotSetup, Variant};
use crate::solver::{Horizon, Signal, SolverStats};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub scenarios: usize,
    pub seed: u64,
    /// Timed repetitions per run; the median is reported.
    pub repetitions: usize,
    pub steps: RandomSteps,
    /// Intervals of the uniform grid on which `alpha` histories are compared.
    pub grid_intervals: usize,
    pub candidate: Variant,
    pub reference: Variant,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            scenarios: 30,
            seed: 1,
            repetitions: 3,
            steps: RandomSteps::default(),
            grid_intervals: 10_000,
            candidate: Variant::Hybrid,
            reference: Variant::Mas,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariantOutcome {
    pub variant: Variant,
    /// Median integration wall-clock time [s].
    pub wall_time_s: f64,
    pub repetitions_s: Vec<f64>,
    pub termination: String,
    pub completed: bool,
    pub jumps: usize,
    pub stats: SolverStats,
    pub max_abs_alpha_rad: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioOutcome {
    pub index: usize,
    pub candidate: Option<VariantOutcome>,
    pub reference: Option<VariantOutcome>,
    /// Candidate vs reference `alpha`, normalized by the reference range.
    pub discrepancy: Option<Discrepancy>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub scenarios: Vec<ScenarioOutcome>,
    pub median_candidate_s: f64,
    pub median_reference_s: f64,
    /// `median_candidate_s / median_reference_s`.
    pub time_ratio: f64,
    pub max_discrepancy: f64,
    pub mean_discrepancy: f64,
    pub max_rms_discrepancy: f64,
    pub failures: usize,
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn timed(
    setup: &RobotSetup,
    variant: Variant,
    input: &Signal,
    horizon: Horizon,
    repetitions: usize,
) -> Result<(VariantOutcome, RobotRun)> {
    let mut times = Vec::with_capacity(repetitions);
    let mut last = None;
    for _ in 0..repetitions.max(1) {
        let start = Instant::now();
        let run = setup.run(variant, input, horizon)?;
        times.push(start.elapsed().as_secs_f64());
        last = Some(run);
    }
    let run = last.expect("at least one repetition");
    let mut sorted = times.clone();
    Ok((
        VariantOutcome {
            variant,
            wall_time_s: median(&mut sorted),
            repetitions_s: times,
            termination: run.termination().to_string(),
            completed: run.termination().is_horizon(),
            jumps: run.jump_count(),
            stats: run.stats(),
            max_abs_alpha_rad: run.max_abs_alpha(),
        },
        run,
    ))
}

fn run_scenario(setup: &RobotSetup, cfg: &BenchmarkConfig, index: usize, input: &Signal) -> ScenarioOutcome {
    let t_end = cfg.steps.duration;
    let horizon = Horizon::new(t_end);
    let mut outcome = ScenarioOutcome {
        index,
        candidate: None,
        reference: None,
        discrepancy: None,
        error: None,
    };
    let cand = timed(setup, cfg.candidate, input, horizon, cfg.repetitions);
    let refr = timed(setup, cfg.reference, input, horizon, cfg.repetitions);
    match (cand, refr) {
        (Ok((co, cr)), Ok((ro, rr))) => {
            if co.completed && ro.completed {
                let a = cr.alpha_on_grid(t_end, cfg.grid_intervals);
                let b = rr.alpha_on_grid(t_end, cfg.grid_intervals);
                outcome.discrepancy = Some(discrepancy(&a, &b));
            } else {
                outcome.error = Some(format!(
                    "incomplete run: {} / {}",
                    co.termination, ro.termination
                ));
            }
            crate::scenario::warn_large_inclination(&cr);
            outcome.candidate = Some(co);
            outcome.reference = Some(ro);
        }
        (c, r) => {
            let msg: Vec<String> = [c.err(), r.err()]
                .into_iter()
                .flatten()
                .map(|e| e.to_string())
                .collect();
            outcome.error = Some(msg.join("; "));
        }
    }
    outcome
}

/// Runs every scenario for both variants. Scenarios run concurrently; each
/// simulation is single-threaded. Failures are recorded and the batch
/// continues.
pub fn run_benchmark(setup: &RobotSetup, cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.steps.validate()?;
    let inputs = cfg.steps.generate(cfg.seed, cfg.scenarios);
    let scenarios: Vec<ScenarioOutcome> = inputs
        .par_iter()
        .enumerate()
        .map(|(k, input)| run_scenario(setup, cfg, k, input))
        .collect();
    let mut cand: Vec<f64> = scenarios
        .iter()
        .filter_map(|s| s.candidate.as_ref().map(|o| o.wall_time_s))
        .collect();
    let mut refr: Vec<f64> = scenarios
        .iter()
        .filter_map(|s| s.reference.as_ref().map(|o| o.wall_time_s))
        .collect();
    let disc: Vec<&Discrepancy> = scenarios.iter().filter_map(|s| s.discrepancy.as_ref()).collect();
    let median_candidate_s = median(&mut cand);
    let median_reference_s = median(&mut refr);
    Ok(BenchmarkReport {
        config: cfg.clone(),
        failures: scenarios.iter().filter(|s| s.error.is_some()).count(),
        median_candidate_s,
        median_reference_s,
        time_ratio: median_candidate_s / median_reference_s,
        max_discrepancy: disc.iter().map(|d| d.max).fold(0.0, f64::max),
        mean_discrepancy: disc.iter().map(|d| d.max).sum::<f64>() / disc.len().max(1) as f64,
        max_rms_discrepancy: disc.iter().map(|d| d.rms).fold(0.0, f64::max),
        scenarios,
    })
}
