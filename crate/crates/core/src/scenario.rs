//! Ready-made simulation setups: the coupled robot under a `J_eq` command
//! with either wire model, and the random-step inputs of the benchmark.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mas::{LinearBarrier, MasWire};
use crate::material::MaterialParams;
use crate::solver::{simulate, Horizon, PriorityPolicy, Signal, SolverOptions, Step, Trajectory};
use crate::structure::{BeamParams, BundleJump, CoupledDrive, CoupledInput, CoupledSystem, Pretension};
use crate::wire::{HybridWire, WireJump};

/// Wire model used inside the coupled robot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Hybrid,
    Mas,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Hybrid => "hybrid",
            Variant::Mas => "mas",
        })
    }
}

/// Distribution of the random step commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomSteps {
    /// Amplitudes are uniform in `[-amplitude_max, amplitude_max]` [W].
    pub amplitude_max: f64,
    /// Dwell times are uniform in `[dwell_min, dwell_max]` [s].
    pub dwell_min: f64,
    pub dwell_max: f64,
    /// Total duration of each command [s].
    pub duration: f64,
}

impl Default for RandomSteps {
    fn default() -> Self {
        Self {
            amplitude_max: 2.0,
            dwell_min: 2.0,
            dwell_max: 20.0,
            duration: 100.0,
        }
    }
}

impl RandomSteps {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude_max >= 0.0)
            || !(self.dwell_min > 0.0)
            || !(self.dwell_max >= self.dwell_min)
            || !(self.duration > 0.0)
        {
            return Err(Error::Config(format!("invalid random-step settings {self:?}")));
        }
        Ok(())
    }

    /// One step sequence; the last step is cut to end exactly at `duration`.
    pub fn sample(&self, rng: &mut impl Rng) -> Signal {
        let mut steps = Vec::new();
        let mut total = 0.0;
        while total < self.duration {
            let level = rng.gen_range(-self.amplitude_max..=self.amplitude_max);
            let dwell = rng.gen_range(self.dwell_min..=self.dwell_max);
            let duration = dwell.min(self.duration - total);
            total += duration;
            steps.push(Step { level, duration });
        }
        Signal::Steps { steps }
    }

    /// `n` commands that depend only on `(seed, n)`.
    pub fn generate(&self, seed: u64, n: usize) -> Vec<Signal> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }
}

/// Everything needed to build the coupled robot.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotSetup {
    pub material: MaterialParams,
    pub beam: BeamParams,
    pub pretension: Pretension,
    pub barrier: LinearBarrier,
    pub ambient: f64,
    pub solver: SolverOptions,
}

impl Default for RobotSetup {
    fn default() -> Self {
        Self {
            material: MaterialParams::cuznal(),
            beam: BeamParams::default(),
            pretension: Pretension::default(),
            barrier: LinearBarrier::default(),
            ambient: 298.0,
            solver: SolverOptions::default(),
        }
    }
}

pub type HybridRobotTrajectory = Trajectory<[crate::wire::WireDiscrete; 2], CoupledInput, BundleJump<WireJump>>;
pub type MasRobotTrajectory = Trajectory<[(); 2], CoupledInput, BundleJump<crate::mas::NoJump>>;

/// Result of a coupled run with either wire model, reduced to what the
/// benchmark and the writers need.
#[derive(Clone, Debug)]
pub enum RobotRun {
    Hybrid {
        system: CoupledSystem<HybridWire>,
        trajectory: HybridRobotTrajectory,
    },
    Mas {
        system: CoupledSystem<MasWire>,
        trajectory: MasRobotTrajectory,
    },
}

impl RobotSetup {
    pub fn hybrid(&self) -> Result<crate::structure::CoupledSetup<HybridWire>> {
        CoupledSystem::at_rest(
            self.beam.clone(),
            &HybridWire::new(self.material.clone()),
            &self.pretension,
            self.ambient,
        )
    }

    pub fn mas(&self) -> Result<crate::structure::CoupledSetup<MasWire>> {
        CoupledSystem::at_rest(
            self.beam.clone(),
            &MasWire::new(self.material.clone(), self.barrier),
            &self.pretension,
            self.ambient,
        )
    }

    pub fn drive(&self, j_eq: Signal) -> CoupledDrive {
        CoupledDrive {
            j_eq,
            ambient: self.ambient,
        }
    }

    /// Simulates the robot under `j_eq` up to `t_end`.
    pub fn run(&self, variant: Variant, j_eq: &Signal, horizon: Horizon) -> Result<RobotRun> {
        j_eq.validate()?;
        let drive = self.drive(j_eq.clone());
        Ok(match variant {
            Variant::Hybrid => {
                let s = self.hybrid()?;
                let trajectory =
                    simulate(&s.system, &s.x0, s.d0, &drive, horizon, &PriorityPolicy, &self.solver);
                RobotRun::Hybrid {
                    system: s.system,
                    trajectory,
                }
            }
            Variant::Mas => {
                let s = self.mas()?;
                let trajectory =
                    simulate(&s.system, &s.x0, s.d0, &drive, horizon, &PriorityPolicy, &self.solver);
                RobotRun::Mas {
                    system: s.system,
                    trajectory,
                }
            }
        })
    }
}

impl RobotRun {
    pub fn termination(&self) -> &crate::solver::Termination {
        match self {
            RobotRun::Hybrid { trajectory, .. } => &trajectory.termination,
            RobotRun::Mas { trajectory, .. } => &trajectory.termination,
        }
    }

    pub fn stats(&self) -> crate::solver::SolverStats {
        match self {
            RobotRun::Hybrid { trajectory, .. } => trajectory.stats,
            RobotRun::Mas { trajectory, .. } => trajectory.stats,
        }
    }

    pub fn jump_count(&self) -> usize {
        match self {
            RobotRun::Hybrid { trajectory, .. } => trajectory.jumps.len(),
            RobotRun::Mas { .. } => 0,
        }
    }

    pub fn end_time(&self) -> f64 {
        match self {
            RobotRun::Hybrid { trajectory, .. } => trajectory.end_time().t,
            RobotRun::Mas { trajectory, .. } => trajectory.end_time().t,
        }
    }

    /// Continuous state at flow time `t`.
    pub fn state_at(&self, t: f64) -> Option<Vec<f64>> {
        match self {
            RobotRun::Hybrid { trajectory, .. } => trajectory.state_at(t).map(|(x, _)| x),
            RobotRun::Mas { trajectory, .. } => trajectory.state_at(t).map(|(x, _)| x),
        }
    }

    /// Tip inclination on a uniform grid of `n + 1` points over `[0, t_end]`.
    pub fn alpha_on_grid(&self, t_end: f64, n: usize) -> Vec<f64> {
        (0..=n)
            .map(|k| {
                let t = t_end * k as f64 / n as f64;
                self.state_at(t.min(self.end_time())).map_or(f64::NAN, |x| x[2])
            })
            .collect()
    }

    pub fn max_abs_alpha(&self) -> f64 {
        fn max_alpha<D, U, J>(t: &Trajectory<D, U, J>) -> f64 {
            t.samples.iter().map(|s| s.x[2].abs()).fold(0.0, f64::max)
        }
        match self {
            RobotRun::Hybrid { trajectory, .. } => max_alpha(trajectory),
            RobotRun::Mas { trajectory, .. } => max_alpha(trajectory),
        }
    }
}

/// Discrepancy between two tip-inclination histories sampled on the same grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Discrepancy {
    /// `max |a - b|` divided by the range of `b`.
    pub max: f64,
    /// RMS of `|a - b|` divided by the range of `b`.
    pub rms: f64,
    /// Range `max b - min b` [rad].
    pub range: f64,
}

pub fn discrepancy(a: &[f64], reference: &[f64]) -> Discrepancy {
    assert_eq!(a.len(), reference.len());
    let hi = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = reference.iter().copied().fold(f64::INFINITY, f64::min);
    let range = hi - lo;
    let (mut max, mut sq) = (0.0_f64, 0.0);
    for (x, y) in a.iter().zip(reference) {
        let d = (x - y).abs();
        max = max.max(d);
        sq += d * d;
    }
    let rms = (sq / a.len() as f64).sqrt();
    let scale = if range > 0.0 { range } else { 1.0 };
    Discrepancy {
        max: max / scale,
        rms: rms / scale,
        range,
    }
}

/// Logs a warning when the run left the small-deformation regime.
pub fn warn_large_inclination(run: &RobotRun) {
    let a = run.max_abs_alpha();
    if a > crate::structure::ALPHA_WARNING {
        log::warn!("tip inclination reached {a:.3} rad; small-deformation assumption is doubtful");
    }
}

/// Signed area `∮ alpha dJ_eq` of each of `periods` consecutive periods of
/// a periodic command [rad·W], by the trapezoidal rule on
/// `points_per_period` intervals. Positive for counterclockwise loops in
/// the `(J_eq, alpha)` plane.
pub fn loop_areas(
    run: &RobotRun,
    j_eq: &Signal,
    period: f64,
    periods: usize,
    points_per_period: usize,
) -> Vec<f64> {
    let n = points_per_period.max(2);
    (0..periods)
        .map(|k| {
            let t0 = k as f64 * period;
            let point = |i: usize| {
                let t = t0 + period * i as f64 / n as f64;
                let alpha = run.state_at(t.min(run.end_time())).map_or(f64::NAN, |x| x[2]);
                (j_eq.at(t), alpha)
            };
            let mut area = 0.0;
            let mut prev = point(0);
            for i in 1..=n {
                let cur = point(i);
                // Shoelace term; the loop closes because J_eq is periodic.
                area += 0.5 * (prev.0 * cur.1 - cur.0 * prev.1);
                prev = cur;
            }
            area
        })
        .collect()
}
