use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

/// A point `(t, j)` of a hybrid time domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HybridTime {
    pub t: f64,
    pub j: u64,
}

impl PartialOrd for HybridTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.t.partial_cmp(&other.t)? {
            Ordering::Equal => Some(self.j.cmp(&other.j)),
            o => Some(o),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Sample<D, U> {
    pub time: HybridTime,
    pub x: Vec<f64>,
    /// Flow-map value at the sample, used for dense interpolation.
    pub dx: Vec<f64>,
    pub discrete: D,
    pub input: U,
}

#[derive(Clone, Debug)]
pub struct JumpRecord<D, J> {
    /// Hybrid time right after the jump.
    pub time: HybridTime,
    pub jump: J,
    pub before: D,
    pub after: D,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", content = "detail", rename_all = "kebab-case")]
pub enum Termination {
    /// `t_end` or `j_max` reached.
    TimeHorizon,
    ZenoGuard { t: f64, jumps: usize },
    Escape(String),
    SolverFailure(String),
}

impl Termination {
    pub fn is_horizon(&self) -> bool {
        matches!(self, Termination::TimeHorizon)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::TimeHorizon => write!(f, "time horizon reached"),
            Termination::ZenoGuard { t, jumps } => {
                write!(f, "Zeno guard: {jumps} jumps within the window ending at t = {t} s")
            }
            Termination::Escape(m) => write!(f, "escape: {m}"),
            Termination::SolverFailure(m) => write!(f, "solver failure: {m}"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub rhs_evals: u64,
    pub jacobian_evals: u64,
    pub decompositions: u64,
    pub event_iterations: u64,
    pub jumps: u64,
}

/// Solution pair sampled at every accepted step and around every jump.
#[derive(Clone, Debug)]
pub struct Trajectory<D, U, J> {
    pub samples: Vec<Sample<D, U>>,
    pub jumps: Vec<JumpRecord<D, J>>,
    pub termination: Termination,
    pub stats: SolverStats,
}

impl<D, U, J> Trajectory<D, U, J> {
    pub fn last(&self) -> &Sample<D, U> {
        self.samples.last().expect("trajectory holds the initial sample")
    }

    pub fn end_time(&self) -> HybridTime {
        self.last().time
    }

    /// Continuous state at flow time `t` (cubic Hermite between accepted
    /// steps) together with the discrete state in force at `t`. Where jumps
    /// happen at `t`, the post-jump state is returned.
    pub fn state_at(&self, t: f64) -> Option<(Vec<f64>, &D)> {
        let first = self.samples.first()?;
        if t < first.time.t || t > self.last().time.t {
            return None;
        }
        let i = self.samples.partition_point(|s| s.time.t <= t) - 1;
        let a = &self.samples[i];
        let Some(b) = self.samples.get(i + 1) else {
            return Some((a.x.clone(), &a.discrete));
        };
        let h = b.time.t - a.time.t;
        if h <= 0.0 {
            return Some((a.x.clone(), &a.discrete));
        }
        let s = (t - a.time.t) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let x = (0..a.x.len())
            .map(|k| h00 * a.x[k] + h10 * h * a.dx[k] + h01 * b.x[k] + h11 * h * b.dx[k])
            .collect();
        Some((x, &a.discrete))
    }

}

impl<D: PartialEq, U, J> Trajectory<D, U, J> {
    /// Checks that hybrid time is nondecreasing, `t` is constant across
    /// jumps and `j` increments by one at each jump. Input breakpoints are
    /// recorded twice, with the left and the right derivative.
    pub fn time_domain_is_consistent(&self) -> bool {
        self.samples.windows(2).all(|w| {
            let (a, b) = (w[0].time, w[1].time);
            let same_state = w[0].x == w[1].x && w[0].discrete == w[1].discrete;
            (b.j == a.j && (b.t > a.t || (b.t == a.t && same_state))) || (b.j == a.j + 1 && b.t == a.t)
        })
    }
}
