//! Simulation of hybrid systems `H = (C, f, D, G)`.
//!
//! A solution alternates flows and jumps. Flows are integrated with an
//! adaptive L-stable Rosenbrock scheme; a flow ends at the horizon, at an
//! input breakpoint, or at the first point where the jump-set margin turns
//! non-negative, which is located by a safeguarded regula-falsi search on
//! the step size. Jumps are selected by a pluggable [`JumpPolicy`].

mod rodas;
pub mod signal;
mod trajectory;

use std::collections::VecDeque;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use rodas::Rodas;
pub use signal::{InputSignal, Signal, Step};
pub use trajectory::{HybridTime, JumpRecord, Sample, SolverStats, Termination, Trajectory};

/// A hybrid system with continuous state in `R^n` and a discrete part.
///
/// Margins are signed: `flow_margin >= 0` iff `(x, u)` lies in the flow set
/// and `jump_margin >= 0` iff it lies in the jump set. They must be
/// continuous along flows for event location to work.
pub trait HybridSystem {
    type Discrete: Clone + Debug + PartialEq;
    type Input: Clone;
    type Jump: Copy + Debug + PartialEq;

    fn dim(&self) -> usize;

    fn flow(&self, x: &[f64], d: &Self::Discrete, u: &Self::Input, dx: &mut [f64]) -> Result<()>;

    fn flow_margin(&self, _x: &[f64], _d: &Self::Discrete, _u: &Self::Input) -> f64 {
        f64::INFINITY
    }

    fn jump_margin(&self, _x: &[f64], _d: &Self::Discrete, _u: &Self::Input) -> f64 {
        f64::NEG_INFINITY
    }

    fn enabled_jumps(
        &self,
        _x: &[f64],
        _d: &Self::Discrete,
        _u: &Self::Input,
        _out: &mut Vec<Self::Jump>,
    ) {
    }

    fn apply_jump(&self, x: &mut [f64], d: &mut Self::Discrete, jump: Self::Jump) -> Result<()>;

    /// Absolute tolerance per continuous component.
    fn abs_tol(&self) -> Vec<f64>;

    /// `Some(reason)` if the state left the region where the model is meaningful.
    fn escaped(&self, _x: &[f64], _d: &Self::Discrete) -> Option<String> {
        None
    }
}

/// Ordering information used by [`PriorityPolicy`].
pub trait JumpPriority {
    /// Lower values win.
    fn priority(&self) -> u32;

    /// Completion jumps may fire during the post-jump dwell.
    fn is_completion(&self) -> bool {
        false
    }
}

/// Resolves the nondeterminism of the set-valued jump map.
pub trait JumpPolicy<J> {
    /// Picks one of `enabled` (never empty). `prefer_flow` is set right after
    /// a jump when the state still lies in the flow set; returning `None`
    /// then makes the solver flow for one dwell step first.
    fn select(&self, enabled: &[J], prefer_flow: bool) -> Option<J>;
}

/// Lowest priority value first; only completion jumps interrupt a dwell.
#[derive(Clone, Copy, Debug, Default)]
pub struct PriorityPolicy;

impl<J: JumpPriority + Copy> JumpPolicy<J> for PriorityPolicy {
    fn select(&self, enabled: &[J], prefer_flow: bool) -> Option<J> {
        enabled
            .iter()
            .filter(|j| !prefer_flow || j.is_completion())
            .min_by_key(|j| j.priority())
            .copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizon {
    pub t_end: f64,
    #[serde(default = "default_j_max")]
    pub j_max: u64,
}

fn default_j_max() -> u64 {
    1_000_000
}

impl Horizon {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            j_max: default_j_max(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub rel_tol: f64,
    /// Multiplies the system's per-component absolute tolerances.
    pub abs_tol_scale: f64,
    pub initial_step: f64,
    /// Largest step; `null` in JSON means unbounded.
    #[serde(with = "unbounded")]
    pub max_step: f64,
    /// Step-size underflow threshold [s].
    pub min_step: f64,
    /// Jump-set margin at which a located event is accepted.
    pub guard_tol: f64,
    /// Slack on flow-set membership when deciding whether the state is viable.
    pub viability_tol: f64,
    /// Flow length taken right after a jump that leaves the state in `C ∩ D`.
    pub dwell_step: f64,
    pub zeno_max_jumps: usize,
    pub zeno_window: f64,
    pub max_steps: u64,
    /// Store a sample at every accepted step (otherwise only around jumps,
    /// at breakpoints and at the end).
    pub record_steps: bool,
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol_scale: 1.0,
            initial_step: 1e-6,
            max_step: f64::INFINITY,
            min_step: 1e-15,
            guard_tol: 1e-10,
            viability_tol: 1e-9,
            dwell_step: 1e-9,
            zeno_max_jumps: 100,
            zeno_window: 1e-6,
            max_steps: 50_000_000,
            record_steps: true,
        }
    }
}

struct Run<'a, S: HybridSystem, I> {
    sys: &'a S,
    input: &'a I,
    opts: &'a SolverOptions,
    atol: Vec<f64>,
    rodas: Rodas,
    stats: SolverStats,
}

impl<'a, S, I> Run<'a, S, I>
where
    S: HybridSystem,
    I: InputSignal<Value = S::Input>,
{
    fn eval(&self, t: f64, piece: f64, x: &[f64], d: &S::Discrete, dx: &mut [f64]) -> Result<()> {
        let u = self.input.value(t, piece);
        self.sys.flow(x, d, &u, dx)
    }

    fn error_norm(&self, y: &[f64], y_new: &[f64], err: &[f64]) -> f64 {
        let n = y.len() as f64;
        let sum: f64 = (0..y.len())
            .map(|i| {
                let sc = self.atol[i] + self.opts.rel_tol * y[i].abs().max(y_new[i].abs());
                (err[i] / sc).powi(2)
            })
            .sum();
        (sum / n).sqrt()
    }

    /// One trial step of size `h` with the prepared Jacobian.
    #[allow(clippy::too_many_arguments)]
    fn trial(
        &mut self,
        t: f64,
        piece: f64,
        x: &[f64],
        f0: &[f64],
        d: &S::Discrete,
        h: f64,
        y_out: &mut [f64],
        err: &mut [f64],
    ) -> Result<()> {
        let (sys, input) = (self.sys, self.input);
        let mut rhs = |tt: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            let u = input.value(tt, piece);
            sys.flow(y, d, &u, dy)
        };
        self.rodas.step(&mut rhs, t, x, f0, h, y_out, err)
    }
}

/// Integrates `sys` from `(x0, d0)` at `t = 0` until the horizon or a
/// termination condition. Errors raised by the model are reported through
/// [`Termination::SolverFailure`] with the partial trajectory preserved.
pub fn simulate<S, I, P>(
    sys: &S,
    x0: &[f64],
    d0: S::Discrete,
    input: &I,
    horizon: Horizon,
    policy: &P,
    opts: &SolverOptions,
) -> Trajectory<S::Discrete, S::Input, S::Jump>
where
    S: HybridSystem,
    I: InputSignal<Value = S::Input>,
    P: JumpPolicy<S::Jump>,
{
    let n = sys.dim();
    assert_eq!(x0.len(), n, "initial state has the wrong dimension");
    let atol: Vec<f64> = sys.abs_tol().iter().map(|a| a * opts.abs_tol_scale).collect();
    let scale: Vec<f64> = atol.iter().map(|a| a / opts.rel_tol).collect();
    let mut run = Run {
        sys,
        input,
        opts,
        atol,
        rodas: Rodas::new(n),
        stats: SolverStats::default(),
    };

    let mut t = 0.0_f64;
    let mut j = 0_u64;
    let mut piece = 0.0_f64;
    let mut x = x0.to_vec();
    let mut d = d0;
    let mut f0 = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut y_evt = vec![0.0; n];
    let mut h = opts.initial_step;
    let mut dwell_pending = false;
    let mut recent_jumps: VecDeque<f64> = VecDeque::new();
    let mut enabled: Vec<S::Jump> = Vec::new();
    let mut samples = Vec::new();
    let mut jumps = Vec::new();

    macro_rules! finish {
        ($term:expr) => {{
            let mut stats = run.stats;
            stats.rhs_evals += run.rodas.counters.rhs;
            stats.jacobian_evals = run.rodas.counters.jac;
            stats.decompositions = run.rodas.counters.lu;
            stats.jumps = j;
            return Trajectory {
                samples,
                jumps,
                termination: $term,
                stats,
            };
        }};
    }

    macro_rules! push_sample {
        ($dx:expr) => {
            samples.push(Sample {
                time: HybridTime { t, j },
                x: x.clone(),
                dx: $dx,
                discrete: d.clone(),
                input: input.value(t, piece),
            })
        };
    }

    if let Err(e) = run.eval(t, piece, &x, &d, &mut f0) {
        push_sample!(vec![0.0; n]);
        finish!(Termination::SolverFailure(e.to_string()));
    }
    run.stats.rhs_evals += 1;
    push_sample!(f0.clone());
    let mut f0_valid = true;
    let time_eps = |t: f64| 4.0 * f64::EPSILON * t.abs().max(1.0);

    loop {
        if t >= horizon.t_end - time_eps(horizon.t_end) || j >= horizon.j_max {
            if !opts.record_steps && samples.last().is_some_and(|s| s.time != (HybridTime { t, j })) {
                let mut dx = vec![0.0; n];
                if run.eval(t, piece, &x, &d, &mut dx).is_ok() {
                    push_sample!(dx);
                }
            }
            finish!(Termination::TimeHorizon);
        }
        if let Some(reason) = sys.escaped(&x, &d) {
            finish!(Termination::Escape(reason));
        }
        let u = input.value(t, piece);

        // Jump phase.
        enabled.clear();
        sys.enabled_jumps(&x, &d, &u, &mut enabled);
        let in_flow_set = sys.flow_margin(&x, &d, &u) >= -opts.viability_tol;
        if !enabled.is_empty() {
            if let Some(jump) = policy.select(&enabled, dwell_pending && in_flow_set) {
                if !opts.record_steps && samples.last().is_some_and(|s| s.time != (HybridTime { t, j })) {
                    let mut dx = vec![0.0; n];
                    let _ = run.eval(t, piece, &x, &d, &mut dx);
                    push_sample!(dx);
                }
                let before = d.clone();
                if let Err(e) = sys.apply_jump(&mut x, &mut d, jump) {
                    finish!(Termination::SolverFailure(e.to_string()));
                }
                j += 1;
                jumps.push(JumpRecord {
                    time: HybridTime { t, j },
                    jump,
                    before,
                    after: d.clone(),
                });
                match run.eval(t, piece, &x, &d, &mut f0) {
                    Ok(()) => f0_valid = true,
                    Err(e) => finish!(Termination::SolverFailure(e.to_string())),
                }
                run.stats.rhs_evals += 1;
                push_sample!(f0.clone());
                recent_jumps.push_back(t);
                while recent_jumps.front().is_some_and(|&s| s < t - opts.zeno_window) {
                    recent_jumps.pop_front();
                }
                if recent_jumps.len() > opts.zeno_max_jumps {
                    finish!(Termination::ZenoGuard {
                        t,
                        jumps: recent_jumps.len()
                    });
                }
                dwell_pending = true;
                continue;
            }
        } else if !in_flow_set {
            finish!(Termination::SolverFailure(format!(
                "state left C ∪ D at t = {t} (flow margin {:e})",
                sys.flow_margin(&x, &d, &u)
            )));
        }
        let dwell = dwell_pending && !enabled.is_empty();
        dwell_pending = false;

        // Flow phase: one accepted step.
        let seg_end = input
            .next_breakpoint(t)
            .map_or(horizon.t_end, |b| b.min(horizon.t_end));
        if seg_end - t <= time_eps(t) {
            t = seg_end;
            piece = t;
            f0_valid = false;
            continue;
        }
        if !f0_valid {
            if let Err(e) = run.eval(t, piece, &x, &d, &mut f0) {
                finish!(Termination::SolverFailure(e.to_string()));
            }
            run.stats.rhs_evals += 1;
        }
        {
            let (sys_ref, input_ref) = (sys, input);
            let dref = &d;
            let mut rhs = |tt: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
                let u = input_ref.value(tt, piece);
                sys_ref.flow(y, dref, &u, dy)
            };
            if let Err(e) = run.rodas.prepare(
                &mut rhs,
                t,
                &x,
                &f0,
                &scale,
                input.piecewise_constant(),
                seg_end,
            ) {
                finish!(Termination::SolverFailure(format!("Jacobian evaluation: {e}")));
            }
        }
        let g_start = if dwell {
            f64::NAN
        } else {
            sys.jump_margin(&x, &d, &u)
        };

        let mut h_try = if dwell {
            opts.dwell_step.min(seg_end - t)
        } else {
            h.min(opts.max_step).min(seg_end - t)
        };
        // Avoid leaving a sliver before the breakpoint.
        if !dwell && seg_end - t - h_try < 1e-3 * h_try {
            h_try = seg_end - t;
        }
        let (h_done, reached_end) = loop {
            if run.stats.accepted_steps + run.stats.rejected_steps >= opts.max_steps {
                finish!(Termination::SolverFailure("step budget exhausted".into()));
            }
            if h_try < opts.min_step {
                finish!(Termination::SolverFailure(format!(
                    "step size underflow ({h_try:e} s) at t = {t}"
                )));
            }
            match run.trial(t, piece, &x, &f0, &d, h_try, &mut y_new, &mut err) {
                Ok(()) => {
                    let e = run.error_norm(&x, &y_new, &err);
                    if e <= 1.0 {
                        run.stats.accepted_steps += 1;
                        let grow = if e == 0.0 { 6.0 } else { (0.9 * e.powf(-0.25)).clamp(0.2, 6.0) };
                        if !dwell {
                            h = h_try * grow;
                        }
                        break (h_try, h_try >= seg_end - t);
                    }
                    run.stats.rejected_steps += 1;
                    h_try *= (0.9 * e.powf(-0.25)).clamp(0.1, 0.9);
                }
                Err(_) => {
                    run.stats.rejected_steps += 1;
                    h_try *= 0.25;
                }
            }
        };

        // Event detection on the accepted step.
        let mut t_new = if reached_end { seg_end } else { t + h_done };
        if !dwell && g_start < 0.0 {
            let u_end = input.value(t_new, piece);
            let mut g_end = sys.jump_margin(&y_new, &d, &u_end);
            if g_end >= 0.0 {
                // Safeguarded Illinois iteration on the step size.
                let (mut a, mut ga) = (0.0_f64, g_start);
                let (mut b, mut gb) = (h_done, g_end);
                let (mut wa, mut wb) = (ga, gb);
                let mut side = 0_i8;
                y_evt.copy_from_slice(&y_new);
                let width_tol = 1e-13 * t.abs().max(1.0);
                for _ in 0..200 {
                    if gb <= opts.guard_tol || b - a <= width_tol {
                        break;
                    }
                    let mut c = b - wb * (b - a) / (wb - wa);
                    let lo = a + 0.05 * (b - a);
                    let hi = b - 0.05 * (b - a);
                    if !c.is_finite() || c <= lo || c >= hi {
                        c = c.clamp(lo, hi);
                        if !c.is_finite() {
                            c = 0.5 * (a + b);
                        }
                    }
                    run.stats.event_iterations += 1;
                    if run
                        .trial(t, piece, &x, &f0, &d, c, &mut y_new, &mut err)
                        .is_err()
                    {
                        c = 0.5 * (a + b);
                        if run
                            .trial(t, piece, &x, &f0, &d, c, &mut y_new, &mut err)
                            .is_err()
                        {
                            break;
                        }
                    }
                    let gc = sys.jump_margin(&y_new, &d, &input.value(t + c, piece));
                    if gc >= 0.0 {
                        b = c;
                        gb = gc;
                        wb = gc;
                        y_evt.copy_from_slice(&y_new);
                        if side == 1 {
                            wa *= 0.5;
                        }
                        side = 1;
                    } else {
                        a = c;
                        ga = gc;
                        wa = gc;
                        if side == -1 {
                            wb *= 0.5;
                        }
                        side = -1;
                    }
                }
                let _ = ga;
                y_new.copy_from_slice(&y_evt);
                g_end = gb;
                let _ = g_end;
                if b < h_done {
                    t_new = t + b;
                }
            }
        }

        t = t_new;
        x.copy_from_slice(&y_new);
        if reached_end && t == seg_end {
            // Keep the left derivative for interpolation up to the breakpoint.
            if opts.record_steps && t < horizon.t_end {
                match run.eval(t, piece, &x, &d, &mut f0) {
                    Ok(()) => push_sample!(f0.clone()),
                    Err(e) => finish!(Termination::SolverFailure(e.to_string())),
                }
                run.stats.rhs_evals += 1;
            }
            piece = seg_end;
        }
        match run.eval(t, piece, &x, &d, &mut f0) {
            Ok(()) => f0_valid = true,
            Err(e) => finish!(Termination::SolverFailure(e.to_string())),
        }
        run.stats.rhs_evals += 1;
        if opts.record_steps {
            push_sample!(f0.clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn options_survive_json() {
        let opts = SolverOptions::default();
        let text = serde_json::to_string(&opts).unwrap();
        assert!(text.contains("\"max_step\":null"));
        assert_eq!(serde_json::from_str::<SolverOptions>(&text).unwrap(), opts);
        let bounded = SolverOptions { max_step: 0.5, ..opts };
        let back: SolverOptions = serde_json::from_str(&serde_json::to_string(&bounded).unwrap()).unwrap();
        assert_eq!(back.max_step, 0.5);
    }

    /// Scalar system x' = a x + b with an optional threshold jump set `x >= level`.
    struct Scalar {
        a: f64,
        b: f64,
        level: Option<f64>,
    }

    #[derive(Clone, Copy, Debug, PartialEq)]
    struct Reset;

    impl JumpPriority for Reset {
        fn priority(&self) -> u32 {
            0
        }
    }

    impl HybridSystem for Scalar {
        type Discrete = u32;
        type Input = f64;
        type Jump = Reset;

        fn dim(&self) -> usize {
            1
        }

        fn flow(&self, x: &[f64], _d: &u32, _u: &f64, dx: &mut [f64]) -> Result<()> {
            dx[0] = self.a * x[0] + self.b;
            Ok(())
        }

        fn jump_margin(&self, x: &[f64], _d: &u32, _u: &f64) -> f64 {
            self.level.map_or(f64::NEG_INFINITY, |l| x[0] - l)
        }

        fn enabled_jumps(&self, x: &[f64], d: &u32, u: &f64, out: &mut Vec<Reset>) {
            if self.jump_margin(x, d, u) >= 0.0 {
                out.push(Reset);
            }
        }

        fn apply_jump(&self, x: &mut [f64], d: &mut u32, _j: Reset) -> Result<()> {
            x[0] = 0.0;
            *d += 1;
            Ok(())
        }

        fn abs_tol(&self) -> Vec<f64> {
            vec![1e-12]
        }
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let sys = Scalar {
            a: -1.0,
            b: 0.0,
            level: None,
        };
        let traj = simulate(
            &sys,
            &[1.0],
            0,
            &Signal::constant(0.0),
            Horizon::new(5.0),
            &PriorityPolicy,
            &SolverOptions::default(),
        );
        assert!(traj.termination.is_horizon());
        assert_eq!(traj.jumps.len(), 0);
        for s in &traj.samples {
            let exact = (-s.time.t).exp();
            assert!(((s.x[0] - exact) / exact).abs() < 1e-8, "t={} x={}", s.time.t, s.x[0]);
            assert_eq!(s.time.j, 0);
        }
        assert_eq!(traj.last().time.t, 5.0);
    }

    fn first_event_time(guard_tol: f64) -> f64 {
        let sys = Scalar {
            a: 0.0,
            b: 1.0,
            level: Some(1.0),
        };
        let opts = SolverOptions {
            guard_tol,
            initial_step: 0.3,
            ..SolverOptions::default()
        };
        let traj = simulate(
            &sys,
            &[0.0],
            0,
            &Signal::constant(0.0),
            Horizon::new(1.5),
            &PriorityPolicy,
            &opts,
        );
        assert!(traj.termination.is_horizon(), "{}", traj.termination);
        traj.jumps[0].time.t
    }

    #[test]
    fn guard_crossing_located() {
        let t1 = first_event_time(1e-10);
        assert!((t1 - 1.0).abs() < 1e-9, "event at {t1}");
        let t2 = first_event_time(5e-11);
        assert!((t1 - t2).abs() < 1e-10);
    }

    #[test]
    fn breakpoints_are_not_crossed() {
        let sys = Scalar {
            a: -1.0,
            b: 0.0,
            level: None,
        };
        let input = Signal::steps(vec![
            Step { level: 0.0, duration: 0.7 },
            Step { level: 1.0, duration: 1.0 },
        ])
        .unwrap();
        let traj = simulate(
            &sys,
            &[1.0],
            0,
            &input,
            Horizon::new(2.0),
            &PriorityPolicy,
            &SolverOptions::default(),
        );
        assert!(traj.samples.iter().any(|s| s.time.t == 0.7));
        assert!(traj.samples.iter().any(|s| s.time.t == 1.7));
    }

    #[test]
    fn jump_limit_ends_run() {
        let sys = Scalar {
            a: 0.0,
            b: 1.0,
            level: Some(0.1),
        };
        let traj = simulate(
            &sys,
            &[0.0],
            0,
            &Signal::constant(0.0),
            Horizon { t_end: 10.0, j_max: 3 },
            &PriorityPolicy,
            &SolverOptions::default(),
        );
        assert!(traj.termination.is_horizon());
        assert_eq!(traj.last().time.j, 3);
        assert!((traj.last().time.t - 0.3).abs() < 1e-8);
        assert!(traj.time_domain_is_consistent());
    }
}
