use approx::assert_relative_eq;

use sma_hybrid::solver::{
    simulate, Horizon, HybridSystem, JumpPriority, PriorityPolicy, Signal, SolverOptions, Step, Termination,
};

const G: f64 = 9.81;

/// Ball on the ground with restitution `e`: `x = [height, velocity]`.
struct Ball {
    e: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Bounce;

impl JumpPriority for Bounce {
    fn priority(&self) -> u32 {
        0
    }
}

impl HybridSystem for Ball {
    type Discrete = ();
    type Input = f64;
    type Jump = Bounce;

    fn dim(&self) -> usize {
        2
    }

    fn flow(&self, x: &[f64], _d: &(), _u: &f64, dx: &mut [f64]) -> sma_hybrid::Result<()> {
        dx[0] = x[1];
        dx[1] = -G;
        Ok(())
    }

    fn flow_margin(&self, x: &[f64], _d: &(), _u: &f64) -> f64 {
        x[0]
    }

    fn jump_margin(&self, x: &[f64], _d: &(), _u: &f64) -> f64 {
        (-x[0]).min(-x[1])
    }

    fn enabled_jumps(&self, x: &[f64], d: &(), u: &f64, out: &mut Vec<Bounce>) {
        if self.jump_margin(x, d, u) >= 0.0 {
            out.push(Bounce);
        }
    }

    fn apply_jump(&self, x: &mut [f64], _d: &mut (), _j: Bounce) -> sma_hybrid::Result<()> {
        x[0] = 0.0;
        x[1] = -self.e * x[1];
        Ok(())
    }

    fn abs_tol(&self) -> Vec<f64> {
        vec![1e-12, 1e-12]
    }
}

/// Impact times of a ball dropped from `h0` at rest.
fn impact_times(h0: f64, e: f64, n: usize) -> Vec<f64> {
    let mut t = (2.0 * h0 / G).sqrt();
    let mut v = G * t;
    let mut out = vec![t];
    for _ in 1..n {
        v *= e;
        t += 2.0 * v / G;
        out.push(t);
    }
    out
}

#[test]
fn bouncing_ball_impacts_match_closed_form() {
    let (h0, e) = (1.0, 0.8);
    let expected = impact_times(h0, e, 6);
    let horizon = Horizon::new(expected[5] + 0.01);
    let traj = simulate(
        &Ball { e },
        &[h0, 0.0],
        (),
        &Signal::constant(0.0),
        horizon,
        &PriorityPolicy,
        &SolverOptions::default(),
    );
    assert!(traj.termination.is_horizon());
    assert_eq!(traj.jumps.len(), 6);
    for (r, t) in traj.jumps.iter().zip(&expected) {
        assert_relative_eq!(r.time.t, *t, max_relative = 1e-8);
    }
    for (k, r) in traj.jumps.iter().enumerate() {
        assert_eq!(r.time.j, k as u64 + 1);
    }
    assert!(traj.time_domain_is_consistent());
}

#[test]
fn jump_budget_ends_the_run() {
    let traj = simulate(
        &Ball { e: 0.8 },
        &[1.0, 0.0],
        (),
        &Signal::constant(0.0),
        Horizon { t_end: 100.0, j_max: 3 },
        &PriorityPolicy,
        &SolverOptions::default(),
    );
    assert_eq!(traj.jumps.len(), 3);
    assert!(traj.termination.is_horizon());
}

/// Past the accumulation point each located impact re-injects about
/// `sqrt(2 g guard_tol)` of speed, so the bounces settle into a burst of
/// tiny hops that the Zeno guard must catch.
#[test]
fn accumulating_bounces_are_reported() {
    let e = 0.5;
    let t1 = (2.0_f64 / G).sqrt();
    let t_zeno = t1 * (1.0 + e) / (1.0 - e);
    let opts = SolverOptions {
        guard_tol: 1e-14,
        zeno_window: 1e-3,
        ..SolverOptions::default()
    };
    let traj = simulate(
        &Ball { e },
        &[1.0, 0.0],
        (),
        &Signal::constant(0.0),
        Horizon::new(2.0 * t_zeno),
        &PriorityPolicy,
        &opts,
    );
    let Termination::ZenoGuard { t, jumps } = traj.termination else {
        panic!("{}", traj.termination);
    };
    assert!(jumps > opts.zeno_max_jumps);
    assert!((t - t_zeno).abs() < 2.0 * opts.zeno_window, "stopped at {t}, accumulation point {t_zeno}");
}

/// `x' = u` under a triangle command: interpolation must not smear the
/// kink at the breakpoint.
struct Integrator;

impl HybridSystem for Integrator {
    type Discrete = ();
    type Input = f64;
    type Jump = Bounce;

    fn dim(&self) -> usize {
        1
    }

    fn flow(&self, _x: &[f64], _d: &(), u: &f64, dx: &mut [f64]) -> sma_hybrid::Result<()> {
        dx[0] = *u;
        Ok(())
    }

    fn apply_jump(&self, _x: &mut [f64], _d: &mut (), _j: Bounce) -> sma_hybrid::Result<()> {
        unreachable!()
    }

    fn abs_tol(&self) -> Vec<f64> {
        vec![1e-12]
    }
}

#[test]
fn dense_output_respects_breakpoints() {
    let input = Signal::steps(vec![
        Step { level: 1.0, duration: 10.0 },
        Step { level: -1.0, duration: 10.0 },
    ])
    .unwrap();
    let traj = simulate(
        &Integrator,
        &[0.0],
        (),
        &input,
        Horizon::new(20.0),
        &PriorityPolicy,
        &SolverOptions::default(),
    );
    assert!(traj.time_domain_is_consistent());
    for k in 0..=200 {
        let t = 0.1 * k as f64;
        let exact = if t <= 10.0 { t } else { 20.0 - t };
        let (x, _) = traj.state_at(t).unwrap();
        assert!((x[0] - exact).abs() < 1e-9, "t = {t}: {} vs {exact}", x[0]);
    }
}

#[test]
fn sinusoid_zero_crossings_are_breakpoints() {
    let s = Signal::Sinusoid {
        amplitude: 2.0,
        frequency: 1e-3,
        offset: 0.0,
    };
    assert_relative_eq!(s.next_breakpoint(0.0).unwrap(), 500.0, max_relative = 1e-12);
    assert_relative_eq!(s.next_breakpoint(500.0).unwrap(), 1000.0, max_relative = 1e-12);
    assert_relative_eq!(s.at(250.0), 2.0, max_relative = 1e-12);
}
