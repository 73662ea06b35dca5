//! Acceptance criteria. Each test writes one `PASS`/`FAIL` line straight to
//! stdout (bypassing the capture of the test harness) and then asserts.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sma_hybrid::benchmark::{run_benchmark, BenchmarkConfig, BenchmarkReport};
use sma_hybrid::calibration::{curve_features, fit, simulate_isotherm, FitSpec, StrainProfile};
use sma_hybrid::scenario::{loop_areas, RandomSteps, RobotRun, RobotSetup, Variant};
use sma_hybrid::solver::{simulate, Horizon, PriorityPolicy, Signal, SolverOptions, Termination};
use sma_hybrid::structure::{jacobian, wire_lengths, BeamParams};
use sma_hybrid::wire::{
    flow_map, phase_fraction_rate, HybridWire, HybridWireState, Mode, SingleWire, WireDrive, WireModel,
};
use sma_hybrid::{MaterialParams, WireInput};

fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "acceptance criterion {n} [{verdict}] {detail}");
    let _ = out.flush();
}

fn verdict(n: u32, failures: &[String], detail: String) {
    report(n, failures.is_empty(), &detail);
    assert!(failures.is_empty(), "criterion {n}: {}", failures.join("; "));
}

#[test]
fn criterion_1_substitution_identities() {
    let p = MaterialParams::cuznal();
    let start = Instant::now();
    let (mut worst_a, mut worst_m) = (0.0_f64, 0.0_f64);
    let mut failures = Vec::new();
    for i in 0..100 {
        let eps = 0.12 * i as f64 / 99.0;
        for k in 0..100 {
            let temp = 280.0 + 80.0 * k as f64 / 99.0;
            match (p.x_m4(eps, temp), p.x_m5(eps, temp)) {
                (Ok(x4), Ok(x5)) => {
                    let ea = (p.stress_unchecked(eps, x4) - p.sigma_a(temp)).abs() / p.sigma_a(temp).abs();
                    let em = (p.stress_unchecked(eps, x5) - p.sigma_m(temp)).abs() / p.sigma_m(temp).abs();
                    worst_a = worst_a.max(ea);
                    worst_m = worst_m.max(em);
                }
                _ => failures.push(format!("singular substitution at eps={eps}, T={temp}")),
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if worst_a > 1e-6 {
        failures.push(format!("sigma_A identity error {worst_a:e}"));
    }
    if worst_m > 1e-6 {
        failures.push(format!("sigma_M identity error {worst_m:e}"));
    }
    if elapsed >= 1.0 {
        failures.push(format!("runtime {elapsed:.3} s"));
    }
    verdict(
        1,
        &failures,
        format!("substitution identities on 100x100 grid: max rel error A {worst_a:.2e}, M {worst_m:.2e}, {elapsed:.3} s"),
    );
}

#[test]
fn criterion_2_isothermal_hysteresis() {
    let p = MaterialParams::cuznal();
    let profile = StrainProfile::default();
    let start = Instant::now();
    let features = |t: f64| {
        let curve = simulate_isotherm(&p, t, &profile).expect("isotherm");
        curve_features(&curve, 5e8).expect("plateaus")
    };
    let f315 = features(315.0);
    let mut failures = Vec::new();
    let rel = |a: f64, b: f64| (a / b - 1.0).abs();
    let gap_err = rel(f315.plateau_gap(), p.delta_sigma);
    let ea_err = rel(f315.initial_slope, p.e_a);
    let em_err = rel(f315.final_slope, p.e_m);
    for (what, e) in [("plateau gap", gap_err), ("E_A slope", ea_err), ("E_M slope", em_err)] {
        if e > 0.01 {
            failures.push(format!("{what} off by {:.3}%", 100.0 * e));
        }
    }
    let mut worst_shift = 0.0_f64;
    for t in [292.0, 338.0] {
        let f = features(t);
        let expected = p.sigma_t * (t - 315.0);
        for (name, a, b) in [
            ("loading", f.loading_plateau, f315.loading_plateau),
            ("unloading", f.unloading_plateau, f315.unloading_plateau),
        ] {
            let e = rel(a - b, expected);
            worst_shift = worst_shift.max(e);
            if e > 0.02 {
                failures.push(format!("{name} plateau shift at {t} K off by {:.2}%", 100.0 * e));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 30.0 {
        failures.push(format!("runtime {elapsed:.1} s"));
    }
    verdict(
        2,
        &failures,
        format!(
            "isotherm 315 K: gap {:.3} MPa ({:.3}%), slopes E_A {:.3}% E_M {:.3}%, worst plateau shift {:.3}%, {elapsed:.2} s",
            f315.plateau_gap() * 1e-6,
            100.0 * gap_err,
            100.0 * ea_err,
            100.0 * em_err,
            100.0 * worst_shift
        ),
    );
}

fn batch() -> &'static (BenchmarkReport, f64) {
    static BATCH: OnceLock<(BenchmarkReport, f64)> = OnceLock::new();
    BATCH.get_or_init(|| {
        let start = Instant::now();
        let report = run_benchmark(&RobotSetup::default(), &BenchmarkConfig::default()).expect("benchmark");
        (report, start.elapsed().as_secs_f64())
    })
}

#[test]
fn criterion_3_hybrid_matches_reference() {
    let (report, elapsed) = batch();
    let mut failures = Vec::new();
    for s in &report.scenarios {
        match (&s.error, s.discrepancy) {
            (Some(e), _) => failures.push(format!("scenario {}: {e}", s.index)),
            (None, Some(d)) if d.max > 0.02 => {
                failures.push(format!("scenario {}: discrepancy {:.3}%", s.index, 100.0 * d.max))
            }
            _ => {}
        }
    }
    if report.scenarios.len() != 30 {
        failures.push(format!("{} scenarios", report.scenarios.len()));
    }
    if *elapsed >= 600.0 {
        failures.push(format!("batch runtime {elapsed:.0} s"));
    }
    verdict(
        3,
        &failures,
        format!(
            "30 random-step scenarios: max alpha discrepancy {:.3}% of range (mean {:.3}%), batch {elapsed:.1} s",
            100.0 * report.max_discrepancy,
            100.0 * report.mean_discrepancy
        ),
    );
}

#[test]
fn criterion_4_runtime_savings() {
    let (report, _) = batch();
    let mut failures = Vec::new();
    if !(report.time_ratio <= 0.5) {
        failures.push(format!("time ratio {:.3}", report.time_ratio));
    }
    verdict(
        4,
        &failures,
        format!(
            "median integration time hybrid {:.4} s, reference {:.4} s, ratio {:.3}",
            report.median_candidate_s, report.median_reference_s, report.time_ratio
        ),
    );
}

const LOOP_AMPLITUDE: f64 = 2.0;
const LOOP_FREQUENCY: f64 = 1e-3;
const LOOP_PERIODS: usize = 3;

fn sinusoid() -> Signal {
    Signal::Sinusoid {
        amplitude: LOOP_AMPLITUDE,
        frequency: LOOP_FREQUENCY,
        offset: 0.0,
    }
}

fn sinusoid_run() -> &'static RobotRun {
    static RUN: OnceLock<RobotRun> = OnceLock::new();
    RUN.get_or_init(|| {
        RobotSetup::default()
            .run(
                Variant::Hybrid,
                &sinusoid(),
                Horizon::new(LOOP_PERIODS as f64 / LOOP_FREQUENCY),
            )
            .expect("sinusoid run")
    })
}

#[test]
fn criterion_5_hysteresis_loop() {
    let run = sinusoid_run();
    let mut failures = Vec::new();
    if !run.termination().is_horizon() {
        failures.push(format!("run stopped: {}", run.termination()));
    }
    let areas = loop_areas(run, &sinusoid(), 1.0 / LOOP_FREQUENCY, LOOP_PERIODS, 4000);
    let later = &areas[1..];
    for (k, a) in later.iter().enumerate() {
        if !(a.abs() > 1e-4) {
            failures.push(format!("period {} area {a:e}", k + 2));
        }
    }
    if !(later.iter().all(|a| *a > 0.0) || later.iter().all(|a| *a < 0.0)) {
        failures.push(format!("direction changes: {areas:?}"));
    }
    verdict(
        5,
        &failures,
        format!(
            "1 mHz sinusoid J_eq: loop areas per period [{}] rad*W",
            areas.iter().map(|a| format!("{a:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    );
}

/// Scenarios the semantic checks run on: the benchmark inputs and the sinusoid.
fn semantic_scenarios() -> Vec<(Signal, f64)> {
    let steps = RandomSteps::default();
    let mut v: Vec<(Signal, f64)> = steps.generate(1, 30).into_iter().map(|s| (s, steps.duration)).collect();
    v.push((sinusoid(), LOOP_PERIODS as f64 / LOOP_FREQUENCY));
    v
}

#[test]
fn criterion_6_hybrid_semantics() {
    let setup = RobotSetup::default();
    let mut failures = Vec::new();
    let (mut jumps_seen, mut samples_seen) = (0usize, 0usize);
    let (mut worst_membership, mut worst_continuity) = (0.0_f64, 0.0_f64);
    for (k, (input, t_end)) in semantic_scenarios().iter().enumerate() {
        let run = setup.run(Variant::Hybrid, input, Horizon::new(*t_end)).expect("run");
        let RobotRun::Hybrid { system, trajectory } = &run else {
            unreachable!()
        };
        if matches!(trajectory.termination, Termination::ZenoGuard { .. }) {
            failures.push(format!("scenario {k}: Zeno guard"));
        } else if !trajectory.termination.is_horizon() {
            failures.push(format!("scenario {k}: {}", trajectory.termination));
        }
        for r in &trajectory.jumps {
            let b = r.jump.bundle;
            let (from, to) = (r.before[b].mode, r.after[b].mode);
            if !from.has_edge_to(to) || r.jump.jump.source() != from || r.jump.jump.target() != to {
                failures.push(format!("scenario {k}: illegal edge {from:?} -> {to:?} via {}", r.jump.jump));
            }
            if r.before[1 - b] != r.after[1 - b] {
                failures.push(format!("scenario {k}: jump of bundle {b} changed the other bundle"));
            }
        }
        jumps_seen += trajectory.jumps.len();
        for s in &trajectory.samples {
            samples_seen += 1;
            let wu = system.wire_inputs(&s.x, &s.input).expect("inputs");
            for b in 0..2 {
                let xw = system.wire_state(&s.x, b);
                let w = &system.wires[b];
                let c = w.flow_margin(xw, &s.discrete[b], &wu[b]);
                let d = w.jump_margin(xw, &s.discrete[b], &wu[b]);
                let outside = -c.max(d);
                worst_membership = worst_membership.max(outside);
            }
        }
        for pair in trajectory.samples.windows(2) {
            let (a, c) = (&pair[0], &pair[1]);
            if c.time.j != a.time.j + 1 {
                continue;
            }
            for b in 0..2 {
                let before = system.wires[b].phase_fraction(system.wire_state(&a.x, b), &a.discrete[b]);
                let after = system.wires[b].phase_fraction(system.wire_state(&c.x, b), &c.discrete[b]);
                match (before, after) {
                    (Ok(x0), Ok(x1)) => worst_continuity = worst_continuity.max((x1 - x0).abs()),
                    _ => failures.push(format!("scenario {k}: phase fraction undefined at a jump")),
                }
            }
        }
        if k == 0 {
            let again = setup.run(Variant::Hybrid, input, Horizon::new(*t_end)).expect("rerun");
            let RobotRun::Hybrid { trajectory: t2, .. } = &again else {
                unreachable!()
            };
            let key = |t: &sma_hybrid::scenario::HybridRobotTrajectory| {
                t.jumps.iter().map(|r| (r.time.t.to_bits(), r.time.j, r.jump)).collect::<Vec<_>>()
            };
            if key(trajectory) != key(t2) {
                failures.push("jump sequence differs between identical runs".into());
            }
        }
    }
    if worst_membership > 1e-8 {
        failures.push(format!("sample outside C and D by {worst_membership:e}"));
    }
    if worst_continuity > 1e-9 {
        failures.push(format!("phase fraction jumps by {worst_continuity:e}"));
    }
    verdict(
        6,
        &failures,
        format!(
            "31 scenarios, {jumps_seen} jumps, {samples_seen} samples: worst distance outside C u D {:.1e}, \
             worst phase-fraction change at jumps {worst_continuity:.1e}, edges legal, deterministic",
            worst_membership.max(0.0)
        ),
    );
}

#[test]
fn criterion_7_numerical_cross_checks() {
    let mut failures = Vec::new();

    // Kinematic Jacobian against central differences of the wire lengths.
    let bp = BeamParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_jac = 0.0_f64;
    for _ in 0..100 {
        let q = [
            rng.gen_range(-2e-3..2e-3),
            rng.gen_range(-1e-2..1e-2),
            rng.gen_range(-0.3..0.3),
        ];
        let jac = jacobian(&bp, &q).expect("jacobian");
        for k in 0..3 {
            let h = 1e-6 * if k == 2 { 1.0 } else { bp.length };
            let (mut qp, mut qm) = (q, q);
            qp[k] += h;
            qm[k] -= h;
            let (lp, lm) = (wire_lengths(&bp, &qp), wire_lengths(&bp, &qm));
            for i in 0..2 {
                let fd = (lp[i] - lm[i]) / (2.0 * h);
                let scale = jac[i].iter().map(|v| v.abs()).fold(0.0, f64::max);
                worst_jac = worst_jac.max((fd - jac[i][k]).abs() / scale);
            }
        }
    }
    if worst_jac > 1e-6 {
        failures.push(format!("Jacobian mismatch {worst_jac:e}"));
    }

    // Power balance of the interconnection along a coupled trajectory.
    let setup = RobotSetup::default();
    let input = RandomSteps::default().generate(1, 1).remove(0);
    let run = setup.run(Variant::Hybrid, &input, Horizon::new(100.0)).expect("run");
    let RobotRun::Hybrid { system, trajectory } = &run else {
        unreachable!()
    };
    let mut worst_power = 0.0_f64;
    for s in &trajectory.samples {
        let out = system.outputs(&s.x, &s.discrete).expect("outputs");
        let q_dot = &s.x[3..6];
        let p_beam: f64 = (0..3).map(|k| q_dot[k] * out.exchange.tau[k]).sum();
        let p_wires: f64 = (0..2).map(|i| out.exchange.velocity[i] * out.forces[i]).sum();
        let scale = (0..3).map(|k| (q_dot[k] * out.exchange.tau[k]).abs()).sum::<f64>()
            + (0..2).map(|i| (out.exchange.velocity[i] * out.forces[i]).abs()).sum::<f64>();
        if scale > 0.0 {
            worst_power = worst_power.max((p_beam + p_wires).abs() / scale);
        }
    }
    if worst_power > 1e-12 {
        failures.push(format!("power balance error {worst_power:e}"));
    }

    // x_M4 differentiated along the flow against the mode-4 phase rate.
    let p = MaterialParams::cuznal();
    let wire = HybridWire::new(p.clone());
    let mut worst_total = 0.0_f64;
    let mut mode4_states = 0usize;
    for (ambient, joule) in [(315.0, 0.0), (300.0, 0.05), (330.0, 0.2)] {
        let speed = 1e-4 * p.l0;
        let drive = WireDrive {
            velocity: Signal::constant(speed),
            joule: Signal::constant(joule),
            ambient,
        };
        let (x0, d0) = wire.rest_state(0.0, ambient, 0.0);
        let sys = SingleWire { wire: wire.clone() };
        let traj = simulate(&sys, &x0, d0, &drive, Horizon::new(900.0), &PriorityPolicy, &SolverOptions::default());
        for s in traj.samples.iter().filter(|s| s.discrete.mode == Mode::AtoM) {
            let state = HybridWireState::from_parts(&s.x, &s.discrete);
            let u = WireInput::new(speed, joule, ambient).unwrap();
            let (de, dt) = flow_map(&p, &state, &u).unwrap();
            let rate = phase_fraction_rate(&p, &state, &u).unwrap();
            let h = 1e-2;
            let fd = (p.x_m4(state.eps + h * de, state.temp + h * dt).unwrap()
                - p.x_m4(state.eps - h * de, state.temp - h * dt).unwrap())
                / (2.0 * h);
            worst_total = worst_total.max((fd - rate).abs() / rate.abs());
            mode4_states += 1;
        }
    }
    if mode4_states == 0 {
        failures.push("no mode-4 states visited".into());
    }
    if worst_total > 1e-6 {
        failures.push(format!("total derivative mismatch {worst_total:e}"));
    }

    // Thermal fixed point of a heated, unloaded wire.
    let (ambient, joule) = (300.0, 0.02);
    let tau_th = p.heat_capacity() / (p.lambda * p.lateral_area());
    let target = ambient + joule / (p.lambda * p.lateral_area());
    let drive = WireDrive {
        velocity: Signal::constant(0.0),
        joule: Signal::constant(joule),
        ambient,
    };
    let (x0, d0) = wire.rest_state(0.0, ambient, 0.0);
    let sys = SingleWire { wire: wire.clone() };
    let traj = simulate(&sys, &x0, d0, &drive, Horizon::new(10.0 * tau_th), &PriorityPolicy, &SolverOptions::default());
    let temp_end = traj.last().x[1];
    let thermal_err = (temp_end - target).abs() / (target - ambient);
    if !traj.termination.is_horizon() || thermal_err > 1e-3 {
        failures.push(format!("thermal fixed point error {thermal_err:e} ({})", traj.termination));
    }

    verdict(
        7,
        &failures,
        format!(
            "Jacobian {worst_jac:.1e}, power balance {worst_power:.1e}, x_M4 total derivative {worst_total:.1e} \
             over {mode4_states} states, thermal fixed point {thermal_err:.1e} of the rise"
        ),
    );
}

#[test]
fn criterion_8_calibration_round_trip() {
    let truth = MaterialParams::cuznal();
    let spec = FitSpec::default();
    let profile = StrainProfile {
        rate: spec.strain_rate,
        points_per_branch: 60,
        ..StrainProfile::default()
    };
    let start = Instant::now();
    let data: Vec<_> = [292.0, 315.0, 338.0]
        .iter()
        .map(|&t| simulate_isotherm(&truth, t, &profile).expect("isotherm"))
        .collect();
    let mut failures = Vec::new();
    let mut worst = 0.0_f64;
    let patterns: [[f64; 6]; 4] = [
        [1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
        [-1.0, 1.0, -1.0, 1.0, -1.0, 1.0],
        [1.0; 6],
        [-1.0; 6],
    ];
    for signs in patterns {
        let guess = truth
            .modified(|c| {
                for (k, param) in spec.free.iter().enumerate() {
                    let v = param.get(c);
                    param.set(c, v * (1.0 + 0.2 * signs[k]));
                }
            })
            .expect("guess");
        let r = fit(&data, &spec, &guess).expect("fit");
        for (param, value) in &r.values {
            let e = (value / param.get(truth.constants()) - 1.0).abs();
            worst = worst.max(e);
            if e > 0.02 {
                failures.push(format!("{param} off by {:.2}% from guess {signs:?}", 100.0 * e));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 300.0 {
        failures.push(format!("runtime {elapsed:.0} s"));
    }
    verdict(
        8,
        &failures,
        format!(
            "three-isotherm fit from 4 guesses at +-20%: worst parameter error {:.2e}%, {elapsed:.2} s",
            100.0 * worst
        ),
    );
}
