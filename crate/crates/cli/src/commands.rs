use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;
use serde_json::{json, Value};

use sma_hybrid::benchmark::{run_benchmark, BenchmarkReport};
use sma_hybrid::calibration::{
    curve_features, fit, simulate_isotherm, simulate_model_isotherm, IsothermCurve, StrainProfile,
};
use sma_hybrid::mas::MasWire;
use sma_hybrid::output::{self, Table};
use sma_hybrid::scenario::{warn_large_inclination, RobotRun, Variant};
use sma_hybrid::solver::{simulate as integrate, PriorityPolicy, Termination};
use sma_hybrid::wire::{HybridWire, SingleWire, WireDrive, WireModel};
use sma_hybrid::MaterialParams;

use crate::config::Config;

/// Failure classes, mapped onto process exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Simulation(anyhow::Error),
    Calibration(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Simulation(_) => 3,
            Failure::Calibration(_) => 4,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Simulation(e) | Failure::Calibration(e) | Failure::Io(e) => e,
        }
    }
}

fn io<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Io(e.into())
}

pub fn manifest(command: &str, config: &Config, extra: Value) -> Value {
    json!({
        "tool": "smasim",
        "version": env!("CARGO_PKG_VERSION"),
        "git": env!("SMASIM_GIT_DESCRIBE"),
        "command": command,
        "config": config,
        "run": extra,
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(io)?;
    let path = dir.join(name);
    let f = File::create(&path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(io)?;
    Ok(BufWriter::new(f))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf, Failure> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(io)?;
    writeln!(w).map_err(io)?;
    w.flush().map_err(io)?;
    Ok(dir.join(name))
}

fn write_table(dir: &Path, config: &Config, table: &Table, manifest: &Value) -> Result<PathBuf, Failure> {
    let format = config.output.format;
    let name = format!("trajectory.{}", format.extension());
    let mut w = create(dir, &name)?;
    table.write(format, manifest, &mut w).map_err(io)?;
    w.flush().map_err(io)?;
    Ok(dir.join(name))
}

fn check_termination(t: &Termination) -> Result<(), Failure> {
    if t.is_horizon() {
        Ok(())
    } else {
        Err(Failure::Simulation(anyhow!("simulation stopped early: {t}")))
    }
}

pub fn simulate(config: &Config, out: &Path) -> Result<(), Failure> {
    let spec = &config.simulate;
    if spec.variant.is_coupled() {
        let j_eq = match &spec.j_eq {
            Some(s) => s.clone(),
            None => spec.random_steps.generate(spec.seed, 1).remove(0),
        };
        let manifest = manifest(
            "simulate",
            config,
            json!({"variant": spec.variant, "j_eq": &j_eq}),
        );
        let run = config
            .robot()
            .run(spec.variant.wire(), &j_eq, spec.horizon)
            .map_err(|e| Failure::Simulation(e.into()))?;
        warn_large_inclination(&run);
        let (table, jumps) = match &run {
            RobotRun::Hybrid { system, trajectory } => (
                output::coupled_table(system, trajectory),
                Some(output::coupled_jump_rows(trajectory)),
            ),
            RobotRun::Mas { system, trajectory } => (output::coupled_table(system, trajectory), None),
        };
        let table = table.map_err(|e| Failure::Simulation(e.into()))?;
        let path = write_table(out, config, &table, &manifest)?;
        if let Some(rows) = &jumps {
            let mut w = create(out, "jumps.csv")?;
            output::write_jump_rows(rows, &manifest, &mut w).map_err(io)?;
            w.flush().map_err(io)?;
        }
        write_json(out, "manifest.json", &manifest)?;
        println!(
            "{}: {} samples, {} jumps, {} -> {}",
            spec.variant,
            table.rows.len(),
            run.jump_count(),
            run.termination(),
            path.display()
        );
        return check_termination(run.termination());
    }

    let p = config.material();
    let drive = WireDrive {
        velocity: spec.velocity.clone(),
        joule: spec.joule.clone(),
        ambient: config.ambient,
    };
    let manifest = manifest("simulate", config, json!({"variant": spec.variant}));
    let (table, jumps, termination) = match spec.variant.wire() {
        Variant::Hybrid => {
            let sys = SingleWire {
                wire: HybridWire::new(p),
            };
            let (x0, d0) = sys.wire.rest_state(spec.initial_strain, config.ambient, 0.0);
            let traj = integrate(&sys, &x0, d0, &drive, spec.horizon, &PriorityPolicy, &config.solver);
            (
                output::wire_table(&sys.wire, &traj),
                Some(output::hybrid_jump_rows(&traj)),
                traj.termination,
            )
        }
        Variant::Mas => {
            let sys = SingleWire {
                wire: MasWire::new(p, config.barrier),
            };
            let (x0, d0) = sys.wire.rest_state(spec.initial_strain, config.ambient, 0.0);
            let traj = integrate(&sys, &x0, d0, &drive, spec.horizon, &PriorityPolicy, &config.solver);
            (output::wire_table(&sys.wire, &traj), None, traj.termination)
        }
    };
    let table = table.map_err(|e| Failure::Simulation(e.into()))?;
    let path = write_table(out, config, &table, &manifest)?;
    if let Some(rows) = &jumps {
        let mut w = create(out, "jumps.csv")?;
        output::write_jump_rows(rows, &manifest, &mut w).map_err(io)?;
        w.flush().map_err(io)?;
    }
    write_json(out, "manifest.json", &manifest)?;
    println!(
        "{}: {} samples, {} jumps, {} -> {}",
        spec.variant,
        table.rows.len(),
        jumps.map_or(0, |j| j.len()),
        termination,
        path.display()
    );
    check_termination(&termination)
}

fn scenario_table(report: &BenchmarkReport) -> Table {
    let mut t = Table::new(
        [
            "scenario",
            "candidate_time_s",
            "reference_time_s",
            "candidate_jumps",
            "max_discrepancy",
            "rms_discrepancy",
            "alpha_range_rad",
            "failed",
        ]
        .map(String::from)
        .to_vec(),
    );
    for s in &report.scenarios {
        let time = |o: &Option<sma_hybrid::benchmark::VariantOutcome>| o.as_ref().map_or(f64::NAN, |o| o.wall_time_s);
        let d = s.discrepancy;
        t.rows.push(vec![
            s.index as f64,
            time(&s.candidate),
            time(&s.reference),
            s.candidate.as_ref().map_or(f64::NAN, |o| o.jumps as f64),
            d.map_or(f64::NAN, |d| d.max),
            d.map_or(f64::NAN, |d| d.rms),
            d.map_or(f64::NAN, |d| d.range),
            f64::from(u8::from(s.error.is_some())),
        ]);
    }
    t
}

pub fn benchmark(config: &Config, out: &Path) -> Result<(), Failure> {
    let bc = &config.benchmark;
    let report = run_benchmark(&config.robot(), bc).map_err(|e| Failure::Simulation(e.into()))?;
    let manifest = manifest("benchmark", config, Value::Null);
    write_json(out, "benchmark_report.json", &json!({"manifest": &manifest, "report": &report}))?;
    let mut w = create(out, "benchmark_scenarios.csv")?;
    scenario_table(&report)
        .write(sma_hybrid::output::Format::Csv, &manifest, &mut w)
        .map_err(io)?;
    w.flush().map_err(io)?;
    write_json(out, "manifest.json", &manifest)?;
    println!(
        "{} scenarios, {} failed; median time {} {:.4} s, {} {:.4} s, ratio {:.3}; max discrepancy {:.4}, mean {:.4}",
        report.scenarios.len(),
        report.failures,
        bc.candidate,
        report.median_candidate_s,
        bc.reference,
        report.median_reference_s,
        report.time_ratio,
        report.max_discrepancy,
        report.mean_discrepancy,
    );
    for s in report.scenarios.iter().filter(|s| s.error.is_some()) {
        log::error!("scenario {}: {}", s.index, s.error.as_deref().unwrap_or(""));
    }
    if report.failures > 0 {
        return Err(Failure::Simulation(anyhow!(
            "{} of {} scenarios failed",
            report.failures,
            report.scenarios.len()
        )));
    }
    Ok(())
}

/// Threshold below which a stress-strain segment counts as a plateau [Pa].
const FLAT_SLOPE: f64 = 5e8;

pub fn isotherm(config: &Config, out: &Path) -> Result<(), Failure> {
    let spec = &config.isotherm;
    let p = config.material();
    let mut features = Vec::new();
    for &temp in &spec.temperatures {
        let curve = match spec.variant {
            Variant::Hybrid => simulate_isotherm(&p, temp, &spec.profile),
            Variant::Mas => simulate_model_isotherm(&MasWire::new(p.clone(), config.barrier), temp, &spec.profile),
        }
        .map_err(|e| Failure::Simulation(e.into()))?;
        let manifest = manifest("isotherm", config, json!({"ambient": temp}));
        let name = format!("isotherm_{temp}K.csv");
        let mut w = create(out, &name)?;
        writeln!(w, "# {manifest}").map_err(io)?;
        curve.write_csv(&mut w).map_err(io)?;
        w.flush().map_err(io)?;
        match curve_features(&curve, FLAT_SLOPE) {
            Ok(f) => {
                println!(
                    "{temp} K: loading plateau {:.3} MPa, unloading plateau {:.3} MPa, gap {:.3} MPa -> {}",
                    f.loading_plateau * 1e-6,
                    f.unloading_plateau * 1e-6,
                    f.plateau_gap() * 1e-6,
                    out.join(&name).display()
                );
                features.push(json!({"ambient": temp, "features": f}));
            }
            Err(e) => {
                log::warn!("{temp} K: {e}");
                features.push(json!({"ambient": temp, "features": Value::Null}));
            }
        }
    }
    write_json(out, "isotherm_features.json", &features)?;
    write_json(out, "manifest.json", &manifest("isotherm", config, Value::Null))?;
    Ok(())
}

/// Guess with free parameter `k` scaled by `1 + perturbation` when bit `k`
/// of `seed` is set and by `1 - perturbation` otherwise.
pub fn perturbed_guess(
    truth: &MaterialParams,
    free: &[sma_hybrid::calibration::FreeParam],
    perturbation: f64,
    seed: u64,
) -> sma_hybrid::Result<MaterialParams> {
    truth.modified(|c| {
        for (k, param) in free.iter().enumerate() {
            let sign = if (seed >> (k % 64)) & 1 == 1 { 1.0 } else { -1.0 };
            let v = param.get(c);
            param.set(c, v * (1.0 + sign * perturbation));
        }
    })
}

pub fn calibrate(config: &Config, out: &Path) -> Result<(), Failure> {
    let spec = &config.calibrate;
    let material = config.material();
    let mut data = Vec::new();
    for curve in &spec.data {
        data.push(
            IsothermCurve::read_csv(&curve.path, curve.ambient)
                .with_context(|| format!("isotherm data {}", curve.path.display()))
                .map_err(Failure::Config)?,
        );
    }
    let mut guess = spec.guess.clone().unwrap_or_else(|| material.clone());
    if let Some(syn) = &spec.synthetic {
        let profile = StrainProfile {
            rate: spec.fit.strain_rate,
            points_per_branch: syn.points_per_branch,
            ..StrainProfile::default()
        };
        for &temp in &syn.temperatures {
            data.push(simulate_isotherm(&material, temp, &profile).map_err(|e| Failure::Simulation(e.into()))?);
        }
        if spec.guess.is_none() {
            guess = perturbed_guess(&material, &spec.fit.free, syn.perturbation, syn.seed)
                .map_err(|e| Failure::Config(e.into()))?;
        }
    }
    if data.is_empty() {
        return Err(Failure::Config(anyhow!(
            "calibrate: no data; give `calibrate.data` or `calibrate.synthetic`"
        )));
    }
    let report = fit(&data, &spec.fit, &guess).map_err(|e| Failure::Calibration(e.into()))?;
    let manifest = manifest("calibrate", config, Value::Null);
    write_json(out, "fitted_params.json", &report.params)?;
    write_json(out, "fit_report.json", &json!({"manifest": &manifest, "report": &report}))?;
    write_json(out, "manifest.json", &manifest)?;
    for (param, value) in &report.values {
        let reference = param.get(material.constants());
        println!("{param} = {value:.6e} ({:+.3}% vs configured material)", 100.0 * (value / reference - 1.0));
    }
    println!(
        "loss {:.3e} Pa^2 after {} iterations, converged: {}",
        report.loss, report.iterations, report.converged
    );
    for d in &report.diagnostics {
        println!("diagnostic: {d}");
    }
    if !report.converged {
        return Err(Failure::Calibration(anyhow!(
            "fit did not converge (best loss {:.3e} Pa^2)",
            report.loss
        )));
    }
    Ok(())
}
