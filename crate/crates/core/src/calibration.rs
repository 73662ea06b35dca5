//! Identification of material parameters from isothermal stress-strain curves.
//!
//! The forward model is the hybrid wire pulled through a slow triangular
//! strain cycle at constant ambient temperature. Parameters are fitted by a
//! bound-constrained Levenberg-Marquardt iteration on parameters scaled by
//! the initial guess, with a forward-difference Jacobian evaluated in
//! parallel.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{MaterialConstants, MaterialParams};
use crate::solver::{simulate, Horizon, PriorityPolicy, Signal, SolverOptions, Step};
use crate::wire::{HybridWire, SingleWire, WireDrive, WireModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Loading,
    Unloading,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsothermSample {
    pub eps: f64,
    #[serde(rename = "sigma_Pa")]
    pub sigma: f64,
    pub branch: Branch,
}

/// Stress-strain samples recorded at constant ambient temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsothermCurve {
    pub ambient: f64,
    pub samples: Vec<IsothermSample>,
}

impl IsothermCurve {
    pub fn branch(&self, b: Branch) -> impl Iterator<Item = &IsothermSample> {
        self.samples.iter().filter(move |s| s.branch == b)
    }

    /// Checks finiteness and branch monotonicity.
    pub fn validate(&self) -> Result<()> {
        if !(self.ambient > 0.0) {
            return Err(Error::InvalidInput(format!(
                "isotherm temperature {} must be > 0",
                self.ambient
            )));
        }
        if self.samples.iter().any(|s| !s.eps.is_finite() || !s.sigma.is_finite()) {
            return Err(Error::InvalidInput("isotherm samples must be finite".into()));
        }
        for (b, sign) in [(Branch::Loading, 1.0), (Branch::Unloading, -1.0)] {
            let eps: Vec<f64> = self.branch(b).map(|s| s.eps).collect();
            if eps.windows(2).any(|w| sign * (w[1] - w[0]) < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "strain is not monotone on the {b} branch"
                )));
            }
        }
        Ok(())
    }

    pub fn max_strain(&self) -> f64 {
        self.samples.iter().map(|s| s.eps).fold(0.0, f64::max)
    }

    /// Reads `eps,sigma_Pa,branch` rows.
    pub fn read_csv(path: impl AsRef<Path>, ambient: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)?;
        let samples = rdr.deserialize().collect::<std::result::Result<Vec<_>, _>>()?;
        let curve = Self { ambient, samples };
        curve.validate()?;
        Ok(curve)
    }

    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for s in &self.samples {
            wtr.serialize(s)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Loading => "loading",
            Branch::Unloading => "unloading",
        })
    }
}

/// Triangular strain cycle `0 → eps_max → 0` at constant rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrainProfile {
    pub eps_max: f64,
    /// Strain rate [1/s].
    pub rate: f64,
    /// Samples per branch, uniformly spaced in strain.
    pub points_per_branch: usize,
}

impl Default for StrainProfile {
    fn default() -> Self {
        Self {
            eps_max: 0.1,
            rate: 1e-4,
            points_per_branch: 200,
        }
    }
}

impl StrainProfile {
    fn half_period(&self) -> f64 {
        self.eps_max / self.rate
    }

    /// Time at which the profile passes `eps` on `branch`.
    fn time_at(&self, eps: f64, branch: Branch) -> f64 {
        let t = (eps / self.rate).clamp(0.0, self.half_period());
        match branch {
            Branch::Loading => t,
            Branch::Unloading => 2.0 * self.half_period() - t,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps_max > 0.0) || !(self.rate > 0.0) || self.points_per_branch < 2 {
            return Err(Error::Config(format!("invalid strain profile {self:?}")));
        }
        Ok(())
    }
}

fn isotherm_solver() -> SolverOptions {
    SolverOptions {
        initial_step: 1e-3,
        ..SolverOptions::default()
    }
}

/// Stress of the hybrid wire at each `(eps, branch)` of a triangular strain cycle.
pub fn isotherm_stress(
    p: &MaterialParams,
    ambient: f64,
    profile: &StrainProfile,
    points: &[(f64, Branch)],
) -> Result<Vec<f64>> {
    model_isotherm_stress(&HybridWire::new(p.clone()), ambient, profile, points)
}

/// Same as [`isotherm_stress`] for any wire model.
pub fn model_isotherm_stress<W: WireModel + Clone>(
    wire: &W,
    ambient: f64,
    profile: &StrainProfile,
    points: &[(f64, Branch)],
) -> Result<Vec<f64>> {
    profile.validate()?;
    let p = wire.params();
    let speed = profile.rate * p.l0;
    let half = profile.half_period();
    let drive = WireDrive {
        velocity: Signal::steps(vec![
            Step {
                level: speed,
                duration: half,
            },
            Step {
                level: -speed,
                duration: half,
            },
        ])?,
        joule: Signal::constant(0.0),
        ambient,
    };
    let (x0, d0) = wire.rest_state(0.0, ambient, 0.0);
    let sys = SingleWire { wire: wire.clone() };
    let traj = simulate(
        &sys,
        &x0,
        d0,
        &drive,
        Horizon::new(2.0 * half),
        &PriorityPolicy,
        &isotherm_solver(),
    );
    if !traj.termination.is_horizon() {
        return Err(Error::Calibration(format!(
            "isotherm at {ambient} K stopped early: {}",
            traj.termination
        )));
    }
    points
        .iter()
        .map(|&(eps, branch)| {
            let t = profile.time_at(eps, branch);
            let (x, d) = traj
                .state_at(t)
                .ok_or_else(|| Error::Calibration(format!("no state at t = {t}")))?;
            sys.wire.stress(&x, d)
        })
        .collect()
}

pub fn simulate_isotherm(
    p: &MaterialParams,
    ambient: f64,
    profile: &StrainProfile,
) -> Result<IsothermCurve> {
    simulate_model_isotherm(&HybridWire::new(p.clone()), ambient, profile)
}

/// Evenly spaced loading then unloading points of a strain profile.
pub fn profile_points(profile: &StrainProfile) -> Vec<(f64, Branch)> {
    let n = profile.points_per_branch.max(2);
    let eps = |k: usize| profile.eps_max * k as f64 / (n - 1) as f64;
    (0..n)
        .map(|k| (eps(k), Branch::Loading))
        .chain((0..n).rev().map(|k| (eps(k), Branch::Unloading)))
        .collect()
}

pub fn simulate_model_isotherm<W: WireModel + Clone>(
    wire: &W,
    ambient: f64,
    profile: &StrainProfile,
) -> Result<IsothermCurve> {
    profile.validate()?;
    let points = profile_points(profile);
    let sigma = model_isotherm_stress(wire, ambient, profile, &points)?;
    Ok(IsothermCurve {
        ambient,
        samples: points
            .iter()
            .zip(sigma)
            .map(|(&(eps, branch), sigma)| IsothermSample { eps, sigma, branch })
            .collect(),
    })
}

/// Plateau levels and elastic slopes read off a curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurveFeatures {
    pub loading_plateau: f64,
    pub unloading_plateau: f64,
    /// Initial slope of the loading branch.
    pub initial_slope: f64,
    /// Slope of the loading branch after the plateau.
    pub final_slope: f64,
}

impl CurveFeatures {
    pub fn plateau_gap(&self) -> f64 {
        self.loading_plateau - self.unloading_plateau
    }
}

/// Splits a branch (ordered by increasing strain) into a steep prefix, a
/// flat middle and a steep suffix, using `flat_slope` as the threshold.
fn segment(points: &[(f64, f64)], flat_slope: f64) -> Option<(usize, usize)> {
    let slopes: Vec<f64> = points
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let first_flat = slopes.iter().position(|s| s.abs() < flat_slope)?;
    let last_flat = slopes.iter().rposition(|s| s.abs() < flat_slope)?;
    Some((first_flat, last_flat + 1))
}

fn regression_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Extracts plateau levels and elastic slopes. A sample interval counts as
/// flat when its slope is below `flat_slope` [Pa].
pub fn curve_features(curve: &IsothermCurve, flat_slope: f64) -> Result<CurveFeatures> {
    let mut loading: Vec<(f64, f64)> = curve.branch(Branch::Loading).map(|s| (s.eps, s.sigma)).collect();
    let mut unloading: Vec<(f64, f64)> =
        curve.branch(Branch::Unloading).map(|s| (s.eps, s.sigma)).collect();
    loading.sort_by(|a, b| a.0.total_cmp(&b.0));
    unloading.sort_by(|a, b| a.0.total_cmp(&b.0));
    let missing = || Error::Calibration("curve shows no transformation plateau".into());
    let (l0, l1) = segment(&loading, flat_slope).ok_or_else(missing)?;
    let (u0, u1) = segment(&unloading, flat_slope).ok_or_else(missing)?;
    // Drop the samples touching the corners.
    let inner = |a: usize, b: usize| (a + 1)..b.saturating_sub(1).max(a + 2);
    let plateau = |pts: &[(f64, f64)], a: usize, b: usize| mean(pts[inner(a, b)].iter().map(|p| p.1));
    if l0 < 3 || loading.len() - l1 < 3 {
        return Err(Error::Calibration("elastic segments too short".into()));
    }
    Ok(CurveFeatures {
        loading_plateau: plateau(&loading, l0, l1),
        unloading_plateau: plateau(&unloading, u0, u1),
        initial_slope: regression_slope(&loading[..l0]),
        final_slope: regression_slope(&loading[l1 + 1..]),
    })
}

/// Parameters that may be fitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FreeParam {
    #[serde(rename = "E_A")]
    EA,
    #[serde(rename = "E_M")]
    EM,
    #[serde(rename = "eps_T")]
    EpsT,
    #[serde(rename = "sigma_T")]
    SigmaT,
    #[serde(rename = "c_V")]
    CV,
    #[serde(rename = "lambda")]
    Lambda,
    #[serde(rename = "sigma_MW_T0")]
    SigmaMwT0,
    #[serde(rename = "delta_sigma")]
    DeltaSigma,
}

impl FreeParam {
    pub const ALL: [FreeParam; 8] = [
        FreeParam::EA,
        FreeParam::EM,
        FreeParam::EpsT,
        FreeParam::SigmaT,
        FreeParam::CV,
        FreeParam::Lambda,
        FreeParam::SigmaMwT0,
        FreeParam::DeltaSigma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FreeParam::EA => "E_A",
            FreeParam::EM => "E_M",
            FreeParam::EpsT => "eps_T",
            FreeParam::SigmaT => "sigma_T",
            FreeParam::CV => "c_V",
            FreeParam::Lambda => "lambda",
            FreeParam::SigmaMwT0 => "sigma_MW_T0",
            FreeParam::DeltaSigma => "delta_sigma",
        }
    }

    pub fn get(self, c: &MaterialConstants) -> f64 {
        match self {
            FreeParam::EA => c.e_a,
            FreeParam::EM => c.e_m,
            FreeParam::EpsT => c.eps_t,
            FreeParam::SigmaT => c.sigma_t,
            FreeParam::CV => c.c_v,
            FreeParam::Lambda => c.lambda,
            FreeParam::SigmaMwT0 => c.sigma_mw_t0,
            FreeParam::DeltaSigma => c.delta_sigma,
        }
    }

    pub fn set(self, c: &mut MaterialConstants, v: f64) {
        let slot = match self {
            FreeParam::EA => &mut c.e_a,
            FreeParam::EM => &mut c.e_m,
            FreeParam::EpsT => &mut c.eps_t,
            FreeParam::SigmaT => &mut c.sigma_t,
            FreeParam::CV => &mut c.c_v,
            FreeParam::Lambda => &mut c.lambda,
            FreeParam::SigmaMwT0 => &mut c.sigma_mw_t0,
            FreeParam::DeltaSigma => &mut c.delta_sigma,
        };
        *slot = v;
    }
}

impl fmt::Display for FreeParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bound {
    pub param: FreeParam,
    pub lower: f64,
    pub upper: f64,
}

/// What to fit and how.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSpec {
    pub free: Vec<FreeParam>,
    /// Bounds for the free parameters; missing ones default to
    /// `[0.5, 1.5] ×` the bundled value.
    pub bounds: Vec<Bound>,
    /// Strain rate of the simulated cycles [1/s].
    pub strain_rate: f64,
    pub max_iterations: usize,
    /// Loss below which the fit stops [Pa²].
    pub loss_tol: f64,
    /// Relative loss decrease below which the fit counts as converged.
    pub rel_tol: f64,
    /// Largest relative parameter change below which the fit counts as converged.
    pub step_tol: f64,
    /// Relative forward-difference step on the scaled parameters.
    pub fd_step: f64,
}

impl Default for FitSpec {
    fn default() -> Self {
        Self {
            free: vec![
                FreeParam::EA,
                FreeParam::EM,
                FreeParam::EpsT,
                FreeParam::SigmaT,
                FreeParam::SigmaMwT0,
                FreeParam::DeltaSigma,
            ],
            bounds: Vec::new(),
            strain_rate: 1e-4,
            max_iterations: 100,
            loss_tol: 1e-18,
            rel_tol: 1e-14,
            step_tol: 1e-6,
            fd_step: 1e-6,
        }
    }
}

impl FitSpec {
    fn bounds_for(&self, param: FreeParam) -> (f64, f64) {
        self.bounds
            .iter()
            .find(|b| b.param == param)
            .map(|b| (b.lower, b.upper))
            .unwrap_or_else(|| {
                let v = param.get(MaterialParams::cuznal().constants());
                (0.5 * v, 1.5 * v)
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Diagnostic {
    /// The loss does not depend on this parameter near the solution.
    Unidentifiable { param: FreeParam },
    /// The fitted value sits on a bound.
    AtBound { param: FreeParam, value: f64 },
    /// Iteration budget exhausted before convergence.
    IterationLimit,
    /// No step reduced the loss any further.
    Stalled,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::Unidentifiable { param } => {
                write!(f, "{param} is unidentifiable from the data")
            }
            Diagnostic::AtBound { param, value } => write!(f, "{param} = {value:e} sits on a bound"),
            Diagnostic::IterationLimit => write!(f, "iteration limit reached"),
            Diagnostic::Stalled => write!(f, "no further decrease of the loss"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    #[serde(skip)]
    pub params: MaterialParams,
    pub values: Vec<(FreeParam, f64)>,
    /// Mean squared stress residual [Pa²].
    pub loss: f64,
    pub initial_loss: f64,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub converged: bool,
    pub loss_history: Vec<f64>,
    pub diagnostics: Vec<Diagnostic>,
}

struct Problem<'a> {
    data: &'a [IsothermCurve],
    base: MaterialConstants,
    free: Vec<FreeParam>,
    scale: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    profiles: Vec<StrainProfile>,
    points: Vec<Vec<(f64, Branch)>>,
    n_samples: usize,
}

impl Problem<'_> {
    fn params(&self, theta: &[f64]) -> Result<MaterialParams> {
        let mut c = self.base.clone();
        for (k, param) in self.free.iter().enumerate() {
            param.set(&mut c, theta[k] * self.scale[k]);
        }
        MaterialParams::new(c)
    }

    /// Stress residuals in MPa, or `None` where the model is invalid.
    fn residuals(&self, theta: &[f64]) -> Option<DVector<f64>> {
        let p = self.params(theta).ok()?;
        let mut r = Vec::with_capacity(self.n_samples);
        for (i, curve) in self.data.iter().enumerate() {
            let sigma = isotherm_stress(&p, curve.ambient, &self.profiles[i], &self.points[i]).ok()?;
            r.extend(curve.samples.iter().zip(sigma).map(|(s, m)| (m - s.sigma) * 1e-6));
        }
        Some(DVector::from_vec(r))
    }

    fn loss(&self, r: &DVector<f64>) -> f64 {
        r.norm_squared() * 1e12 / self.n_samples as f64
    }

    fn project(&self, theta: &mut [f64]) {
        for k in 0..theta.len() {
            theta[k] = theta[k].clamp(self.lower[k], self.upper[k]);
        }
    }
}

/// Fits the free parameters of `spec` to `data`, starting from `guess`.
///
/// Returns the best parameters found together with diagnostics. An error is
/// returned for unusable input; a fit that fails to converge still returns
/// its best iterate with `converged == false`.
pub fn fit(data: &[IsothermCurve], spec: &FitSpec, guess: &MaterialParams) -> Result<FitReport> {
    if data.is_empty() {
        return Err(Error::Calibration("no isotherm data".into()));
    }
    for curve in data {
        curve.validate()?;
        for b in [Branch::Loading, Branch::Unloading] {
            if curve.branch(b).count() < 2 {
                return Err(Error::Calibration(format!(
                    "isotherm at {} K has no {b} branch; a single branch cannot separate the \
                     transformation stresses",
                    curve.ambient
                )));
            }
        }
    }
    if spec.free.is_empty() {
        return Err(Error::Calibration("no free parameters".into()));
    }
    let base = guess.constants().clone();
    let mut scale = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for &param in &spec.free {
        let v = param.get(&base);
        let (lo, hi) = spec.bounds_for(param);
        if !(lo <= v && v <= hi) {
            return Err(Error::Calibration(format!(
                "initial {param} = {v:e} outside bounds [{lo:e}, {hi:e}]"
            )));
        }
        scale.push(v);
        lower.push(lo / v);
        upper.push(hi / v);
    }
    let profiles = data
        .iter()
        .map(|c| StrainProfile {
            eps_max: c.max_strain(),
            rate: spec.strain_rate,
            points_per_branch: 2,
        })
        .collect();
    let points = data
        .iter()
        .map(|c| c.samples.iter().map(|s| (s.eps, s.branch)).collect())
        .collect();
    let prob = Problem {
        data,
        base,
        free: spec.free.clone(),
        scale,
        lower,
        upper,
        profiles,
        points,
        n_samples: data.iter().map(|c| c.samples.len()).sum(),
    };

    let n = spec.free.len();
    let mut theta = vec![1.0; n];
    let mut r = prob
        .residuals(&theta)
        .ok_or_else(|| Error::Calibration("model fails at the initial guess".into()))?;
    let mut loss = prob.loss(&r);
    let initial_loss = loss;
    let mut history = vec![loss];
    let mut diagnostics = Vec::new();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut accepted = 0;
    let mut converged = loss <= spec.loss_tol;
    let mut col_norms = vec![f64::INFINITY; n];

    while !converged && iterations < spec.max_iterations {
        iterations += 1;
        let columns: Vec<Option<DVector<f64>>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut t = theta.clone();
                // Step away from the upper bound if needed.
                let h = if t[k] + spec.fd_step > prob.upper[k] {
                    -spec.fd_step
                } else {
                    spec.fd_step
                };
                t[k] += h;
                prob.residuals(&t).map(|rk| (rk - &r) / h)
            })
            .collect();
        let mut jac = DMatrix::zeros(r.len(), n);
        for (k, col) in columns.into_iter().enumerate() {
            let col = col.ok_or_else(|| {
                Error::Calibration("model fails next to the current iterate".into())
            })?;
            col_norms[k] = col.norm();
            jac.set_column(k, &col);
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut step_taken = false;
        let mut gauss_newton_step = f64::INFINITY;
        for _ in 0..20 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 4.0;
                continue;
            };
            if gauss_newton_step.is_infinite() {
                gauss_newton_step = delta.amax();
            }
            let mut trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
            prob.project(&mut trial);
            match prob.residuals(&trial) {
                Some(r_new) if prob.loss(&r_new) < loss => {
                    let new_loss = prob.loss(&r_new);
                    let decrease = (loss - new_loss) / loss;
                    let moved = theta
                        .iter()
                        .zip(&trial)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    theta = trial;
                    r = r_new;
                    loss = new_loss;
                    history.push(loss);
                    accepted += 1;
                    lambda = (lambda / 3.0).max(1e-12);
                    step_taken = true;
                    if loss <= spec.loss_tol || decrease < spec.rel_tol || moved < spec.step_tol {
                        converged = true;
                    }
                    break;
                }
                _ => lambda *= 4.0,
            }
        }
        if !step_taken {
            // Integration noise sets a floor on the loss; once the
            // Gauss-Newton correction is negligible the iterate is final.
            converged = gauss_newton_step < spec.step_tol;
            if !converged {
                diagnostics.push(Diagnostic::Stalled);
            }
            break;
        }
    }
    if !converged && iterations >= spec.max_iterations {
        diagnostics.push(Diagnostic::IterationLimit);
    }
    let max_norm = col_norms.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    for (k, &param) in spec.free.iter().enumerate() {
        if col_norms[k].is_finite() && col_norms[k] <= 1e-8 * max_norm.max(1e-300) {
            diagnostics.push(Diagnostic::Unidentifiable { param });
        }
        if theta[k] <= prob.lower[k] || theta[k] >= prob.upper[k] {
            diagnostics.push(Diagnostic::AtBound {
                param,
                value: theta[k] * prob.scale[k],
            });
        }
    }
    let params = prob.params(&theta)?;
    Ok(FitReport {
        values: spec.free.iter().map(|&q| (q, q.get(params.constants()))).collect(),
        params,
        loss,
        initial_loss,
        iterations,
        accepted_steps: accepted,
        converged,
        loss_history: history,
        diagnostics,
    })
}
