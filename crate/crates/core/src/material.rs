//! Constitutive and thermal algebra of a single-crystal SMA wire.
//!
//! Everything here is a pure function of an immutable [`MaterialParams`]
//! value. Stress is defined for every real strain; admissibility of the
//! state (non-negative strain, phase fraction in `[0, 1]`) is the business
//! of the wire models built on top.
//!
//! Units are SI throughout: Pa, K, m, W, s.

use std::f64::consts::PI;
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack accepted on phase-fraction arguments.
pub const PHASE_FRACTION_TOL: f64 = 1e-12;

/// Relative threshold below which the auxiliary denominators `Σ_A`, `Σ_M`
/// are treated as singular (scaled by `E_A·E_M·eps_T`).
pub const SINGULAR_SIGMA_TOL: f64 = 1e-12;

const BUNDLED_CUZNAL: &str = include_str!("../../../params/cuznal_fu1993.json");

/// Raw material constants, serialized with SI-unit field names.
#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConstants {
    /// Austenite Young's modulus [Pa].
    #[serde(rename = "E_A")]
    pub e_a: f64,
    /// Martensite Young's modulus [Pa].
    #[serde(rename = "E_M")]
    pub e_m: f64,
    /// Transformation strain [-].
    #[serde(rename = "eps_T")]
    pub eps_t: f64,
    /// Slope of the transformation stresses in temperature [Pa/K].
    #[serde(rename = "sigma_T")]
    pub sigma_t: f64,
    /// Maxwell (equilibrium) stress at the reference temperature [Pa].
    #[serde(rename = "sigma_MW_T0")]
    pub sigma_mw_t0: f64,
    /// Width of the stress hysteresis [Pa].
    pub delta_sigma: f64,
    /// Reference temperature [K].
    #[serde(rename = "T0")]
    pub t0: f64,
    /// Undeformed wire radius [m].
    pub r0: f64,
    /// Undeformed wire length [m].
    pub l0: f64,
    /// Density [kg/m^3].
    #[serde(rename = "rho_V")]
    pub rho_v: f64,
    /// Specific heat [J/(kg K)].
    #[serde(rename = "c_V")]
    pub c_v: f64,
    /// Convective cooling coefficient [W/(m^2 K)].
    pub lambda: f64,
    /// Thermal-activation attempt frequency [1/s].
    pub omega_x: f64,
    /// Mesoscopic layer volume [m^3].
    #[serde(rename = "V_L")]
    pub v_l: f64,
    /// Boltzmann constant [J/K].
    #[serde(rename = "k_B")]
    pub k_b: f64,
}

/// Validated material parameters with cached geometric quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaterialConstants", into = "MaterialConstants")]
pub struct MaterialParams {
    constants: MaterialConstants,
    volume: f64,
    lateral_area: f64,
}

impl Deref for MaterialParams {
    type Target = MaterialConstants;

    fn deref(&self) -> &MaterialConstants {
        &self.constants
    }
}

impl TryFrom<MaterialConstants> for MaterialParams {
    type Error = Error;

    fn try_from(c: MaterialConstants) -> Result<Self> {
        Self::new(c)
    }
}

impl From<MaterialParams> for MaterialConstants {
    fn from(p: MaterialParams) -> Self {
        p.constants
    }
}

fn require(name: &'static str, ok: bool, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: reason.to_string(),
        })
    }
}

/// Transition probabilities, latent-heat coefficients and friends all need
/// `1/E_M - 1/E_A`.
#[inline]
fn compliance_gap(c: &MaterialConstants) -> f64 {
    1.0 / c.e_m - 1.0 / c.e_a
}

/// Latent-heat coupling coefficients of the energy balance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatentCoeffs {
    /// Coefficient multiplying the phase-fraction rate [J].
    pub l_xm: f64,
    /// Coefficient multiplying the temperature rate [J/K].
    pub l_t: f64,
}

impl MaterialParams {
    pub fn new(constants: MaterialConstants) -> Result<Self> {
        let c = &constants;
        let all_finite = [
            c.e_a,
            c.e_m,
            c.eps_t,
            c.sigma_t,
            c.sigma_mw_t0,
            c.delta_sigma,
            c.t0,
            c.r0,
            c.l0,
            c.rho_v,
            c.c_v,
            c.lambda,
            c.omega_x,
            c.v_l,
            c.k_b,
        ]
        .iter()
        .all(|v| v.is_finite());
        require("*", all_finite, "all constants must be finite")?;
        require("E_M", c.e_m > 0.0, "must be positive")?;
        require("E_A", c.e_a > c.e_m, "must exceed E_M")?;
        require("eps_T", c.eps_t > 0.0, "must be positive")?;
        require("delta_sigma", c.delta_sigma > 0.0, "must be positive")?;
        require("sigma_T", c.sigma_t > 0.0, "must be positive")?;
        require("T0", c.t0 > 0.0, "must be positive")?;
        require("r0", c.r0 > 0.0, "must be positive")?;
        require("l0", c.l0 > 0.0, "must be positive")?;
        require("rho_V", c.rho_v > 0.0, "must be positive")?;
        require("c_V", c.c_v > 0.0, "must be positive")?;
        require("lambda", c.lambda > 0.0, "must be positive")?;
        require("omega_x", c.omega_x > 0.0, "must be positive")?;
        require("V_L", c.v_l > 0.0, "must be positive")?;
        require("k_B", c.k_b > 0.0, "must be positive")?;

        let volume = PI * c.r0 * c.r0 * c.l0;
        let lateral_area = 2.0 * PI * c.r0 * c.l0;
        Ok(Self {
            constants,
            volume,
            lateral_area,
        })
    }

    /// The CuZnAl single-crystal parameter set shipped with the crate.
    pub fn cuznal() -> Self {
        serde_json::from_str(BUNDLED_CUZNAL).expect("bundled parameter file is valid")
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn constants(&self) -> &MaterialConstants {
        &self.constants
    }

    /// Returns a re-validated copy with `edit` applied to the constants.
    pub fn modified(&self, edit: impl FnOnce(&mut MaterialConstants)) -> Result<Self> {
        let mut c = self.constants.clone();
        edit(&mut c);
        Self::new(c)
    }

    /// Wire volume `Ω = π r0² l0` [m³].
    #[inline]
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Lateral surface `A_s = 2π r0 l0` [m²].
    #[inline]
    pub fn lateral_area(&self) -> f64 {
        self.lateral_area
    }

    /// Heat capacity of the wire `Ω ρ_V c_V` [J/K].
    #[inline]
    pub fn heat_capacity(&self) -> f64 {
        self.volume * self.rho_v * self.c_v
    }

    #[inline]
    pub fn cross_section(&self) -> f64 {
        PI * self.r0 * self.r0
    }

    /// Mixture stress for strain `eps` and martensite fraction `x_m`.
    pub fn stress(&self, eps: f64, x_m: f64) -> Result<f64> {
        if !(-PHASE_FRACTION_TOL..=1.0 + PHASE_FRACTION_TOL).contains(&x_m) {
            return Err(Error::PhaseFractionDomain(x_m));
        }
        Ok(self.stress_unchecked(eps, x_m.clamp(0.0, 1.0)))
    }

    #[inline]
    /// The constitutive law without the phase-fraction domain check.
    pub fn stress_unchecked(&self, eps: f64, x_m: f64) -> f64 {
        (eps - self.eps_t * x_m) / (x_m / self.e_m + (1.0 - x_m) / self.e_a)
    }

    /// Strain reached at stress `sigma` for a fixed phase fraction (inverse of [`Self::stress`]).
    pub fn strain_at(&self, sigma: f64, x_m: f64) -> f64 {
        self.eps_t * x_m + sigma * (x_m / self.e_m + (1.0 - x_m) / self.e_a)
    }

    /// Axial wire force [N].
    #[inline]
    pub fn wire_force(&self, sigma: f64) -> f64 {
        self.cross_section() * sigma
    }

    #[inline]
    pub fn wire_length(&self, eps: f64) -> f64 {
        self.l0 * (1.0 + eps)
    }

    #[inline]
    pub fn strain_rate(&self, v: f64) -> f64 {
        v / self.l0
    }

    #[inline]
    pub fn sigma_mw(&self, temp: f64) -> f64 {
        self.sigma_mw_t0 + self.sigma_t * (temp - self.t0)
    }

    /// Austenite-to-martensite transformation stress.
    #[inline]
    pub fn sigma_a(&self, temp: f64) -> f64 {
        self.sigma_mw(temp) + 0.5 * self.delta_sigma
    }

    /// Martensite-to-austenite transformation stress.
    #[inline]
    pub fn sigma_m(&self, temp: f64) -> f64 {
        self.sigma_mw(temp) - 0.5 * self.delta_sigma
    }

    fn gamma(&self, sigma: f64) -> f64 {
        compliance_gap(self) * 0.5 * sigma * sigma + self.eps_t * sigma
    }

    fn gamma_t(&self, temp: f64) -> f64 {
        compliance_gap(self) * self.sigma_mw(temp) * self.sigma_t + self.eps_t * self.sigma_t
    }

    fn gamma_tt(&self) -> f64 {
        compliance_gap(self) * self.sigma_t * self.sigma_t
    }

    /// Latent-heat coefficients `L_xM` and `L_T` at stress `sigma`,
    /// temperature `temp` and phase fraction `x_m`.
    pub fn latent_coeffs(&self, sigma: f64, temp: f64, x_m: f64) -> LatentCoeffs {
        let omega = self.volume;
        LatentCoeffs {
            l_xm: omega
                * (temp * self.gamma_t(temp) + self.gamma(sigma) - self.gamma(self.sigma_mw(temp))),
            l_t: omega * temp * self.gamma_tt() * (x_m - 1.0),
        }
    }

    #[allow(non_snake_case)]
    pub fn Sigma_A(&self, temp: f64) -> f64 {
        (self.e_a - self.e_m) * self.sigma_a(temp) + self.e_a * self.e_m * self.eps_t
    }

    #[allow(non_snake_case)]
    pub fn Sigma_M(&self, temp: f64) -> f64 {
        (self.e_a - self.e_m) * self.sigma_m(temp) + self.e_a * self.e_m * self.eps_t
    }

    /// The strain-dependent auxiliary scalar of the transformation-mode energy balance.
    pub fn m_aux(&self, eps: f64) -> f64 {
        (self.e_a - self.e_m) * eps * self.sigma_t + self.e_m * self.eps_t * self.sigma_t
    }

    fn check_sigma(&self, what: &'static str, s: f64) -> Result<f64> {
        if s.abs() < SINGULAR_SIGMA_TOL * self.e_a * self.e_m * self.eps_t {
            Err(Error::Singular { what, value: s })
        } else {
            Ok(s)
        }
    }

    /// Phase fraction that pins the stress to `sigma_A(T)`; unbounded.
    pub fn x_m4(&self, eps: f64, temp: f64) -> Result<f64> {
        let s = self.check_sigma("Sigma_A", self.Sigma_A(temp))?;
        Ok(self.e_m * (self.e_a * eps - self.sigma_a(temp)) / s)
    }

    /// Phase fraction that pins the stress to `sigma_M(T)`; unbounded.
    pub fn x_m5(&self, eps: f64, temp: f64) -> Result<f64> {
        let s = self.check_sigma("Sigma_M", self.Sigma_M(temp))?;
        Ok(self.e_m * (self.e_a * eps - self.sigma_m(temp)) / s)
    }

    /// Newton's law cooling plus Joule heating [W].
    #[inline]
    pub fn net_heat_input(&self, input: &WireInput, temp: f64) -> f64 {
        input.joule - self.lambda * self.lateral_area * (temp - input.ambient)
    }
}

/// External inputs of a single wire.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireInput {
    /// Deformation rate `dl/dt` [m/s].
    pub velocity: f64,
    /// Joule heating power [W].
    pub joule: f64,
    /// Environment temperature [K].
    pub ambient: f64,
}

impl WireInput {
    pub fn new(velocity: f64, joule: f64, ambient: f64) -> Result<Self> {
        if !(joule >= 0.0) {
            return Err(Error::InvalidInput(format!("Joule heating {joule} must be >= 0")));
        }
        if !(ambient > 0.0) {
            return Err(Error::InvalidInput(format!(
                "environment temperature {ambient} must be > 0"
            )));
        }
        if !velocity.is_finite() {
            return Err(Error::InvalidInput("velocity must be finite".into()));
        }
        Ok(Self {
            velocity,
            joule,
            ambient,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p() -> MaterialParams {
        MaterialParams::cuznal()
    }

    #[test]
    fn stress_examples() {
        let p = p();
        assert_relative_eq!(p.stress(0.01, 0.0).unwrap(), 123e6, max_relative = 1e-12);
        assert_eq!(p.stress(p.eps_t, 1.0).unwrap(), 0.0);
        assert_eq!(p.stress(0.0, 0.0).unwrap(), 0.0);
        assert!(p.stress(-0.01, 0.0).unwrap() < 0.0);
    }

    #[test]
    fn stress_rejects_fraction_out_of_range() {
        let p = p();
        assert!(matches!(
            p.stress(0.01, 1.0 + 1e-9),
            Err(Error::PhaseFractionDomain(_))
        ));
        assert!(p.stress(0.01, -1e-9).is_err());
        assert!(p.stress(0.01, 1.0 + 1e-13).is_ok());
    }

    #[test]
    fn force_and_kinematics() {
        let p = p();
        assert_relative_eq!(p.wire_force(127.5e6), 2.2531, max_relative = 1e-4);
        assert_relative_eq!(p.wire_force(100e6), 1.76715, max_relative = 1e-5);
        assert_eq!(p.wire_force(0.0), 0.0);
        assert_relative_eq!(p.wire_length(0.0), 95.7e-3);
        assert_relative_eq!(p.wire_length(0.067), 102.1119e-3, max_relative = 1e-6);
        assert_eq!(p.strain_rate(0.0), 0.0);
    }

    #[test]
    fn transformation_stresses() {
        let p = p();
        assert_relative_eq!(p.sigma_mw(323.0), 121.35e6);
        assert_relative_eq!(p.sigma_a(323.0), 127.5e6);
        assert_relative_eq!(p.sigma_m(323.0), 115.2e6);
        assert_relative_eq!(p.sigma_mw(333.0), 142.65e6, max_relative = 1e-12);
        for t in [250.0, 300.0, 377.7] {
            assert_relative_eq!(p.sigma_a(t) - p.sigma_m(t), p.delta_sigma, max_relative = 1e-9);
        }
    }

    #[test]
    fn derived_geometry() {
        let p = p();
        assert_eq!(p.volume(), PI * p.r0 * p.r0 * p.l0);
        assert_eq!(p.lateral_area(), 2.0 * PI * p.r0 * p.l0);
        assert_relative_eq!(p.lateral_area(), 4.5097e-5, max_relative = 1e-4);
    }

    #[test]
    fn auxiliary_scalars() {
        let p = p();
        assert_relative_eq!(p.Sigma_A(323.0), 7.00173e18, max_relative = 1e-5);
        assert_relative_eq!(
            p.Sigma_A(300.0) - p.Sigma_M(300.0),
            (p.e_a - p.e_m) * p.delta_sigma,
            max_relative = 1e-9
        );
        assert_relative_eq!(p.m_aux(0.0), p.e_m * p.eps_t * p.sigma_t);
        assert_relative_eq!(
            p.m_aux(0.05) - p.m_aux(0.0),
            (p.e_a - p.e_m) * 0.05 * p.sigma_t,
            max_relative = 1e-9
        );
    }

    #[test]
    fn x_m4_examples() {
        let p = p();
        let eps0 = p.sigma_a(323.0) / p.e_a;
        assert_relative_eq!(eps0, 0.010366, max_relative = 1e-4);
        assert!(p.x_m4(eps0, 323.0).unwrap().abs() < 1e-14);
        let eps1 = p.sigma_a(323.0) / p.e_m + p.eps_t;
        assert_relative_eq!(eps1, 0.08335, max_relative = 1e-4);
        assert_relative_eq!(p.x_m4(eps1, 323.0).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn latent_coefficients() {
        let p = p();
        let l = p.latent_coeffs(100e6, 310.0, 1.0);
        assert_eq!(l.l_t, 0.0);
        let t = 323.0;
        let l = p.latent_coeffs(p.sigma_mw(t), t, 0.3);
        assert_relative_eq!(l.l_xm, p.volume() * t * p.gamma_t(t), max_relative = 1e-14);
        for x in [0.0, 0.5, 1.0] {
            assert!(p.latent_coeffs(1e8, 300.0, x).l_t <= 0.0);
        }
    }

    #[test]
    fn singular_sigma_detected() {
        let p = p();
        // Σ_A vanishes where σ_A = -E_A E_M eps_T / (E_A - E_M).
        let s_target = -p.e_a * p.e_m * p.eps_t / (p.e_a - p.e_m) - 0.5 * p.delta_sigma;
        let t = p.t0 + (s_target - p.sigma_mw_t0) / p.sigma_t;
        assert!(matches!(p.x_m4(0.01, t), Err(Error::Singular { .. })));
    }

    #[test]
    fn invalid_params_rejected() {
        let p = p();
        assert!(p.modified(|c| c.e_a = 1e9).is_err());
        assert!(p.modified(|c| c.delta_sigma = 0.0).is_err());
        assert!(p.modified(|c| c.r0 = f64::NAN).is_err());
    }

    #[test]
    fn json_roundtrip_uses_si_names() {
        let p = p();
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"E_A\"") && text.contains("\"sigma_MW_T0\""));
        let back: MaterialParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<MaterialParams>(&text.replace("12300000000.0", "1.0")).is_err());
    }

    #[test]
    fn wire_input_validation() {
        assert!(WireInput::new(0.0, -1.0, 300.0).is_err());
        assert!(WireInput::new(0.0, 1.0, 0.0).is_err());
        assert!(WireInput::new(1e-3, 1.0, 300.0).is_ok());
    }
}
