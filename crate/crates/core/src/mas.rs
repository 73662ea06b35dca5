//! Stiff reference model: the phase fraction is a state driven by
//! thermally activated transition probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{MaterialParams, WireInput};
use crate::solver::JumpPriority;
use crate::wire::{admissible_strain_rate, WireModel};

/// Slack on the phase-fraction range along integrated trajectories.
pub const PHASE_FRACTION_SLACK: f64 = 1e-6;

/// Energy barriers `(Δg_AM, Δg_MA)` of the two transformations [J/m³].
pub trait BarrierModel: Send + Sync {
    fn barriers(&self, p: &MaterialParams, sigma: f64, temp: f64) -> (f64, f64);
}

/// Barriers growing linearly with the distance to the transformation
/// stresses: `Δg_AM = c_g·max(0, σ_A − σ)`, `Δg_MA = c_g·max(0, σ − σ_M)`.
///
/// `c_g` is dimensionless; `V_L·c_g/(k_B·T)` is the sharpness of the
/// switching per pascal of stress.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearBarrier {
    pub c_g: f64,
}

impl LinearBarrier {
    pub const DEFAULT_C_G: f64 = 0.05;

    /// Barrier whose exponent grows by `per_pascal` per Pa at temperature `temp`.
    pub fn with_sharpness(p: &MaterialParams, per_pascal: f64, temp: f64) -> Self {
        Self {
            c_g: per_pascal * p.k_b * temp / p.v_l,
        }
    }
}

impl Default for LinearBarrier {
    fn default() -> Self {
        Self {
            c_g: Self::DEFAULT_C_G,
        }
    }
}

impl BarrierModel for LinearBarrier {
    fn barriers(&self, p: &MaterialParams, sigma: f64, temp: f64) -> (f64, f64) {
        (
            self.c_g * (p.sigma_a(temp) - sigma).max(0.0),
            self.c_g * (sigma - p.sigma_m(temp)).max(0.0),
        )
    }
}

/// `(p_MA, p_AM)` [1/s], each capped at the attempt frequency.
pub fn transition_probabilities(
    p: &MaterialParams,
    barrier: &impl BarrierModel,
    sigma: f64,
    temp: f64,
) -> (f64, f64) {
    let (g_am, g_ma) = barrier.barriers(p, sigma, temp);
    let rate = |g: f64| (p.omega_x * (-p.v_l * g / (p.k_b * temp)).exp()).min(p.omega_x);
    (rate(g_ma), rate(g_am))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MasState {
    pub eps: f64,
    pub x_m: f64,
    pub temp: f64,
}

/// `(d eps/dt, d x_M/dt, dT/dt)`.
pub fn mas_rhs(
    p: &MaterialParams,
    barrier: &impl BarrierModel,
    s: &MasState,
    u: &WireInput,
) -> Result<(f64, f64, f64)> {
    let x_m = s.x_m.clamp(0.0, 1.0);
    let sigma = p.stress_unchecked(s.eps, x_m);
    let (p_ma, p_am) = transition_probabilities(p, barrier, sigma, s.temp);
    let x_rate = -p_ma * x_m + p_am * (1.0 - x_m);
    let latent = p.latent_coeffs(sigma, s.temp, x_m);
    let den = p.heat_capacity() - latent.l_t;
    if den.abs() < 1e-9 * p.heat_capacity() {
        return Err(Error::Singular {
            what: "energy balance",
            value: den,
        });
    }
    let temp_rate = (p.net_heat_input(u, s.temp) + latent.l_xm * x_rate) / den;
    Ok((admissible_strain_rate(p, s.eps, u.velocity), x_rate, temp_rate))
}

/// The reference model has no jumps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoJump {}

impl JumpPriority for NoJump {
    fn priority(&self) -> u32 {
        match *self {}
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MasWire<B = LinearBarrier> {
    pub params: MaterialParams,
    pub barrier: B,
}

impl<B: BarrierModel> MasWire<B> {
    pub fn new(params: MaterialParams, barrier: B) -> Self {
        Self { params, barrier }
    }
}

impl<B: BarrierModel + Clone> WireModel for MasWire<B> {
    type Discrete = ();
    type Jump = NoJump;

    const DIM: usize = 3;
    const TEMP_INDEX: usize = 2;

    fn params(&self) -> &MaterialParams {
        &self.params
    }

    fn phase_fraction(&self, x: &[f64], _d: &()) -> Result<f64> {
        let x_m = x[1];
        if !(-PHASE_FRACTION_SLACK..=1.0 + PHASE_FRACTION_SLACK).contains(&x_m) {
            return Err(Error::PhaseFractionDomain(x_m));
        }
        Ok(x_m.clamp(0.0, 1.0))
    }

    fn flow(&self, x: &[f64], _d: &(), u: &WireInput, dx: &mut [f64]) -> Result<()> {
        let s = MasState {
            eps: x[0],
            x_m: x[1],
            temp: x[2],
        };
        let (a, b, c) = mas_rhs(&self.params, &self.barrier, &s, u)?;
        dx[0] = a;
        dx[1] = b;
        dx[2] = c;
        Ok(())
    }

    fn apply_jump(&self, _x: &[f64], _d: &mut (), jump: NoJump) -> Result<()> {
        match jump {}
    }

    fn abs_tol(&self) -> Vec<f64> {
        vec![1e-8, 1e-8, 1e-6]
    }

    fn with_rest_length(&self, l0: f64) -> Result<Self> {
        Ok(Self::new(self.params.modified(|c| c.l0 = l0)?, self.barrier.clone()))
    }

    fn rest_state(&self, eps: f64, temp: f64, x_m: f64) -> (Vec<f64>, ()) {
        (vec![eps, x_m.clamp(0.0, 1.0), temp], ())
    }
}
