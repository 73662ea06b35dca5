//! The SMA wire as a hybrid system: five operating modes, flow sets
//! `C1..C5`, jump sets `D1..D8` and jump maps `g1..g8`.
//!
//! The continuous state is `(eps, T)`; the frozen phase fraction `x3` and
//! the mode `q` only change at jumps. In the transformation modes the phase
//! fraction is not integrated but recovered algebraically from `(eps, T)`,
//! which pins the stress to `sigma_A(T)` (mode 4) or `sigma_M(T)` (mode 5).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{MaterialParams, WireInput};
use crate::solver::{HybridSystem, InputSignal, JumpPriority, Signal};

/// Time scale converting phase-fraction rates into guard units [s].
pub const RATE_SCALE: f64 = 1.0;

/// Residual accepted on a jump precondition and on the `x3` clamp.
pub const JUMP_TOL: f64 = 1e-9;

/// Relative size below which a transformation-mode denominator is singular.
pub const SINGULAR_DENOMINATOR_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Mode {
    Austenite = 1,
    Martensite = 2,
    InnerLoop = 3,
    AtoM = 4,
    MtoA = 5,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Austenite,
        Mode::Martensite,
        Mode::InnerLoop,
        Mode::AtoM,
        Mode::MtoA,
    ];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<Mode> {
        Mode::ALL.get(usize::from(i).checked_sub(1)?).copied()
    }

    /// Whether `(self, to)` is an edge of the mode graph.
    pub fn has_edge_to(self, to: Mode) -> bool {
        use Mode::*;
        matches!(
            (self, to),
            (Austenite, AtoM)
                | (Martensite, MtoA)
                | (InnerLoop, MtoA)
                | (InnerLoop, AtoM)
                | (AtoM, Martensite)
                | (AtoM, InnerLoop)
                | (MtoA, Austenite)
                | (MtoA, InnerLoop)
        )
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Identifier `i` of a jump set `D_i` and its map `g_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WireJump {
    D1,
    D2,
    D3,
    D4,
    D5,
    D6,
    D7,
    D8,
}

impl WireJump {
    pub const ALL: [WireJump; 8] = [
        WireJump::D1,
        WireJump::D2,
        WireJump::D3,
        WireJump::D4,
        WireJump::D5,
        WireJump::D6,
        WireJump::D7,
        WireJump::D8,
    ];

    pub fn index(self) -> u8 {
        self as u8 + 1
    }

    pub fn source(self) -> Mode {
        use WireJump::*;
        match self {
            D1 => Mode::Austenite,
            D2 => Mode::Martensite,
            D3 | D4 => Mode::InnerLoop,
            D5 | D6 => Mode::AtoM,
            D7 | D8 => Mode::MtoA,
        }
    }

    pub fn target(self) -> Mode {
        use WireJump::*;
        match self {
            D1 | D4 => Mode::AtoM,
            D2 | D3 => Mode::MtoA,
            D5 => Mode::Martensite,
            D6 | D8 => Mode::InnerLoop,
            D7 => Mode::Austenite,
        }
    }

    fn from_mode(mode: Mode) -> &'static [WireJump] {
        use WireJump::*;
        match mode {
            Mode::Austenite => &[D1],
            Mode::Martensite => &[D2],
            Mode::InnerLoop => &[D3, D4],
            Mode::AtoM => &[D5, D6],
            Mode::MtoA => &[D7, D8],
        }
    }
}

impl JumpPriority for WireJump {
    fn priority(&self) -> u32 {
        let reversal = matches!(self, WireJump::D6 | WireJump::D8);
        u32::from(reversal) * 16 + u32::from(self.index())
    }

    fn is_completion(&self) -> bool {
        matches!(self, WireJump::D5 | WireJump::D7)
    }
}

impl fmt::Display for WireJump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D{}", self.index())
    }
}

/// Discrete part of the wire state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireDiscrete {
    pub x3: f64,
    pub mode: Mode,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridWireState {
    pub eps: f64,
    pub temp: f64,
    pub x3: f64,
    pub mode: Mode,
}

impl HybridWireState {
    /// Stress-free austenite at temperature `temp`.
    pub fn austenite(eps: f64, temp: f64) -> Self {
        Self {
            eps,
            temp,
            x3: 0.0,
            mode: Mode::Austenite,
        }
    }

    pub fn continuous(&self) -> [f64; 2] {
        [self.eps, self.temp]
    }

    pub fn discrete(&self) -> WireDiscrete {
        WireDiscrete {
            x3: self.x3,
            mode: self.mode,
        }
    }

    pub fn from_parts(x: &[f64], d: &WireDiscrete) -> Self {
        Self {
            eps: x[0],
            temp: x[1],
            x3: d.x3,
            mode: d.mode,
        }
    }

    /// Checks membership in `X`, including the `x3` convention of modes 1 and 2.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidInput(format!("strain {} must be >= 0", self.eps)));
        }
        if !(self.temp > 0.0) {
            return Err(Error::InvalidInput(format!("temperature {} must be > 0", self.temp)));
        }
        if !(0.0..=1.0).contains(&self.x3) {
            return Err(Error::PhaseFractionDomain(self.x3));
        }
        match self.mode {
            Mode::Austenite if self.x3 != 0.0 => {
                Err(Error::InvalidInput("mode 1 requires x3 = 0".into()))
            }
            Mode::Martensite if self.x3 != 1.0 => {
                Err(Error::InvalidInput("mode 2 requires x3 = 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Temperature rate and phase-fraction rate a wire would have in a
/// transformation mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformationRates {
    pub temp_rate: f64,
    pub phase_rate: f64,
}

/// Strain rate with wire slack suppressed: a wire at zero strain cannot be
/// compressed further.
#[inline]
pub fn admissible_strain_rate(p: &MaterialParams, eps: f64, velocity: f64) -> f64 {
    if eps <= 0.0 && velocity < 0.0 {
        0.0
    } else {
        p.strain_rate(velocity)
    }
}

/// Rates of the forward (`Mode::AtoM`) or reverse (`Mode::MtoA`)
/// transformation at `(eps, temp)`, whatever the current mode.
pub fn transformation_rates(
    p: &MaterialParams,
    eps: f64,
    temp: f64,
    u: &WireInput,
    target: Mode,
) -> Result<TransformationRates> {
    let (sigma_big, sigma, x_m) = match target {
        Mode::AtoM => (p.Sigma_A(temp), p.sigma_a(temp), p.x_m4(eps, temp)?),
        Mode::MtoA => (p.Sigma_M(temp), p.sigma_m(temp), p.x_m5(eps, temp)?),
        _ => unreachable!("transformation rates exist only for modes 4 and 5"),
    };
    let eps_rate = admissible_strain_rate(p, eps, u.velocity);
    let latent = p.latent_coeffs(sigma, temp, x_m.clamp(0.0, 1.0));
    let m = p.m_aux(eps);
    let ee = p.e_a * p.e_m;
    let s2 = sigma_big * sigma_big;
    let lead = (p.heat_capacity() - latent.l_t) * s2;
    let den = lead + ee * latent.l_xm * m;
    if den.abs() < SINGULAR_DENOMINATOR_TOL * lead.abs() {
        return Err(Error::Singular {
            what: "transformation-mode energy balance",
            value: den,
        });
    }
    let temp_rate =
        (p.net_heat_input(u, temp) * s2 + ee * latent.l_xm * sigma_big * eps_rate) / den;
    let phase_rate = ee / s2 * (sigma_big * eps_rate - m * temp_rate);
    Ok(TransformationRates {
        temp_rate,
        phase_rate,
    })
}

/// Phase fraction seen by the constitutive law, clamped to `[0, 1]`.
pub fn effective_phase_fraction(p: &MaterialParams, x: &HybridWireState) -> Result<f64> {
    let x_m = match x.mode {
        Mode::Austenite | Mode::Martensite | Mode::InnerLoop => x.x3,
        Mode::AtoM => p.x_m4(x.eps, x.temp)?,
        Mode::MtoA => p.x_m5(x.eps, x.temp)?,
    };
    Ok(x_m.clamp(0.0, 1.0))
}

/// `(d eps/dt, dT/dt)`; `x3` and `q` do not flow.
pub fn flow_map(p: &MaterialParams, x: &HybridWireState, u: &WireInput) -> Result<(f64, f64)> {
    let eps_rate = admissible_strain_rate(p, x.eps, u.velocity);
    let temp_rate = match x.mode {
        Mode::AtoM | Mode::MtoA => transformation_rates(p, x.eps, x.temp, u, x.mode)?.temp_rate,
        _ => {
            let l_t = p.latent_coeffs(0.0, x.temp, x.x3).l_t;
            p.net_heat_input(u, x.temp) / (p.heat_capacity() - l_t)
        }
    };
    Ok((eps_rate, temp_rate))
}

/// Rate of the effective phase fraction during flow.
pub fn phase_fraction_rate(p: &MaterialParams, x: &HybridWireState, u: &WireInput) -> Result<f64> {
    match x.mode {
        Mode::AtoM | Mode::MtoA => {
            Ok(transformation_rates(p, x.eps, x.temp, u, x.mode)?.phase_rate)
        }
        _ => Ok(0.0),
    }
}

/// Signed distance to the flow set of the current mode (`>= 0` inside).
pub fn flow_margin(p: &MaterialParams, x: &HybridWireState, u: &WireInput) -> Result<f64> {
    Ok(match x.mode {
        Mode::Austenite => -p.x_m4(x.eps, x.temp)?,
        Mode::Martensite => p.x_m5(x.eps, x.temp)? - 1.0,
        Mode::InnerLoop => {
            let lo = p.x_m4(x.eps, x.temp)?;
            let hi = p.x_m5(x.eps, x.temp)?;
            if hi < lo {
                log::warn!("empty inner-loop flow set: x_M5 = {hi} < x_M4 = {lo}");
            }
            (x.x3 - lo).min(hi - x.x3)
        }
        Mode::AtoM => {
            let r = transformation_rates(p, x.eps, x.temp, u, Mode::AtoM)?;
            (1.0 - p.x_m4(x.eps, x.temp)?).min(RATE_SCALE * r.phase_rate)
        }
        Mode::MtoA => {
            let r = transformation_rates(p, x.eps, x.temp, u, Mode::MtoA)?;
            p.x_m5(x.eps, x.temp)?.min(-RATE_SCALE * r.phase_rate)
        }
    })
}

pub fn in_flow_set(p: &MaterialParams, x: &HybridWireState, u: &WireInput) -> bool {
    x.validate().is_ok() && flow_margin(p, x, u).is_ok_and(|m| m >= 0.0)
}

/// Signed membership margin of `D_i` (`>= 0` inside). Jumps whose source
/// mode differs from the current one get `-inf`.
pub fn jump_set_margin(
    p: &MaterialParams,
    x: &HybridWireState,
    u: &WireInput,
    jump: WireJump,
) -> Result<f64> {
    use WireJump::*;
    if jump.source() != x.mode {
        return Ok(f64::NEG_INFINITY);
    }
    let fwd = || -> Result<(f64, f64)> {
        let r = transformation_rates(p, x.eps, x.temp, u, Mode::AtoM)?;
        Ok((p.x_m4(x.eps, x.temp)?, RATE_SCALE * r.phase_rate))
    };
    let rev = || -> Result<(f64, f64)> {
        let r = transformation_rates(p, x.eps, x.temp, u, Mode::MtoA)?;
        Ok((p.x_m5(x.eps, x.temp)?, RATE_SCALE * r.phase_rate))
    };
    Ok(match jump {
        D1 => {
            let (xm, phi) = fwd()?;
            xm.min(phi)
        }
        D2 => {
            let (xm, phi) = rev()?;
            (1.0 - xm).min(-phi)
        }
        D3 => {
            let (xm, phi) = rev()?;
            (x.x3 - xm).min(-phi)
        }
        D4 => {
            let (xm, phi) = fwd()?;
            (xm - x.x3).min(phi)
        }
        D5 => {
            let (xm, phi) = fwd()?;
            (xm - 1.0).min(phi)
        }
        D6 => {
            let (xm, phi) = fwd()?;
            (1.0 - xm).min(-phi)
        }
        D7 => {
            let (xm, phi) = rev()?;
            (-xm).min(-phi)
        }
        D8 => {
            let (xm, phi) = rev()?;
            xm.min(phi)
        }
    })
}

/// Largest jump-set margin over the jumps leaving the current mode.
pub fn jump_margin(p: &MaterialParams, x: &HybridWireState, u: &WireInput) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for &j in WireJump::from_mode(x.mode) {
        best = best.max(jump_set_margin(p, x, u, j)?);
    }
    Ok(best)
}

/// Every jump whose set contains `(x, u)`, in index order.
pub fn enabled_jumps(p: &MaterialParams, x: &HybridWireState, u: &WireInput) -> Vec<WireJump> {
    let mut out = Vec::new();
    push_enabled_jumps(p, x, u, &mut out);
    out
}

fn push_enabled_jumps(
    p: &MaterialParams,
    x: &HybridWireState,
    u: &WireInput,
    out: &mut Vec<WireJump>,
) {
    for &j in WireJump::from_mode(x.mode) {
        if jump_set_margin(p, x, u, j).is_ok_and(|m| m >= 0.0) {
            out.push(j);
        }
    }
}

/// Applies `g_i` without checking the precondition.
pub fn jump_map(p: &MaterialParams, x: &HybridWireState, jump: WireJump) -> Result<HybridWireState> {
    use WireJump::*;
    let x3 = match jump {
        D1 | D7 => 0.0,
        D2 | D5 => 1.0,
        D3 | D4 => x.x3,
        D6 => freeze(p.x_m4(x.eps, x.temp)?)?,
        D8 => freeze(p.x_m5(x.eps, x.temp)?)?,
    };
    Ok(HybridWireState {
        x3,
        mode: jump.target(),
        ..*x
    })
}

fn freeze(x_m: f64) -> Result<f64> {
    if !(-JUMP_TOL..=1.0 + JUMP_TOL).contains(&x_m) {
        return Err(Error::PhaseFractionDomain(x_m));
    }
    Ok(x_m.clamp(0.0, 1.0))
}

/// Applies `g_i` after checking that `(x, u)` lies in `D_i` up to [`JUMP_TOL`].
pub fn apply_jump(
    p: &MaterialParams,
    x: &HybridWireState,
    u: &WireInput,
    jump: WireJump,
) -> Result<HybridWireState> {
    let residual = jump_set_margin(p, x, u, jump)?;
    if residual < -JUMP_TOL {
        return Err(Error::JumpPrecondition {
            jump: jump.to_string(),
            residual,
        });
    }
    jump_map(p, x, jump)
}

/// Axial force of one wire [N].
pub fn output_force(p: &MaterialParams, x: &HybridWireState) -> Result<f64> {
    Ok(p.wire_force(p.stress_unchecked(x.eps, effective_phase_fraction(p, x)?)))
}

/// A wire model usable on its own or inside the coupled robot.
///
/// The continuous state starts with the strain; `temp_index` locates the
/// temperature.
pub trait WireModel: Send + Sync {
    type Discrete: Clone + fmt::Debug + PartialEq + Send + Sync;
    type Jump: Copy + fmt::Debug + PartialEq + JumpPriority + Send + Sync;

    const DIM: usize;
    const TEMP_INDEX: usize;

    fn params(&self) -> &MaterialParams;

    fn phase_fraction(&self, x: &[f64], d: &Self::Discrete) -> Result<f64>;

    fn stress(&self, x: &[f64], d: &Self::Discrete) -> Result<f64> {
        let p = self.params();
        Ok(p.stress_unchecked(x[0], self.phase_fraction(x, d)?))
    }

    fn flow(&self, x: &[f64], d: &Self::Discrete, u: &WireInput, dx: &mut [f64]) -> Result<()>;

    fn flow_margin(&self, _x: &[f64], _d: &Self::Discrete, _u: &WireInput) -> f64 {
        f64::INFINITY
    }

    fn jump_margin(&self, _x: &[f64], _d: &Self::Discrete, _u: &WireInput) -> f64 {
        f64::NEG_INFINITY
    }

    fn enabled_jumps(
        &self,
        _x: &[f64],
        _d: &Self::Discrete,
        _u: &WireInput,
        _out: &mut Vec<Self::Jump>,
    ) {
    }

    fn apply_jump(&self, x: &[f64], d: &mut Self::Discrete, jump: Self::Jump) -> Result<()>;

    fn abs_tol(&self) -> Vec<f64>;

    /// Rebuilds the model for a wire of a different rest length.
    fn with_rest_length(&self, l0: f64) -> Result<Self>
    where
        Self: Sized;

    /// Discrete and continuous state of a wire resting at strain `eps`,
    /// temperature `temp` and phase fraction `x_m` (inner loop when
    /// `0 < x_m < 1`).
    fn rest_state(&self, eps: f64, temp: f64, x_m: f64) -> (Vec<f64>, Self::Discrete);
}

/// The hybrid wire model.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridWire {
    pub params: MaterialParams,
}

impl HybridWire {
    pub fn new(params: MaterialParams) -> Self {
        Self { params }
    }
}

impl WireModel for HybridWire {
    type Discrete = WireDiscrete;
    type Jump = WireJump;

    const DIM: usize = 2;
    const TEMP_INDEX: usize = 1;

    fn params(&self) -> &MaterialParams {
        &self.params
    }

    fn phase_fraction(&self, x: &[f64], d: &WireDiscrete) -> Result<f64> {
        effective_phase_fraction(&self.params, &HybridWireState::from_parts(x, d))
    }

    fn flow(&self, x: &[f64], d: &WireDiscrete, u: &WireInput, dx: &mut [f64]) -> Result<()> {
        let (de, dt) = flow_map(&self.params, &HybridWireState::from_parts(x, d), u)?;
        dx[0] = de;
        dx[1] = dt;
        Ok(())
    }

    fn flow_margin(&self, x: &[f64], d: &WireDiscrete, u: &WireInput) -> f64 {
        flow_margin(&self.params, &HybridWireState::from_parts(x, d), u).unwrap_or(f64::NAN)
    }

    fn jump_margin(&self, x: &[f64], d: &WireDiscrete, u: &WireInput) -> f64 {
        jump_margin(&self.params, &HybridWireState::from_parts(x, d), u).unwrap_or(f64::NAN)
    }

    fn enabled_jumps(&self, x: &[f64], d: &WireDiscrete, u: &WireInput, out: &mut Vec<WireJump>) {
        push_enabled_jumps(&self.params, &HybridWireState::from_parts(x, d), u, out)
    }

    fn apply_jump(&self, x: &[f64], d: &mut WireDiscrete, jump: WireJump) -> Result<()> {
        *d = jump_map(&self.params, &HybridWireState::from_parts(x, d), jump)?.discrete();
        Ok(())
    }

    fn abs_tol(&self) -> Vec<f64> {
        vec![1e-8, 1e-6]
    }

    fn with_rest_length(&self, l0: f64) -> Result<Self> {
        Ok(Self::new(self.params.modified(|c| c.l0 = l0)?))
    }

    fn rest_state(&self, eps: f64, temp: f64, x_m: f64) -> (Vec<f64>, WireDiscrete) {
        let mode = if x_m <= 0.0 {
            Mode::Austenite
        } else if x_m >= 1.0 {
            Mode::Martensite
        } else {
            Mode::InnerLoop
        };
        (
            vec![eps, temp],
            WireDiscrete {
                x3: x_m.clamp(0.0, 1.0),
                mode,
            },
        )
    }
}

/// Prescribed deformation rate and heating for a single wire.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireDrive {
    /// Deformation rate `v` [m/s].
    pub velocity: Signal,
    /// Joule heating [W].
    pub joule: Signal,
    /// Environment temperature [K].
    pub ambient: f64,
}

impl InputSignal for WireDrive {
    type Value = WireInput;

    fn value(&self, t: f64, piece_start: f64) -> WireInput {
        WireInput {
            velocity: self.velocity.on_piece(t, piece_start),
            joule: self.joule.on_piece(t, piece_start).max(0.0),
            ambient: self.ambient,
        }
    }

    fn next_breakpoint(&self, t: f64) -> Option<f64> {
        crate::solver::signal::earliest(self.velocity.next_breakpoint(t), self.joule.next_breakpoint(t))
    }

    fn piecewise_constant(&self) -> bool {
        self.velocity.is_piecewise_constant() && self.joule.is_piecewise_constant()
    }
}

/// One free wire driven by a prescribed deformation rate.
#[derive(Clone, Debug)]
pub struct SingleWire<W> {
    pub wire: W,
}

impl<W: WireModel> HybridSystem for SingleWire<W> {
    type Discrete = W::Discrete;
    type Input = WireInput;
    type Jump = W::Jump;

    fn dim(&self) -> usize {
        W::DIM
    }

    fn flow(&self, x: &[f64], d: &W::Discrete, u: &WireInput, dx: &mut [f64]) -> Result<()> {
        self.wire.flow(x, d, u, dx)
    }

    fn flow_margin(&self, x: &[f64], d: &W::Discrete, u: &WireInput) -> f64 {
        self.wire.flow_margin(x, d, u)
    }

    fn jump_margin(&self, x: &[f64], d: &W::Discrete, u: &WireInput) -> f64 {
        self.wire.jump_margin(x, d, u)
    }

    fn enabled_jumps(&self, x: &[f64], d: &W::Discrete, u: &WireInput, out: &mut Vec<W::Jump>) {
        self.wire.enabled_jumps(x, d, u, out)
    }

    fn apply_jump(&self, x: &mut [f64], d: &mut W::Discrete, jump: W::Jump) -> Result<()> {
        self.wire.apply_jump(x, d, jump)
    }

    fn abs_tol(&self) -> Vec<f64> {
        self.wire.abs_tol()
    }

    fn escaped(&self, x: &[f64], _d: &W::Discrete) -> Option<String> {
        let temp = x[W::TEMP_INDEX];
        if x.iter().any(|v| !v.is_finite()) {
            Some("non-finite wire state".into())
        } else if temp <= 0.0 {
            Some(format!("temperature {temp} K left the physical range"))
        } else {
            None
        }
    }
}
