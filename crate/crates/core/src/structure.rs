//! Planar flexible robot module: a cantilevered Euler-Bernoulli beam with a
//! rigid top plate, actuated by two antagonistic SMA bundles.
//!
//! Generalized coordinates are `q = (U_x, U_y, alpha)`; bundle `i` pulls on
//! the plate edge at `∓W/2`. Positive `J_eq` heats bundle 1, which bends
//! the tip towards positive `alpha`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::WireInput;
use crate::solver::{HybridSystem, InputSignal, JumpPriority, Signal};
use crate::wire::WireModel;

/// Wire lengths below this are treated as degenerate [m].
pub const MIN_WIRE_LENGTH: f64 = 1e-9;

/// Inclination beyond which the small-deformation assumption is doubtful [rad].
pub const ALPHA_WARNING: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamParams {
    /// Plate width `W` [m].
    pub width: f64,
    /// Beam length `L` [m].
    pub length: f64,
    /// Beam Young's modulus [Pa].
    pub youngs_modulus: f64,
    /// Beam cross-section radius `h` [m].
    pub radius: f64,
    /// Plate mass [kg].
    pub plate_mass: f64,
    /// Plate moment of inertia; `W²·m_H/12` when absent [kg m²].
    pub plate_inertia: Option<f64>,
    /// [N s/m]
    pub b_x: f64,
    /// [N s/m]
    pub b_y: f64,
    /// [N m s/rad]
    pub b_alpha: f64,
    /// Wires per bundle.
    pub wires_per_bundle: u32,
}

impl Default for BeamParams {
    fn default() -> Self {
        Self {
            width: 10e-3,
            length: 100e-3,
            youngs_modulus: 2e9,
            radius: 2.5e-3,
            plate_mass: 10e-3,
            plate_inertia: None,
            b_x: 2.0,
            b_y: 2.0,
            b_alpha: 2.0,
            wires_per_bundle: 10,
        }
    }
}

impl BeamParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("width", self.width),
            ("length", self.length),
            ("youngs_modulus", self.youngs_modulus),
            ("radius", self.radius),
            ("plate_mass", self.plate_mass),
            ("plate_inertia", self.inertia()),
            ("b_x", self.b_x),
            ("b_y", self.b_y),
            ("b_alpha", self.b_alpha),
        ];
        for (name, v) in checks {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if self.wires_per_bundle == 0 {
            return Err(Error::InvalidParameter {
                name: "wires_per_bundle",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius.powi(2)
    }

    pub fn second_moment(&self) -> f64 {
        std::f64::consts::PI * self.radius.powi(4) / 4.0
    }

    pub fn inertia(&self) -> f64 {
        self.plate_inertia
            .unwrap_or(self.width * self.width * self.plate_mass / 12.0)
    }

    pub fn n(&self) -> f64 {
        f64::from(self.wires_per_bundle)
    }

    /// Tip stiffness matrix in `(U_x, U_y, alpha)`.
    pub fn stiffness(&self) -> [[f64; 3]; 3] {
        let ei = self.youngs_modulus * self.second_moment();
        let l = self.length;
        [
            [self.youngs_modulus * self.area() / l, 0.0, 0.0],
            [0.0, 12.0 * ei / l.powi(3), -6.0 * ei / l.powi(2)],
            [0.0, -6.0 * ei / l.powi(2), 4.0 * ei / l],
        ]
    }
}

/// Lengths of the two bundles at configuration `q`.
pub fn wire_lengths(bp: &BeamParams, q: &[f64; 3]) -> [f64; 2] {
    let [ux, uy, a] = *q;
    let hw = 0.5 * bp.width;
    let (s, c) = a.sin_cos();
    [
        (uy - hw * (1.0 - c)).hypot(bp.length + ux - hw * s),
        (uy + hw * (1.0 - c)).hypot(bp.length + ux + hw * s),
    ]
}

/// `∂l/∂q`; row `i` belongs to bundle `i`.
pub fn jacobian(bp: &BeamParams, q: &[f64; 3]) -> Result<[[f64; 3]; 2]> {
    let [ux, uy, a] = *q;
    let hw = 0.5 * bp.width;
    let (s, c) = a.sin_cos();
    let mut rows = [[0.0; 3]; 2];
    for (i, sign) in [(0, -1.0), (1, 1.0)] {
        let dy = uy + sign * hw * (1.0 - c);
        let dx = bp.length + ux + sign * hw * s;
        let l = dy.hypot(dx);
        if l < MIN_WIRE_LENGTH {
            return Err(Error::DegenerateLength(l));
        }
        rows[i] = [dx / l, dy / l, sign * hw * (dy * s + dx * c) / l];
    }
    Ok(rows)
}

/// Bundle velocities and generalized forces exchanged through the
/// interconnection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PortExchange {
    pub velocity: [f64; 2],
    pub tau: [f64; 3],
}

/// `v = J q̇` and `τ = -Jᵀ f` with bundle forces `f`.
pub fn interconnect(
    bp: &BeamParams,
    q: &[f64; 3],
    q_dot: &[f64; 3],
    forces: [f64; 2],
) -> Result<PortExchange> {
    let jac = jacobian(bp, q)?;
    Ok(interconnect_with(&jac, q_dot, forces))
}

fn interconnect_with(jac: &[[f64; 3]; 2], q_dot: &[f64; 3], forces: [f64; 2]) -> PortExchange {
    let velocity = [0, 1].map(|i| (0..3).map(|k| jac[i][k] * q_dot[k]).sum());
    let tau = [0, 1, 2].map(|k| -(jac[0][k] * forces[0] + jac[1][k] * forces[1]));
    PortExchange { velocity, tau }
}

/// Tip accelerations `q̈`.
pub fn beam_rhs(bp: &BeamParams, q: &[f64; 3], q_dot: &[f64; 3], tau: &[f64; 3]) -> [f64; 3] {
    let k = bp.stiffness();
    let damping = [bp.b_x, bp.b_y, bp.b_alpha];
    let mass = [bp.plate_mass, bp.plate_mass, bp.inertia()];
    [0, 1, 2].map(|i| {
        let elastic: f64 = (0..3).map(|j| k[i][j] * q[j]).sum();
        (tau[i] - elastic - damping[i] * q_dot[i]) / mass[i]
    })
}

/// Bundle heating powers `(J_1, J_2)` from the signed virtual command.
pub fn split_jeq(j_eq: f64) -> (f64, f64) {
    if j_eq > 0.0 {
        (j_eq, 0.0)
    } else if j_eq < 0.0 {
        (0.0, -j_eq)
    } else {
        (0.0, 0.0)
    }
}

/// Idle state of both bundles.
///
/// Both bundles start at the same temperature, phase fraction and stress;
/// by default they sit in the middle of an inner hysteresis loop at the
/// Maxwell stress of the environment temperature, so that heating either
/// bundle triggers the reverse transformation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Pretension {
    /// Initial martensite fraction of both bundles.
    pub phase_fraction: f64,
    /// Initial wire stress [Pa]; the Maxwell stress at the ambient
    /// temperature when absent.
    pub stress: Option<f64>,
}

impl Default for Pretension {
    fn default() -> Self {
        Self {
            phase_fraction: 0.5,
            stress: None,
        }
    }
}

/// Signed command and environment temperature of the coupled robot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoupledInput {
    pub j_eq: f64,
    pub ambient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledDrive {
    pub j_eq: Signal,
    pub ambient: f64,
}

impl InputSignal for CoupledDrive {
    type Value = CoupledInput;

    fn value(&self, t: f64, piece_start: f64) -> CoupledInput {
        CoupledInput {
            j_eq: self.j_eq.on_piece(t, piece_start),
            ambient: self.ambient,
        }
    }

    fn next_breakpoint(&self, t: f64) -> Option<f64> {
        self.j_eq.next_breakpoint(t)
    }

    fn piecewise_constant(&self) -> bool {
        self.j_eq.is_piecewise_constant()
    }
}

/// A jump of one bundle's wire model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BundleJump<J> {
    pub bundle: usize,
    pub jump: J,
}

impl<J: JumpPriority> JumpPriority for BundleJump<J> {
    fn priority(&self) -> u32 {
        self.jump.priority() * 2 + self.bundle as u32
    }

    fn is_completion(&self) -> bool {
        self.jump.is_completion()
    }
}

/// Offsets into the coupled continuous state.
pub const Q: usize = 0;
pub const Q_DOT: usize = 3;
pub const WIRES: usize = 6;

/// Beam and two bundles as one hybrid system.
///
/// State layout: `[U_x, U_y, alpha, U̇_x, U̇_y, alphȧ, wire 1…, wire 2…]`.
#[derive(Clone, Debug)]
pub struct CoupledSystem<W> {
    pub beam: BeamParams,
    pub wires: [W; 2],
}

/// Coupled system together with its idle initial state.
#[derive(Clone, Debug)]
pub struct CoupledSetup<W: WireModel> {
    pub system: CoupledSystem<W>,
    pub x0: Vec<f64>,
    pub d0: [W::Discrete; 2],
}

impl<W: WireModel + Clone> CoupledSystem<W> {
    /// Builds the coupled system in static equilibrium at `ambient`.
    ///
    /// Both bundles carry the pretension stress `σ*`, so the beam is
    /// compressed by `2 n π r0² σ*` and bent nowhere. Each bundle's rest
    /// length is chosen so that its strain at that length matches `σ*` at
    /// the pretension phase fraction.
    pub fn at_rest(
        beam: BeamParams,
        wire: &W,
        pretension: &Pretension,
        ambient: f64,
    ) -> Result<CoupledSetup<W>> {
        beam.validate()?;
        let x_m = pretension.phase_fraction;
        if !(0.0..=1.0).contains(&x_m) {
            return Err(Error::PhaseFractionDomain(x_m));
        }
        let p = wire.params();
        let sigma = pretension.stress.unwrap_or_else(|| p.sigma_mw(ambient));
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "pretension.stress",
                reason: format!("must be >= 0, got {sigma}"),
            });
        }
        let bundle_force = beam.n() * p.wire_force(sigma);
        let ux = -2.0 * bundle_force * beam.length / (beam.youngs_modulus * beam.area());
        let q = [ux, 0.0, 0.0];
        let [l1, _] = wire_lengths(&beam, &q);
        let eps = p.strain_at(sigma, x_m);
        let rest_length = l1 / (1.0 + eps);
        let bundle = wire.with_rest_length(rest_length)?;
        let (w, d) = bundle.rest_state(eps, ambient, x_m);
        let mut x0 = vec![0.0; WIRES + 2 * W::DIM];
        x0[Q] = ux;
        x0[WIRES..WIRES + W::DIM].copy_from_slice(&w);
        x0[WIRES + W::DIM..].copy_from_slice(&w);
        Ok(CoupledSetup {
            system: CoupledSystem {
                beam,
                wires: [bundle.clone(), bundle],
            },
            x0,
            d0: [d.clone(), d],
        })
    }
}

/// Instantaneous port quantities of the coupled system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledOutputs {
    pub lengths: [f64; 2],
    /// Bundle forces (single-wire force × n) [N].
    pub forces: [f64; 2],
    pub exchange: PortExchange,
}

impl<W: WireModel> CoupledSystem<W> {
    pub fn wire_state<'a>(&self, x: &'a [f64], bundle: usize) -> &'a [f64] {
        let start = WIRES + bundle * W::DIM;
        &x[start..start + W::DIM]
    }

    fn q(x: &[f64]) -> ([f64; 3], [f64; 3]) {
        ([x[0], x[1], x[2]], [x[3], x[4], x[5]])
    }

    pub fn outputs(&self, x: &[f64], d: &[W::Discrete; 2]) -> Result<CoupledOutputs> {
        let (q, q_dot) = Self::q(x);
        let n = self.beam.n();
        let mut forces = [0.0; 2];
        for (i, f) in forces.iter_mut().enumerate() {
            let sigma = self.wires[i].stress(self.wire_state(x, i), &d[i])?;
            *f = n * self.wires[i].params().wire_force(sigma);
        }
        Ok(CoupledOutputs {
            lengths: wire_lengths(&self.beam, &q),
            forces,
            exchange: interconnect(&self.beam, &q, &q_dot, forces)?,
        })
    }

    /// Inputs seen by the two bundles: end velocities and per-wire heating.
    pub fn wire_inputs(&self, x: &[f64], u: &CoupledInput) -> Result<[WireInput; 2]> {
        let (q, q_dot) = Self::q(x);
        let jac = jacobian(&self.beam, &q)?;
        let ex = interconnect_with(&jac, &q_dot, [0.0; 2]);
        let (j1, j2) = split_jeq(u.j_eq);
        let n = self.beam.n();
        Ok([
            WireInput {
                velocity: ex.velocity[0],
                joule: j1 / n,
                ambient: u.ambient,
            },
            WireInput {
                velocity: ex.velocity[1],
                joule: j2 / n,
                ambient: u.ambient,
            },
        ])
    }
}

impl<W: WireModel> HybridSystem for CoupledSystem<W> {
    type Discrete = [W::Discrete; 2];
    type Input = CoupledInput;
    type Jump = BundleJump<W::Jump>;

    fn dim(&self) -> usize {
        WIRES + 2 * W::DIM
    }

    fn flow(&self, x: &[f64], d: &Self::Discrete, u: &CoupledInput, dx: &mut [f64]) -> Result<()> {
        let (q, q_dot) = Self::q(x);
        let jac = jacobian(&self.beam, &q)?;
        let n = self.beam.n();
        let mut forces = [0.0; 2];
        for (i, f) in forces.iter_mut().enumerate() {
            let sigma = self.wires[i].stress(self.wire_state(x, i), &d[i])?;
            *f = n * self.wires[i].params().wire_force(sigma);
        }
        let ex = interconnect_with(&jac, &q_dot, forces);
        let acc = beam_rhs(&self.beam, &q, &q_dot, &ex.tau);
        dx[..3].copy_from_slice(&q_dot);
        dx[3..6].copy_from_slice(&acc);
        let (j1, j2) = split_jeq(u.j_eq);
        for (i, joule) in [(0, j1), (1, j2)] {
            let wu = WireInput {
                velocity: ex.velocity[i],
                joule: joule / n,
                ambient: u.ambient,
            };
            let start = WIRES + i * W::DIM;
            self.wires[i].flow(
                &x[start..start + W::DIM],
                &d[i],
                &wu,
                &mut dx[start..start + W::DIM],
            )?;
        }
        Ok(())
    }

    fn flow_margin(&self, x: &[f64], d: &Self::Discrete, u: &CoupledInput) -> f64 {
        match self.wire_inputs(x, u) {
            Ok(wu) => (0..2)
                .map(|i| self.wires[i].flow_margin(self.wire_state(x, i), &d[i], &wu[i]))
                .fold(f64::INFINITY, f64::min),
            Err(_) => f64::NAN,
        }
    }

    fn jump_margin(&self, x: &[f64], d: &Self::Discrete, u: &CoupledInput) -> f64 {
        match self.wire_inputs(x, u) {
            Ok(wu) => (0..2)
                .map(|i| self.wires[i].jump_margin(self.wire_state(x, i), &d[i], &wu[i]))
                .fold(f64::NEG_INFINITY, f64::max),
            Err(_) => f64::NAN,
        }
    }

    fn enabled_jumps(
        &self,
        x: &[f64],
        d: &Self::Discrete,
        u: &CoupledInput,
        out: &mut Vec<Self::Jump>,
    ) {
        let Ok(wu) = self.wire_inputs(x, u) else {
            return;
        };
        let mut local = Vec::new();
        for bundle in 0..2 {
            local.clear();
            self.wires[bundle].enabled_jumps(self.wire_state(x, bundle), &d[bundle], &wu[bundle], &mut local);
            out.extend(local.iter().map(|&jump| BundleJump { bundle, jump }));
        }
    }

    fn apply_jump(&self, x: &mut [f64], d: &mut Self::Discrete, jump: Self::Jump) -> Result<()> {
        let b = jump.bundle;
        let start = WIRES + b * W::DIM;
        self.wires[b].apply_jump(&x[start..start + W::DIM], &mut d[b], jump.jump)
    }

    fn abs_tol(&self) -> Vec<f64> {
        let mut tol = vec![1e-10, 1e-10, 1e-9, 1e-8, 1e-8, 1e-7];
        for w in &self.wires {
            tol.extend(w.abs_tol());
        }
        tol
    }

    fn escaped(&self, x: &[f64], _d: &Self::Discrete) -> Option<String> {
        if x.iter().any(|v| !v.is_finite()) {
            return Some("non-finite state".into());
        }
        for i in 0..2 {
            let temp = self.wire_state(x, i)[W::TEMP_INDEX];
            if temp <= 0.0 {
                return Some(format!("bundle {} temperature {temp} K", i + 1));
            }
        }
        None
    }
}
