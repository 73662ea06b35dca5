//! Fourth-order L-stable Rosenbrock scheme (Rodas4, Hairer–Wanner
//! coefficients) with an embedded third-order error estimate.
//!
//! The Jacobian is approximated by forward differences and held fixed for
//! all trial step sizes taken from the same base point, which the event
//! locator exploits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const GAMMA: f64 = 0.25;
const C2: f64 = 0.386;
const C3: f64 = 0.21;
const C4: f64 = 0.63;
const D1: f64 = 0.25;
const D2: f64 = -0.1043;
const D3: f64 = 0.1035;
const D4: f64 = -0.362_000_000_000_002_3e-1;
const A21: f64 = 1.544;
const A31: f64 = 0.946_678_528_081_582_6;
const A32: f64 = 0.255_701_169_898_328_4;
const A41: f64 = 3.314_825_187_068_521;
const A42: f64 = 2.896_124_015_972_201;
const A43: f64 = 0.998_641_913_997_781_7;
const A51: f64 = 1.221_224_509_226_641;
const A52: f64 = 6.019_134_481_288_629;
const A53: f64 = 12.537_083_329_320_87;
const A54: f64 = -0.687_886_036_105_895;
const C21: f64 = -5.6688;
const C31: f64 = -2.430_093_356_833_875;
const C32: f64 = -0.206_359_915_709_191_5;
const C41: f64 = -0.107_352_905_815_137_5;
const C42: f64 = -9.594_562_251_023_355;
const C43: f64 = -20.470_286_148_096_16;
const C51: f64 = 7.496_443_313_967_647;
const C52: f64 = -10.246_804_314_643_52;
const C53: f64 = -33.999_903_528_199_05;
const C54: f64 = 11.708_908_932_061_6;
const C61: f64 = 8.083_246_795_921_522;
const C62: f64 = -7.981_132_988_064_893;
const C63: f64 = -31.521_594_328_743_71;
const C64: f64 = 16.319_305_431_231_36;
const C65: f64 = -6.058_818_238_834_054;

/// Right-hand side `f(t, y) -> dy`.
pub(crate) type Rhs<'a> = dyn FnMut(f64, &[f64], &mut [f64]) -> Result<()> + 'a;

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Counters {
    pub rhs: u64,
    pub jac: u64,
    pub lu: u64,
}

pub(crate) struct Rodas {
    n: usize,
    jac: DMatrix<f64>,
    dfdt: Vec<f64>,
    autonomous: bool,
    k: [DVector<f64>; 6],
    y_stage: Vec<f64>,
    f_stage: Vec<f64>,
    pub counters: Counters,
}

impl Rodas {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            jac: DMatrix::zeros(n, n),
            dfdt: vec![0.0; n],
            autonomous: true,
            k: std::array::from_fn(|_| DVector::zeros(n)),
            y_stage: vec![0.0; n],
            f_stage: vec![0.0; n],
            counters: Counters::default(),
        }
    }

    /// Forward-difference Jacobian at `(t, y)`; `scale[i]` is the smallest
    /// magnitude considered significant for component `i`.
    ///
    /// With `autonomous == false`, also approximates `∂f/∂t`, stepping
    /// backwards in time if `t + δ` would pass `t_limit`.
    pub fn prepare(
        &mut self,
        f: &mut Rhs<'_>,
        t: f64,
        y: &[f64],
        f0: &[f64],
        scale: &[f64],
        autonomous: bool,
        t_limit: f64,
    ) -> Result<()> {
        let sqrt_eps = f64::EPSILON.sqrt();
        self.y_stage.copy_from_slice(y);
        for i in 0..self.n {
            let delta = sqrt_eps * y[i].abs().max(scale[i]).max(1e-300);
            let saved = self.y_stage[i];
            self.y_stage[i] = saved + delta;
            let delta = self.y_stage[i] - saved;
            f(t, &self.y_stage, &mut self.f_stage)?;
            self.counters.rhs += 1;
            self.y_stage[i] = saved;
            for r in 0..self.n {
                self.jac[(r, i)] = (self.f_stage[r] - f0[r]) / delta;
            }
        }
        self.counters.jac += 1;
        self.autonomous = autonomous;
        if !autonomous {
            let mut dt = sqrt_eps * t.abs().max(1.0);
            if t + dt > t_limit {
                dt = -dt;
            }
            f(t + dt, y, &mut self.f_stage)?;
            self.counters.rhs += 1;
            for r in 0..self.n {
                self.dfdt[r] = (self.f_stage[r] - f0[r]) / dt;
            }
        } else {
            self.dfdt.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(())
    }

    /// One step of size `h` from `(t, y)` using the Jacobian from the last
    /// [`Rodas::prepare`]. Writes the fourth-order solution to `y_out` and
    /// the embedded error estimate to `err`.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        f: &mut Rhs<'_>,
        t: f64,
        y: &[f64],
        f0: &[f64],
        h: f64,
        y_out: &mut [f64],
        err: &mut [f64],
    ) -> Result<()> {
        let n = self.n;
        let fac = 1.0 / (h * GAMMA);
        let mut e = -self.jac.clone();
        for i in 0..n {
            e[(i, i)] += fac;
        }
        let lu = e.lu();
        self.counters.lu += 1;
        if !lu.is_invertible() {
            return Err(Error::Singular {
                what: "Rosenbrock iteration matrix",
                value: 0.0,
            });
        }
        let auto = self.autonomous;
        let dfdt = &self.dfdt;
        let d_term = |d: f64, i: usize| if auto { 0.0 } else { h * d * dfdt[i] };

        // stage 1
        let mut rhs = DVector::from_fn(n, |i, _| f0[i] + d_term(D1, i));
        lu.solve_mut(&mut rhs);
        self.k[0] = rhs;

        // stage 2
        for i in 0..n {
            self.y_stage[i] = y[i] + A21 * self.k[0][i];
        }
        f(t + C2 * h, &self.y_stage, &mut self.f_stage)?;
        let mut rhs =
            DVector::from_fn(n, |i, _| self.f_stage[i] + C21 / h * self.k[0][i] + d_term(D2, i));
        lu.solve_mut(&mut rhs);
        self.k[1] = rhs;

        // stage 3
        for i in 0..n {
            self.y_stage[i] = y[i] + A31 * self.k[0][i] + A32 * self.k[1][i];
        }
        f(t + C3 * h, &self.y_stage, &mut self.f_stage)?;
        let mut rhs = DVector::from_fn(n, |i, _| {
            self.f_stage[i] + (C31 * self.k[0][i] + C32 * self.k[1][i]) / h + d_term(D3, i)
        });
        lu.solve_mut(&mut rhs);
        self.k[2] = rhs;

        // stage 4
        for i in 0..n {
            self.y_stage[i] =
                y[i] + A41 * self.k[0][i] + A42 * self.k[1][i] + A43 * self.k[2][i];
        }
        f(t + C4 * h, &self.y_stage, &mut self.f_stage)?;
        let mut rhs = DVector::from_fn(n, |i, _| {
            self.f_stage[i]
                + (C41 * self.k[0][i] + C42 * self.k[1][i] + C43 * self.k[2][i]) / h
                + d_term(D4, i)
        });
        lu.solve_mut(&mut rhs);
        self.k[3] = rhs;

        // stage 5
        for i in 0..n {
            self.y_stage[i] = y[i]
                + A51 * self.k[0][i]
                + A52 * self.k[1][i]
                + A53 * self.k[2][i]
                + A54 * self.k[3][i];
        }
        f(t + h, &self.y_stage, &mut self.f_stage)?;
        let mut rhs = DVector::from_fn(n, |i, _| {
            self.f_stage[i]
                + (C51 * self.k[0][i] + C52 * self.k[1][i] + C53 * self.k[2][i] + C54 * self.k[3][i])
                    / h
        });
        lu.solve_mut(&mut rhs);
        self.k[4] = rhs;

        // stage 6 (embedded)
        for i in 0..n {
            self.y_stage[i] += self.k[4][i];
        }
        f(t + h, &self.y_stage, &mut self.f_stage)?;
        let mut rhs = DVector::from_fn(n, |i, _| {
            self.f_stage[i]
                + (C61 * self.k[0][i]
                    + C62 * self.k[1][i]
                    + C63 * self.k[2][i]
                    + C64 * self.k[3][i]
                    + C65 * self.k[4][i])
                    / h
        });
        lu.solve_mut(&mut rhs);
        self.k[5] = rhs;
        self.counters.rhs += 5;

        for i in 0..n {
            y_out[i] = self.y_stage[i] + self.k[5][i];
            err[i] = self.k[5][i];
        }
        if y_out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular {
                what: "Rosenbrock step (non-finite state)",
                value: f64::NAN,
            });
        }
        Ok(())
    }
}
