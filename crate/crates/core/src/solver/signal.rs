//! Input signals with declared breakpoints.
//!
//! The integrator never steps across a breakpoint. Between breakpoints a
//! signal is evaluated on the piece that started at `piece_start`, so that
//! stage evaluations at the right end of a piece see the left limit.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A time-dependent input feeding a hybrid system.
pub trait InputSignal {
    type Value: Clone;

    /// Value at `t` on the piece beginning at `piece_start <= t`.
    fn value(&self, t: f64, piece_start: f64) -> Self::Value;

    /// First breakpoint strictly after `t`, if any.
    fn next_breakpoint(&self, t: f64) -> Option<f64>;

    /// `true` if the signal is constant between breakpoints, which lets the
    /// integrator skip the explicit time derivative of the flow.
    fn piecewise_constant(&self) -> bool {
        false
    }
}

/// One level of a step sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub level: f64,
    pub duration: f64,
}

/// Scalar signal shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum Signal {
    Constant {
        value: f64,
    },
    /// Piecewise-constant levels; the last level is held after the sequence ends.
    Steps {
        steps: Vec<Step>,
    },
    /// `offset + amplitude * sin(2π frequency t)`. Zero crossings are
    /// reported as breakpoints so sign-split consumers see them.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl Signal {
    pub fn constant(value: f64) -> Self {
        Signal::Constant { value }
    }

    pub fn steps(steps: Vec<Step>) -> Result<Self> {
        let s = Signal::Steps { steps };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Signal::Constant { value } if !value.is_finite() => {
                Err(Error::Config("constant signal must be finite".into()))
            }
            Signal::Steps { steps } => {
                if steps.is_empty() {
                    return Err(Error::Config("step signal needs at least one step".into()));
                }
                for (i, s) in steps.iter().enumerate() {
                    if !(s.duration > 0.0) || !s.duration.is_finite() {
                        return Err(Error::Config(format!(
                            "steps[{i}].duration must be > 0 (got {})",
                            s.duration
                        )));
                    }
                    if !s.level.is_finite() {
                        return Err(Error::Config(format!("steps[{i}].level must be finite")));
                    }
                }
                Ok(())
            }
            Signal::Sinusoid {
                amplitude,
                frequency,
                offset,
            } => {
                if !(*frequency > 0.0) || !frequency.is_finite() {
                    return Err(Error::Config(format!(
                        "sinusoid frequency must be > 0 (got {frequency})"
                    )));
                }
                if !amplitude.is_finite() || !offset.is_finite() {
                    return Err(Error::Config("sinusoid parameters must be finite".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_piecewise_constant(&self) -> bool {
        !matches!(self, Signal::Sinusoid { .. })
    }

    /// Right-continuous evaluation.
    pub fn at(&self, t: f64) -> f64 {
        self.on_piece(t, t)
    }

    pub fn on_piece(&self, t: f64, piece_start: f64) -> f64 {
        match self {
            Signal::Constant { value } => *value,
            Signal::Steps { steps } => {
                let mut start = 0.0;
                for s in steps {
                    let end = start + s.duration;
                    if piece_start < end {
                        return s.level;
                    }
                    start = end;
                }
                steps.last().map_or(0.0, |s| s.level)
            }
            Signal::Sinusoid {
                amplitude,
                frequency,
                offset,
            } => offset + amplitude * (2.0 * PI * frequency * t).sin(),
        }
    }

    pub fn next_breakpoint(&self, t: f64) -> Option<f64> {
        match self {
            Signal::Constant { .. } => None,
            Signal::Steps { steps } => {
                let mut end = 0.0;
                for s in steps {
                    end += s.duration;
                    if end > t {
                        return Some(end);
                    }
                }
                None
            }
            Signal::Sinusoid {
                amplitude,
                frequency,
                offset,
            } => {
                if *amplitude == 0.0 || offset.abs() >= amplitude.abs() {
                    return None;
                }
                let w = 2.0 * PI * frequency;
                let base = (-offset / amplitude).asin();
                let period = 1.0 / frequency;
                let k0 = (t / period).floor() - 1.0;
                let mut best: Option<f64> = None;
                for k in 0..4 {
                    let shift = 2.0 * PI * (k0 + k as f64);
                    for phase in [base, PI - base] {
                        let tc = (phase + shift) / w;
                        if tc > t && best.is_none_or(|b| tc < b) {
                            best = Some(tc);
                        }
                    }
                }
                best
            }
        }
    }

    /// Total duration of a step sequence.
    pub fn duration(&self) -> Option<f64> {
        match self {
            Signal::Steps { steps } => Some(steps.iter().map(|s| s.duration).sum()),
            _ => None,
        }
    }
}

impl InputSignal for Signal {
    type Value = f64;

    fn value(&self, t: f64, piece_start: f64) -> f64 {
        self.on_piece(t, piece_start)
    }

    fn next_breakpoint(&self, t: f64) -> Option<f64> {
        Signal::next_breakpoint(self, t)
    }

    fn piecewise_constant(&self) -> bool {
        self.is_piecewise_constant()
    }
}

/// Earliest of two optional breakpoints.
pub fn earliest(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_left_limit_at_breakpoint() {
        let s = Signal::steps(vec![
            Step { level: 1.0, duration: 2.0 },
            Step { level: -3.0, duration: 1.0 },
        ])
        .unwrap();
        assert_eq!(s.at(0.0), 1.0);
        assert_eq!(s.at(2.0), -3.0);
        assert_eq!(s.on_piece(2.0, 0.5), 1.0);
        assert_eq!(s.at(10.0), -3.0);
        assert_eq!(s.next_breakpoint(0.0), Some(2.0));
        assert_eq!(s.next_breakpoint(2.0), Some(3.0));
        assert_eq!(s.next_breakpoint(3.0), None);
    }

    #[test]
    fn sinusoid_breakpoints_are_zero_crossings() {
        let s = Signal::Sinusoid {
            amplitude: 2.0,
            frequency: 1e-3,
            offset: 0.5,
        };
        let mut t = 0.0;
        for _ in 0..6 {
            let b = s.next_breakpoint(t).unwrap();
            assert!(b > t);
            assert!(s.at(b).abs() < 1e-9, "value at crossing {}", s.at(b));
            t = b;
        }
        let flat = Signal::Sinusoid {
            amplitude: 1.0,
            frequency: 1.0,
            offset: 2.0,
        };
        assert_eq!(flat.next_breakpoint(0.0), None);
    }

    #[test]
    fn invalid_signals_rejected() {
        assert!(Signal::steps(vec![]).is_err());
        assert!(Signal::steps(vec![Step { level: 1.0, duration: 0.0 }]).is_err());
        let s = Signal::Sinusoid {
            amplitude: 1.0,
            frequency: 0.0,
            offset: 0.0,
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn serde_shape() {
        let s: Signal = serde_json::from_str(
            r#"{"type":"sinusoid","amplitude":2.0,"frequency":0.001}"#,
        )
        .unwrap();
        assert_eq!(
            s,
            Signal::Sinusoid {
                amplitude: 2.0,
                frequency: 0.001,
                offset: 0.0
            }
        );
    }
}
