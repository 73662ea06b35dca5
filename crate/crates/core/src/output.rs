//! Tidy trajectory tables and their CSV / JSON-lines encodings.
//!
//! Column names carry SI units. Every file starts with the run manifest:
//! a `#`-prefixed comment line in CSV, a `{"manifest": …}` object in
//! JSON-lines.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Result;
use crate::mas::{BarrierModel, MasWire};
use crate::solver::Trajectory;
use crate::structure::{BundleJump, CoupledInput, CoupledSystem};
use crate::material::WireInput;
use crate::wire::{HybridWire, WireDiscrete, WireModel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<impl Iterator<Item = f64> + '_> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(move |r| r[k]))
    }

    pub fn write(&self, format: Format, manifest: &Value, mut w: impl Write) -> Result<()> {
        match format {
            Format::Csv => {
                writeln!(w, "# {}", serde_json::to_string(manifest)?)?;
                let mut wtr = csv::Writer::from_writer(w);
                wtr.write_record(&self.columns)?;
                for row in &self.rows {
                    wtr.write_record(row.iter().map(|v| format!("{v:e}")))?;
                }
                wtr.flush()?;
            }
            Format::Jsonl => {
                let mut head = Map::new();
                head.insert("manifest".into(), manifest.clone());
                writeln!(w, "{}", Value::Object(head))?;
                for row in &self.rows {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.clone(), Value::from(*v)))
                        .collect();
                    writeln!(w, "{}", Value::Object(obj))?;
                }
            }
        }
        Ok(())
    }
}

/// Per-wire columns of a trajectory table.
pub trait WireColumns: WireModel {
    fn columns() -> Vec<&'static str>;

    fn row(&self, x: &[f64], d: &Self::Discrete) -> Result<Vec<f64>>;
}

impl WireColumns for HybridWire {
    fn columns() -> Vec<&'static str> {
        vec!["q", "eps", "T_K", "x3", "x_M", "sigma_Pa", "f_N"]
    }

    fn row(&self, x: &[f64], d: &WireDiscrete) -> Result<Vec<f64>> {
        let x_m = self.phase_fraction(x, d)?;
        let sigma = self.stress(x, d)?;
        Ok(vec![
            f64::from(d.mode.index()),
            x[0],
            x[1],
            d.x3,
            x_m,
            sigma,
            self.params.wire_force(sigma),
        ])
    }
}

impl<B: BarrierModel + Clone> WireColumns for MasWire<B> {
    fn columns() -> Vec<&'static str> {
        vec!["eps", "T_K", "x_M", "sigma_Pa", "f_N"]
    }

    fn row(&self, x: &[f64], d: &()) -> Result<Vec<f64>> {
        let sigma = self.stress(x, d)?;
        Ok(vec![x[0], x[2], x[1], sigma, self.params.wire_force(sigma)])
    }
}

/// One row per sample of a single-wire run.
pub fn wire_table<W: WireColumns>(
    wire: &W,
    traj: &Trajectory<W::Discrete, WireInput, W::Jump>,
) -> Result<Table> {
    let mut columns = vec!["t_s".to_string(), "j".to_string()];
    columns.extend(W::columns().iter().map(|c| c.to_string()));
    columns.extend(["v_m_per_s", "J_W", "T_E_K"].map(String::from));
    let mut table = Table::new(columns);
    for s in &traj.samples {
        let mut row = vec![s.time.t, s.time.j as f64];
        row.extend(wire.row(&s.x, &s.discrete)?);
        row.extend([s.input.velocity, s.input.joule, s.input.ambient]);
        table.rows.push(row);
    }
    Ok(table)
}

/// One row per sample of a coupled run.
pub fn coupled_table<W: WireColumns>(
    sys: &CoupledSystem<W>,
    traj: &Trajectory<[W::Discrete; 2], CoupledInput, BundleJump<W::Jump>>,
) -> Result<Table> {
    let mut columns: Vec<String> = [
        "t_s", "j", "J_eq_W", "U_x_m", "U_y_m", "alpha_rad", "l1_m", "l2_m", "f1_N", "f2_N",
    ]
    .map(String::from)
    .to_vec();
    for bundle in 1..=2 {
        columns.extend(W::columns().iter().map(|c| format!("{c}_{bundle}")));
    }
    let mut table = Table::new(columns);
    for s in &traj.samples {
        let out = sys.outputs(&s.x, &s.discrete)?;
        let mut row = vec![
            s.time.t,
            s.time.j as f64,
            s.input.j_eq,
            s.x[0],
            s.x[1],
            s.x[2],
            out.lengths[0],
            out.lengths[1],
            out.forces[0],
            out.forces[1],
        ];
        for b in 0..2 {
            row.extend(sys.wires[b].row(sys.wire_state(&s.x, b), &s.discrete[b])?);
        }
        table.rows.push(row);
    }
    Ok(table)
}

/// Audit trail of the jumps of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JumpRow {
    pub t_s: f64,
    pub j: u64,
    pub bundle: Option<usize>,
    pub jump: String,
    pub from: u8,
    pub to: u8,
}

pub fn hybrid_jump_rows(
    traj: &Trajectory<WireDiscrete, WireInput, crate::wire::WireJump>,
) -> Vec<JumpRow> {
    traj.jumps
        .iter()
        .map(|r| JumpRow {
            t_s: r.time.t,
            j: r.time.j,
            bundle: None,
            jump: r.jump.to_string(),
            from: r.before.mode.index(),
            to: r.after.mode.index(),
        })
        .collect()
}

pub fn coupled_jump_rows(
    traj: &Trajectory<[WireDiscrete; 2], CoupledInput, BundleJump<crate::wire::WireJump>>,
) -> Vec<JumpRow> {
    traj.jumps
        .iter()
        .map(|r| {
            let b = r.jump.bundle;
            JumpRow {
                t_s: r.time.t,
                j: r.time.j,
                bundle: Some(b + 1),
                jump: r.jump.jump.to_string(),
                from: r.before[b].mode.index(),
                to: r.after[b].mode.index(),
            }
        })
        .collect()
}

pub fn write_jump_rows(rows: &[JumpRow], manifest: &Value, mut w: impl Write) -> Result<()> {
    writeln!(w, "# {}", serde_json::to_string(manifest)?)?;
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}
