//! Adhesive and brittle energies, dissipation distance and power.

mod forcing;

pub use forcing::{
    density_of, disc_row_center, disc_row_remaining, mickey_area, mickey_shape, DensityMode,
    Forcing, ForcingKind,
};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{perimeter_estimate, volume, BinaryField, PerimeterScheme};

/// Adhesive penalty with parameter `k`, or the brittle inclusion constraint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Mode {
    Adhesive { k: f64 },
    Brittle,
}

impl Mode {
    pub fn validate(&self) -> Result<()> {
        match self {
            Mode::Adhesive { k } if !(*k > 0.0 && k.is_finite()) => {
                Err(Error::param("k", "must be finite and positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_brittle(&self) -> bool {
        matches!(self, Mode::Brittle)
    }
}

/// One energy evaluation. `penalty` is `k int f z` in adhesive mode and 0 or
/// `+inf` in brittle mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub t: f64,
    pub perimeter: f64,
    pub penalty: f64,
    pub dissipation_cum: f64,
    pub total: f64,
    pub feasible: bool,
}

impl EnergyBreakdown {
    fn new(t: f64, perimeter: f64, penalty: f64) -> Self {
        EnergyBreakdown {
            t,
            perimeter,
            penalty,
            dissipation_cum: 0.0,
            total: perimeter + penalty,
            feasible: penalty.is_finite(),
        }
    }

    pub fn with_dissipation(mut self, d: f64) -> Self {
        self.dissipation_cum = d;
        self
    }
}

/// Adhesive energy from a sampled density.
pub fn adhesive_energy_from_density(
    t: f64,
    z: &BinaryField,
    k: f64,
    density: &[f64],
    scheme: PerimeterScheme,
) -> EnergyBreakdown {
    let penalty: f64 = z.ones().map(|c| density[c]).sum::<f64>() * k * z.grid().cell_area();
    EnergyBreakdown::new(t, perimeter_estimate(z, scheme), penalty)
}

pub fn adhesive_energy(
    t: f64,
    z: &BinaryField,
    k: f64,
    forcing: &Forcing,
    scheme: PerimeterScheme,
) -> Result<EnergyBreakdown> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::param("k", "must be finite and positive"));
    }
    let f = forcing.sample(t, z.grid());
    Ok(adhesive_energy_from_density(t, z, k, &f, scheme))
}

/// Brittle energy against an explicit forcing mask.
pub fn brittle_energy_from_set(
    t: f64,
    z: &BinaryField,
    forced: &BinaryField,
    scheme: PerimeterScheme,
) -> EnergyBreakdown {
    let overlap = z
        .values()
        .iter()
        .zip(forced.values())
        .any(|(&a, &b)| a == 1 && b == 1);
    let penalty = if overlap { f64::INFINITY } else { 0.0 };
    EnergyBreakdown::new(t, perimeter_estimate(z, scheme), penalty)
}

pub fn brittle_energy(
    t: f64,
    z: &BinaryField,
    forcing: &Forcing,
    scheme: PerimeterScheme,
) -> EnergyBreakdown {
    brittle_energy_from_set(t, z, &forcing.open_set(t, z.grid()), scheme)
}

pub fn energy(
    mode: Mode,
    t: f64,
    z: &BinaryField,
    forcing: &Forcing,
    scheme: PerimeterScheme,
) -> Result<EnergyBreakdown> {
    match mode {
        Mode::Adhesive { k } => adhesive_energy(t, z, k, forcing, scheme),
        Mode::Brittle => Ok(brittle_energy(t, z, forcing, scheme)),
    }
}

/// `a |prev \ next|` if `next ⊂ prev`, else `+inf`.
pub fn dissipation(prev: &BinaryField, next: &BinaryField, a: f64) -> Result<f64> {
    if !next.is_subset_of(prev)? {
        return Ok(f64::INFINITY);
    }
    Ok(a * (volume(prev) - volume(next)))
}

/// Time-integrated power over one step, `k h^2 sum (f_next - f_prev) z`.
pub fn power_from_densities(z: &BinaryField, k: f64, f_prev: &[f64], f_next: &[f64]) -> f64 {
    k * z.grid().cell_area() * z.ones().map(|c| f_next[c] - f_prev[c]).sum::<f64>()
}

pub fn power_adhesive(
    interval: [f64; 2],
    z: &BinaryField,
    k: f64,
    forcing: &Forcing,
) -> f64 {
    let grid = z.grid();
    power_from_densities(
        z,
        k,
        &forcing.sample(interval[0], grid),
        &forcing.sample(interval[1], grid),
    )
}

/// Total dissipation along a monotone sequence of masks. The telescoping sum
/// and the end-to-end distance are both computed and must agree.
pub fn total_dissipation(masks: &[BinaryField], a: f64) -> Result<f64> {
    let mut sum = 0.0;
    for (i, w) in masks.windows(2).enumerate() {
        let d = dissipation(&w[0], &w[1], a)?;
        if !d.is_finite() {
            return Err(Error::NonMonotoneTrajectory { step: i + 1 });
        }
        sum += d;
    }
    if let (Some(first), Some(last)) = (masks.first(), masks.last()) {
        let direct = dissipation(first, last, a)?;
        let scale = direct.abs().max(1.0);
        assert!(
            (direct - sum).abs() <= 1e-9 * scale,
            "telescoping sum {sum} differs from end-to-end dissipation {direct}"
        );
    }
    Ok(sum)
}

fn fmt_value(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

/// CSV with columns `t, perimeter, penalty, dissipation_cum, total, feasible`.
pub fn write_energy_csv<W: Write>(rows: &[EnergyBreakdown], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "perimeter", "penalty", "dissipation_cum", "total", "feasible"])?;
    for r in rows {
        w.write_record([
            fmt_value(r.t),
            fmt_value(r.perimeter),
            fmt_value(r.penalty),
            fmt_value(r.dissipation_cum),
            fmt_value(r.total),
            r.feasible.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<energy csv>", e))?;
    Ok(())
}
