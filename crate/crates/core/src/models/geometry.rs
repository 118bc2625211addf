use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Blood density (g/cm³) and viscosity (g/cm/s).
pub const BLOOD_DENSITY: f64 = 1.06;
pub const BLOOD_VISCOSITY: f64 = 0.04;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rlc {
    pub r: f64,
    pub c: f64,
    pub l: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {v}")))
    }
}

/// Poiseuille resistance, thin-wall compliance and inertance of a straight
/// vessel segment.
pub fn rlc_from_geometry(mu: f64, rho: f64, length: f64, radius: f64, young: f64, wall: f64) -> Result<Rlc> {
    positive("young", young)?;
    positive("wall", wall)?;
    let mut out = rigid_rlc(mu, rho, length, radius)?;
    out.c = 3.0 * length * PI * radius.powi(3) / (2.0 * young * wall);
    Ok(out)
}

/// Rigid-wall segment: the compliance is zero and drops out downstream.
pub fn rigid_rlc(mu: f64, rho: f64, length: f64, radius: f64) -> Result<Rlc> {
    positive("mu", mu)?;
    positive("rho", rho)?;
    positive("length", length)?;
    positive("radius", radius)?;
    Ok(Rlc {
        r: 8.0 * mu * length / (PI * radius.powi(4)),
        c: 0.0,
        l: rho * length / (PI * radius * radius),
    })
}

/// Mean arterial pressure from a cuff reading.
pub fn mean_cuff_pressure(p_sys: f64, p_dia: f64) -> f64 {
    p_sys / 3.0 + 2.0 * p_dia / 3.0
}
