use std::io::{Read, Write};

use serde::Serialize;

use super::config::RansConfig;
use super::solver::RansState;
use crate::error::{check_len, Error, Result};
use crate::grid::ChannelGrid;

/// Wall quantities of a converged channel state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub re: f64,
    pub tau_w: f64,
    /// Shear stress at the lower and upper wall separately.
    pub tau_w_lower: f64,
    pub tau_w_upper: f64,
    pub u_tau: f64,
    pub c_f: f64,
    pub re_tau: f64,
    pub u_bulk: f64,
    /// Lower-half faces in wall units.
    pub y_plus: Vec<f64>,
    pub u_plus: Vec<f64>,
}

impl Diagnostics {
    pub fn write_profile_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "y_plus,u_plus")?;
        for (y, u) in self.y_plus.iter().zip(&self.u_plus) {
            writeln!(out, "{y:.10e},{u:.10e}")?;
        }
        Ok(())
    }
}

/// Second-order one-sided derivative at `y0` from values at distances `h1 < h2`
/// with `u(y0) = 0`.
fn wall_gradient(u1: f64, u2: f64, h1: f64, h2: f64) -> f64 {
    (u1 * h2 * h2 - u2 * h1 * h1) / (h1 * h2 * (h2 - h1))
}

pub fn diagnostics(state: &RansState, config: &RansConfig) -> Result<Diagnostics> {
    let grid = config.grid()?;
    let n = grid.n_y;
    check_len(n + 1, state.u_bar.len())?;
    let f = &grid.faces;
    let u = &state.u_bar;
    let nu = config.nu();
    let lower = wall_gradient(u[1], u[2], f[1] - f[0], f[2] - f[0]);
    let upper = wall_gradient(u[n - 1], u[n - 2], f[n] - f[n - 1], f[n] - f[n - 2]);
    let tau_lower = config.rho * nu * lower;
    let tau_upper = config.rho * nu * upper;
    let tau_w = 0.5 * (tau_lower + tau_upper);
    if !(tau_w > 0.0) || !tau_w.is_finite() {
        return Err(Error::Numeric(format!("degenerate wall shear stress {tau_w:e}")));
    }
    let u_tau = (tau_w / config.rho).sqrt();
    let u_bulk = grid.integrate_faces(u)? / (2.0 * config.delta);
    let c_f = tau_w / (0.5 * config.rho * u_bulk * u_bulk);
    let delta_v = nu / u_tau;
    let (y_plus, u_plus) = (0..=n / 2)
        .map(|j| ((f[j] - f[0]) / delta_v, u[j] / u_tau))
        .unzip();
    Ok(Diagnostics {
        re: config.re,
        tau_w,
        tau_w_lower: tau_lower,
        tau_w_upper: tau_upper,
        u_tau,
        c_f,
        re_tau: u_tau * config.delta / nu,
        u_bulk,
        y_plus,
        u_plus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetSource {
    SyntheticLawOfTheWall,
    File,
}

/// Target mean velocity at the channel faces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetProfile {
    pub re: f64,
    pub u: Vec<f64>,
    pub source: TargetSource,
}

impl TargetProfile {
    pub fn write_csv<W: Write>(&self, grid: &ChannelGrid, mut out: W) -> Result<()> {
        writeln!(out, "y,u")?;
        for (y, u) in grid.faces.iter().zip(&self.u) {
            writeln!(out, "{y:.17e},{u:.17e}")?;
        }
        Ok(())
    }
}

const KAPPA: f64 = 0.41;

/// Reichardt's composite law of the wall.
pub fn reichardt(y_plus: f64) -> f64 {
    (1.0 / KAPPA) * (1.0 + KAPPA * y_plus).ln()
        + 7.8 * (1.0 - (-y_plus / 11.0).exp() - (y_plus / 11.0) * (-y_plus / 3.0).exp())
}

/// Law-of-the-wall target with `u_tau` from Dean's correlation `C_f = 0.073 Re^-1/4`,
/// rescaled so its trapezoid bulk velocity equals the configured one.
pub fn synth_target(config: &RansConfig) -> Result<TargetProfile> {
    config.validate()?;
    let grid = config.grid()?;
    let c_f = 0.073 * config.re.powf(-0.25);
    let u_tau = config.u_bulk * (0.5 * c_f).sqrt();
    let nu = config.nu();
    let raw: Vec<f64> = grid
        .faces
        .iter()
        .map(|y| reichardt((config.delta - y.abs()) * u_tau / nu))
        .collect();
    let bulk = grid.integrate_faces(&raw)? / (2.0 * config.delta);
    let u = raw.iter().map(|v| v * config.u_bulk / bulk).collect();
    Ok(TargetProfile {
        re: config.re,
        u,
        source: TargetSource::SyntheticLawOfTheWall,
    })
}

/// Read `(y, u)` rows and interpolate linearly onto the channel faces. The rows
/// must span the whole channel; a header line is skipped.
pub fn load_target_csv<R: Read>(input: R, config: &RansConfig) -> Result<TargetProfile> {
    let grid = config.grid()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!("row {}: expected 2 columns, got {}", row + 1, rec.len())));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(y), Ok(u)) => pts.push((y, u)),
            _ if row == 0 => continue,
            _ => return Err(Error::Parse(format!("row {}: not a number", row + 1))),
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tol = 1e-9 * config.delta;
    match (pts.first(), pts.last()) {
        (Some(a), Some(b)) if a.0 <= -config.delta + tol && b.0 >= config.delta - tol => {}
        _ => {
            return Err(Error::Parse(format!(
                "target rows must cover [-{d}, {d}]",
                d = config.delta
            )))
        }
    }
    let u = grid
        .faces
        .iter()
        .map(|&y| {
            let i = pts.partition_point(|p| p.0 < y).clamp(1, pts.len() - 1);
            let (y0, u0) = pts[i - 1];
            let (y1, u1) = pts[i];
            if y1 == y0 {
                u1
            } else {
                u0 + (u1 - u0) * (y - y0) / (y1 - y0)
            }
        })
        .collect();
    Ok(TargetProfile {
        re: config.re,
        u,
        source: TargetSource::File,
    })
}
