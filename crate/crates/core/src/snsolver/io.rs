use std::path::Path;

use num_complex::Complex64;

use super::{Grid, Observables, SnError, WaveState};

fn io_err(e: impl std::fmt::Display) -> SnError {
    SnError::Io(e.to_string())
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Reads `x, Re ψ, Im ψ` rows (optional header, `#` comments). The
/// coordinates must be uniformly spaced; radial files must start at `r = h`.
pub fn read_wave_csv(path: &Path, radial: bool) -> Result<(Grid, Vec<Complex64>), SnError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(io_err)?;
    let mut x = Vec::new();
    let mut psi = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(io_err)?;
        let parsed: Result<Vec<f64>, _> = record.iter().take(3).map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) if v.len() == 3 => {
                x.push(v[0]);
                psi.push(Complex64::new(v[1], v[2]));
            }
            Ok(_) => return Err(SnError::Io(format!("row {} needs three columns", i + 1))),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(SnError::Io(format!("row {}: {e}", i + 1))),
        }
    }
    if x.len() < 3 {
        return Err(SnError::Io("need at least three rows".into()));
    }
    let h = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    if x.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h) {
        return Err(SnError::Grid("coordinates are not uniformly spaced".into()));
    }
    let grid = if radial {
        if (x[0] - h).abs() > 1e-6 * h {
            return Err(SnError::Grid(format!("radial grid must start at r = h = {h:e}, found {:e}", x[0])));
        }
        Grid::radial(h, x.len())?
    } else {
        Grid::cartesian(x[0], h, x.len())?
    };
    Ok((grid, psi))
}

/// Writes `x, re_psi, im_psi, density` rows.
pub fn write_profile_csv(path: &Path, state: &WaveState) -> Result<(), SnError> {
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    let label = if state.grid.is_radial() { "r" } else { "x" };
    w.write_record([label, "re_psi", "im_psi", "density"]).map_err(io_err)?;
    for (x, z) in state.grid.coordinates().iter().zip(&state.psi) {
        w.write_record([fmt(*x), fmt(z.re), fmt(z.im), fmt(z.norm_sqr())]).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_trajectory_csv(path: &Path, observables: &[Observables]) -> Result<(), SnError> {
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(["step", "time", "norm", "energy", "width"]).map_err(io_err)?;
    for o in observables {
        w.write_record([o.step.to_string(), fmt(o.time), fmt(o.norm), fmt(o.energy), fmt(o.width)])
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
