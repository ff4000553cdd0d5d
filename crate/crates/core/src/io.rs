//! CSV and JSON artifacts.
//!
//! Every CSV has a header row and fixed column order; floats are written in
//! shortest round-trip form so reruns are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::Field;
use crate::grid::Grid;
use crate::hitting::{detect_contact, min_gap_series, HittingRecord};
use crate::obstacle::{complementarity_residual, max_wall_violation, ObstacleSolution, ReflectionLedger};
use crate::spde::{Mode, SeedInfo, SolutionPath};
use crate::walls::WallPair;

pub const TRAJECTORY_HEADER: [&str; 7] = ["step", "t", "cell", "x", "X", "upsilon_mass", "gamma_mass"];
pub const OBSTACLE_HEADER: [&str; 6] = ["step", "t", "cell", "x", "Xi", "X"];
pub const LEDGER_HEADER: [&str; 6] = ["step", "t", "cell", "x", "upsilon_mass", "gamma_mass"];
pub const GAP_SERIES_HEADER: [&str; 4] = ["step", "t", "gap_lower", "gap_upper"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub t: f64,
    pub cell: usize,
    pub x: f64,
    #[serde(rename = "X")]
    pub value: f64,
    pub upsilon_mass: f64,
    pub gamma_mass: f64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_trajectory_csv<W: Write>(path: &SolutionPath, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    let g = &path.grid;
    for k in 0..path.steps() {
        let t = g.time(k).to_string();
        let (xs, up, down) = (path.x.row(k), path.ledger.upsilon.row(k), path.ledger.gamma.row(k));
        for i in 0..g.nx {
            w.write_record([
                k.to_string(),
                t.clone(),
                i.to_string(),
                g.x[i].to_string(),
                xs[i].to_string(),
                up[i].to_string(),
                down[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_trajectory_csv(path: &SolutionPath, file: &Path) -> Result<()> {
    write_trajectory_csv(path, create(file)?)
}

pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<TrajectoryRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != TRAJECTORY_HEADER {
        return Err(crate::Error::Config(format!("unexpected trajectory header {header:?}")));
    }
    Ok(r.deserialize().collect::<std::result::Result<Vec<TrajectoryRow>, _>>()?)
}

pub fn write_obstacle_csv<W: Write>(sol: &ObstacleSolution, grid: &Grid, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OBSTACLE_HEADER)?;
    for k in 0..sol.xi.steps() {
        let t = grid.time(k).to_string();
        for i in 0..grid.nx {
            w.write_record([
                k.to_string(),
                t.clone(),
                i.to_string(),
                grid.x[i].to_string(),
                sol.xi.get(k, i).to_string(),
                sol.x.get(k, i).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ledger_csv<W: Write>(ledger: &ReflectionLedger, grid: &Grid, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LEDGER_HEADER)?;
    for k in 0..ledger.upsilon.steps() {
        let t = grid.time(k).to_string();
        for i in 0..grid.nx {
            w.write_record([
                k.to_string(),
                t.clone(),
                i.to_string(),
                grid.x[i].to_string(),
                ledger.upsilon.get(k, i).to_string(),
                ledger.gamma.get(k, i).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_gap_series_csv<W: Write>(series: &[(f64, f64)], grid: &Grid, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GAP_SERIES_HEADER)?;
    for (k, (lo, hi)) in series.iter().enumerate() {
        w.write_record([k.to_string(), grid.time(k).to_string(), lo.to_string(), hi.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_with<F>(file: &Path, write: F) -> Result<()>
where
    F: FnOnce(BufWriter<File>) -> Result<()>,
{
    write(create(file)?)
}

pub fn save_json<T: Serialize>(value: &T, file: &Path) -> Result<()> {
    let mut w = create(file)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Scalar diagnostics of one path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    pub mode: Mode,
    pub seed: Option<SeedInfo>,
    pub steps: usize,
    pub stop_time: Option<f64>,
    pub min_gap_lower: f64,
    pub min_gap_upper: f64,
    /// Time at which each minimum was first attained.
    pub argmin_lower: f64,
    pub argmin_upper: f64,
    pub final_gap_lower: f64,
    pub final_gap_upper: f64,
    pub total_upsilon: f64,
    pub total_gamma: f64,
    pub complementarity_r1: f64,
    pub complementarity_r2: f64,
    pub max_wall_violation: f64,
    pub contact: HittingRecord,
}

impl PathSummary {
    pub fn new(path: &SolutionPath, walls: &WallPair, eta: f64) -> Self {
        let series = min_gap_series(path, walls);
        let argmin = |pick: fn(&(f64, f64)) -> f64| {
            let mut best = (f64::INFINITY, 0usize);
            for (k, s) in series.iter().enumerate() {
                if pick(s) < best.0 {
                    best = (pick(s), k);
                }
            }
            best
        };
        let (lo, klo) = argmin(|s| s.0);
        let (hi, khi) = argmin(|s| s.1);
        let last = series.last().copied().unwrap_or((f64::NAN, f64::NAN));
        let (r1, r2) = complementarity_residual(&path.x, walls, &path.ledger);
        let violation = match path.config.mode {
            Mode::Reflected => max_wall_violation(&path.x, walls),
            _ => max_wall_violation_lower_only(&path.x, walls, path.config.mode),
        };
        PathSummary {
            mode: path.config.mode,
            seed: path.seed,
            steps: path.steps(),
            stop_time: path.stop_time(),
            min_gap_lower: lo,
            min_gap_upper: hi,
            argmin_lower: path.grid.time(klo),
            argmin_upper: path.grid.time(khi),
            final_gap_lower: last.0,
            final_gap_upper: last.1,
            total_upsilon: path.ledger.total_upsilon(),
            total_gamma: path.ledger.total_gamma(),
            complementarity_r1: r1,
            complementarity_r2: r2,
            max_wall_violation: violation,
            contact: detect_contact(path, walls, eta),
        }
    }
}

fn max_wall_violation_lower_only(x: &Field, walls: &WallPair, mode: Mode) -> f64 {
    if mode == Mode::SingleWall {
        let mut worst: f64 = 0.0;
        for k in 0..x.steps() {
            for (s, l) in x.row(k).iter().zip(walls.lower(k)) {
                worst = worst.max(l - s);
            }
        }
        worst
    } else {
        max_wall_violation(x, walls)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{Coefficient, CoefficientSpec};
    use crate::drift::SingularDriftSpec;
    use crate::grid::{make_grid, DomainKind};
    use crate::noise::derive_stream;
    use crate::spde::simulate_reflected;

    fn path() -> (SolutionPath, WallPair) {
        let g = make_grid(DomainKind::Circle, 8, 0.01, 20).unwrap();
        let w = WallPair::constant(-0.05, 0.05, &g).unwrap();
        let coeff = CoefficientSpec::new(Coefficient::Zero, Coefficient::Constant { value: 1.0 });
        let p = simulate_reflected(&[0.0; 8], &w, &coeff, &SingularDriftSpec::zero(), &g, &mut derive_stream(3, 1)).unwrap();
        (p, w)
    }

    #[test]
    fn trajectory_round_trip() {
        let (p, w) = path();
        let mut buf = Vec::new();
        write_trajectory_csv(&p, &mut buf).unwrap();
        assert!(buf.starts_with(b"step,t,cell,x,X,upsilon_mass,gamma_mass\n"));
        let rows = read_trajectory_csv(&buf[..]).unwrap();
        assert_eq!(rows.len(), 21 * 8);
        for r in &rows {
            assert_eq!(r.value, p.x.get(r.step, r.cell));
            assert_eq!(r.upsilon_mass, p.ledger.upsilon.get(r.step, r.cell));
        }
        let series = min_gap_series(&p, &w);
        for (k, s) in series.iter().enumerate() {
            let lo = rows.iter().filter(|r| r.step == k).map(|r| r.value + 0.05).fold(f64::INFINITY, f64::min);
            assert_eq!(lo, s.0);
        }
        assert!(read_trajectory_csv(&b"step,t\n1,2\n"[..]).is_err());
    }

    #[test]
    fn summary_matches_path() {
        let (p, w) = path();
        let s = PathSummary::new(&p, &w, 0.0);
        assert_eq!(s.steps, 21);
        assert_eq!(s.complementarity_r1, 0.0);
        assert_eq!(s.max_wall_violation, 0.0);
        assert_eq!(s.min_gap_lower, s.contact.min_gap_lower);
        assert!(s.total_upsilon > 0.0);
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"mode\":\"reflected\""));
    }

    #[test]
    fn other_tables_have_headers() {
        let (p, w) = path();
        let mut buf = Vec::new();
        write_ledger_csv(&p.ledger, &p.grid, &mut buf).unwrap();
        assert!(buf.starts_with(b"step,t,cell,x,upsilon_mass,gamma_mass\n"));
        let mut buf = Vec::new();
        write_gap_series_csv(&min_gap_series(&p, &w), &p.grid, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 22);
    }
}
