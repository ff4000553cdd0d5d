//! Wall-contact detection and Monte Carlo estimates of `P(tau <= T)`.
//!
//! Contact at step `k >= 1` means, for reflected paths, a positive
//! reflection mass in the step or a gap `<= eta`; for unreflected paths only
//! the gap rule applies. The comparison is inclusive, so `eta = 0` detects
//! exact touching. Times are grid times `k dt`; no contact within the horizon
//! is reported as `+inf`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::coeff::CoefficientSpec;
use crate::drift::SingularDriftSpec;
use crate::error::{Error, Result};
use crate::grid::{make_grid, DomainKind, Grid};
use crate::noise::derive_stream;
use crate::spde::{integrate, InitialProfile, Mode, SolutionPath};
use crate::walls::{WallPair, WallSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WallHit {
    Lower,
    Upper,
    Both,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingRecord {
    pub tau1: f64,
    pub tau2: f64,
    pub tau: f64,
    pub wall_hit: WallHit,
    pub min_gap_lower: f64,
    pub min_gap_upper: f64,
}

/// Incremental contact detection over a stream of states.
#[derive(Debug, Clone)]
pub struct ContactDetector {
    eta: f64,
    reflected: bool,
    upper: bool,
    tau1_step: Option<usize>,
    tau2_step: Option<usize>,
    min_gap_lower: f64,
    min_gap_upper: f64,
}

impl ContactDetector {
    pub fn new(eta: f64, reflected: bool) -> Self {
        ContactDetector {
            eta,
            reflected,
            upper: true,
            tau1_step: None,
            tau2_step: None,
            min_gap_lower: f64::INFINITY,
            min_gap_upper: f64::INFINITY,
        }
    }

    /// Records the state of step `k`; `up`/`down` are the ledger increments
    /// of that step. Step 0 only contributes to the minimum gaps.
    pub fn observe(&mut self, k: usize, state: &[f64], l1: &[f64], l2: &[f64], up: &[f64], down: &[f64]) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..state.len() {
            lo = lo.min(state[i] - l1[i]);
            hi = hi.min(l2[i] - state[i]);
        }
        self.min_gap_lower = self.min_gap_lower.min(lo);
        self.min_gap_upper = self.min_gap_upper.min(hi);
        if k == 0 {
            return;
        }
        if self.tau1_step.is_none() && (lo <= self.eta || (self.reflected && up.iter().any(|m| *m > 0.0))) {
            self.tau1_step = Some(k);
        }
        if self.upper && self.tau2_step.is_none() && (hi <= self.eta || (self.reflected && down.iter().any(|m| *m > 0.0))) {
            self.tau2_step = Some(k);
        }
    }

    /// Ignores the upper wall, for single-wall runs.
    pub fn lower_only(mut self) -> Self {
        self.upper = false;
        self
    }

    pub fn hit(&self) -> bool {
        self.tau1_step.is_some() || self.tau2_step.is_some()
    }

    pub fn finish(&self, grid: &Grid) -> HittingRecord {
        let time = |s: Option<usize>| s.map_or(f64::INFINITY, |k| grid.time(k));
        let (tau1, tau2) = (time(self.tau1_step), time(self.tau2_step));
        let wall_hit = match (self.tau1_step, self.tau2_step) {
            (Some(_), Some(_)) => WallHit::Both,
            (Some(_), None) => WallHit::Lower,
            (None, Some(_)) => WallHit::Upper,
            (None, None) => WallHit::None,
        };
        HittingRecord {
            tau1,
            tau2,
            tau: tau1.min(tau2),
            wall_hit,
            min_gap_lower: self.min_gap_lower,
            min_gap_upper: self.min_gap_upper,
        }
    }
}

/// First contact times of a recorded path.
/// Single-wall paths only report the lower wall.
pub fn detect_contact(path: &SolutionPath, walls: &WallPair, eta: f64) -> HittingRecord {
    let mut d = ContactDetector::new(eta, path.config.mode == Mode::Reflected);
    if path.config.mode == Mode::SingleWall {
        d = d.lower_only();
    }
    for k in 0..path.steps() {
        d.observe(
            k,
            path.x.row(k),
            walls.lower(k),
            walls.upper(k),
            path.ledger.upsilon.row(k),
            path.ledger.gamma.row(k),
        );
    }
    d.finish(&path.grid)
}

/// `(min_x (X - Lambda1), min_x (Lambda2 - X))` at every recorded step.
pub fn min_gap_series(path: &SolutionPath, walls: &WallPair) -> Vec<(f64, f64)> {
    (0..path.steps())
        .map(|k| {
            let (l1, l2) = (walls.lower(k), walls.upper(k));
            path.x.row(k).iter().enumerate().fold((f64::INFINITY, f64::INFINITY), |(a, b), (i, v)| {
                (a.min(v - l1[i]), b.min(l2[i] - v))
            })
        })
        .collect()
}

/// Everything a Monte Carlo hitting run needs apart from `theta`, the seed,
/// the horizon and `eta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingConfig {
    pub domain: DomainKind,
    pub nx: usize,
    pub nt: usize,
    pub walls: WallSpec,
    pub x0: InitialProfile,
    pub coeff: CoefficientSpec,
    /// `theta` is overridden per run.
    pub drift: SingularDriftSpec,
    pub mode: Mode,
}

impl HittingConfig {
    /// Stable 16-hex-digit digest of the configuration.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        config_hash(&text)
    }
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// z-value of the two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Wilson score interval for `hits` successes out of `n`, clamped to contain
/// the point estimate.
pub fn wilson_interval(hits: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingRow {
    pub theta: f64,
    /// Paths that completed.
    pub n_paths: usize,
    pub n_hits: usize,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub eta: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub seed: u64,
    pub config_hash: String,
    /// Paths excluded after an integrator error.
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingTable {
    pub rows: Vec<HittingRow>,
}

pub const HITTING_CSV_HEADER: [&str; 10] = [
    "theta", "n_paths", "n_hits", "p_hat", "ci_low", "ci_high", "eta", "T", "seed", "config_hash",
];

impl HittingTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(HITTING_CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.theta.to_string(),
                r.n_paths.to_string(),
                r.n_hits.to_string(),
                r.p_hat.to_string(),
                r.ci_low.to_string(),
                r.ci_high.to_string(),
                r.eta.to_string(),
                r.t_final.to_string(),
                r.seed.to_string(),
                r.config_hash.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// `p_hat` never increases along the rows beyond the confidence intervals:
    /// for every later row, `ci_low(later) <= ci_high(earlier)`.
    pub fn nonincreasing_up_to_ci(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(i, a)| self.rows[i + 1..].iter().all(|b| b.ci_low <= a.ci_high))
    }
}

/// Runs one path and returns whether it made contact before `T`.
fn run_path(cfg: &HittingConfig, grid: &Grid, walls: &WallPair, drift: &SingularDriftSpec, x0: &[f64], seed: u64, index: u64, eta: f64) -> Result<bool> {
    let mut stream = derive_stream(seed, index);
    let mut det = ContactDetector::new(eta, cfg.mode == Mode::Reflected);
    if cfg.mode == Mode::SingleWall {
        det = det.lower_only();
    }
    let zeros = vec![0.0; grid.nx];
    det.observe(0, x0, walls.lower(0), walls.upper(0), &zeros, &zeros);
    integrate(x0, walls, &cfg.coeff, drift, grid, &mut stream, cfg.mode, |k, s, up, down| {
        det.observe(k, s, walls.lower(k), walls.upper(k), up, down);
        !det.hit()
    })?;
    Ok(det.hit())
}

/// Fraction of `n_paths` paths with `tau <= T`, with a Wilson 95% interval.
/// Paths use streams `(master_seed, 0..n_paths)` and run in parallel;
/// aggregation is in path order.
pub fn estimate_hitting_probability(
    cfg: &HittingConfig,
    theta: f64,
    n_paths: usize,
    master_seed: u64,
    t_final: f64,
    eta: f64,
) -> Result<HittingRow> {
    if n_paths == 0 {
        return Err(Error::Config("n_paths must be at least 1".into()));
    }
    if !(eta >= 0.0) {
        return Err(Error::Config(format!("eta must be >= 0, got {eta}")));
    }
    let grid = make_grid(cfg.domain, cfg.nx, t_final, cfg.nt)?;
    let walls = WallPair::sample(cfg.walls.clone(), &grid)?;
    let drift = SingularDriftSpec { theta, ..cfg.drift };
    let x0 = cfg.x0.sample(&grid);
    // Surface configuration errors once instead of per path.
    crate::spde::Stepper::new(&grid, &walls, &cfg.coeff, &drift, cfg.mode)?;
    let outcomes: Vec<Result<bool>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| run_path(cfg, &grid, &walls, &drift, &x0, master_seed, p, eta))
        .collect();
    let mut n_hits = 0;
    let mut n_ok = 0;
    let mut n_failed = 0;
    for o in &outcomes {
        match o {
            Ok(hit) => {
                n_ok += 1;
                n_hits += *hit as usize;
            }
            Err(Error::Config(m)) => return Err(Error::Config(m.clone())),
            Err(_) => n_failed += 1,
        }
    }
    let p_hat = if n_ok == 0 { 0.0 } else { n_hits as f64 / n_ok as f64 };
    let (ci_low, ci_high) = wilson_interval(n_hits, n_ok, Z95);
    Ok(HittingRow {
        theta,
        n_paths: n_ok,
        n_hits,
        p_hat,
        ci_low,
        ci_high,
        eta,
        t_final,
        seed: master_seed,
        config_hash: cfg.digest(),
        n_failed,
    })
}

/// One row per `theta`; row `j` uses seed `master_seed + j`.
pub fn exponent_sweep(
    cfg: &HittingConfig,
    thetas: &[f64],
    n_paths: usize,
    master_seed: u64,
    t_final: f64,
    eta: f64,
) -> Result<HittingTable> {
    if thetas.is_empty() {
        return Err(Error::Config("theta list is empty".into()));
    }
    let rows = thetas
        .iter()
        .enumerate()
        .map(|(j, &theta)| estimate_hitting_probability(cfg, theta, n_paths, master_seed.wrapping_add(j as u64), t_final, eta))
        .collect::<Result<Vec<_>>>()?;
    Ok(HittingTable { rows })
}
