//! Deterministic two-wall obstacle problem for `Xi` given a driving field `v`:
//! `Xi + v` stays in `[Lambda1, Lambda2]`, pushed by two nonnegative measures
//! that act only on contact.
//!
//! One step of the projection scheme:
//!
//! 1. backward-Euler heat step on `Xi`;
//! 2. pointwise implicit drift: `X - dt g(X) = Xi~ + v(t + dt)`;
//! 3. projection of `X` onto the walls at `t + dt`; the upward correction
//!    times `dx` is the `Upsilon` mass of the cell, the downward one the
//!    `Gamma` mass.
//!
//! Each stage is order preserving and 1-Lipschitz in the sup norm, so the
//! discrete solution inherits comparison and contraction exactly.

use serde::Serialize;

use crate::drift::{resolve_implicit, MonotoneDrift, Penalized, SingularDriftSpec};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::implicit::ImplicitHeat;
use crate::walls::WallPair;

/// States beyond this magnitude are treated as numerical blow-up.
pub const OVERFLOW_GUARD: f64 = 1e12;

/// Cellwise masses of the two reflection measures; row `k` holds the mass
/// added by the step ending at `t_k`, so row 0 is zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReflectionLedger {
    pub upsilon: Field,
    pub gamma: Field,
}

impl ReflectionLedger {
    pub fn zeros(steps: usize, cells: usize) -> Self {
        ReflectionLedger {
            upsilon: Field::zeros(steps, cells),
            gamma: Field::zeros(steps, cells),
        }
    }

    pub fn total_upsilon(&self) -> f64 {
        self.upsilon.as_slice().iter().sum()
    }

    pub fn total_gamma(&self) -> f64 {
        self.gamma.as_slice().iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_upsilon() == 0.0 && self.total_gamma() == 0.0
    }

    /// Nonnegative and finite everywhere.
    pub fn is_valid(&self) -> bool {
        self.upsilon
            .as_slice()
            .iter()
            .chain(self.gamma.as_slice())
            .all(|m| m.is_finite() && *m >= 0.0)
    }

    pub fn truncate(&mut self, steps: usize) {
        self.upsilon.truncate(steps);
        self.gamma.truncate(steps);
    }
}

pub(crate) fn divergence(step: usize, magnitude: f64, dt: f64) -> Error {
    Error::Divergence {
        step,
        magnitude,
        suggested_dt: dt / 10.0,
    }
}

/// Projects `state` onto `[l1, l2]` and writes the corrections times `dx`.
#[inline]
pub(crate) fn project(state: &mut [f64], l1: &[f64], l2: &[f64], dx: f64, up: &mut [f64], down: &mut [f64]) {
    for i in 0..state.len() {
        let s = state[i];
        if s < l1[i] {
            up[i] = (l1[i] - s) * dx;
            down[i] = 0.0;
            state[i] = l1[i];
        } else if s > l2[i] {
            up[i] = 0.0;
            down[i] = (s - l2[i]) * dx;
            state[i] = l2[i];
        } else {
            up[i] = 0.0;
            down[i] = 0.0;
        }
    }
}

pub(crate) fn check_row(row: &[f64], step: usize, dt: f64) -> Result<()> {
    for v in row {
        if !(v.abs() <= OVERFLOW_GUARD) {
            return Err(divergence(step, v.abs(), dt));
        }
    }
    Ok(())
}

fn check_shapes(v: &Field, walls: &WallPair, grid: &Grid) -> Result<()> {
    if v.steps() != grid.nt + 1 || v.cells() != grid.nx {
        return Err(Error::Config(format!(
            "driving field is {}x{}, grid needs {}x{}",
            v.steps(),
            v.cells(),
            grid.nt + 1,
            grid.nx
        )));
    }
    if walls.cells() != grid.nx {
        return Err(Error::Config("walls sampled on a different grid".into()));
    }
    let (l1, l2) = (walls.lower(0), walls.upper(0));
    for (i, x0) in v.row(0).iter().enumerate() {
        if *x0 < l1[i] || *x0 > l2[i] {
            return Err(Error::Config(format!(
                "initial state {x0} at node {i} lies outside [{}, {}]",
                l1[i], l2[i]
            )));
        }
    }
    Ok(())
}

/// `Xi`, the state `X = Xi + v` and the ledger of one obstacle solve.
#[derive(Debug, Clone, Serialize)]
pub struct ObstacleSolution {
    pub xi: Field,
    pub x: Field,
    pub ledger: ReflectionLedger,
}

/// Projection solve with the singular drift `spec`.
pub fn solve_obstacle(v: &Field, walls: &WallPair, spec: &SingularDriftSpec, grid: &Grid) -> Result<ObstacleSolution> {
    spec.validate()?;
    solve_obstacle_with(v, walls, spec, grid)
}

/// Projection solve with any drift that is nonincreasing in the state.
pub fn solve_obstacle_with(v: &Field, walls: &WallPair, drift: &dyn MonotoneDrift, grid: &Grid) -> Result<ObstacleSolution> {
    check_shapes(v, walls, grid)?;
    let (nt, n, dt) = (grid.nt, grid.nx, grid.dt);
    let heat = ImplicitHeat::new(grid, dt);
    let mut xi = Field::zeros(nt + 1, n);
    let mut x = Field::zeros(nt + 1, n);
    x.row_mut(0).copy_from_slice(v.row(0));
    let mut ledger = ReflectionLedger::zeros(nt + 1, n);
    let mut work = vec![0.0; n];
    for k in 0..nt {
        work.copy_from_slice(xi.row(k));
        heat.solve_in_place(&mut work);
        let (l1, l2) = (walls.lower(k + 1), walls.upper(k + 1));
        let vk = v.row(k + 1);
        for i in 0..n {
            let r = work[i] + vk[i];
            work[i] = if drift.is_zero() {
                r
            } else {
                resolve_implicit(r, dt, |u| drift.value_and_slope(i, k + 1, u, l1[i], l2[i]))
            };
        }
        check_row(&work, k + 1, dt)?;
        let (up, down) = (ledger.upsilon.row_mut(k + 1), ledger.gamma.row_mut(k + 1));
        project(&mut work, l1, l2, grid.dx, up, down);
        for i in 0..n {
            if !(work[i] >= l1[i] && work[i] <= l2[i]) {
                return Err(Error::Invariant(format!(
                    "state {} outside walls after projection at step {}, node {i}",
                    work[i],
                    k + 1
                )));
            }
        }
        x.row_mut(k + 1).copy_from_slice(&work);
        for (o, (s, vi)) in xi.row_mut(k + 1).iter_mut().zip(work.iter().zip(vk)) {
            *o = s - vi;
        }
    }
    Ok(ObstacleSolution { xi, x, ledger })
}

/// Penalized solve: the walls enter only through the restoring drift
/// `rho (Lambda1 - X)^+ - rho (X - Lambda2)^+`, resolved implicitly together
/// with `drift`. Returns `Xi` and `X = Xi + v`.
pub fn solve_penalized(v: &Field, walls: &WallPair, drift: &dyn MonotoneDrift, rho: f64, grid: &Grid) -> Result<(Field, Field)> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::Config(format!("penalty must be finite and >= 0, got {rho}")));
    }
    check_shapes(v, walls, grid)?;
    let (nt, n, dt) = (grid.nt, grid.nx, grid.dt);
    let heat = ImplicitHeat::new(grid, dt);
    let total = Penalized { drift, rho };
    let mut xi = Field::zeros(nt + 1, n);
    let mut x = Field::zeros(nt + 1, n);
    x.row_mut(0).copy_from_slice(v.row(0));
    let mut work = vec![0.0; n];
    for k in 0..nt {
        work.copy_from_slice(xi.row(k));
        heat.solve_in_place(&mut work);
        let (l1, l2) = (walls.lower(k + 1), walls.upper(k + 1));
        let vk = v.row(k + 1);
        for i in 0..n {
            let r = work[i] + vk[i];
            work[i] = resolve_implicit(r, dt, |u| total.value_and_slope(i, k + 1, u, l1[i], l2[i]));
        }
        check_row(&work, k + 1, dt)?;
        x.row_mut(k + 1).copy_from_slice(&work);
        for (o, (s, vi)) in xi.row_mut(k + 1).iter_mut().zip(work.iter().zip(vk)) {
            *o = s - vi;
        }
    }
    Ok((xi, x))
}

/// Largest wall violation `max((Lambda1 - X)^+, (X - Lambda2)^+)` of a state field.
pub fn max_wall_violation(x: &Field, walls: &WallPair) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..x.steps() {
        let (l1, l2) = (walls.lower(k), walls.upper(k));
        for (i, s) in x.row(k).iter().enumerate() {
            worst = worst.max(l1[i] - s).max(s - l2[i]);
        }
    }
    worst
}

/// `(sum (X - Lambda1) Upsilon, sum (Lambda2 - X) Gamma)` over all cells and steps.
pub fn complementarity_residual(x: &Field, walls: &WallPair, ledger: &ReflectionLedger) -> (f64, f64) {
    let mut r1 = 0.0;
    let mut r2 = 0.0;
    for k in 0..x.steps().min(ledger.upsilon.steps()) {
        let (l1, l2) = (walls.lower(k), walls.upper(k));
        let (up, down) = (ledger.upsilon.row(k), ledger.gamma.row(k));
        for (i, s) in x.row(k).iter().enumerate() {
            if up[i] != 0.0 {
                r1 += (s - l1[i]) * up[i];
            }
            if down[i] != 0.0 {
                r2 += (l2[i] - s) * down[i];
            }
        }
    }
    (r1, r2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionResult {
    /// `sup |Xi - Xi_hat|`.
    pub lhs: f64,
    /// `sup |v - v_hat|`.
    pub rhs: f64,
    pub pass: bool,
}

pub const CONTRACTION_TOL: f64 = 1e-8;

/// Solves both obstacle problems and compares `sup |Xi - Xi_hat|` with `sup |v - v_hat|`.
pub fn contraction_check(
    v: &Field,
    v_hat: &Field,
    walls: &WallPair,
    drift: &dyn MonotoneDrift,
    grid: &Grid,
) -> Result<ContractionResult> {
    let a = solve_obstacle_with(v, walls, drift, grid)?;
    let b = solve_obstacle_with(v_hat, walls, drift, grid)?;
    let lhs = a.xi.sup_distance(&b.xi);
    let rhs = v.sup_distance(v_hat);
    Ok(ContractionResult {
        lhs,
        rhs,
        pass: lhs <= rhs + CONTRACTION_TOL,
    })
}

/// Which regularizer a schedule phase refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsTarget {
    Lower,
    Upper,
}

/// Geometric refinement of the drift regularizers: first `eps1` is halved
/// with `eps2` fixed, then `eps2` with the final `eps1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsSchedule {
    pub eps1_start: f64,
    pub eps2_start: f64,
    /// Number of levels per phase, 3 to 6.
    pub levels: usize,
    pub ratio: f64,
    /// A phase stops early once successive solutions differ by less than this.
    pub stop_tol: f64,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        EpsSchedule {
            eps1_start: 0.1,
            eps2_start: 0.1,
            levels: 4,
            ratio: 0.5,
            stop_tol: 1e-4,
        }
    }
}

impl EpsSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(3..=6).contains(&self.levels) {
            return Err(Error::Config(format!("schedule needs 3 to 6 levels, got {}", self.levels)));
        }
        if !(self.eps1_start > 0.0 && self.eps2_start > 0.0) {
            return Err(Error::Config("schedule regularizers must start positive".into()));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Config(format!("schedule ratio must lie in (0,1), got {}", self.ratio)));
        }
        Ok(())
    }
}

/// Diagnostics of one refinement phase.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseReport {
    pub target: EpsTarget,
    pub eps: Vec<f64>,
    /// `sup |Xi_j - Xi_(j-1)|` between successive levels.
    pub sup_diffs: Vec<f64>,
    /// Largest violation of the monotonicity of `eps -> Xi`.
    pub xi_violation: f64,
    /// Largest violation of the monotonicity of `eps -> Xi +/- eps`.
    pub shifted_violation: f64,
    pub monotone: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleReport {
    pub phases: Vec<PhaseReport>,
    #[serde(skip)]
    pub solution: ObstacleSolution,
}

pub const MONOTONE_TOL: f64 = 1e-8;

/// Violations of the monotone-limit ordering between a coarser (`a`, larger
/// eps) and a finer (`b`) solve.
///
/// Lower regularizer: `eps1 -> Xi` is nonincreasing and `eps1 -> eps1 + Xi`
/// nondecreasing. Upper regularizer, by the mirror symmetry `X -> -X`:
/// `eps2 -> Xi` is nondecreasing and `eps2 -> Xi - eps2` nonincreasing.
pub fn monotone_violations(target: EpsTarget, eps_a: f64, xi_a: &Field, eps_b: f64, xi_b: &Field) -> (f64, f64) {
    let mut xi_v: f64 = 0.0;
    let mut sh_v: f64 = 0.0;
    for (a, b) in xi_a.as_slice().iter().zip(xi_b.as_slice()) {
        match target {
            EpsTarget::Lower => {
                xi_v = xi_v.max(a - b);
                sh_v = sh_v.max((eps_b + b) - (eps_a + a));
            }
            EpsTarget::Upper => {
                xi_v = xi_v.max(b - a);
                sh_v = sh_v.max((a - eps_a) - (b - eps_b));
            }
        }
    }
    (xi_v, sh_v)
}

/// Runs the schedule and reports the monotone-limit diagnostics per phase.
pub fn solve_obstacle_schedule(
    v: &Field,
    walls: &WallPair,
    base: &SingularDriftSpec,
    grid: &Grid,
    schedule: &EpsSchedule,
) -> Result<ScheduleReport> {
    schedule.validate()?;
    let mut phases = Vec::new();
    let mut eps1 = schedule.eps1_start;
    let eps2 = schedule.eps2_start;
    let mut last = None;
    for target in [EpsTarget::Lower, EpsTarget::Upper] {
        let mut eps_values = Vec::new();
        let mut sup_diffs = Vec::new();
        let (mut xi_violation, mut shifted_violation) = (0.0f64, 0.0f64);
        let mut converged = false;
        let mut prev: Option<(f64, ObstacleSolution)> = None;
        for level in 0..schedule.levels {
            let eps = match target {
                EpsTarget::Lower => schedule.eps1_start,
                EpsTarget::Upper => eps2,
            } * schedule.ratio.powi(level as i32);
            let spec = match target {
                EpsTarget::Lower => SingularDriftSpec { eps1: eps, eps2, ..*base },
                EpsTarget::Upper => SingularDriftSpec { eps1, eps2: eps, ..*base },
            };
            let sol = solve_obstacle(v, walls, &spec, grid)?;
            eps_values.push(eps);
            if let Some((prev_eps, prev_sol)) = &prev {
                let d = sol.xi.sup_distance(&prev_sol.xi);
                sup_diffs.push(d);
                let (a, b) = monotone_violations(target, *prev_eps, &prev_sol.xi, eps, &sol.xi);
                xi_violation = xi_violation.max(a);
                shifted_violation = shifted_violation.max(b);
                if d < schedule.stop_tol && level + 1 >= 3 {
                    converged = true;
                    prev = Some((eps, sol));
                    break;
                }
            }
            prev = Some((eps, sol));
        }
        let (final_eps, sol) = prev.expect("at least one level");
        if target == EpsTarget::Lower {
            eps1 = final_eps;
        }
        phases.push(PhaseReport {
            target,
            eps: eps_values,
            sup_diffs,
            xi_violation,
            shifted_violation,
            monotone: xi_violation <= MONOTONE_TOL && shifted_violation <= MONOTONE_TOL,
            converged,
        });
        last = Some(sol);
    }
    Ok(ScheduleReport {
        phases,
        solution: last.expect("two phases"),
    })
}
