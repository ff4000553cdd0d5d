//! Stochastic integrators for the reflected equation, the clipped-drift
//! equation and the single-wall equation, plus Picard iteration and the
//! weak-form residual.
//!
//! A step from `t_k` to `t_(k+1)`:
//!
//! 1. `(I - dt Lap_h) Y = X + dt f(X) + chi(X) xi sqrt(dt/dx)` with `xi` the
//!    unit normals of the step, drawn cell-major;
//! 2. `Z - dt g(Z) = Y` node by node for the singular drift `g`;
//! 3. reflected runs project `Z` onto the walls at `t_(k+1)`.
//!
//! The singular drift is always floored at `max(configured floors, dx/10)`.

use serde::Serialize;

use crate::coeff::CoefficientSpec;
use crate::drift::{resolve_implicit, SingularDriftSpec};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::greens::SpectralPropagator;
use crate::grid::Grid;
use crate::implicit::ImplicitHeat;
use crate::noise::NoiseStream;
use crate::obstacle::{check_row, project, solve_obstacle, ReflectionLedger};
use crate::walls::WallPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Reflected,
    Clipped,
    SingleWall,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reflected" => Ok(Mode::Reflected),
            "clipped" => Ok(Mode::Clipped),
            "single-wall" | "single_wall" => Ok(Mode::SingleWall),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Reflected => "reflected",
            Mode::Clipped => "clipped",
            Mode::SingleWall => "single-wall",
        }
    }
}

/// Smallest drift floor as a fraction of `dx`.
pub const FLOOR_PER_DX: f64 = 0.1;

/// The drift spec actually integrated on `grid` for `mode`.
pub fn effective_drift(spec: &SingularDriftSpec, grid: &Grid, mode: Mode) -> SingularDriftSpec {
    let s = spec.with_min_floor(FLOOR_PER_DX * grid.dx);
    if mode == Mode::SingleWall {
        s.lower_only()
    } else {
        s
    }
}

/// One-step map shared by all integrators.
pub struct Stepper<'a> {
    grid: &'a Grid,
    walls: &'a WallPair,
    coeff: CoefficientSpec,
    drift: SingularDriftSpec,
    mode: Mode,
    heat: ImplicitHeat,
    noise_scale: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(grid: &'a Grid, walls: &'a WallPair, coeff: &CoefficientSpec, spec: &SingularDriftSpec, mode: Mode) -> Result<Self> {
        let drift = effective_drift(spec, grid, mode);
        drift.validate()?;
        if walls.cells() != grid.nx {
            return Err(Error::Config("walls sampled on a different grid".into()));
        }
        if !walls.is_time_constant() && walls.lambda1.steps() != grid.nt + 1 {
            return Err(Error::Config("walls sampled on a different time grid".into()));
        }
        Ok(Stepper {
            grid,
            walls,
            coeff: *coeff,
            drift,
            mode,
            heat: ImplicitHeat::new(grid, grid.dt),
            noise_scale: (grid.dt / grid.dx).sqrt(),
        })
    }

    pub fn drift(&self) -> &SingularDriftSpec {
        &self.drift
    }

    /// Advances `state` from step `k` to `k + 1` with unit normals `noise`.
    /// Writes the reflection masses of the step into `up` and `down`.
    pub fn advance(&self, k: usize, state: &mut [f64], noise: &[f64], up: &mut [f64], down: &mut [f64]) -> Result<()> {
        let g = self.grid;
        let t = g.time(k);
        let dt = g.dt;
        let (f, chi) = (&self.coeff.f, &self.coeff.chi);
        for i in 0..state.len() {
            let u = state[i];
            let x = g.x[i];
            let mut r = u;
            if !f.is_zero() {
                r += dt * f.eval(x, t, u);
            }
            if !chi.is_zero() {
                r += chi.eval(x, t, u) * noise[i] * self.noise_scale;
            }
            state[i] = r;
        }
        self.heat.solve_in_place(state);
        let (l1, l2) = (self.walls.lower(k + 1), self.walls.upper(k + 1));
        if !self.drift.is_zero() {
            for i in 0..state.len() {
                let (a, b) = (l1[i], l2[i]);
                state[i] = resolve_implicit(state[i], dt, |u| self.drift.value_and_slope(u, a, b));
            }
        }
        check_row(state, k + 1, dt)?;
        if self.mode == Mode::Reflected {
            project(state, l1, l2, g.dx, up, down);
        } else {
            up.fill(0.0);
            down.fill(0.0);
        }
        Ok(())
    }
}

/// New state and ledger increments of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub state: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// One reflected step from step index `k`; `noise` holds unit normals.
pub fn step_reflected(
    state: &[f64],
    k: usize,
    walls: &WallPair,
    coeff: &CoefficientSpec,
    spec: &SingularDriftSpec,
    noise: &[f64],
    grid: &Grid,
) -> Result<StepOutput> {
    if state.len() != grid.nx || noise.len() != grid.nx {
        return Err(Error::Config("state and noise must have one value per node".into()));
    }
    let stepper = Stepper::new(grid, walls, coeff, spec, Mode::Reflected)?;
    let mut out = StepOutput {
        state: state.to_vec(),
        upsilon: vec![0.0; grid.nx],
        gamma: vec![0.0; grid.nx],
    };
    stepper.advance(k, &mut out.state, noise, &mut out.upsilon, &mut out.gamma)?;
    Ok(out)
}

/// Initial condition given as a profile in `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    Constant { value: f64 },
    /// `amp sin(2 pi k x)`.
    Sine { amp: f64, k: u32 },
}

impl InitialProfile {
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        grid.x
            .iter()
            .map(|&x| match *self {
                InitialProfile::Constant { value } => value,
                InitialProfile::Sine { amp, k } => amp * (2.0 * std::f64::consts::PI * k as f64 * x).sin(),
            })
            .collect()
    }

    /// Parses `const:V` or `sine:A,K`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad initial profile '{s}'; expected const:V or sine:A,K"));
        let (name, args) = s.trim().split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(bad());
        }
        match (name.trim(), nums.as_slice()) {
            ("const" | "constant", [v]) => Ok(InitialProfile::Constant { value: *v }),
            ("sine", [a, k]) if *k >= 0.0 && k.fract() == 0.0 => Ok(InitialProfile::Sine { amp: *a, k: *k as u32 }),
            _ => Err(bad()),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            InitialProfile::Constant { value } => format!("const:{value}"),
            InitialProfile::Sine { amp, k } => format!("sine:{amp},{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeedInfo {
    pub master_seed: u64,
    pub path_index: u64,
}

/// Settings a path was produced with.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathConfig {
    pub mode: Mode,
    pub coeff: CoefficientSpec,
    /// Drift after flooring.
    pub drift: SingularDriftSpec,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionPath {
    pub grid: Grid,
    /// `X[step][cell]`, `steps = nt + 1` unless stopped early.
    pub x: Field,
    pub ledger: ReflectionLedger,
    pub config: PathConfig,
    pub seed: Option<SeedInfo>,
    /// Step at which a single-wall run stopped.
    pub stop_step: Option<usize>,
}

impl SolutionPath {
    pub fn steps(&self) -> usize {
        self.x.steps()
    }

    pub fn stop_time(&self) -> Option<f64> {
        self.stop_step.map(|k| self.grid.time(k))
    }
}

fn check_initial(x0: &[f64], walls: &WallPair, grid: &Grid, strict_lower: bool, check_upper: bool) -> Result<()> {
    if x0.len() != grid.nx {
        return Err(Error::Config(format!("x0 has {} values, grid has {} nodes", x0.len(), grid.nx)));
    }
    let (l1, l2) = (walls.lower(0), walls.upper(0));
    for (i, v) in x0.iter().enumerate() {
        let below = if strict_lower { *v <= l1[i] } else { *v < l1[i] };
        if !v.is_finite() || below || (check_upper && *v > l2[i]) {
            return Err(Error::Config(format!(
                "x0 = {v} at node {i} is not between the walls [{}, {}]",
                l1[i], l2[i]
            )));
        }
    }
    Ok(())
}

/// Runs the integrator and hands every new state to `observe(k, state, up, down)`
/// for `k = 1..=nt`. The observer returns `false` to stop early.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    x0: &[f64],
    walls: &WallPair,
    coeff: &CoefficientSpec,
    spec: &SingularDriftSpec,
    grid: &Grid,
    stream: &mut NoiseStream,
    mode: Mode,
    mut observe: impl FnMut(usize, &[f64], &[f64], &[f64]) -> bool,
) -> Result<()> {
    check_initial(x0, walls, grid, mode == Mode::SingleWall, mode != Mode::SingleWall)?;
    let stepper = Stepper::new(grid, walls, coeff, spec, mode)?;
    let n = grid.nx;
    let mut state = x0.to_vec();
    let mut noise = vec![0.0; n];
    let mut up = vec![0.0; n];
    let mut down = vec![0.0; n];
    for k in 0..grid.nt {
        stream.fill_normals(&mut noise);
        stepper.advance(k, &mut state, &noise, &mut up, &mut down)?;
        if !observe(k + 1, &state, &up, &down) {
            break;
        }
    }
    Ok(())
}

fn record_path(
    x0: &[f64],
    walls: &WallPair,
    coeff: &CoefficientSpec,
    spec: &SingularDriftSpec,
    grid: &Grid,
    stream: &mut NoiseStream,
    mode: Mode,
    stop_gap: Option<f64>,
) -> Result<SolutionPath> {
    let (nt, n) = (grid.nt, grid.nx);
    let mut x = Field::zeros(nt + 1, n);
    x.row_mut(0).copy_from_slice(x0);
    let mut ledger = ReflectionLedger::zeros(nt + 1, n);
    let mut stop_step = None;
    let seed = SeedInfo {
        master_seed: stream.master_seed(),
        path_index: stream.path_index(),
    };
    integrate(x0, walls, coeff, spec, grid, stream, mode, |k, s, up, down| {
        x.row_mut(k).copy_from_slice(s);
        ledger.upsilon.row_mut(k).copy_from_slice(up);
        ledger.gamma.row_mut(k).copy_from_slice(down);
        if let Some(threshold) = stop_gap {
            let l1 = walls.lower(k);
            if s.iter().zip(l1).any(|(v, l)| v - l <= threshold) {
                stop_step = Some(k);
                return false;
            }
        }
        true
    })?;
    if let Some(k) = stop_step {
        x.truncate(k + 1);
        ledger.truncate(k + 1);
    }
    Ok(SolutionPath {
        grid: grid.clone(),
        x,
        ledger,
        config: PathConfig {
            mode,
            coeff: *coeff,
            drift: effective_drift(spec, grid, mode),
        },
        seed: Some(seed),
        stop_step,
    })
}

/// Reflected path between the walls, with its reflection ledger.
pub fn simulate_reflected(
    x0: &[f64],
    walls: &WallPair,
    coeff: &CoefficientSpec,
    spec: &SingularDriftSpec,
    grid: &Grid,
    stream: &mut NoiseStream,
) -> Result<SolutionPath> {
    record_path(x0, walls, coeff, spec, grid, stream, Mode::Reflected, None)
}

/// Unreflected path with the floored drift; the state may cross the walls.
pub fn simulate_clipped(
    x0: &[f64],
    walls: &WallPair,
    coeff: &CoefficientSpec,
    spec: &SingularDriftSpec,
    grid: &Grid,
    stream: &mut NoiseStream,
) -> Result<SolutionPath> {
    if spec.c1 > 0.0 && spec.floor_delta <= 0.0 || spec.c2 > 0.0 && spec.floor_delta_tilde <= 0.0 {
        return Err(Error::Config("clipped runs need positive floors".into()));
    }
    record_path(x0, walls, coeff, spec, grid, stream, Mode::Clipped, None)
}

/// Lower-wall-only equation, stopped at the first step where
/// `min_x (v - Lambda1) <= stop_gap`.
pub fn simulate_single_wall(
    x0: &[f64],
    walls: &WallPair,
    coeff: &CoefficientSpec,
    spec: &SingularDriftSpec,
    grid: &Grid,
    stream: &mut NoiseStream,
    stop_gap: f64,
) -> Result<SolutionPath> {
    if !(stop_gap >= 0.0) {
        return Err(Error::Config(format!("stop gap must be >= 0, got {stop_gap}")));
    }
    record_path(x0, walls, coeff, spec, grid, stream, Mode::SingleWall, Some(stop_gap))
}

/// The unit normals a path with this key consumes, one row per step.
pub fn noise_record(master_seed: u64, path_index: u64, grid: &Grid) -> Field {
    let mut stream = crate::noise::derive_stream(master_seed, path_index);
    let mut f = Field::zeros(grid.nt, grid.nx);
    for k in 0..grid.nt {
        stream.fill_normals(f.row_mut(k));
    }
    f
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardState {
    /// Iterations performed.
    pub iteration: usize,
    #[serde(skip)]
    pub v: Field,
    #[serde(skip)]
    pub xi: Field,
    #[serde(skip)]
    pub x: Field,
    /// `sup |X_n - X_(n-1)|` for `n = 1, 2, ..`, with `X_0 = x0` at all times.
    pub history: Vec<f64>,
    pub converged: bool,
}

impl PicardState {
    /// Ratios of successive sup-distances.
    pub fn ratios(&self) -> Vec<f64> {
        self.history.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Picard iteration on a fixed noise realization.
///
/// Iterate `n` builds `v_n` as the heat semigroup acting on `x0` plus the
/// Green's-function convolutions of `f(X_(n-1))` and of `chi(X_(n-1))`
/// against the noise, step by step:
/// `v(t_(k+1)) = E(dt) [v(t_k) + dt f + chi xi sqrt(dt/dx)]`, with `E` the
/// exact semigroup on the grid's eigenbasis. Then `Xi_n` solves the
/// obstacle problem driven by `v_n` and `X_n = Xi_n + v_n`.
#[allow(clippy::too_many_arguments)]
pub fn picard_solve(
    x0: &[f64],
    walls: &WallPair,
    coeff: &CoefficientSpec,
    spec: &SingularDriftSpec,
    grid: &Grid,
    stream: &mut NoiseStream,
    max_iter: usize,
    tol: f64,
) -> Result<(SolutionPath, PicardState)> {
    if max_iter == 0 {
        return Err(Error::Config("max_iter must be positive".into()));
    }
    check_initial(x0, walls, grid, false, true)?;
    let drift = effective_drift(spec, grid, Mode::Reflected);
    drift.validate()?;
    let seed = SeedInfo {
        master_seed: stream.master_seed(),
        path_index: stream.path_index(),
    };
    let (nt, n, dt) = (grid.nt, grid.nx, grid.dt);
    let mut noise = Field::zeros(nt, n);
    for k in 0..nt {
        stream.fill_normals(noise.row_mut(k));
    }
    let scale = (dt / grid.dx).sqrt();
    let propagator = SpectralPropagator::new(grid, dt);
    let mut prev = Field::from_fn(nt + 1, n, |_, i| x0[i]);
    let mut history = Vec::new();
    let mut last = None;
    let mut converged = false;
    let mut tmp = vec![0.0; n];
    for _ in 0..max_iter {
        let mut v = Field::zeros(nt + 1, n);
        v.row_mut(0).copy_from_slice(x0);
        for k in 0..nt {
            let t = grid.time(k);
            for i in 0..n {
                let (u, x) = (prev.get(k, i), grid.x[i]);
                tmp[i] = v.get(k, i) + dt * coeff.f.eval(x, t, u) + coeff.chi.eval(x, t, u) * noise.get(k, i) * scale;
            }
            propagator.apply(&tmp, v.row_mut(k + 1));
        }
        let sol = solve_obstacle(&v, walls, &drift, grid)?;
        let d = sol.x.sup_distance(&prev);
        history.push(d);
        prev = sol.x.clone();
        last = Some((v, sol));
        if d < tol {
            converged = true;
            break;
        }
    }
    let (v, sol) = last.expect("at least one iteration");
    let state = PicardState {
        iteration: history.len(),
        v,
        xi: sol.xi,
        x: sol.x.clone(),
        history,
        converged,
    };
    let path = SolutionPath {
        grid: grid.clone(),
        x: sol.x,
        ledger: sol.ledger,
        config: PathConfig {
            mode: Mode::Reflected,
            coeff: *coeff,
            drift,
        },
        seed: Some(seed),
        stop_step: None,
    };
    Ok((path, state))
}

/// Largest weak-form defect over the recorded times:
/// `|(X(t), psi) - (X0, psi) - int (X, psi'') - int (f, psi) - int (g, psi)
///  - sum psi chi dW - sum psi (Upsilon - Gamma)|`.
///
/// Lebesgue integrals use the trapezoid rule in time, the noise term the
/// left-point (Ito) sum, `psi''` the centered difference with the domain's
/// boundary closure. `include_ledger = false` drops the reflection term.
pub fn weak_form_residual(
    path: &SolutionPath,
    psi: &[f64],
    noise: &Field,
    walls: &WallPair,
    include_ledger: bool,
) -> Result<f64> {
    let grid = &path.grid;
    let n = grid.nx;
    if psi.len() != n {
        return Err(Error::Config(format!("test function has {} values, grid has {n} nodes", psi.len())));
    }
    let steps = path.steps();
    if noise.cells() != n || noise.steps() + 1 < steps {
        return Err(Error::Config("noise record does not cover the path".into()));
    }
    let psi_xx = grid.laplacian(psi);
    let (f, chi) = (&path.config.coeff.f, &path.config.coeff.chi);
    let drift = &path.config.drift;
    let dt = grid.dt;
    let dw_scale = (dt * grid.dx).sqrt();
    let integrand = |k: usize| -> f64 {
        let t = grid.time(k);
        let (l1, l2) = (walls.lower(k), walls.upper(k));
        let row = path.x.row(k);
        let mut s = 0.0;
        for i in 0..n {
            let u = row[i];
            let g = if drift.is_zero() { 0.0 } else { drift.value_and_slope(u, l1[i], l2[i]).0 };
            s += u * psi_xx[i] + (f.eval(grid.x[i], t, u) + g) * psi[i];
        }
        s * grid.dx
    };
    let initial = grid.inner(path.x.row(0), psi);
    let mut accumulated = 0.0;
    let mut worst: f64 = 0.0;
    let mut left = integrand(0);
    for k in 0..steps - 1 {
        let right = integrand(k + 1);
        accumulated += 0.5 * dt * (left + right);
        left = right;
        let t = grid.time(k);
        let row = path.x.row(k);
        let xi = noise.row(k);
        for i in 0..n {
            if !chi.is_zero() {
                accumulated += psi[i] * chi.eval(grid.x[i], t, row[i]) * xi[i] * dw_scale;
            }
            if include_ledger {
                accumulated += psi[i] * (path.ledger.upsilon.get(k + 1, i) - path.ledger.gamma.get(k + 1, i));
            }
        }
        let lhs = grid.inner(path.x.row(k + 1), psi) - initial;
        worst = worst.max((lhs - accumulated).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::Coefficient;
    use crate::greens::{heat_convolve, KernelConfig};
    use crate::grid::{make_grid, DomainKind};
    use crate::noise::derive_stream;
    use std::f64::consts::PI;

    fn no_coeff() -> CoefficientSpec {
        CoefficientSpec::default()
    }

    #[test]
    fn equilibrium_step() {
        let g = make_grid(DomainKind::Circle, 16, 1.0, 100).unwrap();
        let w = WallPair::constant(-1.0, 1.0, &g).unwrap();
        let out = step_reflected(&[0.0; 16], 0, &w, &no_coeff(), &SingularDriftSpec::zero(), &[0.0; 16], &g).unwrap();
        assert_eq!(out.state, vec![0.0; 16]);
        assert!(out.upsilon.iter().chain(&out.gamma).all(|m| *m == 0.0));
    }

    #[test]
    fn forced_breach_hits_upper_wall() {
        let g = make_grid(DomainKind::Circle, 16, 1.0, 100).unwrap();
        let w = WallPair::constant(-0.1, 0.1, &g).unwrap();
        let coeff = CoefficientSpec::new(Coefficient::Constant { value: 100.0 }, Coefficient::Zero);
        let out = step_reflected(&[0.0; 16], 0, &w, &coeff, &SingularDriftSpec::zero(), &[0.0; 16], &g).unwrap();
        for i in 0..16 {
            assert_eq!(out.state[i], 0.1);
            assert_eq!(out.upsilon[i], 0.0);
            let expected = (100.0 * g.dt - 0.1) * g.dx;
            assert!((out.gamma[i] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn step_is_linear_in_noise() {
        let g = make_grid(DomainKind::IntervalDirichlet, 31, 1.0, 100).unwrap();
        let w = WallPair::constant(-1e9, 1e9, &g).unwrap();
        let chi = 0.7;
        let coeff = CoefficientSpec::new(Coefficient::Zero, Coefficient::Constant { value: chi });
        let x0: Vec<f64> = g.x.iter().map(|x| (PI * x).sin()).collect();
        let xi: Vec<f64> = (0..g.nx).map(|i| ((i * 37) % 11) as f64 / 5.0 - 1.0).collect();
        let spec = SingularDriftSpec::zero();
        let a = step_reflected(&x0, 0, &w, &coeff, &spec, &xi, &g).unwrap().state;
        let b = step_reflected(&x0, 0, &w, &coeff, &spec, &vec![0.0; g.nx], &g).unwrap().state;
        let mut image: Vec<f64> = xi.iter().map(|v| chi * v * (g.dt / g.dx).sqrt()).collect();
        ImplicitHeat::new(&g, g.dt).solve_in_place(&mut image);
        for i in 0..g.nx {
            assert!((a[i] - b[i] - image[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_heat_matches_kernel() {
        let g = make_grid(DomainKind::IntervalDirichlet, 127, 0.01, 1000).unwrap();
        let w = WallPair::constant(-1.0, 1.0, &g).unwrap();
        let x0: Vec<f64> = g.x.iter().map(|x| 0.5 * (PI * x).sin() + 0.2 * (3.0 * PI * x).sin()).collect();
        let path = simulate_reflected(&x0, &w, &no_coeff(), &SingularDriftSpec::zero(), &g, &mut derive_stream(1, 0)).unwrap();
        let exact = heat_convolve(&x0, 0.01, &g, &KernelConfig::default()).unwrap();
        let err = path.x.row(g.nt).iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-3, "{err}");
        assert!(path.ledger.is_empty());
    }

    #[test]
    fn reflected_paths_stay_between_walls() {
        let g = make_grid(DomainKind::Circle, 32, 0.5, 2000).unwrap();
        let w = WallPair::constant(-1.0, 1.0, &g).unwrap();
        let coeff = CoefficientSpec::new(Coefficient::Zero, Coefficient::Constant { value: 1.0 });
        let spec = SingularDriftSpec::symmetric(1.0, 2.0, 0.0);
        for p in 0..4 {
            let path = simulate_reflected(&[0.0; 32], &w, &coeff, &spec, &g, &mut derive_stream(3, p)).unwrap();
            assert!(path.x.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
            assert!(path.ledger.is_valid());
            let (r1, r2) = crate::obstacle::complementarity_residual(&path.x, &w, &path.ledger);
            assert_eq!((r1, r2), (0.0, 0.0));
        }
    }

    #[test]
    fn driftless_clipped_equals_far_reflected() {
        let g = make_grid(DomainKind::Circle, 32, 0.2, 500).unwrap();
        let w = WallPair::constant(-1e9, 1e9, &g).unwrap();
        let coeff = CoefficientSpec::new(Coefficient::Sine { amp: 0.3 }, Coefficient::Constant { value: 1.0 });
        let spec = SingularDriftSpec { floor_delta: 0.01, floor_delta_tilde: 0.01, ..Default::default() };
        let a = simulate_reflected(&[0.0; 32], &w, &coeff, &spec, &g, &mut derive_stream(9, 2)).unwrap();
        let b = simulate_clipped(&[0.0; 32], &w, &coeff, &spec, &g, &mut derive_stream(9, 2)).unwrap();
        assert_eq!(a.x, b.x);
        assert!(b.ledger.is_empty());
    }

    #[test]
    fn same_seed_same_path() {
        let g = make_grid(DomainKind::Circle, 16, 0.1, 200).unwrap();
        let w = WallPair::constant(-0.2, 0.2, &g).unwrap();
        let coeff = CoefficientSpec::new(Coefficient::Zero, Coefficient::Constant { value: 1.0 });
        let spec = SingularDriftSpec::symmetric(1.0, 1.0, 0.0);
        let a = simulate_reflected(&[0.0; 16], &w, &coeff, &spec, &g, &mut derive_stream(5, 1)).unwrap();
        let b = simulate_reflected(&[0.0; 16], &w, &coeff, &spec, &g, &mut derive_stream(5, 1)).unwrap();
        assert_eq!(a.x.as_slice(), b.x.as_slice());
        assert_eq!(a.ledger, b.ledger);
    }

    #[test]
    fn single_wall_repels_without_noise() {
        let g = make_grid(DomainKind::Circle, 16, 1.0, 1000).unwrap();
        let w = WallPair::constant(-1.0, 1.0, &g).unwrap();
        let spec = SingularDriftSpec { c1: 1.0, theta: 1.0, floor_delta: 1e-3, ..Default::default() };
        let path = simulate_single_wall(&[0.0; 16], &w, &no_coeff(), &spec, &g, &mut derive_stream(0, 0), 0.0).unwrap();
        assert_eq!(path.stop_step, None);
        let gaps: Vec<f64> = (0..path.steps()).map(|k| path.x.get(k, 0) + 1.0).collect();
        assert!(gaps.windows(2).all(|w| w[1] > w[0]));
        assert!(matches!(
            simulate_single_wall(&[-1.0; 16], &w, &no_coeff(), &spec, &g, &mut derive_stream(0, 0), 0.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn single_wall_stops_at_threshold() {
        let g = make_grid(DomainKind::Circle, 16, 1.0, 1000).unwrap();
        let w = WallPair::constant(-0.05, 1.0, &g).unwrap();
        let coeff = CoefficientSpec::new(Coefficient::Constant { value: -1.0 }, Coefficient::Zero);
        let path = simulate_single_wall(&[0.0; 16], &w, &coeff, &SingularDriftSpec::zero(), &g, &mut derive_stream(0, 0), 0.0).unwrap();
        let k = path.stop_step.unwrap();
        assert!((50..=51).contains(&k), "{k}");
        assert_eq!(path.steps(), k + 1);
    }

    #[test]
    fn reflected_lies_below_single_wall() {
        let g = make_grid(DomainKind::Circle, 32, 0.5, 2000).unwrap();
        let w = WallPair::constant(-0.3, 0.3, &g).unwrap();
        let coeff = CoefficientSpec::new(Coefficient::Zero, Coefficient::Constant { value: 1.0 });
        let spec = SingularDriftSpec::symmetric(0.5, 1.0, 0.0);
        for p in 0..5 {
            let x = simulate_reflected(&[0.0; 32], &w, &coeff, &spec, &g, &mut derive_stream(21, p)).unwrap();
            let v = simulate_single_wall(&[0.0; 32], &w, &coeff, &spec, &g, &mut derive_stream(21, p), 0.0).unwrap();
            let upto = v.stop_step.unwrap_or(g.nt + 1);
            for k in 0..upto.min(v.steps()) {
                for i in 0..g.nx {
                    assert!(x.x.get(k, i) <= v.x.get(k, i) + 1e-8);
                }
            }
        }
    }

    #[test]
    fn picard_without_feedback_converges_in_two() {
        let g = make_grid(DomainKind::IntervalDirichlet, 31, 0.05, 500).unwrap();
        let w = WallPair::constant(-1.0, 1.0, &g).unwrap();
        let coeff = CoefficientSpec::new(Coefficient::Constant { value: 0.5 }, Coefficient::Constant { value: 1.0 });
        let spec = SingularDriftSpec::symmetric(1.0, 1.0, 0.0);
        let (_, st) = picard_solve(&[0.0; 31], &w, &coeff, &spec, &g, &mut derive_stream(4, 0), 10, 1e-10).unwrap();
        assert!(st.converged);
        assert_eq!(st.iteration, 2);
        assert!(st.history[0] > 0.0);
    }

    #[test]
    fn weak_form_of_heat_path() {
        let g = make_grid(DomainKind::IntervalDirichlet, 127, 0.01, 1000).unwrap();
        let w = WallPair::constant(-1.0, 1.0, &g).unwrap();
        let x0: Vec<f64> = g.x.iter().map(|x| 0.5 * (PI * x).sin()).collect();
        let path = simulate_reflected(&x0, &w, &no_coeff(), &SingularDriftSpec::zero(), &g, &mut derive_stream(0, 0)).unwrap();
        let psi: Vec<f64> = g.x.iter().map(|x| (PI * x).sin()).collect();
        let noise = noise_record(0, 0, &g);
        let r = weak_form_residual(&path, &psi, &noise, &w, true).unwrap();
        assert!(r <= 1e-3, "{r}");
        assert!(weak_form_residual(&path, &psi[1..], &noise, &w, true).is_err());
    }

    #[test]
    fn weak_form_needs_the_ledger_under_contact() {
        let g = make_grid(DomainKind::Circle, 32, 0.1, 1000).unwrap();
        let w = WallPair::constant(-0.1, 0.1, &g).unwrap();
        let coeff = CoefficientSpec::new(Coefficient::SpaceSine { amp: 20.0, k: 1 }, Coefficient::Zero);
        let path = simulate_reflected(&[0.0; 32], &w, &coeff, &SingularDriftSpec::zero(), &g, &mut derive_stream(0, 0)).unwrap();
        assert!(!path.ledger.is_empty());
        let psi: Vec<f64> = g.x.iter().map(|x| (2.0 * PI * x).sin()).collect();
        let noise = noise_record(0, 0, &g);
        let with = weak_form_residual(&path, &psi, &noise, &w, true).unwrap();
        let without = weak_form_residual(&path, &psi, &noise, &w, false).unwrap();
        assert!(without >= 10.0 * with, "{without} vs {with}");
    }

    #[test]
    fn noise_record_matches_stream_consumption() {
        let g = make_grid(DomainKind::Circle, 8, 0.1, 5).unwrap();
        let rec = noise_record(11, 3, &g);
        let mut s = derive_stream(11, 3);
        for k in 0..5 {
            for i in 0..8 {
                assert_eq!(rec.get(k, i), s.next_normal());
            }
        }
    }
}
