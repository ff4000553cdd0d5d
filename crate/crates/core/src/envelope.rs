//! Restart-envelope study for the clipped-drift equation with a steep
//! exponent.
//!
//! The horizon is cut into blocks of length `beta = 2^(-theta-2) delta^(1+theta)`.
//! At the start of every block the state restarts at `Lambda1 + delta` and the
//! block's stochastic convolution `N` restarts at zero. Each block records the
//! range of `w - Lambda1` and whether `sup_x |N| / (t - t_block)^kappa` ever
//! exceeded `C delta^(1 - kappa (1 + theta)) 2^(-3 - 2 theta + kappa (theta + 2))`.

use serde::Serialize;

use crate::coeff::CoefficientSpec;
use crate::drift::SingularDriftSpec;
use crate::error::{Error, Result};
use crate::grid::{make_grid, Grid};
use crate::implicit::ImplicitHeat;
use crate::noise::NoiseStream;
use crate::spde::{Mode, Stepper};
use crate::walls::WallPair;

/// Minimum number of time steps per block.
pub const MIN_STEPS_PER_BLOCK: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeConfig {
    pub delta: f64,
    /// Exponent of the time normalization; `None` picks the midpoint of
    /// `(1/(theta+1), 1/4)`.
    pub kappa: Option<f64>,
    pub threshold_const: f64,
}

impl EnvelopeConfig {
    pub fn new(delta: f64) -> Self {
        EnvelopeConfig {
            delta,
            kappa: None,
            threshold_const: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub delta: f64,
    pub theta: f64,
    pub beta: f64,
    pub kappa: f64,
    pub threshold: f64,
    pub blocks: usize,
    pub steps_per_block: usize,
    pub dt: f64,
    /// `blocks * beta`, never above the requested horizon.
    pub t_final: f64,
    pub block_min: Vec<f64>,
    pub block_max: Vec<f64>,
    pub block_exceeds: Vec<bool>,
    /// Blocks where `w - Lambda1` left `[delta/2, 2 delta]`.
    pub corridor_exit_fraction: f64,
    pub exceed_fraction: f64,
}

pub fn block_length(theta: f64, delta: f64) -> f64 {
    2f64.powf(-theta - 2.0) * delta.powf(1.0 + theta)
}

pub fn noise_threshold(theta: f64, delta: f64, kappa: f64, c: f64) -> f64 {
    c * delta.powf(1.0 - kappa * (1.0 + theta)) * 2f64.powf(-3.0 - 2.0 * theta + kappa * (theta + 2.0))
}

/// Runs the block-restart construction over `grid`'s horizon, cut down to a
/// whole number of blocks. Steps are refined so that every block holds an
/// integer number of at least [`MIN_STEPS_PER_BLOCK`] steps no longer than
/// `grid.dt`. Both drift floors are set to `delta / 2`.
pub fn simulate_restart_envelope(
    walls: &WallPair,
    coeff: &CoefficientSpec,
    spec: &SingularDriftSpec,
    cfg: &EnvelopeConfig,
    grid: &Grid,
    stream: &mut NoiseStream,
) -> Result<EnvelopeReport> {
    let (theta, delta) = (spec.theta, cfg.delta);
    if !(theta > 3.0) {
        return Err(Error::Config(format!("the restart envelope needs theta > 3, got {theta}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!("delta must be positive, got {delta}")));
    }
    if !(cfg.threshold_const > 0.0) {
        return Err(Error::Config("threshold constant must be positive".into()));
    }
    let lo_k = 1.0 / (theta + 1.0);
    let kappa = cfg.kappa.unwrap_or(0.5 * (lo_k + 0.25));
    if !(kappa > lo_k && kappa < 0.25) {
        return Err(Error::Config(format!("kappa must lie in ({lo_k}, 0.25), got {kappa}")));
    }
    let beta = block_length(theta, delta);
    if beta < MIN_STEPS_PER_BLOCK as f64 * grid.dt * (1.0 - 1e-9) {
        return Err(Error::Resolution(format!(
            "block length {beta:.3e} is shorter than {MIN_STEPS_PER_BLOCK} steps of dt = {:.3e}; use dt <= {:.3e}",
            grid.dt,
            beta / MIN_STEPS_PER_BLOCK as f64
        )));
    }
    let blocks = (grid.t_final / beta).floor() as usize;
    if blocks == 0 {
        return Err(Error::Config(format!("horizon {} is shorter than one block {beta:.3e}", grid.t_final)));
    }
    let m = ((beta / grid.dt * (1.0 - 1e-9)).ceil() as usize).max(MIN_STEPS_PER_BLOCK);
    let inner = make_grid(grid.kind, grid.nx, blocks as f64 * beta, blocks * m)?;
    let walls = walls.resample(&inner)?;
    let drift = SingularDriftSpec {
        floor_delta: 0.5 * delta,
        floor_delta_tilde: 0.5 * delta,
        ..*spec
    };
    let stepper = Stepper::new(&inner, &walls, coeff, &drift, Mode::Clipped)?;
    let heat = ImplicitHeat::new(&inner, inner.dt);
    let threshold = noise_threshold(theta, delta, kappa, cfg.threshold_const);
    let scale = (inner.dt / inner.dx).sqrt();

    let n = inner.nx;
    let mut w = vec![0.0; n];
    let mut conv = vec![0.0; n];
    let mut xi = vec![0.0; n];
    let (mut up, mut down) = (vec![0.0; n], vec![0.0; n]);
    let mut block_min = Vec::with_capacity(blocks);
    let mut block_max = Vec::with_capacity(blocks);
    let mut block_exceeds = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let k0 = b * m;
        for (i, v) in w.iter_mut().enumerate() {
            *v = walls.lower(k0)[i] + delta;
        }
        conv.iter_mut().for_each(|v| *v = 0.0);
        let (mut lo, mut hi, mut exceeded) = (delta, delta, false);
        for j in 0..m {
            let k = k0 + j;
            stream.fill_normals(&mut xi);
            let t = inner.time(k);
            for i in 0..n {
                conv[i] += coeff.chi.eval(inner.x[i], t, w[i]) * xi[i] * scale;
            }
            heat.solve_in_place(&mut conv);
            stepper.advance(k, &mut w, &xi, &mut up, &mut down)?;
            let l1 = walls.lower(k + 1);
            for i in 0..n {
                let gap = w[i] - l1[i];
                lo = lo.min(gap);
                hi = hi.max(gap);
            }
            let sup = conv.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if sup / ((j + 1) as f64 * inner.dt).powf(kappa) > threshold {
                exceeded = true;
            }
        }
        block_min.push(lo);
        block_max.push(hi);
        block_exceeds.push(exceeded);
    }
    let exits = block_min
        .iter()
        .zip(&block_max)
        .filter(|(lo, hi)| **lo < 0.5 * delta || **hi > 2.0 * delta)
        .count();
    let exceeds = block_exceeds.iter().filter(|e| **e).count();
    Ok(EnvelopeReport {
        delta,
        theta,
        beta,
        kappa,
        threshold,
        blocks,
        steps_per_block: m,
        dt: inner.dt,
        t_final: inner.t_final,
        block_min,
        block_max,
        block_exceeds,
        corridor_exit_fraction: exits as f64 / blocks as f64,
        exceed_fraction: exceeds as f64 / blocks as f64,
    })
}
