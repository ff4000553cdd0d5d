//! Reproducible space-time white-noise streams.
//!
//! Every path owns a [`NoiseStream`] keyed on `(master_seed, path_index)`.
//! The generator is ChaCha8 with the master seed as key and the path index as
//! the 64-bit stream selector, so streams for distinct paths are disjoint
//! blocks of the same counter space and never overlap.
//!
//! The sampler only emits unit normals. Integrators scale a cell draw by
//! `sqrt(dt / dx)`, since the white-noise mass of one cell over one step has
//! variance `dx * dt`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::grid::Grid;

#[derive(Debug, Clone)]
pub struct NoiseStream {
    master_seed: u64,
    path_index: u64,
    rng: ChaCha8Rng,
}

/// Deterministic stream for one path.
pub fn derive_stream(master_seed: u64, path_index: u64) -> NoiseStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    NoiseStream {
        master_seed,
        path_index,
        rng,
    }
}

impl NoiseStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Fills `out` with iid N(0,1) draws in cell order.
    pub fn fill_normals(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.rng.sample(StandardNormal);
        }
    }
}

/// One unit normal per spatial node of `grid`; advances the stream.
pub fn sample_noise_field(stream: &mut NoiseStream, grid: &Grid) -> Vec<f64> {
    let mut out = vec![0.0; grid.nx];
    stream.fill_normals(&mut out);
    out
}
