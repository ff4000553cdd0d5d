//! Backward-Euler heat step `(I - dt * Lap_h) u = rhs` on a grid.
//!
//! The interval uses a tridiagonal (Thomas) factorization with zero Dirichlet
//! data; the circle uses the cyclic variant through Sherman-Morrison. The
//! factorization is computed once and reused for every step.

use crate::grid::{DomainKind, Grid};

#[derive(Debug, Clone)]
struct Thomas {
    off: f64,
    /// Modified super-diagonal c'.
    cp: Vec<f64>,
    /// Reciprocal pivots.
    inv_pivot: Vec<f64>,
}

impl Thomas {
    fn new(diag: &[f64], off: f64) -> Self {
        let n = diag.len();
        let mut cp = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_cp = 0.0;
        for i in 0..n {
            let pivot = diag[i] - if i > 0 { off * prev_cp } else { 0.0 };
            inv_pivot[i] = 1.0 / pivot;
            cp[i] = off * inv_pivot[i];
            prev_cp = cp[i];
        }
        Thomas { off, cp, inv_pivot }
    }

    fn solve(&self, d: &mut [f64]) {
        let n = d.len();
        d[0] *= self.inv_pivot[0];
        for i in 1..n {
            d[i] = (d[i] - self.off * d[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.cp[i] * d[i + 1];
        }
    }
}

#[derive(Debug, Clone)]
pub struct ImplicitHeat {
    kind: DomainKind,
    thomas: Thomas,
    /// Cyclic correction: solution of `T z = u` and the scalars of `v`.
    cyclic: Option<(Vec<f64>, f64, f64)>,
}

impl ImplicitHeat {
    pub fn new(grid: &Grid, dt: f64) -> Self {
        let n = grid.nx;
        let lam = dt / (grid.dx * grid.dx);
        let b = 1.0 + 2.0 * lam;
        let off = -lam;
        match grid.kind {
            DomainKind::IntervalDirichlet => ImplicitHeat {
                kind: grid.kind,
                thomas: Thomas::new(&vec![b; n], off),
                cyclic: None,
            },
            DomainKind::Circle => {
                let gamma = -b;
                let (alpha, beta) = (off, off);
                let mut diag = vec![b; n];
                diag[0] = b - gamma;
                diag[n - 1] = b - alpha * beta / gamma;
                let thomas = Thomas::new(&diag, off);
                let mut z = vec![0.0; n];
                z[0] = gamma;
                z[n - 1] = alpha;
                thomas.solve(&mut z);
                let v_last = beta / gamma;
                let denom = 1.0 + z[0] + v_last * z[n - 1];
                ImplicitHeat {
                    kind: grid.kind,
                    thomas,
                    cyclic: Some((z, v_last, denom)),
                }
            }
        }
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        self.thomas.solve(rhs);
        if let Some((z, v_last, denom)) = &self.cyclic {
            let n = rhs.len();
            let factor = (rhs[0] + v_last * rhs[n - 1]) / denom;
            for (r, zi) in rhs.iter_mut().zip(z) {
                *r -= factor * zi;
            }
        }
    }
}
