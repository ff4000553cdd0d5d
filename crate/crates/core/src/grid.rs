//! Space-time grids on the Dirichlet interval and on the circle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// `[0, 1]` with `X(0,t) = X(1,t) = 0`; only interior nodes are stored.
    IntervalDirichlet,
    /// `[0, 1)` with the endpoints identified.
    Circle,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::IntervalDirichlet => "interval",
            DomainKind::Circle => "circle",
        }
    }
}

impl std::str::FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interval" | "interval_dirichlet" => Ok(DomainKind::IntervalDirichlet),
            "circle" => Ok(DomainKind::Circle),
            other => Err(Error::Config(format!("unknown domain '{other}'"))),
        }
    }
}

/// Uniform space-time grid. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub kind: DomainKind,
    /// Number of stored spatial nodes.
    pub nx: usize,
    pub dx: f64,
    pub t_final: f64,
    pub nt: usize,
    pub dt: f64,
    pub x: Vec<f64>,
}

/// Smallest number of cells spanning `[0, 1]`.
const MIN_CELLS: usize = 4;

/// Builds a grid. For the circle `dx = 1/nx` and the nodes are
/// `0, dx, .., 1 - dx`; for the interval `dx = 1/(nx + 1)` and only the `nx`
/// interior nodes are kept.
///
/// At least four cells must span the unit interval, so the interval accepts
/// `nx >= 3` interior nodes and the circle `nx >= 4`.
pub fn make_grid(kind: DomainKind, nx: usize, t_final: f64, nt: usize) -> Result<Grid> {
    if nx == 0 || nt == 0 {
        return Err(Error::Config(format!("nx and nt must be positive (nx={nx}, nt={nt})")));
    }
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::Config(format!("T must be positive and finite (T={t_final})")));
    }
    let cells = match kind {
        DomainKind::Circle => nx,
        DomainKind::IntervalDirichlet => nx + 1,
    };
    if cells < MIN_CELLS {
        return Err(Error::Config(format!(
            "grid too coarse: {cells} cells span [0,1], need at least {MIN_CELLS}"
        )));
    }
    let dx = 1.0 / cells as f64;
    let x = match kind {
        DomainKind::Circle => (0..nx).map(|i| i as f64 * dx).collect(),
        DomainKind::IntervalDirichlet => (1..=nx).map(|i| i as f64 * dx).collect(),
    };
    Ok(Grid {
        kind,
        nx,
        dx,
        t_final,
        nt,
        dt: t_final / nt as f64,
        x,
    })
}

impl Grid {
    /// Number of cells spanning `[0, 1]`.
    pub fn cells(&self) -> usize {
        match self.kind {
            DomainKind::Circle => self.nx,
            DomainKind::IntervalDirichlet => self.nx + 1,
        }
    }

    pub fn time(&self, step: usize) -> f64 {
        if step == self.nt {
            self.t_final
        } else {
            step as f64 * self.dt
        }
    }

    /// Same spatial layout with a different time axis.
    pub fn with_time(&self, t_final: f64, nt: usize) -> Result<Grid> {
        make_grid(self.kind, self.nx, t_final, nt)
    }

    /// Trapezoid inner product of two nodal fields over the domain.
    /// Interval endpoints carry the Dirichlet value 0 and drop out.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>() * self.dx
    }

    /// Centered second difference with the domain's boundary closure.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let n = self.nx;
        let h2 = self.dx * self.dx;
        (0..n)
            .map(|i| {
                let (left, right) = match self.kind {
                    DomainKind::Circle => (u[(i + n - 1) % n], u[(i + 1) % n]),
                    DomainKind::IntervalDirichlet => (
                        if i == 0 { 0.0 } else { u[i - 1] },
                        if i + 1 == n { 0.0 } else { u[i + 1] },
                    ),
                };
                (left - 2.0 * u[i] + right) / h2
            })
            .collect()
    }
}

/// Geodesic distance on the unit circle, `min_k |x - y + k|`.
pub fn circle_distance(x: f64, y: f64) -> Result<f64> {
    for p in [x, y] {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain(format!("position {p} outside [0,1)")));
        }
    }
    Ok(wrapped_distance(x - y))
}

/// Distance to the nearest integer of an arbitrary displacement; always in `[0, 0.5]`.
pub(crate) fn wrapped_distance(d: f64) -> f64 {
    let r = d - d.round();
    r.abs().min(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn circle_grid_of_four() {
        let g = make_grid(DomainKind::Circle, 4, 1.0, 10).unwrap();
        assert_eq!(g.dx, 0.25);
        assert_eq!(g.x, vec![0.0, 0.25, 0.5, 0.75]);
        assert!((g.dt - 0.1).abs() < 1e-15);
        assert!((g.dx * g.cells() as f64 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interval_grid_keeps_interior_nodes() {
        let g = make_grid(DomainKind::IntervalDirichlet, 3, 1.0, 10).unwrap();
        assert_eq!(g.dx, 0.25);
        assert_eq!(g.x, vec![0.25, 0.5, 0.75]);
        assert!((g.dx * g.cells() as f64 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(matches!(
            make_grid(DomainKind::Circle, 0, 1.0, 10),
            Err(Error::Config(_))
        ));
        assert!(make_grid(DomainKind::Circle, 3, 1.0, 10).is_err());
        assert!(make_grid(DomainKind::Circle, 8, 0.0, 10).is_err());
        assert!(make_grid(DomainKind::Circle, 8, 1.0, 0).is_err());
        assert!(make_grid(DomainKind::Circle, 8, -1.0, 10).is_err());
    }

    #[test]
    fn final_time_is_exact() {
        let g = make_grid(DomainKind::Circle, 8, 0.3, 7).unwrap();
        assert_eq!(g.time(7), 0.3);
    }

    #[test]
    fn distance_examples() {
        assert!((circle_distance(0.1, 0.9).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(circle_distance(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(circle_distance(0.0, 0.5).unwrap(), 0.5);
        assert!(circle_distance(1.0, 0.2).is_err());
        assert!(circle_distance(0.2, -0.1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn distance_is_a_shift_invariant_metric(
            x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.0f64..1.0, s in 0.0f64..1.0
        ) {
            let d = |a: f64, b: f64| circle_distance(a, b).unwrap();
            let dxy = d(x, y);
            prop_assert!((0.0..=0.5).contains(&dxy));
            prop_assert_eq!(dxy, d(y, x));
            prop_assert!(dxy <= d(x, z) + d(z, y) + 1e-15);
            let shift = |a: f64| { let r = (a + s).fract(); if r >= 1.0 { 0.0 } else { r } };
            prop_assert!((d(shift(x), shift(y)) - dxy).abs() < 1e-12);
        }
    }
}
