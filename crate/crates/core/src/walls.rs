//! Wall pairs `Lambda1 < Lambda2` sampled on a grid, their forcings and the
//! admissibility report.
//!
//! The forcing of a wall is `f = dLambda/dt - d2Lambda/dx2`. Registry walls
//! carry it in closed form; tabulated walls get second-order finite
//! differences.

use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{DomainKind, Grid};

/// Built-in wall families and tabulated input.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WallSpec {
    /// `Lambda1 = lower`, `Lambda2 = upper`.
    Constant { lower: f64, upper: f64 },
    /// The gap opens at rate `rate` in the middle of the domain:
    /// `Lambda1 = lower - rate t sin(pi x)`, `Lambda2 = upper + rate t sin(pi x)`.
    GapGrowth { lower: f64, upper: f64, rate: f64 },
    /// Both walls shifted by `amp sin(2 pi k x)`, constant in time.
    Sinusoidal { lower: f64, upper: f64, amp: f64, k: u32 },
    /// Both walls move inward at `rate`. Shrinks the gap, so it fails the
    /// nondecreasing-gap condition and needs the override.
    Squeeze { lower: f64, upper: f64, rate: f64 },
    Table(WallTable),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Tabulated,
}

impl WallSpec {
    pub fn provenance(&self) -> Provenance {
        match self {
            WallSpec::Table(_) => Provenance::Tabulated,
            _ => Provenance::Analytic,
        }
    }

    pub fn is_time_constant(&self) -> bool {
        match self {
            WallSpec::Constant { .. } | WallSpec::Sinusoidal { .. } => true,
            WallSpec::GapGrowth { rate, .. } | WallSpec::Squeeze { rate, .. } => *rate == 0.0,
            WallSpec::Table(t) => t.times.len() == 1,
        }
    }

    /// `(Lambda1, Lambda2)` at `(x, t)`.
    pub fn eval(&self, x: f64, t: f64) -> (f64, f64) {
        match *self {
            WallSpec::Constant { lower, upper } => (lower, upper),
            WallSpec::GapGrowth { lower, upper, rate } => {
                let s = rate * t * (PI * x).sin();
                (lower - s, upper + s)
            }
            WallSpec::Sinusoidal { lower, upper, amp, k } => {
                let s = amp * (2.0 * PI * k as f64 * x).sin();
                (lower + s, upper + s)
            }
            WallSpec::Squeeze { lower, upper, rate } => (lower + rate * t, upper - rate * t),
            WallSpec::Table(ref table) => table.interpolate(x, t),
        }
    }

    /// Closed-form `(f1, f2)`; `None` for tabulated walls.
    pub fn forcing(&self, x: f64, t: f64) -> Option<(f64, f64)> {
        match *self {
            WallSpec::Constant { .. } => Some((0.0, 0.0)),
            WallSpec::GapGrowth { rate, .. } => {
                let s = (PI * x).sin();
                let f = rate * s + rate * t * PI * PI * s;
                Some((-f, f))
            }
            WallSpec::Sinusoidal { amp, k, .. } => {
                let w = 2.0 * PI * k as f64;
                let f = w * w * amp * (w * x).sin();
                Some((f, f))
            }
            WallSpec::Squeeze { rate, .. } => Some((rate, -rate)),
            WallSpec::Table(_) => None,
        }
    }
}

/// Wall values on a tensor table of times and positions, read from CSV with
/// columns `t,x,lambda1,lambda2`. Interpolation is bilinear.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WallTable {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    /// Time-major `lambda1[it * xs.len() + ix]`.
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
}

fn bracket(axis: &[f64], v: f64) -> (usize, f64) {
    if axis.len() == 1 {
        return (0, 0.0);
    }
    let j = match axis.partition_point(|a| *a <= v) {
        0 => 0,
        p if p >= axis.len() => axis.len() - 2,
        p => p - 1,
    };
    let w = ((v - axis[j]) / (axis[j + 1] - axis[j])).clamp(0.0, 1.0);
    (j, w)
}

impl WallTable {
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let expected = ["t", "x", "lambda1", "lambda2"];
        if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h.trim() != e) {
            return Err(Error::Config(format!(
                "wall table header must be t,x,lambda1,lambda2, got {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut rows: Vec<[f64; 4]> = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let mut row = [0.0; 4];
            for (k, cell) in record.iter().enumerate().take(4) {
                row[k] = cell.trim().parse().map_err(|_| {
                    Error::Config(format!("wall table row {}: bad number '{cell}'", line + 2))
                })?;
            }
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    /// Builds a table from `(t, x, lambda1, lambda2)` rows covering a full tensor grid.
    pub fn from_rows(rows: &[[f64; 4]]) -> Result<Self> {
        let mut times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let mut xs: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        for axis in [&mut times, &mut xs] {
            axis.sort_by(|a, b| a.total_cmp(b));
            axis.dedup();
        }
        if xs.len() < 2 {
            return Err(Error::Config("wall table needs at least two x values".into()));
        }
        if xs[0] > 0.0 || *xs.last().unwrap() < 1.0 {
            return Err(Error::Config("wall table must cover x in [0, 1]".into()));
        }
        let (nt, nx) = (times.len(), xs.len());
        if rows.len() != nt * nx {
            return Err(Error::Config(format!(
                "wall table is not a tensor grid: {} rows for {nt} times x {nx} positions",
                rows.len()
            )));
        }
        let mut lambda1 = vec![f64::NAN; nt * nx];
        let mut lambda2 = vec![f64::NAN; nt * nx];
        for r in rows {
            let it = times.binary_search_by(|a| a.total_cmp(&r[0])).unwrap();
            let ix = xs.binary_search_by(|a| a.total_cmp(&r[1])).unwrap();
            lambda1[it * nx + ix] = r[2];
            lambda2[it * nx + ix] = r[3];
        }
        if lambda1.iter().chain(&lambda2).any(|v| !v.is_finite()) {
            return Err(Error::Config("wall table has duplicate or non-finite entries".into()));
        }
        Ok(WallTable {
            times,
            xs,
            lambda1,
            lambda2,
        })
    }

    pub fn interpolate(&self, x: f64, t: f64) -> (f64, f64) {
        let nx = self.xs.len();
        let (it, wt) = bracket(&self.times, t);
        let (ix, wx) = bracket(&self.xs, x);
        let it1 = (it + 1).min(self.times.len() - 1);
        let at = |v: &[f64]| {
            let lo = v[it * nx + ix] * (1.0 - wx) + v[it * nx + ix + 1] * wx;
            let hi = v[it1 * nx + ix] * (1.0 - wx) + v[it1 * nx + ix + 1] * wx;
            lo * (1.0 - wt) + hi * wt
        };
        (at(&self.lambda1), at(&self.lambda2))
    }
}

/// A wall pair sampled at every node and step of a grid.
#[derive(Debug, Clone, Serialize)]
pub struct WallPair {
    pub spec: WallSpec,
    pub lambda1: Field,
    pub lambda2: Field,
    pub forcing1: Field,
    pub forcing2: Field,
    pub provenance: Provenance,
    /// One stored row serves every step.
    time_constant: bool,
    grid_kind: DomainKind,
}

impl WallPair {
    pub fn sample(spec: WallSpec, grid: &Grid) -> Result<Self> {
        let time_constant = spec.is_time_constant();
        let rows = if time_constant { 1 } else { grid.nt + 1 };
        let mut lambda1 = Field::zeros(rows, grid.nx);
        let mut lambda2 = Field::zeros(rows, grid.nx);
        for k in 0..rows {
            let t = grid.time(k);
            for (i, &x) in grid.x.iter().enumerate() {
                let (a, b) = spec.eval(x, t);
                lambda1.set(k, i, a);
                lambda2.set(k, i, b);
            }
        }
        if !(lambda1.is_finite() && lambda2.is_finite()) {
            return Err(Error::Config("wall values are not finite".into()));
        }
        let (forcing1, forcing2) = match spec.forcing(0.0, 0.0) {
            Some(_) => {
                let f1 = Field::from_fn(rows, grid.nx, |k, i| spec.forcing(grid.x[i], grid.time(k)).unwrap().0);
                let f2 = Field::from_fn(rows, grid.nx, |k, i| spec.forcing(grid.x[i], grid.time(k)).unwrap().1);
                (f1, f2)
            }
            None => (
                finite_difference_forcing(&lambda1, grid, |x, t| spec.eval(x, t).0),
                finite_difference_forcing(&lambda2, grid, |x, t| spec.eval(x, t).1),
            ),
        };
        Ok(WallPair {
            provenance: spec.provenance(),
            spec,
            lambda1,
            lambda2,
            forcing1,
            forcing2,
            time_constant,
            grid_kind: grid.kind,
        })
    }

    pub fn constant(lower: f64, upper: f64, grid: &Grid) -> Result<Self> {
        Self::sample(WallSpec::Constant { lower, upper }, grid)
    }

    /// The same walls sampled on another grid.
    pub fn resample(&self, grid: &Grid) -> Result<Self> {
        Self::sample(self.spec.clone(), grid)
    }

    #[inline]
    pub fn lower(&self, step: usize) -> &[f64] {
        self.lambda1.row(if self.time_constant { 0 } else { step })
    }

    #[inline]
    pub fn upper(&self, step: usize) -> &[f64] {
        self.lambda2.row(if self.time_constant { 0 } else { step })
    }

    pub fn is_time_constant(&self) -> bool {
        self.time_constant
    }

    pub fn domain(&self) -> DomainKind {
        self.grid_kind
    }

    pub fn cells(&self) -> usize {
        self.lambda1.cells()
    }
}

/// `dLambda/dt - d2Lambda/dx2` by centered differences on the grid, with
/// one-sided time differences at the first and last step. Boundary values in
/// space come from the wall function itself.
fn finite_difference_forcing(lambda: &Field, grid: &Grid, wall: impl Fn(f64, f64) -> f64) -> Field {
    let rows = lambda.steps();
    let n = grid.nx;
    Field::from_fn(rows, n, |k, i| {
        let dt_term = if rows == 1 {
            0.0
        } else if k == 0 {
            (lambda.get(1, i) - lambda.get(0, i)) / grid.dt
        } else if k + 1 == rows {
            (lambda.get(k, i) - lambda.get(k - 1, i)) / grid.dt
        } else {
            (lambda.get(k + 1, i) - lambda.get(k - 1, i)) / (2.0 * grid.dt)
        };
        let t = grid.time(k);
        let (left, right) = match grid.kind {
            DomainKind::Circle => (lambda.get(k, (i + n - 1) % n), lambda.get(k, (i + 1) % n)),
            DomainKind::IntervalDirichlet => (
                if i == 0 { wall(0.0, t) } else { lambda.get(k, i - 1) },
                if i + 1 == n { wall(1.0, t) } else { lambda.get(k, i + 1) },
            ),
        };
        dt_term - (left - 2.0 * lambda.get(k, i) + right) / (grid.dx * grid.dx)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub step: usize,
    pub cell: Option<usize>,
    pub x: f64,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub description: &'static str,
    pub passed: bool,
    /// A failure of this condition blocks simulation.
    pub fatal: bool,
    pub first_violation: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    /// No fatal condition failed.
    pub fn is_admissible(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.fatal)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// `Err(Config)` naming the first fatal failure.
    pub fn require_admissible(&self) -> Result<()> {
        match self.checks.iter().find(|c| !c.passed && c.fatal) {
            None => Ok(()),
            Some(c) => Err(Error::Config(format!(
                "walls violate {} ({}) at {:?}",
                c.name, c.description, c.first_violation
            ))),
        }
    }
}

/// Tolerance for the discrete time-derivative conditions.
const RATE_TOL: f64 = 1e-9;

/// Checks the wall conditions on the sampled grid.
///
/// * H0 (interval only): `Lambda1 <= 0 <= Lambda2` at `x = 0` and `x = 1` for
///   every step, so the walls are compatible with zero Dirichlet data.
/// * H1: `Lambda1 < Lambda2` at every node. Fatal.
/// * H2: the forcings are finite with finite discrete L2 norm.
/// * H3: the wall values at `x = 0` and `x = 1` are constant in time.
/// * H4: the gap `Lambda2 - Lambda1` is nondecreasing in time at every node.
///   Fatal unless `allow_gap_decrease` is set.
///
/// On the circle the same checks are reported as H'1 to H'4.
pub fn validate_walls(walls: &WallPair, grid: &Grid, allow_gap_decrease: bool) -> ValidationReport {
    let circle = grid.kind == DomainKind::Circle;
    let name = |plain: &'static str, primed: &'static str| if circle { primed } else { plain };
    let rows = walls.lambda1.steps();
    let node_violation = |k: usize, i: usize, value: f64| Violation {
        step: k,
        cell: Some(i),
        x: grid.x[i],
        t: grid.time(k),
        value,
    };
    let mut checks = Vec::new();

    if !circle {
        let mut first = None;
        'h0: for k in 0..=grid.nt {
            let t = grid.time(k);
            for x in [0.0, 1.0] {
                let (l1, l2) = walls.spec.eval(x, t);
                if l1 > 0.0 || l2 < 0.0 {
                    let value = if l1 > 0.0 { l1 } else { l2 };
                    first = Some(Violation { step: k, cell: None, x, t, value });
                    break 'h0;
                }
            }
            if walls.is_time_constant() {
                break;
            }
        }
        checks.push(ConditionCheck {
            name: "H0",
            description: "Lambda1 <= 0 <= Lambda2 at both endpoints",
            passed: first.is_none(),
            fatal: false,
            first_violation: first,
        });
    }

    let mut first = None;
    'h1: for k in 0..rows {
        for i in 0..grid.nx {
            let gap = walls.lambda2.get(k, i) - walls.lambda1.get(k, i);
            if !(gap > 0.0) {
                first = Some(node_violation(k, i, gap));
                break 'h1;
            }
        }
    }
    checks.push(ConditionCheck {
        name: name("H1", "H'1"),
        description: "Lambda1 < Lambda2 at every node",
        passed: first.is_none(),
        fatal: true,
        first_violation: first,
    });

    let mut first = None;
    let mut energy = 0.0;
    'h2: for k in 0..rows {
        for i in 0..grid.nx {
            let (a, b) = (walls.forcing1.get(k, i), walls.forcing2.get(k, i));
            if !(a.is_finite() && b.is_finite()) {
                first = Some(node_violation(k, i, if a.is_finite() { b } else { a }));
                break 'h2;
            }
            energy += (a * a + b * b) * grid.dx * grid.dt;
        }
    }
    if first.is_none() && !energy.is_finite() {
        first = Some(node_violation(0, 0, energy));
    }
    checks.push(ConditionCheck {
        name: name("H2", "H'2"),
        description: "wall forcings square integrable",
        passed: first.is_none(),
        fatal: false,
        first_violation: first,
    });

    let mut first = None;
    if !walls.is_time_constant() {
        'h3: for k in 0..grid.nt {
            for x in [0.0, 1.0] {
                let (a0, b0) = walls.spec.eval(x, grid.time(k));
                let (a1, b1) = walls.spec.eval(x, grid.time(k + 1));
                let rate = ((a1 - a0).abs()).max((b1 - b0).abs()) / grid.dt;
                if rate > RATE_TOL {
                    first = Some(Violation {
                        step: k,
                        cell: None,
                        x,
                        t: grid.time(k),
                        value: rate,
                    });
                    break 'h3;
                }
            }
        }
    }
    checks.push(ConditionCheck {
        name: name("H3", "H'3"),
        description: "endpoint wall values constant in time",
        passed: first.is_none(),
        fatal: false,
        first_violation: first,
    });

    let mut first = None;
    'h4: for k in 1..rows {
        for i in 0..grid.nx {
            let before = walls.lambda2.get(k - 1, i) - walls.lambda1.get(k - 1, i);
            let after = walls.lambda2.get(k, i) - walls.lambda1.get(k, i);
            let rate = (after - before) / grid.dt;
            if rate < -RATE_TOL {
                first = Some(node_violation(k, i, rate));
                break 'h4;
            }
        }
    }
    checks.push(ConditionCheck {
        name: name("H4", "H'4"),
        description: "gap Lambda2 - Lambda1 nondecreasing in time",
        passed: first.is_none(),
        fatal: !allow_gap_decrease,
        first_violation: first,
    });

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn interval() -> Grid {
        make_grid(DomainKind::IntervalDirichlet, 15, 1.0, 20).unwrap()
    }

    #[test]
    fn constant_walls_pass_everything() {
        let g = interval();
        let w = WallPair::constant(-1.0, 1.0, &g).unwrap();
        let r = validate_walls(&w, &g, false);
        assert!(r.all_passed(), "{r:?}");
        assert_eq!(r.checks.len(), 5);
    }

    #[test]
    fn touching_walls_fail_h1_at_first_node() {
        let g = interval();
        let w = WallPair::constant(0.0, 0.0, &g).unwrap();
        let r = validate_walls(&w, &g, false);
        let h1 = r.get("H1").unwrap();
        assert!(!h1.passed && h1.fatal);
        let v = h1.first_violation.as_ref().unwrap();
        assert_eq!((v.step, v.cell), (0, Some(0)));
        assert!(!r.is_admissible());
        assert!(r.require_admissible().is_err());
        for k in 0..w.lambda1.steps() {
            for i in 0..g.nx {
                assert!(w.upper(k)[i] - w.lower(k)[i] <= 0.0);
            }
        }
    }

    #[test]
    fn shrinking_gap_fails_h4_unless_overridden() {
        let g = interval();
        let rows: Vec<[f64; 4]> = [0.0, 1.0]
            .iter()
            .flat_map(|&t| [0.0, 1.0].map(|x| [t, x, -1.0, 1.0 - t]))
            .collect();
        let w = WallPair::sample(WallSpec::Table(WallTable::from_rows(&rows).unwrap()), &g).unwrap();
        let r = validate_walls(&w, &g, false);
        let h4 = r.get("H4").unwrap();
        assert!(!h4.passed && h4.fatal);
        assert_eq!(h4.first_violation.as_ref().unwrap().step, 1);
        let r = validate_walls(&w, &g, true);
        assert!(!r.get("H4").unwrap().passed);
        assert!(r.is_admissible());
    }

    #[test]
    fn squeeze_fails_h4_and_h3() {
        let g = interval();
        let w = WallPair::sample(WallSpec::Squeeze { lower: -1.0, upper: 1.0, rate: 0.5 }, &g).unwrap();
        let r = validate_walls(&w, &g, false);
        assert!(!r.get("H4").unwrap().passed);
        assert!(!r.get("H3").unwrap().passed);
    }

    #[test]
    fn h0_detects_positive_lower_wall_at_endpoint() {
        let g = interval();
        let w = WallPair::constant(0.2, 1.0, &g).unwrap();
        let r = validate_walls(&w, &g, false);
        let h0 = r.get("H0").unwrap();
        assert!(!h0.passed && !h0.fatal);
        assert_eq!(h0.first_violation.as_ref().unwrap().x, 0.0);
    }

    #[test]
    fn circle_uses_primed_names_and_skips_h0() {
        let g = make_grid(DomainKind::Circle, 16, 1.0, 10).unwrap();
        let w = WallPair::constant(0.2, 1.0, &g).unwrap();
        let r = validate_walls(&w, &g, false);
        assert!(r.get("H0").is_none());
        assert!(r.get("H'1").unwrap().passed);
        assert!(r.all_passed());
    }

    #[test]
    fn gap_growth_is_admissible_with_matching_forcing() {
        let g = make_grid(DomainKind::IntervalDirichlet, 63, 1.0, 400).unwrap();
        let spec = WallSpec::GapGrowth { lower: -1.0, upper: 1.0, rate: 0.5 };
        let w = WallPair::sample(spec.clone(), &g).unwrap();
        assert!(validate_walls(&w, &g, false).all_passed());
        let table_rows: Vec<[f64; 4]> = (0..=400)
            .flat_map(|k| {
                let t = g.time(k);
                let spec = spec.clone();
                (0..=64).map(move |j| {
                    let x = j as f64 / 64.0;
                    let (a, b) = spec.eval(x, t);
                    [t, x, a, b]
                })
            })
            .collect();
        let tab = WallPair::sample(WallSpec::Table(WallTable::from_rows(&table_rows).unwrap()), &g).unwrap();
        assert_eq!(tab.provenance, Provenance::Tabulated);
        let err = tab.forcing1.sup_distance(&w.forcing1);
        assert!(err < 0.02, "finite-difference forcing error {err}");
    }

    #[test]
    fn sinusoidal_forcing_matches_differences() {
        let g = make_grid(DomainKind::Circle, 128, 1.0, 10).unwrap();
        let spec = WallSpec::Sinusoidal { lower: -1.0, upper: 1.0, amp: 0.1, k: 2 };
        let w = WallPair::sample(spec, &g).unwrap();
        let fd = finite_difference_forcing(&w.lambda1, &g, |_, _| unreachable!());
        let rel = fd.sup_distance(&w.forcing1) / w.forcing1.sup_norm();
        assert!(rel < 1e-3, "{rel}");
    }

    #[test]
    fn table_interpolation_is_bilinear() {
        let rows = [
            [0.0, 0.0, -1.0, 1.0],
            [0.0, 1.0, -1.0, 3.0],
            [1.0, 0.0, -2.0, 1.0],
            [1.0, 1.0, -2.0, 3.0],
        ];
        let t = WallTable::from_rows(&rows).unwrap();
        let (a, b) = t.interpolate(0.25, 0.5);
        assert!((a + 1.5).abs() < 1e-15);
        assert!((b - 1.5).abs() < 1e-15);
        assert!(WallTable::from_rows(&rows[..3]).is_err());
    }

    #[test]
    fn table_reads_csv() {
        let dir = std::env::temp_dir().join(format!("walls-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("walls.csv");
        std::fs::write(&path, "t,x,lambda1,lambda2\n0,0,-1,1\n0,1,-1,1\n").unwrap();
        let t = WallTable::from_csv(&path).unwrap();
        assert_eq!(t.interpolate(0.3, 5.0), (-1.0, 1.0));
        std::fs::write(&path, "time,x,a,b\n0,0,-1,1\n").unwrap();
        assert!(WallTable::from_csv(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn resample_keeps_the_spec() {
        let g = interval();
        let w = WallPair::sample(WallSpec::GapGrowth { lower: -1.0, upper: 1.0, rate: 1.0 }, &g).unwrap();
        let fine = make_grid(DomainKind::IntervalDirichlet, 31, 1.0, 40).unwrap();
        let r = w.resample(&fine).unwrap();
        assert_eq!(r.lower(40).len(), 31);
        assert!((r.lower(40)[15] - (-2.0)).abs() < 1e-12);
    }
}
