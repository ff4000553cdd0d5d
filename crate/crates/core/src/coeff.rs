//! Registry of drift `f` and noise-intensity `chi` coefficients.
//!
//! Every entry is globally Lipschitz in the state with linear growth, and
//! reports its constants so configurations can be checked before a run.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    Zero,
    Constant { value: f64 },
    /// `amp sin(u)`.
    Sine { amp: f64 },
    /// `a + b u`.
    Affine { a: f64, b: f64 },
    /// `base + amp sin(u)`.
    ShiftedSine { base: f64, amp: f64 },
    /// `amp sin(2 pi k x)`, independent of the state.
    SpaceSine { amp: f64, k: u32 },
}

impl Coefficient {
    #[inline]
    pub fn eval(&self, x: f64, _t: f64, u: f64) -> f64 {
        match *self {
            Coefficient::Zero => 0.0,
            Coefficient::Constant { value } => value,
            Coefficient::Sine { amp } => amp * u.sin(),
            Coefficient::Affine { a, b } => a + b * u,
            Coefficient::ShiftedSine { base, amp } => base + amp * u.sin(),
            Coefficient::SpaceSine { amp, k } => amp * (2.0 * PI * k as f64 * x).sin(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coefficient::Zero)
    }

    pub fn depends_on_state(&self) -> bool {
        match *self {
            Coefficient::Sine { amp } | Coefficient::ShiftedSine { amp, .. } => amp != 0.0,
            Coefficient::Affine { b, .. } => b != 0.0,
            _ => false,
        }
    }

    /// Lipschitz constant in the state.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Coefficient::Sine { amp } | Coefficient::ShiftedSine { amp, .. } => amp.abs(),
            Coefficient::Affine { b, .. } => b.abs(),
            _ => 0.0,
        }
    }

    /// `C` with `|coefficient| <= C (1 + |u|)`.
    pub fn growth(&self) -> f64 {
        match *self {
            Coefficient::Zero => 0.0,
            Coefficient::Constant { value } => value.abs(),
            Coefficient::Sine { amp } => amp.abs(),
            Coefficient::Affine { a, b } => a.abs().max(b.abs()),
            Coefficient::ShiftedSine { base, amp } => base.abs() + amp.abs(),
            Coefficient::SpaceSine { amp, .. } => amp.abs(),
        }
    }

    /// A lower bound of `|coefficient|` valid for every input, if positive.
    pub fn infimum(&self) -> Option<f64> {
        let m = match *self {
            Coefficient::Constant { value } => value.abs(),
            Coefficient::ShiftedSine { base, amp } => base.abs() - amp.abs(),
            _ => 0.0,
        };
        (m > 0.0).then_some(m)
    }

    /// Parses `zero`, `const:V`, `sine:A`, `affine:A,B`, `shifted_sine:B,A`
    /// or `space_sine:A,K`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), a.trim()),
            None => (s, ""),
        };
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad coefficient parameter '{p}' in '{s}'")))
                })
                .collect::<Result<_>>()?
        };
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("coefficient parameters must be finite in '{s}'")));
        }
        let arity = |n: usize| -> Result<()> {
            if nums.len() == n {
                Ok(())
            } else {
                Err(Error::Config(format!("coefficient '{name}' takes {n} parameter(s), got '{s}'")))
            }
        };
        let c = match name {
            "zero" => {
                arity(0)?;
                Coefficient::Zero
            }
            "const" | "constant" => {
                arity(1)?;
                Coefficient::Constant { value: nums[0] }
            }
            "sine" => {
                arity(1)?;
                Coefficient::Sine { amp: nums[0] }
            }
            "affine" => {
                arity(2)?;
                Coefficient::Affine { a: nums[0], b: nums[1] }
            }
            "shifted_sine" => {
                arity(2)?;
                Coefficient::ShiftedSine { base: nums[0], amp: nums[1] }
            }
            "space_sine" => {
                arity(2)?;
                if nums[1] < 0.0 || nums[1].fract() != 0.0 {
                    return Err(Error::Config(format!("space_sine wavenumber must be a nonnegative integer in '{s}'")));
                }
                Coefficient::SpaceSine { amp: nums[0], k: nums[1] as u32 }
            }
            other => return Err(Error::Config(format!("unknown coefficient '{other}'"))),
        };
        Ok(c)
    }

    /// Canonical text form, accepted by [`Coefficient::parse`].
    pub fn describe(&self) -> String {
        match *self {
            Coefficient::Zero => "zero".into(),
            Coefficient::Constant { value } => format!("const:{value}"),
            Coefficient::Sine { amp } => format!("sine:{amp}"),
            Coefficient::Affine { a, b } => format!("affine:{a},{b}"),
            Coefficient::ShiftedSine { base, amp } => format!("shifted_sine:{base},{amp}"),
            Coefficient::SpaceSine { amp, k } => format!("space_sine:{amp},{k}"),
        }
    }
}

/// The pair `(f, chi)` plus an optional required lower bound `|chi| >= c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientSpec {
    pub f: Coefficient,
    pub chi: Coefficient,
    pub chi_lower_bound: Option<f64>,
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec {
            f: Coefficient::Zero,
            chi: Coefficient::Zero,
            chi_lower_bound: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientReport {
    pub f_lipschitz: f64,
    pub chi_lipschitz: f64,
    /// `C` in `|f| + |chi| <= C (1 + sup |X|)`.
    pub growth: f64,
    pub lipschitz_note: String,
    /// Whether `|chi| >= chi_lower_bound` held on every sample; `None` if no bound was set.
    pub chi_bound_holds: Option<bool>,
}

impl CoefficientSpec {
    pub fn new(f: Coefficient, chi: Coefficient) -> Self {
        CoefficientSpec { f, chi, chi_lower_bound: None }
    }

    pub fn is_state_dependent(&self) -> bool {
        self.f.depends_on_state() || self.chi.depends_on_state()
    }

    /// Constants and the lower-bound check on a sample of grid nodes,
    /// times and states in `[-state_bound, state_bound]`.
    pub fn report(&self, grid: &Grid, state_bound: f64) -> CoefficientReport {
        let chi_bound_holds = self.chi_lower_bound.map(|c| {
            if let Some(inf) = self.chi.infimum() {
                if inf >= c {
                    return true;
                }
            }
            let states = 41;
            let times = [0.0, 0.5 * grid.t_final, grid.t_final];
            grid.x.iter().all(|&x| {
                times.iter().all(|&t| {
                    (0..states).all(|j| {
                        let u = -state_bound + 2.0 * state_bound * j as f64 / (states - 1) as f64;
                        self.chi.eval(x, t, u).abs() >= c
                    })
                })
            })
        });
        let (lf, lc) = (self.f.lipschitz(), self.chi.lipschitz());
        CoefficientReport {
            f_lipschitz: lf,
            chi_lipschitz: lc,
            growth: self.f.growth() + self.chi.growth(),
            lipschitz_note: format!(
                "f = {} (Lipschitz {lf}), chi = {} (Lipschitz {lc}); local in the state, hence Lipschitz and of linear growth in sup |X|",
                self.f.describe(),
                self.chi.describe()
            ),
            chi_bound_holds,
        }
    }

    pub fn validate(&self, grid: &Grid, state_bound: f64) -> Result<CoefficientReport> {
        if let Some(c) = self.chi_lower_bound {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("chi lower bound must be positive, got {c}")));
            }
        }
        let r = self.report(grid, state_bound);
        if r.chi_bound_holds == Some(false) {
            return Err(Error::Config(format!(
                "chi = {} does not stay above {} in absolute value",
                self.chi.describe(),
                self.chi_lower_bound.unwrap()
            )));
        }
        Ok(r)
    }
}
