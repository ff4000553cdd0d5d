//! Singular wall drifts, their regularizations and the pointwise implicit
//! resolve used by every integrator.

use serde::Serialize;

use crate::error::{Error, Result};

/// Strengths, exponent and regularizers of the two-sided singular drift
/// `c1 / (eps1 + gap1)^theta - c2 / (eps2 + gap2)^theta` with
/// `gap1 = max(u - l1, floor_delta, 0)` and `gap2 = max(l2 - u, floor_delta_tilde, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularDriftSpec {
    pub c1: f64,
    pub c2: f64,
    pub theta: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// Lower clip of the distance to the lower wall (`delta / 2`).
    pub floor_delta: f64,
    /// Lower clip of the distance to the upper wall.
    pub floor_delta_tilde: f64,
}

impl Default for SingularDriftSpec {
    fn default() -> Self {
        SingularDriftSpec {
            c1: 0.0,
            c2: 0.0,
            theta: 0.0,
            eps1: 0.0,
            eps2: 0.0,
            floor_delta: 0.0,
            floor_delta_tilde: 0.0,
        }
    }
}

impl SingularDriftSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn symmetric(c: f64, theta: f64, floor: f64) -> Self {
        SingularDriftSpec {
            c1: c,
            c2: c,
            theta,
            floor_delta: floor,
            floor_delta_tilde: floor,
            ..Self::default()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.c1 == 0.0 && self.c2 == 0.0
    }

    /// Rejects negative parameters and unregularized singular terms.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("c1", self.c1),
            ("c2", self.c2),
            ("theta", self.theta),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("floor_delta", self.floor_delta),
            ("floor_delta_tilde", self.floor_delta_tilde),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.theta > 0.0 {
            if self.c1 > 0.0 && self.eps1 == 0.0 && self.floor_delta == 0.0 {
                return Err(Error::Config("c1 > 0 needs eps1 > 0 or floor_delta > 0".into()));
            }
            if self.c2 > 0.0 && self.eps2 == 0.0 && self.floor_delta_tilde == 0.0 {
                return Err(Error::Config("c2 > 0 needs eps2 > 0 or floor_delta_tilde > 0".into()));
            }
        }
        Ok(())
    }

    /// Copy with both floors raised to at least `floor`.
    pub fn with_min_floor(&self, floor: f64) -> Self {
        SingularDriftSpec {
            floor_delta: self.floor_delta.max(floor),
            floor_delta_tilde: self.floor_delta_tilde.max(floor),
            ..*self
        }
    }

    /// Copy with the upper-wall term removed.
    pub fn lower_only(&self) -> Self {
        SingularDriftSpec { c2: 0.0, ..*self }
    }

    #[inline]
    fn pow_neg(&self, base: f64) -> f64 {
        let th = self.theta;
        if th == th.trunc() && th <= 8.0 {
            base.powi(-(th as i32))
        } else {
            base.powf(-th)
        }
    }

    /// Drift and its derivative in `u`; the derivative is `<= 0`.
    #[inline]
    pub fn value_and_slope(&self, u: f64, l1: f64, l2: f64) -> (f64, f64) {
        let mut value = 0.0;
        let mut slope = 0.0;
        if self.c1 > 0.0 {
            let raw = u - l1;
            let gap = raw.max(self.floor_delta).max(0.0);
            let base = self.eps1 + gap;
            let term = self.c1 * self.pow_neg(base);
            value += term;
            if raw > self.floor_delta && raw > 0.0 {
                slope -= self.theta * term / base;
            }
        }
        if self.c2 > 0.0 {
            let raw = l2 - u;
            let gap = raw.max(self.floor_delta_tilde).max(0.0);
            let base = self.eps2 + gap;
            let term = self.c2 * self.pow_neg(base);
            value -= term;
            if raw > self.floor_delta_tilde && raw > 0.0 {
                slope -= self.theta * term / base;
            }
        }
        (value, slope)
    }
}

/// `c1/(eps1 + max(u - l1, floor))^theta - c2/(eps2 + max(l2 - u, floor~))^theta`.
///
/// Distances below zero count as zero, so the function is defined and
/// nonincreasing in `u` on the whole line whenever it is regularized.
pub fn regularized_drift(u: f64, l1: f64, l2: f64, spec: &SingularDriftSpec) -> Result<f64> {
    if spec.theta > 0.0 {
        if spec.c1 > 0.0 && spec.eps1 + (u - l1).max(spec.floor_delta) <= 0.0 {
            return Err(Error::Singularity { gap: u - l1 });
        }
        if spec.c2 > 0.0 && spec.eps2 + (l2 - u).max(spec.floor_delta_tilde) <= 0.0 {
            return Err(Error::Singularity { gap: l2 - u });
        }
    }
    Ok(spec.value_and_slope(u, l1, l2).0)
}

/// A state-dependent drift that is nonincreasing in the state at every node.
///
/// `value_and_slope` returns `(g, dg/du)` at node `cell`, step `step`, for
/// state `u` between walls `l1`, `l2`.
pub trait MonotoneDrift: Sync {
    fn value_and_slope(&self, cell: usize, step: usize, u: f64, l1: f64, l2: f64) -> (f64, f64);

    /// The drift vanishes identically.
    fn is_zero(&self) -> bool {
        false
    }
}

impl MonotoneDrift for SingularDriftSpec {
    #[inline]
    fn value_and_slope(&self, _cell: usize, _step: usize, u: f64, l1: f64, l2: f64) -> (f64, f64) {
        SingularDriftSpec::value_and_slope(self, u, l1, l2)
    }

    fn is_zero(&self) -> bool {
        SingularDriftSpec::is_zero(self)
    }
}

/// `g(u) + offset`: a drift shifted by a constant.
#[derive(Debug, Clone, Copy)]
pub struct Shifted<D> {
    pub drift: D,
    pub offset: f64,
}

impl<D: MonotoneDrift> MonotoneDrift for Shifted<D> {
    fn value_and_slope(&self, cell: usize, step: usize, u: f64, l1: f64, l2: f64) -> (f64, f64) {
        let (v, s) = self.drift.value_and_slope(cell, step, u, l1, l2);
        (v + self.offset, s)
    }
}

/// Penalty `rho (l1 - u)^+ - rho (u - l2)^+` added to a drift.
#[derive(Clone, Copy)]
pub struct Penalized<'a> {
    pub drift: &'a dyn MonotoneDrift,
    pub rho: f64,
}

impl MonotoneDrift for Penalized<'_> {
    #[inline]
    fn value_and_slope(&self, cell: usize, step: usize, u: f64, l1: f64, l2: f64) -> (f64, f64) {
        let (mut v, mut s) = self.drift.value_and_slope(cell, step, u, l1, l2);
        if u < l1 {
            v += self.rho * (l1 - u);
            s -= self.rho;
        } else if u > l2 {
            v -= self.rho * (u - l2);
            s -= self.rho;
        }
        (v, s)
    }

    fn is_zero(&self) -> bool {
        self.rho == 0.0 && self.drift.is_zero()
    }
}

/// Solves `u - dt h(u) = r` for nonincreasing `h` given as `(h, h')`.
///
/// The root is bracketed by `r` and `r + dt h(r)`; Newton steps that leave
/// the bracket are replaced by bisection. Returns `r` unchanged when
/// `h(r) = 0` and `h'(r) = 0`.
#[inline]
pub fn resolve_implicit(r: f64, dt: f64, h: impl Fn(f64) -> (f64, f64)) -> f64 {
    let (h0, s0) = h(r);
    if h0 == 0.0 && s0 == 0.0 {
        return r;
    }
    let other = r + dt * h0;
    if !other.is_finite() {
        return other;
    }
    let (mut lo, mut hi) = if other >= r { (r, other) } else { (other, r) };
    // Newton from r: phi(r) = -dt h0.
    let mut u = r + dt * h0 / (1.0 - dt * s0);
    if !(u >= lo && u <= hi) {
        u = 0.5 * (lo + hi);
    }
    for _ in 0..100 {
        let (hv, hs) = h(u);
        let phi = u - dt * hv - r;
        if phi == 0.0 {
            return u;
        }
        if phi > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let mut next = u - phi / (1.0 - dt * hs);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let tol = 4.0 * f64::EPSILON * next.abs().max(1.0);
        if (next - u).abs() <= tol || hi - lo <= tol {
            return next;
        }
        u = next;
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn centered_state_balances() {
        let spec = SingularDriftSpec {
            c1: 1.0,
            c2: 1.0,
            theta: 2.0,
            ..Default::default()
        };
        assert_eq!(regularized_drift(0.0, -0.5, 0.5, &spec).unwrap(), 0.0);
    }

    #[test]
    fn regularized_arithmetic() {
        let spec = SingularDriftSpec {
            c1: 1.0,
            theta: 1.0,
            eps1: 0.1,
            ..Default::default()
        };
        let v = regularized_drift(0.4, 0.0, 10.0, &spec).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn unregularized_contact_is_singular() {
        let spec = SingularDriftSpec {
            c1: 1.0,
            theta: 1.0,
            ..Default::default()
        };
        assert!(matches!(regularized_drift(0.0, 0.0, 1.0, &spec), Err(Error::Singularity { .. })));
        assert!(spec.validate().is_err());
        assert!(spec.with_min_floor(0.01).validate().is_ok());
    }

    #[test]
    fn theta_zero_is_constant() {
        let spec = SingularDriftSpec {
            c1: 2.0,
            c2: 0.5,
            ..Default::default()
        };
        assert_eq!(regularized_drift(0.3, -1.0, 1.0, &spec).unwrap(), 1.5);
    }

    fn spec_strategy() -> impl Strategy<Value = SingularDriftSpec> {
        (0.0f64..3.0, 0.0f64..3.0, 0.0f64..6.0, 0.0f64..0.2, 0.0f64..0.2, 1e-4f64..0.1).prop_map(
            |(c1, c2, theta, eps1, eps2, floor)| SingularDriftSpec {
                c1,
                c2,
                theta,
                eps1,
                eps2,
                floor_delta: floor,
                floor_delta_tilde: floor,
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn drift_is_nonincreasing(spec in spec_strategy(), a in -1.5f64..1.5, b in -1.5f64..1.5) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let g_lo = regularized_drift(lo, -1.0, 1.0, &spec).unwrap();
            let g_hi = regularized_drift(hi, -1.0, 1.0, &spec).unwrap();
            prop_assert!(g_hi <= g_lo + 1e-12 * g_lo.abs().max(1.0));
            prop_assert!(spec.value_and_slope(lo, -1.0, 1.0).1 <= 0.0);
        }

        #[test]
        fn implicit_resolve_solves_the_equation(spec in spec_strategy(), r in -1.2f64..1.2, dt in 1e-6f64..1e-2) {
            let u = resolve_implicit(r, dt, |u| spec.value_and_slope(u, -1.0, 1.0));
            let g = spec.value_and_slope(u, -1.0, 1.0).0;
            let resid = (u - dt * g - r).abs();
            prop_assert!(resid <= 1e-10 * (1.0 + (dt * g).abs()), "resid {resid}");
        }

        #[test]
        fn implicit_resolve_is_monotone(spec in spec_strategy(), a in -1.2f64..1.2, b in -1.2f64..1.2, dt in 1e-6f64..1e-2) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let f = |r: f64| resolve_implicit(r, dt, |u| spec.value_and_slope(u, -1.0, 1.0));
            let (ul, uh) = (f(lo), f(hi));
            prop_assert!(ul <= uh + 1e-12);
            prop_assert!((uh - ul) <= (hi - lo) + 1e-12);
        }
    }

    #[test]
    fn zero_drift_resolve_is_identity() {
        let spec = SingularDriftSpec::zero();
        for r in [-3.7, 0.0, 1e-300, 2.5] {
            assert_eq!(resolve_implicit(r, 0.1, |u| spec.value_and_slope(u, -1.0, 1.0)), r);
        }
    }

    #[test]
    fn steep_drift_keeps_state_off_the_wall() {
        let spec = SingularDriftSpec::symmetric(1.0, 4.0, 1e-3);
        let u = resolve_implicit(-1.05, 1e-4, |u| spec.value_and_slope(u, -1.0, 1.0));
        assert!(u > -1.0, "{u}");
    }

    #[test]
    fn penalty_pushes_back() {
        let zero = SingularDriftSpec::zero();
        let p = Penalized { drift: &zero, rho: 100.0 };
        assert_eq!(p.value_and_slope(0, 0, 1.5, -1.0, 1.0), (-50.0, -100.0));
        assert_eq!(p.value_and_slope(0, 0, -1.5, -1.0, 1.0), (50.0, -100.0));
        assert_eq!(p.value_and_slope(0, 0, 0.0, -1.0, 1.0), (0.0, 0.0));
    }
}
