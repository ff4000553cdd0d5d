//! Heat kernels on the line, the circle and the Dirichlet interval.
//!
//! The circle kernel wraps the Gaussian over integer shifts and the Dirichlet
//! kernel is built by the method of images with period 2. Both image sums are
//! truncated at `m_max = ceil(sqrt(4 t ln(1/tol))) + 2`, past which the
//! Gaussian tail is below the relative tolerance.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{wrapped_distance, DomainKind, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelConfig {
    /// Relative truncation tolerance for image and wrap sums.
    pub image_tolerance: f64,
    /// Nodes per geometric time panel in the kernel-power integral.
    pub quadrature_n: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            image_tolerance: 1e-12,
            quadrature_n: 64,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.image_tolerance > 0.0 && self.image_tolerance <= 1e-6) {
            return Err(Error::Config(format!(
                "image_tolerance must lie in (0, 1e-6], got {}",
                self.image_tolerance
            )));
        }
        if self.quadrature_n < 16 {
            return Err(Error::Config(format!(
                "quadrature_n must be at least 16, got {}",
                self.quadrature_n
            )));
        }
        Ok(())
    }

    pub fn image_count(&self, t: f64) -> i64 {
        (4.0 * t * (1.0 / self.image_tolerance).ln()).sqrt().ceil() as i64 + 2
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("kernel time must be positive, got {t}")))
    }
}

#[inline]
fn gauss_unchecked(t: f64, x: f64) -> f64 {
    (4.0 * PI * t).powf(-0.5) * (-x * x / (4.0 * t)).exp()
}

/// Heat kernel on the real line, `(4 pi t)^(-1/2) exp(-x^2 / 4t)`.
pub fn gauss_kernel(t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    Ok(gauss_unchecked(t, x))
}

/// Wrapped kernel as a function of the circle distance `d`.
#[inline]
pub(crate) fn circle_kernel_at(t: f64, d: f64, m_max: i64) -> f64 {
    let norm = (4.0 * PI * t).powf(-0.5);
    let inv = 1.0 / (4.0 * t);
    let mut sum = 0.0;
    for m in -m_max..=m_max {
        let z = d + m as f64;
        sum += (-z * z * inv).exp();
    }
    norm * sum
}

#[inline]
pub(crate) fn dirichlet_kernel_at(t: f64, x: f64, y: f64, m_max: i64) -> f64 {
    let norm = (4.0 * PI * t).powf(-0.5);
    let inv = 1.0 / (4.0 * t);
    let mut sum = 0.0;
    for m in -m_max..=m_max {
        let shift = 2.0 * m as f64;
        let a = x - y + shift;
        let b = x + y + shift;
        sum += (-a * a * inv).exp() - (-b * b * inv).exp();
    }
    (norm * sum).max(0.0)
}

/// Heat kernel on the unit circle, `sum_m G(t, rho(x,y) + m)`.
pub fn circle_green(t: f64, x: f64, y: f64, cfg: &KernelConfig) -> Result<f64> {
    check_time(t)?;
    let d = crate::grid::circle_distance(x, y)?;
    Ok(circle_kernel_at(t, d, cfg.image_count(t)))
}

/// Dirichlet heat kernel on `[0, 1]` by the method of images.
pub fn dirichlet_green(t: f64, x: f64, y: f64, cfg: &KernelConfig) -> Result<f64> {
    check_time(t)?;
    for p in [x, y] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("position {p} outside [0,1]")));
        }
    }
    Ok(dirichlet_kernel_at(t, x, y, cfg.image_count(t)))
}

/// Kernel of `grid`'s domain between two nodes.
pub fn domain_green(grid: &Grid, t: f64, x: f64, y: f64, cfg: &KernelConfig) -> Result<f64> {
    match grid.kind {
        DomainKind::Circle => circle_green(t, x, y, cfg),
        DomainKind::IntervalDirichlet => dirichlet_green(t, x, y, cfg),
    }
}

/// Trapezoid quadrature of `int G_t(x, y) field(y) dy` at every node.
pub fn heat_convolve(field: &[f64], t: f64, grid: &Grid, cfg: &KernelConfig) -> Result<Vec<f64>> {
    check_time(t)?;
    if field.len() != grid.nx {
        return Err(Error::Config(format!(
            "field has {} values, grid has {} nodes",
            field.len(),
            grid.nx
        )));
    }
    let m_max = cfg.image_count(t);
    let n = grid.nx;
    let out = match grid.kind {
        DomainKind::Circle => {
            let row: Vec<f64> = (0..n)
                .map(|lag| circle_kernel_at(t, wrapped_distance(lag as f64 * grid.dx), m_max) * grid.dx)
                .collect();
            (0..n)
                .map(|i| (0..n).map(|j| row[(i + n - j) % n] * field[j]).sum())
                .collect()
        }
        DomainKind::IntervalDirichlet => (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| dirichlet_kernel_at(t, grid.x[i], grid.x[j], m_max) * field[j])
                    .sum::<f64>()
                    * grid.dx
            })
            .collect(),
    };
    Ok(out)
}

/// Quadrature estimate of `int_0^t int_S |G(t - s, x, y)|^a dy ds` on the circle.
///
/// The substitution `u = t - s` moves the singularity to `u = 0`. Time nodes
/// are geometric: panels `[u_min 2^k, u_min 2^(k+1)]` carry `quadrature_n`
/// Simpson nodes in `ln u`. Below `u_min` the wrap terms are below machine
/// precision and the closed form of `int (G_line)^a` is used. In space the
/// periodic trapezoid on `grid`'s nodes is refined by an integer factor until
/// the kernel width holds at least eight nodes.
pub fn green_power_integral(a: f64, t: f64, grid: &Grid, cfg: &KernelConfig) -> Result<f64> {
    if !(a > 1.0 && a < 3.0) {
        return Err(Error::Domain(format!("exponent a must lie in (1,3), got {a}")));
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain(format!("t must lie in (0,1], got {t}")));
    }
    cfg.validate()?;

    let u_floor = 1e-7_f64;
    let panels = ((t / u_floor).log2().ceil().max(0.0)) as i32;
    let u_min = t * 2f64.powi(-panels);
    let tail_power = (3.0 - a) / 2.0;
    let tail = a.powf(-0.5) * (4.0 * PI).powf((1.0 - a) / 2.0) * u_min.powf(tail_power) / tail_power;

    let n = cfg.quadrature_n + cfg.quadrature_n % 2;
    let h = 2f64.ln() / n as f64;
    let mut total = tail;
    for p in 0..panels {
        let s0 = (u_min * 2f64.powi(p)).ln();
        let mut panel = 0.0;
        for j in 0..=n {
            let u = (s0 + j as f64 * h).exp();
            let w = if j == 0 || j == n {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            panel += w * spatial_power_integral(a, u, grid, cfg) * u;
        }
        total += panel * h / 3.0;
    }
    Ok(total)
}

/// `int_S G(u, 0, y)^a dy` by a refined periodic trapezoid.
fn spatial_power_integral(a: f64, u: f64, grid: &Grid, cfg: &KernelConfig) -> f64 {
    const NODES_PER_WIDTH: f64 = 8.0;
    let width = (2.0 * u).sqrt();
    let refine = ((grid.dx * NODES_PER_WIDTH / width).ceil() as usize).max(1);
    let total_nodes = grid.cells() * refine;
    let h = 1.0 / total_nodes as f64;
    let m_max = cfg.image_count(u);
    let window = 14.0 * width;
    let sum: f64 = if window < 0.5 {
        let half = (window / h).ceil() as i64;
        (-half..=half)
            .map(|j| circle_kernel_at(u, (j as f64 * h).abs(), m_max).powf(a))
            .sum()
    } else {
        (0..total_nodes)
            .map(|j| circle_kernel_at(u, wrapped_distance(j as f64 * h), m_max).powf(a))
            .sum()
    };
    sum * h
}

/// Least-squares slope of `ln value` against `ln t`.
pub fn fit_power_law(ts: &[f64], values: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Nodal propagator of the exact heat semigroup restricted to the grid's
/// discrete eigenbasis: sine modes `1..=nx` on the interval, Fourier modes up
/// to Nyquist on the circle.
///
/// For kernels resolved by the grid this coincides with `dx * G_tau(x_i, x_j)`;
/// unlike the nodal quadrature it composes exactly, `E(s) E(t) = E(s + t)`,
/// which keeps long stochastic convolutions mass-consistent.
#[derive(Debug, Clone)]
pub struct SpectralPropagator {
    kind: DomainKind,
    n: usize,
    /// Circle: one circulant row. Interval: dense row-major matrix.
    entries: Vec<f64>,
}

impl SpectralPropagator {
    pub fn new(grid: &Grid, tau: f64) -> Self {
        let n = grid.nx;
        match grid.kind {
            DomainKind::Circle => {
                let kmax = (n - 1) / 2;
                let row = (0..n)
                    .map(|lag| {
                        let d = lag as f64 / n as f64;
                        let mut s = 1.0;
                        for k in 1..=kmax {
                            let kf = k as f64;
                            s += 2.0 * (-4.0 * PI * PI * kf * kf * tau).exp() * (2.0 * PI * kf * d).cos();
                        }
                        if n % 2 == 0 {
                            let kf = (n / 2) as f64;
                            s += (-4.0 * PI * PI * kf * kf * tau).exp() * (2.0 * PI * kf * d).cos();
                        }
                        s * grid.dx
                    })
                    .collect();
                SpectralPropagator {
                    kind: grid.kind,
                    n,
                    entries: row,
                }
            }
            DomainKind::IntervalDirichlet => {
                let mut entries = vec![0.0; n * n];
                for k in 1..=n {
                    let kf = k as f64;
                    let decay = 2.0 * grid.dx * (-PI * PI * kf * kf * tau).exp();
                    let mode: Vec<f64> = grid.x.iter().map(|x| (kf * PI * x).sin()).collect();
                    for i in 0..n {
                        let ci = decay * mode[i];
                        for j in 0..n {
                            entries[i * n + j] += ci * mode[j];
                        }
                    }
                }
                SpectralPropagator {
                    kind: grid.kind,
                    n,
                    entries,
                }
            }
        }
    }

    pub fn apply(&self, input: &[f64], out: &mut [f64]) {
        let n = self.n;
        match self.kind {
            DomainKind::Circle => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (j, v) in input.iter().enumerate() {
                        s += self.entries[(i + n - j) % n] * v;
                    }
                    *o = s;
                }
            }
            DomainKind::IntervalDirichlet => {
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &self.entries[i * n..(i + 1) * n];
                    *o = row.iter().zip(input).map(|(a, b)| a * b).sum();
                }
            }
        }
    }
}

/// Results of the kernel checks reported by the command line.
#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub circle_mass_errors: Vec<(f64, f64)>,
    pub dirichlet_mass: Vec<(f64, f64)>,
    pub chapman_kolmogorov_circle: f64,
    pub chapman_kolmogorov_dirichlet: f64,
    pub dirichlet_eigen_error: f64,
    pub exponents: Vec<ExponentFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentFit {
    pub a: f64,
    pub times: Vec<f64>,
    pub fitted_coarse: f64,
    pub fitted_fine: f64,
    pub nx_coarse: usize,
    pub nx_fine: usize,
    /// `(3a - 1)/2`, the exponent of the upper bound being tested.
    pub bound_exponent: f64,
    /// `(3 - a)/2`, the exponent of the direct scaling computation.
    pub scaling_exponent: f64,
}

impl ExponentFit {
    pub fn stability(&self) -> f64 {
        (self.fitted_coarse - self.fitted_fine).abs()
    }
}

/// Sup-norm of the Chapman-Kolmogorov defect over node pairs.
pub fn chapman_kolmogorov_error(grid: &Grid, s: f64, t: f64, cfg: &KernelConfig) -> Result<f64> {
    let n = grid.nx;
    let k = |tau: f64, i: usize, j: usize| domain_green(grid, tau, grid.x[i], grid.x[j], cfg);
    let mut ks = vec![0.0; n * n];
    let mut kt = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            ks[i * n + j] = k(s, i, j)?;
            kt[i * n + j] = k(t, i, j)?;
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let composed: f64 = (0..n).map(|z| ks[i * n + z] * kt[z * n + j]).sum::<f64>() * grid.dx;
            worst = worst.max((composed - k(s + t, i, j)?).abs());
        }
    }
    Ok(worst)
}

pub fn power_law_fit(a: f64, times: &[f64], coarse: &Grid, fine: &Grid, cfg: &KernelConfig) -> Result<ExponentFit> {
    let eval = |g: &Grid| -> Result<Vec<f64>> {
        times.iter().map(|&t| green_power_integral(a, t, g, cfg)).collect()
    };
    let vc = eval(coarse)?;
    let vf = eval(fine)?;
    Ok(ExponentFit {
        a,
        times: times.to_vec(),
        fitted_coarse: fit_power_law(times, &vc),
        fitted_fine: fit_power_law(times, &vf),
        nx_coarse: coarse.nx,
        nx_fine: fine.nx,
        bound_exponent: (3.0 * a - 1.0) / 2.0,
        scaling_exponent: (3.0 - a) / 2.0,
    })
}

/// Log-spaced sample times in `[lo, hi]`.
pub fn log_times(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Mass, Chapman-Kolmogorov, eigenfunction and exponent checks in one report.
pub fn kernel_report(a_values: &[f64], nx: usize, cfg: &KernelConfig) -> Result<KernelReport> {
    use crate::grid::make_grid;
    cfg.validate()?;
    let circle = make_grid(DomainKind::Circle, nx, 1.0, 1)?;
    let interval = make_grid(DomainKind::IntervalDirichlet, nx - 1, 1.0, 1)?;

    let mut circle_mass_errors = Vec::new();
    for t in [1e-4, 1e-2, 1.0] {
        let ones = vec![1.0; circle.nx];
        let conv = heat_convolve(&ones, t, &circle, cfg)?;
        let err = conv.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
        circle_mass_errors.push((t, err));
    }
    let mut dirichlet_mass = Vec::new();
    for t in [1e-5, 1e-3, 1e-1] {
        let mid = interval.nx / 2;
        let mass: f64 = interval
            .x
            .iter()
            .map(|&y| dirichlet_kernel_at(t, interval.x[mid], y, cfg.image_count(t)))
            .sum::<f64>()
            * interval.dx;
        dirichlet_mass.push((t, mass));
    }
    let ck_circle = chapman_kolmogorov_error(&circle, 0.01, 0.01, cfg)?;
    let ck_dirichlet = chapman_kolmogorov_error(&interval, 0.01, 0.01, cfg)?;

    let t_eig = 0.05;
    let x0: Vec<f64> = interval.x.iter().map(|x| (PI * x).sin()).collect();
    let evolved = heat_convolve(&x0, t_eig, &interval, cfg)?;
    let decay = (-PI * PI * t_eig).exp();
    let dirichlet_eigen_error = evolved
        .iter()
        .zip(&x0)
        .fold(0.0f64, |m, (e, s)| m.max((e - decay * s).abs()));

    let coarse = make_grid(DomainKind::Circle, nx / 2, 1.0, 1)?;
    let times = log_times(1e-3, 1e-1, 9);
    let exponents = a_values
        .iter()
        .map(|&a| power_law_fit(a, &times, &coarse, &circle, cfg))
        .collect::<Result<Vec<_>>>()?;

    Ok(KernelReport {
        circle_mass_errors,
        dirichlet_mass,
        chapman_kolmogorov_circle: ck_circle,
        chapman_kolmogorov_dirichlet: ck_dirichlet,
        dirichlet_eigen_error,
        exponents,
    })
}
