use rspde::coeff::{Coefficient, CoefficientSpec};
use rspde::drift::SingularDriftSpec;
use rspde::envelope::{block_length, simulate_restart_envelope, EnvelopeConfig};
use rspde::greens::{green_power_integral, KernelConfig};
use rspde::hitting::{detect_contact, estimate_hitting_probability, min_gap_series, HittingConfig};
use rspde::noise::derive_stream;
use rspde::spde::{simulate_clipped, simulate_reflected, simulate_single_wall, InitialProfile, Mode};
use rspde::walls::{WallPair, WallSpec};
use rspde::{make_grid, DomainKind};

fn noise(chi: f64) -> CoefficientSpec {
    CoefficientSpec::new(Coefficient::Zero, Coefficient::Constant { value: chi })
}

#[test]
fn free_variance_matches_squared_kernel_integral() {
    let g = make_grid(DomainKind::Circle, 64, 0.1, 1000).unwrap();
    let w = WallPair::constant(-1e9, 1e9, &g).unwrap();
    let mid = 32;
    assert!((g.x[mid] - 0.5).abs() < 1e-12);
    let n = 500;
    let samples: Vec<f64> = (0..n)
        .map(|p| {
            let path = simulate_reflected(&[0.0; 64], &w, &noise(1.0), &SingularDriftSpec::zero(), &g, &mut derive_stream(17, p)).unwrap();
            path.x.get(g.nt, mid)
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let want = green_power_integral(2.0, 0.1, &g, &KernelConfig::default()).unwrap();
    assert!((var / want - 1.0).abs() < 0.15, "sample variance {var}, kernel integral {want}");
}

#[test]
fn symmetric_clipped_mean_is_centered() {
    let g = make_grid(DomainKind::Circle, 32, 0.5, 1000).unwrap();
    let w = WallPair::constant(-1.0, 1.0, &g).unwrap();
    let spec = SingularDriftSpec::symmetric(1.0, 2.0, 0.1);
    let n = 200;
    for k in [250, 500, 1000] {
        let means: Vec<f64> = (0..n)
            .map(|p| {
                let path = simulate_clipped(&[0.0; 32], &w, &noise(1.0), &spec, &g, &mut derive_stream(23, p)).unwrap();
                path.x.row(k).iter().sum::<f64>() / 32.0
            })
            .collect();
        let m = means.iter().sum::<f64>() / n as f64;
        let sd = (means.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!(m.abs() <= 3.0 * sd / (n as f64).sqrt(), "step {k}: mean {m}, sd {sd}");
    }
}

#[test]
fn steep_clipped_drift_rarely_approaches_the_floor() {
    let g = make_grid(DomainKind::Circle, 32, 0.5, 2000).unwrap();
    let w = WallPair::constant(-1.0, 1.0, &g).unwrap();
    let spec = SingularDriftSpec::symmetric(1.0, 4.0, 0.05);
    let close = (0..100)
        .filter(|&p| {
            let path = simulate_clipped(&[0.0; 32], &w, &noise(1.0), &spec, &g, &mut derive_stream(29, p)).unwrap();
            min_gap_series(&path, &w).iter().any(|(a, b)| a.min(*b) < 0.025)
        })
        .count();
    assert!(close <= 5, "{close} of 100 paths came within delta/2 of a wall");
}

#[test]
fn strong_single_wall_drift_never_stops() {
    let g = make_grid(DomainKind::Circle, 32, 1.0, 2000).unwrap();
    let w = WallPair::constant(-1.0, 1.0, &g).unwrap();
    let spec = SingularDriftSpec { c1: 10.0, theta: 1.0, floor_delta: 1e-3, ..SingularDriftSpec::zero() };
    for p in 0..20 {
        let path = simulate_single_wall(&[0.0; 32], &w, &noise(0.1), &spec, &g, &mut derive_stream(31, p), 0.0).unwrap();
        assert_eq!(path.stop_step, None);
        assert_eq!(path.steps(), g.nt + 1);
    }
}

#[test]
fn reflected_path_stays_below_single_wall_path() {
    let g = make_grid(DomainKind::Circle, 32, 0.2, 1000).unwrap();
    let w = WallPair::constant(-0.3, 0.3, &g).unwrap();
    let spec = SingularDriftSpec::symmetric(0.5, 1.0, 0.0);
    for p in 0..20 {
        let x = simulate_reflected(&[0.0; 32], &w, &noise(1.0), &spec, &g, &mut derive_stream(37, p)).unwrap();
        let v = simulate_single_wall(&[0.0; 32], &w, &noise(1.0), &spec, &g, &mut derive_stream(37, p), 0.0).unwrap();
        // The unprojected path may end below the wall at its stop step.
        let end = v.stop_step.unwrap_or(v.steps());
        for k in 0..end {
            for i in 0..32 {
                assert!(x.x.get(k, i) <= v.x.get(k, i) + 1e-8, "path {p} step {k} cell {i}");
            }
        }
    }
}

#[test]
fn reflected_paths_respect_walls_everywhere() {
    let g = make_grid(DomainKind::Circle, 32, 0.2, 1000).unwrap();
    let w = WallPair::constant(-1.0, 1.0, &g).unwrap();
    let spec = SingularDriftSpec::symmetric(1.0, 2.0, 0.0);
    for p in 0..10 {
        let path = simulate_reflected(&[0.0; 32], &w, &noise(3.0), &spec, &g, &mut derive_stream(41, p)).unwrap();
        assert!(path.x.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}

fn hitting_config(c: f64, chi: f64, wall: f64, nt: usize) -> HittingConfig {
    HittingConfig {
        domain: DomainKind::Circle,
        nx: 32,
        nt,
        walls: WallSpec::Constant { lower: -wall, upper: wall },
        x0: InitialProfile::Constant { value: 0.0 },
        coeff: noise(chi),
        drift: SingularDriftSpec::symmetric(c, 2.0, 0.0),
        mode: Mode::Reflected,
    }
}

#[test]
fn near_touching_walls_are_hit() {
    let row = estimate_hitting_probability(&hitting_config(0.0, 1.0, 0.01, 1000), 1.0, 100, 3, 0.1, 0.0).unwrap();
    assert!(row.p_hat >= 0.99, "{row:?}");
    assert_eq!(row.n_failed, 0);
}

#[test]
fn noiseless_repelled_path_never_hits() {
    let row = estimate_hitting_probability(&hitting_config(1.0, 0.0, 1.0, 1000), 2.0, 100, 3, 1.0, 0.0).unwrap();
    assert_eq!(row.p_hat, 0.0);
    assert_eq!((row.ci_low, row.n_hits), (0.0, 0));
}

#[test]
fn squeezed_gap_series_decreases() {
    let g = make_grid(DomainKind::Circle, 16, 1.0, 200).unwrap();
    let w = WallPair::sample(WallSpec::Squeeze { lower: -1.0, upper: 1.0, rate: 0.5 }, &g).unwrap();
    let path = simulate_reflected(&[0.0; 16], &w, &CoefficientSpec::default(), &SingularDriftSpec::zero(), &g, &mut derive_stream(0, 0)).unwrap();
    let s = min_gap_series(&path, &w);
    assert_eq!(s.len(), 201);
    assert!(s.windows(2).all(|p| p[1].0 <= p[0].0 && p[1].1 <= p[0].1));
    assert!(s[200].0 < 0.6);
    let r = detect_contact(&path, &w, 0.0);
    assert_eq!(r.min_gap_lower, s[200].0);
}

#[test]
fn envelope_excursions_shrink_with_delta() {
    let coeff = noise(1.0);
    let spec = SingularDriftSpec::symmetric(1.0, 4.0, 0.0);
    let mut exits = Vec::new();
    let mut depth = Vec::new();
    for delta in [0.05, 0.025] {
        let beta = block_length(4.0, delta);
        let g = make_grid(DomainKind::Circle, 1024, 20.0 * beta * (1.0 + 1e-9), 400).unwrap();
        let w = WallPair::constant(-1.0, 1.0, &g).unwrap();
        let (mut exit, mut low) = (0.0, 0.0);
        for p in 0..50 {
            let r = simulate_restart_envelope(&w, &coeff, &spec, &EnvelopeConfig::new(delta), &g, &mut derive_stream(43, p)).unwrap();
            assert_eq!(r.blocks, 20);
            exit += r.corridor_exit_fraction / 50.0;
            low += r.block_min.iter().map(|m| 1.0 - m / delta).sum::<f64>() / (50.0 * r.blocks as f64);
        }
        exits.push(exit);
        depth.push(low);
    }
    assert!(exits[1] <= exits[0], "{exits:?}");
    assert!(depth[1] < depth[0], "relative excursion below the start: {depth:?}");
}
