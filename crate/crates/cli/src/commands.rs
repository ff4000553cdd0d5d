use std::fs;
use std::path::Path;

use rspde::field::Field;
use rspde::greens::{kernel_report, KernelConfig};
use rspde::hitting::{exponent_sweep, min_gap_series};
use rspde::io::{
    save_json, save_trajectory_csv, save_with, write_gap_series_csv, write_ledger_csv, write_obstacle_csv,
    PathSummary,
};
use rspde::noise::derive_stream;
use rspde::obstacle::{complementarity_residual, contraction_check, max_wall_violation, solve_obstacle, solve_obstacle_schedule, EpsSchedule};
use rspde::spde::{effective_drift, noise_record, picard_solve, simulate_clipped, simulate_reflected, simulate_single_wall, weak_form_residual, InitialProfile, Mode};
use rspde::walls::{validate_walls, WallPair};
use serde_json::{json, Value};

use crate::config::RunConfig;

/// A run that started but failed; exit code 1.
pub enum CliError {
    Failure(String),
}

impl From<rspde::Error> for CliError {
    fn from(e: rspde::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::Failure(format!("cannot create {}: {e}", cfg.out.display())))?;
    Ok(&cfg.out)
}

fn envelope(cfg: &RunConfig, command: &str, result: Value) -> Value {
    json!({
        "command": command,
        "config": cfg.echo,
        "config_hash": cfg.hash,
        "seed": { "master_seed": cfg.seed, "path_index": cfg.path_index },
        "result": result,
    })
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn sample_walls(cfg: &RunConfig) -> Result<WallPair, CliError> {
    Ok(WallPair::sample(cfg.walls.clone(), &cfg.grid)?)
}

/// Walls that may be simulated: no fatal wall condition fails.
fn admissible_walls(cfg: &RunConfig) -> Result<WallPair, CliError> {
    let walls = sample_walls(cfg)?;
    validate_walls(&walls, &cfg.grid, cfg.allow_gap_decrease).require_admissible()?;
    Ok(walls)
}

pub fn validate(cfg: &RunConfig) -> CliResult {
    let walls = sample_walls(cfg)?;
    let report = validate_walls(&walls, &cfg.grid, cfg.allow_gap_decrease);
    let mut ok = true;
    for c in &report.checks {
        let waived = !c.passed && !c.fatal && c.name.ends_with('4');
        let verdict = if c.passed {
            "PASS"
        } else if waived {
            "WAIVED"
        } else {
            "FAIL"
        };
        ok &= c.passed || waived;
        print!("{} {verdict}: {}", c.name, c.description);
        if let Some(v) = &c.first_violation {
            match v.cell {
                Some(i) => print!("; first violation at node {i} (x = {}, t = {}, value = {})", v.x, v.t, v.value),
                None => print!("; first violation at x = {}, t = {} (value = {})", v.x, v.t, v.value),
            }
        }
        println!();
    }
    let bound = walls
        .lambda1
        .as_slice()
        .iter()
        .chain(walls.lambda2.as_slice())
        .fold(1.0f64, |a, v| a.max(v.abs()));
    match cfg.coeff.validate(&cfg.grid, bound) {
        Ok(r) => println!("coefficients PASS: {}", r.lipschitz_note),
        Err(e) => {
            ok = false;
            println!("coefficients FAIL: {e}");
        }
    }
    match effective_drift(&cfg.drift, &cfg.grid, cfg.mode).validate() {
        Ok(()) => println!("drift PASS"),
        Err(e) => {
            ok = false;
            println!("drift FAIL: {e}");
        }
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::Failure("validation failed".into()))
    }
}

fn default_psi(cfg: &RunConfig) -> Vec<f64> {
    cfg.psi.unwrap_or(InitialProfile::Sine { amp: 1.0, k: 1 }).sample(&cfg.grid)
}

pub fn simulate(cfg: &RunConfig) -> CliResult {
    let walls = admissible_walls(cfg)?;
    let x0 = cfg.x0.sample(&cfg.grid);
    let mut stream = derive_stream(cfg.seed, cfg.path_index);
    let path = match cfg.mode {
        Mode::Reflected => simulate_reflected(&x0, &walls, &cfg.coeff, &cfg.drift, &cfg.grid, &mut stream)?,
        Mode::Clipped => simulate_clipped(&x0, &walls, &cfg.coeff, &cfg.drift, &cfg.grid, &mut stream)?,
        Mode::SingleWall => simulate_single_wall(&x0, &walls, &cfg.coeff, &cfg.drift, &cfg.grid, &mut stream, cfg.stop_gap)?,
    };
    let summary = PathSummary::new(&path, &walls, cfg.eta);
    let weak = if path.stop_step.is_none() {
        let noise = noise_record(cfg.seed, cfg.path_index, &cfg.grid);
        Some(weak_form_residual(&path, &default_psi(cfg), &noise, &walls, true)?)
    } else {
        None
    };
    let dir = out_dir(cfg)?;
    save_trajectory_csv(&path, &dir.join("trajectory.csv"))?;
    let series = min_gap_series(&path, &walls);
    save_with(&dir.join("gap_series.csv"), |w| write_gap_series_csv(&series, &path.grid, w))?;
    let result = json!({
        "path": to_value(&summary),
        "residuals": {
            "complementarity_r1": summary.complementarity_r1,
            "complementarity_r2": summary.complementarity_r2,
            "max_wall_violation": summary.max_wall_violation,
            "weak_form": weak,
        },
    });
    save_json(&envelope(cfg, "simulate", result), &dir.join("summary.json"))?;

    println!("mode {}, {} steps, seed {}/{}", cfg.mode.name(), summary.steps, cfg.seed, cfg.path_index);
    println!("min gap to lower wall {} at t = {}", summary.min_gap_lower, summary.argmin_lower);
    println!("min gap to upper wall {} at t = {}", summary.min_gap_upper, summary.argmin_upper);
    println!("reflection mass {} (lower), {} (upper)", summary.total_upsilon, summary.total_gamma);
    if let Some(t) = summary.stop_time {
        println!("stopped at t = {t}");
    }
    println!("wrote {}", dir.display());
    Ok(())
}

/// `v = profile + rate t + amplitude W` with `W` a random walk in time.
fn obstacle_input(cfg: &RunConfig) -> Field {
    let g = &cfg.grid;
    let base = cfg.v_profile.sample(g);
    let mut v = Field::zeros(g.nt + 1, g.nx);
    let mut walk = vec![0.0; g.nx];
    let mut xi = vec![0.0; g.nx];
    let mut stream = derive_stream(cfg.seed, cfg.path_index);
    for k in 0..=g.nt {
        if k > 0 && cfg.v_noise > 0.0 {
            stream.fill_normals(&mut xi);
            for (w, z) in walk.iter_mut().zip(&xi) {
                *w += g.dt.sqrt() * z;
            }
        }
        let t = g.time(k);
        for i in 0..g.nx {
            v.set(k, i, base[i] + cfg.v_rate * t + cfg.v_noise * walk[i]);
        }
    }
    v
}

pub fn obstacle(cfg: &RunConfig) -> CliResult {
    let walls = admissible_walls(cfg)?;
    let v = obstacle_input(cfg);
    let sol = solve_obstacle(&v, &walls, &cfg.drift, &cfg.grid)?;
    let (r1, r2) = complementarity_residual(&sol.x, &walls, &sol.ledger);
    let violation = max_wall_violation(&sol.x, &walls);
    println!("r1 = {r1}, r2 = {r2}, max wall violation = {violation}");
    println!("reflection mass {} (lower), {} (upper)", sol.ledger.total_upsilon(), sol.ledger.total_gamma());

    let mut result = json!({
        "complementarity_r1": r1,
        "complementarity_r2": r2,
        "max_wall_violation": violation,
        "total_upsilon": sol.ledger.total_upsilon(),
        "total_gamma": sol.ledger.total_gamma(),
    });
    let mut ok = true;
    if cfg.pair_amp > 0.0 {
        let mut stream = derive_stream(cfg.seed, cfg.path_index.wrapping_add(1));
        let mut v_hat = v.clone();
        let mut z = vec![0.0; cfg.grid.nx];
        for k in 0..v.steps() {
            stream.fill_normals(&mut z);
            for (i, zi) in z.iter().enumerate() {
                v_hat.set(k, i, v.get(k, i) + cfg.pair_amp * zi.tanh());
            }
        }
        let c = contraction_check(&v, &v_hat, &walls, &cfg.drift, &cfg.grid)?;
        println!(
            "contraction: sup|Xi - Xi^| = {} <= sup|v - v^| + tol = {}: {}",
            c.lhs,
            c.rhs,
            if c.pass { "PASS" } else { "FAIL" }
        );
        ok &= c.pass;
        result["contraction"] = to_value(&c);
    }
    if cfg.eps_schedule {
        let schedule = EpsSchedule { levels: cfg.eps_levels, ..EpsSchedule::default() };
        let report = solve_obstacle_schedule(&v, &walls, &cfg.drift, &cfg.grid, &schedule)?;
        for p in &report.phases {
            println!(
                "schedule {:?}: eps {:?}, Xi violation {:e}, shifted violation {:e}: {}",
                p.target,
                p.eps,
                p.xi_violation,
                p.shifted_violation,
                if p.monotone { "monotone" } else { "NOT monotone" }
            );
            ok &= p.monotone;
        }
        result["schedule"] = to_value(&report);
    }

    let dir = out_dir(cfg)?;
    save_with(&dir.join("xi.csv"), |w| write_obstacle_csv(&sol, &cfg.grid, w))?;
    save_with(&dir.join("ledger.csv"), |w| write_ledger_csv(&sol.ledger, &cfg.grid, w))?;
    save_json(&envelope(cfg, "obstacle", result), &dir.join("summary.json"))?;
    println!("wrote {}", dir.display());
    if ok {
        Ok(())
    } else {
        Err(CliError::Failure("obstacle checks failed".into()))
    }
}

pub fn hitting(cfg: &RunConfig) -> CliResult {
    admissible_walls(cfg)?;
    let mut table = exponent_sweep(&cfg.hitting(), &cfg.theta_list, cfg.n_paths, cfg.seed, cfg.grid.t_final, cfg.eta)?;
    for r in &mut table.rows {
        r.config_hash = cfg.hash.clone();
    }
    let dir = out_dir(cfg)?;
    table.save_csv(&dir.join("hitting.csv"))?;
    let trend = table.nonincreasing_up_to_ci();
    let result = json!({ "rows": to_value(&table.rows), "nonincreasing_up_to_ci": trend });
    save_json(&envelope(cfg, "hitting", result), &dir.join("hitting.json"))?;
    for r in &table.rows {
        println!(
            "theta {}: {}/{} hits, P(tau <= {}) ~ {:.4} [{:.4}, {:.4}]{}",
            r.theta,
            r.n_hits,
            r.n_paths,
            r.t_final,
            r.p_hat,
            r.ci_low,
            r.ci_high,
            if r.n_failed > 0 { format!(", {} failed paths excluded", r.n_failed) } else { String::new() }
        );
    }
    println!(
        "trend: {}",
        if trend { "nonincreasing in theta up to CI overlap" } else { "NOT nonincreasing in theta" }
    );
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn green_check(cfg: &RunConfig) -> CliResult {
    let report = kernel_report(&cfg.a_values, cfg.kernel_nx, &KernelConfig::default())?;
    for (t, e) in &report.circle_mass_errors {
        println!("circle mass error at t = {t}: {e:e}");
    }
    for (t, m) in &report.dirichlet_mass {
        println!("interval mass at t = {t}: {m}");
    }
    println!("Chapman-Kolmogorov error: circle {:e}, interval {:e}", report.chapman_kolmogorov_circle, report.chapman_kolmogorov_dirichlet);
    println!("interval eigenmode decay error: {:e}", report.dirichlet_eigen_error);
    for f in &report.exponents {
        println!(
            "a = {}: fitted exponent {:.4} (nx = {}), {:.4} (nx = {}), stability {:.2e}; (3a-1)/2 = {}, (3-a)/2 = {}",
            f.a,
            f.fitted_coarse,
            f.nx_coarse,
            f.fitted_fine,
            f.nx_fine,
            f.stability(),
            f.bound_exponent,
            f.scaling_exponent
        );
    }
    let dir = out_dir(cfg)?;
    let mut result = to_value(&report);
    result["stability"] = json!(report.exponents.iter().map(|f| f.stability()).collect::<Vec<_>>());
    save_json(&envelope(cfg, "green-check", result), &dir.join("green_check.json"))?;
    Ok(())
}

pub fn picard(cfg: &RunConfig) -> CliResult {
    let walls = admissible_walls(cfg)?;
    let x0 = cfg.x0.sample(&cfg.grid);
    let (path, state) = picard_solve(
        &x0,
        &walls,
        &cfg.coeff,
        &cfg.drift,
        &cfg.grid,
        &mut derive_stream(cfg.seed, cfg.path_index),
        cfg.picard_max_iter,
        cfg.picard_tol,
    )?;
    let direct = simulate_reflected(&x0, &walls, &cfg.coeff, &cfg.drift, &cfg.grid, &mut derive_stream(cfg.seed, cfg.path_index))?;
    let distance = path.x.sup_distance(&direct.x);
    for (n, d) in state.history.iter().enumerate() {
        println!("iteration {}: sup distance {d:e}", n + 1);
    }
    println!(
        "{} after {} iterations; sup distance to direct simulation {distance}",
        if state.converged { "converged" } else { "not converged" },
        state.iteration
    );
    let dir = out_dir(cfg)?;
    save_trajectory_csv(&path, &dir.join("trajectory.csv"))?;
    let result = json!({
        "iterations": state.iteration,
        "converged": state.converged,
        "history": state.history,
        "ratios": state.ratios(),
        "direct_sup_distance": distance,
    });
    save_json(&envelope(cfg, "picard", result), &dir.join("picard.json"))?;
    Ok(())
}
