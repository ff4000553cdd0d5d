//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rspde::coeff::{Coefficient, CoefficientSpec};
use rspde::drift::SingularDriftSpec;
use rspde::hitting::{config_hash, HittingConfig};
use rspde::spde::{InitialProfile, Mode};
use rspde::walls::{WallSpec, WallTable};
use rspde::{make_grid, DomainKind, Grid};

/// Every accepted key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("domain", "interval", "interval (zero Dirichlet data) or circle"),
    ("nx", "64", "spatial nodes"),
    ("T", "1", "time horizon"),
    ("nt", "1000", "time steps"),
    ("walls", "constant", "constant | gap_growth | sinusoidal | squeeze | table"),
    ("wall_lower", "-1", "lower wall level"),
    ("wall_upper", "1", "upper wall level"),
    ("wall_rate", "0.5", "rate for gap_growth and squeeze"),
    ("wall_amp", "0.1", "amplitude for sinusoidal walls"),
    ("wall_k", "1", "wavenumber for sinusoidal walls"),
    ("wall_table", "", "CSV with columns t,x,lambda1,lambda2 for table walls"),
    ("allow_gap_decrease", "false", "accept walls whose gap shrinks"),
    ("f", "zero", "drift coefficient"),
    ("chi", "const:1", "noise coefficient"),
    ("chi_lower_bound", "", "required lower bound of |chi|"),
    ("x0", "const:0", "initial profile, const:V or sine:A,K"),
    ("c1", "0", "lower-wall drift strength"),
    ("c2", "0", "upper-wall drift strength"),
    ("theta", "1", "drift exponent"),
    ("eps1", "0", "lower-wall drift regularizer"),
    ("eps2", "0", "upper-wall drift regularizer"),
    ("delta", "0", "lower-wall drift floor"),
    ("delta_tilde", "0", "upper-wall drift floor"),
    ("mode", "reflected", "reflected | clipped | single-wall"),
    ("seed", "0", "master seed"),
    ("path_index", "0", "stream index of single-path runs"),
    ("out", "out", "output directory"),
    ("eta", "0", "contact gap threshold"),
    ("stop_gap", "0", "stop threshold of single-wall runs"),
    ("n_paths", "100", "paths per theta in hitting runs"),
    ("theta_list", "0.5,1,2,4,5", "exponents of a hitting sweep"),
    ("picard_max_iter", "30", "Picard iteration cap"),
    ("picard_tol", "1e-10", "Picard stopping distance"),
    ("a_values", "2", "kernel powers of the exponent study, each in (1, 3)"),
    ("kernel_nx", "256", "grid size of the kernel checks"),
    ("v_profile", "const:0", "obstacle input profile at t = 0"),
    ("v_rate", "0", "obstacle input drift per unit time"),
    ("v_noise", "0", "obstacle input random-walk amplitude"),
    ("pair_amp", "0", "perturbation size of the contraction pair; 0 disables"),
    ("eps_schedule", "false", "run the regularization schedule"),
    ("eps_levels", "3", "levels per schedule phase"),
    ("psi", "auto", "weak-form test function: auto or sine:A,K"),
];

/// Keys that do not affect results and are left out of the digest.
const UNHASHED: &[&str] = &["out"];

#[derive(Debug)]
pub enum ConfigError {
    /// Malformed or invalid input; exit code 2.
    Usage(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Usage(m) => write!(f, "{m}"),
        }
    }
}

type CResult<T> = Result<T, ConfigError>;

fn usage<T>(msg: impl Into<String>) -> CResult<T> {
    Err(ConfigError::Usage(msg.into()))
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str, origin: &str) -> CResult<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("{origin}:{}: expected key = value, got '{line}'", n + 1));
            };
            let (k, v) = (k.trim(), v.trim());
            if !known(k) {
                return usage(format!("{origin}:{}: unknown key '{k}'", n + 1));
            }
            if values.insert(k.to_owned(), v.to_owned()).is_some() {
                return usage(format!("{origin}:{}: duplicate key '{k}'", n + 1));
            }
        }
        Ok(RawConfig { values })
    }

    pub fn load(path: &Path) -> CResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) -> CResult<()> {
        if !known(key) {
            return usage(format!("unknown key '{key}'"));
        }
        self.values.insert(key.to_owned(), value.trim().to_owned());
        Ok(())
    }

    /// Every key with defaults filled in.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        KEYS.iter()
            .map(|(k, d, _)| (k.to_string(), self.values.get(*k).cloned().unwrap_or_else(|| d.to_string())))
            .collect()
    }
}

/// Fully parsed and checked configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub echo: BTreeMap<String, String>,
    pub hash: String,
    pub grid: Grid,
    pub walls: WallSpec,
    pub allow_gap_decrease: bool,
    pub coeff: CoefficientSpec,
    pub x0: InitialProfile,
    pub drift: SingularDriftSpec,
    pub mode: Mode,
    pub seed: u64,
    pub path_index: u64,
    pub out: PathBuf,
    pub eta: f64,
    pub stop_gap: f64,
    pub n_paths: usize,
    pub theta_list: Vec<f64>,
    pub picard_max_iter: usize,
    pub picard_tol: f64,
    pub a_values: Vec<f64>,
    pub kernel_nx: usize,
    pub v_profile: InitialProfile,
    pub v_rate: f64,
    pub v_noise: f64,
    pub pair_amp: f64,
    pub eps_schedule: bool,
    pub eps_levels: usize,
    pub psi: Option<InitialProfile>,
}

struct Reader<'a>(&'a BTreeMap<String, String>);

impl Reader<'_> {
    fn str(&self, k: &str) -> &str {
        self.0.get(k).map(String::as_str).unwrap_or("")
    }

    fn num<T: std::str::FromStr>(&self, k: &str) -> CResult<T> {
        let s = self.str(k);
        s.parse().map_err(|_| ConfigError::Usage(format!("{k}: cannot parse '{s}'")))
    }

    fn float(&self, k: &str) -> CResult<f64> {
        let v: f64 = self.num(k)?;
        if !v.is_finite() {
            return usage(format!("{k} must be finite"));
        }
        Ok(v)
    }

    fn nonneg(&self, k: &str) -> CResult<f64> {
        let v = self.float(k)?;
        if v < 0.0 {
            return usage(format!("{k} must be >= 0, got {v}"));
        }
        Ok(v)
    }

    fn bool(&self, k: &str) -> CResult<bool> {
        match self.str(k) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            s => usage(format!("{k}: expected true or false, got '{s}'")),
        }
    }

    fn list(&self, k: &str) -> CResult<Vec<f64>> {
        self.str(k)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| ConfigError::Usage(format!("{k}: cannot parse '{s}'")))
            })
            .collect()
    }

    fn coeff(&self, k: &str) -> CResult<Coefficient> {
        Coefficient::parse(self.str(k)).map_err(|e| ConfigError::Usage(format!("{k}: {e}")))
    }

    fn profile(&self, k: &str) -> CResult<InitialProfile> {
        InitialProfile::parse(self.str(k)).map_err(|e| ConfigError::Usage(format!("{k}: {e}")))
    }
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> CResult<Self> {
        let echo = raw.resolved();
        let r = Reader(&echo);
        let domain: DomainKind = r.str("domain").parse().map_err(|e| ConfigError::Usage(format!("domain: {e}")))?;
        let grid = make_grid(domain, r.num("nx")?, r.float("T")?, r.num("nt")?)
            .map_err(|e| ConfigError::Usage(e.to_string()))?;

        let (lower, upper) = (r.float("wall_lower")?, r.float("wall_upper")?);
        let walls = match r.str("walls") {
            "constant" => WallSpec::Constant { lower, upper },
            "gap_growth" => WallSpec::GapGrowth { lower, upper, rate: r.nonneg("wall_rate")? },
            "sinusoidal" => WallSpec::Sinusoidal { lower, upper, amp: r.float("wall_amp")?, k: r.num("wall_k")? },
            "squeeze" => WallSpec::Squeeze { lower, upper, rate: r.nonneg("wall_rate")? },
            "table" => {
                let p = r.str("wall_table");
                if p.is_empty() {
                    return usage("walls = table needs wall_table");
                }
                WallSpec::Table(WallTable::from_csv(Path::new(p)).map_err(|e| ConfigError::Usage(format!("wall_table: {e}")))?)
            }
            other => return usage(format!("walls: unknown kind '{other}'")),
        };

        let mut coeff = CoefficientSpec::new(r.coeff("f")?, r.coeff("chi")?);
        if !r.str("chi_lower_bound").is_empty() {
            let c = r.float("chi_lower_bound")?;
            if c <= 0.0 {
                return usage("chi_lower_bound must be positive");
            }
            coeff.chi_lower_bound = Some(c);
        }

        let drift = SingularDriftSpec {
            c1: r.nonneg("c1")?,
            c2: r.nonneg("c2")?,
            theta: r.nonneg("theta")?,
            eps1: r.nonneg("eps1")?,
            eps2: r.nonneg("eps2")?,
            floor_delta: r.nonneg("delta")?,
            floor_delta_tilde: r.nonneg("delta_tilde")?,
        };
        let mode: Mode = r.str("mode").parse().map_err(|e| ConfigError::Usage(format!("mode: {e}")))?;

        let n_paths: usize = r.num("n_paths")?;
        if n_paths == 0 {
            return usage("n_paths must be at least 1");
        }
        let theta_list = r.list("theta_list")?;
        if theta_list.is_empty() {
            return usage("theta_list is empty");
        }
        if theta_list.iter().any(|t| *t < 0.0) {
            return usage("theta_list entries must be >= 0");
        }
        let a_values = r.list("a_values")?;
        if let Some(a) = a_values.iter().find(|a| !(**a > 1.0 && **a < 3.0)) {
            return usage(format!("a_values: {a} is outside (1, 3)"));
        }
        let kernel_nx: usize = r.num("kernel_nx")?;
        if kernel_nx < 8 {
            return usage("kernel_nx must be at least 8");
        }
        let picard_tol = r.float("picard_tol")?;
        if picard_tol <= 0.0 {
            return usage("picard_tol must be positive");
        }
        let eps_levels: usize = r.num("eps_levels")?;
        if !(3..=6).contains(&eps_levels) {
            return usage("eps_levels must be between 3 and 6");
        }
        let psi = match r.str("psi") {
            "auto" => None,
            _ => Some(r.profile("psi")?),
        };

        let canonical: String = echo
            .iter()
            .filter(|(k, _)| !UNHASHED.contains(&k.as_str()))
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        Ok(RunConfig {
            hash: config_hash(&canonical),
            grid,
            walls,
            allow_gap_decrease: r.bool("allow_gap_decrease")?,
            coeff,
            x0: r.profile("x0")?,
            drift,
            mode,
            seed: r.num("seed")?,
            path_index: r.num("path_index")?,
            out: PathBuf::from(r.str("out")),
            eta: r.nonneg("eta")?,
            stop_gap: r.nonneg("stop_gap")?,
            n_paths,
            theta_list,
            picard_max_iter: r.num("picard_max_iter")?,
            picard_tol,
            a_values,
            kernel_nx,
            v_profile: r.profile("v_profile")?,
            v_rate: r.float("v_rate")?,
            v_noise: r.nonneg("v_noise")?,
            pair_amp: r.nonneg("pair_amp")?,
            eps_schedule: r.bool("eps_schedule")?,
            eps_levels,
            psi,
            echo,
        })
    }

    pub fn hitting(&self) -> HittingConfig {
        HittingConfig {
            domain: self.grid.kind,
            nx: self.grid.nx,
            nt: self.grid.nt,
            walls: self.walls.clone(),
            x0: self.x0,
            coeff: self.coeff,
            drift: self.drift,
            mode: self.mode,
        }
    }
}
