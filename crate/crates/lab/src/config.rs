//! Run configuration from a TOML file and command-line flags. Flags override
//! file values; unknown file keys are rejected.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Parser, ValueEnum};
use hartree_core::ground_state::{Method, SolverConfig};
use hartree_core::radial::{GridDescriptor, Scheme};
use hartree_core::semiclassical::{PotentialField, DEFAULT_EPS, DEFAULT_SHELL_DEGREE};
use serde::Deserialize;

use crate::error::{config_err, io_err, LabError, Result};

pub const SUPPORTED_DIMS: [usize; 3] = [3, 4, 5];
pub const DEFAULT_GRID_N: usize = 400;
pub const DEFAULT_K_MAX: usize = 8;
pub const DEFAULT_OUT: &str = "hartree-out";

pub fn default_r_max(dim: usize) -> f64 {
    match dim {
        3 => 30.0,
        4 => 25.0,
        _ => 20.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    #[value(name = "ground_state", alias = "ground-state")]
    GroundState,
    #[value(name = "spectrum")]
    Spectrum,
    #[value(name = "multipole_verify", alias = "multipole-verify")]
    MultipoleVerify,
    #[value(name = "identities")]
    Identities,
    #[value(name = "semiclassical")]
    Semiclassical,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GroundState => "ground_state",
            Command::Spectrum => "spectrum",
            Command::MultipoleVerify => "multipole_verify",
            Command::Identities => "identities",
            Command::Semiclassical => "semiclassical",
        }
    }

    pub fn needs_ground_state(self) -> bool {
        self != Command::MultipoleVerify
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CachePolicy {
    /// Reuse a cache whose header matches, otherwise solve and rewrite it.
    Use,
    /// Always solve and rewrite the cache.
    Refresh,
    /// Solve without reading or writing a cache.
    Ignore,
}

impl CachePolicy {
    pub fn name(self) -> &'static str {
        match self {
            CachePolicy::Use => "use",
            CachePolicy::Refresh => "refresh",
            CachePolicy::Ignore => "ignore",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hartree-lab", version, about = "Ground states, spectra and semiclassical diagnostics of the Hartree equation")]
pub struct Cli {
    /// ground_state, spectrum, multipole_verify, identities or semiclassical
    pub command: Option<Command>,
    #[arg(long = "cmd", value_name = "COMMAND")]
    pub cmd: Option<Command>,
    /// TOML file with the same keys as the flags (snake_case)
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// gauss_legendre_mapped or composite_clenshaw_curtis
    #[arg(long)]
    pub scheme: Option<String>,
    /// fixed_point or shooting
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub damping: Option<f64>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Comma-separated, strictly decreasing
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// `name`, `name:p1,p2,...` or `expr:<expression in x1..xn>`
    #[arg(long)]
    pub potential: Option<String>,
    /// Concentration point for the eps sweep, comma-separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    /// Half width of the cube searched for critical points of V
    #[arg(long)]
    pub box_half: Option<f64>,
    #[arg(long)]
    pub shell_degree: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, action = ArgAction::Append)]
    pub cache: Vec<CachePolicy>,
    #[arg(long)]
    pub cache_path: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<Command>,
    pub n: Option<usize>,
    pub r_max: Option<f64>,
    pub grid_n: Option<usize>,
    pub scheme: Option<String>,
    pub method: Option<String>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub damping: Option<f64>,
    pub k_max: Option<usize>,
    pub eps: Option<Vec<f64>>,
    pub potential: Option<String>,
    pub point: Option<Vec<f64>>,
    pub box_half: Option<f64>,
    pub shell_degree: Option<usize>,
    pub out: Option<PathBuf>,
    pub cache: Option<CachePolicy>,
    pub cache_path: Option<PathBuf>,
    /// Declared check on the fitted proxy exponent, `[lo, hi]`.
    pub expect_proxy_exponent: Option<[f64; 2]>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|e| LabError::Config(format!("{}: {}", path.display(), e)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub dim: usize,
    pub r_max: f64,
    pub grid_n: usize,
    pub scheme: Scheme,
    pub solver: SolverConfig,
    pub k_max: usize,
    pub eps: Vec<f64>,
    pub potential: String,
    pub point: Vec<f64>,
    pub box_half: f64,
    pub shell_degree: usize,
    pub out: PathBuf,
    pub cache: CachePolicy,
    pub cache_path: PathBuf,
    pub expect_proxy_exponent: Option<(f64, f64)>,
}

impl RunConfig {
    pub fn descriptor(&self) -> GridDescriptor {
        GridDescriptor {
            dim: self.dim,
            r_max: self.r_max,
            n_nodes: self.grid_n,
            scheme: self.scheme,
        }
    }

    pub fn potential_field(&self) -> Result<PotentialField> {
        Ok(PotentialField::parse(self.dim, &self.potential)?)
    }
}

/// Parses `args` (including the program name) into a validated configuration.
pub fn parse_config<I, T>(args: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| LabError::Config(e.to_string()))?;
    resolve(cli)
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

/// Merges flags over the file named by `--config` and validates the result.
pub fn resolve(cli: Cli) -> Result<RunConfig> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };

    let command = match (cli.command, cli.cmd) {
        (Some(a), Some(b)) if a != b => return config_err(format!("command given twice: '{a}' and '{b}'")),
        (a, b) => a.or(b).or(file.command),
    };
    let Some(command) = command else {
        return config_err("missing required key 'command'");
    };
    let Some(dim) = pick(cli.n, file.n) else {
        return config_err("missing required key 'n'");
    };
    if !SUPPORTED_DIMS.contains(&dim) {
        return config_err(format!("unsupported dimension {dim}: supported dimensions are 3, 4, 5"));
    }

    let r_max = pick(cli.r_max, file.r_max).unwrap_or_else(|| default_r_max(dim));
    if !(r_max > 0.0) || !r_max.is_finite() {
        return config_err(format!("r_max must be positive, got {r_max}"));
    }
    let grid_n = pick(cli.grid_n, file.grid_n).unwrap_or(DEFAULT_GRID_N);
    if grid_n < 16 {
        return config_err(format!("grid_n must be at least 16, got {grid_n}"));
    }
    let scheme = match pick(cli.scheme, file.scheme) {
        Some(s) => s.parse::<Scheme>().map_err(|e| LabError::Config(e.to_string()))?,
        None => Scheme::GaussLegendreMapped,
    };
    let mut solver = SolverConfig::default();
    if let Some(m) = pick(cli.method, file.method) {
        solver.method = m.parse::<Method>().map_err(|e| LabError::Config(e.to_string()))?;
    }
    if let Some(t) = pick(cli.tol, file.tol) {
        solver.tol = t;
    }
    if let Some(m) = pick(cli.max_iter, file.max_iter) {
        solver.max_iter = m;
    }
    if let Some(d) = pick(cli.damping, file.damping) {
        solver.damping = d;
    }
    solver.validate().map_err(|e| LabError::Config(e.to_string()))?;

    let k_max = pick(cli.k_max, file.k_max).unwrap_or(DEFAULT_K_MAX);
    if command == Command::Spectrum && k_max < 2 {
        return config_err(format!("spectrum needs k_max >= 2, got {k_max}"));
    }
    if command == Command::MultipoleVerify && dim != 3 {
        return config_err(format!("multipole_verify compares against the 3D cube oracle and needs n = 3, got {dim}"));
    }

    let eps = pick(cli.eps, file.eps).unwrap_or_else(|| DEFAULT_EPS.to_vec());
    if eps.len() < 3 || eps.iter().any(|e| !(*e > 0.0)) || eps.windows(2).any(|w| !(w[1] < w[0])) {
        return config_err("eps must hold at least three positive, strictly decreasing values");
    }
    let potential = pick(cli.potential, file.potential).unwrap_or_else(|| "quadratic".to_string());
    PotentialField::parse(dim, &potential).map_err(|e| LabError::Config(format!("potential '{potential}': {e}")))?;
    let point = pick(cli.point, file.point).unwrap_or_else(|| vec![0.0; dim]);
    if point.len() != dim || point.iter().any(|x| !x.is_finite()) {
        return config_err(format!("point must have {dim} finite coordinates"));
    }
    let box_half = pick(cli.box_half, file.box_half).unwrap_or(2.0);
    if !(box_half > 0.0) || !box_half.is_finite() {
        return config_err(format!("box_half must be positive, got {box_half}"));
    }
    let shell_degree = pick(cli.shell_degree, file.shell_degree).unwrap_or(DEFAULT_SHELL_DEGREE);
    if shell_degree == 0 {
        return config_err("shell_degree must be positive");
    }
    let expect_proxy_exponent = match file.expect_proxy_exponent {
        Some([lo, hi]) if lo < hi => Some((lo, hi)),
        Some(_) => return config_err("expect_proxy_exponent must be [lo, hi] with lo < hi"),
        None => None,
    };

    let cache = {
        let mut flags = cli.cache.clone();
        flags.dedup();
        if flags.len() > 1 {
            let names: Vec<_> = flags.iter().map(|c| c.name()).collect();
            return config_err(format!("contradictory cache policy: --cache given as {}", names.join(", ")));
        }
        flags.first().copied().or(file.cache).unwrap_or(CachePolicy::Use)
    };
    let explicit_path = cli.cache_path.is_some() || file.cache_path.is_some();
    if cache == CachePolicy::Ignore && explicit_path {
        return config_err("contradictory cache policy: a cache_path is set but the policy is 'ignore'");
    }

    let out = pick(cli.out, file.out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    ensure_writable(&out)?;
    let cache_path = pick(cli.cache_path, file.cache_path).unwrap_or_else(|| out.join(format!("ground_state_n{dim}.cache")));

    Ok(RunConfig {
        command,
        dim,
        r_max,
        grid_n,
        scheme,
        solver,
        k_max,
        eps,
        potential,
        point,
        box_half,
        shell_degree,
        out,
        cache,
        cache_path,
        expect_proxy_exponent,
    })
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let probe = dir.join(".hartree-lab-write-probe");
    fs::write(&probe, b"").map_err(io_err(&probe))?;
    fs::remove_file(&probe).map_err(io_err(&probe))
}
