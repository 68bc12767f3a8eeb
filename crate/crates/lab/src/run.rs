//! Command pipelines. Every command writes its artifacts into the output
//! directory and returns the declared checks; numeric CSV columns carry 17
//! significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hartree_core::ground_state::{equation_residual, fit_decay, format_cache, parse_cache, solve_ground_state, GroundState};
use hartree_core::newton::harmonics::{expansion_value, project_real_harmonics};
use hartree_core::newton::{direct_newton_potential_nd, multipole_potential, GriddedFunction};
use hartree_core::radial::{build_grid, Scheme};
use hartree_core::semiclassical::{
    constant_c0, constant_c1, predict_concentration, semiclassical_sweep, CriticalSearch, ExponentFit, SampleBox,
    SweepConfig,
};
use hartree_core::spectrum::{
    check_identity_2u_ru, check_identity_lu, check_identity_ru, nondegeneracy_report_with, ReportConfig,
};
use log::{info, warn};

use crate::config::{CachePolicy, Command, RunConfig};
use crate::error::{io_err, Result};

/// Identities and the multipole expansion are declared to hold to this level.
pub const IDENTITY_TOL: f64 = 1e-4;
pub const MULTIPOLE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Cache,
    Solved,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub checks: Vec<Check>,
    pub artifacts: Vec<PathBuf>,
    /// Where the ground state came from, for commands that need one.
    pub ground_state: Option<Source>,
}

impl RunOutcome {
    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// 0 when every declared check passes, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failed().is_empty() {
            0
        } else {
            2
        }
    }

    fn write(&mut self, path: PathBuf, text: &str) -> Result<()> {
        fs::write(&path, text).map_err(io_err(&path))?;
        info!("wrote {}", path.display());
        self.artifacts.push(path);
        Ok(())
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let mut out = RunOutcome::default();
    if cfg.command == Command::MultipoleVerify {
        multipole_verify(cfg, &mut out)?;
        return Ok(out);
    }
    let (gs, source) = obtain_ground_state(cfg)?;
    out.ground_state = Some(source);
    match cfg.command {
        Command::GroundState => ground_state(cfg, &gs, &mut out)?,
        Command::Spectrum => spectrum(cfg, &gs, &mut out)?,
        Command::Identities => identities(cfg, &gs, &mut out)?,
        Command::Semiclassical => semiclassical(cfg, &gs, &mut out)?,
        Command::MultipoleVerify => unreachable!(),
    }
    Ok(out)
}

fn cache_matches(cfg: &RunConfig, text: &str) -> std::result::Result<GroundState, String> {
    let cached = parse_cache(text).map_err(|e| e.to_string())?;
    if cached.descriptor != cfg.descriptor() {
        return Err(format!("grid '{}' differs from '{}'", cached.descriptor, cfg.descriptor()));
    }
    if cached.header.method != cfg.solver.method || cached.header.tol != cfg.solver.tol {
        return Err(format!(
            "solver {} tol {:e} differs from {} tol {:e}",
            cached.header.method, cached.header.tol, cfg.solver.method, cfg.solver.tol
        ));
    }
    cached.into_ground_state().map_err(|e| e.to_string())
}

/// Ground state per the cache policy. Under `use`, a cache that is missing,
/// unreadable or describes a different configuration is replaced.
pub fn obtain_ground_state(cfg: &RunConfig) -> Result<(GroundState, Source)> {
    if cfg.cache == CachePolicy::Use && cfg.cache_path.exists() {
        let text = fs::read_to_string(&cfg.cache_path).map_err(io_err(&cfg.cache_path))?;
        match cache_matches(cfg, &text) {
            Ok(gs) => {
                info!("reusing ground state from {}", cfg.cache_path.display());
                return Ok((gs, Source::Cache));
            }
            Err(why) => warn!(
                "cache {} does not match the configuration ({why}); refreshing",
                cfg.cache_path.display()
            ),
        }
    }
    let grid = build_grid(cfg.dim, cfg.r_max, cfg.grid_n, cfg.scheme)?;
    info!("solving for the ground state: {}", cfg.descriptor());
    let gs = solve_ground_state(&grid, &cfg.solver)?;
    if cfg.cache != CachePolicy::Ignore {
        if let Some(dir) = cfg.cache_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        fs::write(&cfg.cache_path, format_cache(&gs)).map_err(io_err(&cfg.cache_path))?;
        info!("wrote {}", cfg.cache_path.display());
    }
    Ok((gs, Source::Solved))
}

fn path(cfg: &RunConfig, stem: &str, ext: &str) -> PathBuf {
    cfg.out.join(format!("{stem}_n{}.{ext}", cfg.dim))
}

fn residual_check(cfg: &RunConfig, gs: &GroundState) -> Result<Check> {
    let res = equation_residual(gs)?;
    Ok(Check::new(
        "residual",
        res <= cfg.solver.tol,
        format!("equation residual {res:e} against tol {:e}", cfg.solver.tol),
    ))
}

fn ground_state(cfg: &RunConfig, gs: &GroundState, out: &mut RunOutcome) -> Result<()> {
    let mut csv = String::from("r,U\n");
    for (r, u) in gs.grid().nodes().iter().zip(gs.values()) {
        let _ = writeln!(csv, "{},{}", num(*r), num(*u));
    }
    out.write(path(cfg, "ground_state", "csv"), &csv)?;

    let mut rep = String::new();
    let _ = writeln!(rep, "grid: {}", cfg.descriptor());
    let _ = writeln!(rep, "method: {}", gs.method);
    let _ = writeln!(rep, "tol: {}", num(gs.tol));
    let _ = writeln!(rep, "residual: {}", num(gs.residual));
    let _ = writeln!(rep, "l2_mass: {}", num(gs.l2_mass));
    let _ = writeln!(rep, "nu: {}", num(gs.nu));
    let _ = writeln!(rep, "energy: {}", num(gs.energy));
    let r = cfg.r_max;
    match fit_decay(gs, (0.5 * r, 0.8 * r)) {
        Ok(f) => {
            let _ = writeln!(rep, "decay_slope: {}", num(f.slope));
            let _ = writeln!(rep, "decay_fit_defect: {}", num(f.fit_defect));
        }
        Err(e) => {
            let _ = writeln!(rep, "decay_fit: unavailable ({e})");
        }
    }
    out.write(path(cfg, "ground_state", "txt"), &rep)?;
    out.checks.push(residual_check(cfg, gs)?);
    Ok(())
}

fn spectrum(cfg: &RunConfig, gs: &GroundState, out: &mut RunOutcome) -> Result<()> {
    let rep = nondegeneracy_report_with(
        gs,
        &ReportConfig {
            k_max: cfg.k_max,
            ..Default::default()
        },
    )?;
    let mut csv = String::from("k,lambda0,lambda1,zero_mode_residual,W_k\n");
    for s in &rep.sectors {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            s.k,
            num(s.lambda0),
            num(s.lambda1),
            num(rep.zero_mode_residual),
            opt(s.wk.map(|w| w.0))
        );
    }
    out.write(path(cfg, "spectrum", "csv"), &csv)?;

    let mut txt = String::new();
    let _ = writeln!(txt, "grid: {}", cfg.descriptor());
    let _ = writeln!(txt, "verdict: {}", if rep.nondegenerate { "nondegenerate" } else { "not certified" });
    let _ = writeln!(txt, "zero_mode_residual: {}", num(rep.zero_mode_residual));
    let _ = writeln!(txt, "tol_zero: {}", num(rep.tol_zero));
    let _ = writeln!(txt, "radial_min_abs: {}", num(rep.radial_min_abs));
    let _ = writeln!(txt, "gap: {}", num(rep.gap));
    let _ = writeln!(txt, "k,lambda0,lambda1,sign_changes,W_k,W_k_alt,W_k_centrifugal,zero_mode_correlation,error");
    for s in &rep.sectors {
        let _ = writeln!(
            txt,
            "{},{},{},{},{},{},{},{},{}",
            s.k,
            num(s.lambda0),
            num(s.lambda1),
            s.sign_changes,
            opt(s.wk.map(|w| w.0)),
            opt(s.wk.map(|w| w.1)),
            opt(s.wk_centrifugal),
            opt(s.zero_mode_correlation),
            s.error.as_deref().unwrap_or("")
        );
    }
    for f in &rep.failures {
        let _ = writeln!(txt, "failure: {f}");
    }
    out.write(path(cfg, "nondegeneracy", "txt"), &txt)?;

    let failure = |prefix: &str| rep.failures.iter().find(|f| f.starts_with(prefix)).cloned();
    let l10 = rep.sector(1).map_or(f64::NAN, |s| s.lambda0);
    let passed = [
        format!("|lambda_1,0| = {:e} below {:e}", l10.abs(), rep.tol_zero),
        format!("min |lambda_0| = {:e} exceeds {:e}", rep.radial_min_abs, rep.gap),
        format!("lambda_k,0 > 0 for k = 2..{}", cfg.k_max),
    ];
    for ((name, prefix), ok) in [("zero_mode", "zero_mode:"), ("radial_gap", "radial_gap:"), ("positivity", "positivity:")]
        .into_iter()
        .zip(passed)
    {
        let f = failure(prefix);
        out.checks.push(Check::new(name, f.is_none(), f.unwrap_or(ok)));
    }
    let broken: Vec<_> = rep.sectors.iter().filter(|s| s.error.is_some()).map(|s| s.k).collect();
    out.checks.push(Check::new("sectors", broken.is_empty(), format!("sectors with solver errors: {broken:?}")));
    let bad_wk: Vec<_> = rep
        .sectors
        .iter()
        .filter(|s| s.k >= 2 && !s.wk.map_or(false, |w| w.0 > 0.0))
        .map(|s| s.k)
        .collect();
    let detail = if bad_wk.is_empty() {
        format!("W_k > 0 for k = 2..{}", cfg.k_max)
    } else {
        format!("W_k not positive for k in {bad_wk:?}")
    };
    out.checks.push(Check::new("wk_positive", bad_wk.is_empty(), detail));
    let corr = rep.sector(1).and_then(|s| s.zero_mode_correlation).unwrap_or(f64::NAN);
    out.checks.push(Check::new(
        "zero_mode_correlation",
        corr > 0.999,
        format!("correlation of phi_1,0 with U' is {corr}"),
    ));
    Ok(())
}

fn identities(cfg: &RunConfig, gs: &GroundState, out: &mut RunOutcome) -> Result<()> {
    let rows = [
        ("LU+2(I2*U^2)U", "identity_lu", check_identity_lu(gs)?),
        ("L(rU')+2U-4(I2*U^2)U", "identity_ru", check_identity_ru(gs)?),
        ("L(2U+rU')+2U", "identity_2u_ru", check_identity_2u_ru(gs)?),
    ];
    let mut csv = String::from("identity,defect\n");
    for (label, name, d) in rows {
        let _ = writeln!(csv, "{label},{}", num(d));
        out.checks
            .push(Check::new(name, d < IDENTITY_TOL, format!("{label}: relative defect {d:e}")));
    }
    out.write(path(cfg, "identities", "csv"), &csv)
}

/// Three Gaussian bumps of width 0.12 inside the ball of radius 0.8.
pub fn multipole_test_density(y: &[f64]) -> f64 {
    let centres = [[0.3, 0.1, -0.2], [-0.25, 0.2, 0.15], [0.05, -0.35, 0.1]];
    let amps = [1.0, -0.6, 0.8];
    let s2 = 0.12f64 * 0.12;
    centres
        .iter()
        .zip(amps)
        .map(|(c, a)| {
            let d2 = (y[0] - c[0]).powi(2) + (y[1] - c[1]).powi(2) + (y[2] - c[2]).powi(2);
            a * (-d2 / (2.0 * s2)).exp()
        })
        .sum()
}

/// Evaluation points with `r_< / r_> <= 0.5` against the support of the test density.
pub const MULTIPOLE_POINTS: [[f64; 3]; 3] = [[2.0, 0.0, 0.0], [0.0, -1.2, 1.6], [1.1, 1.1, -1.1]];

fn multipole_verify(cfg: &RunConfig, out: &mut RunOutcome) -> Result<()> {
    let g = build_grid(3, 2.5, 64, Scheme::CompositeClenshawCurtis)?;
    let coeffs = project_real_harmonics(&g, cfg.k_max, 40, multipole_test_density)?;
    let pots = multipole_potential(&g, &coeffs)?;
    let cube = GriddedFunction::sample(|y| multipole_test_density(&y), [0.0; 3], 2.5, 64, 1)?;
    let truth: Vec<f64> = MULTIPOLE_POINTS
        .iter()
        .map(|x| direct_newton_potential_nd(3, &cube, x))
        .collect::<hartree_core::Result<_>>()?;
    let mut csv = String::from("point,x1,x2,x3,k_max,expansion,oracle,abs_error\n");
    let mut worst = Vec::with_capacity(cfg.k_max + 1);
    for k_max in 0..=cfg.k_max {
        let part: Vec<_> = pots.iter().filter(|(k, _, _)| *k <= k_max).cloned().collect();
        let mut w = 0.0f64;
        for (i, (x, t)) in MULTIPOLE_POINTS.iter().zip(&truth).enumerate() {
            let e = expansion_value(&part, x)?;
            let err = (e - t).abs();
            w = w.max(err);
            let _ = writeln!(
                csv,
                "{i},{},{},{},{k_max},{},{},{}",
                num(x[0]),
                num(x[1]),
                num(x[2]),
                num(e),
                num(*t),
                num(err)
            );
        }
        worst.push(w);
    }
    out.write(cfg.out.join("multipole_n3.csv"), &csv)?;
    let last = *worst.last().unwrap_or(&f64::NAN);
    out.checks.push(Check::new(
        "multipole_error",
        last < MULTIPOLE_TOL,
        format!("max error {last:e} at K_max = {}", cfg.k_max),
    ));
    let monotone = worst.windows(2).all(|w| w[1] < w[0]);
    out.checks.push(Check::new(
        "multipole_monotone",
        monotone,
        format!("max errors by K_max: {worst:?}"),
    ));
    Ok(())
}

fn fit_line(txt: &mut String, name: &str, fit: &Option<ExponentFit>) {
    match fit {
        Some(f) => {
            let _ = writeln!(
                txt,
                "{name}_exponent: {} ci [{}, {}] std_error {} residual {}",
                num(f.exponent),
                num(f.ci.0),
                num(f.ci.1),
                num(f.std_error),
                num(f.residual)
            );
        }
        None => {
            let _ = writeln!(txt, "{name}_exponent: not fitted (values at roundoff)");
        }
    }
}

fn semiclassical(cfg: &RunConfig, gs: &GroundState, out: &mut RunOutcome) -> Result<()> {
    let v = cfg.potential_field()?;
    let sweep = SweepConfig {
        eps: cfg.eps.clone(),
        shell_degree: cfg.shell_degree,
        ..Default::default()
    };
    let rep = semiclassical_sweep(gs, &v, &cfg.point, &sweep)?;
    let eps_last = *cfg.eps.last().expect("validated eps list");
    let search = CriticalSearch {
        shell_degree: cfg.shell_degree,
        ..Default::default()
    };
    let conc = predict_concentration(gs, &v, &SampleBox::cube(cfg.dim, cfg.box_half)?, eps_last, &search)?;

    let mut csv = String::from("eps,mu,energy,leading,energy_error,proxy,gamma\n");
    for r in &rep.records {
        let t = &r.terms;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            num(r.eps),
            num(t.mu),
            num(t.energy),
            num(t.leading),
            num(r.energy_error),
            num(t.proxy),
            num(t.gamma)
        );
    }
    out.write(path(cfg, "semiclassical", "csv"), &csv)?;

    let coords: Vec<String> = (1..=cfg.dim).map(|i| format!("x{i}")).collect();
    let mut csv = format!("{},value,kind,h,proxy,gradient_norm\n", coords.join(","));
    for p in &conc.points {
        let xs: Vec<String> = p.x.iter().map(|x| num(*x)).collect();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            xs.join(","),
            num(p.value),
            p.kind.name(),
            num(p.h),
            opt(p.proxy),
            num(p.gradient_norm)
        );
    }
    out.write(path(cfg, "concentration", "csv"), &csv)?;

    let mut txt = String::new();
    let _ = writeln!(txt, "grid: {}", cfg.descriptor());
    let _ = writeln!(txt, "potential: {v}");
    let pt: Vec<String> = cfg.point.iter().map(|x| num(*x)).collect();
    let _ = writeln!(txt, "point: {}", pt.join(","));
    let _ = writeln!(txt, "C0: {}", num(constant_c0(gs)?));
    let _ = writeln!(txt, "C1: {}", num(constant_c1(gs)?));
    fit_line(&mut txt, "proxy", &rep.proxy_fit);
    fit_line(&mut txt, "gamma", &rep.gamma_fit);
    fit_line(&mut txt, "energy_error", &rep.energy_error_fit);
    let _ = writeln!(txt, "critical_points: {} (box half width {})", conc.points.len(), num(cfg.box_half));
    if let Some(note) = &conc.note {
        let _ = writeln!(txt, "note: {note}");
    }
    out.write(path(cfg, "semiclassical", "txt"), &txt)?;

    if let Some((lo, hi)) = cfg.expect_proxy_exponent {
        let e = rep.proxy_fit.map_or(f64::NAN, |f| f.exponent);
        out.checks.push(Check::new(
            "proxy_exponent",
            (lo..=hi).contains(&e),
            format!("fitted exponent {e} against [{lo}, {hi}]"),
        ));
    }
    Ok(())
}

/// Runs `cfg` and writes a one-line summary per check into `summary_<command>_n<n>.txt`.
pub fn run_and_summarize(cfg: &RunConfig) -> Result<RunOutcome> {
    let mut out = run(cfg)?;
    let mut txt = String::new();
    for c in &out.checks {
        let _ = writeln!(txt, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let p: &Path = &cfg.out;
    out.write(p.join(format!("summary_{}_n{}.txt", cfg.command, cfg.dim)), &txt)?;
    Ok(out)
}
