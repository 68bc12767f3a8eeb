//! Semiclassical quantities around the rescaled soliton
//! `z_xi(x) = (1+mu) U(sqrt(1+mu)(x - xi))`, `mu = V(eps xi)`: soliton energies,
//! the gradient-bound proxy, the leading part of `Gamma_eps`, and critical
//! points of `V` as predicted concentration points.

pub mod potential;

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::discrete::{matvec, SpectralOps};
use crate::error::{invalid, HartreeError, Result};
use crate::ground_state::{potential_of_square, rescale_state, GroundState};
use crate::radial::{sphere_area, Parity, RadialFunction, RadialGrid};
use crate::sphere::AngularRule;

pub use potential::{Expr, Potential, PotentialField, SampleBox};

pub const DEFAULT_EPS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
pub const DEFAULT_SHELL_DEGREE: usize = 20;
/// Degree added for the refinement check of shell integrals.
pub const CHECK_DEGREE_STEP: usize = 6;
pub const DEFAULT_SHELL_TOL: f64 = 1e-8;

/// `int (I_2 * f^2) f^2 dx` with the potential from the `k = 0` kernel matrix.
pub fn quartic_pairing(f: &RadialFunction) -> Result<f64> {
    let grid = f.grid();
    let ops = SpectralOps::for_grid(grid)?;
    let sq: Vec<f64> = f.values().iter().map(|x| x * x).collect();
    let v = potential_of_square(&ops, f.values());
    let s: f64 = grid.weights().iter().zip(&v).zip(&sq).map(|((w, p), q)| w * p * q).sum();
    Ok(sphere_area(grid.dim())? * s)
}

/// The same integral as twice the half `rho < r` of the symmetric double
/// integral, where `G_0(r, rho) = r^{2-n}/(n-2)` is smooth.
pub fn quartic_split(f: &RadialFunction) -> Result<f64> {
    let grid = f.grid();
    let n = grid.dim() as f64;
    let sq: Vec<f64> = f.values().iter().map(|x| x * x).collect();
    let terms: Vec<f64> = grid
        .nodes()
        .par_iter()
        .zip(grid.weights())
        .zip(&sq)
        .map(|((&r, &w), &q)| {
            let inner = grid.integrate_interval(&sq, Parity::Even, 0.0, r, |s| s.powf(n - 1.0));
            w * q * inner / ((n - 2.0) * r.powf(n - 2.0))
        })
        .collect();
    Ok(2.0 * sphere_area(grid.dim())? * terms.iter().sum::<f64>())
}

/// `iint f^2(x) f^2(y) |x-y|^{2-n} dx dy`.
pub fn constant_c0_of(f: &RadialFunction) -> Result<f64> {
    let n = f.grid().dim();
    Ok((n as f64 - 2.0) * sphere_area(n)? * quartic_pairing(f)?)
}

/// `C_0 = iint U^2(x) U^2(y) |x-y|^{2-n} dx dy`.
pub fn constant_c0(gs: &GroundState) -> Result<f64> {
    constant_c0_of(&gs.profile)
}

/// `C_1 = (1/4) int (I_2 * U^2) U^2`, the coefficient of the leading term
/// `C_1 (1 + V)^{3-n/2}`; it equals the energy `F(U)`.
pub fn constant_c1(gs: &GroundState) -> Result<f64> {
    Ok(0.25 * quartic_pairing(&gs.profile)?)
}

/// `h = C_1 (1 + v)^{3 - n/2}`.
pub fn leading_term(c1: f64, dim: usize, v: f64) -> f64 {
    c1 * (1.0 + v).powf(3.0 - dim as f64 / 2.0)
}

/// Radial grid times a product rule on `S^{n-1}` around `center`, with a
/// second rule of higher degree used to detect unresolved integrands.
#[derive(Debug, Clone)]
pub struct ShellQuadrature {
    pub center: Vec<f64>,
    pub grid: Arc<RadialGrid>,
    pub rule: AngularRule,
    pub check: AngularRule,
    pub tol: f64,
}

impl ShellQuadrature {
    pub fn new(grid: &Arc<RadialGrid>, center: Vec<f64>, degree: usize) -> Result<Self> {
        let n = grid.dim();
        if center.len() != n {
            return invalid(format!("center has length {}, dimension is {n}", center.len()));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(HartreeError::NonFinite("shell center".into()));
        }
        Ok(ShellQuadrature {
            center,
            grid: Arc::clone(grid),
            rule: AngularRule::new(n, degree)?,
            check: AngularRule::new(n, degree + CHECK_DEGREE_STEP)?,
            tol: DEFAULT_SHELL_TOL,
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn recentered(&self, center: Vec<f64>) -> Result<Self> {
        if center.len() != self.center.len() {
            return invalid("recentered shell has the wrong dimension");
        }
        Ok(ShellQuadrature { center, ..self.clone() })
    }

    pub fn degree(&self) -> usize {
        self.rule.degree
    }
}

/// Every term of `f_eps(z_xi)` that the module evaluates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonTerms {
    /// `mu = V(eps xi)`.
    pub mu: f64,
    /// `f_eps(z_xi)`.
    pub energy: f64,
    /// `C_1 (1 + mu)^{3 - n/2}`.
    pub leading: f64,
    /// `(int |V(eps x) - V(eps xi)|^2 z_xi^2)^{1/2}`.
    pub proxy: f64,
    /// `(1/2) int (V(eps x) - V(eps xi)) z_xi^2`.
    pub gamma: f64,
}

#[derive(Default, Clone, Copy)]
struct ShellSums {
    dv: f64,
    abs_dv: f64,
    dv2: f64,
}

impl std::ops::Add for ShellSums {
    type Output = ShellSums;
    fn add(self, o: ShellSums) -> ShellSums {
        ShellSums {
            dv: self.dv + o.dv,
            abs_dv: self.abs_dv + o.abs_dv,
            dv2: self.dv2 + o.dv2,
        }
    }
}

fn shell_sums(v: &PotentialField, eps: f64, p: &[f64], v0: f64, z: &[f64], grid: &RadialGrid, rule: &AngularRule) -> ShellSums {
    let mass: f64 = grid.weights().iter().zip(z).map(|(w, x)| w * x * x).sum();
    let floor = 1e-24 * mass;
    let n = p.len();
    grid.nodes()
        .par_iter()
        .zip(grid.weights())
        .zip(z)
        .filter(|((_, &w), &zi)| w * zi * zi > floor)
        .map(|((&r, &w), &zi)| {
            let mut x = vec![0.0; n];
            let mut s = ShellSums::default();
            for (pt, a) in rule.points.iter().zip(&rule.weights) {
                for d in 0..n {
                    x[d] = p[d] + eps * r * pt[d];
                }
                let dv = v.value(&x) - v0;
                s.dv += a * dv;
                s.abs_dv += a * dv.abs();
                s.dv2 += a * dv * dv;
            }
            let m = w * zi * zi;
            ShellSums {
                dv: m * s.dv,
                abs_dv: m * s.abs_dv,
                dv2: m * s.dv2,
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(ShellSums::default(), |a, b| a + b)
}

/// All terms of `f_eps(z_xi)` at `xi = shells.center`.
pub fn soliton_terms(gs: &GroundState, v: &PotentialField, eps: f64, shells: &ShellQuadrature) -> Result<SolitonTerms> {
    let n = gs.dim;
    if v.dim != n {
        return invalid(format!("potential dimension {} does not match ground state dimension {n}", v.dim));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return invalid(format!("eps must be positive, got {eps}"));
    }
    if !shells.grid.same_as(gs.grid()) {
        return Err(HartreeError::GridMismatch("shell quadrature and ground state grids differ".into()));
    }
    let p: Vec<f64> = shells.center.iter().map(|c| eps * c).collect();
    let mu = v.value(&p);
    if !(1.0 + mu > 0.0) {
        return invalid(format!("1 + V(eps xi) = {} must be positive", 1.0 + mu));
    }
    let z = rescale_state(gs, mu)?;
    let grid = gs.grid();
    let ops = SpectralOps::for_grid(grid)?;
    let area = sphere_area(n)?;
    let zv = z.values();
    let kz = matvec(&ops.stiffness(0), zv);
    let grad2 = area * kz.iter().zip(zv).map(|(a, b)| a * b).sum::<f64>();
    let mass = area * ops.dot(zv, zv);
    let quartic = quartic_pairing(&z)?;

    let a = shell_sums(v, eps, &p, mu, zv, grid, &shells.rule);
    let b = shell_sums(v, eps, &p, mu, zv, grid, &shells.check);
    let tol = shells.tol;
    if (a.dv - b.dv).abs() > tol * a.abs_dv.max(b.abs_dv) || (a.dv2 - b.dv2).abs() > tol * a.dv2.max(b.dv2) {
        return Err(HartreeError::Unsupported(format!(
            "shell rule of degree {} does not resolve V: degree {} changes the integrals by {:e}",
            shells.rule.degree,
            shells.check.degree,
            ((a.dv - b.dv).abs() / a.abs_dv.max(1e-300)).max((a.dv2 - b.dv2).abs() / a.dv2.max(1e-300))
        )));
    }
    let v_term = mu * mass + a.dv;
    let energy = 0.5 * (grad2 + mass) - 0.25 * quartic + 0.5 * v_term;
    let c1 = constant_c1(gs)?;
    Ok(SolitonTerms {
        mu,
        energy,
        leading: leading_term(c1, n, mu),
        proxy: a.dv2.max(0.0).sqrt(),
        gamma: 0.5 * a.dv,
    })
}

/// `f_eps(z_xi) = (1/2)||z||^2 - (1/4) int (I_2 * z^2) z^2 + (1/2) int V(eps x) z^2`.
pub fn soliton_energy(gs: &GroundState, v: &PotentialField, eps: f64, shells: &ShellQuadrature) -> Result<f64> {
    Ok(soliton_terms(gs, v, eps, shells)?.energy)
}

/// `(int |V(eps x) - V(eps xi)|^2 z_xi^2 dx)^{1/2}`, which bounds `||Df_eps(z_xi)||`.
pub fn gradient_bound_proxy(gs: &GroundState, v: &PotentialField, eps: f64, shells: &ShellQuadrature) -> Result<f64> {
    Ok(soliton_terms(gs, v, eps, shells)?.proxy)
}

/// `(1/2) int (V(eps x) - V(eps xi)) z_xi^2 dx`, the part of `Gamma_eps` without
/// the corrector.
pub fn gamma_leading(gs: &GroundState, v: &PotentialField, eps: f64, shells: &ShellQuadrature) -> Result<f64> {
    Ok(soliton_terms(gs, v, eps, shells)?.gamma)
}

/// Least-squares slope of `log y` against `log x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    pub exponent: f64,
    pub std_error: f64,
    /// 95% interval from the Student t distribution.
    pub ci: (f64, f64),
    /// RMS residual of the log-log fit.
    pub residual: f64,
}

pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<ExponentFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return invalid("a power-law fit needs at least three (x, y) pairs");
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return invalid("power-law fit needs positive finite data");
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("power-law fit needs distinct x values");
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let ssr: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - icept - slope * x).powi(2)).sum();
    let dof = m - 2.0;
    let se = (ssr / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| HartreeError::InvalidParameter(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(ExponentFit {
        exponent: slope,
        std_error: se,
        ci: (slope - t * se, slope + t * se),
        residual: (ssr / m).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Strictly decreasing.
    pub eps: Vec<f64>,
    pub shell_degree: usize,
    pub shell_tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eps: DEFAULT_EPS.to_vec(),
            shell_degree: DEFAULT_SHELL_DEGREE,
            shell_tol: DEFAULT_SHELL_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsRecord {
    pub eps: f64,
    pub terms: SolitonTerms,
    /// `|f_eps(z_xi) - C_1 (1 + V)^{3-n/2}|`.
    pub energy_error: f64,
}

#[derive(Debug, Clone)]
pub struct SemiclassicalReport {
    pub dim: usize,
    /// Concentration point `eps xi`, held fixed across the sweep.
    pub point: Vec<f64>,
    pub c1: f64,
    pub records: Vec<EpsRecord>,
    pub proxy_fit: Option<ExponentFit>,
    pub gamma_fit: Option<ExponentFit>,
    pub energy_error_fit: Option<ExponentFit>,
    pub concentration: Option<Concentration>,
}

impl SemiclassicalReport {
    pub fn eps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.eps).collect()
    }
}

fn fit_if_positive(eps: &[f64], ys: &[f64], scale: f64) -> Option<ExponentFit> {
    if ys.iter().all(|y| y.abs() > 1e-13 * scale) {
        let a: Vec<f64> = ys.iter().map(|y| y.abs()).collect();
        fit_power_law(eps, &a).ok()
    } else {
        None
    }
}

/// Sweep over `eps` with the concentration point `eps xi = point` fixed.
pub fn semiclassical_sweep(
    gs: &GroundState,
    v: &PotentialField,
    point: &[f64],
    cfg: &SweepConfig,
) -> Result<SemiclassicalReport> {
    if cfg.eps.is_empty() || cfg.eps.windows(2).any(|w| !(w[1] < w[0])) || cfg.eps.iter().any(|e| !(*e > 0.0)) {
        return invalid("eps list must be positive and strictly decreasing");
    }
    let shells = ShellQuadrature::new(gs.grid(), point.to_vec(), cfg.shell_degree)?.with_tol(cfg.shell_tol);
    let records: Vec<EpsRecord> = cfg
        .eps
        .par_iter()
        .map(|&eps| {
            let xi: Vec<f64> = point.iter().map(|p| p / eps).collect();
            let terms = soliton_terms(gs, v, eps, &shells.recentered(xi)?)?;
            Ok(EpsRecord {
                eps,
                terms,
                energy_error: (terms.energy - terms.leading).abs(),
            })
        })
        .collect::<Result<_>>()?;
    let eps = cfg.eps.clone();
    let c1 = constant_c1(gs)?;
    let scale = c1.abs().max(1.0);
    let proxies: Vec<f64> = records.iter().map(|r| r.terms.proxy).collect();
    let gammas: Vec<f64> = records.iter().map(|r| r.terms.gamma).collect();
    let errors: Vec<f64> = records.iter().map(|r| r.energy_error).collect();
    Ok(SemiclassicalReport {
        dim: gs.dim,
        point: point.to_vec(),
        c1,
        proxy_fit: fit_if_positive(&eps, &proxies, scale),
        gamma_fit: fit_if_positive(&eps, &gammas, scale),
        energy_error_fit: fit_if_positive(&eps, &errors, scale),
        records,
        concentration: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalKind {
    Minimum,
    Maximum,
    Saddle,
    Degenerate,
}

impl CriticalKind {
    pub fn name(self) -> &'static str {
        match self {
            CriticalKind::Minimum => "minimum",
            CriticalKind::Maximum => "maximum",
            CriticalKind::Saddle => "saddle",
            CriticalKind::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub hessian_eigenvalues: Vec<f64>,
    pub kind: CriticalKind,
    /// `h = C_1 (1 + V)^{3 - n/2}`, filled in by [`predict_concentration`].
    pub h: f64,
    /// Gradient-bound proxy at scale `eps`, filled in by [`predict_concentration`].
    pub proxy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSearch {
    /// Starts per axis of the lattice; `None` picks 7, 5, 3 for n = 3, 4, 5.
    pub starts_per_axis: Option<usize>,
    pub grad_tol: f64,
    /// Points whose final gradient norm exceeds this are dropped.
    pub accept_tol: f64,
    pub max_iter: usize,
    pub merge_radius: f64,
    /// Hessian eigenvalues below this fraction of the largest one count as zero.
    pub degenerate_ratio: f64,
    pub shell_degree: usize,
    /// Gradient-bound proxies are computed for at most this many points.
    pub max_proxies: usize,
}

impl Default for CriticalSearch {
    fn default() -> Self {
        CriticalSearch {
            starts_per_axis: None,
            grad_tol: 1e-13,
            accept_tol: 1e-7,
            max_iter: 200,
            merge_radius: 1e-6,
            degenerate_ratio: 1e-6,
            shell_degree: DEFAULT_SHELL_DEGREE,
            max_proxies: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concentration {
    pub eps: f64,
    pub points: Vec<CriticalPoint>,
    /// Set when the search found nothing in the box.
    pub note: Option<String>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Levenberg–Marquardt on `|grad V|^2`, which reduces to Newton on
/// `grad V = 0` near nondegenerate points.
fn polish(v: &PotentialField, start: &[f64], cfg: &CriticalSearch) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut x = start.to_vec();
    let mut g = v.gradient(&x);
    let mut gn = norm(&g);
    let mut lambda = 1e-3;
    for _ in 0..cfg.max_iter {
        if gn <= cfg.grad_tol * (1.0 + v.value(&x).abs()) {
            break;
        }
        let h = v.hessian(&x);
        let hth = h.transpose() * &h;
        let scale = hth.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs())).max(1e-300);
        let rhs = -(h.transpose() * nalgebra::DVector::from_column_slice(&g));
        let mut moved = false;
        while lambda < 1e12 {
            let a = &hth + DMatrix::identity(n, n) * (lambda * scale);
            let Some(step) = a.cholesky().map(|c| c.solve(&rhs)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let tg = v.gradient(&trial);
            let tn = norm(&tg);
            if tn < gn {
                let small = step.norm() <= 1e-15 * (1.0 + norm(&x));
                x = trial;
                g = tg;
                gn = tn;
                lambda = (lambda / 10.0).max(1e-15);
                moved = !small;
                break;
            }
            lambda *= 10.0;
        }
        if !moved {
            break;
        }
    }
    (x, gn)
}

fn classify(h: &DMatrix<f64>, ratio: f64) -> (Vec<f64>, CriticalKind) {
    let eig = h.clone().symmetric_eigen();
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    let big = ev.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let kind = if big == 0.0 || ev.iter().any(|e| e.abs() <= ratio * big) {
        CriticalKind::Degenerate
    } else if ev.iter().all(|e| *e > 0.0) {
        CriticalKind::Minimum
    } else if ev.iter().all(|e| *e < 0.0) {
        CriticalKind::Maximum
    } else {
        CriticalKind::Saddle
    };
    (ev, kind)
}

/// Critical points of `V` in `bx` by multistart gradient-norm minimization.
pub fn find_critical_points(v: &PotentialField, bx: &SampleBox, cfg: &CriticalSearch) -> Result<Vec<CriticalPoint>> {
    let n = v.dim;
    if bx.dim() != n {
        return invalid(format!("box dimension {} does not match potential dimension {n}", bx.dim()));
    }
    let per_axis = cfg.starts_per_axis.unwrap_or(match n {
        3 => 7,
        4 => 5,
        _ => 3,
    });
    let found: Vec<(Vec<f64>, f64)> = bx
        .lattice(per_axis, true)
        .par_iter()
        .map(|s| polish(v, s, cfg))
        .filter(|(x, gn)| *gn <= cfg.accept_tol && x.iter().all(|c| c.is_finite()) && bx.contains(x, 1e-9))
        .collect();
    let mut points: Vec<CriticalPoint> = Vec::new();
    for (x, gn) in found {
        let dup = points.iter_mut().find(|p| {
            let d: f64 = p.x.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            d <= cfg.merge_radius * (1.0 + norm(&x))
        });
        match dup {
            Some(p) if p.gradient_norm <= gn => {}
            Some(p) => {
                p.x = x;
                p.gradient_norm = gn;
            }
            None => points.push(CriticalPoint {
                x,
                value: 0.0,
                gradient_norm: gn,
                hessian_eigenvalues: Vec::new(),
                kind: CriticalKind::Degenerate,
                h: f64::NAN,
                proxy: None,
            }),
        }
    }
    for p in &mut points {
        p.value = v.value(&p.x);
        let (ev, kind) = classify(&v.hessian(&p.x), cfg.degenerate_ratio);
        p.hessian_eigenvalues = ev;
        p.kind = kind;
    }
    points.sort_by(|a, b| a.value.total_cmp(&b.value).then_with(|| a.x.partial_cmp(&b.x).unwrap_or(std::cmp::Ordering::Equal)));
    Ok(points)
}

/// Critical points of `V` in `bx`, each with `h(xi) = C_1 (1+V(xi))^{3-n/2}`
/// and the gradient-bound proxy at scale `eps`. An empty result carries a
/// note instead of an error.
pub fn predict_concentration(
    gs: &GroundState,
    v: &PotentialField,
    bx: &SampleBox,
    eps: f64,
    cfg: &CriticalSearch,
) -> Result<Concentration> {
    if !(eps > 0.0) {
        return invalid(format!("eps must be positive, got {eps}"));
    }
    v.lower_bound_check(bx, 9)?;
    let c1 = constant_c1(gs)?;
    let mut points = find_critical_points(v, bx, cfg)?;
    let shells = ShellQuadrature::new(gs.grid(), vec![0.0; v.dim], cfg.shell_degree)?;
    for (i, p) in points.iter_mut().enumerate() {
        p.h = leading_term(c1, v.dim, p.value);
        if i < cfg.max_proxies {
            let xi: Vec<f64> = p.x.iter().map(|c| c / eps).collect();
            p.proxy = Some(gradient_bound_proxy(gs, v, eps, &shells.recentered(xi)?)?);
        }
    }
    let note = points
        .is_empty()
        .then(|| "no critical point of V found in the box".to_string());
    Ok(Concentration { eps, points, note })
}
