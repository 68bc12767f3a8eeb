//! Positive radial ground state of `-Delta u + (1+mu) u = (I_2 * u^2) u`.

mod cache;
mod fixed_point;
mod shooting;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::discrete::{matvec, SpectralOps};
use crate::error::{invalid, HartreeError, Result};
use crate::quadrature::{gamma, gauss_legendre};
use crate::radial::{sphere_area, Parity, RadialFunction, RadialGrid, Tail};

pub use cache::{format_cache, parse_cache, CacheHeader, CachedProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Shooting,
    FixedPoint,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Shooting => "shooting",
            Method::FixedPoint => "fixed_point",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HartreeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shooting" => Ok(Method::Shooting),
            "fixed_point" => Ok(Method::FixedPoint),
            other => Err(HartreeError::Parse(format!("unknown solver method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::FixedPoint,
            tol: 1e-10,
            max_iter: 2000,
            damping: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return invalid(format!("solver tol must be positive, got {}", self.tol));
        }
        if self.max_iter < 1 {
            return invalid("solver max_iter must be at least 1");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return invalid(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub dim: usize,
    pub profile: RadialFunction,
    pub potential: RadialFunction,
    pub l2_mass: f64,
    pub energy: f64,
    pub nu: f64,
    pub residual: f64,
    pub mu: f64,
    pub method: Method,
    pub tol: f64,
}

/// `nu` with `nu^{n-2} = Gamma((n-2)/2) / (4 pi^{n/2}) * mass`.
pub fn nu_from_mass(n: usize, mass: f64) -> f64 {
    let h = (n as f64 - 2.0) / 2.0;
    let c = gamma(h) / (4.0 * std::f64::consts::PI.powf(n as f64 / 2.0));
    (c * mass).powf(1.0 / (n as f64 - 2.0))
}

impl GroundState {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.profile.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.profile.values()
    }

    /// Builds the record for a converged profile, recomputing every derived
    /// quantity from the grid operators.
    pub fn from_profile(
        grid: &Arc<RadialGrid>,
        values: Vec<f64>,
        mu: f64,
        method: Method,
        tol: f64,
    ) -> Result<Self> {
        let ops = SpectralOps::for_grid(grid)?;
        if values.len() != grid.len() {
            return Err(HartreeError::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(HartreeError::NonFinite("ground-state profile".into()));
        }
        if let Some(i) = values.iter().position(|&v| v <= 0.0) {
            return Err(HartreeError::PositivityLost(format!(
                "profile value {:e} at r = {}",
                values[i],
                grid.nodes()[i]
            )));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] > w[0]) {
            return Err(HartreeError::PositivityLost(format!(
                "profile increases between r = {} and r = {}",
                grid.nodes()[i],
                grid.nodes()[i + 1]
            )));
        }
        let n = grid.dim();
        let area = sphere_area(n)?;
        let v = potential_of_square(&ops, &values);
        let omega = 1.0 + mu;
        let stiff = ops.stiffness(0);
        let ku = matvec(&stiff, &values);
        let grad2: f64 = ku.iter().zip(&values).map(|(a, b)| a * b).sum();
        let mass_radial = ops.dot(&values, &values);
        let quartic: f64 = ops
            .weights()
            .iter()
            .zip(values.iter().zip(&v))
            .map(|(w, (u, p))| w * p * u * u)
            .sum();
        let energy = area * (0.5 * grad2 + 0.5 * omega * mass_radial - 0.25 * quartic);
        let l2_mass = area * mass_radial;
        let residual = residual_of(&ops, &values, &v, mu);
        let tail = fit_tail(grid, &values);
        let profile = RadialFunction::new(Arc::clone(grid), values)?.with_tail(tail);
        let potential = RadialFunction::new(Arc::clone(grid), v)?;
        Ok(GroundState {
            dim: n,
            profile,
            potential,
            l2_mass,
            energy,
            nu: nu_from_mass(n, l2_mass),
            residual,
            mu,
            method,
            tol,
        })
    }
}

/// `I_2 * u^2` at the nodes through the `k = 0` kernel matrix.
pub(crate) fn potential_of_square(ops: &SpectralOps, u: &[f64]) -> Vec<f64> {
    let g0 = ops.sector_kernel(0, Parity::Even);
    let u2: Vec<f64> = u.iter().map(|x| x * x).collect();
    matvec(&g0, &u2)
}

/// `|| -Delta u + (1+mu) u - v u || / ||u||` in `L^2(r^{n-1} dr)`, with the
/// Laplacian `-u'' - (n-1)/r u'` taken pointwise from the differentiation
/// matrices. Regularity at the origin is built into the even representation.
pub(crate) fn residual_of(ops: &SpectralOps, u: &[f64], v: &[f64], mu: f64) -> f64 {
    let du = ops.differentiate(u, Parity::Even);
    let d2u = ops.differentiate(&du, Parity::Odd);
    let m = ops.dim() as f64 - 1.0;
    let mut num = 0.0;
    for (i, (&w, &r)) in ops.weights().iter().zip(ops.nodes()).enumerate() {
        let d = -d2u[i] - m / r * du[i] + (1.0 + mu) * u[i] - v[i] * u[i];
        num += w * d * d;
    }
    num.sqrt() / ops.norm(u)
}

/// Same defect in the weak form `W^{-1} K u`, the quantity the discrete
/// solver drives to zero.
pub(crate) fn weak_residual_of(ops: &SpectralOps, u: &[f64], v: &[f64], mu: f64) -> f64 {
    let ku = matvec(&ops.stiffness(0), u);
    let w = ops.weights();
    let mut num = 0.0;
    for i in 0..u.len() {
        let d = ku[i] / w[i] + (1.0 + mu) * u[i] - v[i] * u[i];
        num += w[i] * d * d;
    }
    num.sqrt() / ops.norm(u)
}

fn fit_tail(grid: &RadialGrid, values: &[f64]) -> Option<Tail> {
    let r_max = grid.r_max();
    let pts: Vec<(f64, f64)> = grid
        .nodes()
        .iter()
        .zip(values)
        .filter(|(&r, &u)| r > 0.6 * r_max && r < 0.85 * r_max && u > 0.0)
        .map(|(&r, &u)| (r, u.ln()))
        .collect();
    let (slope, icept) = least_squares(&pts)?;
    Tail::new(icept.exp(), -slope).ok()
}

/// Ordinary least squares line `y = slope x + intercept`.
pub(crate) fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

pub fn solve_ground_state(grid: &Arc<RadialGrid>, cfg: &SolverConfig) -> Result<GroundState> {
    solve_ground_state_shifted(grid, cfg, 0.0)
}

/// Ground state of the equation with mass `1 + mu`.
pub fn solve_ground_state_shifted(
    grid: &Arc<RadialGrid>,
    cfg: &SolverConfig,
    mu: f64,
) -> Result<GroundState> {
    let gs = solve_discrete(grid, cfg, mu)?;
    if gs.residual > cfg.tol {
        return Err(HartreeError::NotConverged {
            iterations: cfg.max_iter,
            best_residual: gs.residual,
        });
    }
    Ok(gs)
}

/// Solves the discrete equations without requiring the collocation defect,
/// which includes the truncation error of the grid, to be below `tol`.
/// Meant for refinement studies on coarse grids.
pub fn solve_discrete(grid: &Arc<RadialGrid>, cfg: &SolverConfig, mu: f64) -> Result<GroundState> {
    cfg.validate()?;
    if !(1.0 + mu > 0.0) {
        return invalid(format!("mass shift needs 1 + mu > 0, got mu = {mu}"));
    }
    let ops = SpectralOps::for_grid(grid)?;
    let mut values = match cfg.method {
        Method::FixedPoint => fixed_point::solve(&ops, cfg, mu)?,
        Method::Shooting => shooting::solve(grid, cfg, mu)?,
    };
    clamp_tail_noise(&mut values);
    GroundState::from_profile(grid, values, mu, cfg.method, cfg.tol)
}

/// `U(s)` that hands over to the tail model across the window the tail was
/// fitted on, so that the values carry no kink from the boundary layer at
/// `r_max`.
fn blended_profile(u: &RadialFunction, tail: Tail, s: f64, r_max: f64) -> f64 {
    let (a, b) = (0.6 * r_max, 0.85 * r_max);
    if s <= a {
        return u.evaluate(s);
    }
    if s >= b {
        return tail.value(s);
    }
    let x = (s - a) / (b - a);
    let w = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
    let inner = u.evaluate(s);
    if inner <= 0.0 {
        return tail.value(s);
    }
    ((1.0 - w) * inner.ln() + w * tail.value(s).ln()).exp()
}

/// Removes increases at the roundoff level of `max |u|` from the far tail.
fn clamp_tail_noise(values: &mut [f64]) {
    let floor = 64.0 * f64::EPSILON * values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 1..values.len() {
        let prev = values[i - 1];
        if values[i] > prev && values[i] - prev <= floor {
            values[i] = prev;
        }
    }
}

/// Relative equation defect of a ground-state record.
pub fn equation_residual(gs: &GroundState) -> Result<f64> {
    let ops = SpectralOps::for_grid(gs.grid())?;
    profile_residual(&ops, gs.values(), gs.mu)
}

/// Relative defect of arbitrary node values; zero for the zero profile.
pub fn profile_residual(ops: &SpectralOps, u: &[f64], mu: f64) -> Result<f64> {
    if u.len() != ops.len() {
        return Err(HartreeError::GridMismatch("profile length".into()));
    }
    if u.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let v = potential_of_square(ops, u);
    Ok(residual_of(ops, u, &v, mu))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Least-squares slope of `log U + (n-1)/2 log r` against the WKB phase
    /// `int_nu^r sqrt(1 - (nu/s)^{n-2}) ds`; tends to `-1`.
    pub slope: f64,
    /// Effective decay rate, `-slope`.
    pub rate: f64,
    /// RMS residual of the phase fit relative to the spread of the data.
    pub fit_defect: f64,
    /// `nu` recomputed from the mass.
    pub nu: f64,
    /// Plain slope of the same data against `r`, which still carries the
    /// `nu`-dependent correction.
    pub r_slope: f64,
}

/// `int_nu^r sqrt(1 - (nu/s)^{n-2}) ds` for `r >= nu`.
pub fn wkb_phase(n: usize, nu: f64, r: f64) -> f64 {
    if r <= nu {
        return 0.0;
    }
    // s = nu + t^2 removes the square-root endpoint behaviour
    let top = (r - nu).sqrt();
    gauss_legendre(64).integrate(0.0, top, |t| {
        let s = nu + t * t;
        2.0 * t * (1.0 - (nu / s).powi(n as i32 - 2)).max(0.0).sqrt()
    })
}

pub fn fit_decay(gs: &GroundState, window: (f64, f64)) -> Result<DecayFit> {
    let (a, b) = window;
    let grid = gs.grid();
    if !(a > 0.0 && b > a && b < grid.r_max()) {
        return invalid(format!("decay window ({a}, {b}) must lie inside (0, r_max)"));
    }
    let nu = nu_from_mass(gs.dim, gs.l2_mass);
    if a <= nu {
        return invalid(format!("decay window must start beyond nu = {nu}"));
    }
    let half = (gs.dim as f64 - 1.0) / 2.0;
    let mut by_r = Vec::new();
    let mut by_phase = Vec::new();
    for (&r, &u) in grid.nodes().iter().zip(gs.values()) {
        if r < a || r > b {
            continue;
        }
        if u <= 1e-12 {
            return Err(HartreeError::InvalidParameter(format!(
                "profile underflows ({u:e}) inside the decay window at r = {r}"
            )));
        }
        let y = u.ln() + half * r.ln();
        by_r.push((r, y));
        by_phase.push((wkb_phase(gs.dim, nu, r), y));
    }
    if by_r.len() < 10 {
        return invalid(format!("decay window holds {} nodes, need 10", by_r.len()));
    }
    let (r_slope, _) = least_squares(&by_r).ok_or_else(|| HartreeError::InvalidParameter("degenerate window".into()))?;
    let (slope, icept) =
        least_squares(&by_phase).ok_or_else(|| HartreeError::InvalidParameter("degenerate window".into()))?;
    let my = by_phase.iter().map(|p| p.1).sum::<f64>() / by_phase.len() as f64;
    let ss_res: f64 = by_phase.iter().map(|p| (p.1 - slope * p.0 - icept).powi(2)).sum();
    let ss_tot: f64 = by_phase.iter().map(|p| (p.1 - my).powi(2)).sum();
    Ok(DecayFit {
        slope,
        rate: -slope,
        fit_defect: (ss_res / ss_tot).sqrt(),
        nu,
        r_slope,
    })
}

/// Exponential rate `tau` of `|f| ~ C e^{-tau r}` fitted on the window.
pub fn fit_exponential_rate(nodes: &[f64], values: &[f64], window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = nodes
        .iter()
        .zip(values)
        .filter(|(&r, &v)| r >= window.0 && r <= window.1 && v.abs() > 1e-300)
        .map(|(&r, &v)| (r, v.abs().ln()))
        .collect();
    if pts.len() < 10 {
        return invalid(format!("rate window holds {} nodes, need 10", pts.len()));
    }
    let (slope, _) = least_squares(&pts).ok_or_else(|| HartreeError::InvalidParameter("degenerate window".into()))?;
    Ok(-slope)
}

/// `U'` at the nodes, differentiated with the operator's own matrix.
pub fn profile_derivative(gs: &GroundState) -> Result<RadialFunction> {
    let ops = SpectralOps::for_grid(gs.grid())?;
    let d = ops.differentiate(gs.values(), Parity::Even);
    Ok(RadialFunction::new(Arc::clone(gs.grid()), d)?.with_parity(Parity::Odd))
}

/// `z(r) = (1+mu) U(sqrt(1+mu) r)` on the ground state's grid.
pub fn rescale_state(gs: &GroundState, mu: f64) -> Result<RadialFunction> {
    rescale_state_to(gs, mu, gs.grid())
}

/// `z(r) = (1+mu) U(sqrt(1+mu) r)` sampled on `grid`, by the spectral
/// interpolant of `U` inside its grid and the tail model beyond it. On the
/// grid with `r_max / sqrt(1+mu)` and the same node count the samples fall on
/// the original nodes.
pub fn rescale_state_to(gs: &GroundState, mu: f64, grid: &Arc<RadialGrid>) -> Result<RadialFunction> {
    if !(1.0 + mu > 0.0) {
        return invalid(format!("rescaling needs 1 + mu > 0, got mu = {mu}"));
    }
    let alpha = 1.0 + mu;
    let beta = alpha.sqrt();
    let r_src = gs.grid().r_max();
    let extrapolates = beta * grid.r_max() > r_src * (1.0 + 1e-12);
    let source_tail = gs.profile.tail();
    let values = if mu == 0.0 && grid.same_as(gs.grid()) {
        gs.values().to_vec()
    } else {
        grid.nodes()
            .iter()
            .map(|&r| {
                let s = beta * r;
                match source_tail {
                    Some(t) if extrapolates => alpha * blended_profile(&gs.profile, t, s, r_src),
                    _ => alpha * gs.profile.evaluate(s),
                }
            })
            .collect()
    };
    let tail = gs
        .profile
        .tail()
        .and_then(|t| Tail::new(alpha * t.amplitude, beta * t.rate).ok());
    Ok(RadialFunction::new(Arc::clone(grid), values)?.with_tail(tail))
}
