//! Newton potential `I_2 * f` of radial and sector-resolved densities.
//!
//! With `I_2(x) = |x|^{2-n} / ((n-2)|S^{n-1}|)`, a radial density has
//! `(I_2 * f)(r) = (1/(n-2)) int_0^inf rho f - int_0^r K(r, rho) f d rho`, and
//! the degree-`k` spherical-harmonic sector of any density is acted on by
//! `G_k(r, rho) = r_<^k / ((2k+n-2) r_>^{k+n-2})`.

pub mod harmonics;
pub mod oracle;

use std::sync::Arc;

use rayon::prelude::*;

use crate::discrete::{matvec, KernelSpec, SpectralOps};
use crate::error::{invalid, HartreeError, Result};
use crate::quadrature::gauss_legendre;
use crate::radial::{check_dim, Parity, RadialFunction, RadialGrid, Scheme};

pub use oracle::{direct_newton_potential_nd, GriddedFunction};

/// Sector-resolved coefficient `(k, m, f_km)`. The label `m` is opaque.
pub type SectorCoeff = (usize, i32, RadialFunction);

/// The Green kernel of the degree-`k` sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectorKernel {
    pub dim: usize,
    pub degree: usize,
}

impl SectorKernel {
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(SectorKernel { dim, degree })
    }

    pub fn value(&self, r: f64, rho: f64) -> Result<f64> {
        sector_kernel_value(self.dim, self.degree, r, rho)
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be positive and finite, got {x}"))
    }
}

/// `K(r, rho) = rho/(n-2) (1 - rho^{n-2}/r^{n-2})` for `0 < rho <= r`.
pub fn kernel_k(n: usize, r: f64, rho: f64) -> Result<f64> {
    check_dim(n)?;
    positive("r", r)?;
    positive("rho", rho)?;
    if rho > r {
        return invalid(format!("kernel K needs rho <= r, got rho={rho} > r={r}"));
    }
    Ok(k_unchecked(n, r, rho))
}

fn k_unchecked(n: usize, r: f64, rho: f64) -> f64 {
    let d = (n - 2) as f64;
    rho / d * (1.0 - (rho / r).powi(n as i32 - 2))
}

/// `G_k(r, rho)`.
pub fn sector_kernel_value(n: usize, k: usize, r: f64, rho: f64) -> Result<f64> {
    check_dim(n)?;
    positive("r", r)?;
    positive("rho", rho)?;
    Ok(KernelSpec::sector(n, k, Parity::of_degree(k)).value(r, rho))
}

/// `int_a^b weight(rho) f(rho) d rho` over the grid interpolant and, beyond
/// the grid, the tail model. `b` may be infinite.
fn integrate_piece<W: Fn(f64) -> f64>(f: &RadialFunction, a: f64, b: f64, weight: W) -> f64 {
    let grid = f.grid();
    let mut s = grid.integrate_interval(f.values(), f.parity(), a, b, &weight);
    if let Some(tail) = f.tail() {
        let lo = a.max(grid.r_max());
        let hi = b.min(lo + 60.0 / tail.rate);
        if hi > lo {
            let chunk = 2.0 / tail.rate;
            let pieces = ((hi - lo) / chunk).ceil().max(1.0) as usize;
            let width = (hi - lo) / pieces as f64;
            let rule = gauss_legendre(24);
            for p in 0..pieces {
                let x0 = lo + p as f64 * width;
                s += rule.integrate(x0, x0 + width, |rho| weight(rho) * tail.value(rho));
            }
        }
    }
    s
}

fn check_input(grid: &RadialGrid, f: &RadialFunction) -> Result<()> {
    if !grid.same_as(f.grid()) {
        return Err(HartreeError::GridMismatch(format!(
            "density lives on {} but the grid is {}",
            f.grid().descriptor(),
            grid.descriptor()
        )));
    }
    if !f.is_finite() {
        return Err(HartreeError::NonFinite("density values".into()));
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        invalid(format!("radius must be finite and >= 0, got {r}"))
    }
}

/// `(1/(n-2)) int_0^inf rho f(rho) d rho`, the potential at the origin.
fn origin_value(f: &RadialFunction) -> Result<f64> {
    let n = f.grid().dim();
    let t = integrate_piece(f, 0.0, f64::INFINITY, |rho| rho) / (n - 2) as f64;
    if !t.is_finite() {
        return Err(HartreeError::NonFinite("int rho f(rho) d rho".into()));
    }
    Ok(t)
}

fn potential_from_origin(f: &RadialFunction, t: f64, r: f64) -> f64 {
    if r == 0.0 {
        return t;
    }
    let n = f.grid().dim();
    t - integrate_piece(f, 0.0, r, |rho| k_unchecked(n, r, rho))
}

/// `(I_2 * f)` at the grid nodes.
pub fn radial_newton_potential(grid: &Arc<RadialGrid>, f: &RadialFunction) -> Result<RadialFunction> {
    check_input(grid, f)?;
    let t = origin_value(f)?;
    let values: Vec<f64> = grid
        .nodes()
        .par_iter()
        .map(|&r| potential_from_origin(f, t, r))
        .collect();
    RadialFunction::new(Arc::clone(grid), values)
}

/// `(I_2 * f)(r)` at any `r >= 0`, including the origin and radii beyond the grid.
pub fn newton_potential_at(f: &RadialFunction, r: f64) -> Result<f64> {
    check_radius(r)?;
    if !f.is_finite() {
        return Err(HartreeError::NonFinite("density values".into()));
    }
    let t = origin_value(f)?;
    Ok(potential_from_origin(f, t, r))
}

fn check_nonnegative(u2: &RadialFunction) -> Result<()> {
    if !u2.is_finite() {
        return Err(HartreeError::NonFinite("density values".into()));
    }
    if let Some(x) = u2.values().iter().find(|&&x| x < 0.0) {
        return invalid(format!("density must be nonnegative, found {x}"));
    }
    Ok(())
}

fn derivative_value(u2: &RadialFunction, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let n = u2.grid().dim() as i32;
    -integrate_piece(u2, 0.0, r, |rho| rho.powi(n - 1)) / r.powi(n - 1)
}

/// `(I_2 * u2)'(r) = -r^{1-n} int_0^r rho^{n-1} u2` at the nodes (odd parity).
pub fn potential_radial_derivative(grid: &Arc<RadialGrid>, u2: &RadialFunction) -> Result<RadialFunction> {
    check_input(grid, u2)?;
    check_nonnegative(u2)?;
    let values: Vec<f64> = grid
        .nodes()
        .par_iter()
        .map(|&r| derivative_value(u2, r))
        .collect();
    Ok(RadialFunction::new(Arc::clone(grid), values)?.with_parity(Parity::Odd))
}

/// `(I_2 * u2)'(r)` at any `r >= 0`.
pub fn potential_derivative_at(u2: &RadialFunction, r: f64) -> Result<f64> {
    check_radius(r)?;
    check_nonnegative(u2)?;
    Ok(derivative_value(u2, r))
}

fn sector_value(f: &RadialFunction, k: usize, r: f64) -> f64 {
    let n = f.grid().dim();
    let c = 1.0 / (2 * k + n - 2) as f64;
    let (ki, ni) = (k as i32, n as i32);
    let inner = if r > 0.0 {
        integrate_piece(f, 0.0, r, |rho| rho.powi(ki + ni - 1)) / r.powi(ki + ni - 2)
    } else {
        0.0
    };
    let outer = if k == 0 || r > 0.0 {
        r.powi(ki) * integrate_piece(f, r, f64::INFINITY, |rho| rho.powi(1 - ki))
    } else {
        0.0
    };
    c * (inner + outer)
}

/// `g_k(r) = int_0^inf G_k(r, rho) f(rho) rho^{n-1} d rho` at any `r >= 0`.
pub fn sector_potential_at(f: &RadialFunction, k: usize, r: f64) -> Result<f64> {
    check_radius(r)?;
    if !f.is_finite() {
        return Err(HartreeError::NonFinite("sector coefficient".into()));
    }
    Ok(sector_value(f, k, r))
}

/// Sector potentials `g_km` at the grid nodes. On the mapped grid the cached
/// kernel matrices are applied (tail contributions added by quadrature);
/// elsewhere every node is integrated directly.
pub fn multipole_potential(grid: &Arc<RadialGrid>, sector_coeffs: &[SectorCoeff]) -> Result<Vec<SectorCoeff>> {
    for (_, _, f) in sector_coeffs {
        check_input(grid, f)?;
    }
    let ops = match grid.scheme() {
        Scheme::GaussLegendreMapped => Some(SpectralOps::for_grid(grid)?),
        _ => None,
    };
    let n = grid.dim();
    sector_coeffs
        .iter()
        .map(|(k, m, f)| {
            let values = match &ops {
                Some(ops) => {
                    let mat = ops.kernel_matrix_raw(KernelSpec::sector(n, *k, f.parity()));
                    let mut g = matvec(&mat, f.values());
                    if f.tail().is_some() {
                        let c = 1.0 / (2 * k + n - 2) as f64;
                        let ki = *k as i32;
                        let far = integrate_piece(f, grid.r_max(), f64::INFINITY, |rho| rho.powi(1 - ki));
                        for (gi, &r) in g.iter_mut().zip(grid.nodes()) {
                            *gi += c * r.powi(ki) * far;
                        }
                    }
                    g
                }
                None => grid.nodes().par_iter().map(|&r| sector_value(f, *k, r)).collect(),
            };
            let g = RadialFunction::new(Arc::clone(grid), values)?.with_parity(f.parity());
            Ok((*k, *m, g))
        })
        .collect()
}
