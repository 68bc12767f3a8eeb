//! Spherical harmonics: the real basis `Y_lm` on `S^2`, and zonal harmonics
//! `Z_k(x . y) = sum_m Y_km(x) Y_km(y)` on `S^{n-1}` for any `n >= 3`.

use std::sync::Arc;

use super::SectorCoeff;
use crate::error::{invalid, Result};
use crate::radial::{check_dim, sphere_area, Parity, RadialFunction, RadialGrid};
use crate::sphere::AngularRule;

/// `P_l^m(t)` for `0 <= m <= l`, without the Condon–Shortley phase.
pub fn associated_legendre(l: usize, m: usize, t: f64) -> f64 {
    if m > l {
        return 0.0;
    }
    let s = (1.0 - t * t).max(0.0).sqrt();
    let mut pmm = 1.0;
    for i in 0..m {
        pmm *= (2 * i + 1) as f64 * s;
    }
    if l == m {
        return pmm;
    }
    let mut p_prev = pmm;
    let mut p = t * (2 * m + 1) as f64 * pmm;
    for ll in m + 2..=l {
        let next = ((2 * ll - 1) as f64 * t * p - (ll + m - 1) as f64 * p_prev) / (ll - m) as f64;
        p_prev = p;
        p = next;
    }
    p
}

fn factorial_ratio(l: usize, m: usize) -> f64 {
    // (l-m)! / (l+m)!
    (l - m + 1..=l + m).fold(1.0, |acc, i| acc / i as f64)
}

/// Orthonormal real spherical harmonic `Y_lm` at the direction of `x` (`n = 3`),
/// `-l <= m <= l`; `m > 0` carries `cos(m phi)`, `m < 0` carries `sin(|m| phi)`.
pub fn real_spherical_harmonic(l: usize, m: i32, x: &[f64]) -> Result<f64> {
    if x.len() != 3 {
        return invalid(format!("real spherical harmonics need a 3-vector, got length {}", x.len()));
    }
    let am = m.unsigned_abs() as usize;
    if am > l {
        return invalid(format!("|m| = {am} exceeds l = {l}"));
    }
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if !(r > 0.0) || !r.is_finite() {
        return invalid("direction vector must be nonzero and finite");
    }
    let t = x[2] / r;
    let phi = x[1].atan2(x[0]);
    let norm = ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI) * factorial_ratio(l, am)).sqrt();
    let p = associated_legendre(l, am, t);
    Ok(match m {
        0 => norm * p,
        m if m > 0 => std::f64::consts::SQRT_2 * norm * p * (am as f64 * phi).cos(),
        _ => std::f64::consts::SQRT_2 * norm * p * (am as f64 * phi).sin(),
    })
}

/// Gegenbauer polynomial `C_k^lambda(t)`.
pub fn gegenbauer(k: usize, lambda: f64, t: f64) -> f64 {
    let mut c_prev = 1.0;
    if k == 0 {
        return c_prev;
    }
    let mut c = 2.0 * lambda * t;
    for j in 2..=k {
        let jf = j as f64;
        let next = (2.0 * (jf + lambda - 1.0) * t * c - (jf + 2.0 * lambda - 2.0) * c_prev) / jf;
        c_prev = c;
        c = next;
    }
    c
}

/// Zonal harmonic `Z_k(t) = (2k+n-2)/((n-2)|S^{n-1}|) C_k^{(n-2)/2}(t)`, the
/// reproducing kernel of degree-`k` harmonics on `S^{n-1}`.
pub fn zonal_harmonic(n: usize, k: usize, t: f64) -> Result<f64> {
    check_dim(n)?;
    let lambda = (n as f64 - 2.0) / 2.0;
    let c = (2 * k + n - 2) as f64 / ((n - 2) as f64 * sphere_area(n)?);
    Ok(c * gegenbauer(k, lambda, t))
}

/// Coefficients `f_km(r) = int_{S^2} f(r y) Y_km(y) dy` for `k <= k_max` at
/// the nodes of an `n = 3` grid.
pub fn project_real_harmonics<F>(grid: &Arc<RadialGrid>, k_max: usize, degree: usize, f: F) -> Result<Vec<SectorCoeff>>
where
    F: Fn(&[f64]) -> f64,
{
    if grid.dim() != 3 {
        return invalid("the real harmonic basis is implemented for n = 3");
    }
    let rule = AngularRule::new(3, degree)?;
    let ylm: Vec<(usize, i32, Vec<f64>)> = (0..=k_max)
        .flat_map(|k| (-(k as i32)..=k as i32).map(move |m| (k, m)))
        .map(|(k, m)| {
            let vals = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(p, w)| Ok(w * real_spherical_harmonic(k, m, p)?))
                .collect::<Result<Vec<f64>>>()?;
            Ok((k, m, vals))
        })
        .collect::<Result<_>>()?;
    let samples: Vec<Vec<f64>> = grid
        .nodes()
        .iter()
        .map(|&r| {
            rule.points
                .iter()
                .map(|p| f(&[r * p[0], r * p[1], r * p[2]]))
                .collect()
        })
        .collect();
    ylm.into_iter()
        .map(|(k, m, wy)| {
            let values = samples
                .iter()
                .map(|s| s.iter().zip(&wy).map(|(a, b)| a * b).sum())
                .collect();
            let g = RadialFunction::new(Arc::clone(grid), values)?.with_parity(Parity::of_degree(k));
            Ok((k, m, g))
        })
        .collect()
}

/// `sum_km g_km(|x|) Y_km(x/|x|)` for `n = 3` sector functions.
pub fn expansion_value(sectors: &[SectorCoeff], x: &[f64]) -> Result<f64> {
    let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut s = 0.0;
    for (k, m, g) in sectors {
        if r == 0.0 {
            if *k == 0 {
                s += g.evaluate(0.0) * (4.0 * std::f64::consts::PI).sqrt().recip();
            }
            continue;
        }
        s += g.evaluate(r) * real_spherical_harmonic(*k, *m, x)?;
    }
    Ok(s)
}

/// Degree-`k` component of `f` along the direction `axis`, as a radial
/// function: `F_k(r) = int_{S^{n-1}} Z_k(axis . y) f(r y) dy`. Summing
/// `F_k(|x|)` over `k` with `axis = x/|x|` rebuilds `f(x)`.
pub fn zonal_component<F>(grid: &Arc<RadialGrid>, k: usize, axis: &[f64], degree: usize, f: F) -> Result<RadialFunction>
where
    F: Fn(&[f64]) -> f64,
{
    let n = grid.dim();
    if axis.len() != n {
        return invalid(format!("axis has length {}, grid dimension is {n}", axis.len()));
    }
    let norm = axis.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return invalid("axis must be nonzero and finite");
    }
    let rule = AngularRule::new(n, degree)?;
    let wz: Vec<f64> = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| {
            let t = p.iter().zip(axis).map(|(a, b)| a * b).sum::<f64>() / norm;
            Ok(w * zonal_harmonic(n, k, t)?)
        })
        .collect::<Result<_>>()?;
    let mut y = vec![0.0; n];
    let values = grid
        .nodes()
        .iter()
        .map(|&r| {
            let mut s = 0.0;
            for (p, w) in rule.points.iter().zip(&wz) {
                for (yi, pi) in y.iter_mut().zip(p) {
                    *yi = r * pi;
                }
                s += w * f(&y);
            }
            s
        })
        .collect();
    Ok(RadialFunction::new(Arc::clone(grid), values)?.with_parity(Parity::of_degree(k)))
}
