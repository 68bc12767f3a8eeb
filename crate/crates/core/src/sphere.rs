//! Product quadrature on the unit sphere `S^{n-1}`.
//!
//! Hyperspherical coordinates `x_1 = cos t_1`, `x_2 = sin t_1 cos t_2`, ...,
//! with polar angles carrying the weights `sin^{n-1-j} t_j`. Each polar angle
//! uses the Gauss–Jacobi rule in `cos t_j`, the azimuth a trapezoid rule.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::quadrature::gauss_jacobi;

#[derive(Debug, Clone)]
pub struct AngularRule {
    pub dim: usize,
    pub degree: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl AngularRule {
    /// Rule exact for polynomials of total degree `<= degree` restricted to
    /// the sphere.
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        if dim < 2 {
            return invalid(format!("sphere rule needs n >= 2, got {dim}"));
        }
        let n_az = degree + 1;
        let n_polar = degree / 2 + 1;
        let polar: Vec<_> = (1..dim - 1)
            .map(|j| {
                let a = (dim as f64 - 2.0 - j as f64) / 2.0;
                gauss_jacobi(n_polar, a, a)
            })
            .collect();
        let mut points = vec![vec![]];
        let mut weights = vec![1.0];
        // partial coordinates: (prefix of x, remaining radius factor)
        let mut radii = vec![1.0];
        for rule in &polar {
            let mut np = Vec::new();
            let mut nw = Vec::new();
            let mut nr = Vec::new();
            for ((p, w), rad) in points.iter().zip(&weights).zip(&radii) {
                for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
                    let mut q: Vec<f64> = p.clone();
                    q.push(rad * t);
                    np.push(q);
                    nw.push(w * wt);
                    nr.push(rad * (1.0 - t * t).sqrt());
                }
            }
            points = np;
            weights = nw;
            radii = nr;
        }
        let mut fp = Vec::with_capacity(points.len() * n_az);
        let mut fw = Vec::with_capacity(points.len() * n_az);
        let dphi = 2.0 * PI / n_az as f64;
        for ((p, w), rad) in points.iter().zip(&weights).zip(&radii) {
            for a in 0..n_az {
                let phi = (a as f64 + 0.5) * dphi;
                let mut q = p.clone();
                q.push(rad * phi.cos());
                q.push(rad * phi.sin());
                fp.push(q);
                fw.push(w * dphi);
            }
        }
        Ok(AngularRule {
            dim,
            degree,
            points: fp,
            weights: fw,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::sphere_area;

    #[test]
    fn weights_sum_to_area() {
        for n in 2..=5 {
            let rule = AngularRule::new(n, 12).unwrap();
            let s: f64 = rule.weights.iter().sum();
            let area = sphere_area(n).unwrap();
            assert!(((s - area) / area).abs() < 1e-12, "n={n}");
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for p in &rule.points {
                let r2: f64 = p.iter().map(|x| x * x).sum();
                assert!((r2 - 1.0).abs() < 1e-13);
                assert_eq!(p.len(), n);
            }
        }
    }

    #[test]
    fn second_and_fourth_moments() {
        // int x_i^2 = |S|/n ; int x_1^4 = 3 |S| / (n (n+2))
        for n in 3..=5 {
            let rule = AngularRule::new(n, 8).unwrap();
            let area = sphere_area(n).unwrap();
            for i in 0..n {
                let m2 = rule.integrate(|x| x[i] * x[i]);
                assert!((m2 - area / n as f64).abs() < 1e-12);
                let m4 = rule.integrate(|x| x[i].powi(4));
                let exact = 3.0 * area / (n * (n + 2)) as f64;
                assert!((m4 - exact).abs() < 1e-12, "n={n} i={i}");
            }
            let odd = rule.integrate(|x| x[0] * x[n - 1] * x[n - 1]);
            assert!(odd.abs() < 1e-13);
        }
    }
}
