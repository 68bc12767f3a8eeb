//! One-dimensional Gaussian and Fejér rules.
//!
//! Gauss–Legendre rules are built by Newton iteration on the three-term
//! recurrence and cached per size. General Gauss–Jacobi rules use the
//! Golub–Welsch eigenvalue problem for starting values, then the same Newton
//! polish, with weights taken from the Christoffel function so that small
//! endpoint weights keep full relative accuracy.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

/// Nodes and weights of a rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]` after the affine map from `[-1, 1]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Mapped nodes and scaled weights on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, w * half))
    }
}

fn legendre_cache() -> &'static Mutex<HashMap<usize, Arc<GaussRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss–Legendre rule with `q` points, cached.
pub fn gauss_legendre(q: usize) -> Arc<GaussRule> {
    assert!(q >= 1, "Gauss–Legendre rule needs at least one node");
    if let Some(rule) = legendre_cache().lock().unwrap().get(&q) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(build_gauss_legendre(q));
    legendre_cache()
        .lock()
        .unwrap()
        .insert(q, Arc::clone(&rule));
    rule
}

fn build_gauss_legendre(q: usize) -> GaussRule {
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let qf = q as f64;
    for i in 0..q.div_ceil(2) {
        // Tricomi-type initial guess, then Newton.
        let mut x = (PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(q, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(q, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[q - 1 - i] = x;
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

fn legendre_with_derivative(q: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if q == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=q {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let qf = q as f64;
    let d = qf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Recurrence coefficients of the orthonormal Jacobi polynomials for the
/// weight `(1-t)^alpha (1+t)^beta`: diagonal `a_k`, off-diagonal `b_k`
/// (`b[0]` unused) and the total mass `mu0`.
fn jacobi_recurrence(q: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let ab = alpha + beta;
    let mut a = vec![0.0; q + 1];
    let mut b = vec![0.0; q + 1];
    for (k, ak) in a.iter_mut().enumerate() {
        let kf = k as f64;
        *ak = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
    }
    for (k, bk) in b.iter_mut().enumerate().skip(1) {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        let num = 4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab);
        let den = s * s * (s + 1.0) * (s - 1.0);
        *bk = if k == 1 && (ab + 1.0).abs() < 1e-14 {
            // s - 1 = 0 cancels against k + alpha + beta
            (4.0 * (1.0 + alpha) * (1.0 + beta) / (s * s * (s + 1.0))).sqrt()
        } else {
            (num / den).sqrt()
        };
    }
    let mu0 = 2f64.powf(ab + 1.0) * gamma(alpha + 1.0) * gamma(beta + 1.0) / gamma(ab + 2.0);
    (a, b, mu0)
}

/// Orthonormal polynomial values `p_0..p_{q}` at `t`, and the derivative of `p_q`.
fn orthonormal_values(t: f64, a: &[f64], b: &[f64], mu0: f64, q: usize, out: &mut Vec<f64>) -> f64 {
    out.clear();
    let p0 = 1.0 / mu0.sqrt();
    out.push(p0);
    let mut d_prev = 0.0;
    let mut d_cur = 0.0;
    let mut p_prev = 0.0;
    let mut p_cur = p0;
    for k in 0..q {
        let b_prev = if k == 0 { 0.0 } else { b[k] };
        let p_next = ((t - a[k]) * p_cur - b_prev * p_prev) / b[k + 1];
        let d_next = (p_cur + (t - a[k]) * d_cur - b_prev * d_prev) / b[k + 1];
        p_prev = p_cur;
        p_cur = p_next;
        d_prev = d_cur;
        d_cur = d_next;
        out.push(p_cur);
    }
    d_cur
}

/// Gauss–Jacobi rule with `q` points for the weight `(1-t)^alpha (1+t)^beta`
/// on `[-1, 1]`, nodes ascending.
pub fn gauss_jacobi(q: usize, alpha: f64, beta: f64) -> GaussRule {
    assert!(q >= 1 && alpha > -1.0 && beta > -1.0);
    if alpha == 0.0 && beta == 0.0 {
        return (*gauss_legendre(q)).clone();
    }
    let (a, b, mu0) = jacobi_recurrence(q, alpha, beta);
    let jac = DMatrix::from_fn(q, q, |i, j| {
        if i == j {
            a[i]
        } else if i + 1 == j {
            b[j]
        } else if j + 1 == i {
            b[i]
        } else {
            0.0
        }
    });
    let mut guesses: Vec<f64> = jac.symmetric_eigenvalues().iter().copied().collect();
    guesses.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let mut vals = Vec::with_capacity(q + 1);
    let mut nodes = Vec::with_capacity(q);
    let mut weights = Vec::with_capacity(q);
    for &g in &guesses {
        let mut t = g;
        for _ in 0..6 {
            let d = orthonormal_values(t, &a, &b, mu0, q, &mut vals);
            let step = vals[q] / d;
            if !step.is_finite() {
                break;
            }
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        orthonormal_values(t, &a, &b, mu0, q, &mut vals);
        let christoffel: f64 = vals[..q].iter().map(|p| p * p).sum();
        nodes.push(t);
        weights.push(1.0 / christoffel);
    }
    GaussRule { nodes, weights }
}

/// Fejér's second rule (open Clenshaw–Curtis) with `m` interior Chebyshev
/// points on `[-1, 1]`, nodes ascending. Exact for polynomials of degree `< m`.
pub fn fejer_second(m: usize) -> GaussRule {
    assert!(m >= 1);
    let np1 = (m + 1) as f64;
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for k in (1..=m).rev() {
        let theta = k as f64 * PI / np1;
        let mut s = 0.0;
        for j in 1..=m.div_ceil(2) {
            let jf = (2 * j - 1) as f64;
            s += (jf * theta).sin() / jf;
        }
        nodes.push(theta.cos());
        weights.push(4.0 * theta.sin() * s / np1);
    }
    GaussRule { nodes, weights }
}

/// Lanczos approximation of the gamma function for positive arguments.
pub fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(7);
        for deg in 0..=13 {
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            let got = rule.integrate(-1.0, 1.0, |x| x.powi(deg));
            assert!((got - exact).abs() < 1e-14, "degree {deg}: {got} vs {exact}");
        }
    }

    #[test]
    fn large_legendre_rule_sums_to_two() {
        let rule = gauss_legendre(410);
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn jacobi_moments_match_beta_function() {
        // int_{-1}^{1} (1+t)^beta (1+t)^j dt = 2^{beta+j+1}/(beta+j+1)
        for &beta in &[0.5, 1.0, 1.5] {
            let rule = gauss_jacobi(40, 0.0, beta);
            for j in 0..79 {
                let exact = 2f64.powf(beta + j as f64 + 1.0) / (beta + j as f64 + 1.0);
                let got: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(t, w)| w * (1.0 + t).powi(j))
                    .sum();
                assert!(((got - exact) / exact).abs() < 1e-12, "beta {beta} j {j}");
            }
        }
    }

    #[test]
    fn jacobi_400_weights_positive_and_normalized() {
        let rule = gauss_jacobi(400, 0.0, 0.5);
        let mu0 = 2f64.powf(1.5) / 1.5;
        let s: f64 = rule.weights.iter().sum();
        assert!(((s - mu0) / mu0).abs() < 1e-13);
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fejer_exact_below_its_size() {
        let rule = fejer_second(9);
        for deg in 0..9 {
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            let got = rule.integrate(-1.0, 1.0, |x| x.powi(deg));
            assert!((got - exact).abs() < 1e-14, "degree {deg}");
        }
        assert!(rule.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn gamma_known_values() {
        assert!((gamma(5.0) - 24.0).abs() < 1e-11);
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-13);
        assert!((gamma(1.5) - 0.5 * PI.sqrt()).abs() < 1e-13);
    }
}
