//! Radial grids, weighted quadrature and sampled radial profiles.
//!
//! Two schemes are provided. The mapped Gauss scheme places the nodes at the
//! Gauss–Jacobi points of the variable `s = (r/R)^2`, so that the measure
//! `r^{n-1} dr` becomes a Jacobi weight and even (odd) functions of `r` are
//! polynomials in `s` (times `r`). The composite scheme tiles `[0, R]` with
//! equal panels carrying Fejér's second rule; it has no spectral operators
//! but integrates piecewise-smooth data with panel-aligned breaks exactly.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use crate::error::{invalid, HartreeError, Result};
use crate::quadrature::{fejer_second, gamma, gauss_jacobi, gauss_legendre};

/// Nodes per panel of the composite scheme.
pub const PANEL_NODES: usize = 16;

pub const SUPPORTED_DIMS: [usize; 3] = [3, 4, 5];

pub fn check_dim(n: usize) -> Result<()> {
    if SUPPORTED_DIMS.contains(&n) {
        Ok(())
    } else {
        Err(HartreeError::UnsupportedDimension(n))
    }
}

/// `|S^{n-1}| = 2 pi^{n/2} / Gamma(n/2)`.
pub fn sphere_area(n: usize) -> Result<f64> {
    if n < 2 {
        return invalid(format!("sphere area needs n >= 2, got {n}"));
    }
    let h = n as f64 / 2.0;
    Ok(2.0 * std::f64::consts::PI.powf(h) / gamma(h))
}

/// Constant `c_n` of the Newton kernel `I_2(x) = c_n |x|^{-(n-2)}`.
pub fn newton_constant(n: usize) -> Result<f64> {
    if n < 3 {
        return invalid(format!("Newton kernel needs n >= 3, got {n}"));
    }
    Ok(1.0 / ((n as f64 - 2.0) * sphere_area(n)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    GaussLegendreMapped,
    CompositeClenshawCurtis,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::GaussLegendreMapped => "gauss_legendre_mapped",
            Scheme::CompositeClenshawCurtis => "composite_clenshaw_curtis",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = HartreeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss_legendre_mapped" => Ok(Scheme::GaussLegendreMapped),
            "composite_clenshaw_curtis" => Ok(Scheme::CompositeClenshawCurtis),
            other => Err(HartreeError::Parse(format!("unknown grid scheme '{other}'"))),
        }
    }
}

/// Behaviour under `r -> -r`; sector `k` functions have parity `(-1)^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_degree(k: usize) -> Self {
        if k % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Text form `n=<int> r_max=<real> N=<int> scheme=<name>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDescriptor {
    pub dim: usize,
    pub r_max: f64,
    pub n_nodes: usize,
    pub scheme: Scheme,
}

impl fmt::Display for GridDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} r_max={} N={} scheme={}",
            self.dim, self.r_max, self.n_nodes, self.scheme
        )
    }
}

impl FromStr for GridDescriptor {
    type Err = HartreeError;
    fn from_str(line: &str) -> Result<Self> {
        let mut dim = None;
        let mut r_max = None;
        let mut n_nodes = None;
        let mut scheme = None;
        for tok in line.split_whitespace() {
            let (key, val) = tok
                .split_once('=')
                .ok_or_else(|| HartreeError::Parse(format!("malformed token '{tok}'")))?;
            let bad = |_| HartreeError::Parse(format!("bad value in '{tok}'"));
            match key {
                "n" => dim = Some(val.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "r_max" => r_max = Some(val.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "N" => n_nodes = Some(val.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "scheme" => scheme = Some(val.parse::<Scheme>()?),
                other => return Err(HartreeError::Parse(format!("unknown descriptor key '{other}'"))),
            }
        }
        let missing = |k: &str| HartreeError::Parse(format!("grid descriptor lacks '{k}'"));
        Ok(GridDescriptor {
            dim: dim.ok_or_else(|| missing("n"))?,
            r_max: r_max.ok_or_else(|| missing("r_max"))?,
            n_nodes: n_nodes.ok_or_else(|| missing("N"))?,
            scheme: scheme.ok_or_else(|| missing("scheme"))?,
        })
    }
}

#[derive(Debug)]
enum Layout {
    Mapped {
        t: Vec<f64>,
        bary: Vec<f64>,
    },
    Panels {
        m: usize,
        width: f64,
        ref_nodes: Vec<f64>,
        ref_bary: Vec<f64>,
    },
}

/// Interpolation weights restricted to a contiguous block of nodes.
#[derive(Debug, Clone)]
pub struct InterpRow {
    pub start: usize,
    pub coeffs: Vec<f64>,
}

impl InterpRow {
    pub fn apply(&self, values: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(&values[self.start..self.start + self.coeffs.len()])
            .map(|(c, v)| c * v)
            .sum()
    }
}

pub struct RadialGrid {
    dim: usize,
    r_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    scheme: Scheme,
    layout: Layout,
    pub(crate) ops: OnceLock<Arc<crate::discrete::SpectralOps>>,
}

impl fmt::Debug for RadialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RadialGrid({})", self.descriptor())
    }
}

pub fn build_grid(n: usize, r_max: f64, n_nodes: usize, scheme: Scheme) -> Result<Arc<RadialGrid>> {
    check_dim(n)?;
    if !(r_max > 0.0 && r_max.is_finite()) {
        return invalid(format!("r_max must be positive and finite, got {r_max}"));
    }
    if n_nodes < 16 {
        return invalid(format!("grid needs at least 16 nodes, got {n_nodes}"));
    }
    let grid = match scheme {
        Scheme::GaussLegendreMapped => mapped_grid(n, r_max, n_nodes),
        Scheme::CompositeClenshawCurtis => composite_grid(n, r_max, n_nodes)?,
    };
    Ok(Arc::new(grid))
}

fn mapped_grid(n: usize, r_max: f64, n_nodes: usize) -> RadialGrid {
    let beta = (n as f64 - 2.0) / 2.0;
    let rule = gauss_jacobi(n_nodes, 0.0, beta);
    let scale = r_max.powi(n as i32) / 2f64.powf(beta + 2.0);
    let nodes = rule
        .nodes
        .iter()
        .map(|&t| r_max * (0.5 * (1.0 + t)).sqrt())
        .collect();
    let weights = rule.weights.iter().map(|&w| w * scale).collect();
    let bary = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .enumerate()
        .map(|(j, (&t, &w))| {
            let mag = ((1.0 - t * t) * w).sqrt();
            if j % 2 == 0 {
                mag
            } else {
                -mag
            }
        })
        .collect();
    RadialGrid {
        dim: n,
        r_max,
        nodes,
        weights,
        scheme: Scheme::GaussLegendreMapped,
        layout: Layout::Mapped {
            t: rule.nodes,
            bary,
        },
        ops: OnceLock::new(),
    }
}

fn composite_grid(n: usize, r_max: f64, n_nodes: usize) -> Result<RadialGrid> {
    let m = PANEL_NODES;
    if n_nodes % m != 0 {
        return invalid(format!(
            "composite grid needs N divisible by {m}, got {n_nodes}"
        ));
    }
    let panels = n_nodes / m;
    let width = r_max / panels as f64;
    let rule = fejer_second(m);
    let mut nodes = Vec::with_capacity(n_nodes);
    let mut weights = Vec::with_capacity(n_nodes);
    for p in 0..panels {
        let a = p as f64 * width;
        for (x, w) in rule.mapped(a, a + width) {
            nodes.push(x);
            weights.push(w * x.powi(n as i32 - 1));
        }
    }
    let ref_bary = rule
        .nodes
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let s2 = 1.0 - x * x;
            if j % 2 == 0 {
                s2
            } else {
                -s2
            }
        })
        .collect();
    Ok(RadialGrid {
        dim: n,
        r_max,
        nodes,
        weights,
        scheme: Scheme::CompositeClenshawCurtis,
        layout: Layout::Panels {
            m,
            width,
            ref_nodes: rule.nodes,
            ref_bary,
        },
        ops: OnceLock::new(),
    })
}

fn barycentric_row(x: f64, nodes: &[f64], bary: &[f64]) -> Vec<f64> {
    if let Some(j) = nodes.iter().position(|&t| t == x) {
        let mut row = vec![0.0; nodes.len()];
        row[j] = 1.0;
        return row;
    }
    let mut row: Vec<f64> = nodes
        .iter()
        .zip(bary)
        .map(|(&t, &b)| b / (x - t))
        .collect();
    let s: f64 = row.iter().sum();
    for c in &mut row {
        *c /= s;
    }
    row
}

impl RadialGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn descriptor(&self) -> GridDescriptor {
        GridDescriptor {
            dim: self.dim,
            r_max: self.r_max,
            n_nodes: self.nodes.len(),
            scheme: self.scheme,
        }
    }

    pub fn same_as(&self, other: &RadialGrid) -> bool {
        std::ptr::eq(self, other) || self.descriptor() == other.descriptor()
    }

    /// Reference coordinate `t = 2 (r/R)^2 - 1` of the mapped scheme.
    pub(crate) fn mapped_t(&self) -> Option<&[f64]> {
        match &self.layout {
            Layout::Mapped { t, .. } => Some(t),
            Layout::Panels { .. } => None,
        }
    }

    pub(crate) fn mapped_bary(&self) -> Option<&[f64]> {
        match &self.layout {
            Layout::Mapped { bary, .. } => Some(bary),
            Layout::Panels { .. } => None,
        }
    }

    /// Weights that reproduce the value at `r` from the node values.
    /// Beyond `[0, r_max]` this extrapolates the interpolant.
    pub fn interp_row(&self, r: f64, parity: Parity) -> InterpRow {
        match &self.layout {
            Layout::Mapped { t, bary } => {
                let x = 2.0 * (r / self.r_max).powi(2) - 1.0;
                let mut coeffs = barycentric_row(x, t, bary);
                if parity == Parity::Odd {
                    for (c, &rj) in coeffs.iter_mut().zip(&self.nodes) {
                        *c *= r / rj;
                    }
                }
                InterpRow { start: 0, coeffs }
            }
            Layout::Panels {
                m,
                width,
                ref_nodes,
                ref_bary,
            } => {
                let panels = self.nodes.len() / m;
                let p = ((r / width).floor().max(0.0) as usize).min(panels - 1);
                let a = p as f64 * width;
                let x = 2.0 * (r - a) / width - 1.0;
                InterpRow {
                    start: p * m,
                    coeffs: barycentric_row(x, ref_nodes, ref_bary),
                }
            }
        }
    }

    pub fn interpolate(&self, values: &[f64], parity: Parity, r: f64) -> f64 {
        self.interp_row(r, parity).apply(values)
    }

    /// Smooth pieces of `[0, r_max]` and the Gauss–Legendre size that
    /// integrates the interpolant on any sub-interval of a piece.
    pub fn segments(&self) -> Vec<(f64, f64, usize)> {
        match &self.layout {
            Layout::Mapped { .. } => vec![(0.0, self.r_max, self.nodes.len() + 12)],
            Layout::Panels { m, width, .. } => (0..self.nodes.len() / m)
                .map(|p| (p as f64 * width, (p + 1) as f64 * width, m + 4))
                .collect(),
        }
    }

    /// Quadrature points `(rho, weight)` for `int_a^b g(rho) d rho` with `g`
    /// smooth on each segment, clipped to `[0, r_max]`.
    pub fn interval_points(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let lo = a.max(0.0);
        let hi = b.min(self.r_max);
        let mut pts = Vec::new();
        if hi <= lo {
            return pts;
        }
        for (sa, sb, q) in self.segments() {
            let l = lo.max(sa);
            let h = hi.min(sb);
            if h > l {
                pts.extend(gauss_legendre(q).mapped(l, h));
            }
        }
        pts
    }

    /// `int_a^b weight(rho) f(rho) d rho` for the interpolant of `values`.
    pub fn integrate_interval<W: Fn(f64) -> f64>(
        &self,
        values: &[f64],
        parity: Parity,
        a: f64,
        b: f64,
        weight: W,
    ) -> f64 {
        self.interval_points(a, b)
            .into_iter()
            .map(|(rho, w)| w * weight(rho) * self.interpolate(values, parity, rho))
            .sum()
    }
}

/// Exponential model `c e^{-tau r}` beyond the truncation radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tail {
    pub amplitude: f64,
    pub rate: f64,
}

impl Tail {
    pub fn new(amplitude: f64, rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() || !amplitude.is_finite() {
            return invalid(format!("tail needs finite amplitude and rate > 0, got ({amplitude}, {rate})"));
        }
        Ok(Tail { amplitude, rate })
    }

    pub fn value(&self, r: f64) -> f64 {
        self.amplitude * (-self.rate * r).exp()
    }

    /// `int_{r0}^inf c e^{-tau r} r^p dr` in closed form.
    pub fn moment(&self, p: usize, r0: f64) -> f64 {
        let x = self.rate * r0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=p {
            term *= x / k as f64;
            sum += term;
        }
        let fact: f64 = (1..=p).map(|k| k as f64).product();
        self.amplitude * fact / self.rate.powi(p as i32 + 1) * (-x).exp() * sum
    }
}

/// Samples of a radial profile on a grid.
#[derive(Debug, Clone)]
pub struct RadialFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    tail: Option<Tail>,
    parity: Parity,
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(HartreeError::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(RadialFunction {
            grid,
            values,
            tail: None,
            parity: Parity::Even,
        })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: &Arc<RadialGrid>, f: F) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        RadialFunction {
            grid: Arc::clone(grid),
            values,
            tail: None,
            parity: Parity::Even,
        }
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self::from_fn(grid, |_| 0.0)
    }

    pub fn with_tail(mut self, tail: Option<Tail>) -> Self {
        self.tail = tail;
        self
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn tail(&self) -> Option<Tail> {
        self.tail
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Value at any `r >= 0`: interpolant inside the grid, tail model (or
    /// zero) beyond it.
    pub fn evaluate(&self, r: f64) -> f64 {
        if r > self.grid.r_max() {
            return self.tail.map_or(0.0, |t| t.value(r));
        }
        self.grid.interpolate(&self.values, self.parity, r)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `int_0^inf f(r) r^{n-1} dr` by the grid rule plus the closed-form tail.
pub fn integrate_radial(grid: &RadialGrid, f: &RadialFunction) -> Result<f64> {
    if !grid.same_as(f.grid()) {
        return Err(HartreeError::GridMismatch(format!(
            "function lives on {} but the grid is {}",
            f.grid().descriptor(),
            grid.descriptor()
        )));
    }
    let body: f64 = grid
        .weights()
        .iter()
        .zip(f.values())
        .map(|(w, v)| w * v)
        .sum();
    let tail = f
        .tail()
        .map_or(0.0, |t| t.moment(grid.dim() - 1, grid.r_max()));
    Ok(body + tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(3).unwrap() - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(4).unwrap() - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5).unwrap() - 8.0 * PI * PI / 3.0).abs() < 1e-12);
        assert!(sphere_area(1).is_err());
    }

    #[test]
    fn grid_volume_exact() {
        for &(n, r, nn) in &[(3, 30.0, 200), (4, 20.0, 128), (5, 20.0, 64)] {
            let g = build_grid(n, r, nn, Scheme::GaussLegendreMapped).unwrap();
            let one = RadialFunction::from_fn(&g, |_| 1.0);
            let exact = f64::powi(r, n as i32) / n as f64;
            let got = integrate_radial(&g, &one).unwrap();
            assert!(((got - exact) / exact).abs() < 1e-12, "n={n}: {got} vs {exact}");
        }
        let g = build_grid(3, 30.0, 480, Scheme::CompositeClenshawCurtis).unwrap();
        let got = integrate_radial(&g, &RadialFunction::from_fn(&g, |_| 1.0)).unwrap();
        assert!(((got - 9000.0) / 9000.0).abs() < 1e-12);
    }

    #[test]
    fn invariants_and_errors() {
        for scheme in [Scheme::GaussLegendreMapped, Scheme::CompositeClenshawCurtis] {
            let g = build_grid(4, 25.0, 256, scheme).unwrap();
            assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
            assert!(g.nodes()[0] > 0.0 && *g.nodes().last().unwrap() < 25.0);
            assert!(g.weights().iter().all(|&w| w > 0.0));
        }
        assert!(matches!(
            build_grid(6, 10.0, 64, Scheme::GaussLegendreMapped),
            Err(HartreeError::UnsupportedDimension(6))
        ));
        assert!(build_grid(3, -1.0, 64, Scheme::GaussLegendreMapped).is_err());
        assert!(build_grid(3, 10.0, 8, Scheme::GaussLegendreMapped).is_err());
    }

    #[test]
    fn tail_closed_form_exp2() {
        // e^{-2r} is not even in r, so the panel scheme is the right tool
        let g = build_grid(3, 30.0, 208, Scheme::CompositeClenshawCurtis).unwrap();
        let f = RadialFunction::from_fn(&g, |r| (-2.0 * r).exp())
            .with_tail(Some(Tail::new(1.0, 2.0).unwrap()));
        let got = integrate_radial(&g, &f).unwrap();
        assert!((got - 0.25).abs() / 0.25 < 1e-8);
        // the tail moment alone against Gamma(3, x)
        let t = Tail::new(1.0, 1.0).unwrap();
        let exact = (-1.0f64).exp() * (1.0 + 1.0 + 0.5) * 2.0;
        assert!((t.moment(2, 1.0) - exact).abs() < 1e-15);
    }

    #[test]
    fn descriptor_round_trip() {
        let g = build_grid(5, 20.0, 64, Scheme::GaussLegendreMapped).unwrap();
        let text = g.descriptor().to_string();
        assert_eq!(text, "n=5 r_max=20 N=64 scheme=gauss_legendre_mapped");
        assert_eq!(text.parse::<GridDescriptor>().unwrap(), g.descriptor());
        assert!("n=3 r_max=1 N=16 scheme=foo".parse::<GridDescriptor>().is_err());
    }

    #[test]
    fn interpolation_reproduces_parity_polynomials() {
        let g = build_grid(3, 4.0, 40, Scheme::GaussLegendreMapped).unwrap();
        let even: Vec<f64> = g.nodes().iter().map(|r| 1.0 + r * r - 0.1 * r.powi(6)).collect();
        let odd: Vec<f64> = g.nodes().iter().map(|r| r * (2.0 - r * r)).collect();
        for &r in &[0.0, 0.3, 1.7, 3.99, 4.0] {
            let e = g.interpolate(&even, Parity::Even, r);
            let o = g.interpolate(&odd, Parity::Odd, r);
            assert!((e - (1.0 + r * r - 0.1 * r.powi(6))).abs() < 1e-11);
            assert!((o - r * (2.0 - r * r)).abs() < 1e-12);
        }
        let c = build_grid(3, 4.0, 64, Scheme::CompositeClenshawCurtis).unwrap();
        let vals: Vec<f64> = c.nodes().iter().map(|r| r.powi(7)).collect();
        assert!((c.interpolate(&vals, Parity::Even, 2.5) - 2.5f64.powi(7)).abs() < 1e-9);
    }

    #[test]
    fn interval_integration_of_interpolant() {
        let g = build_grid(4, 6.0, 60, Scheme::GaussLegendreMapped).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|r| (-r * r).exp()).collect();
        // int_0^1 e^{-r^2} r^3 dr = (1 - 2/e)/2
        let got = g.integrate_interval(&vals, Parity::Even, 0.0, 1.0, |r| r.powi(3));
        let exact = 0.5 * (1.0 - 2.0 / std::f64::consts::E);
        assert!((got - exact).abs() < 1e-13);
    }
}
