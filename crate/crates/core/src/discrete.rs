//! Spectral Galerkin operators on the mapped grid.
//!
//! With `s = (r/R)^2` and `t = 2s - 1`, sector `k` functions are represented
//! as `p(s)` (even `k`) or `r q(s)` (odd `k`). The stiffness form
//! `int f' g' r^{n-1} + k(k+n-2) int f g r^{n-3}` is evaluated by the grid
//! rule, which is exact for `k = 0, 1` at the polynomial degrees involved.
//! Kernel matrices for separable kernels `c r_<^a / r_>^b` are built by
//! splitting every row integral at the diagonal.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{HartreeError, Result};
use crate::quadrature::gauss_legendre;
use crate::radial::{Parity, RadialGrid, Scheme};

/// `c r_<^a / r_>^b`, applied to functions of the given parity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KernelSpec {
    pub a: i32,
    pub b: i32,
    c_bits: u64,
    pub parity: Parity,
}

impl KernelSpec {
    pub fn new(a: i32, b: i32, c: f64, parity: Parity) -> Self {
        KernelSpec {
            a,
            b,
            c_bits: c.to_bits(),
            parity,
        }
    }

    /// Sector kernel `G_k` acting on functions of parity `parity`.
    pub fn sector(n: usize, k: usize, parity: Parity) -> Self {
        let a = k as i32;
        let b = (k + n - 2) as i32;
        Self::new(a, b, 1.0 / (2 * k + n - 2) as f64, parity)
    }

    pub fn c(&self) -> f64 {
        f64::from_bits(self.c_bits)
    }

    pub fn value(&self, r: f64, rho: f64) -> f64 {
        let (lo, hi) = if r < rho { (r, rho) } else { (rho, r) };
        self.c() * lo.powi(self.a) / hi.powi(self.b)
    }
}

#[derive(Clone)]
struct KernelPair {
    raw: Arc<DMatrix<f64>>,
    sym: Arc<DMatrix<f64>>,
}

pub struct SpectralOps {
    dim: usize,
    r_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    t: Vec<f64>,
    bary: Vec<f64>,
    d_even: DMatrix<f64>,
    d_odd: DMatrix<f64>,
    kernels: Mutex<HashMap<KernelSpec, KernelPair>>,
    stiff: Mutex<HashMap<usize, Arc<DMatrix<f64>>>>,
}

impl std::fmt::Debug for SpectralOps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralOps")
            .field("dim", &self.dim)
            .field("r_max", &self.r_max)
            .field("len", &self.nodes.len())
            .finish()
    }
}

impl SpectralOps {
    pub fn for_grid(grid: &RadialGrid) -> Result<Arc<SpectralOps>> {
        if grid.scheme() != Scheme::GaussLegendreMapped {
            return Err(HartreeError::Unsupported(format!(
                "differential operators need the {} scheme, grid is {}",
                Scheme::GaussLegendreMapped,
                grid.scheme()
            )));
        }
        Ok(Arc::clone(grid.ops.get_or_init(|| Arc::new(Self::build(grid)))))
    }

    fn build(grid: &RadialGrid) -> SpectralOps {
        let t = grid.mapped_t().expect("mapped grid").to_vec();
        let bary = grid.mapped_bary().expect("mapped grid").to_vec();
        let nodes = grid.nodes().to_vec();
        let n = t.len();
        let r2 = grid.r_max() * grid.r_max();

        let mut dt = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = (bary[j] / bary[i]) / (t[i] - t[j]);
                    dt[(i, j)] = v;
                    diag -= v;
                }
            }
            dt[(i, i)] = diag;
        }
        let d_even = DMatrix::from_fn(n, n, |i, j| 4.0 * nodes[i] / r2 * dt[(i, j)]);
        let d_odd = DMatrix::from_fn(n, n, |i, j| {
            let mut v = 4.0 * nodes[i] * nodes[i] / r2 * dt[(i, j)] / nodes[j];
            if i == j {
                v += 1.0 / nodes[j];
            }
            v
        });
        SpectralOps {
            dim: grid.dim(),
            r_max: grid.r_max(),
            nodes,
            weights: grid.weights().to_vec(),
            t,
            bary,
            d_even,
            d_odd,
            kernels: Mutex::new(HashMap::new()),
            stiff: Mutex::new(HashMap::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
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

    /// `d/dr` on functions of the given parity (result has the other parity).
    pub fn derivative(&self, parity: Parity) -> &DMatrix<f64> {
        match parity {
            Parity::Even => &self.d_even,
            Parity::Odd => &self.d_odd,
        }
    }

    pub fn differentiate(&self, values: &[f64], parity: Parity) -> Vec<f64> {
        let v = DVector::from_column_slice(values);
        (self.derivative(parity) * v).as_slice().to_vec()
    }

    /// Weighted stiffness matrix of `-Delta_k` (symmetric).
    pub fn stiffness(&self, k: usize) -> Arc<DMatrix<f64>> {
        if let Some(m) = self.stiff.lock().unwrap().get(&k) {
            return Arc::clone(m);
        }
        let m = Arc::new(self.build_stiffness(k));
        self.stiff.lock().unwrap().insert(k, Arc::clone(&m));
        m
    }

    fn build_stiffness(&self, k: usize) -> DMatrix<f64> {
        let d = self.derivative(Parity::of_degree(k));
        let n = self.len();
        let wd = DMatrix::from_fn(n, n, |i, j| self.weights[i] * d[(i, j)]);
        let mut s = d.transpose() * wd;
        let cent = (k * (k + self.dim - 2)) as f64;
        if cent > 0.0 {
            for i in 0..n {
                s[(i, i)] += self.weights[i] * cent / (self.nodes[i] * self.nodes[i]);
            }
        }
        s
    }

    /// Nodal form `W^{-1} K_k` of `-Delta_k`.
    pub fn neg_laplacian(&self, k: usize) -> DMatrix<f64> {
        let mut a = (*self.stiffness(k)).clone();
        for (i, mut row) in a.row_iter_mut().enumerate() {
            row /= self.weights[i];
        }
        a
    }

    /// Interpolation row for `s`-polynomials at radius `rho`.
    fn even_row(&self, rho: f64, out: &mut [f64]) {
        let x = 2.0 * (rho / self.r_max).powi(2) - 1.0;
        if let Some(j) = self.t.iter().position(|&tj| tj == x) {
            out.iter_mut().for_each(|c| *c = 0.0);
            out[j] = 1.0;
            return;
        }
        let mut s = 0.0;
        for ((c, &tj), &b) in out.iter_mut().zip(&self.t).zip(&self.bary) {
            *c = b / (x - tj);
            s += *c;
        }
        out.iter_mut().for_each(|c| *c /= s);
    }

    /// Nodal matrix `M` with `(M f)_i = int_0^R kernel(r_i, rho) f(rho) rho^{n-1} d rho`,
    /// made self-adjoint in the weighted inner product.
    pub fn kernel_matrix(&self, spec: KernelSpec) -> Arc<DMatrix<f64>> {
        self.kernel_pairs(&[spec]).pop().unwrap().sym
    }

    /// The collocation matrix itself, without the symmetrization: the most
    /// accurate nodal values of the kernel integral.
    pub fn kernel_matrix_raw(&self, spec: KernelSpec) -> Arc<DMatrix<f64>> {
        self.kernel_pairs(&[spec]).pop().unwrap().raw
    }

    /// Builds several symmetrized kernel matrices in one sweep over the rows.
    pub fn kernel_matrices(&self, specs: &[KernelSpec]) -> Vec<Arc<DMatrix<f64>>> {
        self.kernel_pairs(specs).into_iter().map(|p| p.sym).collect()
    }

    fn kernel_pairs(&self, specs: &[KernelSpec]) -> Vec<KernelPair> {
        let missing: Vec<KernelSpec> = {
            let cache = self.kernels.lock().unwrap();
            let mut m: Vec<KernelSpec> = specs.iter().filter(|s| !cache.contains_key(s)).copied().collect();
            m.sort_by_key(|s| (s.a, s.b, s.c_bits, s.parity == Parity::Odd));
            m.dedup();
            m
        };
        if !missing.is_empty() {
            let built = self.assemble(&missing);
            let mut cache = self.kernels.lock().unwrap();
            for (s, raw) in missing.into_iter().zip(built) {
                let n = raw.nrows();
                let sym = DMatrix::from_fn(n, n, |i, j| {
                    0.5 * (raw[(i, j)] + self.weights[j] * raw[(j, i)] / self.weights[i])
                });
                cache.entry(s).or_insert_with(|| KernelPair {
                    raw: Arc::new(raw),
                    sym: Arc::new(sym),
                });
            }
        }
        let cache = self.kernels.lock().unwrap();
        specs.iter().map(|s| cache[s].clone()).collect()
    }

    fn assemble(&self, specs: &[KernelSpec]) -> Vec<DMatrix<f64>> {
        let n = self.len();
        let nd = self.dim as i32;
        let rule = gauss_legendre(n + 12);
        let q = rule.len();
        let rows: Vec<Vec<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let ri = self.nodes[i];
                let mut pts = Vec::with_capacity(2 * q);
                pts.extend(rule.mapped(0.0, ri).map(|(x, w)| (x, w, true)));
                pts.extend(rule.mapped(ri, self.r_max).map(|(x, w)| (x, w, false)));
                let mut interp = DMatrix::<f64>::zeros(pts.len(), n);
                let mut buf = vec![0.0; n];
                for (p, &(rho, _, _)) in pts.iter().enumerate() {
                    self.even_row(rho, &mut buf);
                    for j in 0..n {
                        interp[(p, j)] = buf[j];
                    }
                }
                let coef = DMatrix::from_fn(specs.len(), pts.len(), |s, p| {
                    let spec = specs[s];
                    let (rho, w, inner) = pts[p];
                    let kern = if inner {
                        rho.powi(spec.a) / ri.powi(spec.b)
                    } else {
                        ri.powi(spec.a) / rho.powi(spec.b)
                    };
                    let odd = if spec.parity == Parity::Odd { rho } else { 1.0 };
                    spec.c() * w * kern * rho.powi(nd - 1) * odd
                });
                let prod = coef * interp;
                specs
                    .iter()
                    .enumerate()
                    .map(|(s, spec)| {
                        (0..n)
                            .map(|j| {
                                let v = prod[(s, j)];
                                if spec.parity == Parity::Odd {
                                    v / self.nodes[j]
                                } else {
                                    v
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        (0..specs.len())
            .map(|s| DMatrix::from_fn(n, n, |i, j| rows[i][s][j]))
            .collect()
    }

    pub fn sector_kernel(&self, k: usize, parity: Parity) -> Arc<DMatrix<f64>> {
        self.kernel_matrix(KernelSpec::sector(self.dim, k, parity))
    }

    /// Weighted inner product `sum w_i f_i g_i`.
    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.dot(f, f).sqrt()
    }
}

pub fn matvec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).as_slice().to_vec()
}
