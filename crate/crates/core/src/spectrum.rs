//! The linearized operator `L = -Delta + 1 - (I_2 * U^2) - 2 U (I_2 * (U .))`
//! restricted to spherical-harmonic sectors, its low spectrum, and the
//! identities satisfied by the ground state.
//!
//! Every sector operator is stored in weak (Galerkin) form
//! `H = K_k + W diag(1 + mu - v) - 2 W U G_k U`, symmetric as a matrix, so
//! that the nodal operator `A = W^{-1} H` is self-adjoint in the weighted
//! inner product.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::discrete::{matvec, KernelSpec, SpectralOps};
use crate::error::{invalid, HartreeError, Result};
use crate::ground_state::{profile_derivative, GroundState};
use crate::radial::{Parity, RadialFunction, RadialGrid};

/// Values below this fraction of the maximum are ignored when counting sign changes.
pub const SIGN_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SectorOperator {
    pub dim: usize,
    pub degree: usize,
    pub mass_shift: f64,
    /// Factor in front of the nonlocal term; `1` for the true operator.
    pub nonlocal_factor: f64,
    grid: Arc<RadialGrid>,
    ops: Arc<SpectralOps>,
    weak: DMatrix<f64>,
    /// `1 + mu - v` at the nodes.
    multiplier: Vec<f64>,
    /// `W U G_k U`.
    exchange: DMatrix<f64>,
    kernel: Arc<DMatrix<f64>>,
    profile: Vec<f64>,
}

impl SectorOperator {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn parity(&self) -> Parity {
        Parity::of_degree(self.degree)
    }

    pub fn len(&self) -> usize {
        self.weak.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.weak.nrows() == 0
    }

    /// Symmetric weak-form matrix `H`.
    pub fn weak_form(&self) -> &DMatrix<f64> {
        &self.weak
    }

    /// Nodal matrix `A = W^{-1} H`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let w = self.ops.weights();
        let mut a = self.weak.clone();
        for (i, mut row) in a.row_iter_mut().enumerate() {
            row /= w[i];
        }
        a
    }

    /// `W^{-1/2} H W^{-1/2}`, similar to `A` and symmetric.
    pub fn symmetric_form(&self) -> DMatrix<f64> {
        let s: Vec<f64> = self.ops.weights().iter().map(|w| w.sqrt().recip()).collect();
        let n = self.len();
        let m = DMatrix::from_fn(n, n, |i, j| s[i] * self.weak[(i, j)] * s[j]);
        0.5 * (&m + m.transpose())
    }

    /// `A f` at the nodes.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let hf = matvec(&self.weak, f);
        hf.iter().zip(self.ops.weights()).map(|(h, w)| h / w).collect()
    }

    /// `L_k f` in collocation form: derivatives from the differentiation
    /// matrices, no boundary term at `r_max`.
    pub fn apply_strong(&self, f: &[f64]) -> Vec<f64> {
        let ops = &self.ops;
        let p = self.parity();
        let q = match p {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        };
        let d1 = ops.differentiate(f, p);
        let d2 = ops.differentiate(&d1, q);
        let m = self.dim as f64 - 1.0;
        let cent = (self.degree * (self.degree + self.dim - 2)) as f64;
        let uf: Vec<f64> = self.profile.iter().zip(f).map(|(a, b)| a * b).collect();
        let g = matvec(&self.kernel, &uf);
        ops.nodes()
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                -d2[i] - m / r * d1[i]
                    + (cent / (r * r) + self.multiplier[i]) * f[i]
                    - 2.0 * self.nonlocal_factor * self.profile[i] * g[i]
            })
            .collect()
    }

    /// `<f, A f>` in the weighted inner product, assembled from the
    /// derivative values so that no large terms cancel.
    pub fn quadratic_form(&self, f: &[f64]) -> f64 {
        let ops = &self.ops;
        let df = ops.differentiate(f, self.parity());
        let cent = (self.degree * (self.degree + self.dim - 2)) as f64;
        let mut local = 0.0;
        for (i, (&w, &r)) in ops.weights().iter().zip(ops.nodes()).enumerate() {
            local += w * (df[i] * df[i] + (cent / (r * r) + self.multiplier[i]) * f[i] * f[i]);
        }
        let ex = matvec(&self.exchange, f);
        let nonlocal: f64 = ex.iter().zip(f).map(|(a, b)| a * b).sum();
        local - 2.0 * self.nonlocal_factor * nonlocal
    }
}

/// Sector `k` of the linearized operator at `gs`, with mass `1 + mu`.
pub fn assemble_sector(gs: &GroundState, k: usize, mu: f64) -> Result<SectorOperator> {
    assemble_sector_scaled(gs, k, mu, 1.0)
}

/// As [`assemble_sector`] with the nonlocal term multiplied by `factor`.
pub fn assemble_sector_scaled(gs: &GroundState, k: usize, mu: f64, factor: f64) -> Result<SectorOperator> {
    if !(1.0 + mu > 0.0) || !mu.is_finite() {
        return invalid(format!("mass shift needs 1 + mu > 0, got mu = {mu}"));
    }
    if !factor.is_finite() {
        return invalid("nonlocal factor must be finite");
    }
    let grid = Arc::clone(gs.grid());
    let ops = SpectralOps::for_grid(&grid)?;
    let n = grid.len();
    let w = ops.weights();
    let u = gs.values();
    let v = gs.potential.values();
    let g = ops.sector_kernel(k, Parity::of_degree(k));
    let exchange = DMatrix::from_fn(n, n, |i, j| {
        let a = w[i] * u[i] * g[(i, j)] * u[j];
        let b = w[j] * u[j] * g[(j, i)] * u[i];
        0.5 * (a + b)
    });
    let multiplier: Vec<f64> = v.iter().map(|p| 1.0 + mu - p).collect();
    let stiff = ops.stiffness(k);
    let mut weak = DMatrix::from_fn(n, n, |i, j| 0.5 * (stiff[(i, j)] + stiff[(j, i)]) - 2.0 * factor * exchange[(i, j)]);
    for i in 0..n {
        weak[(i, i)] += w[i] * multiplier[i];
    }
    Ok(SectorOperator {
        dim: gs.dim,
        degree: k,
        mass_shift: mu,
        nonlocal_factor: factor,
        grid,
        ops,
        weak,
        multiplier,
        exchange,
        kernel: g,
        profile: u.to_vec(),
    })
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub degree: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unit norm in `L^2(r^{n-1} dr)`, positive weighted mean.
    pub eigenvectors: Vec<RadialFunction>,
    pub ground_eigenfunction_sign_changes: usize,
}

fn symmetric_eigen(op: &SectorOperator) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let s = op.symmetric_form();
    if s.iter().any(|x| !x.is_finite()) {
        return Err(HartreeError::Eigen(format!("sector {} matrix is not finite", op.degree)));
    }
    let eig = s
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| HartreeError::Eigen(format!("sector {} eigensolve did not converge", op.degree)))?;
    Ok(eig)
}

/// All eigenvalues of the sector operator, ascending.
pub fn sector_eigenvalues(op: &SectorOperator) -> Result<Vec<f64>> {
    let mut vals: Vec<f64> = symmetric_eigen(op)?.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    Ok(vals)
}

/// Two steps of inverse iteration on the symmetric form, then the eigenvalue
/// from the cancellation-free quadratic form.
fn refine(op: &SectorOperator, s: &DMatrix<f64>, lambda: f64, y: DVector<f64>) -> (f64, Vec<f64>) {
    let n = s.nrows();
    let mut shifted = s.clone();
    for i in 0..n {
        shifted[(i, i)] -= lambda;
    }
    let lu = shifted.lu();
    let mut y = y;
    for _ in 0..2 {
        match lu.solve(&y) {
            Some(z) if z.iter().all(|x| x.is_finite()) && z.norm() > 0.0 => y = z.normalize(),
            _ => break,
        }
    }
    let w = op.ops.weights();
    let phi: Vec<f64> = y.iter().zip(w).map(|(yi, wi)| yi / wi.sqrt()).collect();
    let norm2: f64 = phi.iter().zip(w).map(|(p, wi)| wi * p * p).sum();
    (op.quadratic_form(&phi) / norm2, phi)
}

/// Sign changes on the nodes, ignoring values below `SIGN_FLOOR` times the maximum.
pub fn count_sign_changes(values: &[f64]) -> usize {
    let max = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut last = 0.0f64;
    let mut changes = 0;
    for &x in values {
        if x.abs() <= SIGN_FLOOR * max {
            continue;
        }
        if last != 0.0 && x.signum() != last.signum() {
            changes += 1;
        }
        last = x;
    }
    changes
}

/// The `m` lowest eigenpairs of the sector operator.
pub fn lowest_eigenpairs(op: &SectorOperator, m: usize) -> Result<SpectrumResult> {
    if m == 0 {
        return invalid("need at least one eigenpair");
    }
    if m > op.len() {
        return invalid(format!("asked for {m} eigenpairs of a {}-node operator", op.len()));
    }
    let eig = symmetric_eigen(op)?;
    let s = op.symmetric_form();
    let mut order: Vec<usize> = (0..op.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let w = op.ops.weights();
    let mut eigenvalues = Vec::with_capacity(m);
    let mut eigenvectors = Vec::with_capacity(m);
    for &idx in order.iter().take(m) {
        let (lambda, mut phi) = refine(op, &s, eig.eigenvalues[idx], eig.eigenvectors.column(idx).into_owned());
        let norm = phi.iter().zip(w).map(|(p, wi)| wi * p * p).sum::<f64>().sqrt();
        let mean: f64 = phi.iter().zip(w).map(|(p, wi)| wi * p).sum();
        let scale = if mean < 0.0 { -1.0 / norm } else { 1.0 / norm };
        phi.iter_mut().for_each(|p| *p *= scale);
        eigenvalues.push(lambda);
        eigenvectors.push(RadialFunction::new(Arc::clone(&op.grid), phi)?.with_parity(op.parity()));
    }
    let ground_eigenfunction_sign_changes = count_sign_changes(eigenvectors[0].values());
    Ok(SpectrumResult {
        degree: op.degree,
        eigenvalues,
        eigenvectors,
        ground_eigenfunction_sign_changes,
    })
}

fn weighted_norm(ops: &SpectralOps, f: &[f64]) -> f64 {
    ops.norm(f)
}

/// `||L_1 U'|| / ||U'||`.
pub fn zero_mode_residual(gs: &GroundState) -> Result<f64> {
    let op = assemble_sector(gs, 1, gs.mu)?;
    let du = profile_derivative(gs)?;
    let r = op.apply_strong(du.values());
    Ok(weighted_norm(&op.ops, &r) / weighted_norm(&op.ops, du.values()))
}

fn identity_defect(gs: &GroundState, probe: impl Fn(&[f64], &[f64], &[f64], f64) -> (Vec<f64>, Vec<f64>)) -> Result<f64> {
    let op = assemble_sector(gs, 0, gs.mu)?;
    let ops = &op.ops;
    let u = gs.values();
    let du = ops.differentiate(u, Parity::Even);
    let rdu: Vec<f64> = du.iter().zip(ops.nodes()).map(|(d, r)| r * d).collect();
    let (input, target) = probe(u, &rdu, gs.potential.values(), 1.0 + gs.mu);
    let out = op.apply_strong(&input);
    let diff: Vec<f64> = out.iter().zip(&target).map(|(a, b)| a - b).collect();
    Ok(weighted_norm(ops, &diff) / weighted_norm(ops, u))
}

/// `||L U + 2 (I_2 * U^2) U|| / ||U||`.
pub fn check_identity_lu(gs: &GroundState) -> Result<f64> {
    identity_defect(gs, |u, _, v, _| {
        let target = u.iter().zip(v).map(|(a, b)| -2.0 * a * b).collect();
        (u.to_vec(), target)
    })
}

/// `||L(r U') + 2 omega U - 4 (I_2 * U^2) U|| / ||U||` with `omega = 1 + mu`.
pub fn check_identity_ru(gs: &GroundState) -> Result<f64> {
    identity_defect(gs, |u, rdu, v, omega| {
        let target = u.iter().zip(v).map(|(a, b)| -2.0 * omega * a + 4.0 * a * b).collect();
        (rdu.to_vec(), target)
    })
}

/// `||L(2U + r U') + 2 omega U|| / ||U||` with `omega = 1 + mu`.
pub fn check_identity_2u_ru(gs: &GroundState) -> Result<f64> {
    identity_defect(gs, |u, rdu, _, omega| {
        let input = u.iter().zip(rdu).map(|(a, b)| 2.0 * a + b).collect();
        let target = u.iter().map(|a| -2.0 * omega * a).collect();
        (input, target)
    })
}

/// The two terms of `W_k = <phi, (L_k - L_1) phi>`, with the exchange part
/// evaluated for both readings of the `k = 1` comparison kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WkTerms {
    /// `int (k(k+n-2) - (n-1)) / r^2 phi^2 r^{n-1} dr`.
    pub centrifugal: f64,
    /// `2 iint U phi (G_1 - G_k) U phi`, `G_1 = r_< / (n r_>^{n-1})`.
    pub exchange: f64,
    /// Same with `r_< / (n r_>^{n-2})`.
    pub exchange_alt: f64,
}

impl WkTerms {
    pub fn total(&self) -> f64 {
        self.centrifugal + self.exchange
    }

    pub fn total_alt(&self) -> f64 {
        self.centrifugal + self.exchange_alt
    }
}

/// Both terms of `W_k` for the profile `phi`, normalized internally.
pub fn wk_terms(gs: &GroundState, phi: &RadialFunction, k: usize) -> Result<WkTerms> {
    if k < 2 {
        return invalid(format!("W_k is defined for k >= 2, got {k}"));
    }
    if !gs.grid().same_as(phi.grid()) {
        return Err(HartreeError::GridMismatch("phi and the ground state use different grids".into()));
    }
    if !phi.is_finite() {
        return Err(HartreeError::NonFinite("phi".into()));
    }
    let ops = SpectralOps::for_grid(gs.grid())?;
    let n = gs.dim;
    let w = ops.weights();
    let f = phi.values();
    let norm2 = ops.dot(f, f);
    if !(norm2 > 0.0) {
        return invalid("phi must be nonzero");
    }
    let parity = Parity::of_degree(k);
    let specs = [
        KernelSpec::sector(n, 1, parity),
        KernelSpec::new(1, n as i32 - 2, 1.0 / n as f64, parity),
        KernelSpec::sector(n, k, parity),
    ];
    let mats = ops.kernel_matrices(&specs);
    let cent = (k * (k + n - 2)) as f64 - (n as f64 - 1.0);
    let centrifugal: f64 = w
        .iter()
        .zip(ops.nodes())
        .zip(f)
        .map(|((wi, r), p)| wi * cent / (r * r) * p * p)
        .sum();
    let uf: Vec<f64> = gs.values().iter().zip(f).map(|(a, b)| a * b).collect();
    let pair = |m: &DMatrix<f64>| ops.dot(&uf, &matvec(m, &uf));
    let gk = pair(&mats[2]);
    Ok(WkTerms {
        centrifugal: centrifugal / norm2,
        exchange: 2.0 * (pair(&mats[0]) - gk) / norm2,
        exchange_alt: 2.0 * (pair(&mats[1]) - gk) / norm2,
    })
}

/// `W_k` with the sector kernels `G_1`, `G_k`.
pub fn compute_wk(gs: &GroundState, phi: &RadialFunction, k: usize) -> Result<f64> {
    Ok(wk_terms(gs, phi, k)?.total())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportConfig {
    pub k_max: usize,
    /// Eigenpairs computed per sector (at least 2).
    pub eigen_count: usize,
    /// `|lambda_{1,0}|` must stay below this multiple of the zero-mode residual.
    pub zero_factor: f64,
    /// Lower bound `delta_0` for `min |lambda|` in the radial sector.
    pub gap: f64,
    pub nonlocal_factor: f64,
}

/// Radial gap bound. The smallest `|lambda|` of `L_0` lies between 0.4 and
/// 0.8 for `n = 3, 4, 5` on the default grids and is stable under refinement.
pub const DEFAULT_GAP: f64 = 0.1;

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            k_max: 8,
            eigen_count: 2,
            zero_factor: 100.0,
            gap: DEFAULT_GAP,
            nonlocal_factor: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SectorRecord {
    pub k: usize,
    pub lambda0: f64,
    pub lambda1: f64,
    pub sign_changes: usize,
    /// `(W_k, W_k with the alternative kernel)` for `k >= 2`.
    pub wk: Option<(f64, f64)>,
    pub wk_centrifugal: Option<f64>,
    /// Correlation `|<phi_{1,0}, U'>| / (||phi|| ||U'||)` for `k = 1`.
    pub zero_mode_correlation: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct NondegeneracyReport {
    pub dim: usize,
    pub sectors: Vec<SectorRecord>,
    pub zero_mode_residual: f64,
    pub tol_zero: f64,
    /// `min |lambda|` over the whole radial spectrum.
    pub radial_min_abs: f64,
    pub gap: f64,
    pub nondegenerate: bool,
    /// Names of the conditions that failed.
    pub failures: Vec<String>,
}

impl NondegeneracyReport {
    pub fn sector(&self, k: usize) -> Option<&SectorRecord> {
        self.sectors.iter().find(|s| s.k == k)
    }
}

/// `min |lambda|` over the whole spectrum of a sector operator.
pub fn min_abs_eigenvalue(op: &SectorOperator) -> Result<f64> {
    let s = op.symmetric_form();
    let eig = symmetric_eigen(op)?;
    let idx = (0..eig.eigenvalues.len())
        .min_by(|&a, &b| eig.eigenvalues[a].abs().total_cmp(&eig.eigenvalues[b].abs()))
        .unwrap_or(0);
    let (lambda, _) = refine(op, &s, eig.eigenvalues[idx], eig.eigenvectors.column(idx).into_owned());
    Ok(lambda.abs())
}

fn sector_record(gs: &GroundState, k: usize, cfg: &ReportConfig, du: &RadialFunction) -> Result<(SectorRecord, Option<f64>)> {
    let op = assemble_sector_scaled(gs, k, gs.mu, cfg.nonlocal_factor)?;
    let spec = lowest_eigenpairs(&op, cfg.eigen_count.max(2))?;
    let radial_min = if k == 0 { Some(min_abs_eigenvalue(&op)?) } else { None };
    let phi = &spec.eigenvectors[0];
    let (wk, wk_centrifugal) = if k >= 2 {
        let t = wk_terms(gs, phi, k)?;
        (Some((t.total(), t.total_alt())), Some(t.centrifugal))
    } else {
        (None, None)
    };
    let zero_mode_correlation = if k == 1 {
        let ops = &op.ops;
        let c = ops.dot(phi.values(), du.values()).abs() / (ops.norm(phi.values()) * ops.norm(du.values()));
        Some(c)
    } else {
        None
    };
    Ok((
        SectorRecord {
            k,
            lambda0: spec.eigenvalues[0],
            lambda1: spec.eigenvalues[1],
            sign_changes: spec.ground_eigenfunction_sign_changes,
            wk,
            wk_centrifugal,
            zero_mode_correlation,
            error: None,
        },
        radial_min,
    ))
}

/// Per-sector spectra for `k = 0..=k_max` and the nondegeneracy verdict.
pub fn nondegeneracy_report(gs: &GroundState, k_max: usize) -> Result<NondegeneracyReport> {
    nondegeneracy_report_with(gs, &ReportConfig { k_max, ..Default::default() })
}

pub fn nondegeneracy_report_with(gs: &GroundState, cfg: &ReportConfig) -> Result<NondegeneracyReport> {
    if cfg.k_max < 2 {
        return invalid(format!("k_max must be at least 2, got {}", cfg.k_max));
    }
    if !(cfg.gap >= 0.0) || !(cfg.zero_factor > 0.0) {
        return invalid("gap must be >= 0 and zero_factor > 0");
    }
    let du = profile_derivative(gs)?;
    let zero_mode_residual = {
        let op = assemble_sector_scaled(gs, 1, gs.mu, cfg.nonlocal_factor)?;
        let r = op.apply_strong(du.values());
        op.ops.norm(&r) / op.ops.norm(du.values())
    };
    let results: Vec<(usize, Result<(SectorRecord, Option<f64>)>)> = (0..=cfg.k_max)
        .into_par_iter()
        .map(|k| (k, sector_record(gs, k, cfg, &du)))
        .collect();
    let mut sectors = Vec::with_capacity(results.len());
    let mut radial_min_abs = f64::NAN;
    for (k, res) in results {
        match res {
            Ok((rec, rmin)) => {
                if let Some(x) = rmin {
                    radial_min_abs = x;
                }
                sectors.push(rec);
            }
            Err(e) => sectors.push(SectorRecord {
                k,
                lambda0: f64::NAN,
                lambda1: f64::NAN,
                sign_changes: 0,
                wk: None,
                wk_centrifugal: None,
                zero_mode_correlation: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let tol_zero = cfg.zero_factor * zero_mode_residual;
    let mut failures = Vec::new();
    for s in &sectors {
        if let Some(e) = &s.error {
            failures.push(format!("sector {} failed: {e}", s.k));
        }
    }
    if let Some(s1) = sectors.iter().find(|s| s.k == 1 && s.error.is_none()) {
        if !(s1.lambda0.abs() < tol_zero) {
            failures.push(format!(
                "zero_mode: |lambda_1,0| = {:e} is not below {tol_zero:e}",
                s1.lambda0.abs()
            ));
        }
    }
    if !(radial_min_abs > cfg.gap) {
        failures.push(format!(
            "radial_gap: min |lambda_0| = {radial_min_abs:e} does not exceed {:e}",
            cfg.gap
        ));
    }
    for s in sectors.iter().filter(|s| s.k >= 2 && s.error.is_none()) {
        if !(s.lambda0 > 0.0) {
            failures.push(format!("positivity: lambda_{},0 = {:e} is not positive", s.k, s.lambda0));
        }
    }
    Ok(NondegeneracyReport {
        dim: gs.dim,
        sectors,
        zero_mode_residual,
        tol_zero,
        radial_min_abs,
        gap: cfg.gap,
        nondegenerate: failures.is_empty(),
        failures,
    })
}
