//! Brute-force Newton potential on a uniform cube of cells (`n = 3`).

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid, HartreeError, Result};

/// Largest number of cells per side the oracle accepts.
pub const MAX_CELLS_PER_SIDE: usize = 64;

/// Cell values of a density on the cube `lower + [0, m h]^3`, stored with
/// the first index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedFunction {
    pub lower: [f64; 3],
    pub spacing: f64,
    pub cells: usize,
    pub values: Vec<f64>,
}

impl GriddedFunction {
    pub fn new(lower: [f64; 3], spacing: f64, cells: usize, values: Vec<f64>) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return invalid(format!("cell spacing must be positive, got {spacing}"));
        }
        if cells == 0 || cells > MAX_CELLS_PER_SIDE {
            return invalid(format!("cells per side must be in 1..={MAX_CELLS_PER_SIDE}, got {cells}"));
        }
        if values.len() != cells.pow(3) {
            return invalid(format!("expected {} cell values, got {}", cells.pow(3), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(HartreeError::NonFinite("cell values".into()));
        }
        Ok(GriddedFunction {
            lower,
            spacing,
            cells,
            values,
        })
    }

    /// Cell averages of `f` on the cube centred at `center` with half-width
    /// `half_width`, each approximated by the midpoint rule on `sub^3`
    /// sub-cells.
    pub fn sample<F>(f: F, center: [f64; 3], half_width: f64, cells: usize, sub: usize) -> Result<Self>
    where
        F: Fn([f64; 3]) -> f64 + Sync,
    {
        if sub == 0 {
            return invalid("sub-cell count must be positive");
        }
        let h = 2.0 * half_width / cells as f64;
        let lower = [center[0] - half_width, center[1] - half_width, center[2] - half_width];
        let hs = h / sub as f64;
        let values: Vec<f64> = (0..cells.pow(3))
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = (idx % cells, (idx / cells) % cells, idx / (cells * cells));
                let mut s = 0.0;
                for a in 0..sub {
                    for b in 0..sub {
                        for c in 0..sub {
                            let y = [
                                lower[0] + i as f64 * h + (a as f64 + 0.5) * hs,
                                lower[1] + j as f64 * h + (b as f64 + 0.5) * hs,
                                lower[2] + k as f64 * h + (c as f64 + 0.5) * hs,
                            ];
                            s += f(y);
                        }
                    }
                }
                s / sub.pow(3) as f64
            })
            .collect();
        Self::new(lower, h, cells, values)
    }

    fn center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let h = self.spacing;
        [
            self.lower[0] + (i as f64 + 0.5) * h,
            self.lower[1] + (j as f64 + 0.5) * h,
            self.lower[2] + (k as f64 + 0.5) * h,
        ]
    }
}

/// `(1/((n-2)|S^{n-1}|)) int f(y) |x-y|^{2-n} dy` by the cell-centre rule. The
/// cell containing `x` is replaced by the ball of equal volume centred at `x`,
/// where `int_{B_a} |x-y|^{-1} dy = 2 pi a^2`.
pub fn direct_newton_potential_nd(n: usize, samples: &GriddedFunction, point: &[f64]) -> Result<f64> {
    if n != 3 {
        return Err(HartreeError::UnsupportedDimension(n));
    }
    if point.len() != 3 || point.iter().any(|x| !x.is_finite()) {
        return invalid("the evaluation point must be a finite 3-vector");
    }
    let m = samples.cells;
    let h = samples.spacing;
    let mut own = [0usize; 3];
    for d in 0..3 {
        let s = (point[d] - samples.lower[d]) / h;
        if !(0.0..=m as f64).contains(&s) {
            return invalid(format!("point {point:?} lies outside the sample box"));
        }
        own[d] = (s.floor() as usize).min(m - 1);
    }
    let vol = h * h * h;
    let a = (3.0 / (4.0 * PI)).cbrt() * h;
    let slabs: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|k| {
            let mut s = 0.0;
            for j in 0..m {
                for i in 0..m {
                    let f = samples.values[i + m * (j + m * k)];
                    if f == 0.0 {
                        continue;
                    }
                    if [i, j, k] == own {
                        s += f * 2.0 * PI * a * a;
                        continue;
                    }
                    let c = samples.center(i, j, k);
                    let d = ((point[0] - c[0]).powi(2) + (point[1] - c[1]).powi(2) + (point[2] - c[2]).powi(2)).sqrt();
                    s += f * vol / d;
                }
            }
            s
        })
        .collect();
    Ok(slabs.iter().sum::<f64>() / (4.0 * PI))
}
