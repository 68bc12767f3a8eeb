//! Shooting on the Schrödinger–Newton system
//! `u'' + (n-1)/r u' = u - v u`, `v'' + (n-1)/r v' = -u^2`.
//!
//! For fixed `u(0) = a` the inner bisection finds the `v(0)` separating
//! trajectories where `u` crosses zero from those where `u` turns up. The
//! separatrix solves the equation with mass `1 - c`, `c = v(inf)`, and is then
//! the rescaling `(1-c) U(sqrt(1-c) r)` of the ground state, so `U(0) = a/(1-c)`
//! and the outer update on `a` is exact up to the accuracy of `c`. Beyond the
//! radius where the two bracketing trajectories separate, the profile is
//! continued by the decaying solution of the linear tail equation.

use std::sync::Arc;

use log::debug;

use super::SolverConfig;
use crate::error::{HartreeError, Result};
use crate::ode::{integrate, Tolerance};
use crate::radial::RadialGrid;

const R0: f64 = 1e-3;
const TOL: Tolerance = Tolerance {
    rtol: 1e-13,
    atol: 1e-300,
};
const AGREE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Over,
    Under,
}

struct Shot {
    outcome: Outcome,
    /// `[u, u', v, v']` at the grid nodes reached before the event.
    states: Vec<[f64; 4]>,
}

fn series_start(n: usize, a: f64, b: f64, r: f64) -> [f64; 4] {
    let nf = n as f64;
    let a2 = (1.0 - b) * a / (2.0 * nf);
    let b2 = -a * a / (2.0 * nf);
    let a4 = ((1.0 - b) * a2 - b2 * a) / (4.0 * (nf + 2.0));
    let b4 = -2.0 * a * a2 / (4.0 * (nf + 2.0));
    let r2 = r * r;
    [
        a + a2 * r2 + a4 * r2 * r2,
        2.0 * a2 * r + 4.0 * a4 * r2 * r,
        b + b2 * r2 + b4 * r2 * r2,
        2.0 * b2 * r + 4.0 * b4 * r2 * r,
    ]
}

fn shoot(n: usize, a: f64, b: f64, nodes: &[f64], r_limit: f64) -> Shot {
    let m = (n - 1) as f64;
    let rhs = |r: f64, y: &[f64; 4]| {
        [
            y[1],
            y[0] - y[2] * y[0] - m / r * y[1],
            y[3],
            -y[0] * y[0] - m / r * y[3],
        ]
    };
    let mut states = Vec::with_capacity(nodes.len());
    let mut r = R0;
    let mut y = series_start(n, a, b, R0);
    let mut h = 1e-3;
    let classify = |y: &[f64; 4]| {
        if y[0] < 0.0 {
            Some(Outcome::Over)
        } else if y[1] > 0.0 {
            Some(Outcome::Under)
        } else {
            None
        }
    };
    let targets = nodes
        .iter()
        .copied()
        .chain((1..).map(|k| nodes.last().copied().unwrap_or(R0) + k as f64))
        .take_while(|&x| x <= r_limit);
    for target in targets {
        let recording = states.len() < nodes.len();
        if target <= R0 {
            states.push(series_start(n, a, b, target));
            continue;
        }
        if !integrate(&rhs, r, &mut y, target, &mut h, TOL) {
            // step collapse only happens after blow-up; the sign decides
            let outcome = classify(&y).unwrap_or(Outcome::Under);
            return Shot { outcome, states };
        }
        r = target;
        if let Some(outcome) = classify(&y) {
            return Shot { outcome, states };
        }
        if recording {
            states.push(y);
        }
    }
    // no event: decide from the logarithmic derivative against the decay rate
    let outcome = if y[1] / y[0] < -1.0 {
        Outcome::Over
    } else {
        Outcome::Under
    };
    Shot { outcome, states }
}

struct Bracket {
    under: Shot,
    over: Shot,
}

fn bisect_potential(n: usize, a: f64, nodes: &[f64], r_limit: f64) -> Result<Bracket> {
    let mut lo = 1.0;
    let mut under = shoot(n, a, lo, nodes, r_limit);
    if under.outcome != Outcome::Under {
        return Err(HartreeError::NotConverged {
            iterations: 0,
            best_residual: f64::INFINITY,
        });
    }
    let mut hi = 2.0;
    let mut over = shoot(n, a, hi, nodes, r_limit);
    let mut grow = 0;
    while over.outcome != Outcome::Over {
        lo = hi;
        under = over;
        hi *= 2.0;
        over = shoot(n, a, hi, nodes, r_limit);
        grow += 1;
        if grow > 60 {
            return Err(HartreeError::NotConverged {
                iterations: grow,
                best_residual: f64::INFINITY,
            });
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let shot = shoot(n, a, mid, nodes, r_limit);
        match shot.outcome {
            Outcome::Under => {
                lo = mid;
                under = shot;
            }
            Outcome::Over => {
                hi = mid;
                over = shot;
            }
        }
    }
    Ok(Bracket { under, over })
}

/// Last node index at which both bracketing trajectories agree and decrease.
fn agreement_index(bracket: &Bracket) -> Option<usize> {
    let len = bracket.under.states.len().min(bracket.over.states.len());
    let mut last = None;
    for i in 0..len {
        let (p, q) = (bracket.under.states[i], bracket.over.states[i]);
        let mid = 0.5 * (p[0] + q[0]);
        if !(mid > 0.0) || (p[0] - q[0]).abs() > AGREE * mid || p[1] >= 0.0 || q[1] >= 0.0 {
            break;
        }
        last = Some(i);
    }
    last
}

fn midpoint_state(bracket: &Bracket, i: usize) -> [f64; 4] {
    let (p, q) = (bracket.under.states[i], bracket.over.states[i]);
    [
        0.5 * (p[0] + q[0]),
        0.5 * (p[1] + q[1]),
        0.5 * (p[2] + q[2]),
        0.5 * (p[3] + q[3]),
    ]
}

pub(super) fn solve(grid: &Arc<RadialGrid>, cfg: &SolverConfig, mu: f64) -> Result<Vec<f64>> {
    let n = grid.dim();
    let nodes = grid.nodes();
    let omega = 1.0 + mu;
    let r_limit = grid.r_max() + 40.0;
    let r_far = grid.r_max() + 5.0;
    let mut a = omega;
    let mut best: Option<Vec<f64>> = None;
    let max_outer = cfg.max_iter.clamp(1, 12);
    for outer in 0..max_outer {
        let bracket = bisect_potential(n, a, nodes, r_limit)?;
        let im = agreement_index(&bracket).ok_or(HartreeError::NotConverged {
            iterations: outer + 1,
            best_residual: f64::INFINITY,
        })?;
        let s = midpoint_state(&bracket, im);
        let rm = nodes[im];
        let (c, tail) = tail_patch(n, s, rm, &nodes[im + 1..], r_far)?;
        let a_next = omega * a / (1.0 - c);
        debug!("shooting outer {outer}: u(0) = {a:.17}, v(inf) = {c:e}, matched at r = {rm:.3}");
        let mut values: Vec<f64> = (0..=im).map(|i| midpoint_state(&bracket, i)[0]).collect();
        values.extend(tail);
        best = Some(values);
        if (a_next - a).abs() <= 4.0 * f64::EPSILON * a {
            break;
        }
        a = a_next;
    }
    Ok(best.expect("at least one outer iteration"))
}

/// Continues the trajectory state `s` at `rm` by the solution whose `u`
/// decays, integrating the full system inwards from `r_far`. The far data
/// `u = A`, `v = c + B r^{2-n}` are adjusted until `u, v, v'` match at `rm`.
/// Returns `c = v(inf)` and `u` at `nodes`.
fn tail_patch(n: usize, s: [f64; 4], rm: f64, nodes: &[f64], r_far: f64) -> Result<(f64, Vec<f64>)> {
    let nf = n as f64;
    let m = nf - 1.0;
    let rhs = |r: f64, y: &[f64; 4]| {
        [
            y[1],
            y[0] - y[2] * y[0] - m / r * y[1],
            y[3],
            -y[0] * y[0] - m / r * y[3],
        ]
    };
    let mut big_b = -s[3] * rm.powf(m) / (nf - 2.0);
    let mut c = s[2] - big_b * rm.powf(2.0 - nf);
    let mut amp = s[0] * (-(r_far - rm)).exp();
    let mut out = vec![0.0; nodes.len()];
    for _ in 0..12 {
        let v_far = c + big_b * r_far.powf(2.0 - nf);
        let kappa = (1.0 - v_far).max(1e-12).sqrt();
        let mut y = [
            amp,
            -(kappa + 0.5 * m / r_far) * amp,
            v_far,
            -(nf - 2.0) * big_b * r_far.powf(1.0 - nf),
        ];
        let mut r = r_far;
        let mut h = 1e-2;
        for (i, &target) in nodes.iter().enumerate().rev() {
            if !integrate(&rhs, r, &mut y, target, &mut h, TOL) {
                return Err(HartreeError::NonFinite("tail continuation".into()));
            }
            r = target;
            out[i] = y[0];
        }
        if !integrate(&rhs, r, &mut y, rm, &mut h, TOL) {
            return Err(HartreeError::NonFinite("tail continuation".into()));
        }
        let scale = s[0] / y[0];
        let d_b = (s[3] - y[3]) / (-(nf - 2.0) * rm.powf(1.0 - nf));
        let d_c = (s[2] - y[2]) - d_b * rm.powf(2.0 - nf);
        amp *= scale;
        big_b += d_b;
        c += d_c;
        out.iter_mut().for_each(|x| *x *= scale);
        if (scale - 1.0).abs() < 1e-13 && d_c.abs() < 1e-15 * s[2].abs().max(1.0) {
            break;
        }
    }
    Ok((c, out))
}
