//! Adaptive Dormand–Prince 5(4) integration for small first-order systems.

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Advances `y` from `x0` to `x1` (either direction). `h` carries the step
/// size between calls. Returns `false` if the step size collapsed.
pub fn integrate<const D: usize, F>(
    f: &F,
    x0: f64,
    y: &mut [f64; D],
    x1: f64,
    h: &mut f64,
    tol: Tolerance,
) -> bool
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let dir = (x1 - x0).signum();
    let span = (x1 - x0).abs();
    if span == 0.0 {
        return true;
    }
    let mut x = x0;
    let mut step = h.abs().min(span).max(span * 1e-12);
    let mut k = [[0.0; D]; 7];
    loop {
        let remaining = (x1 - x).abs();
        if remaining <= 1e-15 * x1.abs().max(1.0) {
            break;
        }
        let last = step >= remaining;
        let hh = if last { remaining } else { step } * dir;
        k[0] = f(x, y);
        for s in 1..7 {
            let mut ys = *y;
            for (d, v) in ys.iter_mut().enumerate() {
                for j in 0..s {
                    *v += hh * A[s][j] * k[j][d];
                }
            }
            k[s] = f(x + C[s] * hh, &ys);
        }
        let mut y_new = *y;
        let mut err: f64 = 0.0;
        for d in 0..D {
            let mut inc = 0.0;
            let mut e = 0.0;
            for s in 0..7 {
                inc += B5[s] * k[s][d];
                e += (B5[s] - B4[s]) * k[s][d];
            }
            y_new[d] += hh * inc;
            let scale = tol.atol + tol.rtol * y[d].abs().max(y_new[d].abs());
            err = err.max((hh * e).abs() / scale);
        }
        if !err.is_finite() {
            step *= 0.1;
            if step < 1e-14 * span {
                return false;
            }
            continue;
        }
        if err <= 1.0 {
            x = if last { x1 } else { x + hh };
            *y = y_new;
            if !last {
                *h = step;
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        step *= factor;
        if step < 1e-14 * span.max(1e-300) && err > 1.0 {
            return false;
        }
    }
    true
}
