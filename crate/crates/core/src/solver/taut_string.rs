//! Exact 1D total-variation denoising by the taut-string construction.
//!
//! With running sums `S_k = g_1 + ... + g_k`, the minimizer of
//! `||u - g||^2 + 2 alpha TV(u)` is the derivative of the shortest path
//! from `(0, 0)` to `(N, S_N)` staying within `[S_k - alpha, S_k + alpha]`
//! at every interior knot `k`. The path is built greedily: from the
//! current anchor we keep the feasible slope interval, and when a new knot
//! empties it the string bends at the knot that last tightened the
//! violated side.

use crate::error::{Result, TvError};
use crate::grid::Signal;

pub fn taut_string_1d(g: &Signal, alpha: f64) -> Result<Signal> {
    if g.shape().ndim() != 1 {
        return Err(TvError::invalid("taut string needs a 1D signal"));
    }
    if !(alpha >= 0.0) {
        return Err(TvError::invalid(format!("alpha must be nonnegative, got {alpha}")));
    }
    let values = g.values();
    let n = values.len();
    let mut sums = vec![0.0; n + 1];
    for k in 0..n {
        sums[k + 1] = sums[k] + values[k];
    }
    let lower = |k: usize| if k == n { sums[n] } else { sums[k] - alpha };
    let upper = |k: usize| if k == n { sums[n] } else { sums[k] + alpha };

    let mut u = vec![0.0; n];
    let (mut k0, mut y0) = (0usize, 0.0f64);
    while k0 < n {
        // feasible slopes [lo_slope, hi_slope], attained at knots lo_at / hi_at
        let (mut lo_slope, mut lo_at) = (f64::NEG_INFINITY, k0);
        let (mut hi_slope, mut hi_at) = (f64::INFINITY, k0);
        let mut k = k0 + 1;
        let (next_k, next_y, slope) = loop {
            let run = (k - k0) as f64;
            let l = (lower(k) - y0) / run;
            let h = (upper(k) - y0) / run;
            if h < lo_slope {
                break (lo_at, lower(lo_at), lo_slope);
            }
            if l > hi_slope {
                break (hi_at, upper(hi_at), hi_slope);
            }
            if l >= lo_slope {
                lo_slope = l;
                lo_at = k;
            }
            if h <= hi_slope {
                hi_slope = h;
                hi_at = k;
            }
            if k == n {
                break (n, sums[n], (sums[n] - y0) / run);
            }
            k += 1;
        };
        for x in &mut u[k0..next_k] {
            *x = slope;
        }
        k0 = next_k;
        y0 = next_y;
    }
    Signal::new(g.shape().clone(), u)
}
