use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TvError};
use crate::grid::{GridShape, Signal};

/// Piecewise-constant test image: nested axis-aligned rectangles plus an
/// ellipse, on a zero background. Geometry and intensities are jittered
/// by `seed`; all values lie in `[0, 1]`.
pub fn phantom(rows: usize, cols: usize, seed: u64) -> Result<Signal> {
    if rows < 8 || cols < 8 {
        return Err(TvError::invalid(format!("phantom needs at least 8x8 pixels, got {rows}x{cols}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r, c) = (rows as f64, cols as f64);
    let mut jitter = |lo: f64, hi: f64| rng.gen_range(lo..hi);

    // (top, left, bottom, right) as fractions of the image, each nested in the previous one
    let outer = [jitter(0.08, 0.14), jitter(0.08, 0.14), jitter(0.86, 0.92), jitter(0.86, 0.92)];
    let inner = [jitter(0.22, 0.3), jitter(0.2, 0.28), jitter(0.6, 0.7), jitter(0.5, 0.6)];
    let core = [
        inner[0] + jitter(0.06, 0.1),
        inner[1] + jitter(0.06, 0.1),
        inner[2] - jitter(0.08, 0.12),
        inner[3] - jitter(0.06, 0.1),
    ];
    let levels = [jitter(0.25, 0.35), jitter(0.5, 0.6), jitter(0.1, 0.18), jitter(0.85, 0.95)];
    let ellipse_center = (jitter(0.7, 0.78), jitter(0.62, 0.74));
    let ellipse_axes = (jitter(0.08, 0.12), jitter(0.1, 0.14));

    let in_rect = |rect: &[f64; 4], y: f64, x: f64| y >= rect[0] && y < rect[2] && x >= rect[1] && x < rect[3];
    let shape = GridShape::d2(rows, cols)?;
    Ok(Signal::from_fn(&shape, |ix| {
        // pixel centers in unit coordinates
        let y = (ix[0] as f64 + 0.5) / r;
        let x = (ix[1] as f64 + 0.5) / c;
        let dy = (y - ellipse_center.0) / ellipse_axes.0;
        let dx = (x - ellipse_center.1) / ellipse_axes.1;
        if dy * dy + dx * dx <= 1.0 {
            levels[3]
        } else if in_rect(&core, y, x) {
            levels[2]
        } else if in_rect(&inner, y, x) {
            levels[1]
        } else if in_rect(&outer, y, x) {
            levels[0]
        } else {
            0.0
        }
    }))
}
