use alloc::vec::Vec;

use super::{ReconstructError, SceneImage};

/// Window parameters for [`ssim`].
pub const WINDOW_RADIUS: usize = 5;
pub const WINDOW_SIGMA: f64 = 1.5;
pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;
pub const DYNAMIC_RANGE: f64 = 1.0;

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5).
///
/// The window is truncated at the image border and renormalized, so every
/// pixel contributes to the mean, which suits images as small as 8×8.
pub fn ssim(a: &SceneImage, b: &SceneImage) -> Result<f64, ReconstructError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(ReconstructError::Dimensions {
            expected: (a.width, a.height),
            got: (b.width, b.height),
        });
    }
    let (w, h) = (a.width, a.height);
    if w == 0 || h == 0 {
        return Ok(1.0);
    }
    let c1 = (K1 * DYNAMIC_RANGE) * (K1 * DYNAMIC_RANGE);
    let c2 = (K2 * DYNAMIC_RANGE) * (K2 * DYNAMIC_RANGE);
    let r = WINDOW_RADIUS as isize;
    let kernel: Vec<f64> = (-r..=r)
        .map(|d| libm::exp(-((d * d) as f64) / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)))
        .collect();

    let mut total = 0.0;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut sw, mut mx, mut my) = (0.0, 0.0, 0.0);
            let mut taps = Vec::with_capacity(kernel.len() * kernel.len());
            for dy in -r..=r {
                for dx in -r..=r {
                    let (px, py) = (x + dx, y + dy);
                    if px < 0 || py < 0 || px >= w as isize || py >= h as isize {
                        continue;
                    }
                    let wt = kernel[(dy + r) as usize] * kernel[(dx + r) as usize];
                    let i = py as usize * w + px as usize;
                    let (va, vb) = (a.values[i], b.values[i]);
                    sw += wt;
                    mx += wt * va;
                    my += wt * vb;
                    taps.push((wt, va, vb));
                }
            }
            mx /= sw;
            my /= sw;
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for (wt, va, vb) in taps {
                vx += wt * (va - mx) * (va - mx);
                vy += wt * (vb - my) * (vb - my);
                cxy += wt * (va - mx) * (vb - my);
            }
            vx /= sw;
            vy /= sw;
            cxy /= sw;
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    Ok(total / (w * h) as f64)
}
