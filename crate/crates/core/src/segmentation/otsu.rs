use num_bigint::BigUint;

use crate::volume_io::VoxelGrid;

use super::SegmentError;

pub const HISTOGRAM_BINS: usize = 256;

/// Bin of a `[0, 1]` intensity; values outside the range are clamped.
#[inline]
pub fn intensity_bin(v: f32) -> usize {
    let b = (f64::from(v) * HISTOGRAM_BINS as f64).floor();
    if b <= 0.0 {
        0
    } else {
        (b as usize).min(HISTOGRAM_BINS - 1)
    }
}

pub fn histogram(grid: &VoxelGrid) -> [u64; HISTOGRAM_BINS] {
    let mut h = [0u64; HISTOGRAM_BINS];
    for &v in grid.data() {
        h[intensity_bin(v)] += 1;
    }
    h
}

/// Otsu split of a histogram: returns the last bin of the lower class.
///
/// Maximizes the between-class variance over every split with both classes
/// non-empty; the lowest bin wins ties. Variances are compared exactly as
/// rationals, since symmetric histograms produce genuine ties that floating
/// point would break arbitrarily.
pub fn otsu_bin(hist: &[u64]) -> Result<usize, SegmentError> {
    // N^3 times the between-class variance of a split equals
    // (N*s0 - n0*S)^2 / (n0*n1), with S the total intensity sum.
    let total = BigUint::from(hist.iter().map(|&c| u128::from(c)).sum::<u128>());
    let total_sum = BigUint::from(
        hist.iter()
            .enumerate()
            .map(|(i, &c)| i as u128 * u128::from(c))
            .sum::<u128>(),
    );

    let mut best: Option<(usize, BigUint, BigUint)> = None;
    let mut n0 = BigUint::ZERO;
    let mut s0 = BigUint::ZERO;
    for (t, &c) in hist.iter().enumerate() {
        n0 += c;
        s0 += BigUint::from(c) * t;
        if n0 == BigUint::ZERO {
            continue;
        }
        if n0 == total {
            break;
        }
        let (a, b) = (&total * &s0, &n0 * &total_sum);
        let diff = if a > b { a - b } else { b - a };
        let num = &diff * &diff;
        let den = &n0 * (&total - &n0);
        let better = match &best {
            None => true,
            Some((_, bn, bd)) => &num * bd > bn * &den,
        };
        if better {
            best = Some((t, num, den));
        }
    }
    best.map(|(t, _, _)| t)
        .ok_or(SegmentError::DegenerateHistogram)
}

/// Intensity threshold for [`super::binarize`] from a 256-bin Otsu split of
/// a normalized grid.
///
/// The returned value is the lower edge of the first upper-class bin, so a
/// voxel is foreground exactly when its bin lies above the Otsu split.
pub fn otsu_threshold(grid: &VoxelGrid) -> Result<f64, SegmentError> {
    let t = otsu_bin(&histogram(grid))?;
    Ok((t + 1) as f64 / HISTOGRAM_BINS as f64)
}
