use crate::volume::Volume3;

pub const DEFAULT_BINS: usize = 256;

/// Global histogram equalization: each voxel maps to the fraction of voxels
/// whose bin is at or below its own, so outputs lie in `(0, 1]`. A constant
/// volume maps to 1 everywhere. Non-finite voxels are left at 0.
pub fn hist_equalize(v: &Volume3, bins: usize) -> Volume3 {
    let bins = bins.max(1);
    let finite = || v.data().iter().copied().filter(|x| x.is_finite());
    let lo = finite().fold(f64::INFINITY, f64::min);
    let hi = finite().fold(f64::NEG_INFINITY, f64::max);
    let n = finite().count();
    let bin = |x: f64| {
        if hi > lo {
            (((x - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
        } else {
            0
        }
    };
    let mut hist = vec![0usize; bins];
    for x in finite() {
        hist[bin(x)] += 1;
    }
    let mut cdf = Vec::with_capacity(bins);
    let mut acc = 0usize;
    for h in hist {
        acc += h;
        cdf.push(acc as f64 / n.max(1) as f64);
    }
    let mut out = v.clone();
    for x in out.data_mut() {
        *x = if x.is_finite() { cdf[bin(*x)] } else { 0.0 };
    }
    out
}
