use crate::error::{Error, Result};
use crate::par;
use crate::volume::Volume3;

/// Maps an out-of-range index back inside `[0, n)` by half-sample
/// symmetric reflection (`d c b a | a b c d | d c b a`).
#[inline]
pub(crate) fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let mut r = i.rem_euclid(period);
    if r >= n {
        r = period - 1 - r;
    }
    r as usize
}

/// Normalised sampled Gaussian truncated at `4 sigma`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|x| *x /= sum);
    k
}

fn convolve_axis(src: &[f64], dims: [usize; 3], axis: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as i64;
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let n_axis = dims[axis];
    let mut out = vec![0.0; src.len()];
    let line = dims[0];
    par::for_each_chunk_mut(&mut out, line, |row, chunk| {
        let y = row % dims[1];
        let z = row / dims[1];
        for (x, o) in chunk.iter_mut().enumerate() {
            let pos = [x, y, z][axis] as i64;
            let base = x + dims[0] * (y + dims[1] * z) - pos as usize * stride;
            let mut acc = 0.0;
            for (k, &w) in kernel.iter().enumerate() {
                let j = reflect(pos + k as i64 - radius, n_axis);
                acc += w * src[base + j * stride];
            }
            *o = acc;
        }
    });
    out
}

/// Separable Gaussian smoothing (`sigma` in voxels) with reflective borders.
/// `sigma = 0` returns the input unchanged.
pub fn gaussian_smooth(v: &Volume3, sigma: f64) -> Result<Volume3> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(v.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let dims = v.dims();
    let mut data = v.data().to_vec();
    for axis in 0..3 {
        if dims[axis] > 1 {
            data = convolve_axis(&data, dims, axis, &kernel);
        }
    }
    Volume3::new(dims, v.spacing(), data)
}
