use crate::error::{Error, Result};
use crate::par;
use crate::volume::{Volume3, VoxelId};

use super::gaussian::{gaussian_smooth, reflect};

/// Per-voxel symmetric Hessians, stored as `[xx, yy, zz, xy, xz, yz]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianField {
    dims: [usize; 3],
    entries: Vec<[f64; 6]>,
}

impl HessianField {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn entries(&self) -> &[[f64; 6]] {
        &self.entries
    }

    pub fn at(&self, v: VoxelId) -> [[f64; 3]; 3] {
        let i = v.x + self.dims[0] * (v.y + self.dims[1] * v.z);
        to_matrix(self.entries[i])
    }
}

pub(crate) fn to_matrix(e: [f64; 6]) -> [[f64; 3]; 3] {
    let [xx, yy, zz, xy, xz, yz] = e;
    [[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]]
}

/// Central second differences at voxel `i` of `f` with reflective borders,
/// each entry divided by the spacing product and multiplied by `scale`.
pub(crate) fn hessian_at(f: &[f64], dims: [usize; 3], spacing: [f64; 3], scale: f64, i: usize) -> [f64; 6] {
    let x = (i % dims[0]) as i64;
    let r = i / dims[0];
    let y = (r % dims[1]) as i64;
    let z = (r / dims[1]) as i64;
    let at = |dx: i64, dy: i64, dz: i64| {
        let xi = reflect(x + dx, dims[0]);
        let yi = reflect(y + dy, dims[1]);
        let zi = reflect(z + dz, dims[2]);
        f[xi + dims[0] * (yi + dims[1] * zi)]
    };
    let c = at(0, 0, 0);
    let xx = at(1, 0, 0) - 2.0 * c + at(-1, 0, 0);
    let yy = at(0, 1, 0) - 2.0 * c + at(0, -1, 0);
    let zz = at(0, 0, 1) - 2.0 * c + at(0, 0, -1);
    let xy = (at(1, 1, 0) - at(1, -1, 0) - at(-1, 1, 0) + at(-1, -1, 0)) / 4.0;
    let xz = (at(1, 0, 1) - at(1, 0, -1) - at(-1, 0, 1) + at(-1, 0, -1)) / 4.0;
    let yz = (at(0, 1, 1) - at(0, 1, -1) - at(0, -1, 1) + at(0, -1, -1)) / 4.0;
    let [sx, sy, sz] = spacing;
    [
        scale * xx / (sx * sx),
        scale * yy / (sy * sy),
        scale * zz / (sz * sz),
        scale * xy / (sx * sy),
        scale * xz / (sx * sz),
        scale * yz / (sy * sz),
    ]
}

pub(crate) fn check_dims(v: &Volume3) -> Result<()> {
    if v.dims().iter().any(|&d| d < 3) {
        return Err(Error::InvalidVolume(format!(
            "Hessian needs at least 3 voxels per axis, got {:?}",
            v.dims()
        )));
    }
    Ok(())
}

/// σ²-normalisation factor; 1 when no smoothing is applied.
pub(crate) fn scale_factor(sigma: f64) -> f64 {
    if sigma > 0.0 {
        sigma * sigma
    } else {
        1.0
    }
}

/// Hessian of the `sigma`-smoothed volume, scale-normalised by `sigma²`.
pub fn hessian_field(v: &Volume3, sigma: f64) -> Result<HessianField> {
    check_dims(v)?;
    let smooth = gaussian_smooth(v, sigma)?;
    let dims = v.dims();
    let spacing = v.spacing();
    let scale = scale_factor(sigma);
    let f = smooth.data();
    let entries = par::map_range(f.len(), |i| hessian_at(f, dims, spacing, scale, i));
    Ok(HessianField { dims, entries })
}
