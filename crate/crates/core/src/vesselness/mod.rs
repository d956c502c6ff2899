//! Multiscale Hessian tubularity and the penalised objective map used for
//! skeleton morphing.

mod eigen;
mod gaussian;
mod hessian;

pub use eigen::{eigen_sym3, HessianEigen};
pub use gaussian::{gaussian_kernel, gaussian_smooth};
pub use hessian::{hessian_field, HessianField};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::volume::Volume3;

/// Default scale set, in voxels.
pub const DEFAULT_SCALES: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

/// Which tubes count as vessels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Bright tubes on a dark background (fluorescence).
    #[default]
    Bright,
    Dark,
}

impl std::str::FromStr for Polarity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bright" => Ok(Polarity::Bright),
            "dark" => Ok(Polarity::Dark),
            other => Err(Error::InvalidParameter(format!("unknown polarity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrangiParams {
    /// Plate-vs-line sensitivity (R_A term).
    pub alpha: f64,
    /// Blob-vs-line sensitivity (R_B term).
    pub beta: f64,
    /// Structureness threshold; `None` uses half the largest `S` at each scale.
    pub c: Option<f64>,
    pub polarity: Polarity,
}

impl Default for FrangiParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            c: None,
            polarity: Polarity::Bright,
        }
    }
}

/// Vesselness from magnitude-sorted eigenvalues.
pub fn frangi_measure(l: [f64; 3], alpha: f64, beta: f64, c: f64, polarity: Polarity) -> f64 {
    let [l1, l2, l3] = l;
    let wrong_sign = match polarity {
        Polarity::Bright => l2 > 0.0 || l3 > 0.0,
        Polarity::Dark => l2 < 0.0 || l3 < 0.0,
    };
    if wrong_sign || l2 == 0.0 || l3 == 0.0 || c <= 0.0 {
        return 0.0;
    }
    let ra = l2.abs() / l3.abs();
    let rb = l1.abs() / (l2.abs() * l3.abs()).sqrt();
    let s2 = l1 * l1 + l2 * l2 + l3 * l3;
    (1.0 - (-ra * ra / (2.0 * alpha * alpha)).exp())
        * (-rb * rb / (2.0 * beta * beta)).exp()
        * (1.0 - (-s2 / (2.0 * c * c)).exp())
}

/// Multiscale vesselness with default parameters.
pub fn vesselness_response(v: &Volume3, sigmas: &[f64]) -> Result<Volume3> {
    vesselness_with(v, sigmas, &FrangiParams::default())
}

/// Maximum over `sigmas` of the single-scale vesselness measure.
pub fn vesselness_with(v: &Volume3, sigmas: &[f64], params: &FrangiParams) -> Result<Volume3> {
    if sigmas.is_empty() {
        return Err(Error::InvalidParameter("at least one scale is required".into()));
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidParameter(format!("scales must be positive, got {s}")));
    }
    hessian::check_dims(v)?;
    let dims = v.dims();
    let spacing = v.spacing();
    let mut best = vec![0.0f64; v.len()];
    for &sigma in sigmas {
        let smooth = gaussian_smooth(v, sigma)?;
        let f = smooth.data();
        let scale = hessian::scale_factor(sigma);
        let eig: Vec<[f64; 3]> = par::map_range(f.len(), |i| {
            let h = hessian::hessian_at(f, dims, spacing, scale, i);
            eigen::eigenvalues_sym3(&hessian::to_matrix(h))
        });
        let c = params.c.unwrap_or_else(|| {
            0.5 * eig
                .iter()
                .map(|l| (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt())
                .fold(0.0, f64::max)
        });
        let resp = par::map_slice(&eig, |l| {
            frangi_measure(*l, params.alpha, params.beta, c, params.polarity)
        });
        for (b, r) in best.iter_mut().zip(resp) {
            if r > *b {
                *b = r;
            }
        }
    }
    Volume3::new(dims, spacing, best)
}

/// Penalised objective map: positive responses kept, everything else set to
/// `-x_avg`.
#[derive(Debug, Clone, PartialEq)]
pub struct VesselMap {
    pub volume: Volume3,
    pub x_avg: f64,
}

impl VesselMap {
    pub fn max_value(&self) -> f64 {
        self.volume.min_max().1
    }
}

/// Source of the penalty magnitude `x_avg`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum Penalty {
    /// Mean of the strictly positive responses.
    #[default]
    PositiveMean,
    /// An explicit value, e.g. the mean intensity of the raw frame.
    Fixed(f64),
}

/// Applies the penalty transform with `x_avg` = mean positive response.
pub fn iv_transform(resp: &Volume3) -> Result<VesselMap> {
    iv_transform_with(resp, Penalty::PositiveMean)
}

pub fn iv_transform_with(resp: &Volume3, penalty: Penalty) -> Result<VesselMap> {
    let (sum, n) = resp
        .data()
        .iter()
        .filter(|&&x| x > 0.0)
        .fold((0.0, 0usize), |(s, n), &x| (s + x, n + 1));
    if n == 0 {
        return Err(Error::NoPositiveResponse);
    }
    let x_avg = match penalty {
        Penalty::PositiveMean => sum / n as f64,
        Penalty::Fixed(x) if x > 0.0 && x.is_finite() => x,
        Penalty::Fixed(x) => {
            return Err(Error::InvalidParameter(format!("penalty must be positive, got {x}")));
        }
    };
    let data = resp.data().iter().map(|&x| if x > 0.0 { x } else { -x_avg }).collect();
    Ok(VesselMap {
        volume: Volume3::new(resp.dims(), resp.spacing(), data)?,
        x_avg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::VoxelId;

    fn cylinder(dims: [usize; 3], radius: f64, axis: usize) -> Volume3 {
        let c = [dims[0] as f64 / 2.0, dims[1] as f64 / 2.0, dims[2] as f64 / 2.0];
        Volume3::from_fn(dims, [1.0; 3], |p| {
            let a = p.as_array();
            let r2: f64 = (0..3)
                .filter(|&k| k != axis)
                .map(|k| (a[k] as f64 - c[k].floor()).powi(2))
                .sum();
            if r2 <= radius * radius {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn uniform_volume_has_no_response() {
        let v = Volume3::filled([8, 8, 8], [1.0; 3], 5.0).unwrap();
        let r = vesselness_response(&v, &[1.0, 2.0]).unwrap();
        assert!(r.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_bad_scales() {
        let v = Volume3::filled([8, 8, 8], [1.0; 3], 0.0).unwrap();
        assert!(vesselness_response(&v, &[]).is_err());
        assert!(vesselness_response(&v, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn cylinder_axis_beats_off_axis() {
        let dims = [24, 25, 25];
        let v = cylinder(dims, 3.0, 0);
        let r = vesselness_response(&v, &[2.0, 3.0, 4.0]).unwrap();
        for x in 4..20 {
            let on = r.at(VoxelId::new(x, 12, 12));
            let off = r.at(VoxelId::new(x, 15, 12));
            assert!(on > off, "x = {x}: {on} <= {off}");
        }
    }

    #[test]
    fn cylinder_beats_plate() {
        let dims = [24, 25, 25];
        let cyl = cylinder(dims, 3.0, 0);
        let plate = Volume3::from_fn(dims, [1.0; 3], |p| if p.y.abs_diff(12) <= 3 { 1.0 } else { 0.0 }).unwrap();
        let rc = vesselness_response(&cyl, &[2.0, 3.0, 4.0]).unwrap();
        let rp = vesselness_response(&plate, &[2.0, 3.0, 4.0]).unwrap();
        let mid = VoxelId::new(12, 12, 12);
        assert!(rc.at(mid) > rp.at(mid));
    }

    #[test]
    fn dark_polarity_inverts() {
        let dims = [20, 21, 21];
        let v = cylinder(dims, 2.0, 0);
        let inv = Volume3::new(dims, [1.0; 3], v.data().iter().map(|x| 1.0 - x).collect()).unwrap();
        let params = FrangiParams {
            polarity: Polarity::Dark,
            ..FrangiParams::default()
        };
        let a = vesselness_response(&v, &[2.0]).unwrap();
        let b = vesselness_with(&inv, &[2.0], &params).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn penalty_transform() {
        let resp = Volume3::new([4, 1, 1], [1.0; 3], vec![5.0, 0.0, 1.0, -3.0]).unwrap();
        let m = iv_transform(&resp).unwrap();
        assert_eq!(m.x_avg, 3.0);
        assert_eq!(m.volume.data(), &[5.0, -3.0, 1.0, -3.0]);

        let two = Volume3::new([2, 1, 1], [1.0; 3], vec![5.0, 0.0]).unwrap();
        let m = iv_transform_with(&two, Penalty::Fixed(2.0)).unwrap();
        assert_eq!(m.volume.data(), &[5.0, -2.0]);
    }

    #[test]
    fn all_positive_is_unchanged() {
        let resp = Volume3::new([3, 1, 1], [1.0; 3], vec![0.5, 1.0, 2.0]).unwrap();
        let m = iv_transform(&resp).unwrap();
        assert_eq!(m.volume, resp);
        assert!((m.x_avg - 3.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn all_nonpositive_is_an_error() {
        let resp = Volume3::new([2, 1, 1], [1.0; 3], vec![0.0, -1.0]).unwrap();
        assert!(matches!(iv_transform(&resp), Err(Error::NoPositiveResponse)));
    }
}
