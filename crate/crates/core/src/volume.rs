//! Dense volumes and segmentation masks.
//!
//! All volumes are stored with x varying fastest:
//! `index = x + nx * (y + ny * z)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer voxel coordinates. Ordering is lexicographic in (x, y, z).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VoxelId {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl VoxelId {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Self { x, y, z }
    }

    pub fn as_array(self) -> [usize; 3] {
        [self.x, self.y, self.z]
    }

    /// Offset by `d`, returning `None` when leaving `dims`.
    pub fn offset(self, d: [i64; 3], dims: [usize; 3]) -> Option<VoxelId> {
        let x = self.x as i64 + d[0];
        let y = self.y as i64 + d[1];
        let z = self.z as i64 + d[2];
        if x < 0 || y < 0 || z < 0 || x >= dims[0] as i64 || y >= dims[1] as i64 || z >= dims[2] as i64 {
            return None;
        }
        Some(VoxelId::new(x as usize, y as usize, z as usize))
    }

    /// True when the two voxels differ by at most one in every index and are distinct.
    pub fn is_neighbor26(self, other: VoxelId) -> bool {
        self != other && self.x.abs_diff(other.x) <= 1 && self.y.abs_diff(other.y) <= 1 && self.z.abs_diff(other.z) <= 1
    }

    /// Euclidean distance in physical units.
    pub fn distance(self, other: VoxelId, spacing: [f64; 3]) -> f64 {
        let dx = (self.x as f64 - other.x as f64) * spacing[0];
        let dy = (self.y as f64 - other.y as f64) * spacing[1];
        let dz = (self.z as f64 - other.z as f64) * spacing[2];
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Euclidean distance in voxel units.
    pub fn voxel_distance(self, other: VoxelId) -> f64 {
        self.distance(other, [1.0; 3])
    }
}

impl fmt::Display for VoxelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Offsets of the 26-neighbourhood in lexicographic order.
pub const OFFSETS_26: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut n = 0;
    let mut dx = -1;
    while dx <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dz = -1;
            while dz <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[n] = [dx, dy, dz];
                    n += 1;
                }
                dz += 1;
            }
            dy += 1;
        }
        dx += 1;
    }
    out
};

/// Euclidean length of a neighbour step with per-axis spacing.
#[inline]
pub fn step_weight(d: [i64; 3], spacing: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for a in 0..3 {
        if d[a] != 0 {
            s += spacing[a] * spacing[a];
        }
    }
    s.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Grid {
    pub dims: [usize; 3],
}

impl Grid {
    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn index(&self, v: VoxelId) -> usize {
        v.x + self.dims[0] * (v.y + self.dims[1] * v.z)
    }

    #[inline]
    pub fn voxel(&self, i: usize) -> VoxelId {
        let x = i % self.dims[0];
        let r = i / self.dims[0];
        VoxelId::new(x, r % self.dims[1], r / self.dims[1])
    }

    #[inline]
    pub fn contains(&self, v: VoxelId) -> bool {
        v.x < self.dims[0] && v.y < self.dims[1] && v.z < self.dims[2]
    }
}

fn check_geometry(dims: [usize; 3], spacing: [f64; 3]) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::InvalidVolume(format!("dims must be positive, got {dims:?}")));
    }
    if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(Error::InvalidVolume(format!(
            "spacing must be finite and positive, got {spacing:?}"
        )));
    }
    Ok(())
}

/// Dense scalar volume with physical voxel spacing (µm).
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3 {
    dims: [usize; 3],
    spacing: [f64; 3],
    data: Vec<f64>,
}

impl Volume3 {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<f64>) -> Result<Self> {
        check_geometry(dims, spacing)?;
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(Error::DimsMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { dims, spacing, data })
    }

    pub fn filled(dims: [usize; 3], spacing: [f64; 3], value: f64) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        Self::new(dims, spacing, vec![value; n])
    }

    /// Builds a volume by evaluating `f` at every voxel.
    pub fn from_fn(dims: [usize; 3], spacing: [f64; 3], f: impl Fn(VoxelId) -> f64) -> Result<Self> {
        let grid = Grid { dims };
        let data = (0..grid.len()).map(|i| f(grid.voxel(i))).collect();
        Self::new(dims, spacing, data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Result<Self> {
        check_geometry(self.dims, spacing)?;
        self.spacing = spacing;
        Ok(self)
    }

    pub(crate) fn grid(&self) -> Grid {
        Grid { dims: self.dims }
    }

    #[inline]
    pub fn index(&self, v: VoxelId) -> usize {
        self.grid().index(v)
    }

    pub fn contains(&self, v: VoxelId) -> bool {
        self.grid().contains(v)
    }

    /// Value at `v`; panics when out of bounds.
    #[inline]
    pub fn at(&self, v: VoxelId) -> f64 {
        self.data[self.index(v)]
    }

    pub fn get(&self, v: VoxelId) -> Option<f64> {
        self.contains(v).then(|| self.at(v))
    }

    pub fn set(&mut self, v: VoxelId, value: f64) {
        let i = self.index(v);
        self.data[i] = value;
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Binary foreground plus a soma sub-mask.
///
/// On disk a mask is a label volume: 0 = background, any positive value =
/// foreground, and exactly 2 = soma.
#[derive(Debug, Clone, PartialEq)]
pub struct SegMask {
    dims: [usize; 3],
    spacing: [f64; 3],
    foreground: Vec<bool>,
    soma: Vec<bool>,
}

pub const SOMA_LABEL: f64 = 2.0;

impl SegMask {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], foreground: Vec<bool>, soma: Vec<bool>) -> Result<Self> {
        check_geometry(dims, spacing)?;
        let expected = dims[0] * dims[1] * dims[2];
        for len in [foreground.len(), soma.len()] {
            if len != expected {
                return Err(Error::DimsMismatch { expected, actual: len });
            }
        }
        if soma.iter().zip(&foreground).any(|(&s, &f)| s && !f) {
            return Err(Error::InvalidVolume("soma voxel outside foreground".into()));
        }
        Ok(Self {
            dims,
            spacing,
            foreground,
            soma,
        })
    }

    pub fn empty(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        Self::new(dims, spacing, vec![false; n], vec![false; n])
    }

    /// Interprets a label volume (see type docs).
    pub fn from_labels(labels: &Volume3) -> Result<Self> {
        let foreground: Vec<bool> = labels.data().iter().map(|&v| v > 0.0).collect();
        let soma: Vec<bool> = labels.data().iter().map(|&v| v == SOMA_LABEL).collect();
        Self::new(labels.dims(), labels.spacing(), foreground, soma)
    }

    pub fn to_labels(&self) -> Volume3 {
        let data = self
            .foreground
            .iter()
            .zip(&self.soma)
            .map(|(&f, &s)| {
                if s {
                    SOMA_LABEL
                } else if f {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Volume3::new(self.dims, self.spacing, data).expect("geometry already validated")
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Result<Self> {
        check_geometry(self.dims, spacing)?;
        self.spacing = spacing;
        Ok(self)
    }

    pub(crate) fn grid(&self) -> Grid {
        Grid { dims: self.dims }
    }

    pub fn len(&self) -> usize {
        self.foreground.len()
    }

    pub fn is_empty(&self) -> bool {
        self.foreground.is_empty()
    }

    pub fn contains(&self, v: VoxelId) -> bool {
        self.grid().contains(v)
    }

    #[inline]
    pub fn is_foreground(&self, v: VoxelId) -> bool {
        self.contains(v) && self.foreground[self.grid().index(v)]
    }

    #[inline]
    pub fn is_soma(&self, v: VoxelId) -> bool {
        self.contains(v) && self.soma[self.grid().index(v)]
    }

    pub fn foreground(&self) -> &[bool] {
        &self.foreground
    }

    pub fn soma(&self) -> &[bool] {
        &self.soma
    }

    /// Marks `v` as foreground (and soma when `soma` is set).
    pub fn set(&mut self, v: VoxelId, foreground: bool, soma: bool) {
        let i = self.grid().index(v);
        self.foreground[i] = foreground || soma;
        self.soma[i] = soma;
    }

    pub fn foreground_count(&self) -> usize {
        self.foreground.iter().filter(|&&f| f).count()
    }

    pub fn soma_count(&self) -> usize {
        self.soma.iter().filter(|&&f| f).count()
    }

    pub fn foreground_voxels(&self) -> impl Iterator<Item = VoxelId> + '_ {
        let grid = self.grid();
        self.foreground
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(move |(i, _)| grid.voxel(i))
    }

    pub fn soma_voxels(&self) -> impl Iterator<Item = VoxelId> + '_ {
        let grid = self.grid();
        self.soma
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(move |(i, _)| grid.voxel(i))
    }
}
