//! Volume, mask, skeleton and report files.

mod dtype;
mod equalize;
pub mod nrrd;
pub mod raw;
mod report;
pub mod swc;
mod tiff_stack;

use std::path::Path;
use std::str::FromStr;

pub use dtype::{Dtype, Endian};
pub use equalize::{hist_equalize, DEFAULT_BINS};
pub use nrrd::{load_nrrd, save_nrrd};
pub use raw::{load_raw, save_raw, sidecar_path};
pub use report::{export_report, import_report, report_to_string};
pub use swc::{export_swc, import_swc, parse_swc, to_swc_string};
pub use tiff_stack::{load_tiff_stack, save_tiff_stack};

use crate::error::{Error, Result};
use crate::volume::{SegMask, Volume3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeFormat {
    TiffStack,
    RawMeta,
    Nrrd,
}

impl VolumeFormat {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "tif" | "tiff" => Some(VolumeFormat::TiffStack),
            "nrrd" | "nhdr" => Some(VolumeFormat::Nrrd),
            "raw" | "bin" => Some(VolumeFormat::RawMeta),
            _ => None,
        }
    }
}

impl FromStr for VolumeFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tiff" | "tif" | "tiff-stack" => Ok(VolumeFormat::TiffStack),
            "raw" | "raw+meta" => Ok(VolumeFormat::RawMeta),
            "nrrd" => Ok(VolumeFormat::Nrrd),
            other => Err(Error::InvalidParameter(format!("unknown volume format `{other}`"))),
        }
    }
}

fn resolve(path: &Path, format: Option<VolumeFormat>) -> Result<VolumeFormat> {
    format
        .or_else(|| VolumeFormat::from_path(path))
        .ok_or_else(|| Error::format(path, "cannot infer volume format from extension"))
}

/// Loads a volume; `None` infers the format from the extension.
pub fn load_volume(path: &Path, format: Option<VolumeFormat>) -> Result<Volume3> {
    match resolve(path, format)? {
        VolumeFormat::TiffStack => load_tiff_stack(path),
        VolumeFormat::RawMeta => load_raw(path),
        VolumeFormat::Nrrd => load_nrrd(path),
    }
}

/// Loads a label volume (0 background, 2 soma, other positive values
/// process) as a mask.
pub fn load_mask(path: &Path, format: Option<VolumeFormat>) -> Result<SegMask> {
    SegMask::from_labels(&load_volume(path, format)?)
}

/// Saves a volume. TIFF stacks are written as 32-bit float, raw and NRRD as
/// 64-bit float.
pub fn save_volume(v: &Volume3, path: &Path, format: Option<VolumeFormat>) -> Result<()> {
    match resolve(path, format)? {
        VolumeFormat::TiffStack => save_tiff_stack(v, path, Dtype::F32),
        VolumeFormat::RawMeta => save_raw(v, path, Dtype::F64, Endian::Little),
        VolumeFormat::Nrrd => save_nrrd(v, path, Dtype::F64),
    }
}

/// Saves a mask as 8-bit labels.
pub fn save_mask(m: &SegMask, path: &Path, format: Option<VolumeFormat>) -> Result<()> {
    let labels = m.to_labels();
    match resolve(path, format)? {
        VolumeFormat::TiffStack => save_tiff_stack(&labels, path, Dtype::U8),
        VolumeFormat::RawMeta => save_raw(&labels, path, Dtype::U8, Endian::Little),
        VolumeFormat::Nrrd => save_nrrd(&labels, path, Dtype::U8),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::VoxelId;

    #[test]
    fn dispatch_by_extension() {
        let dir = tempfile::tempdir().unwrap();
        let v = Volume3::from_fn([3, 4, 5], [0.5, 0.5, 2.0], |p| p.x as f64 * 0.25 - p.z as f64).unwrap();
        for name in ["a.nrrd", "a.raw"] {
            let p = dir.path().join(name);
            save_volume(&v, &p, None).unwrap();
            assert_eq!(load_volume(&p, None).unwrap(), v);
        }
        assert!(load_volume(&dir.path().join("a.xyz"), None).is_err());
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = SegMask::empty([4, 4, 4], [1.0; 3]).unwrap();
        m.set(VoxelId::new(1, 1, 1), true, true);
        m.set(VoxelId::new(2, 1, 1), true, false);
        let p = dir.path().join("m.tif");
        save_mask(&m, &p, None).unwrap();
        assert_eq!(load_mask(&p, None).unwrap(), m);
    }
}
