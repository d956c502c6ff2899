//! Headerless binary volumes with a plain-text sidecar (`<file>.meta`):
//!
//! ```text
//! dims: 64 64 32
//! spacing: 0.2 0.2 1.0
//! dtype: uint16
//! endian: little
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use super::dtype::{decode, encode, Dtype, Endian};
use crate::error::{Error, Result};
use crate::volume::Volume3;

#[derive(Debug, Clone, PartialEq)]
pub struct RawHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub dtype: Dtype,
    pub endian: Endian,
}

impl RawHeader {
    pub fn to_text(&self) -> String {
        let [nx, ny, nz] = self.dims;
        let [sx, sy, sz] = self.spacing;
        format!(
            "dims: {nx} {ny} {nz}\nspacing: {sx} {sy} {sz}\ndtype: {}\nendian: {}\n",
            self.dtype, self.endian
        )
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut dims = None;
        let mut spacing = None;
        let mut dtype = None;
        let mut endian = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .or_else(|| line.split_once('='))
                .ok_or_else(|| Error::format(origin, format!("malformed line `{line}`")))?;
            let value = value.trim();
            match key.trim().to_ascii_lowercase().as_str() {
                "dims" | "sizes" => dims = Some(triple::<usize>(value, origin)?),
                "spacing" | "spacings" => spacing = Some(triple::<f64>(value, origin)?),
                "dtype" | "type" => dtype = Some(value.parse::<Dtype>()?),
                "endian" | "endianness" => endian = Some(value.parse::<Endian>()?),
                other => log::debug!("{}: ignoring key `{other}`", origin.display()),
            }
        }
        let missing = |k: &str| Error::format(origin, format!("missing `{k}`"));
        let dtype = dtype.ok_or_else(|| missing("dtype"))?;
        let endian = match endian {
            Some(e) => e,
            None if dtype.size() == 1 => Endian::Little,
            None => return Err(missing("endian")),
        };
        Ok(Self {
            dims: dims.ok_or_else(|| missing("dims"))?,
            spacing: spacing.ok_or_else(|| missing("spacing"))?,
            dtype,
            endian,
        })
    }
}

pub(crate) fn triple<T: std::str::FromStr>(s: &str, origin: &Path) -> Result<[T; 3]> {
    let parts: Vec<&str> = s
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|p| !p.is_empty())
        .collect();
    if parts.len() != 3 {
        return Err(Error::format(origin, format!("expected three values, got `{s}`")));
    }
    let parse = |p: &str| {
        p.parse::<T>()
            .map_err(|_| Error::format(origin, format!("bad number `{p}`")))
    };
    Ok([parse(parts[0])?, parse(parts[1])?, parse(parts[2])?])
}

/// Sidecar location for a raw payload.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn load_raw(path: &Path) -> Result<Volume3> {
    let meta = sidecar_path(path);
    let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
    let h = RawHeader::parse(&text, &meta)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let n: usize = h.dims.iter().product();
    if bytes.len() != n * h.dtype.size() {
        return Err(Error::DimsMismatch {
            expected: n * h.dtype.size(),
            actual: bytes.len(),
        });
    }
    Volume3::new(h.dims, h.spacing, decode(&bytes, h.dtype, h.endian))
}

pub fn save_raw(v: &Volume3, path: &Path, dtype: Dtype, endian: Endian) -> Result<()> {
    let h = RawHeader {
        dims: v.dims(),
        spacing: v.spacing(),
        dtype,
        endian,
    };
    fs::write(path, encode(v.data(), dtype, endian)).map_err(|e| Error::io(path, e))?;
    let meta = sidecar_path(path);
    fs::write(&meta, h.to_text()).map_err(|e| Error::io(&meta, e))
}
