use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Sample types accepted for raw payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    U8,
    U16,
    I16,
    U32,
    I32,
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Endian {
    #[default]
    Little,
    Big,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 | Dtype::I16 => 2,
            Dtype::U32 | Dtype::I32 | Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, Dtype::F32 | Dtype::F64)
    }

    /// Name used in sidecar headers.
    pub fn name(self) -> &'static str {
        match self {
            Dtype::U8 => "uint8",
            Dtype::U16 => "uint16",
            Dtype::I16 => "int16",
            Dtype::U32 => "uint32",
            Dtype::I32 => "int32",
            Dtype::F32 => "float32",
            Dtype::F64 => "float64",
        }
    }

    /// Name used in NRRD headers.
    pub fn nrrd_name(self) -> &'static str {
        match self {
            Dtype::U8 => "uint8",
            Dtype::U16 => "uint16",
            Dtype::I16 => "int16",
            Dtype::U32 => "uint32",
            Dtype::I32 => "int32",
            Dtype::F32 => "float",
            Dtype::F64 => "double",
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dtype {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        Ok(match t.as_str() {
            "uint8" | "uchar" | "unsigned char" | "uint8_t" | "u8" => Dtype::U8,
            "uint16" | "ushort" | "unsigned short" | "unsigned short int" | "uint16_t" | "u16" => Dtype::U16,
            "int16" | "short" | "short int" | "signed short" | "signed short int" | "int16_t" | "i16" => Dtype::I16,
            "uint32" | "uint" | "unsigned int" | "uint32_t" | "u32" => Dtype::U32,
            "int32" | "int" | "signed int" | "int32_t" | "i32" => Dtype::I32,
            "float32" | "float" | "f32" => Dtype::F32,
            "float64" | "double" | "f64" => Dtype::F64,
            _ => return Err(Error::UnsupportedDtype(s.trim().to_string())),
        })
    }
}

impl FromStr for Endian {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "little" | "le" => Ok(Endian::Little),
            "big" | "be" => Ok(Endian::Big),
            other => Err(Error::InvalidParameter(format!("unknown endianness `{other}`"))),
        }
    }
}

impl fmt::Display for Endian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Endian::Little => "little",
            Endian::Big => "big",
        })
    }
}

macro_rules! take {
    ($t:ty, $chunk:expr, $endian:expr) => {{
        let b = $chunk.try_into().unwrap();
        (match $endian {
            Endian::Little => <$t>::from_le_bytes(b),
            Endian::Big => <$t>::from_be_bytes(b),
        }) as f64
    }};
}

macro_rules! put {
    ($v:expr, $endian:expr, $out:expr) => {{
        match $endian {
            Endian::Little => $out.extend_from_slice(&$v.to_le_bytes()),
            Endian::Big => $out.extend_from_slice(&$v.to_be_bytes()),
        }
    }};
}

/// Decodes `n` samples; the caller has checked `bytes.len() == n * size`.
pub fn decode(bytes: &[u8], dtype: Dtype, endian: Endian) -> Vec<f64> {
    bytes
        .chunks_exact(dtype.size())
        .map(|c| match dtype {
            Dtype::U8 => c[0] as f64,
            Dtype::U16 => take!(u16, c, endian),
            Dtype::I16 => take!(i16, c, endian),
            Dtype::U32 => take!(u32, c, endian),
            Dtype::I32 => take!(i32, c, endian),
            Dtype::F32 => take!(f32, c, endian),
            Dtype::F64 => take!(f64, c, endian),
        })
        .collect()
}

/// Encodes samples; integer types round to nearest and saturate.
pub fn encode(data: &[f64], dtype: Dtype, endian: Endian) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * dtype.size());
    for &x in data {
        match dtype {
            Dtype::U8 => out.push(x.round() as u8),
            Dtype::U16 => put!(x.round() as u16, endian, out),
            Dtype::I16 => put!(x.round() as i16, endian, out),
            Dtype::U32 => put!(x.round() as u32, endian, out),
            Dtype::I32 => put!(x.round() as i32, endian, out),
            Dtype::F32 => put!(x as f32, endian, out),
            Dtype::F64 => put!(x, endian, out),
        }
    }
    out
}
