//! NRRD reader (raw/ascii encodings, attached or detached data) and a
//! minimal raw-encoded writer.

use std::fs;
use std::path::{Path, PathBuf};

use super::dtype::{decode, encode, Dtype, Endian};
use crate::error::{Error, Result};
use crate::volume::Volume3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Raw,
    Ascii,
}

struct Header {
    dims: [usize; 3],
    spacing: [f64; 3],
    dtype: Dtype,
    endian: Endian,
    encoding: Encoding,
    data_file: Option<PathBuf>,
    byte_skip: i64,
}

fn parse_directions(s: &str, origin: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        if let Some(r) = rest.strip_prefix("none") {
            out.push(1.0);
            rest = r.trim_start();
            continue;
        }
        let open = rest
            .strip_prefix('(')
            .ok_or_else(|| Error::format(origin, format!("bad space directions `{s}`")))?;
        let close = open
            .find(')')
            .ok_or_else(|| Error::format(origin, format!("bad space directions `{s}`")))?;
        let comps: Vec<f64> = open[..close]
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(origin, format!("bad space directions `{s}`")))?;
        out.push(comps.iter().map(|c| c * c).sum::<f64>().sqrt());
        rest = open[close + 1..].trim_start();
    }
    Ok(out)
}

fn parse_header(text: &str, origin: &Path) -> Result<Header> {
    let mut lines = text.lines();
    let magic = lines.next().unwrap_or("");
    if !magic.starts_with("NRRD") {
        return Err(Error::format(origin, "missing NRRD magic"));
    }
    let mut dimension = None;
    let mut sizes: Option<Vec<usize>> = None;
    let mut spacings: Option<Vec<f64>> = None;
    let mut dtype = None;
    let mut endian = None;
    let mut encoding = Encoding::Raw;
    let mut data_file = None;
    let mut byte_skip = 0i64;
    for line in lines {
        if line.is_empty() {
            break;
        }
        if line.starts_with('#') || line.contains(":=") {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| Error::format(origin, format!("malformed field `{line}`")))?;
        let value = value.trim();
        let nums = |v: &str| -> Result<Vec<f64>> {
            v.split_whitespace()
                .map(|t| {
                    if t.eq_ignore_ascii_case("nan") {
                        Ok(1.0)
                    } else {
                        t.parse::<f64>()
                            .map_err(|_| Error::format(origin, format!("bad number `{t}`")))
                    }
                })
                .collect()
        };
        match key.trim().to_ascii_lowercase().as_str() {
            "type" => dtype = Some(value.parse::<Dtype>()?),
            "dimension" => {
                dimension = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| Error::format(origin, format!("bad dimension `{value}`")))?,
                )
            }
            "sizes" => sizes = Some(nums(value)?.into_iter().map(|x| x as usize).collect()),
            "spacings" => spacings = Some(nums(value)?),
            "space directions" => spacings = Some(parse_directions(value, origin)?),
            "endian" => endian = Some(value.parse::<Endian>()?),
            "encoding" => {
                encoding = match value.to_ascii_lowercase().as_str() {
                    "raw" => Encoding::Raw,
                    "ascii" | "text" | "txt" => Encoding::Ascii,
                    other => return Err(Error::format(origin, format!("unsupported encoding `{other}`"))),
                }
            }
            "data file" | "datafile" => {
                if value.starts_with("LIST") || value.contains('%') {
                    return Err(Error::format(origin, "multi-file data is not supported"));
                }
                data_file = Some(PathBuf::from(value));
            }
            "byte skip" | "byteskip" => {
                byte_skip = value
                    .parse()
                    .map_err(|_| Error::format(origin, format!("bad byte skip `{value}`")))?
            }
            _ => {}
        }
    }
    let dtype = dtype.ok_or_else(|| Error::format(origin, "missing `type`"))?;
    let sizes = sizes.ok_or_else(|| Error::format(origin, "missing `sizes`"))?;
    let dim = dimension.unwrap_or(sizes.len());
    if dim != sizes.len() || !(1..=3).contains(&dim) {
        return Err(Error::format(origin, format!("unsupported dimension {dim}")));
    }
    let mut dims = [1usize; 3];
    dims[..dim].copy_from_slice(&sizes);
    let mut spacing = [1.0f64; 3];
    if let Some(s) = spacings {
        if s.len() != dim {
            return Err(Error::format(origin, "spacing count does not match dimension"));
        }
        spacing[..dim].copy_from_slice(&s);
    }
    let endian = match endian {
        Some(e) => e,
        None if dtype.size() == 1 || encoding == Encoding::Ascii => Endian::Little,
        None => return Err(Error::format(origin, "missing `endian`")),
    };
    Ok(Header {
        dims,
        spacing,
        dtype,
        endian,
        encoding,
        data_file,
        byte_skip,
    })
}

pub fn load_nrrd(path: &Path) -> Result<Volume3> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header_end = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .map(|p| p + 2)
        .unwrap_or(bytes.len());
    let text = String::from_utf8_lossy(&bytes[..header_end]);
    let h = parse_header(&text, path)?;
    let payload: Vec<u8> = match &h.data_file {
        Some(f) => {
            let p = if f.is_absolute() {
                f.clone()
            } else {
                path.parent().unwrap_or(Path::new(".")).join(f)
            };
            fs::read(&p).map_err(|e| Error::io(&p, e))?
        }
        None => bytes[header_end..].to_vec(),
    };
    let n: usize = h.dims.iter().product();
    let data = match h.encoding {
        Encoding::Raw => {
            let need = n * h.dtype.size();
            let start = if h.byte_skip < 0 {
                payload.len().saturating_sub(need)
            } else {
                h.byte_skip as usize
            };
            let body = payload.get(start..).unwrap_or(&[]);
            if body.len() != need {
                return Err(Error::DimsMismatch {
                    expected: need,
                    actual: body.len(),
                });
            }
            decode(body, h.dtype, h.endian)
        }
        Encoding::Ascii => {
            let text = String::from_utf8_lossy(&payload);
            let vals: Vec<f64> = text
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::format(path, format!("bad sample `{t}`")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != n {
                return Err(Error::DimsMismatch {
                    expected: n,
                    actual: vals.len(),
                });
            }
            vals
        }
    };
    Volume3::new(h.dims, h.spacing, data)
}

/// Writes a single-file raw-encoded NRRD.
pub fn save_nrrd(v: &Volume3, path: &Path, dtype: Dtype) -> Result<()> {
    let [nx, ny, nz] = v.dims();
    let [sx, sy, sz] = v.spacing();
    let mut out = format!(
        "NRRD0004\ntype: {}\ndimension: 3\nsizes: {nx} {ny} {nz}\nspacings: {sx} {sy} {sz}\nendian: little\nencoding: raw\n\n",
        dtype.nrrd_name()
    )
    .into_bytes();
    out.extend(encode(v.data(), dtype, Endian::Little));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
