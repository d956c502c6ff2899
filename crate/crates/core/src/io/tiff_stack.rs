//! Multi-page grayscale TIFF stacks; one page per z slice.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use tiff::decoder::{Decoder, DecodingResult};
use tiff::encoder::{colortype, TiffEncoder};
use tiff::ColorType;

use super::dtype::Dtype;
use crate::error::{Error, Result};
use crate::volume::Volume3;

fn page_values(r: DecodingResult) -> Vec<f64> {
    match r {
        DecodingResult::U8(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::U16(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::U32(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::U64(v) => v.into_iter().map(|x| x as f64).collect(),
        DecodingResult::F16(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::F32(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::F64(v) => v,
        DecodingResult::I8(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::I16(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::I32(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::I64(v) => v.into_iter().map(|x| x as f64).collect(),
    }
}

/// Reads every page; spacing is set to 1 µm (TIFF carries no z spacing).
pub fn load_tiff_stack(path: &Path) -> Result<Volume3> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let tiff_err = |e: tiff::TiffError| Error::format(path, e.to_string());
    let mut dec = Decoder::new(BufReader::new(file)).map_err(tiff_err)?;
    let mut data = Vec::new();
    let mut size = None;
    let mut pages = 0usize;
    loop {
        match dec.colortype().map_err(tiff_err)? {
            ColorType::Gray(_) => {}
            other => return Err(Error::format(path, format!("page {pages}: {other:?} is not grayscale"))),
        }
        let (w, h) = dec.dimensions().map_err(tiff_err)?;
        match size {
            None => size = Some((w, h)),
            Some(s) if s != (w, h) => {
                return Err(Error::format(
                    path,
                    format!("page {pages} is {w}x{h}, expected {}x{}", s.0, s.1),
                ));
            }
            Some(_) => {}
        }
        let values = page_values(dec.read_image().map_err(tiff_err)?);
        if values.len() != (w as usize) * (h as usize) {
            return Err(Error::DimsMismatch {
                expected: (w as usize) * (h as usize),
                actual: values.len(),
            });
        }
        data.extend(values);
        pages += 1;
        if !dec.more_images() {
            break;
        }
        dec.next_image().map_err(tiff_err)?;
    }
    let (w, h) = size.unwrap_or((0, 0));
    Volume3::new([w as usize, h as usize, pages], [1.0; 3], data)
}

/// Writes one page per z slice as 8-bit, 16-bit or 32-bit float gray.
pub fn save_tiff_stack(v: &Volume3, path: &Path, dtype: Dtype) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let tiff_err = |e: tiff::TiffError| Error::format(path, e.to_string());
    let mut enc = TiffEncoder::new(BufWriter::new(file)).map_err(tiff_err)?;
    let [nx, ny, nz] = v.dims();
    let (w, h) = (nx as u32, ny as u32);
    for page in v.data().chunks(nx * ny).take(nz) {
        match dtype {
            Dtype::U8 => {
                let p: Vec<u8> = page.iter().map(|x| x.round() as u8).collect();
                enc.write_image::<colortype::Gray8>(w, h, &p)
            }
            Dtype::U16 => {
                let p: Vec<u16> = page.iter().map(|x| x.round() as u16).collect();
                enc.write_image::<colortype::Gray16>(w, h, &p)
            }
            Dtype::F32 => {
                let p: Vec<f32> = page.iter().map(|&x| x as f32).collect();
                enc.write_image::<colortype::Gray32Float>(w, h, &p)
            }
            other => return Err(Error::UnsupportedDtype(format!("{other} TIFF output"))),
        }
        .map_err(tiff_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_pages() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.tif");
        let v = Volume3::from_fn([4, 4, 5], [1.0; 3], |q| (q.x + 4 * q.y + 16 * q.z) as f64).unwrap();
        save_tiff_stack(&v, &p, Dtype::U8).unwrap();
        let r = load_tiff_stack(&p).unwrap();
        assert_eq!(r.dims(), [4, 4, 5]);
        assert_eq!(r, v);
    }

    #[test]
    fn sixteen_bit_and_float() {
        let dir = tempfile::tempdir().unwrap();
        let v = Volume3::from_fn([3, 2, 2], [1.0; 3], |q| (q.x * 1000 + q.z) as f64).unwrap();
        let p = dir.path().join("a.tif");
        save_tiff_stack(&v, &p, Dtype::U16).unwrap();
        assert_eq!(load_tiff_stack(&p).unwrap(), v);
        let p = dir.path().join("b.tif");
        save_tiff_stack(&v, &p, Dtype::F32).unwrap();
        assert_eq!(load_tiff_stack(&p).unwrap(), v);
    }

    #[test]
    fn not_a_tiff() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.tif");
        std::fs::write(&p, b"hello").unwrap();
        assert!(matches!(load_tiff_stack(&p), Err(Error::Format { .. })));
    }
}
