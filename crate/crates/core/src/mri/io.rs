//! Raster file formats.
//!
//! * `CPLX`: magic, version byte (1), u32 H, u32 W, then H·W interleaved
//!   (re, im) f64, all little-endian, row-major.
//! * `MASK`: magic, version byte (1), u32 H, u32 W, u32 accel·100, u64 seed,
//!   then H·W bytes in {0, 1}.
//! * Binary PGM (P5), 16-bit big-endian samples, magnitude scaled so the
//!   peak maps to 65535.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use super::grid::{ComplexImage, KSpaceData};
use super::mask::SamplingMask;
use crate::error::{Error, Result};

pub const CPLX_MAGIC: &[u8; 4] = b"CPLX";
pub const MASK_MAGIC: &[u8; 4] = b"MASK";
const VERSION: u8 = 1;

/// Bounds-checked little-endian reader reporting byte offsets.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn pos(&self) -> usize {
        self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos,
                msg: format!("truncated: need {n} bytes, {} left", self.buf.len() - self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != magic {
            return Err(Error::Format {
                offset: 0,
                msg: format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(magic)
                ),
            });
        }
        Ok(())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format {
                offset: self.pos,
                msg: format!("{} trailing bytes", self.buf.len() - self.pos),
            });
        }
        Ok(())
    }
}

fn version(r: &mut Reader) -> Result<()> {
    let offset = r.pos();
    match r.u8()? {
        VERSION => Ok(()),
        v => Err(Error::Format { offset, msg: format!("unsupported version {v}") }),
    }
}

fn dims(r: &mut Reader) -> Result<(usize, usize)> {
    let offset = r.pos();
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    if h == 0 || w == 0 {
        return Err(Error::Format { offset, msg: format!("empty raster {h}x{w}") });
    }
    Ok((h, w))
}

pub fn encode_cplx(img: &ComplexImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 16 * img.data().len());
    out.extend_from_slice(CPLX_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(img.height() as u32).to_le_bytes());
    out.extend_from_slice(&(img.width() as u32).to_le_bytes());
    for z in img.data() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode_cplx(bytes: &[u8]) -> Result<ComplexImage> {
    let mut r = Reader::new(bytes);
    r.expect_magic(CPLX_MAGIC)?;
    version(&mut r)?;
    let (h, w) = dims(&mut r)?;
    let mut data = Vec::with_capacity(h * w);
    for _ in 0..h * w {
        let re = r.f64()?;
        let im = r.f64()?;
        data.push(Complex64::new(re, im));
    }
    r.finish()?;
    let img = ComplexImage::new(h, w, data)?;
    if !img.is_finite() {
        return Err(Error::Format { offset: 13, msg: "non-finite pixel values".into() });
    }
    Ok(img)
}

pub fn encode_mask(mask: &SamplingMask) -> Vec<u8> {
    let mut out = Vec::with_capacity(25 + mask.data().len());
    out.extend_from_slice(MASK_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(mask.height() as u32).to_le_bytes());
    out.extend_from_slice(&(mask.width() as u32).to_le_bytes());
    let accel = if mask.accel().is_finite() { (mask.accel() * 100.0).round() as u32 } else { u32::MAX };
    out.extend_from_slice(&accel.to_le_bytes());
    out.extend_from_slice(&mask.seed().to_le_bytes());
    out.extend(mask.data().iter().map(|&b| b as u8));
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<SamplingMask> {
    let mut r = Reader::new(bytes);
    r.expect_magic(MASK_MAGIC)?;
    version(&mut r)?;
    let (h, w) = dims(&mut r)?;
    let accel = r.u32()? as f64 / 100.0;
    let seed = r.u64()?;
    let start = r.pos();
    let raw = r.take(h * w)?;
    let mut data = Vec::with_capacity(h * w);
    for (i, &b) in raw.iter().enumerate() {
        match b {
            0 => data.push(false),
            1 => data.push(true),
            v => return Err(Error::Format { offset: start + i, msg: format!("mask byte {v} not in {{0,1}}") }),
        }
    }
    r.finish()?;
    SamplingMask::new(h, w, data, accel, seed)
}

/// 16-bit binary PGM of `|img|`, peak magnitude mapped to 65535.
pub fn encode_pgm(img: &ComplexImage) -> Vec<u8> {
    let mag = img.magnitude();
    let peak = mag.iter().copied().fold(0.0, f64::max);
    let scale = if peak > 0.0 { 65535.0 / peak } else { 0.0 };
    let mut out = format!("P5\n{} {}\n65535\n", img.width(), img.height()).into_bytes();
    for v in mag {
        let s = (v * scale).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

/// Read a file, mapping failures (and any format error) to the path.
fn read_with<T>(path: &Path, decode: impl FnOnce(&[u8]) -> Result<T>) -> Result<T> {
    let bytes = fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    decode(&bytes).map_err(|e| Error::File { path: path.to_path_buf(), msg: e.to_string() })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn read_cplx(path: impl AsRef<Path>) -> Result<ComplexImage> {
    read_with(path.as_ref(), decode_cplx)
}

pub fn write_cplx(path: impl AsRef<Path>, img: &ComplexImage) -> Result<()> {
    write_bytes(path.as_ref(), &encode_cplx(img))
}

/// k-space grids share the `CPLX` layout.
pub fn read_kspace(path: impl AsRef<Path>) -> Result<KSpaceData> {
    let img = read_cplx(path)?;
    let (h, w) = img.dims();
    KSpaceData::new(h, w, img.into_data())
}

pub fn write_kspace(path: impl AsRef<Path>, k: &KSpaceData) -> Result<()> {
    let img = ComplexImage::new(k.height(), k.width(), k.data().to_vec())?;
    write_cplx(path, &img)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<SamplingMask> {
    read_with(path.as_ref(), decode_mask)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &SamplingMask) -> Result<()> {
    write_bytes(path.as_ref(), &encode_mask(mask))
}

pub fn write_pgm(path: impl AsRef<Path>, img: &ComplexImage) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pgm(img))
}
