//! Little-endian binary files for images (`BRTI`) and measurement sets
//! (`BRTM`), plus 8-bit PGM export for viewing.
//!
//! Image layout: magic, `u16` version, `u8` kind, `u32` rows, `u32` columns,
//! `f64` row spacing, `f64` column spacing, then rows x columns `f64` values
//! in row-major order (row 0 is the bottom of the image).

use std::fs;
use std::path::Path;

use brt_core::{
    Direction, Image, ImageGrid, ImageKind, MeasurementSet, SourceDetectorPair, SourceModel,
};

use crate::error::CliError;

pub const IMAGE_MAGIC: &[u8; 4] = b"BRTI";
pub const MEASUREMENT_MAGIC: &[u8; 4] = b"BRTM";
pub const FORMAT_VERSION: u16 = 1;

fn kind_code(kind: ImageKind) -> u8 {
    match kind {
        ImageKind::Attenuation => 0,
        ImageKind::Scatter => 1,
        ImageKind::Data => 2,
    }
}

fn kind_from_code(code: u8) -> Option<ImageKind> {
    match code {
        0 => Some(ImageKind::Attenuation),
        1 => Some(ImageKind::Scatter),
        2 => Some(ImageKind::Data),
        _ => None,
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Reader { buf, pos: 0, what }
    }

    fn fail(&self, msg: impl Into<String>) -> CliError {
        CliError::Format {
            what: self.what,
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        if self.buf.len() - self.pos < n {
            return Err(self.fail(format!(
                "truncated at byte {} (needed {n} more bytes)",
                self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CliError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn finite_values(&mut self, n: usize, label: &str) -> Result<Vec<f64>, CliError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| self.fail("size overflow"))?)?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(self.fail(format!("{label}: non-finite value at index {k}")));
        }
        Ok(values)
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<(), CliError> {
        if self.take(4).map_err(|_| self.fail("missing magic"))? != magic {
            return Err(self.fail(format!(
                "bad magic (expected {:?})",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u16()?;
        if version != FORMAT_VERSION {
            return Err(self.fail(format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn grid(&mut self) -> Result<ImageGrid, CliError> {
        let l2 = self.u32()? as usize;
        let l1 = self.u32()? as usize;
        let delta2 = self.f64()?;
        let delta1 = self.f64()?;
        ImageGrid::new(l1, l2, delta1, delta2).map_err(|e| self.fail(e.to_string()))
    }

    fn finish(&self) -> Result<(), CliError> {
        if self.pos != self.buf.len() {
            return Err(self.fail(format!(
                "{} trailing bytes after the payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn put_grid(out: &mut Vec<u8>, grid: &ImageGrid) {
    out.extend_from_slice(&(grid.l2 as u32).to_le_bytes());
    out.extend_from_slice(&(grid.l1 as u32).to_le_bytes());
    out.extend_from_slice(&grid.delta2.to_le_bytes());
    out.extend_from_slice(&grid.delta1.to_le_bytes());
}

fn put_values(out: &mut Vec<u8>, values: &[f64]) {
    out.reserve(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_image(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(35 + img.values.len() * 8);
    out.extend_from_slice(IMAGE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(kind_code(img.kind));
    put_grid(&mut out, &img.grid);
    put_values(&mut out, &img.values);
    out
}

/// Parses and validates an image; attenuation must be nonnegative and scatter
/// must lie in `[0, 1]`.
pub fn decode_image(bytes: &[u8]) -> Result<Image, CliError> {
    let mut r = Reader::new(bytes, "image");
    r.header(IMAGE_MAGIC)?;
    let code = r.u8()?;
    let kind = kind_from_code(code).ok_or_else(|| r.fail(format!("invalid image kind {code}")))?;
    let grid = r.grid()?;
    let values = r.finite_values(grid.len(), "payload")?;
    r.finish()?;
    Ok(Image::new(grid, values, kind)?)
}

pub fn write_image(path: &Path, img: &Image) -> Result<(), CliError> {
    fs::write(path, encode_image(img)).map_err(|e| CliError::io(path, e))
}

pub fn read_image(path: &Path) -> Result<Image, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_image(&bytes)
}

/// Reads an image and checks its kind and grid.
pub fn read_image_expecting(
    path: &Path,
    kind: ImageKind,
    grid: &ImageGrid,
) -> Result<Image, CliError> {
    let img = read_image(path)?;
    if img.kind != kind {
        return Err(CliError::Data(format!(
            "{}: expected a {kind:?} image, found {:?}",
            path.display(),
            img.kind
        )));
    }
    if img.grid != *grid {
        return Err(CliError::Data(format!(
            "{}: image grid {} does not match the configured grid {}",
            path.display(),
            img.grid.describe(),
            grid.describe()
        )));
    }
    Ok(img)
}

/// Layout after the header: grid, `u32` pair count, then per pair the four
/// direction components and a transmission flag, then `I0`, then per pair the
/// background and the counts.
pub fn encode_measurements(ms: &MeasurementSet) -> Vec<u8> {
    let n = ms.grid.len();
    let mut out = Vec::with_capacity(40 + ms.n_pairs() * (33 + 16 * n) + 8 * n);
    out.extend_from_slice(MEASUREMENT_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_grid(&mut out, &ms.grid);
    out.extend_from_slice(&(ms.n_pairs() as u32).to_le_bytes());
    for p in &ms.pairs {
        for v in [p.theta_s.ux, p.theta_s.uy, p.theta_d.ux, p.theta_d.uy] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(p.is_transmission as u8);
    }
    put_values(&mut out, &ms.source.i0);
    for i in 0..ms.n_pairs() {
        put_values(&mut out, &ms.source.beta[i]);
        put_values(&mut out, &ms.d[i]);
    }
    out
}

pub fn decode_measurements(bytes: &[u8]) -> Result<MeasurementSet, CliError> {
    let mut r = Reader::new(bytes, "measurement");
    r.header(MEASUREMENT_MAGIC)?;
    let grid = r.grid()?;
    let n_pairs = r.u32()? as usize;
    if n_pairs == 0 {
        return Err(r.fail("no source-detector pairs"));
    }
    let mut pairs = Vec::with_capacity(n_pairs);
    for k in 0..n_pairs {
        let c = [r.f64()?, r.f64()?, r.f64()?, r.f64()?];
        let flag = r.u8()?;
        let dir = |ux, uy| Direction::new(ux, uy).map_err(|e| r.fail(format!("pair {k}: {e}")));
        let pair = SourceDetectorPair::new(dir(c[0], c[1])?, dir(c[2], c[3])?);
        if flag > 1 || (flag == 1) != pair.is_transmission {
            return Err(r.fail(format!("pair {k}: transmission flag {flag} contradicts the directions")));
        }
        pairs.push(pair);
    }
    let n = grid.len();
    let i0 = r.finite_values(n, "I0")?;
    let mut beta = Vec::with_capacity(n_pairs);
    let mut d = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        beta.push(r.finite_values(n, &format!("pair {i} background"))?);
        d.push(r.finite_values(n, &format!("pair {i} counts"))?);
    }
    r.finish()?;
    Ok(MeasurementSet::new(grid, pairs, d, SourceModel { i0, beta })?)
}

pub fn write_measurements(path: &Path, ms: &MeasurementSet) -> Result<(), CliError> {
    fs::write(path, encode_measurements(ms)).map_err(|e| CliError::io(path, e))
}

pub fn read_measurements(path: &Path) -> Result<MeasurementSet, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_measurements(&bytes)
}

/// Binary PGM, linearly scaled from `[min, max]` to `[0, 255]`, top row first.
pub fn encode_pgm(values: &[f64], grid: &ImageGrid) -> Vec<u8> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{} {}\n255\n", grid.l1, grid.l2).into_bytes();
    for row in (0..grid.l2).rev() {
        for col in 0..grid.l1 {
            let v = (values[grid.index(row, col)] - lo) / span;
            out.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

pub fn write_pgm(path: &Path, img: &Image) -> Result<(), CliError> {
    fs::write(path, encode_pgm(&img.values, &img.grid)).map_err(|e| CliError::io(path, e))
}
