//! Slice and tensor file formats.
//!
//! KSIM is the lossless interchange format: a 16-byte little-endian header
//! followed by a row-major payload.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "KSIM"
//! 4       2     version (u16, currently 1)
//! 6       2     dtype   (u16, 0 = f64, 1 = bool bitset)
//! 8       4     height  (u32)
//! 12      4     width   (u32)
//! 16      ..    payload
//! ```
//!
//! f64 payloads are `height * width` little-endian doubles. Bitset payloads
//! pack each row MSB-first into `ceil(width / 8)` bytes.
//!
//! PGM (P5) is kept for inspection; samples are big-endian when 16-bit.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::slice::Slice;

pub const KSIM_MAGIC: &[u8; 4] = b"KSIM";
pub const KSIM_VERSION: u16 = 1;
const KSIM_HEADER_LEN: usize = 16;

/// Upper bound on pixels per file; guards allocation on corrupt headers.
pub const MAX_PIXELS: u64 = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceFormat {
    Pgm8,
    Pgm16,
    Ksim,
}

impl SliceFormat {
    /// Picks a format from the file extension. PGM bit depth is resolved
    /// from the header's maxval when reading.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
        {
            Some(ref e) if e == "ksim" => Ok(SliceFormat::Ksim),
            Some(ref e) if e == "pgm" => Ok(SliceFormat::Pgm16),
            _ => Err(Error::UnknownKind(format!(
                "cannot infer image format from '{}'",
                path.display()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum DType {
    F64 = 0,
    Bits = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F64(Vec<f64>),
    Bits(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub version: u16,
    pub height: u32,
    pub width: u32,
    pub data: TensorData,
}

impl TensorFile {
    pub fn dtype(&self) -> DType {
        match self.data {
            TensorData::F64(_) => DType::F64,
            TensorData::Bits(_) => DType::Bits,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let (h, w) = (self.height as usize, self.width as usize);
        let n = h * w;
        let mut out = Vec::with_capacity(KSIM_HEADER_LEN + n * 8);
        out.extend_from_slice(KSIM_MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.dtype() as u16).to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        match &self.data {
            TensorData::F64(values) => {
                if values.len() != n {
                    return Err(Error::InvalidSlice("payload length mismatch".into()));
                }
                for v in values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            TensorData::Bits(bits) => {
                if bits.len() != n {
                    return Err(Error::InvalidSlice("payload length mismatch".into()));
                }
                for row in bits.chunks(w) {
                    out.extend(pack_row_msb(row));
                }
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < KSIM_HEADER_LEN {
            return Err(Error::MalformedHeader("file shorter than KSIM header".into()));
        }
        if &bytes[0..4] != KSIM_MAGIC {
            return Err(Error::MalformedHeader("bad magic, expected KSIM".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != KSIM_VERSION {
            return Err(Error::MalformedHeader(format!("unsupported version {version}")));
        }
        let dtype = u16::from_le_bytes([bytes[6], bytes[7]]);
        let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let width = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        let n = checked_pixels(height as u64, width as u64)?;
        let payload = &bytes[KSIM_HEADER_LEN..];
        let data = match dtype {
            0 => {
                if payload.len() != n * 8 {
                    return Err(Error::MalformedHeader(format!(
                        "f64 payload is {} bytes, expected {}",
                        payload.len(),
                        n * 8
                    )));
                }
                let values: Vec<f64> = payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                if let Some(index) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { index });
                }
                TensorData::F64(values)
            }
            1 => {
                let w = width as usize;
                let row_bytes = w.div_ceil(8);
                if payload.len() != row_bytes * height as usize {
                    return Err(Error::MalformedHeader(format!(
                        "bitset payload is {} bytes, expected {}",
                        payload.len(),
                        row_bytes * height as usize
                    )));
                }
                let mut bits = Vec::with_capacity(n);
                for row in payload.chunks_exact(row_bytes) {
                    bits.extend(unpack_row_msb(row, w));
                }
                TensorData::Bits(bits)
            }
            other => return Err(Error::MalformedHeader(format!("unknown dtype {other}"))),
        };
        Ok(TensorFile {
            version,
            height,
            width,
            data,
        })
    }
}

pub(crate) fn checked_pixels(height: u64, width: u64) -> Result<usize> {
    if height == 0 || width == 0 {
        return Err(Error::MalformedHeader(format!("zero dimension {height}x{width}")));
    }
    match height.checked_mul(width) {
        Some(n) if n <= MAX_PIXELS => Ok(n as usize),
        _ => Err(Error::DimensionOverflow { height, width }),
    }
}

pub(crate) fn pack_row_msb(row: &[bool]) -> Vec<u8> {
    let mut bytes = vec![0u8; row.len().div_ceil(8)];
    for (i, &b) in row.iter().enumerate() {
        if b {
            bytes[i / 8] |= 0x80 >> (i % 8);
        }
    }
    bytes
}

pub(crate) fn unpack_row_msb(bytes: &[u8], width: usize) -> impl Iterator<Item = bool> + '_ {
    (0..width).map(move |i| bytes[i / 8] & (0x80 >> (i % 8)) != 0)
}

pub fn write_tensor(tensor: &TensorFile, path: &Path) -> Result<()> {
    fs::write(path, tensor.encode()?)?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<TensorFile> {
    TensorFile::decode(&fs::read(path)?)
}

/// Reads a slice. PGM samples are divided by the format maximum
/// (255 for 8-bit, 65535 for 16-bit); KSIM f64 payloads are taken verbatim
/// and bitsets become 0/1.
pub fn read_slice(path: &Path, format: SliceFormat) -> Result<Slice> {
    let bytes = fs::read(path)?;
    match format {
        SliceFormat::Ksim => {
            let t = TensorFile::decode(&bytes)?;
            let pixels = match t.data {
                TensorData::F64(v) => v,
                TensorData::Bits(b) => b.into_iter().map(|x| if x { 1.0 } else { 0.0 }).collect(),
            };
            Slice::new(t.height as usize, t.width as usize, pixels)
        }
        SliceFormat::Pgm8 | SliceFormat::Pgm16 => decode_pgm(&bytes, Some(format)),
    }
}

/// Reads a slice choosing the format from the extension; PGM depth follows
/// the header.
pub fn read_slice_auto(path: &Path) -> Result<Slice> {
    match SliceFormat::from_path(path)? {
        SliceFormat::Ksim => read_slice(path, SliceFormat::Ksim),
        _ => decode_pgm(&fs::read(path)?, None),
    }
}

pub fn write_slice(slice: &Slice, path: &Path, format: SliceFormat) -> Result<()> {
    let bytes = match format {
        SliceFormat::Ksim => TensorFile {
            version: KSIM_VERSION,
            height: dim_u32(slice.height())?,
            width: dim_u32(slice.width())?,
            data: TensorData::F64(slice.pixels().to_vec()),
        }
        .encode()?,
        SliceFormat::Pgm16 => encode_pgm(slice, 65535),
        SliceFormat::Pgm8 => encode_pgm(slice, 255),
    };
    fs::write(path, bytes)?;
    Ok(())
}

fn dim_u32(d: usize) -> Result<u32> {
    u32::try_from(d).map_err(|_| Error::DimensionOverflow {
        height: d as u64,
        width: d as u64,
    })
}

/// Clips to [0,1] and quantizes with round(v * maxval).
fn encode_pgm(slice: &Slice, maxval: u16) -> Vec<u8> {
    let header = format!("P5\n{} {}\n{}\n", slice.width(), slice.height(), maxval);
    let mut out = header.into_bytes();
    for &v in slice.pixels() {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u16;
        if maxval > 255 {
            out.extend_from_slice(&q.to_be_bytes());
        } else {
            out.push(q as u8);
        }
    }
    out
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader("unexpected end of header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Result<u64> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("expected integer, got '{}'", String::from_utf8_lossy(tok))))
    }

    /// Consumes the single whitespace byte that ends a Netpbm header.
    fn end_header(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(self.pos + 1),
            _ => Err(Error::MalformedHeader("missing whitespace after header".into())),
        }
    }
}

/// Parses a P4/P5 header prefix, returning (magic, width, height, maxval, raster offset).
/// `maxval` is 1 for P4.
pub(crate) fn parse_netpbm_header(bytes: &[u8]) -> Result<(&[u8], u64, u64, u64, usize)> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    let magic = cur.token()?;
    let width = cur.number()?;
    let height = cur.number()?;
    let maxval = if magic == b"P4" { 1 } else { cur.number()? };
    let offset = cur.end_header()?;
    Ok((magic, width, height, maxval, offset))
}

fn decode_pgm(bytes: &[u8], format: Option<SliceFormat>) -> Result<Slice> {
    let (magic, width, height, maxval, offset) = parse_netpbm_header(bytes)?;
    if magic != b"P5" {
        return Err(Error::MalformedHeader(format!(
            "expected P5, got '{}'",
            String::from_utf8_lossy(magic)
        )));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::MalformedHeader(format!("invalid maxval {maxval}")));
    }
    let wide = maxval > 255;
    match format {
        Some(SliceFormat::Pgm8) if wide => return Err(Error::MalformedHeader(format!("maxval {maxval} is not 8-bit"))),
        Some(SliceFormat::Pgm16) if !wide => {
            return Err(Error::MalformedHeader(format!("maxval {maxval} is not 16-bit")))
        }
        _ => {}
    }
    let n = checked_pixels(height, width)?;
    let raster = &bytes[offset..];
    let sample_bytes = if wide { 2 } else { 1 };
    if raster.len() < n * sample_bytes {
        return Err(Error::MalformedHeader(format!(
            "raster has {} bytes, expected {}",
            raster.len(),
            n * sample_bytes
        )));
    }
    let pixels: Vec<f64> = if wide {
        raster[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0)
            .collect()
    } else {
        raster[..n].iter().map(|&b| b as f64 / 255.0).collect()
    };
    Slice::new(height as usize, width as usize, pixels)
}
