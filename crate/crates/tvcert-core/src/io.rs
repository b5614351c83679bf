//! Field serialization: the FLD raw-float container and binary PGM images.
//!
//! FLD layout: an ASCII header line `FLD <height> <width> <channels>\n`
//! followed by `height * width * channels` little-endian f64 values in
//! row-major, channel-minor order (value index `(i * width + j) * channels
//! + c`). Channel count 1 is a scalar field, 2 a vector field (x then y).
//!
//! PGM: binary `P5` with maxval 255 or 65535; samples normalize to [0, 1].
//! Parse failures report the byte offset at which reading stopped.

use crate::grid::{GridDomain, ScalarField, VectorField};
use crate::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

/// Raw contents of an FLD container (or a PGM lowered to one channel).
#[derive(Debug, Clone, PartialEq)]
pub struct RawField {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Row-major, channel-minor: `data[(i * width + j) * channels + c]`.
    pub data: Vec<f64>,
}

impl RawField {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidParameter {
                name: "raw field shape",
                message: format!("dimensions must be positive, got {height}x{width}x{channels}"),
            });
        }
        if data.len() != height * width * channels {
            return Err(Error::DomainMismatch(format!(
                "raw field holds {} values, shape {height}x{width}x{channels} needs {}",
                data.len(),
                height * width * channels
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Splits the container into per-channel planes of length height*width.
    pub fn planes(&self) -> Vec<Vec<f64>> {
        let n = self.height * self.width;
        let mut planes = vec![Vec::with_capacity(n); self.channels];
        for (k, v) in self.data.iter().enumerate() {
            planes[k % self.channels].push(*v);
        }
        planes
    }

    pub fn from_planes(height: usize, width: usize, planes: &[&[f64]]) -> Result<Self> {
        let channels = planes.len();
        let n = height * width;
        for p in planes {
            if p.len() != n {
                return Err(Error::DomainMismatch(format!(
                    "plane length {} does not match {height}x{width}",
                    p.len()
                )));
            }
        }
        let mut data = Vec::with_capacity(n * channels);
        for k in 0..n {
            for p in planes {
                data.push(p[k]);
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn into_scalar(self, domain: Arc<GridDomain>) -> Result<ScalarField> {
        if self.channels != 1 {
            return Err(Error::DomainMismatch(format!(
                "expected a 1-channel field, got {} channels",
                self.channels
            )));
        }
        if domain.height() != self.height || domain.width() != self.width {
            return Err(Error::DomainMismatch(format!(
                "field {}x{} does not match grid {}x{}",
                self.height,
                self.width,
                domain.height(),
                domain.width()
            )));
        }
        ScalarField::new(domain, self.data)
    }

    pub fn into_vector(self, domain: Arc<GridDomain>) -> Result<VectorField> {
        if self.channels != 2 {
            return Err(Error::DomainMismatch(format!(
                "expected a 2-channel field, got {} channels",
                self.channels
            )));
        }
        if domain.height() != self.height || domain.width() != self.width {
            return Err(Error::DomainMismatch(format!(
                "field {}x{} does not match grid {}x{}",
                self.height,
                self.width,
                domain.height(),
                domain.width()
            )));
        }
        let mut planes = self.planes();
        let y = planes.pop().unwrap();
        let x = planes.pop().unwrap();
        VectorField::new(domain, x, y)
    }
}

/// Reader that tracks its byte offset for error reporting.
struct Tracked<R> {
    inner: R,
    offset: usize,
}

impl<R: Read> Tracked<R> {
    fn new(inner: R) -> Self {
        Self { inner, offset: 0 }
    }

    fn read_byte(&mut self) -> Result<Option<u8>> {
        let mut b = [0u8; 1];
        match self.inner.read(&mut b)? {
            0 => Ok(None),
            _ => {
                self.offset += 1;
                Ok(Some(b[0]))
            }
        }
    }

    fn read_exact(&mut self, buf: &mut [u8], format: &'static str) -> Result<()> {
        let mut filled = 0;
        while filled < buf.len() {
            let n = self.inner.read(&mut buf[filled..])?;
            if n == 0 {
                return Err(Error::Format {
                    format,
                    offset: self.offset + filled,
                    message: format!(
                        "unexpected end of data, needed {} more bytes",
                        buf.len() - filled
                    ),
                });
            }
            filled += n;
        }
        self.offset += buf.len();
        Ok(())
    }
}

const FLD_MAGIC: &[u8] = b"FLD ";

fn parse_usize_token<R: Read>(
    r: &mut Tracked<R>,
    format: &'static str,
    terminator_space: bool,
) -> Result<usize> {
    let start = r.offset;
    let mut digits = String::new();
    loop {
        match r.read_byte()? {
            None => {
                return Err(Error::Format {
                    format,
                    offset: r.offset,
                    message: "unexpected end of header".into(),
                })
            }
            Some(b) if b.is_ascii_digit() => digits.push(b as char),
            Some(b' ') if terminator_space => break,
            Some(b'\n') if !terminator_space => break,
            Some(b) => {
                return Err(Error::Format {
                    format,
                    offset: r.offset - 1,
                    message: format!("unexpected byte 0x{b:02x} in header integer"),
                })
            }
        }
        if digits.len() > 9 {
            return Err(Error::Format {
                format,
                offset: start,
                message: "header integer too large".into(),
            });
        }
    }
    if digits.is_empty() {
        return Err(Error::Format {
            format,
            offset: start,
            message: "empty header integer".into(),
        });
    }
    Ok(digits.parse().expect("digit-only string of bounded length"))
}

/// Reads an FLD container from a byte stream.
pub fn read_fld<R: Read>(reader: R) -> Result<RawField> {
    let format = "FLD";
    let mut r = Tracked::new(BufReader::new(reader));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic, format)?;
    if magic != FLD_MAGIC {
        return Err(Error::Format {
            format,
            offset: 0,
            message: format!("bad magic {:?}, expected \"FLD \"", magic),
        });
    }
    let height = parse_usize_token(&mut r, format, true)?;
    let width = parse_usize_token(&mut r, format, true)?;
    let channels = parse_usize_token(&mut r, format, false)?;
    if height == 0 || width == 0 || channels == 0 {
        return Err(Error::Format {
            format,
            offset: 4,
            message: format!("dimensions must be positive, got {height}x{width}x{channels}"),
        });
    }
    let count = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(channels))
        .ok_or(Error::Format {
            format,
            offset: 4,
            message: "dimension overflow".into(),
        })?;
    let mut data = vec![0.0f64; count];
    let mut buf = [0u8; 8];
    for (k, slot) in data.iter_mut().enumerate() {
        r.read_exact(&mut buf, format).map_err(|e| match e {
            Error::Format {
                format,
                offset,
                message,
            } => Error::Format {
                format,
                offset,
                message: format!("{message} (value {k} of {count})"),
            },
            other => other,
        })?;
        *slot = f64::from_le_bytes(buf);
    }
    // A trailing byte means the header and payload disagree with the writer.
    if r.read_byte()?.is_some() {
        return Err(Error::Format {
            format,
            offset: r.offset - 1,
            message: "trailing bytes after payload".into(),
        });
    }
    Ok(RawField {
        height,
        width,
        channels,
        data,
    })
}

/// Writes an FLD container to a byte stream.
pub fn write_fld<W: Write>(writer: W, field: &RawField) -> Result<()> {
    let mut w = BufWriter::new(writer);
    write!(w, "FLD {} {} {}\n", field.height, field.width, field.channels)?;
    for v in &field.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a binary (P5) PGM image and normalizes samples to [0, 1].
pub fn read_pgm<R: Read>(reader: R) -> Result<RawField> {
    let format = "PGM";
    let mut r = Tracked::new(BufReader::new(reader));
    let mut magic = [0u8; 2];
    r.read_exact(&mut magic, format)?;
    if &magic != b"P5" {
        return Err(Error::Format {
            format,
            offset: 0,
            message: format!("bad magic {:?}, expected \"P5\"", magic),
        });
    }

    // PGM allows comments (# to end of line) between header tokens.
    let next_token = |r: &mut Tracked<BufReader<R>>| -> Result<usize> {
        let mut digits = String::new();
        let mut in_comment = false;
        loop {
            let b = r.read_byte()?.ok_or(Error::Format {
                format,
                offset: r.offset,
                message: "unexpected end of header".into(),
            })?;
            if in_comment {
                if b == b'\n' {
                    in_comment = false;
                }
                continue;
            }
            match b {
                b'#' if digits.is_empty() => in_comment = true,
                b if b.is_ascii_digit() => {
                    digits.push(b as char);
                    if digits.len() > 9 {
                        return Err(Error::Format {
                            format,
                            offset: r.offset,
                            message: "header integer too large".into(),
                        });
                    }
                }
                b if b.is_ascii_whitespace() => {
                    if !digits.is_empty() {
                        break;
                    }
                }
                b => {
                    return Err(Error::Format {
                        format,
                        offset: r.offset - 1,
                        message: format!("unexpected byte 0x{b:02x} in header"),
                    })
                }
            }
        }
        Ok(digits.parse().expect("digit-only string of bounded length"))
    };

    let width = next_token(&mut r)?;
    let height = next_token(&mut r)?;
    let maxval = next_token(&mut r)?;
    if width == 0 || height == 0 {
        return Err(Error::Format {
            format,
            offset: 2,
            message: format!("image must be non-empty, got {width}x{height}"),
        });
    }
    if maxval != 255 && maxval != 65535 {
        return Err(Error::Format {
            format,
            offset: r.offset,
            message: format!("unsupported maxval {maxval}, expected 255 or 65535"),
        });
    }

    let n = height * width;
    let mut data = vec![0.0f64; n];
    let scale = 1.0 / maxval as f64;
    if maxval == 255 {
        let mut buf = vec![0u8; n];
        r.read_exact(&mut buf, format)?;
        for (slot, b) in data.iter_mut().zip(&buf) {
            *slot = *b as f64 * scale;
        }
    } else {
        // 16-bit samples are big-endian per the format definition.
        let mut buf = vec![0u8; 2 * n];
        r.read_exact(&mut buf, format)?;
        for (k, slot) in data.iter_mut().enumerate() {
            *slot = u16::from_be_bytes([buf[2 * k], buf[2 * k + 1]]) as f64 * scale;
        }
    }
    Ok(RawField {
        height,
        width,
        channels: 1,
        data,
    })
}

/// Writes a binary PGM; values are clamped to [0, 1] then quantized.
pub fn write_pgm<W: Write>(writer: W, field: &RawField, maxval: u32) -> Result<()> {
    if field.channels != 1 {
        return Err(Error::DomainMismatch(format!(
            "PGM output needs a 1-channel field, got {} channels",
            field.channels
        )));
    }
    if maxval != 255 && maxval != 65535 {
        return Err(Error::InvalidParameter {
            name: "maxval",
            message: format!("expected 255 or 65535, got {maxval}"),
        });
    }
    let mut w = BufWriter::new(writer);
    write!(w, "P5\n{} {}\n{}\n", field.width, field.height, maxval)?;
    for v in &field.data {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u32;
        if maxval == 255 {
            w.write_all(&[q as u8])?;
        } else {
            w.write_all(&(q as u16).to_be_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads `path` as an FLD (extension `.fld`) or PGM (`.pgm`) container.
pub fn read_field_file(path: &Path) -> Result<RawField> {
    let file = File::open(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => read_pgm(file),
        _ => read_fld(file),
    }
}

/// Saves a container as FLD (or PGM when the extension is `.pgm`).
pub fn write_field_file(path: &Path, field: &RawField) -> Result<()> {
    let file = File::create(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => write_pgm(file, field, 65535),
        _ => write_fld(file, field),
    }
}

pub fn scalar_to_raw(u: &ScalarField) -> RawField {
    RawField {
        height: u.domain().height(),
        width: u.domain().width(),
        channels: 1,
        data: u.values().to_vec(),
    }
}

pub fn vector_to_raw(g: &VectorField) -> RawField {
    RawField::from_planes(g.domain().height(), g.domain().width(), &[g.x(), g.y()])
        .expect("planes match the domain by construction")
}
