//! Binary (P5) and ASCII (P2) graymap reading; P5 writing.

use std::io::Write;

use thiserror::Error;

use super::GrayImage;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("unsupported magic `{0}` (expected P2 or P5)")]
    BadMagic(String),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("maxval {0} not supported (1..=255)")]
    MaxVal(u32),
    #[error("pixel data truncated: expected {expected} samples, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("sample {0} exceeds maxval")]
    SampleRange(u32),
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.data.len() {
            let c = self.data[self.pos];
            if c == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PgmError> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PgmError::Header(format!("expected {what}")));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| PgmError::Header(format!("{what} out of range")))
    }
}

fn rescale(v: u32, maxval: u32) -> Result<u8, PgmError> {
    if v > maxval {
        return Err(PgmError::SampleRange(v));
    }
    if maxval == 255 {
        return Ok(v as u8);
    }
    Ok(((v * 255 + maxval / 2) / maxval) as u8)
}

pub fn decode(data: &[u8]) -> Result<GrayImage, PgmError> {
    if data.len() < 2 {
        return Err(PgmError::BadMagic(String::from_utf8_lossy(data).into_owned()));
    }
    let magic = &data[..2];
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        other => return Err(PgmError::BadMagic(String::from_utf8_lossy(other).into_owned())),
    };
    let mut cur = Cursor { data, pos: 2 };
    if cur.pos < data.len() && !data[cur.pos].is_ascii_whitespace() && data[cur.pos] != b'#' {
        return Err(PgmError::Header("missing whitespace after magic".into()));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::MaxVal(maxval));
    }
    if width == 0 || height == 0 {
        return Err(PgmError::Header("zero dimension".into()));
    }
    let expected = width as usize * height as usize;
    let mut pixels = Vec::with_capacity(expected);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if cur.pos >= data.len() || !data[cur.pos].is_ascii_whitespace() {
            return Err(PgmError::Truncated { expected, got: 0 });
        }
        let raster = &data[cur.pos + 1..];
        if raster.len() < expected {
            return Err(PgmError::Truncated {
                expected,
                got: raster.len(),
            });
        }
        for &b in &raster[..expected] {
            pixels.push(rescale(b as u32, maxval)?);
        }
    } else {
        for got in 0..expected {
            cur.skip_ws_and_comments();
            if cur.pos >= data.len() {
                return Err(PgmError::Truncated { expected, got });
            }
            let v = cur.number("sample")?;
            pixels.push(rescale(v, maxval)?);
        }
    }
    GrayImage::new(width as usize, height as usize, pixels).map_err(PgmError::Invalid)
}

/// P5 with maxval 255.
pub fn encode(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn read_file(path: &std::path::Path) -> Result<GrayImage, PgmError> {
    decode(&std::fs::read(path)?)
}

pub fn write_file(path: &std::path::Path, img: &GrayImage) -> Result<(), PgmError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(img))?;
    Ok(())
}
