//! Binary PGM (P5) label maps, one byte per pixel.

use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// A single-channel raster of category ids, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32, fill: u8) -> Self {
        LabelMap {
            width,
            height,
            data: vec![fill; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn get(&self, col: u32, row: u32) -> u8 {
        self.data[row as usize * self.width as usize + col as usize]
    }

    #[inline]
    pub fn set(&mut self, col: u32, row: u32, v: u8) {
        let w = self.width as usize;
        self.data[row as usize * w + col as usize] = v;
    }

    /// Encode as binary PGM with maxval 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// Header fields of a P5 file and the offset of the first pixel byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PgmHeader {
    pub width: u32,
    pub height: u32,
    pub maxval: u32,
    pub data_offset: usize,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> std::result::Result<u32, String> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format!("expected {what}"));
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("{what} out of range"))
    }
}

pub fn parse_header(buf: &[u8]) -> std::result::Result<PgmHeader, String> {
    if buf.len() < 2 || &buf[..2] != b"P5" {
        return Err("missing P5 magic".into());
    }
    let mut c = Cursor { buf, pos: 2 };
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        return Err("zero dimension".into());
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("maxval {maxval} unsupported (need 1..=255)"));
    }
    // exactly one whitespace byte separates the header from the raster
    match buf.get(c.pos) {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return Err("missing whitespace after maxval".into()),
    }
    Ok(PgmHeader {
        width,
        height,
        maxval,
        data_offset: c.pos + 1,
    })
}

pub fn decode(buf: &[u8]) -> std::result::Result<LabelMap, String> {
    let h = parse_header(buf)?;
    let n = h.width as usize * h.height as usize;
    let data = buf
        .get(h.data_offset..h.data_offset + n)
        .ok_or_else(|| format!("truncated raster: need {n} bytes"))?;
    Ok(LabelMap {
        width: h.width,
        height: h.height,
        data: data.to_vec(),
    })
}

pub fn read_pgm(path: &Path) -> Result<LabelMap> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf).map_err(|reason| Error::Pgm {
        path: path.to_path_buf(),
        reason,
    })
}

/// Read only enough of the file to validate the header.
pub fn read_pgm_header(path: &Path) -> Result<PgmHeader> {
    use std::io::Read;
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::with_capacity(128);
    Read::by_ref(&mut f)
        .take(512)
        .read_to_end(&mut buf)
        .map_err(|e| Error::io(path, e))?;
    let h = parse_header(&buf).map_err(|reason| Error::Pgm {
        path: path.to_path_buf(),
        reason,
    })?;
    let len = std::fs::metadata(path).map_err(|e| Error::io(path, e))?.len() as usize;
    if len < h.data_offset + h.width as usize * h.height as usize {
        return Err(Error::Pgm {
            path: path.to_path_buf(),
            reason: "truncated raster".into(),
        });
    }
    Ok(h)
}
