use std::fs;
use std::path::Path;

use super::{GrayImage, MAX_INTENSITY};
use crate::error::{Error, Result};

/// ITU-R BT.601 luma.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> f64 {
    0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64
}

/// Loads a PGM (P2/P5) or PNG (8-bit gray or RGB) file, sniffing the format
/// from the leading bytes.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub(crate) fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";
    if bytes.starts_with(PNG_MAGIC) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else {
        Err(Error::Format("not a PGM (P2/P5) or PNG file".into()))
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format("truncated PGM".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::Format("non-ASCII PGM token".into()))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::Format(format!("bad PGM {what}: {tok:?}")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut rd = HeaderReader { bytes, pos: 0 };
    let binary = match rd.token()? {
        "P2" => false,
        "P5" => true,
        other => return Err(Error::Format(format!("unsupported PNM magic {other:?}"))),
    };
    let width = rd.number("width")?;
    let height = rd.number("height")?;
    let maxval = rd.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!(
            "unsupported PGM maxval {maxval}, only 8-bit images are read"
        )));
    }
    let scale = MAX_INTENSITY / maxval as f64;
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("PGM dimensions overflow".into()))?;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates maxval from the raster
        let start = rd.pos + 1;
        let raster = bytes
            .get(start..start + count)
            .ok_or_else(|| Error::Format("truncated P5 raster".into()))?;
        for &v in raster {
            if v as usize > maxval {
                return Err(Error::Format(format!("sample {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as f64 * scale);
        }
    } else {
        for _ in 0..count {
            let v = rd.number("sample")?;
            if v > maxval {
                return Err(Error::Format(format!("sample {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as f64 * scale);
        }
    }
    GrayImage::new(width, height, pixels)
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("PNG: {e}")))?;
    let (color, depth) = reader.output_color_type();
    if depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "unsupported PNG bit depth {depth:?}, expected 8"
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("PNG too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("PNG: {e}")))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let data = &buf[..info.buffer_size()];
    let pixels: Vec<f64> = match color {
        png::ColorType::Grayscale => data.iter().map(|&v| v as f64).collect(),
        png::ColorType::Rgb => data
            .chunks_exact(3)
            .map(|px| luma(px[0], px[1], px[2]))
            .collect(),
        other => {
            return Err(Error::Format(format!(
                "unsupported PNG color type {other:?}, expected gray or RGB"
            )))
        }
    };
    GrayImage::new(w, h, pixels)
}

/// Encodes as binary P5 with maxval 255, rounding half up and clamping.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend(
        img.pixels()
            .iter()
            .map(|&v| (v + 0.5).floor().clamp(0.0, 255.0) as u8),
    );
    out
}

pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}
