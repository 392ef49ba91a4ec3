//! Grayscale images and the operations that feed the descriptor pipeline.

mod fbm;
mod io;
mod perturb;

pub use fbm::{synth_fbm, FbmSpec};
pub use io::{decode_pgm, encode_pgm, load_image, luma, save_pgm};
pub use perturb::{
    add_gaussian_noise, crop_side, rotate_and_crop, PerturbationKind, PerturbationSpec,
    DEFAULT_NOISE_SIGMA,
};

use crate::error::{Error, Result};

pub const MAX_INTENSITY: f64 = 255.0;

/// A row-major grid of real gray intensities in `[0, 255]`.
///
/// Row index `i` runs over the height, column index `j` over the width, so
/// `get(i, j)` is `I(i, j)` with zero-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidImage(format!(
                "image must be at least 2x2, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(pos) = pixels
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0 || *v > MAX_INTENSITY)
        {
            return Err(Error::InvalidImage(format!(
                "pixel {pos} has intensity {} outside [0, 255]",
                pixels[pos]
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for i in 0..height {
            for j in 0..width {
                pixels.push(f(i, j));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image whose pixels are already known to satisfy the invariants.
    pub(crate) fn from_raw(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }

    pub fn min_side(&self) -> usize {
        self.width.min(self.height)
    }

    /// Applies `f` to every intensity, revalidating the result.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.pixels.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn crop(&self, top: usize, left: usize, width: usize, height: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::Dimension(format!(
                "crop {width}x{height} at ({top}, {left}) exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(width * height);
        for i in top..top + height {
            pixels.extend_from_slice(&self.row(i)[left..left + width]);
        }
        Self::new(width, height, pixels)
    }

    /// Rotates by `quarter_turns × 90°` counter-clockwise with an exact index
    /// permutation.
    pub fn rotate_quarter_turns(&self, quarter_turns: u32) -> Self {
        let (w, h) = (self.width, self.height);
        match quarter_turns % 4 {
            0 => self.clone(),
            1 => {
                // out(i, j) = in(j, w-1-i), out is h wide and w tall
                let mut out = Vec::with_capacity(w * h);
                for i in 0..w {
                    for j in 0..h {
                        out.push(self.get(j, w - 1 - i));
                    }
                }
                Self::from_raw(h, w, out)
            }
            2 => {
                let mut out = self.pixels.clone();
                out.reverse();
                Self::from_raw(w, h, out)
            }
            _ => {
                let mut out = Vec::with_capacity(w * h);
                for i in 0..w {
                    for j in 0..h {
                        out.push(self.get(h - 1 - j, i));
                    }
                }
                Self::from_raw(h, w, out)
            }
        }
    }
}

/// Splits `img` into non-overlapping `win × win` tiles in row-major order,
/// dropping partial tiles at the right and bottom margins.
pub fn split_windows(img: &GrayImage, win: usize) -> Result<Vec<GrayImage>> {
    if win < 2 {
        return Err(Error::Argument(format!(
            "window side must be >= 2, got {win}"
        )));
    }
    let rows = img.height / win;
    let cols = img.width / win;
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push(img.crop(r * win, c * win, win, win)?);
        }
    }
    Ok(out)
}
