//! Fractional Brownian surfaces by spectral synthesis.
//!
//! A complex Gaussian field with amplitude `|f|^-(H+1)` (power `|f|^-(2H+2)`)
//! is inverse transformed on a periodic grid at least twice the requested
//! side, and the top-left `size × size` block of its real part is kept. The
//! padding breaks the wrap-around correlation a same-size periodic grid would
//! impose on the crop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{GrayImage, MAX_INTENSITY};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbmSpec {
    /// Hurst exponent, strictly inside (0, 1).
    pub hurst: f64,
    pub size: usize,
    pub seed: u64,
}

impl FbmSpec {
    pub fn new(hurst: f64, size: usize, seed: u64) -> Result<Self> {
        let spec = Self { hurst, size, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::Argument(format!(
                "Hurst exponent {} outside (0, 1)",
                self.hurst
            )));
        }
        let dyadic_plus_one = self.size >= 3 && (self.size - 1).is_power_of_two();
        if !(dyadic_plus_one || self.size >= 32) {
            return Err(Error::Argument(format!(
                "fBm size {} must be 2^k + 1 or at least 32",
                self.size
            )));
        }
        Ok(())
    }

    /// Dimension of the fBm graph surface, `3 - H`.
    pub fn theoretical_dimension(&self) -> f64 {
        3.0 - self.hurst
    }
}

pub fn synth_fbm(spec: &FbmSpec) -> Result<GrayImage> {
    spec.validate()?;
    let size = spec.size;
    let n = (2 * size).next_power_of_two();
    let exponent = -(spec.hurst + 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut field = vec![Complex64::new(0.0, 0.0); n * n];
    for ky in 0..n {
        let fy = signed_frequency(ky, n);
        for kx in 0..n {
            let fx = signed_frequency(kx, n);
            let f2 = fx * fx + fy * fy;
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            if f2 > 0.0 {
                let amp = f2.sqrt().powf(exponent);
                field[ky * n + kx] = Complex64::new(re * amp, im * amp);
            }
        }
    }

    inverse_fft_2d(&mut field, n);

    let mut pixels = Vec::with_capacity(size * size);
    for i in 0..size {
        pixels.extend(field[i * n..i * n + size].iter().map(|c| c.re));
    }
    rescale(&mut pixels);
    Ok(GrayImage::from_raw(size, size, pixels))
}

fn signed_frequency(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

fn inverse_fft_2d(data: &mut [Complex64], n: usize) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(n);
    for row in data.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            column[i] = data[i * n + j];
        }
        fft.process(&mut column);
        for i in 0..n {
            data[i * n + j] = column[i];
        }
    }
}

/// Affine map onto exactly `[0, 255]`.
fn rescale(pixels: &mut [f64]) {
    let (lo, hi) = pixels
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    for v in pixels.iter_mut() {
        *v = if span > 0.0 {
            ((*v - lo) / span * MAX_INTENSITY).clamp(0.0, MAX_INTENSITY)
        } else {
            0.0
        };
    }
}
