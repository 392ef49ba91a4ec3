use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{GrayImage, MAX_INTENSITY};
use crate::error::{Error, Result};

/// Default noise standard deviation: 10% of the 0..255 dynamic range.
pub const DEFAULT_NOISE_SIGMA: f64 = 25.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    GaussianNoise,
    Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    /// Fraction of pixels receiving noise.
    pub noise_ratio: f64,
    pub noise_sigma: f64,
    pub angle_degrees: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn noise(noise_ratio: f64, noise_sigma: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            kind: PerturbationKind::GaussianNoise,
            noise_ratio,
            noise_sigma,
            angle_degrees: 0.0,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn rotation(angle_degrees: f64) -> Result<Self> {
        let spec = Self {
            kind: PerturbationKind::Rotation,
            noise_ratio: 0.0,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            angle_degrees,
            seed: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PerturbationKind::GaussianNoise => {
                if !(0.0..=1.0).contains(&self.noise_ratio) {
                    return Err(Error::Argument(format!(
                        "noise ratio {} outside [0, 1]",
                        self.noise_ratio
                    )));
                }
                if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
                    return Err(Error::Argument(format!(
                        "noise sigma must be positive, got {}",
                        self.noise_sigma
                    )));
                }
            }
            PerturbationKind::Rotation => {
                if !(0.0..360.0).contains(&self.angle_degrees) {
                    return Err(Error::Argument(format!(
                        "rotation angle {} outside [0, 360)",
                        self.angle_degrees
                    )));
                }
            }
        }
        Ok(())
    }

    /// Applies this perturbation, dispatching on `kind`.
    pub fn apply(&self, img: &GrayImage) -> Result<GrayImage> {
        match self.kind {
            PerturbationKind::GaussianNoise => add_gaussian_noise(img, self),
            PerturbationKind::Rotation => rotate_and_crop(img, self),
        }
    }
}

/// Adds `N(0, sigma²)` to exactly `round(ratio · w · h)` distinct pixels drawn
/// without replacement, clamping results to `[0, 255]`.
pub fn add_gaussian_noise(img: &GrayImage, spec: &PerturbationSpec) -> Result<GrayImage> {
    if spec.kind != PerturbationKind::GaussianNoise {
        return Err(Error::Argument(
            "expected a gaussian_noise perturbation".into(),
        ));
    }
    spec.validate()?;
    let n = img.pixels().len();
    let affected = ((spec.noise_ratio * n as f64).round() as usize).min(n);
    let mut pixels = img.pixels().to_vec();
    if affected == 0 {
        return Ok(GrayImage::from_raw(img.width(), img.height(), pixels));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::Argument(format!("noise sigma: {e}")))?;
    let mut chosen = rand::seq::index::sample(&mut rng, n, affected).into_vec();
    // sampled order depends on the algorithm picked internally; sort for a stable draw order
    chosen.sort_unstable();
    for idx in chosen {
        let v = pixels[idx] + normal.sample(&mut rng);
        pixels[idx] = v.clamp(0.0, MAX_INTENSITY);
    }
    Ok(GrayImage::from_raw(img.width(), img.height(), pixels))
}

/// Side of the central crop kept after rotating a `d × d` image: `⌊d/√2⌋`.
pub fn crop_side(d: usize) -> usize {
    (d as f64 / std::f64::consts::SQRT_2).floor() as usize
}

/// Rotates a square image counter-clockwise about its center and returns the
/// centered `⌊d/√2⌋` square, which lies inside the rotated frame for any angle.
pub fn rotate_and_crop(img: &GrayImage, spec: &PerturbationSpec) -> Result<GrayImage> {
    if spec.kind != PerturbationKind::Rotation {
        return Err(Error::Argument("expected a rotation perturbation".into()));
    }
    spec.validate()?;
    if img.width() != img.height() {
        return Err(Error::Dimension(format!(
            "rotation needs a square image, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let d = img.width();
    let side = crop_side(d);
    if side < 2 {
        return Err(Error::Dimension(format!(
            "image side {d} too small to rotate and crop"
        )));
    }
    let offset = (d - side) / 2;

    let angle = spec.angle_degrees;
    if angle % 90.0 == 0.0 {
        let turns = (angle / 90.0) as u32;
        return img
            .rotate_quarter_turns(turns)
            .crop(offset, offset, side, side);
    }

    let theta = angle.to_radians();
    let (sin, cos) = theta.sin_cos();
    let center = (d as f64 - 1.0) / 2.0;
    let max = (d - 1) as f64;
    let mut pixels = Vec::with_capacity(side * side);
    for i in offset..offset + side {
        for j in offset..offset + side {
            // (x, y) with y pointing up; sample the source at R(-θ)·(x, y)
            let x = j as f64 - center;
            let y = center - i as f64;
            let sx = cos * x + sin * y;
            let sy = -sin * x + cos * y;
            let col = (sx + center).clamp(0.0, max);
            let row = (center - sy).clamp(0.0, max);
            pixels.push(bilinear(img, row, col));
        }
    }
    Ok(GrayImage::from_raw(side, side, pixels))
}

fn bilinear(img: &GrayImage, row: f64, col: f64) -> f64 {
    let r0 = row.floor() as usize;
    let c0 = col.floor() as usize;
    let r1 = (r0 + 1).min(img.height() - 1);
    let c1 = (c0 + 1).min(img.width() - 1);
    let fr = row - r0 as f64;
    let fc = col - c0 as f64;
    let top = img.get(r0, c0) * (1.0 - fc) + img.get(r0, c1) * fc;
    let bottom = img.get(r1, c0) * (1.0 - fc) + img.get(r1, c1) * fc;
    (top * (1.0 - fr) + bottom * fr).clamp(0.0, MAX_INTENSITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.random_range(0.0..=255.0)).unwrap()
    }

    fn differing(a: &GrayImage, b: &GrayImage) -> usize {
        a.pixels()
            .iter()
            .zip(b.pixels())
            .filter(|(x, y)| x != y)
            .count()
    }

    #[test]
    fn zero_ratio_is_identity() {
        let img = random_image(32, 32, 1);
        let spec = PerturbationSpec::noise(0.0, DEFAULT_NOISE_SIGMA, 9).unwrap();
        assert_eq!(add_gaussian_noise(&img, &spec).unwrap(), img);
    }

    #[test]
    fn vanishing_sigma_is_nearly_identity() {
        let img = random_image(32, 32, 2);
        let spec = PerturbationSpec::noise(1.0, 1e-12, 9).unwrap();
        let out = add_gaussian_noise(&img, &spec).unwrap();
        for (a, b) in img.pixels().iter().zip(out.pixels()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_affected_count() {
        // mid-gray so clamping cannot hide a perturbation
        let img = GrayImage::constant(100, 100, 128.0).unwrap();
        let spec = PerturbationSpec::noise(0.03, DEFAULT_NOISE_SIGMA, 42).unwrap();
        let out = add_gaussian_noise(&img, &spec).unwrap();
        let diff = differing(&img, &out);
        assert!(diff <= 300);
        assert_eq!(diff, 300);
    }

    #[test]
    fn noise_is_seeded() {
        let img = random_image(40, 30, 3);
        let spec = PerturbationSpec::noise(0.05, DEFAULT_NOISE_SIGMA, 77).unwrap();
        let a = add_gaussian_noise(&img, &spec).unwrap();
        let b = add_gaussian_noise(&img, &spec).unwrap();
        assert_eq!(a.pixels(), b.pixels());
        let other = PerturbationSpec { seed: 78, ..spec };
        assert_ne!(a, add_gaussian_noise(&img, &other).unwrap());
    }

    #[test]
    fn invalid_specs() {
        assert!(PerturbationSpec::noise(1.5, 1.0, 0).is_err());
        assert!(PerturbationSpec::noise(0.5, 0.0, 0).is_err());
        assert!(PerturbationSpec::rotation(360.0).is_err());
        assert!(PerturbationSpec::rotation(-1.0).is_err());
    }

    #[test]
    fn zero_angle_is_central_crop() {
        let img = random_image(128, 128, 4);
        let out = rotate_and_crop(&img, &PerturbationSpec::rotation(0.0).unwrap()).unwrap();
        assert_eq!((out.width(), out.height()), (90, 90));
        assert_eq!(out, img.crop(19, 19, 90, 90).unwrap());
    }

    #[test]
    fn half_turn_twice_is_identity() {
        let img = random_image(128, 128, 5);
        let half = PerturbationSpec::rotation(180.0).unwrap();
        let once = img.rotate_quarter_turns(2);
        let crop_twice = rotate_and_crop(&once, &half).unwrap();
        let crop_zero = rotate_and_crop(&img, &PerturbationSpec::rotation(0.0).unwrap()).unwrap();
        assert_eq!(crop_twice, crop_zero);
        // the 180° crop is the point reflection of the 0° crop
        let crop_half = rotate_and_crop(&img, &half).unwrap();
        assert_eq!(crop_half, crop_zero.rotate_quarter_turns(2));
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = GrayImage::constant(64, 64, 77.0).unwrap();
        for angle in [0.0, 30.0, 45.0, 90.0, 123.4, 180.0, 270.0, 359.0] {
            let out = rotate_and_crop(&img, &PerturbationSpec::rotation(angle).unwrap()).unwrap();
            assert_eq!(out.width(), 45);
            for &v in out.pixels() {
                if angle % 90.0 == 0.0 {
                    assert_eq!(v, 77.0);
                } else {
                    assert!((v - 77.0).abs() < 1e-12, "angle {angle}: {v}");
                }
            }
        }
    }

    #[test]
    fn interpolated_quarter_turn_agrees_with_permutation() {
        // 89.9999° with bilinear sampling should land on nearly the same pixels as the exact path
        let img = random_image(33, 33, 6);
        let exact = rotate_and_crop(&img, &PerturbationSpec::rotation(90.0).unwrap()).unwrap();
        let approx = rotate_and_crop(&img, &PerturbationSpec::rotation(89.9999).unwrap()).unwrap();
        for (a, b) in exact.pixels().iter().zip(approx.pixels()) {
            assert!((a - b).abs() < 0.05, "{a} vs {b}");
        }
    }

    #[test]
    fn rotation_requires_square() {
        let img = random_image(20, 10, 7);
        let err = rotate_and_crop(&img, &PerturbationSpec::rotation(30.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }
}
