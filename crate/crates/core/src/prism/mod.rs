//! Triangular prism areas, exponent-weighted sums and descriptors.
//!
//! For a scale ε the grid holds every cell anchored at `(mε, nε)` whose far
//! corner `(mε + ε, nε + ε)` is still inside the image; margins that cannot
//! host a full cell are ignored. The weighted total for an exponent α is
//!
//! ```text
//! S^α(ε) = Σ_cells (A + B + C + D)^α
//! ```
//!
//! and the descriptor vector is `ln S^α(ε)` laid out α-major, ε-minor.

mod cell;

pub use cell::{cell_area, cell_geometry, face_area_closed_form, CellGeometry};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Scale count per exponent for the linear schedule's default `ε_max = 11`.
pub const DEFAULT_LINEAR_MAX_SCALE: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    PowersOfTwo,
    Linear,
    Custom,
}

/// Strictly ascending cell sides, in pixels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleSchedule {
    scales: Vec<usize>,
    mode: ScheduleMode,
}

impl ScaleSchedule {
    pub fn new(scales: Vec<usize>) -> Result<Self> {
        Self::with_mode(scales, ScheduleMode::Custom)
    }

    fn with_mode(scales: Vec<usize>, mode: ScheduleMode) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::Scale("empty scale schedule".into()));
        }
        if scales[0] < 1 {
            return Err(Error::Scale("scales must be at least 1".into()));
        }
        if scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Scale(format!(
                "scales not strictly ascending: {scales:?}"
            )));
        }
        Ok(Self { scales, mode })
    }

    /// `ε = 2^δ` for `δ = 1, 2, …` while a full cell fits in a square of side
    /// `min_side`, optionally capped at `max_scale`.
    pub fn powers_of_two(min_side: usize, max_scale: Option<usize>) -> Result<Self> {
        let cap = max_scale.unwrap_or(usize::MAX);
        let scales: Vec<usize> = (1..usize::BITS)
            .map(|delta| 1usize << delta)
            .take_while(|&eps| eps < min_side && eps <= cap)
            .collect();
        if scales.is_empty() {
            return Err(Error::Scale(format!(
                "no power-of-two scale fits an image of side {min_side}"
            )));
        }
        Self::with_mode(scales, ScheduleMode::PowersOfTwo)
    }

    /// `ε = 2, 3, …, max_scale`.
    pub fn linear(max_scale: usize) -> Result<Self> {
        if max_scale < 2 {
            return Err(Error::Scale(format!(
                "linear schedule needs max scale >= 2, got {max_scale}"
            )));
        }
        Self::with_mode((2..=max_scale).collect(), ScheduleMode::Linear)
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn max_scale(&self) -> usize {
        *self.scales.last().expect("schedule is never empty")
    }

    /// Checks every scale admits at least one full cell in `img`.
    pub fn validate_for(&self, img: &GrayImage) -> Result<()> {
        let max = self.max_scale();
        if max >= img.min_side() {
            return Err(Error::Scale(format!(
                "scale {max} admits no full cell in a {}x{} image",
                img.width(),
                img.height()
            )));
        }
        Ok(())
    }
}

/// Powers-of-two schedule restricted to scales with at least one full cell.
pub fn default_schedule(img: &GrayImage) -> Result<ScaleSchedule> {
    ScaleSchedule::powers_of_two(img.min_side(), None)
}

/// Minimum number of full cells per axis kept by [`dimension_schedule`].
pub const DIMENSION_MIN_CELLS: usize = 8;

/// Powers-of-two schedule for dimension estimates: only scales leaving at
/// least [`DIMENSION_MIN_CELLS`] full cells along the shorter side.
///
/// The dimension is a small-ε limit. At coarse scales a 0..255 surface looks
/// flat relative to the cell side and the sum runs over a few cells, which
/// drags the fitted slope toward 2.
pub fn dimension_schedule(img: &GrayImage) -> Result<ScaleSchedule> {
    let cap = (img.min_side() - 1) / DIMENSION_MIN_CELLS;
    ScaleSchedule::powers_of_two(img.min_side(), Some(cap)).and_then(|s| {
        if s.len() < 2 {
            Err(Error::Scale(format!(
                "a {}x{} image is too small for a dimension fit",
                img.width(),
                img.height()
            )))
        } else {
            Ok(s)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentRange {
    alphas: Vec<f64>,
}

impl ExponentRange {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::Argument("empty exponent range".into()));
        }
        if alphas.iter().any(|a| !a.is_finite()) {
            return Err(Error::Argument("exponents must be finite".into()));
        }
        if alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument(format!(
                "exponents not strictly ascending: {alphas:?}"
            )));
        }
        Ok(Self { alphas })
    }

    pub fn single(alpha: f64) -> Result<Self> {
        Self::new(vec![alpha])
    }

    /// `min, min + step, …` up to `max` inclusive. Values are rounded to ten
    /// decimals so `0.1` steps produce `0.3` rather than `0.30000000000000004`.
    pub fn stepped(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && step > 0.0 && max >= min) {
            return Err(Error::Argument(format!(
                "bad exponent grid min={min} max={max} step={step}"
            )));
        }
        let count = ((max - min) / step + 1e-9).floor() as usize + 1;
        let alphas = (0..count)
            .map(|k| ((min + k as f64 * step) * 1e10).round() / 1e10)
            .collect();
        Self::new(alphas)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

/// Number of full cells along a side of length `side` at scale `eps`.
#[inline]
pub fn cells_along(side: usize, eps: usize) -> usize {
    if eps == 0 || side == 0 {
        0
    } else {
        (side - 1) / eps
    }
}

/// Unweighted areas of every full cell at scale `eps`, row-major over the grid.
pub fn cell_areas(img: &GrayImage, eps: usize) -> Result<Vec<f64>> {
    let rows = cells_along(img.height(), eps);
    let cols = cells_along(img.width(), eps);
    if rows == 0 || cols == 0 {
        return Err(Error::Scale(format!(
            "scale {eps} admits no full cell in a {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let e = eps as f64;
    let mut areas = Vec::with_capacity(rows * cols);
    for m in 0..rows {
        let top = img.row(m * eps);
        let bottom = img.row(m * eps + eps);
        for n in 0..cols {
            let j = n * eps;
            let geom =
                CellGeometry::from_corners(top[j], bottom[j], bottom[j + eps], top[j + eps], e);
            areas.push(geom.area());
        }
    }
    Ok(areas)
}

fn weighted_sum(areas: &[f64], alpha: f64) -> f64 {
    areas.iter().map(|s| s.powf(alpha)).sum()
}

/// `S^α(ε)`, the sum of every full cell's area raised to `alpha`.
pub fn weighted_area_sum(img: &GrayImage, eps: usize, alpha: f64) -> Result<f64> {
    Ok(weighted_sum(&cell_areas(img, eps)?, alpha))
}

/// `S^α(ε)` over a full schedule × exponent grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaCurve {
    pub image_id: Option<String>,
    scales: Vec<usize>,
    alphas: Vec<f64>,
    /// α-major, ε-minor.
    values: Vec<f64>,
}

impl AreaCurve {
    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, alpha_idx: usize, scale_idx: usize) -> f64 {
        self.values[alpha_idx * self.scales.len() + scale_idx]
    }
}

pub fn area_curve(
    img: &GrayImage,
    schedule: &ScaleSchedule,
    range: &ExponentRange,
) -> Result<AreaCurve> {
    schedule.validate_for(img)?;
    let per_scale: Vec<Vec<f64>> = schedule
        .scales()
        .iter()
        .map(|&eps| cell_areas(img, eps))
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(schedule.len() * range.len());
    for &alpha in range.alphas() {
        values.extend(per_scale.iter().map(|areas| weighted_sum(areas, alpha)));
    }
    Ok(AreaCurve {
        image_id: None,
        scales: schedule.scales().to_vec(),
        alphas: range.alphas().to_vec(),
        values,
    })
}

/// Position of each descriptor entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorLayout {
    pub scales: Vec<usize>,
    pub alphas: Vec<f64>,
}

impl DescriptorLayout {
    pub fn len(&self) -> usize {
        self.scales.len() * self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(α, ε)` for each entry in order.
    pub fn entries(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.alphas
            .iter()
            .flat_map(move |&a| self.scales.iter().map(move |&e| (a, e)))
    }
}

/// `ln S^α(ε)` for every `(α, ε)`, α ascending then ε ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorVector {
    pub values: Vec<f64>,
    pub layout: DescriptorLayout,
}

pub fn descriptor_vector(
    img: &GrayImage,
    schedule: &ScaleSchedule,
    range: &ExponentRange,
) -> Result<DescriptorVector> {
    let curve = area_curve(img, schedule, range)?;
    let values: Vec<f64> = curve.values.iter().map(|s| s.ln()).collect();
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "descriptor entry {bad} is not finite (S = {})",
            curve.values[bad]
        )));
    }
    Ok(DescriptorVector {
        values,
        layout: DescriptorLayout {
            scales: curve.scales,
            alphas: curve.alphas,
        },
    })
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::Fit("x and y lengths differ".into()));
    }
    if xs.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least 2 points, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::Fit("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// `2 − slope` of `ln S(ε)` against `ln ε` for paired scales and areas.
pub fn dimension_from_areas(scales: &[f64], areas: &[f64]) -> Result<f64> {
    let xs: Vec<f64> = scales.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = areas.iter().map(|s| s.ln()).collect();
    let (slope, _) = least_squares_line(&xs, &ys)?;
    Ok(2.0 - slope)
}

/// Triangular prism fractal dimension over `schedule` (α = 1).
pub fn fractal_dimension(img: &GrayImage, schedule: &ScaleSchedule) -> Result<f64> {
    if schedule.len() < 2 {
        return Err(Error::Fit(format!(
            "dimension fit needs at least 2 scales, got {}",
            schedule.len()
        )));
    }
    schedule.validate_for(img)?;
    let areas: Vec<f64> = schedule
        .scales()
        .iter()
        .map(|&eps| weighted_area_sum(img, eps, 1.0))
        .collect::<Result<_>>()?;
    let scales: Vec<f64> = schedule.scales().iter().map(|&e| e as f64).collect();
    dimension_from_areas(&scales, &areas)
}
