use super::{ConfusionMatrix, PrCurve};
use crate::error::Result;
use crate::image::GrayImage;

/// Header `true\pred,<classes…>`, one row per true class.
pub fn confusion_csv(m: &ConfusionMatrix) -> String {
    let mut out = String::from("true\\pred");
    for c in &m.classes {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (name, row) in m.classes.iter().zip(&m.counts) {
        out.push_str(name);
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Square heatmap, `cell` pixels per entry; darker means a larger count.
pub fn confusion_heatmap(m: &ConfusionMatrix, cell: usize) -> Result<GrayImage> {
    let n = m.classes.len().max(1);
    let cell = cell.max(1);
    let side = (n * cell).max(2);
    let peak = m.counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    GrayImage::from_fn(side, side, |r, c| {
        let (i, j) = (r / cell, c / cell);
        let v = m
            .counts
            .get(i)
            .and_then(|row| row.get(j))
            .copied()
            .unwrap_or(0);
        255.0 * (1.0 - v as f64 / peak)
    })
}

/// Long format `curve,recall,precision`.
pub fn pr_curves_csv(curves: &[PrCurve]) -> String {
    let mut out = String::from("curve,recall,precision\n");
    for (k, c) in curves.iter().enumerate() {
        let name = c.class_id.clone().unwrap_or_else(|| k.to_string());
        for (r, p) in &c.points {
            out.push_str(&format!("{name},{r},{p}\n"));
        }
    }
    out
}
