//! Geometry of a single prism cell.
//!
//! Corner heights run around the cell as `a = I(i, j)`, `b = I(i+ε, j)`,
//! `c = I(i+ε, j+ε)`, `d = I(i, j+ε)`, and the apex sits over the cell center
//! at height `e = (a+b+c+d)/4`. Face `k` is the triangle spanned by corners
//! `k` and `k+1` (mod 4) and the apex, so its sides are the boundary edge
//! `edges[k]` and the spokes `spokes[k]`, `spokes[k+1]`.

use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub scale: f64,
    /// `[a, b, c, d]`.
    pub corners: [f64; 4],
    /// `e`, the mean corner height.
    pub apex: f64,
    /// Boundary edges `[w, x, y, z]`: a–b, b–c, c–d, d–a.
    pub edges: [f64; 4],
    /// Corner-to-apex spokes `[o, p, q, r]` from a, b, c, d.
    pub spokes: [f64; 4],
    pub semi_perimeters: [f64; 4],
    /// Face areas `[A, B, C, D]`.
    pub faces: [f64; 4],
}

impl CellGeometry {
    #[inline]
    pub fn from_corners(a: f64, b: f64, c: f64, d: f64, eps: f64) -> Self {
        let corners = [a, b, c, d];
        let apex = (a + b + c + d) / 4.0;
        let eps2 = eps * eps;
        // horizontal offset from a corner to the cell center is ε/√2, squared ε²/2
        let half_diag2 = 0.5 * eps2;
        let mut edges = [0.0; 4];
        let mut spokes = [0.0; 4];
        for k in 0..4 {
            let dh = corners[(k + 1) % 4] - corners[k];
            edges[k] = (dh * dh + eps2).sqrt();
            let dz = corners[k] - apex;
            spokes[k] = (dz * dz + half_diag2).sqrt();
        }
        let mut semi_perimeters = [0.0; 4];
        let mut faces = [0.0; 4];
        for k in 0..4 {
            let (e0, s0, s1) = (edges[k], spokes[k], spokes[(k + 1) % 4]);
            let s = 0.5 * (e0 + s0 + s1);
            semi_perimeters[k] = s;
            faces[k] = heron(e0, s0, s1);
        }
        Self {
            scale: eps,
            corners,
            apex,
            edges,
            spokes,
            semi_perimeters,
            faces,
        }
    }

    /// Prism surface area `A + B + C + D`.
    #[inline]
    pub fn area(&self) -> f64 {
        self.faces.iter().sum()
    }
}

/// Heron's formula in Kahan's ordering: sides sorted descending and grouped so
/// no subtraction cancels catastrophically. On power-of-two scales a flat
/// cell comes out at exactly ε²/4 per face. The radicand is clamped at zero
/// so needle faces cannot produce NaN from rounding.
#[inline]
fn heron(l0: f64, l1: f64, l2: f64) -> f64 {
    let mut s = [l0, l1, l2];
    if s[0] < s[1] {
        s.swap(0, 1);
    }
    if s[1] < s[2] {
        s.swap(1, 2);
    }
    if s[0] < s[1] {
        s.swap(0, 1);
    }
    let [a, b, c] = s;
    let radicand = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    0.25 * radicand.max(0.0).sqrt()
}

/// Geometry of the cell anchored at row `i`, column `j`.
pub fn cell_geometry(img: &GrayImage, i: usize, j: usize, eps: usize) -> Result<CellGeometry> {
    if eps == 0 || i + eps >= img.height() || j + eps >= img.width() {
        return Err(Error::Index(format!(
            "cell at ({i}, {j}) with scale {eps} leaves the {}x{} image",
            img.width(),
            img.height()
        )));
    }
    Ok(CellGeometry::from_corners(
        img.get(i, j),
        img.get(i + eps, j),
        img.get(i + eps, j + eps),
        img.get(i, j + eps),
        eps as f64,
    ))
}

pub fn cell_area(geom: &CellGeometry) -> f64 {
    geom.area()
}

/// Closed form of face A, `(ε/8)·√(4(a−b)² + ((a+b)−(c+d))² + 4ε²)`.
///
/// Used only as an independent check on the Heron evaluation.
pub fn face_area_closed_form(a: f64, b: f64, c: f64, d: f64, eps: f64) -> f64 {
    let ab = a - b;
    let tilt = (a + b) - (c + d);
    eps / 8.0 * (4.0 * ab * ab + tilt * tilt + 4.0 * eps * eps).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Half the norm of the cross product of two triangle sides in 3D.
    fn vector_triangle_area(p0: [f64; 3], p1: [f64; 3], p2: [f64; 3]) -> f64 {
        let u = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
        let v = [p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]];
        let cx = u[1] * v[2] - u[2] * v[1];
        let cy = u[2] * v[0] - u[0] * v[2];
        let cz = u[0] * v[1] - u[1] * v[0];
        0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
    }

    /// Face areas placed in space: a at (0,0), b at (ε,0), c at (ε,ε), d at (0,ε).
    fn vector_faces(a: f64, b: f64, c: f64, d: f64, eps: f64) -> [f64; 4] {
        let pts = [[0.0, 0.0, a], [eps, 0.0, b], [eps, eps, c], [0.0, eps, d]];
        let apex = [eps / 2.0, eps / 2.0, (a + b + c + d) / 4.0];
        std::array::from_fn(|k| vector_triangle_area(pts[k], pts[(k + 1) % 4], apex))
    }

    #[test]
    fn flat_cell_faces_are_quarter_squares() {
        for eps in [1.0, 2.0, 4.0, 7.0] {
            let g = CellGeometry::from_corners(90.0, 90.0, 90.0, 90.0, eps);
            for f in g.faces {
                assert!((f - eps * eps / 4.0).abs() < 1e-12 * eps * eps);
            }
            assert!((g.area() - eps * eps).abs() < 1e-12 * eps * eps);
        }
        let g = CellGeometry::from_corners(3.0, 3.0, 3.0, 3.0, 4.0);
        assert!((cell_area(&g) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn worked_face_example() {
        let g = CellGeometry::from_corners(10.0, 20.0, 30.0, 40.0, 2.0);
        let expected = 0.25 * 2016f64.sqrt();
        assert!((expected - 11.2250).abs() < 1e-4);
        assert!((g.faces[0] - expected).abs() < 1e-12);
        assert!((face_area_closed_form(10.0, 20.0, 30.0, 40.0, 2.0) - expected).abs() < 1e-12);
        assert_eq!(g.apex, 25.0);
    }

    #[test]
    fn worked_cell_area_matches_vector_oracle() {
        let g = CellGeometry::from_corners(10.0, 20.0, 30.0, 40.0, 2.0);
        let oracle = vector_faces(10.0, 20.0, 30.0, 40.0, 2.0);
        for (k, (f, o)) in g.faces.iter().zip(&oracle).enumerate() {
            assert!((f - o).abs() < 1e-12, "face {k}");
        }
        assert!((g.area() - oracle.iter().sum::<f64>()).abs() < 1e-11);
    }

    #[test]
    fn segments_respect_projected_bounds() {
        let g = CellGeometry::from_corners(0.0, 255.0, 12.0, 200.0, 3.0);
        for k in 0..4 {
            assert!(g.edges[k] >= 3.0);
            assert!(g.spokes[k] >= 3.0 / 2f64.sqrt());
        }
        assert_eq!(
            g.semi_perimeters[1],
            0.5 * (g.edges[1] + g.spokes[1] + g.spokes[2])
        );
    }

    #[test]
    fn corner_rotation_cycles_faces() {
        let g = CellGeometry::from_corners(10.0, 20.0, 30.0, 40.0, 2.0);
        let r = CellGeometry::from_corners(20.0, 30.0, 40.0, 10.0, 2.0);
        for k in 0..4 {
            assert!((r.faces[k] - g.faces[(k + 1) % 4]).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_bounds_cell() {
        let img = GrayImage::constant(4, 4, 1.0).unwrap();
        assert!(cell_geometry(&img, 1, 1, 2).is_ok());
        assert!(matches!(cell_geometry(&img, 2, 0, 2), Err(Error::Index(_))));
        assert!(matches!(cell_geometry(&img, 0, 0, 4), Err(Error::Index(_))));
        assert!(matches!(cell_geometry(&img, 0, 0, 0), Err(Error::Index(_))));
    }

    #[test]
    fn area_grows_with_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let h: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..255.0));
            let eps = rng.random_range(1.0..32.0);
            let small = CellGeometry::from_corners(h[0], h[1], h[2], h[3], eps).area();
            let big = CellGeometry::from_corners(h[0], h[1], h[2], h[3], 2.0 * eps).area();
            let bigger = CellGeometry::from_corners(h[0], h[1], h[2], h[3], 4.0 * eps).area();
            assert!(small < big && big < bigger);
        }
    }

    proptest! {
        #[test]
        fn heron_matches_vector_area(
            a in 0.0f64..255.0, b in 0.0f64..255.0, c in 0.0f64..255.0, d in 0.0f64..255.0,
            eps in 0.5f64..64.0,
        ) {
            let g = CellGeometry::from_corners(a, b, c, d, eps);
            let oracle = vector_faces(a, b, c, d, eps);
            for (f, o) in g.faces.iter().zip(&oracle) {
                prop_assert!((f - o).abs() <= 1e-9 * o);
            }
        }

        #[test]
        fn area_bounded_below_by_projection(
            a in 0.0f64..255.0, b in 0.0f64..255.0, c in 0.0f64..255.0, d in 0.0f64..255.0,
            eps in 1.0f64..64.0,
        ) {
            let area = CellGeometry::from_corners(a, b, c, d, eps).area();
            prop_assert!(area >= eps * eps * (1.0 - 1e-12));
            if !(a == b && b == c && c == d) {
                prop_assert!(area > eps * eps);
            }
        }
    }
}
