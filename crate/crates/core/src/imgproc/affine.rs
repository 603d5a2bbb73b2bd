//! Affine warps with bilinear sampling.
//!
//! A matrix `M = [A | t]` maps a source pixel `(x, y)` (column, row; pixel
//! centres on integer coordinates) to `A·(x, y) + t`. The output keeps the
//! input size; each output pixel is pulled back through `M⁻¹` and sampled
//! bilinearly, with taps outside the image reading as black.

use serde::{Deserialize, Serialize};

use super::image::Image;
use super::point::quantize;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMatrix(pub [[f64; 3]; 2]);

impl AffineMatrix {
    pub const IDENTITY: Self = Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self([[1.0, 0.0, tx], [0.0, 1.0, ty]])
    }

    pub fn scale(sx: f64, sy: f64) -> Self {
        Self([[sx, 0.0, 0.0], [0.0, sy, 0.0]])
    }

    pub fn shear(sx: f64, sy: f64) -> Self {
        Self([[1.0, sx, 0.0], [sy, 1.0, 0.0]])
    }

    /// `[[cos q, −sin q, 0], [sin q, cos q, 0]]`, `q` in degrees, about the origin.
    pub fn rotation(degrees: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        Self([[c, -s, 0.0], [s, c, 0.0]])
    }

    /// Rotation by `degrees` about `(cx, cy)`.
    pub fn rotation_about(degrees: f64, cx: f64, cy: f64) -> Self {
        let [[a, b, _], [c, d, _]] = Self::rotation(degrees).0;
        Self([
            [a, b, cx - (a * cx + b * cy)],
            [c, d, cy - (c * cx + d * cy)],
        ])
    }

    pub fn determinant(&self) -> f64 {
        let [[a, b, _], [c, d, _]] = self.0;
        a * d - b * c
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let [[a, b, tx], [c, d, ty]] = self.0;
        (a * x + b * y + tx, c * x + d * y + ty)
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.determinant();
        if !self.is_finite() || det == 0.0 || !det.is_finite() || det.abs() < 1e-12 {
            return Err(Error::Param(format!(
                "affine matrix {:?} is not invertible",
                self.0
            )));
        }
        let [[a, b, tx], [c, d, ty]] = self.0;
        let (ia, ib, ic, id) = (d / det, -b / det, -c / det, a / det);
        Ok(Self([
            [ia, ib, -(ia * tx + ib * ty)],
            [ic, id, -(ic * tx + id * ty)],
        ]))
    }
}

/// Bilinear sample at `(x, y)` in channel `c`; taps outside the image are 0.
fn sample(img: &Image, x: f64, y: f64, c: usize) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let tap = |xi: i64, yi: i64| -> f64 {
        if xi < 0 || yi < 0 || xi >= w || yi >= h {
            0.0
        } else {
            img.get(yi as usize, xi as usize, c) as f64
        }
    };
    let (xi, yi) = (x0 as i64, y0 as i64);
    let mut v = 0.0;
    for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
        if wy == 0.0 {
            continue;
        }
        for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
            if wx == 0.0 {
                continue;
            }
            v += wy * wx * tap(xi + dx, yi + dy);
        }
    }
    v
}

pub fn affine_transform(img: &Image, m: &AffineMatrix) -> Result<Image> {
    let inv = m.inverse()?;
    let ch = img.channels();
    let mut out = Vec::with_capacity(img.data().len());
    for y in 0..img.height() {
        for x in 0..img.width() {
            let (sx, sy) = inv.apply(x as f64, y as f64);
            for c in 0..ch {
                out.push(quantize(sample(img, sx, sy, c)));
            }
        }
    }
    Ok(img.with_data(out))
}

/// Rotation about the image centre `((w − 1) / 2, (h − 1) / 2)`.
pub fn rotate(img: &Image, degrees: f64) -> Result<Image> {
    let cx = (img.width() as f64 - 1.0) / 2.0;
    let cy = (img.height() as f64 - 1.0) / 2.0;
    affine_transform(img, &AffineMatrix::rotation_about(degrees, cx, cy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Image {
        Image::new(h, w, 1, (0..h * w).map(|i| (i * 7 % 250 + 1) as u8).collect()).unwrap()
    }

    #[test]
    fn identity_is_bit_exact() {
        let img = ramp(9, 11);
        assert_eq!(affine_transform(&img, &AffineMatrix::IDENTITY).unwrap(), img);
        assert_eq!(rotate(&img, 0.0).unwrap(), img);
    }

    #[test]
    fn translation_shifts_and_blackens() {
        let img = ramp(30, 30);
        let out = affine_transform(&img, &AffineMatrix::translation(10.0, 10.0)).unwrap();
        for y in 0..30 {
            for x in 0..30 {
                let v = out.get(y, x, 0);
                if x < 10 || y < 10 {
                    assert_eq!(v, 0);
                } else {
                    assert_eq!(v, img.get(y - 10, x - 10, 0));
                }
            }
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        let img = ramp(4, 4);
        assert!(matches!(
            affine_transform(&img, &AffineMatrix::scale(0.0, 1.0)),
            Err(Error::Param(_))
        ));
        assert!(matches!(
            affine_transform(&img, &AffineMatrix::shear(1.0, 1.0)),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn inverse_roundtrip() {
        let m = AffineMatrix::rotation_about(17.0, 3.5, 2.0);
        let inv = m.inverse().unwrap();
        let (x, y) = m.apply(1.25, -4.0);
        let (bx, by) = inv.apply(x, y);
        assert!((bx - 1.25).abs() < 1e-12 && (by + 4.0).abs() < 1e-12);
    }

    #[test]
    fn half_pixel_shift_averages_neighbours() {
        let img = Image::new(1, 2, 1, vec![100, 200]).unwrap();
        let out = affine_transform(&img, &AffineMatrix::translation(0.5, 0.0)).unwrap();
        // x=0 samples -0.5: half black, half 100. x=1 samples 0.5.
        assert_eq!(out.data(), &[50, 150]);
    }
}
