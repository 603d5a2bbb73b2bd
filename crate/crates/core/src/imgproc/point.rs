//! Pointwise (linear) intensity transformations.

use super::image::Image;
use crate::error::{Error, Result};

/// Round half away from zero, then clamp to `[0, 255]`.
#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Adds `beta` to every channel value.
pub fn adjust_brightness(img: &Image, beta: f64) -> Image {
    img.with_data(img.data().iter().map(|&v| quantize(v as f64 + beta)).collect())
}

/// Multiplies every channel value by `alpha > 0`.
pub fn adjust_contrast(img: &Image, alpha: f64) -> Result<Image> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Param(format!("contrast gain {alpha} must be positive")));
    }
    Ok(img.with_data(img.data().iter().map(|&v| quantize(v as f64 * alpha)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn px(v: u8) -> Image {
        Image::filled(1, 1, 1, v).unwrap()
    }

    #[test]
    fn brightness_examples() {
        let img = Image::new(1, 3, 1, vec![0, 100, 200]).unwrap();
        assert_eq!(adjust_brightness(&img, 0.0), img);
        assert_eq!(adjust_brightness(&px(200), 100.0).data(), &[255]);
        assert_eq!(adjust_brightness(&px(20), -50.0).data(), &[0]);
    }

    #[test]
    fn contrast_examples() {
        let img = Image::new(1, 3, 1, vec![0, 100, 200]).unwrap();
        assert_eq!(adjust_contrast(&img, 1.0).unwrap(), img);
        assert_eq!(adjust_contrast(&px(100), 1.2).unwrap().data(), &[120]);
        assert_eq!(adjust_contrast(&px(150), 3.0).unwrap().data(), &[255]);
        assert!(matches!(adjust_contrast(&img, 0.0), Err(Error::Param(_))));
        assert!(matches!(adjust_contrast(&img, -1.0), Err(Error::Param(_))));
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(quantize(2.5), 3);
        assert_eq!(quantize(3.5), 4);
        assert_eq!(quantize(-0.5), 0);
        assert_eq!(quantize(254.5), 255);
    }
}
