//! Procedural fog and rain.
//!
//! Both effects are deterministic functions of `(image, seed, intensity)`.
//!
//! Fog blends every pixel toward white by `α = intensity · (0.5 + 0.5·m)`,
//! where `m ∈ [0, 1]` is value noise: a lattice of uniform values with one
//! node every `cell = max(2, max(h, w) / 4)` pixels, interpolated bilinearly.
//! Node `(gx, gy)` takes `mix64(seed + mix64(gy << 32 | gx)) / 2^64`.
//!
//! Rain darkens the scene by `1 − 0.2·intensity`, draws
//! `round(intensity · h · w / 12)` slanted streaks blended at 60 % toward
//! gray level 210, then applies a vertical 3-tap box blur. Streaks are drawn
//! from a single [`SplitMix64`] stream, so a higher intensity draws a
//! superset of the streaks of a lower one.

use super::image::Image;
use super::point::quantize;
use crate::error::{Error, Result};
use crate::rng::{mix64, SplitMix64};

const RAIN_SALT: u64 = 0x5241_494E_5354_524B;
const STREAK_LEVEL: f64 = 210.0;
const STREAK_ALPHA: f64 = 0.6;

fn check_intensity(intensity: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&intensity) {
        return Err(Error::Param(format!("intensity {intensity} outside [0, 1]")));
    }
    Ok(())
}

fn lattice(seed: u64, gx: u64, gy: u64) -> f64 {
    let h = mix64(seed.wrapping_add(mix64((gy << 32) | gx)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Smooth noise in `[0, 1]` for every pixel, row-major.
pub fn value_noise(height: usize, width: usize, seed: u64) -> Vec<f64> {
    let cell = (height.max(width) / 4).max(2) as f64;
    let mut out = Vec::with_capacity(height * width);
    for y in 0..height {
        let v = y as f64 / cell;
        let gy = v.floor();
        let fy = v - gy;
        for x in 0..width {
            let u = x as f64 / cell;
            let gx = u.floor();
            let fx = u - gx;
            let (gx, gy) = (gx as u64, gy as u64);
            let top = lattice(seed, gx, gy) * (1.0 - fx) + lattice(seed, gx + 1, gy) * fx;
            let bottom = lattice(seed, gx, gy + 1) * (1.0 - fx) + lattice(seed, gx + 1, gy + 1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

pub fn add_fog(img: &Image, seed: u64, intensity: f64) -> Result<Image> {
    check_intensity(intensity)?;
    let noise = value_noise(img.height(), img.width(), seed);
    let ch = img.channels();
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let alpha = intensity * (0.5 + 0.5 * noise[i / ch]);
            quantize(v as f64 + alpha * (255.0 - v as f64))
        })
        .collect();
    Ok(img.with_data(data))
}

/// Binary streak mask for the given rain parameters, row-major.
pub fn rain_mask(height: usize, width: usize, seed: u64, intensity: f64) -> Vec<bool> {
    let mut rng = SplitMix64::new(seed ^ RAIN_SALT);
    let slant = rng.uniform(-0.35, 0.35);
    let count = (intensity * (height * width) as f64 / 12.0).round() as usize;
    let max_len = (height / 6).max(1);
    let mut mask = vec![false; height * width];
    for _ in 0..count {
        let x0 = rng.uniform(0.0, width as f64);
        let y0 = rng.below(height);
        let len = 2 + rng.below(max_len);
        for step in 0..len {
            let y = y0 + step;
            let x = (x0 + slant * step as f64).floor();
            if y >= height || x < 0.0 || x >= width as f64 {
                break;
            }
            mask[y * width + x as usize] = true;
        }
    }
    mask
}

pub fn add_rain(img: &Image, seed: u64, intensity: f64) -> Result<Image> {
    check_intensity(intensity)?;
    if intensity == 0.0 {
        return Ok(img.clone());
    }
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let mask = rain_mask(h, w, seed, intensity);
    let dim = 1.0 - 0.2 * intensity;
    let composite: Vec<f64> = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let base = v as f64 * dim;
            if mask[i / ch] {
                base + STREAK_ALPHA * (STREAK_LEVEL - base)
            } else {
                base
            }
        })
        .collect();
    let mut out = Vec::with_capacity(composite.len());
    for y in 0..h {
        let up = y.saturating_sub(1);
        let down = (y + 1).min(h - 1);
        for x in 0..w {
            for c in 0..ch {
                let at = |yy: usize| composite[(yy * w + x) * ch + c];
                out.push(quantize((at(up) + at(y) + at(down)) / 3.0));
            }
        }
    }
    Ok(img.with_data(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> Image {
        Image::new(20, 24, 3, (0..20 * 24 * 3).map(|i| (i * 31 % 200) as u8).collect()).unwrap()
    }

    #[test]
    fn zero_intensity_is_identity() {
        let img = scene();
        assert_eq!(add_fog(&img, 3, 0.0).unwrap(), img);
        assert_eq!(add_rain(&img, 3, 0.0).unwrap(), img);
    }

    #[test]
    fn deterministic() {
        let img = scene();
        assert_eq!(add_fog(&img, 9, 0.7).unwrap(), add_fog(&img, 9, 0.7).unwrap());
        assert_eq!(add_rain(&img, 9, 0.7).unwrap(), add_rain(&img, 9, 0.7).unwrap());
        assert_ne!(add_rain(&img, 9, 0.7).unwrap(), add_rain(&img, 10, 0.7).unwrap());
    }

    #[test]
    fn full_fog_brightens() {
        let img = scene();
        assert!(add_fog(&img, 1, 1.0).unwrap().mean() > img.mean());
    }

    #[test]
    fn noise_in_unit_range() {
        let n = value_noise(17, 33, 5);
        assert!(n.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn streaks_nest_with_intensity() {
        let lo = rain_mask(30, 40, 4, 0.3);
        let hi = rain_mask(30, 40, 4, 0.9);
        assert!(lo.iter().zip(&hi).all(|(&a, &b)| !a || b));
        assert!(hi.iter().filter(|&&m| m).count() > lo.iter().filter(|&&m| m).count());
    }

    #[test]
    fn intensity_range_enforced() {
        let img = scene();
        assert!(add_fog(&img, 1, 1.5).is_err());
        assert!(add_rain(&img, 1, -0.1).is_err());
    }
}
