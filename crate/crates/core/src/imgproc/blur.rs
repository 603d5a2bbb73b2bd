//! Smoothing filters, applied per channel with replicate borders.

use serde::{Deserialize, Serialize};

use super::image::Image;
use super::point::quantize;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "filter", rename_all = "snake_case")]
pub enum BlurFilter {
    /// Box filter of `ksize × ksize`; even sizes anchor at `floor(ksize / 2)`.
    Averaging { ksize: usize },
    /// Odd `ksize`; sigma follows `0.3·((ksize − 1)/2 − 1) + 0.8`.
    Gaussian { ksize: usize },
    /// Odd aperture.
    Median { ksize: usize },
    /// Odd diameter; taps within `diameter / 2` of the centre.
    Bilateral {
        diameter: usize,
        sigma_color: f64,
        sigma_space: f64,
    },
}

impl BlurFilter {
    pub fn validate(&self) -> Result<()> {
        let odd = |k: usize, what: &str| {
            if k == 0 || k.is_multiple_of(2) {
                Err(Error::Param(format!("{what} size {k} must be odd and ≥ 1")))
            } else {
                Ok(())
            }
        };
        match *self {
            BlurFilter::Averaging { ksize } => {
                if ksize == 0 {
                    return Err(Error::Param("averaging kernel size must be ≥ 1".into()));
                }
                Ok(())
            }
            BlurFilter::Gaussian { ksize } => odd(ksize, "gaussian kernel"),
            BlurFilter::Median { ksize } => odd(ksize, "median aperture"),
            BlurFilter::Bilateral {
                diameter,
                sigma_color,
                sigma_space,
            } => {
                odd(diameter, "bilateral diameter")?;
                if !(sigma_color > 0.0 && sigma_space > 0.0) {
                    return Err(Error::Param("bilateral sigmas must be positive".into()));
                }
                Ok(())
            }
        }
    }
}

pub fn blur(img: &Image, filter: &BlurFilter) -> Result<Image> {
    filter.validate()?;
    Ok(match *filter {
        BlurFilter::Averaging { ksize } => {
            let w = vec![1.0 / ksize as f64; ksize];
            separable(img, &w, ksize / 2)
        }
        BlurFilter::Gaussian { ksize } => {
            let w = gaussian_kernel(ksize, gaussian_sigma(ksize));
            separable(img, &w, ksize / 2)
        }
        BlurFilter::Median { ksize } => median(img, ksize),
        BlurFilter::Bilateral {
            diameter,
            sigma_color,
            sigma_space,
        } => bilateral(img, diameter, sigma_color, sigma_space),
    })
}

pub fn gaussian_sigma(ksize: usize) -> f64 {
    0.3 * ((ksize as f64 - 1.0) * 0.5 - 1.0) + 0.8
}

/// Normalized 1-D Gaussian weights; the 2-D kernel is their outer product.
pub fn gaussian_kernel(ksize: usize, sigma: f64) -> Vec<f64> {
    let c = (ksize / 2) as f64;
    let raw: Vec<f64> = (0..ksize)
        .map(|i| {
            let d = i as f64 - c;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Horizontal then vertical pass in `f64`, quantized once at the end.
fn separable(img: &Image, weights: &[f64], anchor: usize) -> Image {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let src = img.data();
    let mut tmp = vec![0.0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (k, wk) in weights.iter().enumerate() {
                    let xi = clamp_index(x as isize + k as isize - anchor as isize, w);
                    acc += wk * src[(y * w + xi) * ch + c] as f64;
                }
                tmp[(y * w + x) * ch + c] = acc;
            }
        }
    }
    let mut out = vec![0u8; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (k, wk) in weights.iter().enumerate() {
                    let yi = clamp_index(y as isize + k as isize - anchor as isize, h);
                    acc += wk * tmp[(yi * w + x) * ch + c];
                }
                out[(y * w + x) * ch + c] = quantize(acc);
            }
        }
    }
    img.with_data(out)
}

fn median(img: &Image, ksize: usize) -> Image {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let r = (ksize / 2) as isize;
    let mut window = Vec::with_capacity(ksize * ksize);
    let mut out = Vec::with_capacity(img.data().len());
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                window.clear();
                for dy in -r..=r {
                    let yi = clamp_index(y as isize + dy, h);
                    for dx in -r..=r {
                        let xi = clamp_index(x as isize + dx, w);
                        window.push(img.get(yi, xi, c));
                    }
                }
                let mid = window.len() / 2;
                let (_, m, _) = window.select_nth_unstable(mid);
                out.push(*m);
            }
        }
    }
    img.with_data(out)
}

fn bilateral(img: &Image, diameter: usize, sigma_color: f64, sigma_space: f64) -> Image {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let r = (diameter / 2) as isize;
    let color_lut: Vec<f64> = (0..256)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma_color * sigma_color)).exp())
        .collect();
    let taps: Vec<(isize, isize, f64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dy, dx)))
        .filter(|&(dy, dx)| dy * dy + dx * dx <= r * r)
        .map(|(dy, dx)| {
            let d2 = (dy * dy + dx * dx) as f64;
            (dy, dx, (-d2 / (2.0 * sigma_space * sigma_space)).exp())
        })
        .collect();
    let mut out = Vec::with_capacity(img.data().len());
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let center = img.get(y, x, c);
                let (mut num, mut den) = (0.0, 0.0);
                for &(dy, dx, ws) in &taps {
                    let v = img.get(
                        clamp_index(y as isize + dy, h),
                        clamp_index(x as isize + dx, w),
                        c,
                    );
                    let wgt = ws * color_lut[center.abs_diff(v) as usize];
                    num += wgt * v as f64;
                    den += wgt;
                }
                out.push(quantize(num / den));
            }
        }
    }
    img.with_data(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filters() -> Vec<BlurFilter> {
        vec![
            BlurFilter::Averaging { ksize: 3 },
            BlurFilter::Averaging { ksize: 4 },
            BlurFilter::Averaging { ksize: 6 },
            BlurFilter::Gaussian { ksize: 7 },
            BlurFilter::Median { ksize: 5 },
            BlurFilter::Bilateral {
                diameter: 9,
                sigma_color: 75.0,
                sigma_space: 75.0,
            },
        ]
    }

    #[test]
    fn constant_image_is_fixpoint() {
        let img = Image::filled(7, 5, 3, 137).unwrap();
        for f in filters() {
            assert_eq!(blur(&img, &f).unwrap(), img, "{f:?}");
        }
    }

    #[test]
    fn median_of_zero_to_eight() {
        let img = Image::new(3, 3, 1, vec![8, 3, 5, 0, 7, 1, 6, 2, 4]).unwrap();
        let out = blur(&img, &BlurFilter::Median { ksize: 3 }).unwrap();
        assert_eq!(out.get(1, 1, 0), 4);
    }

    #[test]
    fn kernel_size_validation() {
        let img = Image::filled(3, 3, 1, 0).unwrap();
        assert!(blur(&img, &BlurFilter::Averaging { ksize: 0 }).is_err());
        assert!(blur(&img, &BlurFilter::Gaussian { ksize: 4 }).is_err());
        assert!(blur(&img, &BlurFilter::Median { ksize: 2 }).is_err());
        assert!(blur(
            &img,
            &BlurFilter::Bilateral {
                diameter: 9,
                sigma_color: 0.0,
                sigma_space: 1.0
            }
        )
        .is_err());
    }

    #[test]
    fn gaussian_weights_sum_to_one() {
        for k in [1, 3, 5, 7, 9] {
            let g = gaussian_kernel(k, gaussian_sigma(k));
            let total: f64 = g.iter().flat_map(|a| g.iter().map(move |b| a * b)).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn size_one_kernels_are_identity() {
        let img = Image::new(2, 3, 3, (0..18).map(|v| v * 13).collect()).unwrap();
        for f in [
            BlurFilter::Averaging { ksize: 1 },
            BlurFilter::Gaussian { ksize: 1 },
            BlurFilter::Median { ksize: 1 },
            BlurFilter::Bilateral {
                diameter: 1,
                sigma_color: 75.0,
                sigma_space: 75.0,
            },
        ] {
            assert_eq!(blur(&img, &f).unwrap(), img, "{f:?}");
        }
    }

    #[test]
    fn even_box_anchor() {
        // ksize 2 anchors at 1: output[x] = mean(input[x-1], input[x]).
        let img = Image::new(1, 3, 1, vec![0, 100, 200]).unwrap();
        let out = blur(&img, &BlurFilter::Averaging { ksize: 2 }).unwrap();
        // Vertical pass sees the single replicated row.
        assert_eq!(out.data(), &[0, 50, 150]);
    }
}
