use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::affine::{affine_transform, rotate, AffineMatrix};
use super::blur::{blur, BlurFilter};
use super::image::Image;
use super::point::{adjust_brightness, adjust_contrast};
use super::weather::{add_fog, add_rain};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Translation,
    Scale,
    Shear,
    Rotation,
    Contrast,
    Brightness,
    Blur,
    Fog,
    Rain,
}

impl TransformKind {
    pub const ALL: [TransformKind; 9] = [
        TransformKind::Translation,
        TransformKind::Scale,
        TransformKind::Shear,
        TransformKind::Rotation,
        TransformKind::Contrast,
        TransformKind::Brightness,
        TransformKind::Blur,
        TransformKind::Fog,
        TransformKind::Rain,
    ];

    /// The seven single-step transformations used for coverage studies.
    pub const SIMPLE: [TransformKind; 7] = [
        TransformKind::Translation,
        TransformKind::Scale,
        TransformKind::Shear,
        TransformKind::Rotation,
        TransformKind::Contrast,
        TransformKind::Brightness,
        TransformKind::Blur,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Translation => "translation",
            TransformKind::Scale => "scale",
            TransformKind::Shear => "shear",
            TransformKind::Rotation => "rotation",
            TransformKind::Contrast => "contrast",
            TransformKind::Brightness => "brightness",
            TransformKind::Blur => "blur",
            TransformKind::Fog => "fog",
            TransformKind::Rain => "rain",
        }
    }

    pub fn is_composite(self) -> bool {
        matches!(self, TransformKind::Fog | TransformKind::Rain)
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TransformKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Param(format!("unknown transformation {s:?}")))
    }
}

/// One transformation with concrete parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformSpec {
    Translation { tx: f64, ty: f64 },
    Scale { sx: f64, sy: f64 },
    Shear { sx: f64, sy: f64 },
    Rotation { degrees: f64 },
    Contrast { alpha: f64 },
    Brightness { beta: f64 },
    Blur(BlurFilter),
    Fog { seed: u64, intensity: f64 },
    Rain { seed: u64, intensity: f64 },
}

impl TransformSpec {
    pub fn kind(&self) -> TransformKind {
        match self {
            TransformSpec::Translation { .. } => TransformKind::Translation,
            TransformSpec::Scale { .. } => TransformKind::Scale,
            TransformSpec::Shear { .. } => TransformKind::Shear,
            TransformSpec::Rotation { .. } => TransformKind::Rotation,
            TransformSpec::Contrast { .. } => TransformKind::Contrast,
            TransformSpec::Brightness { .. } => TransformKind::Brightness,
            TransformSpec::Blur(_) => TransformKind::Blur,
            TransformSpec::Fog { .. } => TransformKind::Fog,
            TransformSpec::Rain { .. } => TransformKind::Rain,
        }
    }

    /// Parameters that leave every image unchanged.
    pub fn identity(kind: TransformKind) -> Self {
        match kind {
            TransformKind::Translation => TransformSpec::Translation { tx: 0.0, ty: 0.0 },
            TransformKind::Scale => TransformSpec::Scale { sx: 1.0, sy: 1.0 },
            TransformKind::Shear => TransformSpec::Shear { sx: 0.0, sy: 0.0 },
            TransformKind::Rotation => TransformSpec::Rotation { degrees: 0.0 },
            TransformKind::Contrast => TransformSpec::Contrast { alpha: 1.0 },
            TransformKind::Brightness => TransformSpec::Brightness { beta: 0.0 },
            TransformKind::Blur => TransformSpec::Blur(BlurFilter::Averaging { ksize: 1 }),
            TransformKind::Fog => TransformSpec::Fog {
                seed: 0,
                intensity: 0.0,
            },
            TransformKind::Rain => TransformSpec::Rain {
                seed: 0,
                intensity: 0.0,
            },
        }
    }

    /// The 2×3 matrix for the affine kinds, `None` otherwise. Rotation is
    /// about the centre of an `height × width` image.
    pub fn affine_matrix(&self, height: usize, width: usize) -> Option<AffineMatrix> {
        match *self {
            TransformSpec::Translation { tx, ty } => Some(AffineMatrix::translation(tx, ty)),
            TransformSpec::Scale { sx, sy } => Some(AffineMatrix::scale(sx, sy)),
            TransformSpec::Shear { sx, sy } => Some(AffineMatrix::shear(sx, sy)),
            TransformSpec::Rotation { degrees } => Some(AffineMatrix::rotation_about(
                degrees,
                (width as f64 - 1.0) / 2.0,
                (height as f64 - 1.0) / 2.0,
            )),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |vals: &[f64]| {
            if vals.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(Error::Param(format!("{self}: parameters must be finite")))
            }
        };
        match *self {
            TransformSpec::Translation { tx, ty } => finite(&[tx, ty]),
            TransformSpec::Scale { sx, sy } => {
                finite(&[sx, sy])?;
                if sx <= 0.0 || sy <= 0.0 {
                    return Err(Error::Param(format!("{self}: scale factors must be positive")));
                }
                Ok(())
            }
            TransformSpec::Shear { sx, sy } => {
                finite(&[sx, sy])?;
                AffineMatrix::shear(sx, sy).inverse().map(|_| ())
            }
            TransformSpec::Rotation { degrees } => finite(&[degrees]),
            TransformSpec::Contrast { alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::Param(format!("{self}: gain must be positive")));
                }
                Ok(())
            }
            TransformSpec::Brightness { beta } => finite(&[beta]),
            TransformSpec::Blur(f) => f.validate(),
            TransformSpec::Fog { intensity, .. } | TransformSpec::Rain { intensity, .. } => {
                if !(0.0..=1.0).contains(&intensity) {
                    return Err(Error::Param(format!("{self}: intensity outside [0, 1]")));
                }
                Ok(())
            }
        }
    }
}

/// Applies one transformation. Never mutates `img`.
pub fn apply(img: &Image, spec: &TransformSpec) -> Result<Image> {
    spec.validate()?;
    match *spec {
        TransformSpec::Brightness { beta } => Ok(adjust_brightness(img, beta)),
        TransformSpec::Contrast { alpha } => adjust_contrast(img, alpha),
        TransformSpec::Rotation { degrees } => rotate(img, degrees),
        TransformSpec::Translation { .. } | TransformSpec::Scale { .. } | TransformSpec::Shear { .. } => {
            let m = spec
                .affine_matrix(img.height(), img.width())
                .expect("affine kind");
            affine_transform(img, &m)
        }
        TransformSpec::Blur(ref f) => blur(img, f),
        TransformSpec::Fog { seed, intensity } => add_fog(img, seed, intensity),
        TransformSpec::Rain { seed, intensity } => add_rain(img, seed, intensity),
    }
}

/// Applies a chain of transformations left to right.
pub fn apply_chain(img: &Image, chain: &[TransformSpec]) -> Result<Image> {
    let mut cur = img.clone();
    for spec in chain {
        cur = apply(&cur, spec)?;
    }
    Ok(cur)
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TransformSpec::Translation { tx, ty } => write!(f, "translation:{tx},{ty}"),
            TransformSpec::Scale { sx, sy } => write!(f, "scale:{sx},{sy}"),
            TransformSpec::Shear { sx, sy } => write!(f, "shear:{sx},{sy}"),
            TransformSpec::Rotation { degrees } => write!(f, "rotation:{degrees}"),
            TransformSpec::Contrast { alpha } => write!(f, "contrast:{alpha}"),
            TransformSpec::Brightness { beta } => write!(f, "brightness:{beta}"),
            TransformSpec::Blur(BlurFilter::Averaging { ksize }) => write!(f, "blur:averaging:{ksize}"),
            TransformSpec::Blur(BlurFilter::Gaussian { ksize }) => write!(f, "blur:gaussian:{ksize}"),
            TransformSpec::Blur(BlurFilter::Median { ksize }) => write!(f, "blur:median:{ksize}"),
            TransformSpec::Blur(BlurFilter::Bilateral {
                diameter,
                sigma_color,
                sigma_space,
            }) => write!(f, "blur:bilateral:{diameter},{sigma_color},{sigma_space}"),
            TransformSpec::Fog { seed, intensity } => write!(f, "fog:{seed},{intensity}"),
            TransformSpec::Rain { seed, intensity } => write!(f, "rain:{seed},{intensity}"),
        }
    }
}

/// Parses the `Display` form, e.g. `rotation:6`, `translation:10,10`,
/// `blur:bilateral:9,75,75`, `fog:3,0.5`.
impl FromStr for TransformSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Param(format!("cannot parse transformation {s:?}"));
        let (kind, rest) = s.trim().split_once(':').ok_or_else(bad)?;
        let nums = |text: &str| -> Result<Vec<f64>> {
            text.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
                .collect()
        };
        let pair = |text: &str| -> Result<(f64, f64)> {
            match nums(text)?.as_slice() {
                [a, b] => Ok((*a, *b)),
                _ => Err(bad()),
            }
        };
        let single = |text: &str| -> Result<f64> {
            match nums(text)?.as_slice() {
                [a] => Ok(*a),
                _ => Err(bad()),
            }
        };
        let size = |text: &str| -> Result<usize> { text.trim().parse().map_err(|_| bad()) };
        let weather = |text: &str| -> Result<(u64, f64)> {
            let (seed, intensity) = text.split_once(',').ok_or_else(bad)?;
            Ok((
                seed.trim().parse().map_err(|_| bad())?,
                intensity.trim().parse().map_err(|_| bad())?,
            ))
        };
        let spec = match kind.trim() {
            "translation" => {
                let (tx, ty) = pair(rest)?;
                TransformSpec::Translation { tx, ty }
            }
            "scale" => {
                let (sx, sy) = pair(rest)?;
                TransformSpec::Scale { sx, sy }
            }
            "shear" => {
                let (sx, sy) = pair(rest)?;
                TransformSpec::Shear { sx, sy }
            }
            "rotation" => TransformSpec::Rotation {
                degrees: single(rest)?,
            },
            "contrast" => TransformSpec::Contrast {
                alpha: single(rest)?,
            },
            "brightness" => TransformSpec::Brightness {
                beta: single(rest)?,
            },
            "blur" => {
                let (filter, params) = rest.split_once(':').ok_or_else(bad)?;
                TransformSpec::Blur(match filter.trim() {
                    "averaging" | "avg" => BlurFilter::Averaging {
                        ksize: size(params)?,
                    },
                    "gaussian" | "gauss" => BlurFilter::Gaussian {
                        ksize: size(params)?,
                    },
                    "median" => BlurFilter::Median {
                        ksize: size(params)?,
                    },
                    "bilateral" => {
                        let (d, rest) = params.split_once(',').ok_or_else(bad)?;
                        let (sigma_color, sigma_space) = pair(rest)?;
                        BlurFilter::Bilateral {
                            diameter: size(d)?,
                            sigma_color,
                            sigma_space,
                        }
                    }
                    _ => return Err(bad()),
                })
            }
            "fog" => {
                let (seed, intensity) = weather(rest)?;
                TransformSpec::Fog { seed, intensity }
            }
            "rain" => {
                let (seed, intensity) = weather(rest)?;
                TransformSpec::Rain { seed, intensity }
            }
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Default parameter values per transformation kind.
///
/// Affine and linear kinds have ten steps each. Blur lists eleven filters
/// with Gaussian sizes `3, 5, 7, 3`, keeping the repeated `3×3`. Fog and
/// rain sweep intensity `0.1 … 1.0`, with noise seed equal to the step index.
pub fn default_grid(kind: TransformKind) -> Vec<TransformSpec> {
    let steps = 1..=10u32;
    match kind {
        TransformKind::Translation => steps
            .map(|k| {
                let t = 10.0 * k as f64;
                TransformSpec::Translation { tx: t, ty: t }
            })
            .collect(),
        TransformKind::Scale => steps
            .map(|k| {
                let s = (k as f64 + 2.0) / 2.0;
                TransformSpec::Scale { sx: s, sy: s }
            })
            .collect(),
        TransformKind::Shear => (1..=10u32)
            .rev()
            .map(|k| TransformSpec::Shear {
                sx: -(k as f64) / 10.0,
                sy: 0.0,
            })
            .collect(),
        TransformKind::Rotation => steps
            .map(|k| TransformSpec::Rotation {
                degrees: 3.0 * k as f64,
            })
            .collect(),
        TransformKind::Contrast => steps
            .map(|k| TransformSpec::Contrast {
                alpha: (10.0 + 2.0 * k as f64) / 10.0,
            })
            .collect(),
        TransformKind::Brightness => steps
            .map(|k| TransformSpec::Brightness {
                beta: 10.0 * k as f64,
            })
            .collect(),
        TransformKind::Blur => {
            let mut grid: Vec<TransformSpec> = [3, 4, 5, 6]
                .into_iter()
                .map(|ksize| TransformSpec::Blur(BlurFilter::Averaging { ksize }))
                .collect();
            grid.extend(
                [3, 5, 7, 3]
                    .into_iter()
                    .map(|ksize| TransformSpec::Blur(BlurFilter::Gaussian { ksize })),
            );
            grid.extend(
                [3, 5]
                    .into_iter()
                    .map(|ksize| TransformSpec::Blur(BlurFilter::Median { ksize })),
            );
            grid.push(TransformSpec::Blur(BlurFilter::Bilateral {
                diameter: 9,
                sigma_color: 75.0,
                sigma_space: 75.0,
            }));
            grid
        }
        TransformKind::Fog => steps
            .map(|k| TransformSpec::Fog {
                seed: k as u64,
                intensity: k as f64 / 10.0,
            })
            .collect(),
        TransformKind::Rain => steps
            .map(|k| TransformSpec::Rain {
                seed: k as u64,
                intensity: k as f64 / 10.0,
            })
            .collect(),
    }
}

/// Drops exact duplicates while keeping first-seen order.
pub fn dedup_specs(specs: &[TransformSpec]) -> Vec<TransformSpec> {
    let mut out: Vec<TransformSpec> = Vec::with_capacity(specs.len());
    for s in specs {
        if !out.contains(s) {
            out.push(*s);
        }
    }
    out
}
