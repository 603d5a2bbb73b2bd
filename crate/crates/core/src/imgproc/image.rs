use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// 8-bit raster, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Param(format!("image dims {height}x{width} must be positive")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Param(format!("unsupported channel count {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::Param(format!(
                "{height}x{width}x{channels} image needs {} bytes, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Same geometry, new pixel values.
    pub(crate) fn with_data(&self, data: Vec<u8>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data,
        }
    }

    /// Mean over every channel value.
    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Network input: values scaled to `[0, 1]`, reshaped row-major to
    /// `input_shape` (which must hold exactly `h·w·c` values).
    pub fn to_tensor(&self, input_shape: &[usize]) -> Result<Tensor> {
        let n: usize = input_shape.iter().product();
        if n != self.data.len() {
            return Err(Error::Shape(format!(
                "{}x{}x{} image cannot feed input shape {input_shape:?}",
                self.height, self.width, self.channels
            )));
        }
        let data = self.data.iter().map(|&v| v as f32 / 255.0).collect();
        Tensor::new(input_shape.to_vec(), data)
    }

    /// Binary PPM (P6) for 3 channels, PGM (P5) for 1, maxval 255.
    pub fn write_pnm<W: Write>(&self, mut w: W) -> Result<()> {
        let magic = if self.channels == 3 { "P6" } else { "P5" };
        write!(w, "{magic}\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.data)?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::with_capacity(self.data.len() + 20);
        self.write_pnm(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn read_pnm<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let magic = next_token(&mut r)?;
        let channels = match magic.as_str() {
            "P6" => 3,
            "P5" => 1,
            other => return Err(Error::ImageFormat(format!("unsupported magic {other:?}"))),
        };
        let width = parse_field(&next_token(&mut r)?, "width")?;
        let height = parse_field(&next_token(&mut r)?, "height")?;
        let maxval = parse_field(&next_token(&mut r)?, "maxval")?;
        if maxval != 255 {
            return Err(Error::ImageFormat(format!("maxval {maxval} is not 255")));
        }
        let mut data = vec![0u8; width * height * channels];
        r.read_exact(&mut data)
            .map_err(|_| Error::ImageFormat("truncated pixel data".into()))?;
        Self::new(height, width, channels, data).map_err(|e| Error::ImageFormat(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_pnm(f)
    }
}

fn parse_field(tok: &str, what: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::ImageFormat(format!("bad {what} {tok:?}")))
}

/// Reads one whitespace-delimited header token, skipping `#` comments. The
/// single whitespace byte after the token is consumed.
fn next_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            if tok.is_empty() {
                return Err(Error::ImageFormat("unexpected end of header".into()));
            }
            break;
        }
        let b = byte[0];
        if b == b'#' && tok.is_empty() {
            let mut skip = Vec::new();
            r.read_until(b'\n', &mut skip)?;
            continue;
        }
        if b.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(b);
        if tok.len() > 16 {
            return Err(Error::ImageFormat("header token too long".into()));
        }
    }
    String::from_utf8(tok).map_err(|_| Error::ImageFormat("non-ASCII header".into()))
}
