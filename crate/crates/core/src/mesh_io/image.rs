use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major raster with samples normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<f64>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!("channels must be 1 or 3, got {channels}")));
        }
        if samples.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "{width}x{height}x{channels} image needs {} samples, got {}",
                width * height * channels,
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.samples[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.samples[(y * self.width + x) * self.channels + c] = v;
    }

    /// Channel mean at a pixel.
    pub fn intensity(&self, x: usize, y: usize) -> f64 {
        (0..self.channels).map(|c| self.get(x, y, c)).sum::<f64>() / self.channels as f64
    }

    /// Bilinear sample at continuous pixel coordinates, where pixel `(x, y)`
    /// has its center at `(x + 0.5, y + 0.5)`. Coordinates are clamped to the
    /// outermost pixel centers.
    pub fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> f64 {
        let fx = (x - 0.5).clamp(0.0, (self.width - 1) as f64);
        let fy = (y - 0.5).clamp(0.0, (self.height - 1) as f64);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let top = (1.0 - tx) * self.get(x0, y0, c) + tx * self.get(x1, y0, c);
        let bottom = (1.0 - tx) * self.get(x0, y1, c) + tx * self.get(x1, y1, c);
        (1.0 - ty) * top + ty * bottom
    }

    /// Samples rounded to the nearest of 256 levels.
    pub fn quantized(&self) -> Vec<u8> {
        self.samples.iter().map(|&v| quantize(v)).collect()
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Loads a plain-text PGM (`P2`) or PPM (`P3`) file with maxval 255.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pnm(&bytes)
}

/// Writes `P2` for single-channel images and `P3` for RGB.
pub fn save_image(image: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_pnm(image)).map_err(|e| Error::io(path, e))
}

fn parse_pnm(bytes: &[u8]) -> Result<RasterImage> {
    let magic = bytes.get(..2).ok_or_else(|| Error::InvalidImage("file too short".into()))?;
    let channels = match magic {
        b"P2" => 1,
        b"P3" => 3,
        b"P5" | b"P6" => {
            return Err(Error::InvalidImage(
                "binary PGM/PPM is not supported; use the plain P2/P3 variants".into(),
            ))
        }
        _ => return Err(Error::InvalidImage("expected a P2 or P3 header".into())),
    };
    let text = std::str::from_utf8(&bytes[2..])
        .map_err(|_| Error::InvalidImage("plain PNM must be ASCII".into()))?;
    let mut tokens = text
        .lines()
        .flat_map(|l| l.split('#').next().unwrap_or("").split_whitespace());
    let mut header = |what: &str| -> Result<usize> {
        let tok = tokens
            .next()
            .ok_or_else(|| Error::InvalidImage(format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| Error::InvalidImage(format!("cannot parse {what} from {tok:?}")))
    };
    let width = header("width")?;
    let height = header("height")?;
    let maxval = header("maxval")?;
    if maxval != 255 {
        return Err(Error::InvalidImage(format!("maxval must be 255, got {maxval}")));
    }
    let n = width * height * channels;
    let mut samples = Vec::with_capacity(n);
    for tok in tokens.by_ref().take(n) {
        let v: u32 = tok
            .parse()
            .map_err(|_| Error::InvalidImage(format!("bad sample {tok:?}")))?;
        if v > 255 {
            return Err(Error::InvalidImage(format!("sample {v} exceeds maxval")));
        }
        samples.push(v as f64 / 255.0);
    }
    if samples.len() != n {
        return Err(Error::InvalidImage(format!("expected {n} samples, found {}", samples.len())));
    }
    RasterImage::new(width, height, channels, samples)
}

fn write_pnm(image: &RasterImage) -> String {
    let mut s = String::with_capacity(image.samples.len() * 4 + 32);
    let magic = if image.channels == 1 { "P2" } else { "P3" };
    let _ = write!(s, "{magic}\n{} {}\n255\n", image.width, image.height);
    let row_len = image.width * image.channels;
    for row in image.samples.chunks(row_len.max(1)) {
        let line: Vec<String> = row.iter().map(|&v| quantize(v).to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}
