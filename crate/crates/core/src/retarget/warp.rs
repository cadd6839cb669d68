use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh_io::RasterImage;

/// Deformed lattice: `rows x cols` vertices (index `i * cols + j`) whose
/// undeformed positions span `[0, width] x [0, height]` of the source image.
/// Only horizontal positions move; row `i` keeps its height.
#[derive(Debug, Clone)]
pub struct HorizontalWarp {
    pub rows: usize,
    pub cols: usize,
    /// Deformed horizontal position of every vertex.
    pub x: Vec<f64>,
}

impl HorizontalWarp {
    /// Checks that every row is strictly increasing.
    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 || self.x.len() != self.rows * self.cols {
            return Err(Error::ShapeMismatch(format!(
                "{} positions for a {}x{} grid",
                self.x.len(),
                self.rows,
                self.cols
            )));
        }
        for i in 0..self.rows {
            let row = &self.x[i * self.cols..(i + 1) * self.cols];
            if let Some(j) = row.windows(2).position(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidArgument(format!(
                    "grid map is not monotone: row {i}, columns {j} and {}",
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

/// Resamples `source` through the inverse of the piecewise-bilinear grid
/// map. The output has `output_width` columns and the source height; each
/// output pixel center is mapped back to source coordinates and sampled
/// bilinearly.
pub fn warp_image(source: &RasterImage, warp: &HorizontalWarp, output_width: usize) -> Result<RasterImage> {
    warp.validate()?;
    if output_width == 0 {
        return Err(Error::InvalidArgument("output width must be positive".into()));
    }
    let (w, h, ch) = (source.width(), source.height(), source.channels());
    let (rows, cols) = (warp.rows, warp.cols);
    let hx = w as f64 / (cols - 1) as f64;
    let hy = h as f64 / (rows - 1) as f64;
    let lines: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|r| {
            let y = r as f64 + 0.5;
            let i = ((y / hy).floor() as usize).min(rows - 2);
            let t = (y - i as f64 * hy) / hy;
            let top = &warp.x[i * cols..(i + 1) * cols];
            let bottom = &warp.x[(i + 1) * cols..(i + 2) * cols];
            let map: Vec<f64> = top.iter().zip(bottom).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            let mut line = vec![0.0; output_width * ch];
            for c in 0..output_width {
                let target = c as f64 + 0.5;
                // last segment whose left end is at or before the target
                let j = map.partition_point(|&v| v <= target).clamp(1, cols - 1) - 1;
                let s = ((target - map[j]) / (map[j + 1] - map[j])).clamp(0.0, 1.0);
                let u = (j as f64 + s) * hx;
                for k in 0..ch {
                    line[c * ch + k] = source.sample_bilinear(u, y, k);
                }
            }
            line
        })
        .collect();
    RasterImage::new(output_width, h, ch, lines.concat())
}
