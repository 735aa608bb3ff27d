//! Multi-scale square patches rescaled by area averaging.

use crate::image::RgbImage;

/// Patch widths (smallest first) and the common rescaled side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchSpec {
    pub widths: Vec<usize>,
    pub target: usize,
}

impl Default for PatchSpec {
    fn default() -> Self {
        Self { widths: vec![41, 81, 161, 321], target: 31 }
    }
}

impl PatchSpec {
    pub const CHANNELS: usize = 3;

    /// Length of the concatenated raw vector.
    pub fn raw_len(&self) -> usize {
        self.widths.len() * self.target * self.target * Self::CHANNELS
    }

    pub fn is_valid(&self) -> bool {
        self.target > 0 && !self.widths.is_empty() && self.widths.iter().all(|w| w % 2 == 1 && *w >= self.target)
    }
}

/// Per output cell, the source offsets it covers and their area weights.
fn area_weights(width: usize, target: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = width as f64 / target as f64;
    (0..target)
        .map(|i| {
            let lo = i as f64 * scale;
            let hi = (i + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(width);
            (first..last)
                .filter_map(|j| {
                    let overlap = (hi.min(j as f64 + 1.0) - lo.max(j as f64)).max(0.0);
                    (overlap > 0.0).then_some((j, overlap / scale))
                })
                .collect()
        })
        .collect()
}

/// Raw appearance vector at pixel `(u, v)`: for each width (small to large) a
/// centred crop with edge-clamped borders, area-averaged to `target`^2, stored
/// row-major with interleaved RGB, intensities scaled to [0, 1].
pub fn extract_patch_vector(image: &RgbImage, pixel: (u32, u32), spec: &PatchSpec) -> Vec<f64> {
    let (w_img, h_img) = (image.width() as i64, image.height() as i64);
    let raw = image.as_raw();
    let t = spec.target;
    let mut out = Vec::with_capacity(spec.raw_len());
    let mut rows = Vec::new();
    for &width in &spec.widths {
        let half = (width as i64 - 1) / 2;
        let x0 = pixel.0 as i64 - half;
        let y0 = pixel.1 as i64 - half;
        let weights = area_weights(width, t);
        let col_of: Vec<usize> = (0..width as i64).map(|j| (x0 + j).clamp(0, w_img - 1) as usize).collect();

        // horizontal pass: width rows x t cells x 3
        rows.clear();
        rows.resize(width * t * 3, 0.0);
        for r in 0..width {
            let sy = (y0 + r as i64).clamp(0, h_img - 1) as usize;
            let line = &raw[sy * w_img as usize * 3..(sy + 1) * w_img as usize * 3];
            for (i, cell) in weights.iter().enumerate() {
                let mut acc = [0.0; 3];
                for &(j, wt) in cell {
                    let px = col_of[j] * 3;
                    acc[0] += wt * line[px] as f64;
                    acc[1] += wt * line[px + 1] as f64;
                    acc[2] += wt * line[px + 2] as f64;
                }
                rows[(r * t + i) * 3..(r * t + i) * 3 + 3].copy_from_slice(&acc);
            }
        }
        // vertical pass
        for cell in &weights {
            for j in 0..t {
                let mut acc = [0.0; 3];
                for &(r, wt) in cell {
                    let base = (r * t + j) * 3;
                    acc[0] += wt * rows[base];
                    acc[1] += wt * rows[base + 1];
                    acc[2] += wt * rows[base + 2];
                }
                out.extend(acc.iter().map(|a| a / 255.0));
            }
        }
    }
    out
}
