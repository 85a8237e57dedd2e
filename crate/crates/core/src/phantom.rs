//! Synthetic test images with intensities in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::{Image, ImageGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    /// Piecewise-constant rectangles and disks on a dark background.
    Blocks,
    /// An affine ramp with a bright square inset.
    Ramp,
    /// Small bright disks of several radii.
    Bubbles,
}

impl std::str::FromStr for PhantomKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "blocks" => Ok(PhantomKind::Blocks),
            "ramp" => Ok(PhantomKind::Ramp),
            "bubbles" => Ok(PhantomKind::Bubbles),
            other => Err(format!("unknown phantom {other:?} (blocks, ramp, bubbles)")),
        }
    }
}

fn in_disk(x: f64, y: f64, cx: f64, cy: f64, r: f64) -> bool {
    (x - cx).powi(2) + (y - cy).powi(2) <= r * r
}

fn in_rect(x: f64, y: f64, x0: f64, y0: f64, x1: f64, y1: f64) -> bool {
    x >= x0 && x < x1 && y >= y0 && y < y1
}

pub fn generate(kind: PhantomKind, grid: ImageGrid) -> Result<Image> {
    match kind {
        PhantomKind::Blocks => Image::from_fn(grid, |x, y| {
            if in_disk(x, y, 0.7, 0.7, 0.15) {
                1.0
            } else if in_rect(x, y, 0.15, 0.15, 0.55, 0.45) {
                0.75
            } else if in_rect(x, y, 0.2, 0.6, 0.45, 0.9) {
                0.5
            } else if in_disk(x, y, 0.78, 0.25, 0.08) {
                0.6
            } else {
                0.1
            }
        }),
        PhantomKind::Ramp => Image::from_fn(grid, |x, y| {
            if in_rect(x, y, 0.35, 0.35, 0.65, 0.65) {
                0.9
            } else {
                0.1 + 0.4 * x + 0.2 * y
            }
        }),
        PhantomKind::Bubbles => Image::from_fn(grid, |x, y| {
            let centers = [
                (0.2, 0.2, 0.06),
                (0.5, 0.3, 0.1),
                (0.8, 0.2, 0.04),
                (0.3, 0.7, 0.12),
                (0.75, 0.75, 0.08),
            ];
            if centers.iter().any(|&(cx, cy, r)| in_disk(x, y, cx, cy, r)) {
                0.9
            } else {
                0.2
            }
        }),
    }
}
