//! Grid and image data model.
//!
//! Images are real-valued samples on an equidistant `width × height` grid,
//! stored row-major. Grid points are identified with pixel centers; the
//! coordinates themselves only enter through the grid inner product
//! `⟨h, g⟩ = n⁻¹ Σᵢ h(xᵢ) g(xᵢ)`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{MindError, Result};
use crate::rng;

/// Equidistant 2-D sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageGrid {
    width: usize,
    height: usize,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(MindError::InvalidGrid(format!("{width}x{height} has no samples")));
        }
        width
            .checked_mul(height)
            .ok_or_else(|| MindError::InvalidGrid(format!("{width}x{height} overflows")))?;
        Ok(Self { width, height })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Total number of samples `n = width · height`.
    pub fn n(&self) -> usize {
        self.width * self.height
    }

    /// Pixel-center coordinates of sample `(col, row)` in `[0,1]²`.
    pub fn point(&self, col: usize, row: usize) -> (f64, f64) {
        (
            (col as f64 + 0.5) / self.width as f64,
            (row as f64 + 0.5) / self.height as f64,
        )
    }

    pub(crate) fn check_same(&self, other: &ImageGrid) -> Result<()> {
        if self != other {
            return Err(MindError::GridMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: other.width,
                got_h: other.height,
            });
        }
        Ok(())
    }
}

/// Real-valued image on an [`ImageGrid`], row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    grid: ImageGrid,
    values: Vec<f64>,
}

impl Image {
    /// Builds an image, rejecting wrong lengths and non-finite samples.
    pub fn new(grid: ImageGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(MindError::LengthMismatch {
                expected: grid.n(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MindError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: ImageGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: ImageGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n()],
        }
    }

    /// Samples `f(x, y)` at the pixel centers.
    pub fn from_fn(grid: ImageGrid, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.n());
        for row in 0..grid.height {
            for col in 0..grid.width {
                let (x, y) = grid.point(col, row);
                values.push(f(x, y));
            }
        }
        Self::new(grid, values)
    }

    /// Wraps a buffer that is known to be finite and correctly sized.
    pub(crate) fn from_raw(grid: ImageGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values }
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.grid.width + col]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Euclidean norm of the sample vector (no `n⁻¹` weighting).
    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pixelwise `self + scale · other`.
    pub fn add_scaled(&self, other: &Image, scale: f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + scale * b)
                .collect(),
        })
    }
}

/// Grid inner product `n⁻¹ Σᵢ h(xᵢ) g(xᵢ)`.
pub fn inner_product(h: &Image, g: &Image) -> Result<f64> {
    h.grid.check_same(&g.grid)?;
    let s: f64 = h.values.iter().zip(&g.values).map(|(a, b)| a * b).sum();
    Ok(s / h.n() as f64)
}

/// Additive Gaussian noise model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(MindError::InvalidParameter(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { sigma, seed })
    }
}

/// Returns `Yᵢ = f(xᵢ) + σ εᵢ` with `ε` i.i.d. standard normal from the seeded generator.
pub fn add_noise(f: &Image, spec: &NoiseSpec) -> Result<Image> {
    let spec = NoiseSpec::new(spec.sigma, spec.seed)?;
    if spec.sigma == 0.0 {
        return Ok(f.clone());
    }
    let mut rng = rng::seeded(spec.seed);
    let values = f
        .values
        .iter()
        .map(|&v| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + spec.sigma * e
        })
        .collect();
    Ok(Image::from_raw(f.grid, values))
}

/// Noise level for a given signal-to-noise ratio `max|f| / σ`.
pub fn snr_to_sigma(f: &Image, snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(MindError::InvalidParameter(format!("snr must be > 0, got {snr}")));
    }
    let peak = f.max_abs();
    if peak == 0.0 {
        return Err(MindError::InvalidParameter("snr undefined for an all-zero image".into()));
    }
    Ok(peak / snr)
}
