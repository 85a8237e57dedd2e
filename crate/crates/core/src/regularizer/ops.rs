//! Forward differences with Neumann boundary and their adjoint.

/// Per-pixel forward differences `(d_x, d_y)`; differences leaving the grid are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl GradientField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            dx: vec![0.0; width * height],
            dy: vec![0.0; width * height],
        }
    }

    /// Pixelwise magnitude `|∇v|`.
    pub fn magnitude(&self, i: usize) -> f64 {
        self.dx[i].hypot(self.dy[i])
    }
}

pub fn gradient(values: &[f64], width: usize, height: usize) -> GradientField {
    let mut g = GradientField::zeros(width, height);
    gradient_into(values, width, height, &mut g);
    g
}

pub(crate) fn gradient_into(values: &[f64], width: usize, height: usize, g: &mut GradientField) {
    for row in 0..height {
        for col in 0..width {
            let i = row * width + col;
            g.dx[i] = if col + 1 < width { values[i + 1] - values[i] } else { 0.0 };
            g.dy[i] = if row + 1 < height { values[i + width] - values[i] } else { 0.0 };
        }
    }
}

/// `∇ᵀ p` (the negative discrete divergence), written into `out`.
pub(crate) fn gradient_adjoint_into(px: &[f64], py: &[f64], width: usize, height: usize, out: &mut [f64]) {
    for row in 0..height {
        for col in 0..width {
            let i = row * width + col;
            let mut v = 0.0;
            if col + 1 < width {
                v -= px[i];
            }
            if col > 0 {
                v += px[i - 1];
            }
            if row + 1 < height {
                v -= py[i];
            }
            if row > 0 {
                v += py[i - width];
            }
            out[i] = v;
        }
    }
}

/// Neumann graph Laplacian `L v = ∇ᵀ∇ v`.
pub(crate) fn laplacian_into(values: &[f64], width: usize, height: usize, g: &mut GradientField, out: &mut [f64]) {
    gradient_into(values, width, height, g);
    gradient_adjoint_into(&g.dx, &g.dy, width, height, out);
}
