//! Indicator dictionaries of axis-aligned squares.
//!
//! Every element is `√(n/|B|)·1_B`, so `[Kg]_λ = Σ_B g / (e·√n)` for a
//! square `B` of edge `e` pixels. Analysis reads box sums from a summed-area
//! table; the adjoint scatters `±c` into the four corners of a difference
//! array and integrates it once.

use rayon::prelude::*;

/// A family of equally sized squares placed on a regular lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct CubeLayer {
    /// Level label reported in element ids (dyadic level or small-cube edge).
    pub level: u32,
    pub edge: usize,
    pub step: usize,
    pub count_x: usize,
    pub count_y: usize,
    pub offset: usize,
}

impl CubeLayer {
    pub fn len(&self) -> usize {
        self.count_x * self.count_y
    }
}

/// Dyadic partition cubes, coarsest level first: level `ℓ` has `4^ℓ` cubes of edge `side / 2^ℓ`.
pub(crate) fn dyadic_layers(side: usize, depth: u32) -> Vec<CubeLayer> {
    let mut layers = Vec::with_capacity(depth as usize + 1);
    let mut offset = 0;
    for level in 0..=depth {
        let per_side = 1usize << level;
        let edge = side >> level;
        let layer = CubeLayer {
            level,
            edge,
            step: edge,
            count_x: per_side,
            count_y: per_side,
            offset,
        };
        offset += layer.len();
        layers.push(layer);
    }
    layers
}

/// All squares of edge `1..=max_edge` at every integer offset.
pub(crate) fn small_cube_layers(width: usize, height: usize, max_edge: usize) -> Vec<CubeLayer> {
    let mut layers = Vec::with_capacity(max_edge);
    let mut offset = 0;
    for edge in 1..=max_edge {
        let layer = CubeLayer {
            level: edge as u32,
            edge,
            step: 1,
            count_x: width - edge + 1,
            count_y: height - edge + 1,
            offset,
        };
        offset += layer.len();
        layers.push(layer);
    }
    layers
}

/// Summed-area table with a zero first row and column, `(h+1)·(w+1)` entries.
pub(crate) fn summed_area_table(values: &[f64], width: usize, height: usize) -> Vec<f64> {
    let stride = width + 1;
    let mut sat = vec![0.0; stride * (height + 1)];
    for row in 0..height {
        let mut running = 0.0;
        for col in 0..width {
            running += values[row * width + col];
            sat[(row + 1) * stride + col + 1] = sat[row * stride + col + 1] + running;
        }
    }
    sat
}

pub(crate) fn analyze(layers: &[CubeLayer], values: &[f64], width: usize, height: usize, out: &mut [f64]) {
    let n = (width * height) as f64;
    let sat = summed_area_table(values, width, height);
    let stride = width + 1;
    let mut chunks = Vec::with_capacity(layers.len());
    let mut rest = out;
    for layer in layers {
        let (head, tail) = rest.split_at_mut(layer.len());
        chunks.push((layer, head));
        rest = tail;
    }
    chunks.into_par_iter().for_each(|(layer, chunk)| {
        let scale = 1.0 / (layer.edge as f64 * n.sqrt());
        let e = layer.edge;
        for iy in 0..layer.count_y {
            let y = iy * layer.step;
            let top = y * stride;
            let bottom = (y + e) * stride;
            let row = &mut chunk[iy * layer.count_x..(iy + 1) * layer.count_x];
            for (ix, c) in row.iter_mut().enumerate() {
                let x = ix * layer.step;
                let sum = sat[bottom + x + e] - sat[top + x + e] - sat[bottom + x] + sat[top + x];
                *c = sum * scale;
            }
        }
    });
}

pub(crate) fn adjoint(layers: &[CubeLayer], coeffs: &[f64], width: usize, height: usize, out: &mut [f64]) {
    let n = (width * height) as f64;
    scatter(layers, coeffs, width, height, out, |e| 1.0 / (e as f64 * n.sqrt()));
}

/// `Σ_λ c_λ K_{λi}²` for every pixel `i`.
pub(crate) fn weighted_squares(layers: &[CubeLayer], weights: &[f64], width: usize, height: usize, out: &mut [f64]) {
    let n = (width * height) as f64;
    scatter(layers, weights, width, height, out, |e| 1.0 / ((e * e) as f64 * n));
}

fn scatter(
    layers: &[CubeLayer],
    coeffs: &[f64],
    width: usize,
    height: usize,
    out: &mut [f64],
    scale_of: impl Fn(usize) -> f64,
) {
    let stride = width + 1;
    let mut diff = vec![0.0; stride * (height + 1)];
    for layer in layers {
        let scale = scale_of(layer.edge);
        let e = layer.edge;
        let chunk = &coeffs[layer.offset..layer.offset + layer.len()];
        for iy in 0..layer.count_y {
            let y = iy * layer.step;
            let top = y * stride;
            let bottom = (y + e) * stride;
            for ix in 0..layer.count_x {
                let a = chunk[iy * layer.count_x + ix];
                if a == 0.0 {
                    continue;
                }
                let a = a * scale;
                let x = ix * layer.step;
                diff[top + x] += a;
                diff[top + x + e] -= a;
                diff[bottom + x] -= a;
                diff[bottom + x + e] += a;
            }
        }
    }
    // pixel (row, col) is the 2-D prefix sum of the difference array up to (row, col)
    let mut col_acc = vec![0.0; width];
    for row in 0..height {
        let mut running = 0.0;
        for col in 0..width {
            col_acc[col] += diff[row * stride + col];
            running += col_acc[col];
            out[row * width + col] = running;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sat_box_sum() {
        let v: Vec<f64> = (1..=6).map(|x| x as f64).collect();
        let sat = summed_area_table(&v, 3, 2);
        assert_eq!(sat[2 * 4 + 3], 21.0);
        assert_eq!(sat[4 + 3], 6.0);
    }

    #[test]
    fn dyadic_layer_offsets() {
        let layers = dyadic_layers(8, 3);
        assert_eq!(layers.iter().map(|l| l.len()).sum::<usize>(), 1 + 4 + 16 + 64);
        assert_eq!(layers[2].offset, 5);
        assert_eq!(layers[3].edge, 1);
    }
}
