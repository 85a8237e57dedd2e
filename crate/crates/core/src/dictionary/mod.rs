//! Multiscale dictionaries and their analysis operator.
//!
//! A dictionary is a finite family `{φ_λ}` on the grid, and the analysis
//! operator is `[Kg]_λ = ⟨φ_λ, g⟩ = n⁻¹ Σᵢ φ_λ(xᵢ) g(xᵢ)`. Every element is
//! normalized to `Σᵢ φ_λ(xᵢ)² = n`, so under pure standard-normal noise each
//! coefficient is `N(0, 1/n)`. Indicator elements are therefore
//! `√(n/|B|)·1_B`, and wavelet elements are `√n` times an orthonormal basis
//! vector, which makes `K*K = n⁻¹·I` for complete wavelet dictionaries.
//!
//! Coefficient order (the canonical enumeration of `Λ_n`):
//!
//! * dyadic cubes: by level `ℓ = 0, 1, …` (the full domain first), then row
//!   offset, then column offset;
//! * small cubes: by edge length `1, 2, …`, then row offset, then column offset;
//! * wavelets: scaling block of the coarsest level, then the detail bands
//!   (1 = high-pass along x, 2 = high-pass along y, 3 = both) from the coarsest
//!   to the finest level, each block row-major.
//!
//! The coefficient space carries the plain Euclidean dot product; the `n⁻¹`
//! weight lives inside `K` and `K*`.

mod cubes;
mod wavelet;

use std::io::{Read, Write};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{MindError, Result};
use crate::image::{Image, ImageGrid};
use crate::rng;

pub use wavelet::WaveletFilter;

use cubes::CubeLayer;
use wavelet::Subband;

/// Which family of elements to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DictionaryKind {
    /// Dyadic partition cubes of levels `0..=depth`; `None` descends to single pixels.
    DyadicCubes { depth: Option<u32> },
    /// All squares with edge `1..=max_edge` pixels at every integer offset.
    SmallCubes { max_edge: usize },
    /// Complete orthonormal tensor wavelet basis; `None` uses the deepest admissible level.
    Wavelet { filter: WaveletFilter, depth: Option<u32> },
}

impl DictionaryKind {
    pub fn name(&self) -> &'static str {
        match self {
            DictionaryKind::DyadicCubes { .. } => "dyadic-cubes",
            DictionaryKind::SmallCubes { .. } => "small-cubes",
            DictionaryKind::Wavelet { .. } => "wavelet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    DyadicCube,
    SmallCube,
    Wavelet,
}

/// Identifies one element `φ_λ`.
///
/// For cubes `(col, row)` is the top-left pixel and `level` is the dyadic
/// level or the edge length; for wavelets `(col, row)` indexes the position
/// inside its subband.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementId {
    pub kind: ElementKind,
    pub level: u32,
    pub col: usize,
    pub row: usize,
    pub band: u8,
}

/// One real per dictionary element, in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector(pub Vec<f64>);

impl CoefficientVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &CoefficientVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

#[derive(Debug, Clone)]
enum Layout {
    Cubes(Vec<CubeLayer>),
    Wavelet {
        filter: WaveletFilter,
        depth: u32,
        bands: Vec<Subband>,
    },
}

/// An immutable dictionary bound to a grid.
#[derive(Debug, Clone)]
pub struct Dictionary {
    grid: ImageGrid,
    kind: DictionaryKind,
    layout: Layout,
    element_count: usize,
}

/// Result of [`Dictionary::operator_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorNorm {
    pub value: f64,
    pub iterations: usize,
    /// False when `max_iter` was reached before the tolerance.
    pub converged: bool,
}

const DUMP_MAGIC: &[u8; 8] = b"MINDCOEF";

impl Dictionary {
    /// Enumerates all elements of `kind` on `grid`.
    pub fn build(grid: ImageGrid, kind: DictionaryKind) -> Result<Self> {
        let (w, h) = (grid.width(), grid.height());
        let (layout, resolved) = match kind {
            DictionaryKind::DyadicCubes { depth } => {
                if w != h || !w.is_power_of_two() {
                    return Err(MindError::InvalidGrid(format!(
                        "dyadic cubes need a square grid with power-of-two side, got {w}x{h}"
                    )));
                }
                let full = w.trailing_zeros();
                let depth = depth.unwrap_or(full);
                if depth > full {
                    return Err(MindError::InvalidParameter(format!(
                        "dyadic depth {depth} exceeds {full} for side {w}"
                    )));
                }
                (
                    Layout::Cubes(cubes::dyadic_layers(w, depth)),
                    DictionaryKind::DyadicCubes { depth: Some(depth) },
                )
            }
            DictionaryKind::SmallCubes { max_edge } => {
                if max_edge == 0 || max_edge > w.min(h) {
                    return Err(MindError::InvalidParameter(format!(
                        "small-cube max edge must lie in 1..={}, got {max_edge}",
                        w.min(h)
                    )));
                }
                (Layout::Cubes(cubes::small_cube_layers(w, h, max_edge)), kind)
            }
            DictionaryKind::Wavelet { filter, depth } => {
                let full = w.trailing_zeros().min(h.trailing_zeros());
                let depth = depth.unwrap_or(full);
                if depth > full {
                    return Err(MindError::InvalidGrid(format!(
                        "{w}x{h} is not divisible by 2^{depth} for a depth-{depth} wavelet transform"
                    )));
                }
                (
                    Layout::Wavelet {
                        filter,
                        depth,
                        bands: wavelet::subbands(w, h, depth),
                    },
                    DictionaryKind::Wavelet {
                        filter,
                        depth: Some(depth),
                    },
                )
            }
        };
        let element_count = match &layout {
            Layout::Cubes(layers) => layers.iter().map(CubeLayer::len).sum(),
            Layout::Wavelet { .. } => grid.n(),
        };
        Ok(Self {
            grid,
            kind: resolved,
            layout,
            element_count,
        })
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    /// The kind with every optional parameter resolved.
    pub fn kind(&self) -> DictionaryKind {
        self.kind
    }

    /// `#Λ_n`.
    pub fn element_count(&self) -> usize {
        self.element_count
    }

    /// Short stable hash of kind, parameters and grid, used to key cached thresholds.
    pub fn fingerprint(&self) -> String {
        let desc = format!(
            "{}|{}x{}",
            serde_json::to_string(&self.kind).expect("dictionary kind serializes"),
            self.grid.width(),
            self.grid.height()
        );
        let digest = Sha256::digest(desc.as_bytes());
        hex::encode(&digest[..8])
    }

    /// `[Kg]_λ = ⟨φ_λ, g⟩` for every element.
    pub fn analyze(&self, g: &Image) -> Result<CoefficientVector> {
        self.grid.check_same(&g.grid())?;
        let mut out = vec![0.0; self.element_count];
        self.analyze_into(g.values(), &mut out);
        Ok(CoefficientVector(out))
    }

    /// Adjoint of [`analyze`](Self::analyze): pixel `i` receives `n⁻¹ Σ_λ c_λ φ_λ(xᵢ)`.
    pub fn adjoint(&self, c: &CoefficientVector) -> Result<Image> {
        if c.len() != self.element_count {
            return Err(MindError::LengthMismatch {
                expected: self.element_count,
                got: c.len(),
            });
        }
        let mut out = vec![0.0; self.grid.n()];
        self.adjoint_into(&c.0, &mut out);
        Ok(Image::from_raw(self.grid, out))
    }

    pub(crate) fn analyze_into(&self, values: &[f64], out: &mut [f64]) {
        let (w, h) = (self.grid.width(), self.grid.height());
        match &self.layout {
            Layout::Cubes(layers) => cubes::analyze(layers, values, w, h, out),
            Layout::Wavelet { filter, depth, bands } => {
                let mut data = values.to_vec();
                wavelet::forward(*filter, *depth, &mut data, w, h);
                let scale = 1.0 / (self.grid.n() as f64).sqrt();
                for b in bands {
                    for r in 0..b.h {
                        for c in 0..b.w {
                            out[b.offset + r * b.w + c] = data[(b.y0 + r) * w + b.x0 + c] * scale;
                        }
                    }
                }
            }
        }
    }

    pub(crate) fn adjoint_into(&self, coeffs: &[f64], out: &mut [f64]) {
        let (w, h) = (self.grid.width(), self.grid.height());
        match &self.layout {
            Layout::Cubes(layers) => cubes::adjoint(layers, coeffs, w, h, out),
            Layout::Wavelet { filter, depth, bands } => {
                let scale = 1.0 / (self.grid.n() as f64).sqrt();
                for b in bands {
                    for r in 0..b.h {
                        for c in 0..b.w {
                            out[(b.y0 + r) * w + b.x0 + c] = coeffs[b.offset + r * b.w + c] * scale;
                        }
                    }
                }
                wavelet::inverse(*filter, *depth, out, w, h);
            }
        }
    }

    /// Diagonal of `K* diag(weights) K`.
    ///
    /// Exact for cube dictionaries. For wavelets the per-pixel average
    /// `Σ weights / n²` is returned, which is enough for preconditioning.
    pub(crate) fn weighted_normal_diagonal(&self, weights: &[f64], out: &mut [f64]) {
        let (w, h) = (self.grid.width(), self.grid.height());
        match &self.layout {
            Layout::Cubes(layers) => cubes::weighted_squares(layers, weights, w, h, out),
            Layout::Wavelet { .. } => {
                let n = self.grid.n() as f64;
                let v = weights.iter().sum::<f64>() / (n * n);
                out.iter_mut().for_each(|o| *o = v);
            }
        }
    }

    /// `K*K v`, the normal operator.
    pub(crate) fn normal_into(&self, v: &[f64], coeff_buf: &mut [f64], out: &mut [f64]) {
        self.analyze_into(v, coeff_buf);
        self.adjoint_into(coeff_buf, out);
    }

    /// Identifies element `index` in canonical order.
    pub fn element_id(&self, index: usize) -> Option<ElementId> {
        if index >= self.element_count {
            return None;
        }
        match &self.layout {
            Layout::Cubes(layers) => {
                let layer = layers.iter().rfind(|l| l.offset <= index)?;
                let local = index - layer.offset;
                let kind = match self.kind {
                    DictionaryKind::DyadicCubes { .. } => ElementKind::DyadicCube,
                    _ => ElementKind::SmallCube,
                };
                Some(ElementId {
                    kind,
                    level: layer.level,
                    col: (local % layer.count_x) * layer.step,
                    row: (local / layer.count_x) * layer.step,
                    band: 0,
                })
            }
            Layout::Wavelet { bands, .. } => {
                let b = bands.iter().rfind(|b| b.offset <= index)?;
                let local = index - b.offset;
                Some(ElementId {
                    kind: ElementKind::Wavelet,
                    level: b.level,
                    col: local % b.w,
                    row: local / b.w,
                    band: b.band,
                })
            }
        }
    }

    /// Samples of element `φ_index` on the grid (normalized to `Σ φ² = n`).
    pub fn element_image(&self, index: usize) -> Result<Image> {
        if index >= self.element_count {
            return Err(MindError::InvalidParameter(format!(
                "element {index} out of range 0..{}",
                self.element_count
            )));
        }
        let n = self.grid.n() as f64;
        match &self.layout {
            Layout::Cubes(layers) => {
                let layer = layers.iter().rfind(|l| l.offset <= index).expect("offsets start at 0");
                let local = index - layer.offset;
                let x0 = (local % layer.count_x) * layer.step;
                let y0 = (local / layer.count_x) * layer.step;
                let height = (n / (layer.edge * layer.edge) as f64).sqrt();
                let w = self.grid.width();
                let mut values = vec![0.0; self.grid.n()];
                for r in y0..y0 + layer.edge {
                    for c in x0..x0 + layer.edge {
                        values[r * w + c] = height;
                    }
                }
                Ok(Image::from_raw(self.grid, values))
            }
            Layout::Wavelet { .. } => {
                let mut unit = vec![0.0; self.element_count];
                unit[index] = n;
                let mut out = vec![0.0; self.grid.n()];
                self.adjoint_into(&unit, &mut out);
                Ok(Image::from_raw(self.grid, out))
            }
        }
    }

    /// Estimates `‖K‖_op` by power iteration on `K*K` from a fixed seeded start vector.
    ///
    /// Stops when the relative change of the eigenvalue estimate drops below
    /// `tol` or after `max_iter` iterations (then `converged` is false).
    pub fn operator_norm(&self, tol: f64, max_iter: usize) -> Result<OperatorNorm> {
        if !(tol > 0.0) {
            return Err(MindError::InvalidParameter(format!("tol must be > 0, got {tol}")));
        }
        let n = self.grid.n();
        let mut rng = rng::seeded(0x6b_6e6f_726d);
        let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        normalize(&mut x);
        let mut y = vec![0.0; n];
        let mut coeffs = vec![0.0; self.element_count];
        let mut eig = 0.0;
        for it in 1..=max_iter.max(1) {
            self.normal_into(&x, &mut coeffs, &mut y);
            let rayleigh: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            let norm_y = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let change = (rayleigh - eig).abs();
            eig = rayleigh;
            if norm_y == 0.0 {
                return Ok(OperatorNorm {
                    value: 0.0,
                    iterations: it,
                    converged: true,
                });
            }
            x.iter_mut().zip(&y).for_each(|(a, b)| *a = b / norm_y);
            if it > 1 && change <= tol * eig {
                return Ok(OperatorNorm {
                    value: eig.sqrt(),
                    iterations: it,
                    converged: true,
                });
            }
        }
        Ok(OperatorNorm {
            value: eig.sqrt(),
            iterations: max_iter.max(1),
            converged: false,
        })
    }

    /// Writes `coeffs` as the binary coefficient dump: `MINDCOEF`, element count (u64 LE), then f64 LE values.
    pub fn write_coefficients(&self, c: &CoefficientVector, mut out: impl Write) -> Result<()> {
        if c.len() != self.element_count {
            return Err(MindError::LengthMismatch {
                expected: self.element_count,
                got: c.len(),
            });
        }
        out.write_all(DUMP_MAGIC)?;
        out.write_all(&(c.len() as u64).to_le_bytes())?;
        for v in &c.0 {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Reads a coefficient dump written by [`Dictionary::write_coefficients`].
pub fn read_coefficients(mut input: impl Read) -> Result<CoefficientVector> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if &header[..8] != DUMP_MAGIC {
        return Err(MindError::Codec("bad coefficient dump magic".into()));
    }
    let count = u64::from_le_bytes(header[8..].try_into().expect("8 bytes")) as usize;
    let mut raw = Vec::new();
    input.read_to_end(&mut raw)?;
    if raw.len() != 8 * count {
        return Err(MindError::LengthMismatch {
            expected: 8 * count,
            got: raw.len(),
        });
    }
    Ok(CoefficientVector(
        raw.chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect(),
    ))
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize) -> ImageGrid {
        ImageGrid::new(w, h).unwrap()
    }

    #[test]
    fn element_counts() {
        let d = Dictionary::build(grid(256, 256), DictionaryKind::DyadicCubes { depth: None }).unwrap();
        assert_eq!(d.element_count(), 87_381);
        let d = Dictionary::build(grid(1, 1), DictionaryKind::DyadicCubes { depth: None }).unwrap();
        assert_eq!(d.element_count(), 1);
        let d = Dictionary::build(grid(10, 7), DictionaryKind::SmallCubes { max_edge: 3 }).unwrap();
        assert_eq!(d.element_count(), 10 * 7 + 9 * 6 + 8 * 5);
        let d = Dictionary::build(
            grid(16, 8),
            DictionaryKind::Wavelet {
                filter: WaveletFilter::Haar,
                depth: None,
            },
        )
        .unwrap();
        assert_eq!(d.element_count(), 128);
        assert_eq!(d.kind(), DictionaryKind::Wavelet { filter: WaveletFilter::Haar, depth: Some(3) });
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Dictionary::build(grid(8, 4), DictionaryKind::DyadicCubes { depth: None }).is_err());
        assert!(Dictionary::build(grid(6, 6), DictionaryKind::DyadicCubes { depth: None }).is_err());
        assert!(Dictionary::build(grid(8, 8), DictionaryKind::DyadicCubes { depth: Some(4) }).is_err());
        assert!(Dictionary::build(grid(5, 9), DictionaryKind::SmallCubes { max_edge: 6 }).is_err());
        assert!(Dictionary::build(grid(5, 9), DictionaryKind::SmallCubes { max_edge: 0 }).is_err());
        let wav = DictionaryKind::Wavelet {
            filter: WaveletFilter::Symlet6,
            depth: Some(2),
        };
        assert!(Dictionary::build(grid(12, 6), wav).is_err());
    }

    #[test]
    fn zero_and_constant_analysis() {
        let d = Dictionary::build(grid(4, 4), DictionaryKind::DyadicCubes { depth: None }).unwrap();
        let c = d.analyze(&Image::zeros(d.grid())).unwrap();
        assert!(c.0.iter().all(|&v| v == 0.0));
        let c = d.analyze(&Image::constant(d.grid(), 2.5)).unwrap();
        assert!((c.0[0] - 2.5).abs() < 1e-15);
        // a single pixel cube: 2.5 / sqrt(n)
        assert!((c.0[5] - 2.5 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn adjoint_of_full_domain_unit() {
        let d = Dictionary::build(grid(2, 2), DictionaryKind::DyadicCubes { depth: Some(0) }).unwrap();
        assert_eq!(d.element_count(), 1);
        let img = d.adjoint(&CoefficientVector(vec![1.0])).unwrap();
        assert_eq!(img.values(), &[0.25; 4]);
        let zero = d.adjoint(&CoefficientVector::zeros(1)).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        assert!(d.adjoint(&CoefficientVector::zeros(2)).is_err());
    }

    #[test]
    fn element_normalization() {
        let kinds = [
            DictionaryKind::DyadicCubes { depth: None },
            DictionaryKind::SmallCubes { max_edge: 3 },
            DictionaryKind::Wavelet {
                filter: WaveletFilter::Symlet6,
                depth: None,
            },
        ];
        for kind in kinds {
            let d = Dictionary::build(grid(8, 8), kind).unwrap();
            for i in 0..d.element_count() {
                let e = d.element_image(i).unwrap();
                let ss: f64 = e.values().iter().map(|v| v * v).sum();
                assert!((ss - 64.0).abs() < 1e-10, "{kind:?} element {i}: {ss}");
            }
        }
    }

    #[test]
    fn element_ids_follow_canonical_order() {
        let d = Dictionary::build(grid(4, 4), DictionaryKind::DyadicCubes { depth: None }).unwrap();
        assert_eq!(
            d.element_id(0).unwrap(),
            ElementId { kind: ElementKind::DyadicCube, level: 0, col: 0, row: 0, band: 0 }
        );
        assert_eq!(d.element_id(3).unwrap().col, 0);
        assert_eq!(d.element_id(3).unwrap().row, 2);
        assert_eq!(d.element_id(20).unwrap().level, 2);
        assert!(d.element_id(21).is_none());
        let d = Dictionary::build(grid(5, 5), DictionaryKind::SmallCubes { max_edge: 2 }).unwrap();
        let id = d.element_id(25 + 5).unwrap();
        assert_eq!((id.level, id.col, id.row), (2, 1, 1));
    }

    #[test]
    fn single_element_norm() {
        let d = Dictionary::build(grid(2, 2), DictionaryKind::DyadicCubes { depth: Some(0) }).unwrap();
        let norm = d.operator_norm(1e-12, 100).unwrap();
        assert!((norm.value - 0.5).abs() < 1e-12);
        assert!(norm.converged);
    }

    #[test]
    fn wavelet_norm_is_inverse_sqrt_n() {
        let d = Dictionary::build(
            grid(16, 16),
            DictionaryKind::Wavelet {
                filter: WaveletFilter::Symlet6,
                depth: None,
            },
        )
        .unwrap();
        let norm = d.operator_norm(1e-10, 50).unwrap();
        assert!((norm.value - 1.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn operator_norm_rejects_bad_tol() {
        let d = Dictionary::build(grid(2, 2), DictionaryKind::DyadicCubes { depth: None }).unwrap();
        assert!(d.operator_norm(0.0, 10).is_err());
    }

    #[test]
    fn coefficient_dump_round_trip() {
        let d = Dictionary::build(grid(4, 4), DictionaryKind::SmallCubes { max_edge: 2 }).unwrap();
        let img = Image::from_fn(d.grid(), |x, y| x * 3.0 - y).unwrap();
        let c = d.analyze(&img).unwrap();
        let mut buf = Vec::new();
        d.write_coefficients(&c, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 8 * c.len());
        assert_eq!(&buf[..8], b"MINDCOEF");
        assert_eq!(read_coefficients(&buf[..]).unwrap(), c);
        assert!(read_coefficients(&buf[..20]).is_err());
    }

    #[test]
    fn fingerprint_depends_on_parameters() {
        let g = grid(8, 8);
        let a = Dictionary::build(g, DictionaryKind::SmallCubes { max_edge: 2 }).unwrap();
        let b = Dictionary::build(g, DictionaryKind::SmallCubes { max_edge: 3 }).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
    }
}
