//! Image quality measures: MISE, PSNR and SSIM.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{MindError, Result};
use crate::image::Image;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

/// `n⁻¹ Σ (f̂ − f)²`.
pub fn mise(fhat: &Image, f: &Image) -> Result<f64> {
    fhat.grid().check_same(&f.grid())?;
    let s: f64 = fhat.values().iter().zip(f.values()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(s / f.n() as f64)
}

/// `10·log10(peak² / MSE)`; `+∞` when the images coincide.
pub fn psnr(fhat: &Image, f: &Image, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(MindError::InvalidParameter(format!("peak must be > 0, got {peak}")));
    }
    Ok(psnr_from_mse(mise(fhat, f)?, peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut total = 0.0;
    for r in 0..SSIM_WINDOW {
        for k in 0..SSIM_WINDOW {
            let d2 = (r as f64 - c).powi(2) + (k as f64 - c).powi(2);
            let v = (-d2 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[r * SSIM_WINDOW + k] = v;
            total += v;
        }
    }
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Mean structural similarity over all fully contained 11×11 Gaussian windows (SD 1.5),
/// with stabilizers `C1 = (0.01·peak)²` and `C2 = (0.03·peak)²`.
pub fn ssim(fhat: &Image, f: &Image, peak: f64) -> Result<f64> {
    fhat.grid().check_same(&f.grid())?;
    if !(peak > 0.0) {
        return Err(MindError::InvalidParameter(format!("peak must be > 0, got {peak}")));
    }
    let (w, h) = (f.width(), f.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MindError::InvalidGrid(format!("SSIM needs at least 11x11, got {w}x{h}")));
    }
    let win = gaussian_window();
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let (a, b) = (fhat.values(), f.values());
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - SSIM_WINDOW {
        for x0 in 0..=w - SSIM_WINDOW {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in 0..SSIM_WINDOW {
                for k in 0..SSIM_WINDOW {
                    let wt = win[r * SSIM_WINDOW + k];
                    let i = (y0 + r) * w + x0 + k;
                    ma += wt * a[i];
                    mb += wt * b[i];
                    saa += wt * a[i] * a[i];
                    sbb += wt * b[i] * b[i];
                    sab += wt * a[i] * b[i];
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Quality of an estimate against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub mise: f64,
    /// `"inf"` in JSON when the images coincide.
    #[serde(serialize_with = "serialize_db", deserialize_with = "deserialize_db")]
    pub psnr: f64,
    pub ssim: f64,
    pub peak: f64,
}

impl QualityReport {
    pub fn compute(fhat: &Image, f: &Image, peak: f64) -> Result<Self> {
        let m = mise(fhat, f)?;
        Ok(Self {
            mise: m,
            psnr: psnr(fhat, f, peak)?,
            ssim: ssim(fhat, f, peak)?,
            peak,
        })
    }
}

fn serialize_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

fn deserialize_db<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Db {
        Num(f64),
        Text(String),
    }
    match Db::deserialize(d)? {
        Db::Num(v) => Ok(v),
        Db::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Db::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
        Db::Text(t) => Err(serde::de::Error::custom(format!("bad dB value {t:?}"))),
    }
}
