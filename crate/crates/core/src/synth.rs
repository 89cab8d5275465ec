//! Seeded synthetic manifolds with known generating parameters.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// 3-D swiss roll; params are (angle t, height h).
    SwissRoll,
    /// `g × g` images of a Gaussian blob; params are the blob center (x, y).
    TranslatingBlob,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swiss_roll" | "swiss-roll" => Ok(Self::SwissRoll),
            "translating_blob" | "translating-blob" | "blob" => Ok(Self::TranslatingBlob),
            other => Err(Error::Parameter(format!("unknown synthetic dataset `{other}`"))),
        }
    }
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::SwissRoll => "swiss_roll",
            Self::TranslatingBlob => "translating_blob",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    /// Image side length for blobs (`d = grid²`).
    pub grid: usize,
    /// Gaussian standard deviation of the blob, in pixels.
    pub radius: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            grid: 16,
            radius: 2.0,
        }
    }
}

// the usual roll: t uniform in [1.5pi, 4.5pi], height uniform in [0, 21]
const T0: f64 = 1.5 * PI;
const T1: f64 = 4.5 * PI;
const HEIGHT: f64 = 21.0;

pub fn synth_dataset(kind: SynthKind, n: usize, seed: u64, options: SynthOptions) -> Result<DataMatrix> {
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 points, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        SynthKind::SwissRoll => {
            let mut points = Vec::with_capacity(n * 3);
            let mut params = Vec::with_capacity(n * 2);
            for _ in 0..n {
                let t = T0 + (T1 - T0) * rng.random::<f64>();
                let h = HEIGHT * rng.random::<f64>();
                points.extend_from_slice(&[t * t.cos(), h, t * t.sin()]);
                params.extend_from_slice(&[t, h]);
            }
            DataMatrix::new(n, 3, points)?.with_params(DMatrix::from_row_slice(n, 2, &params))
        }
        SynthKind::TranslatingBlob => {
            let g = options.grid;
            if g < 2 {
                return Err(Error::Parameter(format!("grid side must be at least 2, got {g}")));
            }
            if !(options.radius.is_finite() && options.radius > 0.0) {
                return Err(Error::Parameter(format!(
                    "blob radius must be positive, got {}",
                    options.radius
                )));
            }
            let mut points = Vec::with_capacity(n * g * g);
            let mut params = Vec::with_capacity(n * 2);
            for _ in 0..n {
                let cx = g as f64 * rng.random::<f64>();
                let cy = g as f64 * rng.random::<f64>();
                points.extend(blob_image(g, options.radius, cx, cy));
                params.extend_from_slice(&[cx, cy]);
            }
            DataMatrix::new(n, g * g, points)?
                .with_image_shape(g, g)?
                .with_params(DMatrix::from_row_slice(n, 2, &params))
        }
    }
}

/// Row-major `g × g` image of a unit-height Gaussian centered at `(cx, cy)`,
/// where pixel `(row, col)` sits at coordinates `(col, row)`.
pub fn blob_image(g: usize, radius: f64, cx: f64, cy: f64) -> Vec<f64> {
    let denom = 2.0 * radius * radius;
    let mut img = Vec::with_capacity(g * g);
    for r in 0..g {
        for c in 0..g {
            let dx = c as f64 - cx;
            let dy = r as f64 - cy;
            img.push((-(dx * dx + dy * dy) / denom).exp());
        }
    }
    img
}
