//! Random elastic "rubber-sheet" warps of bitonal images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ink::BitonalImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorphParams {
    /// Mean displacement magnitude in pixels.
    pub amplitude: f64,
    /// Standard deviation of the Gaussian smoothing kernel, in pixels.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for MorphParams {
    fn default() -> Self {
        MorphParams {
            amplitude: 1.0,
            sigma: 8.0,
            seed: 0,
        }
    }
}

impl MorphParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::Config(format!(
                "morph amplitude must be >= 0, got {}",
                self.amplitude
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!(
                "morph sigma must be > 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Smooth per-pixel displacement field `(dx, dy)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl DisplacementField {
    /// Uniform noise in `[-1, 1]` per axis, Gaussian-smoothed and rescaled so
    /// the mean displacement length is `amplitude`.
    pub fn random(width: usize, height: usize, p: &MorphParams) -> Result<Self> {
        p.validate()?;
        if width == 0 || height == 0 {
            return Err(Error::Input("cannot morph an empty image".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let n = width * height;
        let mut dx: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let mut dy: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let kernel = gaussian_kernel(p.sigma);
        blur(&mut dx, width, height, &kernel);
        blur(&mut dy, width, height, &kernel);

        let mean_len = dx.iter().zip(&dy).map(|(a, b)| a.hypot(*b)).sum::<f64>() / n as f64;
        let scale = if mean_len > 0.0 {
            p.amplitude / mean_len
        } else {
            0.0
        };
        dx.iter_mut().chain(dy.iter_mut()).for_each(|v| *v *= scale);
        Ok(DisplacementField {
            width,
            height,
            dx,
            dy,
        })
    }

    pub fn mean_magnitude(&self) -> f64 {
        let n = self.dx.len() as f64;
        self.dx
            .iter()
            .zip(&self.dy)
            .map(|(a, b)| a.hypot(*b))
            .sum::<f64>()
            / n
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

fn mirror(i: i64, n: usize) -> usize {
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

/// Separable convolution with mirrored borders.
fn blur(v: &mut [f64], w: usize, h: usize, kernel: &[f64]) {
    let r = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0; v.len()];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, c)| c * v[y * w + mirror(x as i64 + k as i64 - r, w)])
                .sum();
        }
    }
    for y in 0..h {
        for x in 0..w {
            v[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, c)| c * tmp[mirror(y as i64 + k as i64 - r, h) * w + x])
                .sum();
        }
    }
}

/// Warp `img` by a fresh random field: pixel `(i, j)` takes the bilinearly
/// interpolated ink value at `(i + dx, j + dy)`, thresholded at 0.5.
/// Samples outside the image count as paper.
pub fn elastic_morph(img: &BitonalImage, p: &MorphParams) -> Result<BitonalImage> {
    p.validate()?;
    if p.amplitude == 0.0 {
        return Ok(img.clone());
    }
    let field = DisplacementField::random(img.width(), img.height(), p)?;
    Ok(apply_field(img, &field))
}

pub fn apply_field(img: &BitonalImage, f: &DisplacementField) -> BitonalImage {
    let w = img.width();
    let value = |x: i64, y: i64| if img.is_ink(x, y) { 1.0 } else { 0.0 };
    BitonalImage::from_fn(w, img.height(), |x, y| {
        let sx = x as f64 + f.dx[y * w + x];
        let sy = y as f64 + f.dy[y * w + x];
        let (x0, y0) = (sx.floor(), sy.floor());
        let (tx, ty) = (sx - x0, sy - y0);
        let (x0, y0) = (x0 as i64, y0 as i64);
        let v = value(x0, y0) * (1.0 - tx) * (1.0 - ty)
            + value(x0 + 1, y0) * tx * (1.0 - ty)
            + value(x0, y0 + 1) * (1.0 - tx) * ty
            + value(x0 + 1, y0 + 1) * tx * ty;
        v >= 0.5
    })
    .expect("dimensions come from an existing image")
}
