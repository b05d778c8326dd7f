//! Synthetic dated manuscripts with a known style drift.
//!
//! Each manuscript is a page of stroked glyphs whose corners get rounder as
//! the year advances, together with a Gaussian stand-in for its radiocarbon
//! curve. The true year is kept, so a full validation run can be scored
//! against ground truth.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chrono::{write_oxcal_raw, DateDistribution, GridSpec, Manifest, ManuscriptEntry};
use crate::error::{Error, Result};
use crate::ink::{save_image, BitonalImage};
use crate::seeds;
use crate::stylefeat::{tri_index, HingeHistogram};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub manuscripts: usize,
    /// Earliest year of the corpus.
    pub start: f64,
    /// Years covered, starting at `start`.
    pub span: f64,
    /// Width of the pseudo-radiocarbon Gaussian, in years.
    pub sigma_c14: f64,
    pub seed: u64,
    /// Inclusive range of glyphs per page.
    pub glyphs: (usize, usize),
    /// Glyph height in pixels.
    pub glyph_size: f64,
    /// Spread of the per-glyph roundness around the manuscript's value.
    pub noise: f64,
    pub grid: GridSpec,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            manuscripts: 24,
            start: -300.0,
            span: 500.0,
            sigma_c14: 30.0,
            seed: 1,
            glyphs: (150, 200),
            glyph_size: 24.0,
            noise: 0.05,
            grid: GridSpec::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.manuscripts < 3 {
            return Err(Error::Config(format!(
                "a synthetic corpus needs at least 3 manuscripts, got {}",
                self.manuscripts
            )));
        }
        if !(self.span > 0.0) || !self.start.is_finite() {
            return Err(Error::Config(format!(
                "synthetic span {} must be positive",
                self.span
            )));
        }
        if !(self.sigma_c14 >= 0.0) || !(self.noise >= 0.0) {
            return Err(Error::Config(
                "radiocarbon width and noise must be non-negative".into(),
            ));
        }
        if self.glyphs.0 == 0 || self.glyphs.0 > self.glyphs.1 {
            return Err(Error::Config(format!(
                "glyph range {:?} is empty",
                self.glyphs
            )));
        }
        if !(self.glyph_size >= 8.0) {
            return Err(Error::Config(format!(
                "glyph size {} is below 8 pixels",
                self.glyph_size
            )));
        }
        Ok(())
    }

    /// Stroke curvature of the script in a given year, from 0.05 to 0.95.
    /// It sets both how far corners are rounded and how far straight
    /// segments bow.
    pub fn roundness(&self, year: f64) -> f64 {
        0.05 + 0.9 * ((year - self.start) / self.span).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthManuscript {
    pub id: String,
    pub true_year: f64,
    pub roundness: f64,
    pub glyphs: usize,
    pub image: BitonalImage,
    pub curve: DateDistribution,
}

/// Control-point offset of a fully bowed segment, as a share of its length.
const BOW: f64 = 0.25;

/// Skeletons of the glyph inventory in a unit box, y down.
const SHAPES: &[&[(f64, f64)]] = &[
    &[(0.0, 0.0), (0.0, 1.0), (0.7, 1.0)],
    &[(0.0, 0.0), (0.4, 1.0), (0.8, 0.0)],
    &[(0.0, 0.0), (0.8, 0.0), (0.0, 1.0), (0.8, 1.0)],
    &[(0.0, 1.0), (0.0, 0.0), (0.7, 1.0), (0.7, 0.0)],
    &[(0.8, 0.0), (0.0, 0.0), (0.0, 1.0), (0.8, 1.0)],
    &[(0.0, 0.35), (0.4, 0.0), (0.8, 0.35), (0.8, 1.0)],
    &[(0.0, 0.0), (0.7, 0.0), (0.7, 1.0), (0.2, 1.0)],
    &[(0.0, 1.0), (0.4, 0.0), (0.8, 1.0), (0.1, 0.55)],
];

/// Years spread one per stratum of the span, in increasing order.
pub fn stratified_years(cfg: &SynthConfig) -> Vec<f64> {
    let mut rng = seeds::rng(cfg.seed, "synth-years", 0);
    let n = cfg.manuscripts as f64;
    (0..cfg.manuscripts)
        .map(|i| {
            let y = cfg.start + cfg.span * (i as f64 + rng.random::<f64>()) / n;
            y.round()
        })
        .collect()
}

/// Gaussian around `year` on the grid; a point mass on the nearest grid year
/// when `sigma` is zero.
pub fn pseudo_c14(year: f64, sigma: f64, grid: &GridSpec) -> Result<DateDistribution> {
    let mut mass = vec![0.0; grid.len];
    if sigma > 0.0 {
        for (i, m) in mass.iter_mut().enumerate() {
            let y = grid.first + grid.step * i as f64;
            *m = (-(y - year).powi(2) / (2.0 * sigma * sigma)).exp();
        }
    }
    if mass.iter().all(|&m| m < 1e-300) {
        let i = ((year - grid.first) / grid.step).round();
        if i < 0.0 || i >= grid.len as f64 {
            return Err(Error::OutOfRange {
                year,
                first: grid.first,
                last: grid.first + grid.step * (grid.len - 1) as f64,
            });
        }
        mass.iter_mut().for_each(|m| *m = 0.0);
        mass[i as usize] = 1.0;
    }
    DateDistribution::new(grid.first, grid.step, mass)?.normalized()
}

/// Skeleton with rounded corners and bowed segments, sampled densely
/// enough to stamp. Both effects scale with `roundness`.
fn glyph_path(shape: &[(f64, f64)], roundness: f64) -> Vec<(f64, f64)> {
    let lerp =
        |a: (f64, f64), b: (f64, f64), t: f64| (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t);
    let dist = |a: (f64, f64), b: (f64, f64)| ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    let quad = |a: (f64, f64), c: (f64, f64), b: (f64, f64), t: f64| {
        let u = 1.0 - t;
        (
            u * u * a.0 + 2.0 * u * t * c.0 + t * t * b.0,
            u * u * a.1 + 2.0 * u * t * c.1 + t * t * b.1,
        )
    };
    let n = shape.len();
    // where each corner's curve starts and ends
    let mut cut_in = shape.to_vec();
    let mut cut_out = shape.to_vec();
    for i in 1..n - 1 {
        let (a, p, b) = (shape[i - 1], shape[i], shape[i + 1]);
        let d = 0.5 * roundness * dist(a, p).min(dist(p, b));
        cut_in[i] = lerp(p, a, d / dist(a, p));
        cut_out[i] = lerp(p, b, d / dist(p, b));
    }
    let steps = 40;
    let mut out = Vec::new();
    for i in 0..n - 1 {
        let (s, e) = (cut_out[i], cut_in[i + 1]);
        let len = dist(s, e);
        let bow = BOW * roundness * len;
        let mid = lerp(s, e, 0.5);
        let c = if len > 0.0 {
            (
                mid.0 - (e.1 - s.1) / len * bow,
                mid.1 + (e.0 - s.0) / len * bow,
            )
        } else {
            mid
        };
        out.extend((0..=steps).map(|k| quad(s, c, e, k as f64 / steps as f64)));
        if i + 1 < n - 1 {
            let (a, c, b) = (cut_in[i + 1], shape[i + 1], cut_out[i + 1]);
            out.extend((0..=steps).map(|k| quad(a, c, b, k as f64 / steps as f64)));
        }
    }
    out
}

fn render_page(
    cfg: &SynthConfig,
    roundness: f64,
    glyphs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<BitonalImage> {
    let size = cfg.glyph_size;
    let cell = (size * 1.45).ceil() as usize;
    let cols = 14;
    let rows = glyphs.div_ceil(cols);
    let (w, h) = (cols * cell + cell / 2, rows * cell + cell / 2);
    let mut ink = vec![false; w * h];
    let pen = (size / 14.0).max(1.0);
    let jitter = Normal::new(0.0, cfg.noise).map_err(|e| Error::numeric("synth", e.to_string()))?;
    let offset = rng.random_range(0..SHAPES.len());
    for g in 0..glyphs {
        let shape = SHAPES[(g + offset) % SHAPES.len()];
        let r = (roundness + jitter.sample(rng)).clamp(0.0, 1.0);
        let scale = size * rng.random_range(0.9..1.1);
        let tilt: f64 = rng.random_range(-0.08..0.08);
        let (ox, oy) = (
            (g % cols) as f64 * cell as f64 + cell as f64 * 0.35,
            (g / cols) as f64 * cell as f64 + cell as f64 * 0.3,
        );
        let (ct, st) = (tilt.cos(), tilt.sin());
        for (u, v) in glyph_path(shape, r) {
            let (x, y) = ((u - 0.4) * scale, (v - 0.5) * scale);
            let (cx, cy) = (
                ox + 0.4 * scale + ct * x - st * y,
                oy + 0.5 * scale + st * x + ct * y,
            );
            let reach = pen.ceil() as i64;
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    let (px, py) = (cx.round() as i64 + dx, cy.round() as i64 + dy);
                    let d2 = (px as f64 - cx).powi(2) + (py as f64 - cy).powi(2);
                    if d2 <= pen * pen
                        && px >= 0
                        && py >= 0
                        && (px as usize) < w
                        && (py as usize) < h
                    {
                        ink[py as usize * w + px as usize] = true;
                    }
                }
            }
        }
    }
    BitonalImage::from_ink(w, h, ink)
}

/// Generate the corpus; manuscripts are built in parallel from per-index
/// seeds, so the result does not depend on the thread count.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<Vec<SynthManuscript>> {
    cfg.validate()?;
    let years = stratified_years(cfg);
    let width = cfg.manuscripts.to_string().len();
    years
        .par_iter()
        .enumerate()
        .map(|(i, &year)| {
            let mut rng = seeds::rng(cfg.seed, "synth-page", i as u64);
            let glyphs = rng.random_range(cfg.glyphs.0..=cfg.glyphs.1);
            let roundness = cfg.roundness(year);
            Ok(SynthManuscript {
                id: format!("syn{:0width$}", i + 1),
                true_year: year,
                roundness,
                glyphs,
                image: render_page(cfg, roundness, glyphs, &mut rng)?,
                curve: pseudo_c14(year, cfg.sigma_c14, &cfg.grid)?,
            })
        })
        .collect()
}

/// Write images, curve files and a manifest under `dir`; returns the
/// manifest path.
pub fn write_corpus(dir: &Path, corpus: &[SynthManuscript]) -> Result<PathBuf> {
    let io = |p: &Path, e: std::io::Error| Error::from(e).in_file(p);
    for sub in ["images", "curves"] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| io(&d, e))?;
    }
    let mut entries = Vec::with_capacity(corpus.len());
    for m in corpus {
        let image = PathBuf::from("images").join(format!("{}.png", m.id));
        let curve = PathBuf::from("curves").join(format!("{}.txt", m.id));
        save_image(&dir.join(&image), &m.image)?;
        let cp = dir.join(&curve);
        std::fs::write(&cp, write_oxcal_raw(&m.curve)).map_err(|e| io(&cp, e))?;
        entries.push(ManuscriptEntry {
            id: m.id.clone(),
            images: vec![image],
            curve: Some(curve),
            ranges: Vec::new(),
            cut: None,
            accept: None,
            train: true,
            true_year: Some(m.true_year),
            note: None,
        });
    }
    let manifest = Manifest {
        grid: None,
        manuscripts: entries,
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest.to_json()?).map_err(|e| io(&path, e))?;
    Ok(path)
}

/// Mean bend of the hinge pairs: 0 when every pair of legs is straight,
/// 1 when every pair is folded back onto itself. Curvier strokes bend more
/// of their contour and raise it.
pub fn angular_sharpness(h: &HingeHistogram) -> f64 {
    let q = h.params.bins;
    let block = h.params.block_len();
    let mut s = 0.0;
    for b in h.bins.chunks(block) {
        for i in 0..q {
            for j in i..q {
                let d = (j - i) as f64 / q as f64;
                let opening = d.min(1.0 - d) * 2.0;
                s += b[tri_index(q, i, j)] * (1.0 - opening);
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stylefeat::{hinge_histogram, HingeParams};

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            manuscripts: 6,
            glyphs: (20, 30),
            seed,
            ..SynthConfig::default()
        }
    }

    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    }

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        let (ra, rb) = (ranks(a), ranks(b));
        let n = a.len() as f64;
        let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }

    #[test]
    fn stratified_years_cover_the_span() {
        let cfg = SynthConfig::default();
        let y = stratified_years(&cfg);
        assert_eq!(y.len(), 24);
        assert!(y.windows(2).all(|w| w[0] <= w[1]));
        assert!(y[0] - cfg.start <= 0.1 * cfg.span);
        assert!(cfg.start + cfg.span - y[23] <= 0.1 * cfg.span);
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate_corpus(&small(3)).unwrap();
        let b = generate_corpus(&small(3)).unwrap();
        assert_eq!(a, b);
        let c = generate_corpus(&small(4)).unwrap();
        assert_ne!(a[0].image, c[0].image);
    }

    #[test]
    fn glyph_count_and_ink() {
        let cfg = SynthConfig {
            manuscripts: 3,
            ..SynthConfig::default()
        };
        for m in generate_corpus(&cfg).unwrap() {
            assert!((150..=200).contains(&m.glyphs));
            let comps = crate::ink::extract_components(&m.image).len();
            // glyphs never touch their neighbours
            assert_eq!(comps, m.glyphs, "{}", m.id);
        }
    }

    #[test]
    fn pseudo_curves() {
        let g = GridSpec::default();
        let d = pseudo_c14(-123.0, 30.0, &g).unwrap();
        assert!((d.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((d.mode_year().unwrap() + 123.0).abs() <= 30.0);
        let one = pseudo_c14(-123.0, 0.0, &g).unwrap();
        assert_eq!(one.mass().iter().filter(|&&m| m > 0.0).count(), 1);
        assert_eq!(one.mode_year().unwrap(), -125.0);
        assert!(pseudo_c14(5000.0, 0.0, &g).is_err());
    }

    #[test]
    fn corner_rounding() {
        let sharp = glyph_path(SHAPES[0], 0.0);
        assert!(sharp.iter().any(|&(x, y)| x == 0.0 && y == 1.0));
        let round = glyph_path(SHAPES[0], 1.0);
        let closest = round
            .iter()
            .map(|&(x, y)| (x * x + (y - 1.0).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(closest > 0.1);
    }

    #[test]
    fn sharpness_tracks_the_year() {
        let cfg = SynthConfig::default();
        let corpus = generate_corpus(&cfg).unwrap();
        let p = HingeParams::default();
        let s: Vec<f64> = corpus
            .iter()
            .map(|m| angular_sharpness(&hinge_histogram(&m.image, &p).unwrap()))
            .collect();
        let years: Vec<f64> = corpus.iter().map(|m| m.true_year).collect();
        let rho = spearman(&years, &s);
        assert!(rho.abs() > 0.9, "rho = {rho}");
    }

    #[test]
    fn written_corpus_loads_as_a_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_corpus(&small(5)).unwrap();
        let path = write_corpus(dir.path(), &corpus).unwrap();
        let m = Manifest::load(&path).unwrap();
        assert_eq!(m.manuscripts.len(), 6);
        for (e, s) in m.manuscripts.iter().zip(&corpus) {
            assert_eq!(e.true_year, Some(s.true_year));
            let d = m.distribution(e).unwrap();
            for (a, b) in d.mass().iter().zip(s.curve.mass()) {
                assert!((a - b).abs() <= 1e-15 * b.max(1e-300));
            }
            let img = crate::ink::load_image(&m.resolve(&e.images[0]), crate::ink::Threshold::Otsu)
                .unwrap();
            assert_eq!(img, s.image);
        }
    }

    #[test]
    fn bad_configs() {
        let c = SynthConfig {
            manuscripts: 2,
            ..SynthConfig::default()
        };
        assert!(generate_corpus(&c).is_err());
        let c = SynthConfig {
            span: 0.0,
            ..SynthConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
