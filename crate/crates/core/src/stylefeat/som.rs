use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LEARNING_RATE: (f64, f64) = (0.5, 0.01);
const FINAL_RADIUS: f64 = 0.5;
// neighbourhood weights below this are treated as zero
const NEIGHBOUR_CUTOFF: f64 = 1e-4;

/// Self-organising map of prototypical fraglet contours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    width: usize,
    height: usize,
    dim: usize,
    /// Unit vectors, row-major over the grid, `dim` values each.
    units: Vec<f64>,
    pub epochs: usize,
    pub seed: u64,
}

/// Result of [`train_codebook`]: the map and its quantisation error after
/// every epoch.
#[derive(Debug, Clone)]
pub struct SomTraining {
    pub codebook: Codebook,
    pub quantization_error: Vec<f64>,
}

impl Codebook {
    pub fn from_units(width: usize, height: usize, dim: usize, units: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || width * height < 2 {
            return Err(Error::Config(format!(
                "codebook grid needs at least 2 units, got {width}x{height}"
            )));
        }
        if dim == 0 || units.len() != width * height * dim {
            return Err(Error::Input(format!(
                "expected {} unit values for a {width}x{height}x{dim} codebook, got {}",
                width * height * dim,
                units.len()
            )));
        }
        if units.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("codebook", "non-finite unit entry"));
        }
        Ok(Codebook {
            width,
            height,
            dim,
            units,
            epochs: 0,
            seed: 0,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn unit(&self, i: usize) -> &[f64] {
        &self.units[i * self.dim..(i + 1) * self.dim]
    }

    /// Index of the nearest unit (Euclidean); ties go to the lowest index.
    pub fn best_matching_unit(&self, v: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for i in 0..self.len() {
            if let Some(d) = sq_dist_below(self.unit(i), v, best_d) {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Mean distance from each sample to its best-matching unit.
    pub fn quantization_error(&self, samples: &[Vec<f64>]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        samples
            .iter()
            .map(|s| sq_dist(self.unit(self.best_matching_unit(s)), s).sqrt())
            .sum::<f64>()
            / samples.len() as f64
    }

    /// Text serialisation: one header line, then one CSV row per unit.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# enoch-codebook v1 width={} height={} dim={} seed={} epochs={}\n",
            self.width, self.height, self.dim, self.seed, self.epochs
        );
        for i in 0..self.len() {
            let row: Vec<String> = self.unit(i).iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn from_text(r: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty codebook file".into(),
        })??;
        let fields = header
            .strip_prefix("# enoch-codebook v1")
            .ok_or(Error::Parse {
                line: 1,
                msg: "not an enoch-codebook v1 file".into(),
            })?;
        let get = |key: &str| -> Result<u64> {
            fields
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                .and_then(|v| v.parse().ok())
                .ok_or(Error::Parse {
                    line: 1,
                    msg: format!("missing header field {key}"),
                })
        };
        let (width, height, dim) = (
            get("width")? as usize,
            get("height")? as usize,
            get("dim")? as usize,
        );
        let (seed, epochs) = (get("seed")?, get("epochs")? as usize);
        let mut units = Vec::with_capacity(width * height * dim);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let before = units.len();
            for tok in line.split(',') {
                units.push(tok.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 2,
                    msg: format!("bad value {tok:?}: {e}"),
                })?);
            }
            if units.len() - before != dim {
                return Err(Error::Parse {
                    line: i + 2,
                    msg: format!("expected {dim} values, got {}", units.len() - before),
                });
            }
        }
        let mut cb = Codebook::from_units(width, height, dim, units)?;
        cb.seed = seed;
        cb.epochs = epochs;
        Ok(cb)
    }

    fn grid_pos(&self, i: usize) -> (f64, f64) {
        ((i % self.width) as f64, (i / self.width) as f64)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared distance if it is below `limit`. Accumulates in the same order as
/// [`sq_dist`], so a returned value is bit-identical to it.
fn sq_dist_below(a: &[f64], b: &[f64], limit: f64) -> Option<f64> {
    let mut d = 0.0;
    for (ca, cb) in a.chunks(32).zip(b.chunks(32)) {
        d = ca
            .iter()
            .zip(cb)
            .fold(d, |acc, (x, y)| acc + (x - y) * (x - y));
        if d >= limit {
            return None;
        }
    }
    Some(d)
}

/// Train a Kohonen map on fraglet descriptors.
///
/// Units start as randomly drawn samples. Each epoch visits the samples in a
/// fresh random order; the winner and its grid neighbours move towards the
/// sample with a Gaussian neighbourhood. Learning rate and radius decay
/// exponentially from `(0.5, max(W, H) / 2)` to `(0.01, 0.5)` over the whole
/// run. Deterministic for a given seed.
pub fn train_codebook(
    samples: &[Vec<f64>],
    width: usize,
    height: usize,
    epochs: usize,
    seed: u64,
) -> Result<SomTraining> {
    if samples.is_empty() {
        return Err(Error::Input(
            "cannot train a codebook without fraglets".into(),
        ));
    }
    if epochs == 0 {
        return Err(Error::Config(
            "codebook training needs at least one epoch".into(),
        ));
    }
    let dim = samples[0].len();
    if samples.iter().any(|s| s.len() != dim) {
        return Err(Error::Input("fraglet descriptors differ in length".into()));
    }
    if samples.len() * 10 < width * height {
        log::warn!(
            "only {} fraglets for a {width}x{height} codebook; expect empty units",
            samples.len()
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let units: Vec<f64> = (0..width * height)
        .flat_map(|_| samples[rng.random_range(0..samples.len())].iter().copied())
        .collect();
    let mut cb = Codebook::from_units(width, height, dim, units)?;
    cb.epochs = epochs;
    cb.seed = seed;

    let r0 = (width.max(height) as f64 / 2.0).max(FINAL_RADIUS);
    let total = (epochs * samples.len()) as f64;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut step = 0usize;
    let mut qe = Vec::with_capacity(epochs);

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            let frac = if total > 1.0 {
                step as f64 / (total - 1.0)
            } else {
                1.0
            };
            let lr = LEARNING_RATE.0 * (LEARNING_RATE.1 / LEARNING_RATE.0).powf(frac);
            let radius = r0 * (FINAL_RADIUS / r0).powf(frac);
            update(&mut cb, &samples[idx], lr, radius);
            step += 1;
        }
        qe.push(cb.quantization_error(samples));
    }
    if cb.units.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(
            "codebook training",
            "unit vector became non-finite",
        ));
    }
    Ok(SomTraining {
        codebook: cb,
        quantization_error: qe,
    })
}

fn update(cb: &mut Codebook, sample: &[f64], lr: f64, radius: f64) {
    let bmu = cb.best_matching_unit(sample);
    let (bx, by) = cb.grid_pos(bmu);
    let two_r2 = 2.0 * radius * radius;
    let reach = (-(NEIGHBOUR_CUTOFF.ln()) * two_r2).sqrt().ceil() as i64;
    let (w, h) = (cb.width as i64, cb.height as i64);
    let dim = cb.dim;
    for gy in (by as i64 - reach).max(0)..=(by as i64 + reach).min(h - 1) {
        for gx in (bx as i64 - reach).max(0)..=(bx as i64 + reach).min(w - 1) {
            let d2 = (gx as f64 - bx).powi(2) + (gy as f64 - by).powi(2);
            let g = (-d2 / two_r2).exp();
            if g < NEIGHBOUR_CUTOFF {
                continue;
            }
            let i = (gy * w + gx) as usize;
            let unit = &mut cb.units[i * dim..(i + 1) * dim];
            let k = lr * g;
            for (u, s) in unit.iter_mut().zip(sample) {
                *u += k * (s - *u);
            }
        }
    }
}
