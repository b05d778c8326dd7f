use serde::{Deserialize, Serialize};

use super::{ConnectedComponent, Point};
use crate::error::{Error, Result};

/// How a resampled contour is encoded into the descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Encoding {
    /// Centroid-relative `(x, y)` positions.
    #[default]
    Coordinates,
    /// `(cos θ, sin θ)` of the chord to the next sample.
    Tangent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorParams {
    /// Number of contour samples; the descriptor has twice as many values.
    pub samples: usize,
    pub encoding: Encoding,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        DescriptorParams {
            samples: 200,
            encoding: Encoding::Coordinates,
        }
    }
}

/// A fragment of ink with its closed outer contour and the normalised
/// descriptor built from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Fraglet {
    /// Counter-clockwise (y-up) boundary pixels; the loop closes implicitly.
    pub contour: Vec<Point>,
    /// Interleaved `x0, y0, x1, y1, ...`, unit Euclidean norm.
    pub descriptor: Vec<f64>,
}

// Clockwise on screen, starting west.
const RING: [Point; 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn ring_index(d: Point) -> usize {
    RING.iter()
        .position(|&r| r == d)
        .expect("not a neighbour offset")
}

/// Moore-neighbour trace of the outer boundary of an 8-connected pixel set.
///
/// The trace starts at the first pixel in row-major order and stops when the
/// first move is about to be repeated. The returned loop is oriented
/// counter-clockwise in the y-up frame; a single pixel yields a one-element
/// loop.
pub fn trace_boundary(c: &ConnectedComponent) -> Vec<Point> {
    let mask = c.mask();
    let start = c.pixels()[0];
    let limit = 8 * c.len() + 16;

    // the pixel west of the top-left-most pixel is always background
    let mut cur = start;
    let mut back = 0usize;
    let mut contour = vec![start];
    let mut first_move: Option<Point> = None;

    for _ in 0..limit {
        let mut next = None;
        for k in 1..=8 {
            let dir = (back + k) % 8;
            let cand = (cur.0 + RING[dir].0, cur.1 + RING[dir].1);
            if mask.contains(cand) {
                let prev = (back + k - 1) % 8;
                let bg = (cur.0 + RING[prev].0, cur.1 + RING[prev].1);
                next = Some((cand, bg));
                break;
            }
        }
        let Some((cand, bg)) = next else {
            return contour; // isolated pixel
        };
        if cur == start {
            match first_move {
                None => first_move = Some(cand),
                Some(m) if m == cand => break,
                Some(_) => {}
            }
        }
        back = ring_index((bg.0 - cand.0, bg.1 - cand.1));
        cur = cand;
        contour.push(cur);
    }
    // the closing return to `start` is implicit
    if contour.len() > 1 && contour.last() == Some(&start) {
        contour.pop();
    }
    if signed_area(&contour) < 0.0 {
        contour[1..].reverse();
    }
    contour
}

/// Shoelace area in the y-up frame; positive for counter-clockwise loops.
fn signed_area(points: &[Point]) -> f64 {
    let n = points.len();
    let mut a = 0.0;
    for i in 0..n {
        let (x0, y0) = points[i];
        let (x1, y1) = points[(i + 1) % n];
        // y-up: negate screen y
        a += x0 as f64 * (-(y1 as f64)) - x1 as f64 * (-(y0 as f64));
    }
    a / 2.0
}

/// Arc-length-uniform resampling of a closed polyline to `n` points.
pub(crate) fn resample_closed(points: &[(f64, f64)], n: usize) -> Vec<(f64, f64)> {
    let m = points.len();
    let mut cum = Vec::with_capacity(m + 1);
    cum.push(0.0);
    for i in 0..m {
        let (a, b) = (points[i], points[(i + 1) % m]);
        cum.push(cum[i] + ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt());
    }
    let total = cum[m];
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let s = total * k as f64 / n as f64;
        while seg + 1 < m && cum[seg + 1] <= s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
        let (a, b) = (points[seg], points[(seg + 1) % m]);
        out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
    }
    out
}

/// Trace a fragment, resample its contour and normalise it into a
/// descriptor of `2 * samples` values.
pub fn contour_descriptor(fragment: &ConnectedComponent, p: &DescriptorParams) -> Result<Fraglet> {
    if p.samples < 4 {
        return Err(Error::Config(format!(
            "contour sample count must be at least 4, got {}",
            p.samples
        )));
    }
    let contour = trace_boundary(fragment);
    if contour.len() < 2 {
        return Err(Error::DegenerateContour(format!(
            "fragment at {:?} is a single pixel",
            contour[0]
        )));
    }
    let pts: Vec<(f64, f64)> = contour
        .iter()
        .map(|&(x, y)| (x as f64, -(y as f64)))
        .collect();
    let samples = resample_closed(&pts, p.samples);

    let descriptor = match p.encoding {
        Encoding::Coordinates => {
            let n = samples.len() as f64;
            let cx = samples.iter().map(|s| s.0).sum::<f64>() / n;
            let cy = samples.iter().map(|s| s.1).sum::<f64>() / n;
            let mut d: Vec<f64> = samples
                .iter()
                .flat_map(|&(x, y)| [x - cx, y - cy])
                .collect();
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::DegenerateContour("contour has zero extent".into()));
            }
            d.iter_mut().for_each(|v| *v /= norm);
            d
        }
        Encoding::Tangent => {
            let n = samples.len();
            let scale = 1.0 / (n as f64).sqrt();
            (0..n)
                .flat_map(|k| {
                    let (a, b) = (samples[k], samples[(k + 1) % n]);
                    let theta = (b.1 - a.1).atan2(b.0 - a.0);
                    [theta.cos() * scale, theta.sin() * scale]
                })
                .collect()
        }
    };
    Ok(Fraglet {
        contour,
        descriptor,
    })
}
