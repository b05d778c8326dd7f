use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ink::{extract_components, trace_boundary, BitonalImage, Point};

/// Hinge kernel configuration. Several leg lengths give one block each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HingeParams {
    pub legs: Vec<usize>,
    pub bins: usize,
}

impl Default for HingeParams {
    fn default() -> Self {
        HingeParams {
            legs: vec![7],
            bins: 19,
        }
    }
}

impl HingeParams {
    pub fn validate(&self) -> Result<()> {
        if self.legs.is_empty() {
            return Err(Error::Config("hinge needs at least one leg length".into()));
        }
        if let Some(r) = self.legs.iter().find(|&&r| r < 2) {
            return Err(Error::Config(format!("hinge leg length {r} is below 2")));
        }
        if self.bins < 4 {
            return Err(Error::Config(format!(
                "hinge needs at least 4 angle bins, got {}",
                self.bins
            )));
        }
        Ok(())
    }

    /// Values per leg block: the upper triangle of a `bins x bins` matrix.
    pub fn block_len(&self) -> usize {
        self.bins * (self.bins + 1) / 2
    }

    pub fn len(&self) -> usize {
        self.legs.len() * self.block_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Normalised angle co-occurrence histogram along ink contours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HingeHistogram {
    pub params: HingeParams,
    /// Concatenated upper-triangular blocks, one per leg length.
    pub bins: Vec<f64>,
    /// True when no contour was long enough to place a hinge.
    pub empty: bool,
}

/// Quantise the direction of `(dx, dy)` (y-up) into `q` bins over `[0, 2π)`.
///
/// The quadrant is taken from the signs and only the in-quadrant angle goes
/// through `atan2`, so a quarter turn of the input maps bin `b` exactly to
/// `b + q/4` whenever `q` is a multiple of four.
pub fn angle_bin(dx: i64, dy: i64, q: usize) -> usize {
    debug_assert!(dx != 0 || dy != 0);
    // rotate into the first quadrant [0, π/2)
    let (quadrant, u, v) = match (dx, dy) {
        (x, y) if x > 0 && y >= 0 => (0, x, y),
        (x, y) if x <= 0 && y > 0 => (1, y, -x),
        (x, y) if x < 0 && y <= 0 => (2, -x, -y),
        (x, y) => (3, -y, x),
    };
    let t = (v as f64).atan2(u as f64) / FRAC_PI_2;
    let b = ((quadrant as f64 + t) * q as f64 / 4.0).floor() as usize;
    b.min(q - 1)
}

/// Hinge feature of a whole page.
///
/// Every outer contour is traced; at each contour pixel the two points `r`
/// steps ahead and behind define two legs whose angles are quantised and
/// counted as an unordered pair. Contours shorter than `2r + 1` are skipped.
/// Each leg block is normalised and the blocks are averaged in weight so the
/// whole histogram sums to one.
pub fn hinge_histogram(img: &BitonalImage, params: &HingeParams) -> Result<HingeHistogram> {
    params.validate()?;
    let contours: Vec<Vec<Point>> = extract_components(img).iter().map(trace_boundary).collect();
    Ok(hinge_from_contours(&contours, params))
}

pub(crate) fn hinge_from_contours(contours: &[Vec<Point>], params: &HingeParams) -> HingeHistogram {
    let q = params.bins;
    let block = params.block_len();
    let mut bins = vec![0.0; params.len()];
    let mut filled = 0usize;
    for (k, &r) in params.legs.iter().enumerate() {
        let out = &mut bins[k * block..(k + 1) * block];
        let mut total = 0.0;
        for c in contours {
            let n = c.len();
            if n < 2 * r + 1 {
                continue;
            }
            for i in 0..n {
                let p = c[i];
                let a = c[(i + r) % n];
                let b = c[(i + n - r) % n];
                if a == p || b == p {
                    continue;
                }
                // screen y grows downwards
                let f1 = angle_bin((a.0 - p.0) as i64, (p.1 - a.1) as i64, q);
                let f2 = angle_bin((b.0 - p.0) as i64, (p.1 - b.1) as i64, q);
                out[tri_index(q, f1.min(f2), f1.max(f2))] += 1.0;
                total += 1.0;
            }
        }
        if total > 0.0 {
            filled += 1;
            out.iter_mut().for_each(|v| *v /= total);
        }
    }
    if filled > 0 {
        let share = filled as f64;
        bins.iter_mut().for_each(|v| *v /= share);
    }
    HingeHistogram {
        params: params.clone(),
        bins,
        empty: filled == 0,
    }
}

/// Row-major index into the upper triangle (diagonal included) of a `q x q`
/// matrix.
pub fn tri_index(q: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < q);
    i * (2 * q - i + 1) / 2 + (j - i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn glyphs(w: usize, h: usize) -> BitonalImage {
        BitonalImage::from_fn(w, h, |x, y| {
            let (fx, fy) = (x as f64, y as f64);
            let ring = ((fx - 12.0).powi(2) + (fy - 12.0).powi(2)).sqrt();
            let stroke = (fy - 0.6 * fx - 2.0).abs() < 1.5 && (28.0..44.0).contains(&fx);
            (7.0..10.0).contains(&ring) || stroke || (30..40).contains(&x) && (30..33).contains(&y)
        })
        .unwrap()
    }

    #[test]
    fn triangle_indices_are_dense() {
        for q in [4, 7, 19, 20] {
            let mut seen = vec![false; q * (q + 1) / 2];
            for i in 0..q {
                for j in i..q {
                    let k = tri_index(q, i, j);
                    assert!(!seen[k], "q={q} ({i},{j})");
                    seen[k] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn angle_bins_follow_atan2() {
        let q = 19;
        for dx in -9i64..=9 {
            for dy in -9i64..=9 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let phi = (dy as f64)
                    .atan2(dx as f64)
                    .rem_euclid(std::f64::consts::TAU);
                let expect = (phi / std::f64::consts::TAU * q as f64).floor() as usize;
                let got = angle_bin(dx, dy, q);
                // the two can only disagree on a bin boundary
                if got != expect.min(q - 1) {
                    let edge = phi / std::f64::consts::TAU * q as f64;
                    assert!(
                        (edge - edge.round()).abs() < 1e-9,
                        "({dx},{dy}) {got} vs {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn blank_image_is_flagged_empty() {
        let img = BitonalImage::new(20, 20).unwrap();
        let h = hinge_histogram(&img, &HingeParams::default()).unwrap();
        assert!(h.empty);
        assert_eq!(h.bins.len(), 190);
        assert!(h.bins.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_params() {
        let img = BitonalImage::new(4, 4).unwrap();
        for p in [
            HingeParams {
                legs: vec![1],
                bins: 8,
            },
            HingeParams {
                legs: vec![],
                bins: 8,
            },
            HingeParams {
                legs: vec![3],
                bins: 3,
            },
        ] {
            assert!(matches!(hinge_histogram(&img, &p), Err(Error::Config(_))));
        }
    }

    #[test]
    fn quarter_turn_permutes_bins() {
        let p = HingeParams {
            legs: vec![5],
            bins: 20,
        };
        let q = p.bins;
        let img = glyphs(48, 40);
        let a = hinge_histogram(&img, &p).unwrap();
        let b = hinge_histogram(&img.rotate_ccw(), &p).unwrap();
        assert!(!a.empty);

        // permutation induced by the quantiser: a direction in bin k lands in k + q/4
        let shift = |k: usize| angle_bin_rotated(k, q);
        let mut expected = vec![0.0; a.bins.len()];
        for i in 0..q {
            for j in i..q {
                let (si, sj) = (shift(i), shift(j));
                expected[tri_index(q, si.min(sj), si.max(sj))] += a.bins[tri_index(q, i, j)];
            }
        }
        for (k, (x, y)) in expected.iter().zip(&b.bins).enumerate() {
            assert!((x - y).abs() < 1e-12, "bin {k}: {x} vs {y}");
        }
    }

    /// Which bin a quarter-turned direction from bin `k` falls in, found by
    /// rotating a representative integer vector of that bin.
    fn angle_bin_rotated(k: usize, q: usize) -> usize {
        for dx in -40i64..=40 {
            for dy in -40i64..=40 {
                if (dx, dy) != (0, 0) && angle_bin(dx, dy, q) == k {
                    return angle_bin(-dy, dx, q);
                }
            }
        }
        unreachable!("bin {k} has no representative");
    }

    #[test]
    fn duplicated_content_gives_the_same_histogram() {
        let p = HingeParams {
            legs: vec![4, 7],
            bins: 12,
        };
        let one = glyphs(48, 40);
        let two = BitonalImage::from_fn(96, 40, |x, y| one.get(x % 48, y)).unwrap();
        let a = hinge_histogram(&one, &p).unwrap();
        let b = hinge_histogram(&two, &p).unwrap();
        for (x, y) in a.bins.iter().zip(&b.bins) {
            assert!((x - y).abs() < 1e-6);
        }
        assert!((a.bins.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn normalised_and_translation_invariant(
            bits in proptest::collection::vec(any::<bool>(), 12 * 12),
            dx in 0usize..5,
            dy in 0usize..5,
        ) {
            let p = HingeParams { legs: vec![2, 3], bins: 8 };
            let img = BitonalImage::from_ink(12, 12, bits).unwrap();
            let moved = BitonalImage::from_fn(12 + dx, 12 + dy, |x, y| {
                x >= dx && y >= dy && img.get(x - dx, y - dy)
            }).unwrap();
            let a = hinge_histogram(&img, &p).unwrap();
            let b = hinge_histogram(&moved, &p).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.bins.iter().all(|&v| v >= 0.0));
            if !a.empty {
                prop_assert!((a.bins.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
