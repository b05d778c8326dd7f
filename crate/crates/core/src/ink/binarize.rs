use image::GrayImage;
use serde::{Deserialize, Serialize};

use super::BitonalImage;
use crate::error::{Error, Result};

/// How the ink threshold is chosen. A pixel is ink when its grey value is
/// strictly below the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Threshold {
    #[default]
    Otsu,
    Fixed(u8),
}

/// Otsu's threshold over a 256-bin histogram.
///
/// Returns `t` such that values `< t` form the dark class. When several
/// thresholds tie for the maximal between-class variance the middle of the
/// tied range is returned. A histogram with a single occupied level has no
/// split; mid-grey (128) is used so that black stays ink and white stays paper.
pub fn otsu_threshold(hist: &[u64; 256]) -> u8 {
    let total: u64 = hist.iter().sum();
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(v, &c)| v as f64 * c as f64)
        .sum();

    let mut best = -1.0f64;
    let mut first = 0usize;
    let mut last = 0usize;
    let mut w0 = 0u64;
    let mut sum0 = 0.0f64;
    for t in 1..256 {
        w0 += hist[t - 1];
        sum0 += (t - 1) as f64 * hist[t - 1] as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let mu0 = sum0 / w0 as f64;
        let mu1 = (sum_all - sum0) / w1 as f64;
        let between = w0 as f64 * w1 as f64 * (mu0 - mu1).powi(2);
        let tol = 1e-12 * best.abs().max(1.0);
        if between > best + tol {
            best = between;
            first = t;
            last = t;
        } else if (between - best).abs() <= tol {
            last = t;
        }
    }
    if best < 0.0 {
        return 128;
    }
    ((first + last) / 2) as u8
}

/// Threshold a greyscale image into ink and background.
///
/// Images that only contain pure black and white bypass the threshold search.
pub fn binarize(img: &GrayImage, policy: Threshold) -> Result<BitonalImage> {
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::Input("cannot binarize an empty image".into()));
    }
    let raw = img.as_raw();
    let t = match policy {
        Threshold::Fixed(t) => t,
        Threshold::Otsu => {
            if raw.iter().all(|&v| v == 0 || v == 255) {
                128
            } else {
                let mut hist = [0u64; 256];
                for &v in raw {
                    hist[v as usize] += 1;
                }
                otsu_threshold(&hist)
            }
        }
    };
    BitonalImage::from_ink(w as usize, h as usize, raw.iter().map(|&v| v < t).collect())
}
