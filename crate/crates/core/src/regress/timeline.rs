use serde::{Deserialize, Serialize};

use crate::chrono::DateDistribution;
use crate::error::{Error, Result};

/// Calendar axis split into equal bins `[start + i w, start + (i + 1) w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub start: f64,
    pub end: f64,
    pub width: f64,
}

impl Default for Timeline {
    fn default() -> Self {
        Timeline {
            start: -310.0,
            end: 200.0,
            width: 10.0,
        }
    }
}

impl Timeline {
    pub fn new(start: f64, end: f64, width: f64) -> Result<Self> {
        let t = Timeline { start, end, width };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) || !(self.end > self.start) {
            return Err(Error::Config(format!(
                "timeline {}..{} with bin width {} is empty",
                self.start, self.end, self.width
            )));
        }
        let bins = (self.end - self.start) / self.width;
        if (bins - bins.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "timeline span {} is not a multiple of the bin width {}",
                self.end - self.start,
                self.width
            )));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        ((self.end - self.start) / self.width).round() as usize
    }

    pub fn bin_start(&self, i: usize) -> f64 {
        self.start + self.width * i as f64
    }

    /// Representative year of a bin: its centre.
    pub fn bin_year(&self, i: usize) -> f64 {
        self.bin_start(i) + self.width / 2.0
    }

    /// Bin holding `year`; the closing year `end` belongs to the last bin.
    pub fn bin_of(&self, year: f64) -> Option<usize> {
        if year < self.start || year > self.end {
            return None;
        }
        Some((((year - self.start) / self.width).floor() as usize).min(self.bins() - 1))
    }

    /// Sum a distribution's accepted mass into the bins and renormalise.
    /// Mass outside the timeline is dropped.
    pub fn bin_distribution(&self, d: &DateDistribution) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.bins()];
        let mut outside = 0.0;
        for (y, m) in d.years().zip(d.mass()) {
            match self.bin_of(y) {
                Some(i) => out[i] += m,
                None => outside += m,
            }
        }
        let total: f64 = out.iter().sum();
        if total <= 0.0 {
            return Err(Error::Input(format!(
                "no radiocarbon mass falls inside the timeline {}..{}",
                self.start, self.end
            )));
        }
        if outside > 0.01 * (total + outside) {
            log::warn!(
                "{:.1}% of a distribution lies outside the timeline and is dropped",
                100.0 * outside / (total + outside)
            );
        }
        out.iter_mut().for_each(|v| *v /= total);
        Ok(out)
    }
}

/// Per-bin predicted probability with its predictive standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionCurve {
    pub timeline: Timeline,
    /// Raw regression means; may dip below zero.
    pub mean: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Default smoothing width of the display curve, in bins.
pub const DISPLAY_SMOOTHING: f64 = 1.5;

impl PredictionCurve {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Means clamped at zero, as plotted.
    pub fn display_mean(&self) -> Vec<f64> {
        self.mean.iter().map(|m| m.max(0.0)).collect()
    }

    /// Gaussian-smoothed display curve (kernel width in bins); plotting only.
    pub fn smoothed(&self, sigma_bins: f64) -> Vec<f64> {
        gaussian_smooth(&self.display_mean(), sigma_bins)
    }

    /// Bin with the highest raw mean; ties go to the earliest bin.
    pub fn argmax(&self) -> usize {
        (0..self.len()).fold(0, |b, i| if self.mean[i] > self.mean[b] { i } else { b })
    }
}

/// Convolution with a normalised Gaussian truncated at 3σ; the kernel is
/// renormalised at the edges so a constant input stays constant.
pub fn gaussian_smooth(v: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return v.to_vec();
    }
    let r = (3.0 * sigma).ceil() as i64;
    let n = v.len() as i64;
    (0..n)
        .map(|i| {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for j in (i - r).max(0)..=(i + r).min(n - 1) {
                let w = (-((j - i) as f64).powi(2) / (2.0 * sigma * sigma)).exp();
                acc += w * v[j as usize];
                wsum += w;
            }
            acc / wsum
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_51_bins() {
        let t = Timeline::default();
        assert_eq!(t.bins(), 51);
        assert_eq!(t.bin_year(0), -305.0);
        assert_eq!(t.bin_of(200.0), Some(50));
        assert_eq!(t.bin_of(-310.0), Some(0));
        assert_eq!(t.bin_of(-301.0), Some(0));
        assert_eq!(t.bin_of(-300.0), Some(1));
        assert_eq!(t.bin_of(201.0), None);
    }

    #[test]
    fn uneven_span_is_rejected() {
        assert!(matches!(
            Timeline::new(-310.0, 205.0, 10.0),
            Err(Error::Config(_))
        ));
        assert!(Timeline::new(0.0, 0.0, 10.0).is_err());
    }

    #[test]
    fn five_year_points_pair_into_bins() {
        let t = Timeline::new(-20.0, 0.0, 10.0).unwrap();
        let d = DateDistribution::new(-30.0, 5.0, vec![0.5, 0.5, 1.0, 2.0, 3.0, 3.0, 0.0]).unwrap();
        let b = t.bin_distribution(&d).unwrap();
        assert_eq!(b, vec![3.0 / 9.0, 6.0 / 9.0]);
    }

    #[test]
    fn smoothing_keeps_constants_and_spreads_spikes() {
        assert_eq!(gaussian_smooth(&[2.0; 7], 1.5), vec![2.0; 7]);
        let mut spike = vec![0.0; 11];
        spike[5] = 1.0;
        let s = gaussian_smooth(&spike, 1.5);
        assert!(s[5] < 1.0 && s[4] > 0.0 && (s[4] - s[6]).abs() < 1e-15);
    }
}
