//! Leave-one-out validation and the scores used to judge it.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chrono::{DateDistribution, Interval};
use crate::error::{Error, Result};
use crate::regress::PredictionCurve;
use crate::seeds;

/// Calibrated ranges used as the reference interval.
pub const REFERENCE_LEVEL: f64 = 0.954;

/// Peaks holding less than this share of the 2σ mass count as minor.
pub const MINOR_PEAK_SHARE: f64 = 0.1;

pub const DEFAULT_DRAWS: usize = 1000;

/// Monte-Carlo peak position of a prediction curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakEstimate {
    pub year: f64,
    /// Standard deviation of the drawn peak years.
    pub spread: f64,
    pub draws: usize,
}

/// Draw every bin from its Gaussian, note the year of the highest bin, and
/// summarise the noted years by their mean and standard deviation.
///
/// Works on the raw bins; smoothing would bias the peak towards the heavier
/// flank of an asymmetric curve.
pub fn gaussian_of_gaussian(
    curve: &PredictionCurve,
    draws: usize,
    seed: u64,
) -> Result<PeakEstimate> {
    if draws == 0 {
        return Err(Error::Config(
            "Gaussian-of-Gaussian needs at least one draw".into(),
        ));
    }
    if !curve.mean.iter().any(|&m| m > 0.0) {
        return Err(Error::numeric(
            "peak estimate",
            "prediction curve has no positive bin",
        ));
    }
    let mut rng = seeds::rng(seed, "gog", 0);
    let mut years = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, (&m, &s)) in curve.mean.iter().zip(&curve.sigma).enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let v = m + s * z;
            if v > best.1 {
                best = (i, v);
            }
        }
        years.push(curve.timeline.bin_year(best.0));
    }
    let mean = years.iter().sum::<f64>() / draws as f64;
    let var = years.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / draws as f64;
    Ok(PeakEstimate {
        year: mean,
        spread: var.sqrt(),
        draws,
    })
}

/// Share of the prediction interval covered by the reference, in percent,
/// and the signed endpoint differences (prediction minus reference).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub percent: f64,
    pub left: f64,
    pub right: f64,
}

pub fn overlap_and_margins(prediction: (f64, f64), reference: &[Interval]) -> Result<Overlap> {
    let (lo, hi) = prediction;
    if !(hi > lo) {
        return Err(Error::Input(format!(
            "prediction interval {lo}..{hi} is empty"
        )));
    }
    if reference.is_empty() {
        return Err(Error::EmptyMass);
    }
    let covered: f64 = reference
        .iter()
        .map(|r| (hi.min(r.end) - lo.max(r.start)).max(0.0))
        .sum();
    let ref_lo = reference
        .iter()
        .map(|r| r.start)
        .fold(f64::INFINITY, f64::min);
    let ref_hi = reference
        .iter()
        .map(|r| r.end)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Overlap {
        percent: (100.0 * covered / (hi - lo)).clamp(0.0, 100.0),
        left: lo - ref_lo,
        right: hi - ref_hi,
    })
}

/// Whether minor radiocarbon peaks take part in the reference peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinorPeaks {
    Include,
    Exclude,
}

/// Which point prediction is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Ridge regression straight onto one year.
    Scalar,
    /// Gaussian-of-Gaussian peak of the per-bin curve.
    Curve,
}

/// Mode of the accepted reference mass under the given policy.
pub fn reference_peak(reference: &DateDistribution, policy: MinorPeaks) -> Result<f64> {
    match policy {
        MinorPeaks::Include => reference.mode_year(),
        MinorPeaks::Exclude => reference.without_minor_peaks(MINOR_PEAK_SHARE)?.mode_year(),
    }
}

/// What a fold's fitted model says about its held-out manuscript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPrediction {
    pub curve: PredictionCurve,
    /// Scalar-mode year and 1σ, when that model was fitted.
    pub scalar: Option<(f64, f64)>,
    /// Ids of the manuscripts the fold actually trained on.
    pub train_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub id: String,
    pub true_year: Option<f64>,
    pub reference: DateDistribution,
    pub prediction: Option<FoldPrediction>,
    pub peak: Option<PeakEstimate>,
    pub error: Option<String>,
}

/// A manuscript taking part in leave-one-out validation.
#[derive(Debug, Clone)]
pub struct LooEntry {
    pub id: String,
    pub reference: DateDistribution,
    pub true_year: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LooConfig {
    pub draws: usize,
    pub seed: u64,
    /// Narrowest half-width of a prediction interval, in years.
    pub min_half_width: f64,
}

impl Default for LooConfig {
    fn default() -> Self {
        LooConfig {
            draws: DEFAULT_DRAWS,
            seed: 0,
            min_half_width: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub config: LooConfig,
    pub folds: Vec<FoldResult>,
}

/// Run one fold per entry, in parallel.
///
/// `fit_predict(i, held_out)` trains without entry `i` and predicts it. A
/// failing fold is recorded and the others carry on. A fold whose reported
/// training ids contain the held-out id is recorded as failed.
pub fn loo_run<F>(entries: &[LooEntry], cfg: LooConfig, fit_predict: F) -> Result<LooReport>
where
    F: Fn(usize, &str) -> Result<FoldPrediction> + Sync,
{
    if entries.len() < 3 {
        return Err(Error::Config(format!(
            "leave-one-out needs at least 3 manuscripts, got {}",
            entries.len()
        )));
    }
    let folds = entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let mut fold = FoldResult {
                id: e.id.clone(),
                true_year: e.true_year,
                reference: e.reference.clone(),
                prediction: None,
                peak: None,
                error: None,
            };
            let outcome = fit_predict(i, &e.id).and_then(|p| {
                if p.train_ids.iter().any(|t| t == &e.id) {
                    return Err(Error::Input(format!(
                        "fold {} trained on its held-out manuscript",
                        e.id
                    )));
                }
                let peak = gaussian_of_gaussian(
                    &p.curve,
                    cfg.draws,
                    seeds::derive(cfg.seed, "loo", i as u64),
                )?;
                Ok((p, peak))
            });
            match outcome {
                Ok((p, peak)) => {
                    fold.prediction = Some(p);
                    fold.peak = Some(peak);
                }
                Err(err) => {
                    log::warn!("fold {} failed: {err}", e.id);
                    fold.error = Some(err.to_string());
                }
            }
            fold
        })
        .collect();
    Ok(LooReport { config: cfg, folds })
}

/// Scores of one successful fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub predicted: f64,
    pub sigma: f64,
    pub reference_peak: f64,
    pub overlap: Overlap,
}

impl LooReport {
    pub fn succeeded(&self) -> impl Iterator<Item = &FoldResult> {
        self.folds.iter().filter(|f| f.error.is_none())
    }

    pub fn failures(&self) -> usize {
        self.folds.iter().filter(|f| f.error.is_some()).count()
    }

    /// Point prediction and 1σ of a fold.
    pub fn point(&self, fold: &FoldResult, est: Estimator) -> Result<(f64, f64)> {
        let missing = || Error::Input(format!("fold {} has no prediction", fold.id));
        match est {
            Estimator::Scalar => fold
                .prediction
                .as_ref()
                .and_then(|p| p.scalar)
                .ok_or_else(missing),
            Estimator::Curve => fold.peak.map(|p| (p.year, p.spread)).ok_or_else(missing),
        }
    }

    pub fn score(
        &self,
        fold: &FoldResult,
        est: Estimator,
        policy: MinorPeaks,
    ) -> Result<FoldScore> {
        let (y, s) = self.point(fold, est)?;
        let half = s.max(self.config.min_half_width);
        let ranges = fold.reference.hpd_ranges(REFERENCE_LEVEL)?;
        Ok(FoldScore {
            predicted: y,
            sigma: s,
            reference_peak: reference_peak(&fold.reference, policy)?,
            overlap: overlap_and_margins((y - half, y + half), &ranges.intervals)?,
        })
    }

    fn scores(&self, est: Estimator, policy: MinorPeaks) -> Result<Vec<FoldScore>> {
        let s = self
            .succeeded()
            .map(|f| self.score(f, est, policy))
            .collect::<Result<Vec<_>>>()?;
        if s.is_empty() {
            return Err(Error::Input("no fold produced a prediction".into()));
        }
        Ok(s)
    }

    /// Mean absolute distance between predicted and reference peaks.
    pub fn mae(&self, est: Estimator, policy: MinorPeaks) -> Result<f64> {
        let s = self.scores(est, policy)?;
        Ok(s.iter()
            .map(|f| (f.predicted - f.reference_peak).abs())
            .sum::<f64>()
            / s.len() as f64)
    }

    /// Mean overlap percentage and mean left and right margins.
    pub fn mean_overlap(&self, est: Estimator) -> Result<Overlap> {
        let s = self.scores(est, MinorPeaks::Include)?;
        let n = s.len() as f64;
        Ok(Overlap {
            percent: s.iter().map(|f| f.overlap.percent).sum::<f64>() / n,
            left: s.iter().map(|f| f.overlap.left).sum::<f64>() / n,
            right: s.iter().map(|f| f.overlap.right).sum::<f64>() / n,
        })
    }

    /// Confirm no fold saw its held-out manuscript during training.
    pub fn audit(&self) -> Result<()> {
        for f in &self.folds {
            if let Some(p) = &f.prediction {
                if p.train_ids.iter().any(|t| t == &f.id) {
                    return Err(Error::Input(format!(
                        "fold {} trained on its held-out manuscript",
                        f.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, w: &mut dyn Write, est: Estimator) -> Result<()> {
        writeln!(
            w,
            "id,true_year,reference_peak,reference_peak_major,predicted,sigma,overlap_pct,left_margin,right_margin,error"
        )?;
        for f in &self.folds {
            let truth = f.true_year.map(|y| y.to_string()).unwrap_or_default();
            match (
                self.score(f, est, MinorPeaks::Include),
                self.score(f, est, MinorPeaks::Exclude),
            ) {
                (Ok(a), Ok(b)) => writeln!(
                    w,
                    "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3},",
                    f.id,
                    truth,
                    a.reference_peak,
                    b.reference_peak,
                    a.predicted,
                    a.sigma,
                    a.overlap.percent,
                    a.overlap.left,
                    a.overlap.right
                )?,
                (Err(e), _) | (_, Err(e)) => {
                    let msg = f.error.clone().unwrap_or_else(|| e.to_string());
                    writeln!(w, "{},{},,,,,,,,\"{}\"", f.id, truth, msg.replace('"', "'"))?
                }
            }
        }
        Ok(())
    }
}
