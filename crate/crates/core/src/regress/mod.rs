//! PCA reduction and per-bin Bayesian ridge regression onto date curves.

mod pca;
mod ridge;
mod timeline;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use pca::{fit_pca, PcaModel};
pub use ridge::{fit_bayes_ridge, RidgeDesign, RidgeMode, RidgePosterior};
pub use timeline::{gaussian_smooth, PredictionCurve, Timeline, DISPLAY_SMOOTHING};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub mode: RidgeMode,
    /// Centre the targets and add their mean back at prediction time.
    pub intercept: bool,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            mode: RidgeMode::default(),
            intercept: true,
        }
    }
}

/// Independent ridge posteriors, one per timeline bin, sharing the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveModel {
    pub timeline: Timeline,
    pub bins: Vec<RidgePosterior>,
}

/// Fit the vector mode: `targets[i]` is sample `i`'s binned curve.
pub fn fit_curve_model(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    timeline: Timeline,
    cfg: RegressionConfig,
) -> Result<CurveModel> {
    timeline.validate()?;
    let b = timeline.bins();
    if inputs.len() != targets.len() {
        return Err(Error::Input(format!(
            "{} inputs but {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    if let Some(i) = targets.iter().position(|t| t.len() != b) {
        return Err(Error::Input(format!(
            "target {i} has {} bins, timeline has {b}",
            targets[i].len()
        )));
    }
    let design = RidgeDesign::new(inputs, cfg.intercept)?;
    let bins = (0..b)
        .into_par_iter()
        .map(|j| {
            let t: Vec<f64> = targets.iter().map(|row| row[j]).collect();
            design.fit(
                &t,
                cfg.mode,
                &format!("bin {j} ({} CE)", timeline.bin_start(j)),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveModel { timeline, bins })
}

impl CurveModel {
    pub fn predict(&self, x: &[f64]) -> Result<PredictionCurve> {
        let mut mean = Vec::with_capacity(self.bins.len());
        let mut sigma = Vec::with_capacity(self.bins.len());
        for post in &self.bins {
            let (m, v) = post.predict(x)?;
            mean.push(m);
            sigma.push(v.sqrt());
        }
        Ok(PredictionCurve {
            timeline: self.timeline,
            mean,
            sigma,
        })
    }
}

/// Scalar mode: one ridge onto a representative year per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarModel {
    pub ridge: RidgePosterior,
}

pub fn fit_scalar_model(
    inputs: &[Vec<f64>],
    years: &[f64],
    cfg: RegressionConfig,
) -> Result<ScalarModel> {
    let design = RidgeDesign::new(inputs, cfg.intercept)?;
    Ok(ScalarModel {
        ridge: design.fit(years, cfg.mode, "scalar year")?,
    })
}

impl ScalarModel {
    /// Predicted year and its 1σ.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        let (m, v) = self.ridge.predict(x)?;
        Ok((m, v.sqrt()))
    }
}
