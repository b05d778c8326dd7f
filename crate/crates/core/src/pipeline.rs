//! The whole recipe: images to style vectors, augmentation, PCA and the
//! ridge models, plus leave-one-out validation on top.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance::AugmentationPlan;
use crate::chrono::{DateDistribution, Manifest};
use crate::error::{Error, Result};
use crate::eval::{
    loo_run, Estimator, FoldPrediction, LooConfig, LooEntry, LooReport, DEFAULT_DRAWS,
};
use crate::ink::{fraglets_from_image, load_image, BitonalImage, FragletParams, Threshold};
use crate::model::{Fitted, Model, Prediction};
use crate::morph::{elastic_morph, MorphParams};
use crate::regress::{
    fit_curve_model, fit_pca, fit_scalar_model, PredictionCurve, RegressionConfig, Timeline,
};
use crate::seeds;
use crate::stylefeat::{
    adjoin, allograph_histogram, hinge_histogram, train_codebook, BlockWeights, Codebook,
    HingeParams, StyleVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SomParams {
    pub width: usize,
    pub height: usize,
    pub epochs: usize,
    /// Fraglets beyond this many are subsampled before training.
    pub max_samples: usize,
}

impl Default for SomParams {
    fn default() -> Self {
        SomParams {
            width: 70,
            height: 70,
            epochs: 10,
            max_samples: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub amplitude: f64,
    pub sigma: f64,
    /// Morphed copies made of every training image, besides the original.
    pub copies: usize,
    /// Per-manuscript duplication; each duplicate is a fresh morph.
    pub plan: AugmentationPlan,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            amplitude: 1.0,
            sigma: 8.0,
            copies: 0,
            plan: AugmentationPlan::default(),
        }
    }
}

/// Everything that shapes a trained model, except the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub threshold: Threshold,
    pub fraglets: FragletParams,
    pub som: SomParams,
    pub hinge: HingeParams,
    pub weights: BlockWeights,
    pub timeline: Timeline,
    pub augment: AugmentParams,
    pub pca_dims: usize,
    pub regression: RegressionConfig,
    /// Point prediction scored by validation.
    pub estimator: Estimator,
    pub draws: usize,
    pub balance_thresholds: Vec<f64>,
    pub seed: u64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            threshold: Threshold::Otsu,
            fraglets: FragletParams::default(),
            som: SomParams::default(),
            hinge: HingeParams::default(),
            weights: BlockWeights::default(),
            timeline: Timeline::default(),
            augment: AugmentParams::default(),
            pca_dims: 20,
            regression: RegressionConfig::default(),
            estimator: Estimator::Curve,
            draws: DEFAULT_DRAWS,
            balance_thresholds: vec![0.05, 0.10, 0.20],
            seed: 0,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        self.hinge.validate()?;
        self.timeline.validate()?;
        MorphParams {
            amplitude: self.augment.amplitude,
            sigma: self.augment.sigma,
            seed: 0,
        }
        .validate()?;
        self.augment.plan.validate()?;
        if self.som.width < 2
            || self.som.height < 2
            || self.som.epochs == 0
            || self.som.max_samples == 0
        {
            return Err(Error::Config(format!(
                "codebook {}x{} with {} epochs and {} samples is not trainable",
                self.som.width, self.som.height, self.som.epochs, self.som.max_samples
            )));
        }
        if self.pca_dims == 0 {
            return Err(Error::Config("PCA needs at least one dimension".into()));
        }
        if self.draws == 0 {
            return Err(Error::Config(
                "peak estimation needs at least one draw".into(),
            ));
        }
        if let Some(t) = self
            .balance_thresholds
            .iter()
            .find(|t| !(**t > 0.0 && **t <= 1.0))
        {
            return Err(Error::Config(format!(
                "balance threshold {t} must be in (0, 1]"
            )));
        }
        Ok(())
    }
}

/// A manuscript with its images loaded and its reference resolved.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub id: String,
    pub images: Vec<BitonalImage>,
    pub reference: DateDistribution,
    pub true_year: Option<f64>,
    pub train: bool,
}

/// Load every manifest entry that has images.
pub fn load_corpus(manifest: &Manifest, threshold: Threshold) -> Result<Vec<CorpusEntry>> {
    let with_images: Vec<_> = manifest
        .manuscripts
        .iter()
        .filter(|e| !e.images.is_empty())
        .collect();
    let skipped = manifest.manuscripts.len() - with_images.len();
    if skipped > 0 {
        log::warn!("{skipped} manifest entries have no images and are left out");
    }
    with_images
        .par_iter()
        .map(|e| {
            let images = e
                .images
                .iter()
                .map(|p| load_image(&manifest.resolve(p), threshold))
                .collect::<Result<Vec<_>>>()?;
            Ok(CorpusEntry {
                id: e.id.clone(),
                images,
                reference: manifest.distribution(e).map_err(|err| err.in_file(&e.id))?,
                true_year: e.true_year,
                train: e.train,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at("load"))
}

/// Allograph and hinge histograms of one image, adjoined.
pub fn style_vector(img: &BitonalImage, cb: &Codebook, p: &PipelineParams) -> Result<StyleVector> {
    let fraglets = fraglets_from_image(img, &p.fraglets);
    let allograph = allograph_histogram(&fraglets, cb)?;
    let hinge = hinge_histogram(img, &p.hinge)?;
    adjoin(&allograph, &hinge, p.weights, (cb.len(), p.hinge.len()))
}

/// Train the allographic codebook on the fraglets of the given images.
pub fn build_codebook(images: &[&BitonalImage], p: &PipelineParams) -> Result<Codebook> {
    let mut descriptors: Vec<Vec<f64>> = images
        .par_iter()
        .map(|img| {
            fraglets_from_image(img, &p.fraglets)
                .into_iter()
                .map(|f| f.descriptor)
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();
    if descriptors.is_empty() {
        return Err(Error::EmptyHistogram(
            "no fraglets in the training images".into(),
        ));
    }
    let units = p.som.width * p.som.height;
    if descriptors.len() < units / 10 {
        log::warn!(
            "{} fraglets for a {}-unit codebook; expect a sparse map",
            descriptors.len(),
            units
        );
    }
    if descriptors.len() > p.som.max_samples {
        descriptors.shuffle(&mut seeds::rng(p.seed, "codebook-sample", 0));
        descriptors.truncate(p.som.max_samples);
    }
    let seed = seeds::derive(p.seed, "codebook", 0);
    Ok(train_codebook(&descriptors, p.som.width, p.som.height, p.som.epochs, seed)?.codebook)
}

/// Style vector of one training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    /// False for morphed copies.
    pub original: bool,
    pub style: Vec<f64>,
}

/// Regression targets of one manuscript.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub curve: Vec<f64>,
    pub mean_year: f64,
    pub reference: DateDistribution,
}

/// Features of every training sample, ready for repeated fitting.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub codebook: Codebook,
    pub rows: Vec<FeatureRow>,
    pub targets: BTreeMap<String, Target>,
    pub true_years: BTreeMap<String, Option<f64>>,
}

/// Codebook, augmentation and feature extraction for the training entries.
pub fn prepare(corpus: &[CorpusEntry], p: &PipelineParams) -> Result<Prepared> {
    p.validate()?;
    let train: Vec<&CorpusEntry> = corpus.iter().filter(|e| e.train).collect();
    let mut targets = BTreeMap::new();
    for e in &train {
        let t = Target {
            curve: p
                .timeline
                .bin_distribution(&e.reference)
                .map_err(|err| err.in_file(&e.id))?,
            mean_year: e.reference.mean_year()?,
            reference: e.reference.clone(),
        };
        targets.insert(e.id.clone(), t);
    }
    let originals: Vec<&BitonalImage> = train.iter().flat_map(|e| e.images.iter()).collect();
    let codebook = build_codebook(&originals, p).map_err(|e| e.at("codebook"))?;

    // (entry, image, copy) jobs; copy 0 is the untouched original
    let mut jobs = Vec::new();
    for e in &train {
        let per_image = p.augment.plan.factor(&e.id) as usize * (p.augment.copies + 1);
        for (k, img) in e.images.iter().enumerate() {
            for c in 0..per_image {
                jobs.push((e.id.as_str(), k, c, img));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(id, k, c, img)| {
            let style = if c == 0 {
                style_vector(img, &codebook, p)
            } else {
                let morph = MorphParams {
                    amplitude: p.augment.amplitude,
                    sigma: p.augment.sigma,
                    seed: seeds::derive(p.seed, &format!("morph/{id}/{k}"), c as u64),
                };
                style_vector(&elastic_morph(img, &morph)?, &codebook, p)
            };
            style
                .map(|s| FeatureRow {
                    id: id.to_string(),
                    original: c == 0,
                    style: s.values,
                })
                .map_err(|e| e.in_file(format!("{id} image {k}")))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at("features"))?;
    let true_years = train.iter().map(|e| (e.id.clone(), e.true_year)).collect();
    Ok(Prepared {
        codebook,
        rows,
        targets,
        true_years,
    })
}

/// Fit PCA and both ridge models on every prepared row except those of
/// `exclude`.
pub fn fit(prepared: &Prepared, exclude: Option<&str>, p: &PipelineParams) -> Result<Fitted> {
    let rows: Vec<&FeatureRow> = prepared
        .rows
        .iter()
        .filter(|r| Some(r.id.as_str()) != exclude)
        .collect();
    let ids: BTreeSet<&str> = rows.iter().map(|r| r.id.as_str()).collect();
    if ids.len() < 2 {
        return Err(Error::Input(format!(
            "training needs at least 2 dated manuscripts, got {}",
            ids.len()
        )));
    }
    let data: Vec<Vec<f64>> = rows.iter().map(|r| r.style.clone()).collect();
    let limit = (data.len() - 1).min(data[0].len());
    let k = if p.pca_dims > limit {
        log::warn!(
            "PCA dimension {} lowered to {limit} for {} samples",
            p.pca_dims,
            data.len()
        );
        limit
    } else {
        p.pca_dims
    };
    let pca = fit_pca(&data, k).map_err(|e| e.at("pca"))?;
    let x = data
        .iter()
        .map(|v| pca.project(v))
        .collect::<Result<Vec<_>>>()?;
    let curves: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| prepared.targets[&r.id].curve.clone())
        .collect();
    let years: Vec<f64> = rows
        .iter()
        .map(|r| prepared.targets[&r.id].mean_year)
        .collect();
    let curve =
        fit_curve_model(&x, &curves, p.timeline, p.regression).map_err(|e| e.at("regression"))?;
    let scalar = fit_scalar_model(&x, &years, p.regression).map_err(|e| e.at("regression"))?;

    let mut prior_mass = vec![0.0; p.timeline.bins()];
    let mut prior_counts = vec![0; p.timeline.bins()];
    for id in &ids {
        for (i, v) in prepared.targets[*id].curve.iter().enumerate() {
            prior_mass[i] += v;
            if *v > 0.0 {
                prior_counts[i] += 1;
            }
        }
    }
    Ok(Fitted {
        pca,
        curve,
        scalar,
        train_ids: ids.into_iter().map(String::from).collect(),
        samples: rows.len(),
        prior_mass,
        prior_counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub manuscripts: usize,
    pub samples: usize,
    pub bins: usize,
    pub pca_dims: usize,
    /// Share of the style variance kept by the PCA.
    pub explained: f64,
}

impl std::fmt::Display for TrainSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "trained on {} samples from {} manuscripts; {} bins; {} PCA dims keep {:.1}% of the variance",
            self.samples,
            self.manuscripts,
            self.bins,
            self.pca_dims,
            100.0 * self.explained
        )
    }
}

/// Train a model on the training entries of a corpus.
pub fn train(corpus: &[CorpusEntry], p: &PipelineParams) -> Result<(Model, TrainSummary)> {
    let dated = corpus.iter().filter(|e| e.train).count();
    if dated < 2 {
        return Err(Error::Input(format!(
            "training needs at least 2 dated manuscripts, got {dated}"
        )));
    }
    let prepared = prepare(corpus, p)?;
    let fitted = fit(&prepared, None, p)?;
    let summary = TrainSummary {
        manuscripts: fitted.train_ids.len(),
        samples: fitted.samples,
        bins: p.timeline.bins(),
        pca_dims: fitted.pca.dims(),
        explained: fitted.pca.explained.iter().sum(),
    };
    Ok((Model::new(p.clone(), prepared.codebook, fitted), summary))
}

/// Average the predictions for several images of one manuscript.
pub fn combine(predictions: &[Prediction]) -> Result<Prediction> {
    let first = predictions
        .first()
        .ok_or_else(|| Error::Input("no predictions to combine".into()))?;
    let n = predictions.len() as f64;
    let bins = first.curve.len();
    let mut mean = vec![0.0; bins];
    let mut var = vec![0.0; bins];
    let (mut year, mut year_var) = (0.0, 0.0);
    for p in predictions {
        for i in 0..bins {
            mean[i] += p.curve.mean[i] / n;
            var[i] += p.curve.sigma[i].powi(2) / n;
        }
        year += p.scalar.0 / n;
        year_var += p.scalar.1.powi(2) / n;
    }
    Ok(Prediction {
        curve: PredictionCurve {
            timeline: first.curve.timeline,
            mean,
            sigma: var.into_iter().map(f64::sqrt).collect(),
        },
        scalar: (year, year_var.sqrt()),
    })
}

/// Leave-one-out over the training entries. The codebook is trained once on
/// all of them; PCA and regression are refitted per fold.
pub fn validate(corpus: &[CorpusEntry], p: &PipelineParams) -> Result<LooReport> {
    let dated = corpus.iter().filter(|e| e.train).count();
    if dated < 3 {
        return Err(Error::Config(format!(
            "validation needs at least 3 dated manuscripts, got {dated}"
        )));
    }
    let prepared = prepare(corpus, p)?;
    let entries: Vec<LooEntry> = corpus
        .iter()
        .filter(|e| e.train)
        .map(|e| LooEntry {
            id: e.id.clone(),
            reference: e.reference.clone(),
            true_year: e.true_year,
        })
        .collect();
    let cfg = LooConfig {
        draws: p.draws,
        seed: seeds::derive(p.seed, "validate", 0),
        min_half_width: p.timeline.width / 2.0,
    };
    loo_run(&entries, cfg, |_, held| {
        let fitted = fit(&prepared, Some(held), p)?;
        let preds = prepared
            .rows
            .iter()
            .filter(|r| r.id == held && r.original)
            .map(|r| fitted.predict(&r.style))
            .collect::<Result<Vec<_>>>()?;
        let pred = combine(&preds)?;
        Ok(FoldPrediction {
            curve: pred.curve,
            scalar: Some(pred.scalar),
            train_ids: fitted.train_ids,
        })
    })
}

/// Per-bin prediction table.
pub fn write_curve_csv(
    w: &mut dyn Write,
    curve: &PredictionCurve,
    extra: &[(&str, &[f64])],
) -> Result<()> {
    write!(w, "bin_start,bin_end,mean,sigma,display,smoothed")?;
    for (name, _) in extra {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    let display = curve.display_mean();
    let smooth = curve.smoothed(crate::regress::DISPLAY_SMOOTHING);
    let t = curve.timeline;
    for i in 0..curve.len() {
        write!(
            w,
            "{},{},{:?},{:?},{:?},{:?}",
            t.bin_start(i),
            t.bin_start(i) + t.width,
            curve.mean[i],
            curve.sigma[i],
            display[i],
            smooth[i]
        )?;
        for (_, v) in extra {
            write!(w, ",{:?}", v[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}
