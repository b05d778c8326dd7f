use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use enoch::balance::{build_augmentation_plan, flatness, reweight_curve, AugmentationPlan};
use enoch::chrono::{DateDistribution, Manifest};
use enoch::eval::{gaussian_of_gaussian, Estimator, LooReport, MinorPeaks, Overlap};
use enoch::ink::load_image;
use enoch::model::{hash_bytes, Model};
use enoch::pipeline::{self, load_corpus, write_curve_csv, TrainSummary};
use enoch::plot::{curve_svg, gantt_svg, report_rows};
use enoch::regress::PredictionCurve;
use enoch::synth::{generate_corpus, write_corpus};
use enoch::{seeds, Error, Result};

use crate::config::{require_file, Config};

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::from(e).in_file(path))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))
}

fn load_training(cfg: &Config) -> Result<Vec<pipeline::CorpusEntry>> {
    let manifest = Manifest::load(cfg.manifest()?)?;
    load_corpus(&manifest, cfg.params.threshold)
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub path: PathBuf,
    pub hash: String,
    pub summary: TrainSummary,
}

pub fn train(cfg: &Config) -> Result<Trained> {
    cfg.seed()?;
    let corpus = load_training(cfg)?;
    let (model, summary) = pipeline::train(&corpus, &cfg.params)?;
    let path = cfg.model_path();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let hash = model.save(&path)?;
    Ok(Trained {
        path,
        hash,
        summary,
    })
}

/// One line of the prediction index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Predicted {
    pub image: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub balanced: Vec<String>,
    /// Gaussian-of-Gaussian peak year and spread.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak: Option<(f64, f64)>,
    /// Scalar-mode year and 1σ.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalar: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn is_image(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .map(|e| {
            matches!(
                e.to_ascii_lowercase().as_str(),
                "png" | "pgm" | "pbm" | "pnm" | "ppm"
            )
        })
        .unwrap_or(false)
}

/// Expand directories to the images they hold, sorted by name.
pub fn collect_images(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::from(e).in_file(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && is_image(f))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no images to predict".into()));
    }
    Ok(out)
}

/// Output stems, made unique by numbering repeats.
fn stems(images: &[PathBuf]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    images
        .iter()
        .map(|p| {
            let base = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "image".into());
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base}-{n}")
            }
        })
        .collect()
}

fn curve_csv(curve: &PredictionCurve, extra: &[(String, Vec<f64>)]) -> Result<Vec<u8>> {
    let cols: Vec<(&str, &[f64])> = extra
        .iter()
        .map(|(n, v)| (n.as_str(), v.as_slice()))
        .collect();
    let mut buf = Vec::new();
    write_curve_csv(&mut buf, curve, &cols)?;
    Ok(buf)
}

fn predict_one(
    model: &Model,
    image: &Path,
    stem: &str,
    index: usize,
    balance: bool,
    out: &Path,
) -> Result<Predicted> {
    let img = load_image(image, model.params.threshold)?;
    let pred = model.predict_image(&img).map_err(|e| e.in_file(image))?;
    let seed = seeds::derive(model.params.seed, "predict", index as u64);
    let peak = gaussian_of_gaussian(&pred.curve, model.params.draws, seed).ok();
    let mut extra = Vec::new();
    let mut balanced = Vec::new();
    if balance {
        for &t in &model.params.balance_thresholds {
            let rw = reweight_curve(&pred.curve, &model.balance_weights(t)?)?;
            let name = format!("{stem}.balanced-{t}.svg");
            let title = format!("{stem} reweighted at T = {t}");
            write_file(&out.join(&name), curve_svg(&rw, &title))?;
            balanced.push(name);
            extra.push((format!("reweighted_{t}"), rw.mean));
        }
    }
    let csv = format!("{stem}.csv");
    let svg = format!("{stem}.svg");
    write_file(&out.join(&csv), curve_csv(&pred.curve, &extra)?)?;
    write_file(&out.join(&svg), curve_svg(&pred.curve, stem))?;
    Ok(Predicted {
        image: image.to_path_buf(),
        csv: Some(csv),
        svg: Some(svg),
        balanced,
        peak: peak.map(|p| (p.year, p.spread)),
        scalar: Some(pred.scalar),
        error: None,
    })
}

/// Predict every image; failures are recorded in the index and logged.
pub fn predict(cfg: &Config, inputs: &[PathBuf], balance: bool) -> Result<Vec<Predicted>> {
    let model_path = cfg.model_path();
    require_file(&model_path, "model")?;
    let model = Model::load(&model_path)?;
    let images = collect_images(inputs)?;
    create_dir(&cfg.output)?;
    let names = stems(&images);
    let results: Vec<Predicted> = images
        .par_iter()
        .zip(&names)
        .enumerate()
        .map(|(i, (img, stem))| {
            predict_one(&model, img, stem, i, balance, &cfg.output).unwrap_or_else(|e| {
                log::warn!("skipping {}: {e}", img.display());
                Predicted {
                    image: img.clone(),
                    csv: None,
                    svg: None,
                    balanced: Vec::new(),
                    peak: None,
                    scalar: None,
                    error: Some(e.to_string()),
                }
            })
        })
        .collect();
    let index = serde_json::to_string_pretty(&results)?;
    write_file(&cfg.output.join("predictions.json"), index)?;
    Ok(results)
}

/// Headline numbers of one estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub mae: f64,
    pub mae_major: f64,
    pub overlap: Overlap,
}

#[derive(Debug, Clone)]
pub struct Validated {
    pub report: LooReport,
    pub summaries: Vec<EstimatorSummary>,
    pub text: String,
}

fn estimator_name(e: Estimator) -> &'static str {
    match e {
        Estimator::Scalar => "scalar",
        Estimator::Curve => "curve",
    }
}

pub fn summarise(report: &LooReport) -> Result<Vec<EstimatorSummary>> {
    [Estimator::Scalar, Estimator::Curve]
        .into_iter()
        .map(|est| {
            Ok(EstimatorSummary {
                estimator: est,
                mae: report.mae(est, MinorPeaks::Include)?,
                mae_major: report.mae(est, MinorPeaks::Exclude)?,
                overlap: report.mean_overlap(est)?,
            })
        })
        .collect()
}

fn summary_text(report: &LooReport, s: &[EstimatorSummary]) -> String {
    let mut t = String::new();
    let _ = writeln!(
        t,
        "leave-one-out over {} manuscripts, {} failed folds",
        report.folds.len(),
        report.failures()
    );
    for e in s {
        let _ = writeln!(
            t,
            "{}: MAE {:.1} years (major peaks only {:.1}), mean overlap {:.1}%, margins {:.1} / {:.1} years",
            estimator_name(e.estimator),
            e.mae,
            e.mae_major,
            e.overlap.percent,
            e.overlap.left,
            e.overlap.right
        );
    }
    t
}

pub fn validate(cfg: &Config) -> Result<Validated> {
    cfg.seed()?;
    let corpus = load_training(cfg)?;
    let report = pipeline::validate(&corpus, &cfg.params)?;
    report.audit()?;
    let summaries = summarise(&report)?;
    let text = summary_text(&report, &summaries);
    let out = &cfg.output;
    create_dir(out)?;
    let est = cfg.params.estimator;
    let mut csv = Vec::new();
    report.write_csv(&mut csv, est)?;
    write_file(&out.join("loo_report.csv"), csv)?;
    write_file(
        &out.join("loo_report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    let rows = report_rows(&report, est)?;
    let title = format!("Leave-one-out, {} estimate", estimator_name(est));
    write_file(&out.join("loo_gantt.svg"), gantt_svg(&rows, &title))?;
    write_file(&out.join("loo_summary.txt"), &text)?;
    Ok(Validated {
        report,
        summaries,
        text,
    })
}

#[derive(Debug, Clone)]
pub struct Balanced {
    pub plan: AugmentationPlan,
    pub csv: String,
    pub before: f64,
    pub after: f64,
}

/// Accumulated training mass before and after duplication, and the plan.
/// A plan given in the config is evaluated; otherwise one is built.
pub fn balance(cfg: &Config) -> Result<Balanced> {
    let manifest = Manifest::load(cfg.manifest()?)?;
    let training = manifest
        .training()
        .map(|e| Ok((e.id.clone(), manifest.distribution(e)?)))
        .collect::<Result<Vec<(String, DateDistribution)>>>()?;
    if training.is_empty() {
        return Err(Error::Input("manifest has no training entries".into()));
    }
    let plan = match &cfg.plan_file {
        Some(_) => cfg.params.augment.plan.clone(),
        None => build_augmentation_plan(&training, cfg.balance_target)?,
    };
    let before = AugmentationPlan::default().accumulation(&training)?;
    let after = plan.accumulation(&training)?;
    let peak = before.iter().cloned().fold(0.0, f64::max);
    let populated: Vec<bool> = before
        .iter()
        .map(|&m| m >= enoch::balance::POPULATED_FLOOR * peak)
        .collect();
    let grid = &training[0].1;
    let mut csv = String::from("year,before,after\n");
    for i in 0..before.len() {
        let _ = writeln!(csv, "{},{:?},{:?}", grid.year(i), before[i], after[i]);
    }
    create_dir(&cfg.output)?;
    write_file(&cfg.output.join("augmentation_plan.json"), plan.to_json())?;
    write_file(&cfg.output.join("accumulation.csv"), &csv)?;
    Ok(Balanced {
        before: flatness(&before, &populated),
        after: flatness(&after, &populated),
        plan,
        csv,
    })
}

/// Generate a synthetic corpus under the output directory; returns the
/// manifest path.
pub fn synth(cfg: &Config) -> Result<PathBuf> {
    cfg.seed()?;
    let corpus = generate_corpus(&cfg.synth)?;
    create_dir(&cfg.output)?;
    write_corpus(&cfg.output, &corpus)
}

pub fn inspect(cfg: &Config) -> Result<String> {
    let path = cfg.model_path();
    require_file(&path, "model")?;
    let text = fs::read_to_string(&path).map_err(|e| Error::from(e).in_file(&path))?;
    let model = Model::from_json(&text).map_err(|e| e.in_file(&path))?;
    let f = &model.fitted;
    let p = &model.params;
    let mut s = String::new();
    let _ = writeln!(s, "format     {} v{}", model.format, model.version);
    let _ = writeln!(s, "sha256     {}", hash_bytes(text.as_bytes()));
    let _ = writeln!(s, "seed       {}", p.seed);
    let _ = writeln!(
        s,
        "codebook   {} units ({}x{})",
        model.codebook.len(),
        p.som.width,
        p.som.height
    );
    let _ = writeln!(
        s,
        "timeline   {} to {} in {} bins",
        p.timeline.start,
        p.timeline.end,
        p.timeline.bins()
    );
    let _ = writeln!(
        s,
        "pca        {} of {} dims, {:.1}% variance",
        f.pca.dims(),
        f.pca.input_dim(),
        100.0 * f.pca.explained.iter().sum::<f64>()
    );
    let _ = writeln!(s, "samples    {}", f.samples);
    let _ = writeln!(s, "trained on {}", f.train_ids.join(", "));
    Ok(s)
}

/// Write `text` to stdout, ignoring a closed pipe.
pub fn print(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}
