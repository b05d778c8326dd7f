//! Key-value run configuration.
//!
//! One `key = value` pair per line; `#` starts a comment. Later settings
//! override earlier ones: built-in defaults, then the config file, then
//! `ENOCH_OUTPUT_DIR` for `output`, then command-line flags and `--set`.

use std::path::{Path, PathBuf};

use enoch::balance::AugmentationPlan;
use enoch::eval::Estimator;
use enoch::ink::{Encoding, Threshold};
use enoch::pipeline::PipelineParams;
use enoch::regress::RidgeMode;
use enoch::synth::SynthConfig;
use enoch::{Error, Result};

pub const OUTPUT_ENV: &str = "ENOCH_OUTPUT_DIR";

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("manifest", "corpus manifest (JSON)"),
    ("model", "model file to write or read"),
    ("output", "directory for reports, curves and plots"),
    ("seed", "root seed; required by train, validate and synth"),
    ("workers", "worker threads; 0 uses every core"),
    ("threshold", "binarisation: otsu or a grey level 0-255"),
    ("fraglets.samples", "contour samples per fraglet"),
    ("fraglets.encoding", "coordinates or tangent"),
    ("fraglets.smoothing", "profile smoothing half-window"),
    ("fraglets.min_depth", "minimum dip depth for a cut"),
    ("fraglets.char_width", "character width in pixels, or auto"),
    ("som.width", "codebook grid width"),
    ("som.height", "codebook grid height"),
    ("som.epochs", "codebook training epochs"),
    ("som.max_samples", "fraglets used to train the codebook"),
    ("hinge.legs", "comma-separated hinge leg lengths"),
    ("hinge.bins", "angle bins per hinge leg"),
    ("weights.allograph", "weight of the allograph block"),
    ("weights.hinge", "weight of the hinge block"),
    ("timeline.start", "first bin start year"),
    ("timeline.end", "last bin end year"),
    ("timeline.width", "bin width in years"),
    ("augment.amplitude", "morph displacement amplitude"),
    ("augment.sigma", "morph field smoothness"),
    ("augment.copies", "morphed copies per training image"),
    ("augment.plan", "duplication plan (JSON)"),
    (
        "balance.thresholds",
        "comma-separated reweighting thresholds",
    ),
    ("balance.target", "flatness the plan builder aims for"),
    ("pca_dims", "principal components kept"),
    ("regression.mode", "evidence or fixed"),
    ("regression.alpha", "weight precision for fixed mode"),
    ("regression.beta", "noise precision for fixed mode"),
    ("regression.tol", "evidence convergence tolerance"),
    ("regression.max_iter", "evidence iteration cap"),
    ("regression.intercept", "true or false"),
    ("estimator", "validation point estimate: scalar or curve"),
    ("draws", "Gaussian-of-Gaussian draws"),
    ("synth.manuscripts", "synthetic corpus size"),
    ("synth.start", "earliest synthetic year"),
    ("synth.span", "years covered by the synthetic corpus"),
    ("synth.sigma_c14", "pseudo-radiocarbon width in years"),
    ("synth.glyphs_min", "fewest glyphs per synthetic page"),
    ("synth.glyphs_max", "most glyphs per synthetic page"),
    ("synth.glyph_size", "glyph height in pixels"),
    ("synth.noise", "per-glyph curvature spread"),
];

#[derive(Debug, Clone)]
pub struct Config {
    pub manifest: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output: PathBuf,
    pub seed: Option<u64>,
    pub workers: usize,
    pub params: PipelineParams,
    pub plan_file: Option<PathBuf>,
    pub balance_target: f64,
    pub synth: SynthConfig,
    fixed: (f64, f64),
    evidence: (f64, usize),
    fixed_mode: bool,
}

impl Default for Config {
    fn default() -> Self {
        let (tol, max_iter) = match RidgeMode::default() {
            RidgeMode::Evidence { tol, max_iter } => (tol, max_iter),
            RidgeMode::Fixed { .. } => (1e-6, 300),
        };
        Config {
            manifest: None,
            model: None,
            output: PathBuf::from("enoch-out"),
            seed: None,
            workers: 0,
            params: PipelineParams::default(),
            plan_file: None,
            balance_target: 1.0,
            synth: SynthConfig::default(),
            fixed: (1.0, 1.0),
            evidence: (tol, max_iter),
            fixed_mode: false,
        }
    }
}

fn bad(key: &str, value: &str, want: &str) -> Error {
    Error::Config(format!("{key} = {value:?}: expected {want}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str, want: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, want))
}

fn list<T: std::str::FromStr>(key: &str, value: &str, want: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| num(key, v.trim(), want)).collect()
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let p = &mut self.params;
        match key.trim() {
            "manifest" => self.manifest = Some(v.into()),
            "model" => self.model = Some(v.into()),
            "output" => self.output = v.into(),
            "seed" => self.seed = Some(num(key, v, "an unsigned integer")?),
            "workers" => self.workers = num(key, v, "a thread count")?,
            "threshold" => {
                p.threshold = if v.eq_ignore_ascii_case("otsu") {
                    Threshold::Otsu
                } else {
                    Threshold::Fixed(num(key, v, "otsu or 0-255")?)
                }
            }
            "fraglets.samples" => p.fraglets.descriptor.samples = num(key, v, "a count")?,
            "fraglets.encoding" => {
                p.fraglets.descriptor.encoding = match v {
                    "coordinates" => Encoding::Coordinates,
                    "tangent" => Encoding::Tangent,
                    _ => return Err(bad(key, v, "coordinates or tangent")),
                }
            }
            "fraglets.smoothing" => p.fraglets.smoothing = num(key, v, "a count")?,
            "fraglets.min_depth" => p.fraglets.min_depth = num(key, v, "a number")?,
            "fraglets.char_width" => {
                p.fraglets.char_width = if v == "auto" {
                    None
                } else {
                    Some(num(key, v, "auto or a number")?)
                }
            }
            "som.width" => p.som.width = num(key, v, "a count")?,
            "som.height" => p.som.height = num(key, v, "a count")?,
            "som.epochs" => p.som.epochs = num(key, v, "a count")?,
            "som.max_samples" => p.som.max_samples = num(key, v, "a count")?,
            "hinge.legs" => p.hinge.legs = list(key, v, "a list of lengths")?,
            "hinge.bins" => p.hinge.bins = num(key, v, "a count")?,
            "weights.allograph" => p.weights.allograph = num(key, v, "a number")?,
            "weights.hinge" => p.weights.hinge = num(key, v, "a number")?,
            "timeline.start" => p.timeline.start = num(key, v, "a year")?,
            "timeline.end" => p.timeline.end = num(key, v, "a year")?,
            "timeline.width" => p.timeline.width = num(key, v, "a number of years")?,
            "augment.amplitude" => p.augment.amplitude = num(key, v, "a number")?,
            "augment.sigma" => p.augment.sigma = num(key, v, "a number")?,
            "augment.copies" => p.augment.copies = num(key, v, "a count")?,
            "augment.plan" => self.plan_file = Some(v.into()),
            "balance.thresholds" => p.balance_thresholds = list(key, v, "a list of numbers")?,
            "balance.target" => self.balance_target = num(key, v, "a number")?,
            "pca_dims" => p.pca_dims = num(key, v, "a count")?,
            "regression.mode" => {
                self.fixed_mode = match v {
                    "evidence" => false,
                    "fixed" => true,
                    _ => return Err(bad(key, v, "evidence or fixed")),
                }
            }
            "regression.alpha" => self.fixed.0 = num(key, v, "a number")?,
            "regression.beta" => self.fixed.1 = num(key, v, "a number")?,
            "regression.tol" => self.evidence.0 = num(key, v, "a number")?,
            "regression.max_iter" => self.evidence.1 = num(key, v, "a count")?,
            "regression.intercept" => p.regression.intercept = num(key, v, "true or false")?,
            "estimator" => {
                p.estimator = match v {
                    "scalar" => Estimator::Scalar,
                    "curve" => Estimator::Curve,
                    _ => return Err(bad(key, v, "scalar or curve")),
                }
            }
            "draws" => p.draws = num(key, v, "a count")?,
            "synth.manuscripts" => self.synth.manuscripts = num(key, v, "a count")?,
            "synth.start" => self.synth.start = num(key, v, "a year")?,
            "synth.span" => self.synth.span = num(key, v, "a number of years")?,
            "synth.sigma_c14" => self.synth.sigma_c14 = num(key, v, "a number of years")?,
            "synth.glyphs_min" => self.synth.glyphs.0 = num(key, v, "a count")?,
            "synth.glyphs_max" => self.synth.glyphs.1 = num(key, v, "a count")?,
            "synth.glyph_size" => self.synth.glyph_size = num(key, v, "a number")?,
            "synth.noise" => self.synth.noise = num(key, v, "a number")?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Apply `key=value` (or `key = value`) text.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got {pair:?}")))?;
        self.set(k, v)
    }

    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.set_pair(line)
                .map_err(|e| Error::Config(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Apply a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let before = (
            self.manifest.clone(),
            self.model.clone(),
            self.output.clone(),
            self.plan_file.clone(),
        );
        self.apply_text(&text, &path.display().to_string())?;
        let dir = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if self.manifest != before.0 {
            self.manifest.as_mut().map(rebase);
        }
        if self.model != before.1 {
            self.model.as_mut().map(rebase);
        }
        if self.output != before.2 {
            rebase(&mut self.output);
        }
        if self.plan_file != before.3 {
            self.plan_file.as_mut().map(rebase);
        }
        Ok(())
    }

    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_ENV).filter(|d| !d.is_empty()) {
            self.output = dir.into();
        }
    }

    /// Resolve derived settings and check them. Loads the augmentation plan.
    pub fn finish(&mut self) -> Result<()> {
        self.params.regression.mode = if self.fixed_mode {
            RidgeMode::Fixed {
                alpha: self.fixed.0,
                beta: self.fixed.1,
            }
        } else {
            RidgeMode::Evidence {
                tol: self.evidence.0,
                max_iter: self.evidence.1,
            }
        };
        if let Some(seed) = self.seed {
            self.params.seed = seed;
            self.synth.seed = seed;
        }
        if let Some(path) = &self.plan_file {
            require_file(path, "augmentation plan")?;
            self.params.augment.plan = AugmentationPlan::load(path)?;
        }
        if self.balance_target.is_nan() || self.balance_target < 1.0 {
            return Err(Error::Config(format!(
                "balance.target must be at least 1, got {}",
                self.balance_target
            )));
        }
        self.params.validate()
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required (seed = N or --seed N)".into()))
    }

    pub fn manifest(&self) -> Result<&Path> {
        let p = self
            .manifest
            .as_deref()
            .ok_or_else(|| Error::Config("no corpus manifest given".into()))?;
        require_file(p, "manifest")?;
        Ok(p)
    }

    /// Model path; defaults to `model.json` in the output directory.
    pub fn model_path(&self) -> PathBuf {
        self.model
            .clone()
            .unwrap_or_else(|| self.output.join("model.json"))
    }
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{what} {} does not exist",
            path.display()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_documented_key_is_accepted() {
        let samples = [
            "1",
            "2.5",
            "otsu",
            "coordinates",
            "auto",
            "3,5",
            "evidence",
            "true",
            "scalar",
        ];
        for (key, _) in KEYS {
            let mut c = Config::default();
            assert!(
                samples.iter().any(|v| c.set(key, v).is_ok()),
                "{key} rejects every sample value"
            );
        }
    }

    #[test]
    fn file_text_sets_fields() {
        let mut c = Config::default();
        c.apply_text(
            "# run\nseed = 7\nsom.width=12 # small\n\nregression.mode = fixed\nregression.alpha = 2\nbalance.thresholds = 0.1, 0.3\n",
            "t",
        )
        .unwrap();
        c.finish().unwrap();
        assert_eq!(c.params.seed, 7);
        assert_eq!(c.params.som.width, 12);
        assert_eq!(c.params.balance_thresholds, vec![0.1, 0.3]);
        assert_eq!(
            c.params.regression.mode,
            RidgeMode::Fixed {
                alpha: 2.0,
                beta: 1.0
            }
        );
    }

    #[test]
    fn errors_name_the_line() {
        let mut c = Config::default();
        let e = c
            .apply_text("seed = 1\nsom.width = wide\n", "run.conf")
            .unwrap_err();
        assert!(e.to_string().contains("run.conf:2"), "{e}");
        assert!(matches!(c.set("colour", "red"), Err(Error::Config(_))));
        assert!(c.set_pair("seed").is_err());
    }

    #[test]
    fn seed_is_required() {
        assert!(Config::default().seed().is_err());
    }
}
