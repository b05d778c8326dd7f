//! Single-file, versioned container for a trained model.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::balance::BalanceWeights;
use crate::error::{Error, Result};
use crate::ink::BitonalImage;
use crate::pipeline::{style_vector, PipelineParams};
use crate::regress::{CurveModel, PcaModel, PredictionCurve, ScalarModel};
use crate::stylefeat::Codebook;

pub const MODEL_FORMAT: &str = "enoch-model";
pub const MODEL_VERSION: u32 = 1;

/// PCA and regression fitted on one training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fitted {
    pub pca: PcaModel,
    pub curve: CurveModel,
    pub scalar: ScalarModel,
    /// Manuscripts that contributed training samples.
    pub train_ids: Vec<String>,
    pub samples: usize,
    /// Binned radiocarbon mass of the training set, for reweighting.
    pub prior_mass: Vec<f64>,
    pub prior_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub curve: PredictionCurve,
    /// Scalar-mode year and 1σ.
    pub scalar: (f64, f64),
}

impl Fitted {
    pub fn predict(&self, style: &[f64]) -> Result<Prediction> {
        let x = self.pca.project(style)?;
        Ok(Prediction {
            curve: self.curve.predict(&x)?,
            scalar: self.scalar.predict(&x)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format: String,
    pub version: u32,
    pub params: PipelineParams,
    pub codebook: Codebook,
    pub fitted: Fitted,
}

impl Model {
    pub fn new(params: PipelineParams, codebook: Codebook, fitted: Fitted) -> Self {
        Model {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            params,
            codebook,
            fitted,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: Option<String>,
            version: Option<u32>,
        }
        let h: Header = serde_json::from_str(text)?;
        if h.format.as_deref() != Some(MODEL_FORMAT) {
            return Err(Error::Config(format!(
                "not a model file (format {:?})",
                h.format.unwrap_or_default()
            )));
        }
        if h.version != Some(MODEL_VERSION) {
            return Err(Error::Config(format!(
                "model version {:?} is not supported (expected {MODEL_VERSION})",
                h.version
            )));
        }
        Ok(serde_json::from_str(text)?)
    }

    /// Write the model and return its hash.
    pub fn save(&self, path: &Path) -> Result<String> {
        let text = self.to_json();
        std::fs::write(path, &text).map_err(|e| Error::from(e).in_file(path))?;
        Ok(hash_bytes(text.as_bytes()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Model::from_json(&text).map_err(|e| e.in_file(path))
    }

    /// SHA-256 of the serialised model, hex encoded.
    pub fn hash(&self) -> String {
        hash_bytes(self.to_json().as_bytes())
    }

    pub fn predict_image(&self, img: &BitonalImage) -> Result<Prediction> {
        let style = style_vector(img, &self.codebook, &self.params)?;
        self.fitted.predict(&style.values)
    }

    /// Reweighting table built from the training set's radiocarbon mass.
    pub fn balance_weights(&self, threshold: f64) -> Result<BalanceWeights> {
        BalanceWeights::new(
            threshold,
            self.fitted.prior_mass.clone(),
            self.fitted.prior_counts.clone(),
        )
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{train, PipelineParams, SomParams};
    use crate::synth::{generate_corpus, SynthConfig};

    fn model() -> (Model, Vec<BitonalImage>) {
        let corpus: Vec<_> = generate_corpus(&SynthConfig {
            manuscripts: 4,
            glyphs: (20, 25),
            ..SynthConfig::default()
        })
        .unwrap()
        .into_iter()
        .map(|m| crate::pipeline::CorpusEntry {
            id: m.id,
            images: vec![m.image],
            reference: m.curve,
            true_year: Some(m.true_year),
            train: true,
        })
        .collect();
        let p = PipelineParams {
            som: SomParams {
                width: 4,
                height: 4,
                epochs: 2,
                max_samples: 500,
            },
            pca_dims: 3,
            ..PipelineParams::default()
        };
        let images = corpus.iter().map(|e| e.images[0].clone()).collect();
        (train(&corpus, &p).unwrap().0, images)
    }

    #[test]
    fn reload_predicts_bit_exactly() {
        let (m, images) = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let h = m.save(&path).unwrap();
        assert_eq!(h, m.hash());
        let back = Model::load(&path).unwrap();
        assert_eq!(back, m);
        let a = m.predict_image(&images[1]).unwrap();
        let b = back.predict_image(&images[1]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn foreign_files_are_rejected() {
        assert!(matches!(
            Model::from_json(r#"{"format": "other", "version": 1}"#),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Model::from_json(r#"{"format": "enoch-model", "version": 9}"#),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Model::from_json(r#"{"manuscripts": []}"#),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn blank_image_has_no_features() {
        let (m, _) = model();
        let blank = BitonalImage::new(30, 30).unwrap();
        assert!(matches!(
            m.predict_image(&blank),
            Err(Error::EmptyHistogram(_))
        ));
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            hash_bytes(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
