use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{apply_heaviside, read_oxcal_raw, DateDistribution, Interval, Keep};
use crate::error::{Error, Result};

/// Published 2σ ranges of the 26 accepted samples, with the older peaks
/// that palaeography rules out removed by a Heaviside cut.
pub const SAMPLE_MANIFEST: &str = include_str!("../../data/sample_manifest.json");

/// Binding of manuscript ids to images and radiocarbon evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Grid used for entries described by ranges rather than a curve file.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    pub manuscripts: Vec<ManuscriptEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub first: f64,
    pub step: f64,
    pub len: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            first: -420.0,
            step: 5.0,
            len: 127,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManuscriptEntry {
    pub id: String,
    #[serde(default)]
    pub images: Vec<PathBuf>,
    /// OxCal raw output file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<PathBuf>,
    /// Calibrated ranges, used when no curve file is given.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ranges: Vec<RangeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<Cut>,
    /// Explicit acceptance intervals `[start, end]`, applied after the cut.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accept: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_true")]
    pub train: bool,
    /// Ground-truth year for synthetic corpora.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_year: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeSpec {
    pub start: f64,
    pub end: f64,
    /// Probability share as a fraction.
    pub share: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub year: f64,
    pub keep: Keep,
}

impl Manifest {
    pub fn parse(json: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut m: Manifest = serde_json::from_str(json)?;
        m.base_dir = base_dir.into();
        let mut seen = std::collections::HashSet::new();
        for e in &m.manuscripts {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Input(format!("duplicate manuscript id {}", e.id)));
            }
            if e.curve.is_none() && e.ranges.is_empty() {
                return Err(Error::Input(format!(
                    "{} has neither a curve file nor ranges",
                    e.id
                )));
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Manifest::parse(&text, dir).map_err(|e| e.in_file(path))
    }

    pub fn sample() -> Self {
        Manifest::parse(SAMPLE_MANIFEST, ".").expect("bundled manifest is valid")
    }

    pub fn training(&self) -> impl Iterator<Item = &ManuscriptEntry> {
        self.manuscripts.iter().filter(|e| e.train)
    }

    pub fn get(&self, id: &str) -> Option<&ManuscriptEntry> {
        self.manuscripts.iter().find(|e| e.id == id)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Accepted, normalised distribution of one entry.
    pub fn distribution(&self, e: &ManuscriptEntry) -> Result<DateDistribution> {
        let raw = match &e.curve {
            Some(p) => read_oxcal_raw(&self.resolve(p))?,
            None => {
                let g = self.grid.unwrap_or_default();
                let ranges: Vec<Interval> = e
                    .ranges
                    .iter()
                    .map(|r| Interval {
                        start: r.start,
                        end: r.end,
                        share: r.share,
                    })
                    .collect();
                DateDistribution::from_ranges(g.first, g.step, g.len, &ranges)?
            }
        };
        let mut d = match e.cut {
            Some(c) => apply_heaviside(&raw, c.year, c.keep)?,
            None => raw,
        };
        if let Some(acc) = &e.accept {
            let iv: Vec<(f64, f64)> = acc.iter().map(|&[a, b]| (a, b)).collect();
            d = d.with_acceptance(&iv);
        }
        d.normalized()
            .map_err(|_| Error::Input(format!("{} has no accepted radiocarbon mass", e.id)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
