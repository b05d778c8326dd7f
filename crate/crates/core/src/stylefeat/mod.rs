//! Style features: fraglet codebook occupancy and hinge co-occurrence.

mod hinge;
mod som;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use hinge::{angle_bin, hinge_histogram, tri_index, HingeHistogram, HingeParams};
pub use som::{train_codebook, Codebook, SomTraining};

use crate::error::{Error, Result};
use crate::ink::Fraglet;

/// Relative occurrence of each codebook unit as best match of a fraglet.
pub fn allograph_histogram(fraglets: &[Fraglet], cb: &Codebook) -> Result<Vec<f64>> {
    if fraglets.is_empty() {
        return Err(Error::EmptyHistogram(
            "no fraglets to assign to the codebook".into(),
        ));
    }
    let mut h = vec![0.0; cb.len()];
    for f in fraglets {
        if f.descriptor.len() != cb.dim() {
            return Err(Error::Config(format!(
                "fraglet descriptor has {} values but the codebook expects {}",
                f.descriptor.len(),
                cb.dim()
            )));
        }
        h[cb.best_matching_unit(&f.descriptor)] += 1.0;
    }
    let n = fraglets.len() as f64;
    h.iter_mut().for_each(|v| *v /= n);
    Ok(h)
}

/// Block weights applied when adjoining the two histograms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockWeights {
    pub allograph: f64,
    pub hinge: f64,
}

impl Default for BlockWeights {
    fn default() -> Self {
        BlockWeights {
            allograph: 1.0,
            hinge: 1.0,
        }
    }
}

/// Adjoined, weighted style vector of one manuscript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleVector {
    pub values: Vec<f64>,
    pub allograph_len: usize,
    pub hinge_len: usize,
    pub weights: BlockWeights,
}

impl StyleVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn allograph(&self) -> &[f64] {
        &self.values[..self.allograph_len]
    }

    pub fn hinge(&self) -> &[f64] {
        &self.values[self.allograph_len..]
    }
}

/// Concatenate `(w_a * allograph, w_h * hinge)`.
///
/// `expected` gives the configured block lengths; a mismatch is a
/// configuration error.
pub fn adjoin(
    allograph: &[f64],
    hinge: &HingeHistogram,
    weights: BlockWeights,
    expected: (usize, usize),
) -> Result<StyleVector> {
    if allograph.len() != expected.0 || hinge.bins.len() != expected.1 {
        return Err(Error::Config(format!(
            "style blocks are {}+{} long, configured {}+{}",
            allograph.len(),
            hinge.bins.len(),
            expected.0,
            expected.1
        )));
    }
    if weights.allograph < 0.0 || weights.hinge < 0.0 {
        return Err(Error::Config("block weights must be non-negative".into()));
    }
    if hinge.empty {
        log::warn!("hinge histogram is empty; its block is all zeros");
    }
    let values = allograph
        .iter()
        .map(|v| v * weights.allograph)
        .chain(hinge.bins.iter().map(|v| v * weights.hinge))
        .collect();
    Ok(StyleVector {
        values,
        allograph_len: allograph.len(),
        hinge_len: hinge.bins.len(),
        weights,
    })
}

/// Write style vectors as CSV rows `id,v0,v1,...` under a header line.
pub fn write_style_csv<W: Write>(mut w: W, rows: &[(String, StyleVector)]) -> Result<()> {
    let Some((_, first)) = rows.first() else {
        return Ok(());
    };
    write!(w, "id")?;
    for i in 0..first.allograph_len {
        write!(w, ",a{i}")?;
    }
    for i in 0..first.hinge_len {
        write!(w, ",h{i}")?;
    }
    writeln!(w)?;
    for (id, v) in rows {
        if v.len() != first.len() {
            return Err(Error::Input(format!(
                "style vector {id} has a different length"
            )));
        }
        write!(w, "{id}")?;
        for x in &v.values {
            write!(w, ",{x:?}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
