//! Calendar-year probability distributions from radiocarbon calibration.
//!
//! Years are signed calendar years: BCE negative, CE positive. A
//! distribution lives on a uniform grid (5 years for raw OxCal output) and
//! carries an acceptance mask; rejected points hold zero mass.

mod distance;
mod manifest;
mod oxcal;

pub use distance::{distance, distribution_distance, Metric, DEFAULT_BHATTACHARYYA_CAP};
pub use manifest::{Cut, GridSpec, Manifest, ManuscriptEntry, RangeSpec, SAMPLE_MANIFEST};
pub use oxcal::{parse_oxcal_raw, read_oxcal_raw, write_oxcal_raw};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRID_TOL: f64 = 1e-6;

/// Relative mass at a Heaviside cut above which the cut is reported as not
/// lying on a near-zero plateau.
pub const PLATEAU_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DateDistribution {
    first: f64,
    step: f64,
    mass: Vec<f64>,
    accepted: Vec<bool>,
}

/// Which side of a Heaviside cut survives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keep {
    Left,
    Right,
}

/// Disjoint, sorted calendar intervals with their share of the mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedRange {
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub share: f64,
}

impl DateDistribution {
    /// Fully accepted distribution on the grid `first, first + step, ...`.
    pub fn new(first: f64, step: f64, mass: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !first.is_finite() || !step.is_finite() {
            return Err(Error::Input(format!(
                "invalid year grid (first {first}, step {step})"
            )));
        }
        if mass.is_empty() {
            return Err(Error::Input(
                "a date distribution needs at least one grid point".into(),
            ));
        }
        if let Some(i) = mass.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Input(format!(
                "mass at year {} is {}",
                first + step * i as f64,
                mass[i]
            )));
        }
        let accepted = vec![true; mass.len()];
        Ok(DateDistribution {
            first,
            step,
            mass,
            accepted,
        })
    }

    /// Mass spread evenly over the grid points of each range.
    ///
    /// Used when only published 2σ ranges are at hand rather than the raw
    /// calibration output. A range narrower than the grid step still claims
    /// its nearest grid point.
    pub fn from_ranges(first: f64, step: f64, len: usize, ranges: &[Interval]) -> Result<Self> {
        let mut d = DateDistribution::new(first, step, vec![0.0; len])?;
        for r in ranges {
            if r.start > r.end {
                return Err(Error::Input(format!(
                    "range {}..{} is reversed",
                    r.start, r.end
                )));
            }
            let lo = ((r.start - first) / step).ceil().max(0.0) as usize;
            let hi = (((r.end - first) / step).floor() as i64).min(len as i64 - 1);
            let (lo, hi) = if (lo as i64) <= hi {
                (lo, hi as usize)
            } else {
                let mid = d.nearest_index((r.start + r.end) / 2.0);
                (mid, mid)
            };
            let per = r.share / (hi - lo + 1) as f64;
            for m in &mut d.mass[lo..=hi] {
                *m += per;
            }
        }
        Ok(d)
    }

    pub fn first_year(&self) -> f64 {
        self.first
    }

    pub fn last_year(&self) -> f64 {
        self.year(self.len() - 1)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted_mass() <= 0.0
    }

    pub fn year(&self, i: usize) -> f64 {
        self.first + self.step * i as f64
    }

    pub fn years(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.year(i))
    }

    /// Raw mass column, including rejected points.
    pub fn raw_mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn accepted(&self) -> &[bool] {
        &self.accepted
    }

    /// Mass with rejected points zeroed.
    pub fn mass(&self) -> Vec<f64> {
        self.mass
            .iter()
            .zip(&self.accepted)
            .map(|(&m, &a)| if a { m } else { 0.0 })
            .collect()
    }

    pub fn accepted_mass(&self) -> f64 {
        self.mass().iter().sum()
    }

    pub fn same_grid(&self, other: &DateDistribution) -> bool {
        self.len() == other.len()
            && (self.first - other.first).abs() < GRID_TOL
            && (self.step - other.step).abs() < GRID_TOL
    }

    fn nearest_index(&self, year: f64) -> usize {
        let i = ((year - self.first) / self.step).round();
        i.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    /// Zero rejected points and scale the accepted mass to sum to one.
    pub fn normalized(&self) -> Result<DateDistribution> {
        let total = self.accepted_mass();
        if total <= 0.0 {
            return Err(Error::EmptyMass);
        }
        let mass = self.mass().into_iter().map(|m| m / total).collect();
        Ok(DateDistribution {
            mass,
            ..self.clone()
        })
    }

    /// Accept only points inside one of the closed intervals `[a, b]`.
    pub fn with_acceptance(&self, intervals: &[(f64, f64)]) -> DateDistribution {
        let mut d = self.clone();
        for i in 0..d.len() {
            let y = d.year(i);
            let inside = intervals
                .iter()
                .any(|&(a, b)| y >= a - GRID_TOL && y <= b + GRID_TOL);
            d.accepted[i] = d.accepted[i] && inside;
            if !d.accepted[i] {
                d.mass[i] = 0.0;
            }
        }
        d
    }

    /// Probability-weighted mean year of the accepted mass.
    pub fn mean_year(&self) -> Result<f64> {
        let m = self.mass();
        let total: f64 = m.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyMass);
        }
        Ok(m.iter()
            .enumerate()
            .map(|(i, w)| w * self.year(i))
            .sum::<f64>()
            / total)
    }

    /// Year of the largest accepted mass; ties resolve to the earliest year.
    pub fn mode_year(&self) -> Result<f64> {
        let m = self.mass();
        let mut best = None;
        for (i, &v) in m.iter().enumerate() {
            if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| self.year(i)).ok_or(Error::EmptyMass)
    }

    /// Highest-density ranges holding `level` of the accepted mass.
    ///
    /// Grid points are taken in order of decreasing mass until the level is
    /// reached; runs of consecutive taken points form the intervals.
    pub fn hpd_ranges(&self, level: f64) -> Result<AcceptedRange> {
        let m = self.mass();
        let total: f64 = m.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyMass);
        }
        let mut order: Vec<usize> = (0..m.len()).filter(|&i| m[i] > 0.0).collect();
        order.sort_by(|&a, &b| m[b].total_cmp(&m[a]).then(a.cmp(&b)));
        let mut taken = vec![false; m.len()];
        let mut acc = 0.0;
        for i in order {
            if acc >= level * total * (1.0 - 1e-12) {
                break;
            }
            taken[i] = true;
            acc += m[i];
        }
        let mut intervals = Vec::new();
        let mut i = 0;
        while i < m.len() {
            if !taken[i] {
                i += 1;
                continue;
            }
            let start = i;
            let mut share = 0.0;
            while i < m.len() && taken[i] {
                share += m[i];
                i += 1;
            }
            intervals.push(Interval {
                start: self.year(start),
                end: self.year(i - 1),
                share: share / total,
            });
        }
        Ok(AcceptedRange { intervals })
    }

    /// Reject every 2σ range whose share of the accepted mass is below
    /// `threshold`, and everything outside the 2σ ranges.
    pub fn without_minor_peaks(&self, threshold: f64) -> Result<DateDistribution> {
        let ranges = self.hpd_ranges(0.954)?;
        let keep: Vec<(f64, f64)> = ranges
            .intervals
            .iter()
            .filter(|r| r.share >= threshold)
            .map(|r| (r.start, r.end))
            .collect();
        if keep.is_empty() {
            return Ok(self.clone());
        }
        Ok(self.with_acceptance(&keep))
    }
}

/// Multiply by a step function at `cut` and renormalise the survivors.
///
/// `Keep::Right` accepts years `>= cut`, `Keep::Left` years `<= cut`. A cut
/// carrying noticeable mass (above [`PLATEAU_TOLERANCE`] of the peak) is
/// logged as a warning since it slices through a peak.
pub fn apply_heaviside(d: &DateDistribution, cut: f64, keep: Keep) -> Result<DateDistribution> {
    if cut < d.first_year() - d.step || cut > d.last_year() + d.step {
        return Err(Error::OutOfRange {
            year: cut,
            first: d.first_year(),
            last: d.last_year(),
        });
    }
    let m = d.mass();
    let peak = m.iter().cloned().fold(0.0, f64::max);
    let at_cut = m[d.nearest_index(cut)];
    if peak > 0.0 && at_cut >= PLATEAU_TOLERANCE * peak {
        log::warn!(
            "Heaviside cut at {cut} sits on mass {at_cut:.3e} ({:.2}% of the peak)",
            100.0 * at_cut / peak
        );
    }
    let mut out = d.clone();
    for i in 0..out.len() {
        let y = out.year(i);
        let keep_here = match keep {
            Keep::Right => y >= cut,
            Keep::Left => y <= cut,
        };
        if !keep_here {
            out.accepted[i] = false;
            out.mass[i] = 0.0;
        }
    }
    out.normalized()
}

/// Bin-wise sum of accepted mass and number of contributing distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accumulation {
    pub first: f64,
    pub step: f64,
    pub mass: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Accumulation {
    pub fn max(&self) -> f64 {
        self.mass.iter().cloned().fold(0.0, f64::max)
    }
}

/// Accumulate a training set on a shared grid (resample first if needed).
pub fn accumulate(set: &[DateDistribution]) -> Result<Accumulation> {
    let first = set
        .first()
        .ok_or_else(|| Error::Input("cannot accumulate an empty set".into()))?;
    let mut mass = vec![0.0; first.len()];
    let mut counts = vec![0; first.len()];
    for (k, d) in set.iter().enumerate() {
        if !d.same_grid(first) {
            return Err(Error::GridMismatch(format!(
                "distribution {k} starts at {} with step {} over {} points, expected {} / {} / {}",
                d.first,
                d.step,
                d.len(),
                first.first,
                first.step,
                first.len()
            )));
        }
        for (i, v) in d.mass().into_iter().enumerate() {
            mass[i] += v;
            if v > 0.0 {
                counts[i] += 1;
            }
        }
    }
    Ok(Accumulation {
        first: first.first,
        step: first.step,
        mass,
        counts,
    })
}

/// Linear interpolation of the accepted mass onto another grid, then
/// renormalisation. Points outside the source grid get zero.
pub fn resample(
    d: &DateDistribution,
    first: f64,
    step: f64,
    len: usize,
) -> Result<DateDistribution> {
    let src = d.mass();
    let mut mass = vec![0.0; len];
    for (i, out) in mass.iter_mut().enumerate() {
        let y = first + step * i as f64;
        let t = (y - d.first) / d.step;
        if t < -GRID_TOL || t > (d.len() - 1) as f64 + GRID_TOL {
            continue;
        }
        let t = t.clamp(0.0, (d.len() - 1) as f64);
        let j = t.floor() as usize;
        let f = t - j as f64;
        *out = if j + 1 < d.len() {
            src[j] * (1.0 - f) + src[j + 1] * f
        } else {
            src[j]
        };
    }
    let out = DateDistribution::new(first, step, mass)?;
    if out.is_empty() {
        Ok(out)
    } else {
        out.normalized()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bimodal(first: f64, n: usize, a: (f64, f64, f64), b: (f64, f64, f64)) -> DateDistribution {
        let mass = (0..n)
            .map(|i| {
                let y = first + 5.0 * i as f64;
                let g = |(w, mu, s): (f64, f64, f64)| w * (-(y - mu).powi(2) / (2.0 * s * s)).exp();
                g(a) + g(b)
            })
            .collect();
        DateDistribution::new(first, 5.0, mass).unwrap()
    }

    #[test]
    fn cut_beyond_support_changes_nothing() {
        let d = bimodal(-400.0, 100, (1.0, -200.0, 15.0), (0.0, 0.0, 1.0))
            .normalized()
            .unwrap();
        let cut = apply_heaviside(&d, 50.0, Keep::Left).unwrap();
        for (a, b) in cut.mass().iter().zip(d.mass()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn keeping_the_right_peak_rescales_it() {
        // exactly separated boxes of mass 0.6 and 0.4
        let mut mass = vec![0.0; 20];
        mass[2..5].iter_mut().for_each(|m| *m = 0.2);
        mass[12..16].iter_mut().for_each(|m| *m = 0.1);
        let d = DateDistribution::new(-300.0, 5.0, mass.clone()).unwrap();
        let out = apply_heaviside(&d, -260.0, Keep::Right).unwrap();
        assert!((out.accepted_mass() - 1.0).abs() < 1e-12);
        for i in 12..16 {
            assert!((out.mass()[i] - 2.5 * mass[i]).abs() < 1e-12);
        }
        assert!(out.mass()[..10].iter().all(|&m| m == 0.0));
        assert!(out.accepted()[..8].iter().all(|&a| !a));
    }

    #[test]
    fn cut_outside_the_grid_is_an_error() {
        let d = DateDistribution::new(-300.0, 5.0, vec![1.0; 10]).unwrap();
        assert!(matches!(
            apply_heaviside(&d, 400.0, Keep::Right),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn accumulation_counts() {
        let boxed = |lo: usize, hi: usize| {
            let mass = (0..10)
                .map(|i| if (lo..hi).contains(&i) { 1.0 } else { 0.0 })
                .collect();
            DateDistribution::new(0.0, 5.0, mass).unwrap()
        };
        let a = accumulate(&[boxed(0, 4)]).unwrap();
        assert_eq!(a.counts, vec![1, 1, 1, 1, 0, 0, 0, 0, 0, 0]);
        let a = accumulate(&[boxed(0, 4), boxed(0, 4)]).unwrap();
        assert_eq!(a.mass[..4], [2.0; 4]);
        let a = accumulate(&[boxed(0, 6), boxed(2, 8), boxed(4, 10)]).unwrap();
        assert_eq!(a.counts, vec![1, 1, 2, 2, 3, 3, 2, 2, 1, 1]);

        let other = DateDistribution::new(1.0, 5.0, vec![1.0; 10]).unwrap();
        assert!(matches!(
            accumulate(&[boxed(0, 4), other]),
            Err(Error::GridMismatch(_))
        ));
        assert!(accumulate(&[]).is_err());
    }

    #[test]
    fn hpd_recovers_two_intervals() {
        let d = bimodal(-400.0, 120, (0.6, -300.0, 12.0), (0.4, -100.0, 12.0));
        let r = d.hpd_ranges(0.954).unwrap();
        assert_eq!(r.intervals.len(), 2);
        let (a, b) = (r.intervals[0], r.intervals[1]);
        assert!(a.start < -300.0 && a.end > -300.0 && b.start < -100.0 && b.end > -100.0);
        assert!((a.share - 0.6).abs() < 0.03 && (b.share - 0.4).abs() < 0.03);
    }

    #[test]
    fn minor_peaks_are_dropped() {
        let d = bimodal(-400.0, 120, (1.0, -250.0, 15.0), (0.15, -50.0, 10.0))
            .normalized()
            .unwrap();
        let r = d.hpd_ranges(0.954).unwrap();
        assert_eq!(r.intervals.len(), 2);
        let major = d.without_minor_peaks(0.1).unwrap();
        assert!(major.mass()[d.nearest_index(-50.0)] == 0.0);
        assert_eq!(major.mode_year().unwrap(), d.mode_year().unwrap());
    }

    #[test]
    fn from_ranges_spreads_shares() {
        let ranges = [
            Interval {
                start: -355.0,
                end: -285.0,
                share: 0.495,
            },
            Interval {
                start: -230.0,
                end: -160.0,
                share: 0.459,
            },
        ];
        let d = DateDistribution::from_ranges(-400.0, 5.0, 100, &ranges).unwrap();
        assert!((d.accepted_mass() - 0.954).abs() < 1e-12);
        assert_eq!(d.mass()[d.nearest_index(-355.0)], 0.495 / 15.0);
        assert_eq!(d.mass()[d.nearest_index(-360.0)], 0.0);
        let narrow = [Interval {
            start: -12.0,
            end: -11.0,
            share: 1.0,
        }];
        let d = DateDistribution::from_ranges(-20.0, 5.0, 10, &narrow).unwrap();
        assert_eq!(d.mode_year().unwrap(), -10.0);
    }

    #[test]
    fn resampling_onto_a_finer_grid() {
        let d = DateDistribution::new(0.0, 10.0, vec![0.0, 1.0, 0.0]).unwrap();
        let r = resample(&d, 0.0, 5.0, 5).unwrap();
        assert_eq!(r.mass(), vec![0.0, 0.25, 0.5, 0.25, 0.0]);
    }

    #[test]
    fn statistics() {
        let d = DateDistribution::new(-10.0, 5.0, vec![0.0, 1.0, 3.0, 3.0]).unwrap();
        assert_eq!(d.mode_year().unwrap(), 0.0);
        assert!((d.mean_year().unwrap() - (-5.0 + 0.0 + 15.0) / 7.0).abs() < 1e-12);
        let zero = DateDistribution::new(0.0, 5.0, vec![0.0; 4]).unwrap();
        assert!(zero.is_empty());
        assert!(matches!(zero.normalized(), Err(Error::EmptyMass)));
    }

    proptest! {
        #[test]
        fn heaviside_preserves_ratios(
            w1 in 0.1f64..1.0, w2 in 0.1f64..1.0,
            m1 in -350.0f64..-250.0, m2 in -100.0f64..50.0,
            s1 in 5.0f64..20.0, s2 in 5.0f64..20.0,
            right in any::<bool>(),
        ) {
            let d = bimodal(-400.0, 100, (w1, m1, s1), (w2, m2, s2));
            let cut = (m1 + m2) / 2.0;
            let keep = if right { Keep::Right } else { Keep::Left };
            let out = apply_heaviside(&d, cut, keep).unwrap();
            prop_assert!((out.accepted_mass() - 1.0).abs() < 1e-9);
            let (before, after) = (d.mass(), out.mass());
            let kept: Vec<usize> = (0..d.len()).filter(|&i| out.accepted()[i] && before[i] > 1e-300).collect();
            for w in kept.windows(2) {
                let (i, j) = (w[0], w[1]);
                let r0 = before[i] / before[j];
                let r1 = after[i] / after[j];
                prop_assert!((r0 - r1).abs() <= 1e-12 * r0.abs().max(1.0));
            }
        }
    }
}
