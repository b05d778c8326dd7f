//! Compensating for the uneven time coverage of the training dates.
//!
//! Two remedies: reweighting a prediction by the accumulated training mass of
//! each bin, and duplicating under-represented manuscripts before training.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chrono::{accumulate, DateDistribution};
use crate::error::{Error, Result};
use crate::regress::{PredictionCurve, Timeline};

/// Bundled duplication plan for the sample manifest.
pub const SAMPLE_AUGMENTATION_PLAN: &str = include_str!("../data/augmentation_plan.json");

/// Largest duplication factor the plan builder will propose.
pub const MAX_FACTOR: u32 = 10;

/// Bins whose unweighted accumulated mass is below this share of the peak do
/// not count as populated when judging flatness.
pub const POPULATED_FLOOR: f64 = 1e-3;

/// Accumulated training mass per prediction bin, with the qualifying threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceWeights {
    pub threshold: f64,
    pub mass: Vec<f64>,
    pub counts: Vec<usize>,
}

impl BalanceWeights {
    pub fn new(threshold: f64, mass: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::Config(format!(
                "balance threshold {threshold} must be in (0, 1]"
            )));
        }
        if mass.len() != counts.len() {
            return Err(Error::Input(format!(
                "{} accumulated bins but {} counts",
                mass.len(),
                counts.len()
            )));
        }
        if mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Input(
                "accumulated mass must be finite and non-negative".into(),
            ));
        }
        let w = BalanceWeights {
            threshold,
            mass,
            counts,
        };
        if !(w.max() > 0.0) {
            return Err(Error::EmptyMass);
        }
        Ok(w)
    }

    /// Bin each training distribution onto the timeline and sum them.
    pub fn on_timeline(
        threshold: f64,
        timeline: &Timeline,
        training: &[DateDistribution],
    ) -> Result<Self> {
        let mut mass = vec![0.0; timeline.bins()];
        let mut counts = vec![0; timeline.bins()];
        for d in training {
            for (i, v) in timeline.bin_distribution(d)?.into_iter().enumerate() {
                mass[i] += v;
                if v > 0.0 {
                    counts[i] += 1;
                }
            }
        }
        BalanceWeights::new(threshold, mass, counts)
    }

    /// Peak accumulated mass `M`.
    pub fn max(&self) -> f64 {
        self.mass.iter().cloned().fold(0.0, f64::max)
    }
}

/// Divide qualifying bins by their accumulated mass and rescale so the peak
/// matches the input's peak.
///
/// A bin qualifies when its probability exceeds `T * M` and more than two
/// training distributions reach it. When no bin qualifies the input is
/// returned unchanged.
pub fn reweight(p: &[f64], w: &BalanceWeights) -> Result<Vec<f64>> {
    if p.len() != w.mass.len() {
        return Err(Error::GridMismatch(format!(
            "prediction has {} bins, accumulation has {}",
            p.len(),
            w.mass.len()
        )));
    }
    let max_p = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max_p > 0.0) {
        log::warn!("prediction has no positive bin; reweighting skipped");
        return Ok(p.to_vec());
    }
    let limit = w.threshold * w.max();
    let mut any = false;
    let weighted: Vec<f64> = p
        .iter()
        .zip(&w.mass)
        .zip(&w.counts)
        .map(|((&pi, &cum), &n)| {
            if pi > limit && n > 2 {
                any = true;
                pi / cum
            } else {
                pi
            }
        })
        .collect();
    if !any {
        return Ok(p.to_vec());
    }
    let max_w = weighted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(weighted.into_iter().map(|v| v / max_w * max_p).collect())
}

/// Reweight the clamped means of a curve. Each bin's σ is scaled by the same
/// factor as its mean; bins with zero probability keep their σ.
pub fn reweight_curve(curve: &PredictionCurve, w: &BalanceWeights) -> Result<PredictionCurve> {
    let p = curve.display_mean();
    let mean = reweight(&p, w)?;
    let sigma = p
        .iter()
        .zip(&mean)
        .zip(&curve.sigma)
        .map(|((&a, &b), &s)| if a > 0.0 { s * b / a } else { s })
        .collect();
    Ok(PredictionCurve {
        timeline: curve.timeline,
        mean,
        sigma,
    })
}

/// Integer duplication factor per manuscript id; absent ids keep factor 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub factors: BTreeMap<String, u32>,
}

impl AugmentationPlan {
    pub fn sample() -> Self {
        AugmentationPlan::parse(SAMPLE_AUGMENTATION_PLAN).expect("bundled plan is valid")
    }

    pub fn parse(json: &str) -> Result<Self> {
        let plan: AugmentationPlan = serde_json::from_str(json)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        AugmentationPlan::parse(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialises")
    }

    pub fn validate(&self) -> Result<()> {
        match self.factors.iter().find(|(_, &f)| f == 0) {
            Some((id, _)) => Err(Error::Config(format!(
                "duplication factor for {id} must be at least 1"
            ))),
            None => Ok(()),
        }
    }

    pub fn factor(&self, id: &str) -> u32 {
        self.factors.get(id).copied().unwrap_or(1)
    }

    /// Image counts after duplication.
    pub fn apply_counts(&self, counts: &BTreeMap<String, usize>) -> BTreeMap<String, usize> {
        counts
            .iter()
            .map(|(id, &n)| (id.clone(), n * self.factor(id) as usize))
            .collect()
    }

    /// Accumulated mass with each distribution counted `factor` times.
    pub fn accumulation(&self, training: &[(String, DateDistribution)]) -> Result<Vec<f64>> {
        let factors: Vec<u32> = training.iter().map(|(id, _)| self.factor(id)).collect();
        weighted_accumulation(training, &factors)
    }
}

fn weighted_accumulation(
    training: &[(String, DateDistribution)],
    factors: &[u32],
) -> Result<Vec<f64>> {
    let set: Vec<DateDistribution> = training.iter().map(|(_, d)| d.clone()).collect();
    accumulate(&set)?;
    let mut out = vec![0.0; set[0].len()];
    for (d, &f) in set.iter().zip(factors) {
        for (o, m) in out.iter_mut().zip(d.mass()) {
            *o += f as f64 * m;
        }
    }
    Ok(out)
}

/// Max over min of the accumulated mass on the populated bins.
pub fn flatness(mass: &[f64], populated: &[bool]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (&m, _) in mass.iter().zip(populated).filter(|(_, &p)| p) {
        lo = lo.min(m);
        hi = hi.max(m);
    }
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Greedy search for duplication factors in `1..=MAX_FACTOR` that flatten
/// the accumulated training mass.
///
/// Each round applies the single factor change that lowers the max/min
/// ratio most, until the ratio reaches `target` or nothing improves it.
pub fn build_augmentation_plan(
    training: &[(String, DateDistribution)],
    target: f64,
) -> Result<AugmentationPlan> {
    if training.is_empty() {
        return Err(Error::Input("no training distributions to balance".into()));
    }
    let n = training.len();
    let mut factors = vec![1u32; n];
    let base = weighted_accumulation(training, &factors)?;
    let peak = base.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::EmptyMass);
    }
    let populated: Vec<bool> = base.iter().map(|&m| m >= POPULATED_FLOOR * peak).collect();
    let masses: Vec<Vec<f64>> = training.iter().map(|(_, d)| d.mass()).collect();
    let mut acc = base;
    let mut best = flatness(&acc, &populated);

    for _ in 0..n * MAX_FACTOR as usize {
        if best <= target {
            break;
        }
        let mut step: Option<(usize, u32, f64)> = None;
        for k in 0..n {
            for f in 1..=MAX_FACTOR {
                if f == factors[k] {
                    continue;
                }
                let delta = f as f64 - factors[k] as f64;
                let trial: Vec<f64> = acc
                    .iter()
                    .zip(&masses[k])
                    .map(|(a, m)| a + delta * m)
                    .collect();
                let r = flatness(&trial, &populated);
                let bar = step.map_or(best, |(_, _, s)| s);
                if r < bar * (1.0 - 1e-12) {
                    step = Some((k, f, r));
                }
            }
        }
        let Some((k, f, r)) = step else { break };
        let delta = f as f64 - factors[k] as f64;
        acc.iter_mut()
            .zip(&masses[k])
            .for_each(|(a, m)| *a += delta * m);
        factors[k] = f;
        best = r;
    }

    Ok(AugmentationPlan {
        factors: training
            .iter()
            .zip(&factors)
            .filter(|(_, &f)| f > 1)
            .map(|((id, _), &f)| (id.clone(), f))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn weights(t: f64, mass: &[f64], counts: &[usize]) -> BalanceWeights {
        BalanceWeights::new(t, mass.to_vec(), counts.to_vec()).unwrap()
    }

    #[test]
    fn curve_sigma_follows_its_mean() {
        let w = weights(0.05, &[3.0, 1.0, 2.0], &[5, 5, 5]);
        let curve = PredictionCurve {
            timeline: Timeline::new(0.0, 30.0, 10.0).unwrap(),
            mean: vec![0.9, 0.1, -0.2],
            sigma: vec![0.3, 0.2, 0.1],
        };
        let out = reweight_curve(&curve, &w).unwrap();
        assert_eq!(out.mean, reweight(&[0.9, 0.1, 0.0], &w).unwrap());
        assert_eq!(out.sigma[0], 0.3);
        assert!((out.sigma[1] - 0.2 * out.mean[1] / 0.1).abs() < 1e-15);
        assert_eq!(out.sigma[2], 0.1);
    }

    fn boxed(first_bin: usize, width: usize, len: usize) -> DateDistribution {
        let mut m = vec![0.0; len];
        m[first_bin..first_bin + width]
            .iter_mut()
            .for_each(|v| *v = 1.0 / width as f64);
        DateDistribution::new(0.0, 5.0, m).unwrap()
    }

    #[test]
    fn worked_example() {
        let out = reweight(&[0.9, 0.1], &weights(0.05, &[3.0, 1.0], &[5, 5])).unwrap();
        assert_eq!(out[0], 0.9);
        // 0.1 * 3 sits halfway between two doubles
        assert!((out[1] - 0.3).abs() <= f64::EPSILON * 0.3, "{}", out[1]);
    }

    #[test]
    fn full_threshold_is_a_no_op() {
        let p = [0.1, 0.7, 0.3, 0.0, 0.25];
        let out = reweight(&p, &weights(1.0, &[0.5, 0.6, 0.7, 0.2, 0.3], &[9; 5])).unwrap();
        assert_eq!(
            out.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            p.map(f64::to_bits)
        );
    }

    #[test]
    fn uniform_accumulation_only_rescales() {
        let p = [0.2, 0.5, 0.3];
        let out = reweight(&p, &weights(0.01, &[4.0; 3], &[6; 3])).unwrap();
        for (a, b) in out.iter().zip(&p) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn two_contributors_are_not_enough() {
        let out = reweight(&[0.9, 0.5], &weights(0.05, &[3.0, 0.5], &[5, 2])).unwrap();
        // bin 1 keeps 0.5 and becomes the weighted peak
        assert_eq!(out[1], 0.9);
        assert!((out[0] - 0.3 / 0.5 * 0.9).abs() < 1e-12);
    }

    #[test]
    fn zero_prediction_passes_through() {
        let out = reweight(&[0.0, 0.0], &weights(0.1, &[1.0, 1.0], &[3, 3])).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn invalid_weights() {
        assert!(matches!(
            BalanceWeights::new(0.0, vec![1.0], vec![1]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            BalanceWeights::new(0.1, vec![0.0], vec![0]),
            Err(Error::EmptyMass)
        ));
        assert!(BalanceWeights::new(0.1, vec![1.0], vec![1, 2]).is_err());
        assert!(reweight(&[1.0], &weights(0.1, &[1.0, 1.0], &[3, 3])).is_err());
    }

    #[test]
    fn timeline_weights_sum_binned_distributions() {
        let t = Timeline::new(0.0, 30.0, 10.0).unwrap();
        let d = DateDistribution::new(0.0, 5.0, vec![0.25, 0.25, 0.5, 0.0, 0.0, 0.0]).unwrap();
        let w = BalanceWeights::on_timeline(0.1, &t, &[d.clone(), d]).unwrap();
        assert_eq!(w.mass, vec![1.0, 1.0, 0.0]);
        assert_eq!(w.counts, vec![2, 2, 0]);
    }

    #[test]
    fn bundled_plan_matches_the_published_counts() {
        let plan = AugmentationPlan::sample();
        let before: BTreeMap<String, usize> = [
            ("4Q2", 2),
            ("4Q161", 2),
            ("5_6Hev1b", 1),
            ("11Q5", 9),
            ("Mas1k", 2),
            ("XHev_Se2", 1),
            ("4Q175", 3),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let after = plan.apply_counts(&before);
        assert_eq!(after["4Q2"], 12);
        assert_eq!(after["4Q161"], 12);
        assert_eq!(after["5_6Hev1b"], 6);
        assert_eq!(after["11Q5"], 54);
        assert_eq!(after["Mas1k"], 12);
        assert_eq!(after["XHev_Se2"], 6);
        assert_eq!(after["4Q175"], 3);
    }

    #[test]
    fn plan_json_round_trip_and_validation() {
        let plan = AugmentationPlan::sample();
        assert_eq!(AugmentationPlan::parse(&plan.to_json()).unwrap(), plan);
        assert!(matches!(
            AugmentationPlan::parse(r#"{"factors": {"a": 0}}"#),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn flat_accumulation_needs_no_duplication() {
        let set = vec![
            ("a".to_string(), boxed(0, 4, 12)),
            ("b".to_string(), boxed(4, 4, 12)),
            ("c".to_string(), boxed(8, 4, 12)),
        ];
        let plan = build_augmentation_plan(&set, 1.0).unwrap();
        assert!(plan.factors.is_empty());
    }

    /// Exhaustive search over both factors for the flattest pair.
    fn enumerate(set: &[(String, DateDistribution)]) -> (u32, u32) {
        let base = weighted_accumulation(set, &[1, 1]).unwrap();
        let populated: Vec<bool> = base.iter().map(|&m| m > 0.0).collect();
        let mut best = (1, 1, f64::INFINITY);
        for a in 1..=MAX_FACTOR {
            for b in 1..=MAX_FACTOR {
                let r = flatness(&weighted_accumulation(set, &[a, b]).unwrap(), &populated);
                if r < best.2 - 1e-12 {
                    best = (a, b, r);
                }
            }
        }
        (best.0, best.1)
    }

    #[test]
    fn three_to_one_imbalance() {
        // the heavy manuscript packs its mass into a third of the width
        let set = vec![
            ("heavy".to_string(), boxed(0, 2, 12)),
            ("light".to_string(), boxed(2, 6, 12)),
        ];
        let plan = build_augmentation_plan(&set, 1.0).unwrap();
        let (a, b) = enumerate(&set);
        assert_eq!((plan.factor("heavy"), plan.factor("light")), (a, b));
        let ratio = plan.factor("light") as f64 / plan.factor("heavy") as f64;
        assert!((ratio - 3.0).abs() < 0.5, "{ratio}");
        let after = flatness(
            &plan.accumulation(&set).unwrap(),
            &[true; 8]
                .iter()
                .chain(&[false; 4])
                .copied()
                .collect::<Vec<_>>(),
        );
        assert!((after - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plan_never_worsens_flatness() {
        let set: Vec<(String, DateDistribution)> = (0..5)
            .map(|i| (format!("m{i}"), boxed(i * 2, 2 + i, 20)))
            .collect();
        let base = weighted_accumulation(&set, &[1; 5]).unwrap();
        let populated: Vec<bool> = base.iter().map(|&m| m > 0.0).collect();
        let plan = build_augmentation_plan(&set, 1.0).unwrap();
        let after = flatness(&plan.accumulation(&set).unwrap(), &populated);
        assert!(after < flatness(&base, &populated));
        assert!(plan
            .factors
            .values()
            .all(|&f| (1..=MAX_FACTOR).contains(&f)));
    }

    proptest! {
        #[test]
        fn zeros_stay_zero_and_peak_is_kept(
            p in prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], 8),
            mass in prop::collection::vec(0.1..5.0f64, 8),
            counts in prop::collection::vec(0usize..6, 8),
            t in 0.01..1.0f64,
        ) {
            let w = BalanceWeights::new(t, mass, counts).unwrap();
            let out = reweight(&p, &w).unwrap();
            for (a, b) in out.iter().zip(&p) {
                prop_assert_eq!(*a == 0.0, *b == 0.0);
            }
            let max_in = p.iter().cloned().fold(0.0, f64::max);
            let max_out = out.iter().cloned().fold(0.0, f64::max);
            prop_assert!((max_in - max_out).abs() <= 1e-12);
        }
    }
}
