use serde::{Deserialize, Serialize};

use super::DateDistribution;
use crate::error::{Error, Result};

pub const DEFAULT_BHATTACHARYYA_CAP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    ChiSquare,
    Bhattacharyya,
}

/// Distance between two mass vectors on the same grid.
///
/// * Euclidean: `sqrt(Σ (a - b)²)`
/// * chi-square: `½ Σ (a - b)² / (a + b)`, skipping bins where `a + b = 0`
/// * Bhattacharyya: `-ln Σ sqrt(a b)`, clamped to `[0, cap]`; a zero
///   coefficient gives `cap`
pub fn distance(a: &[f64], b: &[f64], metric: Metric, cap: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!(
            "{} vs {} bins",
            a.len(),
            b.len()
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let d = match metric {
        Metric::Euclidean => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt(),
        Metric::ChiSquare => {
            0.5 * a
                .iter()
                .zip(b)
                .filter(|(x, y)| *x + *y > 0.0)
                .map(|(x, y)| (x - y).powi(2) / (x + y))
                .sum::<f64>()
        }
        Metric::Bhattacharyya => {
            let bc: f64 = a.iter().zip(b).map(|(x, y)| (x * y).sqrt()).sum();
            if bc <= 0.0 {
                cap
            } else {
                (-bc.ln()).clamp(0.0, cap)
            }
        }
    };
    Ok(d)
}

/// [`distance`] over the accepted masses of two distributions.
pub fn distribution_distance(
    a: &DateDistribution,
    b: &DateDistribution,
    metric: Metric,
) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch(format!(
            "grids {}..{} step {} and {}..{} step {}",
            a.first_year(),
            a.last_year(),
            a.step(),
            b.first_year(),
            b.last_year(),
            b.step()
        )));
    }
    distance(&a.mass(), &b.mass(), metric, DEFAULT_BHATTACHARYYA_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ALL: [Metric; 3] = [Metric::Euclidean, Metric::ChiSquare, Metric::Bhattacharyya];

    #[test]
    fn hand_computed_four_bins() {
        let a = [0.1, 0.4, 0.5, 0.0];
        let b = [0.2, 0.2, 0.3, 0.3];
        let e = distance(&a, &b, Metric::Euclidean, 50.0).unwrap();
        assert!((e - 0.18f64.sqrt()).abs() < 1e-12);
        let c = distance(&a, &b, Metric::ChiSquare, 50.0).unwrap();
        let expect = 0.5 * (0.01 / 0.3 + 0.04 / 0.6 + 0.04 / 0.8 + 0.09 / 0.3);
        assert!((c - expect).abs() < 1e-12);
        let bh = distance(&a, &b, Metric::Bhattacharyya, 50.0).unwrap();
        let bc = 0.02f64.sqrt() + 0.08f64.sqrt() + 0.15f64.sqrt();
        assert!((bh + bc.ln()).abs() < 1e-12);
    }

    #[test]
    fn disjoint_supports_hit_the_cap() {
        let a = [0.5, 0.5, 0.0, 0.0];
        let b = [0.0, 0.0, 0.5, 0.5];
        assert_eq!(distance(&a, &b, Metric::Bhattacharyya, 50.0).unwrap(), 50.0);
        assert_eq!(distance(&a, &b, Metric::ChiSquare, 50.0).unwrap(), 1.0);
    }

    #[test]
    fn grid_mismatch() {
        let a = DateDistribution::new(0.0, 5.0, vec![1.0; 4]).unwrap();
        let b = DateDistribution::new(5.0, 5.0, vec![1.0; 4]).unwrap();
        assert!(matches!(
            distribution_distance(&a, &b, Metric::Euclidean),
            Err(Error::GridMismatch(_))
        ));
        assert!(distance(&[1.0], &[1.0, 2.0], Metric::Euclidean, 50.0).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_zero_on_equal(v in proptest::collection::vec(0.0f64..1.0, 1..30), w in proptest::collection::vec(0.0f64..1.0, 30)) {
            let w = &w[..v.len()];
            for m in ALL {
                prop_assert_eq!(distance(&v, &v, m, 50.0).unwrap(), 0.0);
                let d1 = distance(&v, w, m, 50.0).unwrap();
                let d2 = distance(w, &v, m, 50.0).unwrap();
                prop_assert!(d1 >= 0.0);
                prop_assert!((d1 - d2).abs() < 1e-12);
            }
        }
    }
}
