use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PRECISION_BOUNDS: (f64, f64) = (1e-12, 1e12);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RidgeMode {
    /// Maximise the marginal likelihood over `alpha` and `beta`.
    Evidence {
        tol: f64,
        max_iter: usize,
    },
    Fixed {
        alpha: f64,
        beta: f64,
    },
}

impl Default for RidgeMode {
    fn default() -> Self {
        RidgeMode::Evidence {
            tol: 1e-6,
            max_iter: 300,
        }
    }
}

/// Gaussian posterior over the weights of one linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgePosterior {
    /// Posterior mean `m_N`.
    pub mean: Vec<f64>,
    /// Posterior covariance `S_N`, row-major `k x k`.
    pub cov: Vec<f64>,
    /// Weight precision.
    pub alpha: f64,
    /// Noise precision.
    pub beta: f64,
    /// Constant added to every prediction (the target mean when fitted with
    /// an intercept, otherwise zero).
    pub intercept: f64,
    pub iterations: usize,
}

impl RidgePosterior {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Predictive mean `m_Nᵀx (+ intercept)` and variance `1/β + xᵀS_N x`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        let k = self.dim();
        if x.len() != k {
            return Err(Error::Input(format!(
                "expected {k} projected features, got {}",
                x.len()
            )));
        }
        let mean = self.intercept + self.mean.iter().zip(x).map(|(m, v)| m * v).sum::<f64>();
        let mut quad = 0.0;
        for i in 0..k {
            let row = &self.cov[i * k..(i + 1) * k];
            quad += x[i] * row.iter().zip(x).map(|(s, v)| s * v).sum::<f64>();
        }
        Ok((mean, 1.0 / self.beta + quad.max(0.0)))
    }
}

/// Shared eigendecomposition of `XᵀX` reused across output bins.
pub struct RidgeDesign {
    x: DMatrix<f64>,
    xtx_vecs: DMatrix<f64>,
    xtx_vals: DVector<f64>,
    intercept: bool,
}

impl RidgeDesign {
    /// `rows` are the `n` input vectors of length `k`. With `intercept` the
    /// targets are centred before fitting and their mean is added back at
    /// prediction time; callers should pass centred inputs (PCA scores are).
    pub fn new(rows: &[Vec<f64>], intercept: bool) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::Input(format!(
                "regression needs at least 2 samples, got {n}"
            )));
        }
        let k = rows[0].len();
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::Input(
                "regression inputs must share a positive length".into(),
            ));
        }
        let x = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("regression design", "non-finite input"));
        }
        let eig = SymmetricEigen::new(x.transpose() * &x);
        let vals = eig.eigenvalues.map(|v| v.max(0.0));
        Ok(RidgeDesign {
            x,
            xtx_vecs: eig.eigenvectors,
            xtx_vals: vals,
            intercept,
        })
    }

    pub fn samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Fit one output. `label` names it in numeric errors.
    pub fn fit(&self, t: &[f64], mode: RidgeMode, label: &str) -> Result<RidgePosterior> {
        let n = self.samples();
        if t.len() != n {
            return Err(Error::Input(format!(
                "{label}: {} targets for {n} samples",
                t.len()
            )));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(label, "non-finite target"));
        }
        let offset = if self.intercept {
            t.iter().sum::<f64>() / n as f64
        } else {
            0.0
        };
        let t = DVector::from_iterator(n, t.iter().map(|v| v - offset));
        let xt_t = self.x.transpose() * &t;

        let (mut alpha, mut beta, evidence) = match mode {
            RidgeMode::Fixed { alpha, beta } => {
                if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
                    return Err(Error::Config(format!(
                        "{label}: alpha and beta must be positive"
                    )));
                }
                (alpha, beta, None)
            }
            RidgeMode::Evidence { tol, max_iter } => {
                let var = t.iter().map(|v| v * v).sum::<f64>() / n as f64;
                let beta0 = if var > 0.0 { 1.0 / var } else { 1.0 };
                (1.0, clamp(beta0), Some((tol, max_iter)))
            }
        };

        let mut iterations = 0;
        let mut mean = self.posterior_mean(alpha, beta, &xt_t);
        if let Some((tol, max_iter)) = evidence {
            let df = if self.intercept {
                n as f64 - 1.0
            } else {
                n as f64
            };
            for it in 1..=max_iter {
                iterations = it;
                let gamma: f64 = self
                    .xtx_vals
                    .iter()
                    .map(|&mu| beta * mu / (alpha + beta * mu))
                    .sum();
                let mm = mean.norm_squared();
                let rss = (&t - &self.x * &mean).norm_squared();
                let new_alpha = clamp(if mm > 0.0 {
                    gamma / mm
                } else {
                    PRECISION_BOUNDS.1
                });
                let resid_df = df - gamma;
                let new_beta = clamp(if rss > 0.0 && resid_df > 0.0 {
                    resid_df / rss
                } else {
                    PRECISION_BOUNDS.1
                });
                let done = rel_change(alpha, new_alpha) < tol && rel_change(beta, new_beta) < tol;
                alpha = new_alpha;
                beta = new_beta;
                mean = self.posterior_mean(alpha, beta, &xt_t);
                if done {
                    break;
                }
            }
        }

        let cov = self.posterior_cov(alpha, beta);
        if !alpha.is_finite()
            || !beta.is_finite()
            || mean.iter().chain(cov.iter()).any(|v| !v.is_finite())
        {
            return Err(Error::numeric(label, "posterior became non-finite"));
        }
        Ok(RidgePosterior {
            mean: mean.iter().copied().collect(),
            cov: cov.transpose().iter().copied().collect(),
            alpha,
            beta,
            intercept: offset,
            iterations,
        })
    }

    /// `β S_N Xᵀt` with `S_N = V diag(1 / (α + β μ)) Vᵀ`.
    fn posterior_mean(&self, alpha: f64, beta: f64, xt_t: &DVector<f64>) -> DVector<f64> {
        let v = &self.xtx_vecs;
        let mut proj = v.transpose() * xt_t;
        for (p, &mu) in proj.iter_mut().zip(self.xtx_vals.iter()) {
            *p *= beta / (alpha + beta * mu);
        }
        v * proj
    }

    fn posterior_cov(&self, alpha: f64, beta: f64) -> DMatrix<f64> {
        let v = &self.xtx_vecs;
        let scale = self.xtx_vals.map(|mu| 1.0 / (alpha + beta * mu));
        let mut vs = v.clone();
        for (j, s) in scale.iter().enumerate() {
            vs.column_mut(j).scale_mut(*s);
        }
        let s = &vs * v.transpose();
        (&s + s.transpose()) * 0.5
    }
}

fn clamp(v: f64) -> f64 {
    v.clamp(PRECISION_BOUNDS.0, PRECISION_BOUNDS.1)
}

fn rel_change(old: f64, new: f64) -> f64 {
    (new - old).abs() / old.abs().max(f64::MIN_POSITIVE)
}

/// Single-output convenience wrapper around [`RidgeDesign`].
pub fn fit_bayes_ridge(x: &[Vec<f64>], t: &[f64], mode: RidgeMode) -> Result<RidgePosterior> {
    RidgeDesign::new(x, false)?.fit(t, mode, "ridge")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn problem(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let t = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        (x, t)
    }

    /// Closed-form ridge `(XᵀX + λI)⁻¹Xᵀt` by Gauss-Jordan elimination.
    fn ridge_oracle(x: &[Vec<f64>], t: &[f64], lambda: f64) -> Vec<f64> {
        let k = x[0].len();
        let mut a = vec![vec![0.0; k + 1]; k];
        for i in 0..k {
            for j in 0..k {
                a[i][j] =
                    x.iter().map(|r| r[i] * r[j]).sum::<f64>() + if i == j { lambda } else { 0.0 };
            }
            a[i][k] = x.iter().zip(t).map(|(r, y)| r[i] * y).sum();
        }
        for c in 0..k {
            let p = (c..k)
                .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
                .unwrap();
            a.swap(c, p);
            for r in 0..k {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for j in c..=k {
                        a[r][j] -= f * a[c][j];
                    }
                }
            }
        }
        (0..k).map(|i| a[i][k] / a[i][i]).collect()
    }

    #[test]
    fn fixed_mode_equals_closed_form_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (x, t) = problem(&mut rng, 30, 10);
            let alpha = rng.random_range(0.01..10.0);
            let beta = rng.random_range(0.1..100.0);
            let post = fit_bayes_ridge(&x, &t, RidgeMode::Fixed { alpha, beta }).unwrap();
            let w = ridge_oracle(&x, &t, alpha / beta);
            for (a, b) in post.mean.iter().zip(&w) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_targets_give_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, _) = problem(&mut rng, 12, 4);
        for mode in [
            RidgeMode::default(),
            RidgeMode::Fixed {
                alpha: 1.0,
                beta: 1.0,
            },
        ] {
            let post = fit_bayes_ridge(&x, &[0.0; 12], mode).unwrap();
            assert!(post.mean.iter().all(|&m| m == 0.0));
        }
    }

    #[test]
    fn evidence_recovers_noise_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise_sd = 0.05;
        let noise = Normal::new(0.0, noise_sd).unwrap();
        let w = [1.5, -2.0, 0.7, 0.0, 3.0];
        let x: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let t: Vec<f64> = x
            .iter()
            .map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + noise.sample(&mut rng))
            .collect();
        let post = fit_bayes_ridge(&x, &t, RidgeMode::default()).unwrap();
        let true_beta = 1.0 / (noise_sd * noise_sd);
        assert!(
            post.beta > true_beta / 2.0 && post.beta < true_beta * 2.0,
            "{}",
            post.beta
        );
        assert!(post.iterations < 300);
    }

    #[test]
    fn predictive_variance_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (x, t) = problem(&mut rng, 30, 6);
        let post = fit_bayes_ridge(&x, &t, RidgeMode::default()).unwrap();
        for _ in 0..1000 {
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (_, var) = post.predict(&v).unwrap();
            let mut direct = 1.0 / post.beta;
            for i in 0..6 {
                for j in 0..6 {
                    direct += v[i] * post.cov[i * 6 + j] * v[j];
                }
            }
            assert!((var - direct).abs() < 1e-10);
            assert!(var >= 1.0 / post.beta);
        }
    }

    #[test]
    fn duplicated_rows_never_widen_the_posterior() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut x, mut t) = problem(&mut rng, 15, 4);
        let mode = RidgeMode::Fixed {
            alpha: 0.5,
            beta: 4.0,
        };
        let before = fit_bayes_ridge(&x, &t, mode).unwrap();
        x.push(x[3].clone());
        t.push(t[3]);
        let after = fit_bayes_ridge(&x, &t, mode).unwrap();
        for i in 0..4 {
            assert!(after.cov[i * 4 + i] <= before.cov[i * 4 + i] + 1e-15);
        }
    }

    #[test]
    fn intercept_absorbs_a_constant_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (x, _) = problem(&mut rng, 10, 3);
        let design = RidgeDesign::new(&x, true).unwrap();
        let post = design
            .fit(&[-120.0; 10], RidgeMode::default(), "scalar")
            .unwrap();
        for r in &x {
            assert!((post.predict(r).unwrap().0 + 120.0).abs() < 1e-9);
        }
    }

    #[test]
    fn errors_name_the_output() {
        let x = vec![vec![1.0], vec![2.0]];
        let design = RidgeDesign::new(&x, false).unwrap();
        match design.fit(&[1.0, f64::NAN], RidgeMode::default(), "bin 7") {
            Err(Error::Numeric { context, .. }) => assert_eq!(context, "bin 7"),
            other => panic!("{other:?}"),
        }
        assert!(design.fit(&[1.0], RidgeMode::default(), "bin 0").is_err());
        assert!(RidgeDesign::new(&x[..1], false).is_err());
        assert!(matches!(
            design.fit(
                &[1.0, 2.0],
                RidgeMode::Fixed {
                    alpha: 0.0,
                    beta: 1.0
                },
                "b"
            ),
            Err(Error::Config(_))
        ));
    }
}
