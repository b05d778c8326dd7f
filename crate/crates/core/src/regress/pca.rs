use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal components of a set of style vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of length `d`, by decreasing variance.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component.
    pub variances: Vec<f64>,
    /// Share of the total variance along each component.
    pub explained: Vec<f64>,
}

impl PcaModel {
    pub fn dims(&self) -> usize {
        self.components.len()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.mean.len() {
            return Err(Error::Input(format!(
                "feature has {} values, the model expects {}",
                v.len(),
                self.mean.len()
            )));
        }
        Ok(self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(v)
                    .zip(&self.mean)
                    .map(|((c, x), m)| c * (x - m))
                    .sum()
            })
            .collect())
    }

    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, &w) in self.components.iter().zip(z) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += w * ci;
            }
        }
        out
    }
}

/// Fit `k` principal components.
///
/// Works on the `d x d` covariance when `d <= n` and on the `n x n` Gram
/// matrix otherwise. Directions with (numerically) zero variance are
/// completed to an orthonormal set deterministically. Each component is
/// signed so that its largest-magnitude entry is positive.
pub fn fit_pca(data: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Input(format!(
            "PCA needs at least 2 vectors, got {n}"
        )));
    }
    let d = data[0].len();
    if data.iter().any(|v| v.len() != d) {
        return Err(Error::Input("style vectors differ in length".into()));
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::Config(format!(
            "PCA dimension {k} must be in 1..={} for {n} vectors of length {d}",
            (n - 1).min(d)
        )));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| data.iter().map(|v| v[j]).sum::<f64>() / n as f64)
        .collect();
    let x = DMatrix::from_fn(n, d, |i, j| data[i][j] - mean[j]);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("PCA", "non-finite feature value"));
    }
    let denom = (n - 1) as f64;

    let (eigvals, vectors): (Vec<f64>, Vec<Vec<f64>>) = if d <= n {
        let cov = x.transpose() * &x / denom;
        let (vals, vecs) = sorted_eigen(cov);
        let cols = (0..k)
            .map(|i| vecs.column(i).iter().copied().collect())
            .collect();
        (vals, cols)
    } else {
        let gram = &x * x.transpose() / denom;
        let (vals, vecs) = sorted_eigen(gram);
        let mut cols = Vec::with_capacity(k);
        for i in 0..k {
            let u = vecs.column(i);
            let v: Vec<f64> = (0..d).map(|j| x.column(j).dot(&u)).collect();
            cols.push(v);
        }
        (vals, cols)
    };

    let total: f64 = eigvals.iter().map(|v| v.max(0.0)).sum();
    let floor = 1e-12 * eigvals[0].abs().max(f64::MIN_POSITIVE);
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for (i, mut v) in vectors.into_iter().enumerate() {
        let var = eigvals[i].max(0.0);
        if var <= floor || !orthonormalize(&mut v, &components) {
            v = completion(d, &components);
        }
        components.push(v);
        variances.push(if var <= floor { 0.0 } else { var });
    }
    for c in &mut components {
        let big = c
            .iter()
            .enumerate()
            .fold(0, |b, (j, x)| if x.abs() > c[b].abs() { j } else { b });
        if c[big] < 0.0 {
            c.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let explained = variances
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();
    Ok(PcaModel {
        mean,
        components,
        variances,
        explained,
    })
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (vals, vecs)
}

/// Gram-Schmidt `v` against `basis` and normalise; false if nothing is left.
fn orthonormalize(v: &mut [f64], basis: &[Vec<f64>]) -> bool {
    for _ in 0..2 {
        for b in basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-10 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

fn completion(d: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        if orthonormalize(&mut e, basis) {
            return e;
        }
    }
    unreachable!("k <= d leaves room for another basis vector")
}
