use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal subspace: `project(v) = basis·(v − mean)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `r` rows of length `d`, orthonormal.
    basis: Vec<Vec<f64>>,
}

impl PcaModel {
    pub fn new(mean: Vec<f64>, basis: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(row) = basis.iter().find(|row| row.len() != mean.len()) {
            return Err(Error::mismatch(
                format!("basis rows of length {}", mean.len()),
                row.len().to_string(),
            ));
        }
        if mean
            .iter()
            .chain(basis.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::CorruptData("non-finite PCA parameter".into()));
        }
        Ok(Self { mean, basis })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        pca_project(self, v)
    }

    /// `mean + basisᵀ·coords`.
    pub fn reconstruct(&self, coords: &[f64]) -> Result<Vec<f64>> {
        if coords.len() != self.rank() {
            return Err(Error::mismatch(
                self.rank().to_string(),
                coords.len().to_string(),
            ));
        }
        let mut out = self.mean.clone();
        for (row, c) in self.basis.iter().zip(coords) {
            out.iter_mut().zip(row).for_each(|(o, b)| *o += c * b);
        }
        Ok(out)
    }
}

/// Top-`r` principal directions of `samples`, by descending variance.
///
/// Eigendecomposes whichever is smaller of the `d×d` covariance and the
/// `n×n` Gram matrix of the centered samples. Each direction is signed so
/// its largest-magnitude entry is positive. Directions with zero variance
/// (rank-deficient data) are completed with an orthonormal basis.
pub fn pca_fit(samples: &[Vec<f64>], r: usize) -> Result<PcaModel> {
    let n = samples.len();
    let max = n.saturating_sub(1).min(samples.first().map_or(0, Vec::len));
    if r > max {
        return Err(Error::RankTooHigh { requested: r, max });
    }
    if r == 0 {
        return Err(Error::InvalidParam("PCA rank must be at least 1".into()));
    }
    let d = samples[0].len();
    if let Some(s) = samples.iter().find(|s| s.len() != d) {
        return Err(Error::mismatch(d.to_string(), s.len().to_string()));
    }
    let mut mean = vec![0.0; d];
    for s in samples {
        mean.iter_mut().zip(s).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let x = DMatrix::from_fn(n, d, |i, j| samples[i][j] - mean[j]);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(r);
    if d <= n {
        let cov = x.transpose() * &x / (n - 1) as f64;
        for (_, v) in sorted_eigen(cov).into_iter().take(r) {
            basis.push(v);
        }
    } else {
        let gram = &x * x.transpose() / (n - 1) as f64;
        let scale_tol = 1e-12
            * gram
                .diagonal()
                .iter()
                .cloned()
                .fold(0.0, f64::max)
                .max(1e-300);
        for (lambda, u) in sorted_eigen(gram).into_iter().take(r) {
            if lambda <= scale_tol {
                break;
            }
            let u = nalgebra::DVector::from_vec(u);
            let mut v: Vec<f64> = (x.transpose() * u).iter().cloned().collect();
            normalize(&mut v);
            basis.push(v);
        }
    }
    // re-orthogonalize (guards round-off) and complete rank-deficient bases
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(r);
    for v in basis {
        if let Some(v) = orthogonalize(v, &ortho) {
            ortho.push(v);
        }
    }
    let mut e = 0;
    while ortho.len() < r && e < d {
        let mut unit = vec![0.0; d];
        unit[e] = 1.0;
        if let Some(v) = orthogonalize(unit, &ortho) {
            ortho.push(v);
        }
        e += 1;
    }
    for v in &mut ortho {
        fix_sign(v);
    }
    PcaModel::new(mean, ortho)
}

pub fn pca_project(model: &PcaModel, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != model.dim() {
        return Err(Error::mismatch(
            model.dim().to_string(),
            v.len().to_string(),
        ));
    }
    Ok(model
        .basis
        .iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .zip(&model.mean)
                .map(|((b, x), m)| b * (x - m))
                .sum()
        })
        .collect())
}

/// Eigenpairs by descending eigenvalue.
fn sorted_eigen(m: DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, Vec<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, eig.eigenvectors.column(i).iter().cloned().collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Gram-Schmidt step (applied twice); `None` when `v` lies in the span.
fn orthogonalize(mut v: Vec<f64>, against: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..2 {
        for u in against {
            let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(x, b)| *x -= dot * b);
        }
    }
    (normalize(&mut v) > 1e-8).then_some(v)
}

fn fix_sign(v: &mut [f64]) {
    let pivot = v
        .iter()
        .cloned()
        .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
