use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::XorShift64;

/// Linear classifier `score(v) = w·v + bias`, positive above zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    weights: Vec<f64>,
    bias: f64,
}

impl LinearSvm {
    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::CorruptData("non-finite SVM parameter".into()));
        }
        Ok(Self { weights, bias })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn score(&self, v: &[f64]) -> Result<f64> {
        svm_score(self, v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 30,
            seed: 0x5EED_C0DE,
        }
    }
}

pub fn svm_score(model: &LinearSvm, v: &[f64]) -> Result<f64> {
    if v.len() != model.dim() {
        return Err(Error::mismatch(
            model.dim().to_string(),
            v.len().to_string(),
        ));
    }
    Ok(model.weights.iter().zip(v).map(|(w, x)| w * x).sum::<f64>() + model.bias)
}

/// `λ/2·(‖w‖² + b²) + mean_i max(0, 1 − y_i·score(x_i))`.
pub fn svm_objective(
    model: &LinearSvm,
    features: &[Vec<f64>],
    labels: &[bool],
    lambda: f64,
) -> f64 {
    let reg = model.weights.iter().map(|w| w * w).sum::<f64>() + model.bias * model.bias;
    let hinge: f64 = features
        .iter()
        .zip(labels)
        .map(|(x, &pos)| {
            let y = if pos { 1.0 } else { -1.0 };
            let s: f64 = model.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + model.bias;
            (1.0 - y * s).max(0.0)
        })
        .sum();
    0.5 * lambda * reg + hinge / features.len().max(1) as f64
}

/// Pegasos stochastic subgradient descent on [`svm_objective`]. The bias is
/// treated as the weight of a constant unit feature. Each epoch visits the
/// samples in a fresh seeded order with step `1/(λt)`; the returned model is
/// the lowest-objective end-of-epoch iterate (the zero model included), so
/// training never ends worse than where it started.
pub fn svm_train(features: &[Vec<f64>], labels: &[bool], params: &SvmParams) -> Result<LinearSvm> {
    if features.len() != labels.len() {
        return Err(Error::mismatch(
            format!("{} labels", features.len()),
            labels.len().to_string(),
        ));
    }
    if features.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::SingleClass);
    }
    if !(params.lambda > 0.0 && params.lambda.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "lambda must be positive, got {}",
            params.lambda
        )));
    }
    let d = features[0].len();
    if let Some(f) = features.iter().find(|f| f.len() != d) {
        return Err(Error::mismatch(d.to_string(), f.len().to_string()));
    }

    let lambda = params.lambda;
    let mut rng = XorShift64::new(params.seed);
    let mut order: Vec<usize> = (0..features.len()).collect();
    // w stored as scale·v so the shrink step is O(1)
    let mut v = vec![0.0; d];
    let mut vb = 0.0;
    let mut scale = 1.0;
    let mut best = LinearSvm::zero(d);
    let mut best_obj = svm_objective(&best, features, labels, lambda);
    let mut t = 0usize;
    for _ in 0..params.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let y = if labels[i] { 1.0 } else { -1.0 };
            let x = &features[i];
            let margin = y * scale * (v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + vb);
            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                // first step: w collapses to zero before the hinge update
                v.iter_mut().for_each(|a| *a = 0.0);
                vb = 0.0;
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                let step = eta * y / scale;
                v.iter_mut().zip(x).for_each(|(a, b)| *a += step * b);
                vb += step;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|a| *a *= scale);
                vb *= scale;
                scale = 1.0;
            }
        }
        let model = LinearSvm::new(v.iter().map(|a| a * scale).collect(), vb * scale)?;
        let obj = svm_objective(&model, features, labels, lambda);
        if obj < best_obj {
            best_obj = obj;
            best = model;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::balanced_recall;

    fn toy() -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = XorShift64::new(9);
        let mut f = Vec::new();
        let mut l = Vec::new();
        for i in 0..60 {
            let pos = i % 3 == 0;
            let offset = if pos { 2.0 } else { -2.0 };
            f.push(vec![
                offset + rng.uniform(-0.9, 0.9),
                rng.uniform(-3.0, 3.0),
            ]);
            l.push(pos);
        }
        (f, l)
    }

    #[test]
    fn separable_toy_set() {
        let (f, l) = toy();
        let m = svm_train(
            &f,
            &l,
            &SvmParams {
                lambda: 1e-3,
                epochs: 50,
                seed: 1,
            },
        )
        .unwrap();
        let preds: Vec<(bool, bool)> = f
            .iter()
            .zip(&l)
            .map(|(x, &y)| (m.score(x).unwrap() > 0.0, y))
            .collect();
        assert_eq!(balanced_recall(&preds).unwrap(), 1.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let (f, l) = toy();
        let p = SvmParams {
            lambda: 1e-2,
            epochs: 5,
            seed: 4,
        };
        assert_eq!(
            svm_train(&f, &l, &p).unwrap(),
            svm_train(&f, &l, &p).unwrap()
        );
    }

    #[test]
    fn objective_never_above_zero_model() {
        for seed in 0..20 {
            let mut rng = XorShift64::new(seed);
            let f: Vec<Vec<f64>> = (0..30)
                .map(|_| (0..4).map(|_| rng.normal()).collect())
                .collect();
            let l: Vec<bool> = (0..30).map(|i| i % 2 == 0 || rng.chance(0.2)).collect();
            let p = SvmParams {
                lambda: 0.1,
                epochs: 3,
                seed,
            };
            let m = svm_train(&f, &l, &p).unwrap();
            let zero = svm_objective(&LinearSvm::zero(4), &f, &l, 0.1);
            assert!(svm_objective(&m, &f, &l, 0.1) <= zero);
        }
    }

    #[test]
    fn errors_and_zero_model() {
        let f = vec![vec![1.0], vec![2.0]];
        assert_eq!(
            svm_train(&f, &[true, true], &SvmParams::default())
                .unwrap_err()
                .code(),
            "SingleClass"
        );
        let m = LinearSvm::new(vec![0.0, 0.0], 0.75).unwrap();
        assert_eq!(m.score(&[123.0, -4.0]).unwrap(), 0.75);
        assert_eq!(m.score(&[1.0]).unwrap_err().code(), "DimensionMismatch");
    }
}
