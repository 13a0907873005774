//! RGB Gaussian mixture color models fitted by hard EM.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::rng::XorShift64;

/// Ridge added to every covariance, in squared `[0,255]` color units.
pub const COV_RIDGE: f64 = 1e-3;
/// Lower bound on mixture likelihoods so their logs stay finite.
pub const LIKELIHOOD_FLOOR: f64 = 1e-30;
pub const DEFAULT_COMPONENTS: usize = 5;
pub const MAX_ROUNDS: usize = 50;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: [f64; 3],
    pub covariance: [[f64; 3]; 3],
    inverse: Matrix3<f64>,
    /// `ln weight - 0.5 * (ln det + 3 ln 2pi)`
    log_norm: f64,
}

impl GmmComponent {
    pub fn new(weight: f64, mean: [f64; 3], covariance: [[f64; 3]; 3]) -> Result<Self> {
        let cov = Matrix3::from_fn(|r, c| covariance[r][c]);
        let chol = cov.cholesky().ok_or_else(|| {
            Error::InvalidParam("component covariance is not positive definite".into())
        })?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self {
            weight,
            mean,
            covariance,
            inverse: chol.inverse(),
            log_norm: weight.ln() - 0.5 * (log_det + 3.0 * LN_2PI),
        })
    }

    fn mahalanobis(&self, x: &[f64; 3]) -> f64 {
        let d = Vector3::new(
            x[0] - self.mean[0],
            x[1] - self.mean[1],
            x[2] - self.mean[2],
        );
        (d.transpose() * self.inverse * d)[(0, 0)]
    }

    /// `ln(weight * N(x))`
    fn log_weighted_density(&self, x: &[f64; 3]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis(x)
    }

    /// Per-point share of the ridge penalty, `0.5 * ridge * tr(inverse)`.
    fn ridge_penalty(&self) -> f64 {
        0.5 * COV_RIDGE * self.inverse.trace()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorGmm {
    components: Vec<GmmComponent>,
}

/// Result of a fit together with the objective after every refit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub gmm: ColorGmm,
    /// Penalized negative complete-data log-likelihood after the initial
    /// refit and after each hard-EM round.
    pub objective: Vec<f64>,
    pub rounds: usize,
}

impl ColorGmm {
    pub fn from_components(components: Vec<GmmComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyInput("mixture components"));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if components.iter().any(|c| c.weight < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam(format!(
                "mixture weights must be nonnegative and sum to 1, got {total}"
            )));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Mixture density at `pixel`, floored at [`LIKELIHOOD_FLOOR`].
    pub fn likelihood(&self, pixel: &[f64; 3]) -> f64 {
        let p: f64 = self
            .components
            .iter()
            .map(|c| c.log_weighted_density(pixel).exp())
            .sum();
        if p.is_finite() {
            p.max(LIKELIHOOD_FLOOR)
        } else {
            LIKELIHOOD_FLOOR
        }
    }

    /// `-ln likelihood(pixel)`, finite and nonnegative-safe for cost use.
    pub fn neg_log_likelihood(&self, pixel: &[f64; 3]) -> f64 {
        -self.likelihood(pixel).ln()
    }

    /// Penalized hard-EM cost of putting `x` in component `k`.
    fn assignment_cost(&self, k: usize, x: &[f64; 3]) -> f64 {
        let c = &self.components[k];
        -c.log_weighted_density(x) + c.ridge_penalty()
    }

    fn best_component(&self, x: &[f64; 3]) -> usize {
        let mut best = 0;
        let mut best_cost = f64::INFINITY;
        for k in 0..self.components.len() {
            let cost = self.assignment_cost(k, x);
            if cost < best_cost {
                best = k;
                best_cost = cost;
            }
        }
        best
    }
}

/// Mixture density of a single pixel.
pub fn likelihood(gmm: &ColorGmm, pixel: &[f64; 3]) -> f64 {
    gmm.likelihood(pixel)
}

pub fn fit(pixels: &[[f64; 3]], k: usize, seed: u64) -> Result<ColorGmm> {
    fit_with_report(pixels, k, seed).map(|r| r.gmm)
}

/// Hard-EM fit: seeded k-means++ centers, nearest-center initial
/// assignment, then alternate max-posterior assignment and parameter refit
/// until assignments stop changing or [`MAX_ROUNDS`] rounds pass.
///
/// Each covariance is the sample covariance plus `COV_RIDGE * I`. That
/// ridge is the exact minimizer of the negative log-likelihood plus a
/// per-point penalty `0.5 * ridge * tr(cov^-1)`, and the assignment step
/// includes the same penalty, so the tracked objective never increases.
/// Components left without pixels are dropped.
pub fn fit_with_report(pixels: &[[f64; 3]], k: usize, seed: u64) -> Result<FitReport> {
    if pixels.is_empty() {
        return Err(Error::EmptyInput("pixels"));
    }
    if k == 0 {
        return Err(Error::InvalidParam(
            "mixture size must be at least 1".into(),
        ));
    }
    let centers = kmeans_pp(pixels, k, seed);
    let mut assign: Vec<usize> = pixels
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = dist2(p, center);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            best
        })
        .collect();

    let mut gmm = refit(pixels, &mut assign, centers.len());
    let mut objective = vec![penalized_objective(&gmm, pixels, &assign)];
    let mut rounds = 0;
    while rounds < MAX_ROUNDS {
        rounds += 1;
        let mut changed = false;
        for (a, p) in assign.iter_mut().zip(pixels) {
            let best = gmm.best_component(p);
            // keep the current component on exact ties
            if best != *a && gmm.assignment_cost(best, p) < gmm.assignment_cost(*a, p) {
                *a = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let n_components = gmm.len();
        gmm = refit(pixels, &mut assign, n_components);
        objective.push(penalized_objective(&gmm, pixels, &assign));
    }
    Ok(FitReport {
        gmm,
        objective,
        rounds,
    })
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|c| (a[c] - b[c]).powi(2)).sum()
}

fn kmeans_pp(pixels: &[[f64; 3]], k: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = XorShift64::new(seed);
    let mut centers = vec![pixels[rng.range(0, pixels.len() - 1)]];
    let mut d2: Vec<f64> = pixels.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.next_f64() * total;
        let mut pick = pixels.len() - 1;
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        if d2[pick] <= 0.0 {
            // rounding walked off the end; take the farthest point instead
            pick = d2
                .iter()
                .enumerate()
                .fold(0, |best, (i, &d)| if d > d2[best] { i } else { best });
        }
        let c = pixels[pick];
        centers.push(c);
        for (d, p) in d2.iter_mut().zip(pixels) {
            *d = d.min(dist2(p, &c));
        }
    }
    centers
}

/// Refits weights, means and ridge covariances from the assignment.
/// Empty components are removed and the assignment relabeled.
fn refit(pixels: &[[f64; 3]], assign: &mut [usize], n_components: usize) -> ColorGmm {
    let mut count = vec![0usize; n_components];
    let mut sum = vec![[0.0f64; 3]; n_components];
    for (&a, p) in assign.iter().zip(pixels) {
        count[a] += 1;
        for c in 0..3 {
            sum[a][c] += p[c];
        }
    }
    let mut remap = vec![usize::MAX; n_components];
    let mut kept = Vec::new();
    for k in 0..n_components {
        if count[k] > 0 {
            remap[k] = kept.len();
            kept.push(k);
        }
    }
    let means: Vec<[f64; 3]> = kept
        .iter()
        .map(|&k| std::array::from_fn(|c| sum[k][c] / count[k] as f64))
        .collect();
    let mut scatter = vec![[[0.0f64; 3]; 3]; kept.len()];
    for a in assign.iter_mut() {
        *a = remap[*a];
    }
    for (&a, p) in assign.iter().zip(pixels) {
        let d: [f64; 3] = std::array::from_fn(|c| p[c] - means[a][c]);
        for r in 0..3 {
            for c in 0..3 {
                scatter[a][r][c] += d[r] * d[c];
            }
        }
    }
    let n = pixels.len() as f64;
    let components = kept
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let m = count[k] as f64;
            let mut cov = [[0.0; 3]; 3];
            for r in 0..3 {
                for c in 0..3 {
                    cov[r][c] = scatter[j][r][c] / m;
                }
                cov[r][r] += COV_RIDGE;
            }
            GmmComponent::new(m / n, means[j], cov)
                .expect("ridge keeps covariance positive definite")
        })
        .collect();
    ColorGmm { components }
}

fn penalized_objective(gmm: &ColorGmm, pixels: &[[f64; 3]], assign: &[usize]) -> f64 {
    assign
        .iter()
        .zip(pixels)
        .map(|(&a, p)| gmm.assignment_cost(a, p))
        .sum()
}
