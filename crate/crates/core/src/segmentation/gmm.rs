//! Full-covariance Gaussian mixtures in three dimensions, fitted by EM.
//!
//! Initialization is k-means++ seeding followed by one hard assignment of
//! every point to its nearest seed. A constant `reg_covar` is added to every
//! covariance diagonal after each M-step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SegmentError;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Relative log-likelihood change below which EM stops.
    pub tol: f64,
    pub reg_covar: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iter: 200,
            tol: 1e-6,
            reg_covar: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<[f64; 3]>,
    pub covariances: Vec<[[f64; 3]; 3]>,
    pub log_likelihood: f64,
    /// Log-likelihood after every E-step, first to last.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub n_points: usize,
}

/// Lower Cholesky factor of a symmetric positive-definite 3x3 matrix.
#[derive(Debug, Clone, Copy)]
struct Cholesky {
    l: [[f64; 3]; 3],
    log_det: f64,
}

impl Cholesky {
    fn new(a: &[[f64; 3]; 3]) -> Option<Self> {
        let l00 = a[0][0].sqrt();
        let l10 = a[1][0] / l00;
        let l20 = a[2][0] / l00;
        let d11 = a[1][1] - l10 * l10;
        let l11 = d11.sqrt();
        let l21 = (a[2][1] - l20 * l10) / l11;
        let d22 = a[2][2] - l20 * l20 - l21 * l21;
        let l22 = d22.sqrt();
        if !(a[0][0] > 0.0 && d11 > 0.0 && d22 > 0.0) {
            return None;
        }
        Some(Cholesky {
            l: [[l00, 0.0, 0.0], [l10, l11, 0.0], [l20, l21, l22]],
            log_det: 2.0 * (l00.ln() + l11.ln() + l22.ln()),
        })
    }

    /// Squared Mahalanobis norm of `d`.
    #[inline]
    fn mahalanobis_sq(&self, d: [f64; 3]) -> f64 {
        let l = &self.l;
        let y0 = d[0] / l[0][0];
        let y1 = (d[1] - l[1][0] * y0) / l[1][1];
        let y2 = (d[2] - l[2][0] * y0 - l[2][1] * y1) / l[2][2];
        y0 * y0 + y1 * y1 + y2 * y2
    }

    #[inline]
    fn log_density(&self, mean: &[f64; 3], p: &[f64; 3]) -> f64 {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        -0.5 * (3.0 * LN_2PI + self.log_det + self.mahalanobis_sq(d))
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn dist_sq(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

impl GmmModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// Free parameters: means, symmetric covariances and `k - 1` weights.
    pub fn n_parameters(&self) -> usize {
        let k = self.k();
        k * 3 + k * 6 + (k - 1)
    }

    /// Bayesian information criterion; lower is better.
    pub fn bic(&self) -> f64 {
        -2.0 * self.log_likelihood + self.n_parameters() as f64 * (self.n_points as f64).ln()
    }

    fn factors(&self) -> Vec<Cholesky> {
        self.covariances
            .iter()
            .map(|c| Cholesky::new(c).expect("fitted covariances are positive definite"))
            .collect()
    }

    /// Component with the highest responsibility for each point, lowest
    /// index on ties.
    pub fn assign(&self, points: &[[f64; 3]]) -> Vec<usize> {
        let chol = self.factors();
        let log_w: Vec<f64> = self.weights.iter().map(|w| w.ln()).collect();
        points
            .iter()
            .map(|p| {
                let mut best = 0;
                let mut best_v = f64::NEG_INFINITY;
                for j in 0..self.k() {
                    let v = log_w[j] + chol[j].log_density(&self.means[j], p);
                    if v > best_v {
                        best_v = v;
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    /// Total log-likelihood of `points` under the mixture.
    pub fn score(&self, points: &[[f64; 3]]) -> f64 {
        let chol = self.factors();
        let mut buf = vec![0.0; self.k()];
        points
            .iter()
            .map(|p| {
                for j in 0..self.k() {
                    buf[j] = self.weights[j].ln() + chol[j].log_density(&self.means[j], p);
                }
                log_sum_exp(&buf)
            })
            .sum()
    }
}

fn kmeans_pp(
    points: &[[f64; 3]],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<[f64; 3]>, SegmentError> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist_sq(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return Err(SegmentError::TooFewPoints { k, n });
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = n - 1;
        for (i, &d) in d2.iter().enumerate() {
            acc += d;
            if acc > target && d > 0.0 {
                pick = i;
                break;
            }
        }
        let c = points[pick];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist_sq(p, &c));
        }
        centers.push(c);
    }
    Ok(centers)
}

/// Mixture weights, means and covariances.
type Params = (Vec<f64>, Vec<[f64; 3]>, Vec<[[f64; 3]; 3]>);

/// M-step: weights, means and regularized covariances from responsibilities
/// stored row-major as `resp[i * k + j]`.
fn m_step(points: &[[f64; 3]], resp: &[f64], k: usize, reg: f64) -> Params {
    let n = points.len();
    let mut nk = vec![10.0 * f64::EPSILON; k];
    let mut means = vec![[0.0; 3]; k];
    for (i, p) in points.iter().enumerate() {
        for j in 0..k {
            let r = resp[i * k + j];
            nk[j] += r;
            for a in 0..3 {
                means[j][a] += r * p[a];
            }
        }
    }
    for j in 0..k {
        for a in 0..3 {
            means[j][a] /= nk[j];
        }
    }
    let mut covs = vec![[[0.0; 3]; 3]; k];
    for (i, p) in points.iter().enumerate() {
        for j in 0..k {
            let r = resp[i * k + j];
            if r == 0.0 {
                continue;
            }
            let d = [p[0] - means[j][0], p[1] - means[j][1], p[2] - means[j][2]];
            for a in 0..3 {
                for b in 0..=a {
                    covs[j][a][b] += r * d[a] * d[b];
                }
            }
        }
    }
    for j in 0..k {
        for a in 0..3 {
            for b in 0..=a {
                covs[j][a][b] /= nk[j];
                covs[j][b][a] = covs[j][a][b];
            }
            covs[j][a][a] += reg;
        }
    }
    let weights = nk.iter().map(|v| v / n as f64).collect();
    (weights, means, covs)
}

/// Fit a `k`-component mixture to `points` with EM.
///
/// Returns the model from the last E-step; `converged` is false when the
/// iteration cap was reached first.
pub fn fit(
    points: &[[f64; 3]],
    k: usize,
    cfg: &EmConfig,
    seed: u64,
) -> Result<GmmModel, SegmentError> {
    let n = points.len();
    if k == 0 || n < k {
        return Err(SegmentError::TooFewPoints { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = kmeans_pp(points, k, &mut rng)?;

    let mut resp = vec![0.0; n * k];
    for (i, p) in points.iter().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in centers.iter().enumerate() {
            let d = dist_sq(p, c);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        resp[i * k + best] = 1.0;
    }
    let (mut weights, mut means, mut covs) = m_step(points, &resp, k, cfg.reg_covar);

    let mut trace = Vec::new();
    let mut converged = false;
    let mut log_prob = vec![0.0; k];
    for _ in 0..cfg.max_iter {
        let chol: Vec<Cholesky> = covs
            .iter()
            .map(|c| {
                Cholesky::new(c).ok_or_else(|| {
                    SegmentError::InvalidParameter("covariance lost positive definiteness".into())
                })
            })
            .collect::<Result<_, _>>()?;
        let log_w: Vec<f64> = weights.iter().map(|w: &f64| w.ln()).collect();
        let mut ll = 0.0;
        for (i, p) in points.iter().enumerate() {
            for j in 0..k {
                log_prob[j] = log_w[j] + chol[j].log_density(&means[j], p);
            }
            let norm = log_sum_exp(&log_prob);
            ll += norm;
            for j in 0..k {
                resp[i * k + j] = (log_prob[j] - norm).exp();
            }
        }
        let prev = trace.last().copied();
        trace.push(ll);
        if let Some(prev) = prev {
            if (ll - prev).abs() <= cfg.tol * prev.abs() {
                converged = true;
                break;
            }
        }
        (weights, means, covs) = m_step(points, &resp, k, cfg.reg_covar);
    }

    // Parameters of the last E-step are the ones the final likelihood belongs to,
    // unless the loop ended on an M-step (iteration cap), in which case score them.
    let log_likelihood = if converged {
        *trace.last().unwrap()
    } else {
        let model = GmmModel {
            weights: weights.clone(),
            means: means.clone(),
            covariances: covs.clone(),
            log_likelihood: 0.0,
            log_likelihood_trace: Vec::new(),
            iterations: 0,
            converged,
            n_points: n,
        };
        let ll = model.score(points);
        trace.push(ll);
        ll
    };
    Ok(GmmModel {
        weights,
        means,
        covariances: covs,
        log_likelihood,
        iterations: trace.len(),
        log_likelihood_trace: trace,
        converged,
        n_points: n,
    })
}
