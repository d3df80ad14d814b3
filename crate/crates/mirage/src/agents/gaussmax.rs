//! Deterministic estimators for the expected maximum of a Gaussian vector
//! and for its argmax distribution.
//!
//! Diagonal covariances use one-dimensional quadrature:
//!
//! * `E[max X] = L + integral over [L, U] of (1 - prod_a cdf_a(x)) dx`,
//!   the survival-function form, evaluated by composite Gauss-Legendre with
//!   cutoffs far enough out that the truncated tails are below 1e-30;
//! * `P(X_a = max) = integral of pdf_a(x) prod_{b != a} cdf_b(x) dx`,
//!   evaluated by Gauss-Hermite in the standardized variable of arm `a`.
//!
//! General covariances fall back to a rank-one-lattice quasi-Monte Carlo rule
//! with 2^14 points pushed through the Cholesky factor. Both paths are pure
//! functions of their inputs: no sampling noise, same result every call.
//!
//! The `Oracle` quality tier replaces everything with plain Monte Carlo at
//! ten million draws from a fixed-seed generator. It is slow and exists so
//! tests can cross-check the fast paths against an independent route.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::ContinuousCDF;
use statrs::function::erf::erfc;

/// Accuracy/cost tier for the Gaussian max estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorQuality {
    /// Quadrature (diagonal) or 2^14-point QMC (general). Used inside
    /// simulation loops.
    Fast,
    /// Plain Monte Carlo with 1e7 draws. Test oracle only.
    Oracle,
}

const QMC_POINTS: usize = 1 << 14;
const MC_ORACLE_DRAWS: usize = 10_000_000;
const MC_ORACLE_SEED: u64 = 0x6d61_7267_6175_7373;

/// Tail cutoff in standard deviations for the survival integral.
const TAIL_SDS: f64 = 12.0;
const GL_PANELS: usize = 16;
const GL_NODES: usize = 16;
const GH_NODES: usize = 64;

/// Degenerate arms with standard deviation below this are treated as point
/// masses.
const SD_FLOOR: f64 = 1e-160;

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Nodes and weights of an n-point Gauss rule, from the symmetric
/// tridiagonal Jacobi matrix (Golub-Welsch).
fn golub_welsch(offdiag: &[f64], weight_mass: f64) -> (Vec<f64>, Vec<f64>) {
    let n = offdiag.len() + 1;
    let mut jacobi = DMatrix::zeros(n, n);
    for (k, &b) in offdiag.iter().enumerate() {
        jacobi[(k, k + 1)] = b;
        jacobi[(k + 1, k)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jacobi);
    let nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let weights: Vec<f64> = (0..n)
        .map(|i| weight_mass * eig.eigenvectors[(0, i)].powi(2))
        .collect();
    (nodes, weights)
}

type Rule = Arc<(Vec<f64>, Vec<f64>)>;

fn cached_rule(
    cache: &'static OnceLock<Mutex<HashMap<usize, Rule>>>,
    n: usize,
    build: impl FnOnce() -> (Vec<f64>, Vec<f64>),
) -> Rule {
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().unwrap();
    Arc::clone(guard.entry(n).or_insert_with(|| Arc::new(build())))
}

fn gauss_legendre(n: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    cached_rule(&CACHE, n, || {
        let offdiag: Vec<f64> = (1..n)
            .map(|k| {
                let k = k as f64;
                k / (4.0 * k * k - 1.0).sqrt()
            })
            .collect();
        golub_welsch(&offdiag, 2.0)
    })
}

fn gauss_hermite(n: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    cached_rule(&CACHE, n, || {
        let offdiag: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
        golub_welsch(&offdiag, std::f64::consts::PI.sqrt())
    })
}

/// Standard normal QMC point set for a given dimension, flattened row-major.
/// Built from a rank-one lattice with the generalized golden-ratio generator
/// and the normal quantile transform; cached per dimension.
fn qmc_normal_points(dim: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(found) = cache.lock().unwrap().get(&dim) {
        return Arc::clone(found);
    }

    // phi_d is the unique positive root of x^(d+1) = x + 1.
    let mut phi = 1.5f64;
    for _ in 0..64 {
        let p = phi.powi(dim as i32 + 1) - phi - 1.0;
        let dp = (dim as f64 + 1.0) * phi.powi(dim as i32) - 1.0;
        phi -= p / dp;
    }
    let alphas: Vec<f64> = (1..=dim).map(|j| (1.0 / phi.powi(j as i32)).fract()).collect();

    let std_normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    let mut pts = Vec::with_capacity(QMC_POINTS * dim);
    for i in 0..QMC_POINTS {
        for &alpha in &alphas {
            let u = (0.5 + (i + 1) as f64 * alpha).fract();
            let u = u.clamp(1e-15, 1.0 - 1e-15);
            pts.push(std_normal.inverse_cdf(u));
        }
    }
    let arc = Arc::new(pts);
    cache.lock().unwrap().insert(dim, Arc::clone(&arc));
    arc
}

fn is_diagonal(cov: &DMatrix<f64>) -> bool {
    let n = cov.nrows();
    let scale = (0..n).map(|i| cov[(i, i)].abs()).fold(0.0f64, f64::max);
    for i in 0..n {
        for j in 0..n {
            if i != j && cov[(i, j)].abs() > 1e-13 * scale {
                return false;
            }
        }
    }
    true
}

/// Lower-triangular square root of `cov`, via Cholesky with a symmetric
/// eigendecomposition fallback for borderline matrices.
fn matrix_sqrt(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(chol) = cov.clone().cholesky() {
        return chol.l().into();
    }
    let eig = nalgebra::SymmetricEigen::new(cov.clone());
    let sq = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&sq)
}

fn survival_integrand(x: f64, means: &[f64], sds: &[f64]) -> f64 {
    let mut product = 1.0;
    for (&m, &s) in means.iter().zip(sds.iter()) {
        let factor = if s < SD_FLOOR {
            if x >= m {
                1.0
            } else {
                0.0
            }
        } else {
            normal_cdf((x - m) / s)
        };
        product *= factor;
        if product == 0.0 {
            break;
        }
    }
    1.0 - product
}

fn expected_max_diagonal(means: &[f64], sds: &[f64]) -> f64 {
    let lower = means
        .iter()
        .zip(sds.iter())
        .map(|(&m, &s)| m - TAIL_SDS * s)
        .fold(f64::NEG_INFINITY, f64::max);
    let upper = means
        .iter()
        .zip(sds.iter())
        .map(|(&m, &s)| m + TAIL_SDS * s)
        .fold(f64::NEG_INFINITY, f64::max);
    if upper <= lower {
        return lower;
    }
    let rule = gauss_legendre(GL_NODES);
    let (nodes, weights) = (&rule.0, &rule.1);
    let width = (upper - lower) / GL_PANELS as f64;
    let mut integral = 0.0;
    for panel in 0..GL_PANELS {
        let a = lower + panel as f64 * width;
        let mid = a + width / 2.0;
        let half = width / 2.0;
        let mut acc = 0.0;
        for (&x, &w) in nodes.iter().zip(weights.iter()) {
            acc += w * survival_integrand(mid + half * x, means, sds);
        }
        integral += acc * half;
    }
    lower + integral
}

fn argmax_dist_diagonal(means: &[f64], sds: &[f64]) -> Vec<f64> {
    let n = means.len();
    let rule = gauss_hermite(GH_NODES);
    let (nodes, weights) = (&rule.0, &rule.1);
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut probs = vec![0.0; n];
    for a in 0..n {
        if sds[a] < SD_FLOOR {
            // Point mass at means[a]: probability it beats every other arm.
            let mut p = 1.0;
            for b in 0..n {
                if b == a {
                    continue;
                }
                p *= if sds[b] < SD_FLOOR {
                    // Ties between point masses are split evenly.
                    match means[a].partial_cmp(&means[b]).unwrap() {
                        std::cmp::Ordering::Greater => 1.0,
                        std::cmp::Ordering::Equal => 0.5,
                        std::cmp::Ordering::Less => 0.0,
                    }
                } else {
                    normal_cdf((means[a] - means[b]) / sds[b])
                };
            }
            probs[a] = p;
            continue;
        }
        let mut acc = 0.0;
        for (&x, &w) in nodes.iter().zip(weights.iter()) {
            let value = means[a] + sds[a] * sqrt2 * x;
            let mut inner = 1.0;
            for b in 0..n {
                if b == a {
                    continue;
                }
                inner *= if sds[b] < SD_FLOOR {
                    if value >= means[b] {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    normal_cdf((value - means[b]) / sds[b])
                };
                if inner == 0.0 {
                    break;
                }
            }
            acc += w * inner;
        }
        probs[a] = acc * inv_sqrt_pi;
    }
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        for p in &mut probs {
            *p /= total;
        }
    } else {
        probs.fill(1.0 / n as f64);
    }
    probs
}

fn qmc_pass(mean: &DVector<f64>, cov: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let n = mean.len();
    let root = matrix_sqrt(cov);
    let pts = qmc_normal_points(n);
    let mut sum_max = 0.0;
    let mut counts = vec![0.0f64; n];
    let mut x = vec![0.0f64; n];
    for i in 0..QMC_POINTS {
        let z = &pts[i * n..(i + 1) * n];
        for a in 0..n {
            let mut acc = mean[a];
            for b in 0..=a {
                acc += root[(a, b)] * z[b];
            }
            x[a] = acc;
        }
        let mut best = 0usize;
        for a in 1..n {
            if x[a] > x[best] {
                best = a;
            }
        }
        sum_max += x[best];
        counts[best] += 1.0;
    }
    let dist: Vec<f64> = counts.iter().map(|c| c / QMC_POINTS as f64).collect();
    (sum_max / QMC_POINTS as f64, dist)
}

fn mc_pass(mean: &DVector<f64>, cov: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let n = mean.len();
    let root = matrix_sqrt(cov);
    let mut rng = ChaCha8Rng::seed_from_u64(MC_ORACLE_SEED);
    let mut sum_max = 0.0;
    let mut counts = vec![0.0f64; n];
    let mut z = vec![0.0f64; n];
    let mut x = vec![0.0f64; n];
    for _ in 0..MC_ORACLE_DRAWS {
        for zi in &mut z {
            *zi = StandardNormal.sample(&mut rng);
        }
        for a in 0..n {
            let mut acc = mean[a];
            for b in 0..=a {
                acc += root[(a, b)] * z[b];
            }
            x[a] = acc;
        }
        let mut best = 0usize;
        for a in 1..n {
            if x[a] > x[best] {
                best = a;
            }
        }
        sum_max += x[best];
        counts[best] += 1.0;
    }
    let dist: Vec<f64> = counts.iter().map(|c| c / MC_ORACLE_DRAWS as f64).collect();
    (sum_max / MC_ORACLE_DRAWS as f64, dist)
}

/// `E[max_a X_a]` for `X ~ N(mean, cov)`. Deterministic given the quality
/// setting; exact for a single arm.
pub fn expected_max_gaussian(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    quality: EstimatorQuality,
) -> f64 {
    let n = mean.len();
    assert_eq!(cov.nrows(), n, "mean/covariance dimension mismatch");
    if n == 1 {
        return mean[0];
    }
    match quality {
        EstimatorQuality::Fast => {
            if is_diagonal(cov) {
                let means: Vec<f64> = mean.iter().copied().collect();
                let sds: Vec<f64> = (0..n).map(|a| cov[(a, a)].max(0.0).sqrt()).collect();
                expected_max_diagonal(&means, &sds)
            } else {
                qmc_pass(mean, cov).0
            }
        }
        EstimatorQuality::Oracle => mc_pass(mean, cov).0,
    }
}

/// `P(X_a = max_b X_b)` for `X ~ N(mean, cov)`, one probability per arm.
pub fn argmax_probabilities(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    quality: EstimatorQuality,
) -> Vec<f64> {
    let n = mean.len();
    assert_eq!(cov.nrows(), n, "mean/covariance dimension mismatch");
    if n == 1 {
        return vec![1.0];
    }
    match quality {
        EstimatorQuality::Fast => {
            if is_diagonal(cov) {
                let means: Vec<f64> = mean.iter().copied().collect();
                let sds: Vec<f64> = (0..n).map(|a| cov[(a, a)].max(0.0).sqrt()).collect();
                argmax_dist_diagonal(&means, &sds)
            } else {
                let (_, mut dist) = qmc_pass(mean, cov);
                let total: f64 = dist.iter().sum();
                for p in &mut dist {
                    *p /= total;
                }
                dist
            }
        }
        EstimatorQuality::Oracle => mc_pass(mean, cov).1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent route for diagonal E[max]: per-arm Gauss-Hermite sums of
    /// E[X_a; X_a = max].
    fn expected_max_gh_oracle(means: &[f64], sds: &[f64]) -> f64 {
        let rule = gauss_hermite(96);
    let (nodes, weights) = (&rule.0, &rule.1);
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut total = 0.0;
        for a in 0..means.len() {
            let mut acc = 0.0;
            for (&x, &w) in nodes.iter().zip(weights.iter()) {
                let value = means[a] + sds[a] * sqrt2 * x;
                let mut inner = value;
                for b in 0..means.len() {
                    if b != a {
                        inner *= normal_cdf((value - means[b]) / sds[b]);
                    }
                }
                acc += w * inner;
            }
            total += acc * inv_sqrt_pi;
        }
        total
    }

    #[test]
    fn single_arm_is_exact() {
        let mean = DVector::from_vec(vec![0.37]);
        let cov = DMatrix::from_element(1, 1, 5.0);
        assert_eq!(
            expected_max_gaussian(&mean, &cov, EstimatorQuality::Fast),
            0.37
        );
        assert_eq!(argmax_probabilities(&mean, &cov, EstimatorQuality::Fast), vec![1.0]);
    }

    #[test]
    fn two_iid_standard_normals() {
        // Closed form 1/sqrt(pi); also cross-checked against the MC oracle.
        let mean = DVector::zeros(2);
        let cov = DMatrix::identity(2, 2);
        let fast = expected_max_gaussian(&mean, &cov, EstimatorQuality::Fast);
        let truth = 1.0 / std::f64::consts::PI.sqrt();
        assert_abs_diff_eq!(fast, truth, epsilon = 1e-9);

        let oracle = expected_max_gaussian(&mean, &cov, EstimatorQuality::Oracle);
        assert_abs_diff_eq!(fast, oracle, epsilon = 1e-3);
    }

    #[test]
    fn dominated_arm_vanishes() {
        let mean = DVector::from_vec(vec![10.0, 0.0]);
        let cov = DMatrix::identity(2, 2);
        let fast = expected_max_gaussian(&mean, &cov, EstimatorQuality::Fast);
        assert_abs_diff_eq!(fast, 10.0, epsilon = 1e-4);
    }

    #[test]
    fn survival_route_matches_per_arm_route() {
        // Dual-route consistency on assorted diagonal cases.
        let cases: &[(&[f64], &[f64])] = &[
            (&[0.0, 0.0], &[1.0, 1.0]),
            (&[0.3, -0.2, 1.1], &[0.5, 2.0, 0.1]),
            (&[1.0, 1.0, 1.0, 1.0], &[1.0, 0.5, 0.25, 2.0]),
            (&[-3.0, 4.0], &[0.2, 3.0]),
        ];
        for (means, sds) in cases {
            let survival = expected_max_diagonal(means, sds);
            let per_arm = expected_max_gh_oracle(means, sds);
            assert_abs_diff_eq!(survival, per_arm, epsilon = 1e-8);
        }
    }

    #[test]
    fn qmc_agrees_with_quadrature_on_diagonal() {
        // Run the general-covariance path on a diagonal matrix with a
        // negligible off-diagonal entry so it does not take the fast branch.
        let mean = DVector::from_vec(vec![0.2, -0.4, 0.9]);
        let mut cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.6, 2.0]));
        cov[(0, 1)] = 1e-6;
        cov[(1, 0)] = 1e-6;
        let qmc = expected_max_gaussian(&mean, &cov, EstimatorQuality::Fast);
        let means = [0.2, -0.4, 0.9];
        let sds = [1.0, 0.6f64.sqrt(), 2.0f64.sqrt()];
        let quad = expected_max_diagonal(&means, &sds);
        assert_abs_diff_eq!(qmc, quad, epsilon = 2e-3);
    }

    #[test]
    fn argmax_probabilities_are_sane() {
        let mean = DVector::from_vec(vec![0.0, 0.0]);
        let cov = DMatrix::identity(2, 2);
        let p = argmax_probabilities(&mean, &cov, EstimatorQuality::Fast);
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(p[0] + p[1], 1.0, epsilon = 1e-12);

        // Separated means with tiny variance concentrate on the leader.
        let mean = DVector::from_vec(vec![1.0, 0.0]);
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1e-18, 1e-18]));
        let p = argmax_probabilities(&mean, &cov, EstimatorQuality::Fast);
        assert!(p[0] > 1.0 - 1e-12);
    }

    #[test]
    fn correlated_argmax_matches_oracle() {
        let mean = DVector::from_vec(vec![0.3, 0.0]);
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.7, 0.7, 1.0]);
        let fast = argmax_probabilities(&mean, &cov, EstimatorQuality::Fast);
        let oracle = argmax_probabilities(&mean, &cov, EstimatorQuality::Oracle);
        assert_abs_diff_eq!(fast[0], oracle[0], epsilon = 3e-3);
        let fast_max = expected_max_gaussian(&mean, &cov, EstimatorQuality::Fast);
        let oracle_max = expected_max_gaussian(&mean, &cov, EstimatorQuality::Oracle);
        assert_abs_diff_eq!(fast_max, oracle_max, epsilon = 3e-3);
    }

    #[test]
    fn gauss_rules_integrate_polynomials() {
        // GL(16) is exact to degree 31 on [-1, 1].
        let rule = gauss_legendre(16);
    let (nodes, weights) = (&rule.0, &rule.1);
        let int_x2: f64 = nodes
            .iter()
            .zip(weights.iter())
            .map(|(&x, &w)| w * x * x)
            .sum();
        assert_abs_diff_eq!(int_x2, 2.0 / 3.0, epsilon = 1e-13);

        // GH with weight e^{-x^2}: integral of x^2 is sqrt(pi)/2.
        let rule = gauss_hermite(64);
    let (nodes, weights) = (&rule.0, &rule.1);
        let int_x2: f64 = nodes
            .iter()
            .zip(weights.iter())
            .map(|(&x, &w)| w * x * x)
            .sum();
        assert_abs_diff_eq!(int_x2, std::f64::consts::PI.sqrt() / 2.0, epsilon = 1e-11);
    }
}
