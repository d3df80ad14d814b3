//! Posterior beliefs: the agent's Gaussian posterior over the imaginary mean
//! rewards, and the exact per-arm Beta posterior over the real means used for
//! validation.
//!
//! The Gaussian posterior after observing a history with action indicator sum
//! `L_t = sum_i e_{A_i} e_{A_i}^T` and reward vector sums is
//!
//! ```text
//! S_t = (S_0^{-1} + L_t / v)^{-1}
//! m_t = S_t (S_0^{-1} m_0 + sum_i e_{A_i} r_{i+1} / v)
//! ```
//!
//! with `v` the likelihood variance. [`GaussianBelief::updated`] applies one
//! observation incrementally (rank-one Sherman-Morrison on the covariance,
//! additive on the precision); [`batch_posterior`] evaluates the closed form
//! directly. The two paths are independent implementations and are checked
//! against each other in the tests.
//!
//! A property this crate leans on everywhere: the covariance recursion never
//! reads the reward, so posterior covariances depend on the history only
//! through the sequence of arms played.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution, StandardNormal};

use crate::envs::{EnvSpec, History};
use crate::error::{Error, Result};

/// Full precision/covariance re-solve interval: rank-one updates accumulate
/// round-off, so every this-many updates the covariance is recomputed from
/// the exactly-accumulated precision matrix.
const RESOLVE_INTERVAL: u32 = 256;

/// Gaussian posterior over the imaginary mean-reward vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    precision: DMatrix<f64>,
    noise_var: f64,
    updates_since_resolve: u32,
}

impl GaussianBelief {
    /// Belief at the prior, before any observation.
    pub fn from_prior(spec: &EnvSpec) -> Self {
        let cov = spec.sigma0().clone();
        let precision = cov
            .clone()
            .cholesky()
            .expect("spec validation guarantees a PD prior covariance")
            .inverse();
        Self {
            mean: spec.mu0().clone(),
            cov,
            precision: symmetrized(&precision),
            noise_var: spec.noise_var(),
            updates_since_resolve: 0,
        }
    }

    /// Builds a belief from explicit parameters, validating that `cov` is
    /// symmetric positive definite.
    pub fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>, noise_var: f64) -> Result<Self> {
        if mean.len() != cov.nrows() || cov.nrows() != cov.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "mean length {} vs covariance {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if noise_var <= 0.0 || !noise_var.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "noise_var must be positive, got {noise_var}"
            )));
        }
        let sym = symmetrized(&cov);
        let precision = sym
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("belief covariance".into()))?
            .inverse();
        Ok(Self {
            mean,
            cov: sym,
            precision: symmetrized(&precision),
            noise_var,
            updates_since_resolve: 0,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.mean.len()
    }
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }
    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }
    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Posterior after one observation of `reward` on `arm`.
    ///
    /// The precision gains `e_a e_a^T / v`; the covariance is updated by the
    /// matching rank-one Sherman-Morrison identity
    /// `S' = S - (S e_a)(S e_a)^T / (v + S_aa)`, and the mean is
    /// `m' = S' (P m + e_a r / v)` with `P` the pre-update precision.
    /// Everything is O(n^2) per step.
    pub fn updated(&self, arm: usize, reward: f64) -> Result<Self> {
        let n = self.num_arms();
        if arm >= n {
            return Err(Error::ArmOutOfRange { arm, num_arms: n });
        }
        if !reward.is_finite() {
            return Err(Error::NonFiniteReward(reward));
        }

        let v = self.noise_var;
        let s_col = self.cov.column(arm).clone_owned();
        let denom = v + s_col[arm];
        let mut cov = self.cov.clone();
        // cov -= s_col * s_col^T / denom, keeping exact symmetry.
        for i in 0..n {
            for j in 0..=i {
                let delta = s_col[i] * s_col[j] / denom;
                cov[(i, j)] -= delta;
                if i != j {
                    cov[(j, i)] = cov[(i, j)];
                }
            }
        }

        let mut precision = self.precision.clone();
        precision[(arm, arm)] += 1.0 / v;

        let mut info = &self.precision * &self.mean;
        info[arm] += reward / v;

        let mut updates_since_resolve = self.updates_since_resolve + 1;
        if updates_since_resolve >= RESOLVE_INTERVAL {
            // The precision is exact up to accumulation of 1/v terms;
            // re-derive the covariance from it to cap Sherman-Morrison drift.
            if let Some(chol) = precision.clone().cholesky() {
                cov = symmetrized(&chol.inverse());
            }
            updates_since_resolve = 0;
        }

        let mean = &cov * info;
        Ok(Self {
            mean,
            cov,
            precision,
            noise_var: v,
            updates_since_resolve,
        })
    }

    /// One draw of the imaginary mean vector from this posterior.
    ///
    /// Fails only when the covariance has drifted off the PD cone, which
    /// signals a corrupted belief.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let chol = self
            .cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("belief covariance (sampling)".into()))?;
        let z = DVector::from_fn(self.num_arms(), |_, _| rng.sample(StandardNormal));
        Ok(&self.mean + chol.l() * z)
    }

    /// `ln det` of the posterior covariance, via Cholesky.
    pub fn ln_det_cov(&self) -> f64 {
        let chol = self
            .cov
            .clone()
            .cholesky()
            .expect("belief covariance stays PD");
        2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>()
    }
}

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Posterior from a whole history in one direct solve, no incremental
/// shortcuts. Used as the algebraic cross-check for the rank-one path.
pub fn batch_posterior(spec: &EnvSpec, history: &History) -> Result<GaussianBelief> {
    let n = spec.num_arms();
    let v = spec.noise_var();
    let prior_precision = spec
        .sigma0()
        .clone()
        .cholesky()
        .expect("spec validation guarantees a PD prior covariance")
        .inverse();

    let mut precision = symmetrized(&prior_precision);
    let mut info = &precision * spec.mu0();
    for &(arm, reward) in history.steps() {
        spec.check_arm(arm)?;
        precision[(arm, arm)] += 1.0 / v;
        info[arm] += f64::from(reward) / v;
    }
    let cov = precision
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("batch posterior precision".into()))?
        .inverse();
    let cov = symmetrized(&cov);
    let mean = &cov * info;
    Ok(GaussianBelief {
        mean,
        cov,
        precision,
        noise_var: v,
        updates_since_resolve: 0,
    })
}

/// Prior covariance of the stacked vector (target, imaginary means) for the
/// perturbed learning target with perturbation variance `delta_sq`:
///
/// ```text
/// [ (1-d2) S0   (1-d2) S0 ]
/// [ (1-d2) S0        S0   ]
/// ```
pub fn target_joint_covariance(spec: &EnvSpec) -> DMatrix<f64> {
    let n = spec.num_arms();
    let d2 = spec.delta_sq();
    let s0 = spec.sigma0();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let shrunk = (1.0 - d2) * s0[(i, j)];
            out[(i, j)] = shrunk;
            out[(i, n + j)] = shrunk;
            out[(n + i, j)] = shrunk;
            out[(n + i, n + j)] = s0[(i, j)];
        }
    }
    out
}

/// Exact per-arm Beta posterior over the real mean rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaBelief {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl BetaBelief {
    pub fn from_spec(spec: &EnvSpec) -> Self {
        Self {
            alpha: spec.alpha().to_vec(),
            beta: spec.beta().to_vec(),
        }
    }

    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::DimensionMismatch("alpha vs beta lengths".into()));
        }
        if alpha.iter().chain(beta.iter()).any(|&x| x <= 0.0) {
            return Err(Error::InvalidSpec("Beta parameters must be positive".into()));
        }
        Ok(Self { alpha, beta })
    }

    pub fn num_arms(&self) -> usize {
        self.alpha.len()
    }
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Posterior after one binary reward: a 1 increments `alpha[arm]`,
    /// a 0 increments `beta[arm]`.
    pub fn updated(&self, arm: usize, reward: u8) -> Result<Self> {
        if arm >= self.num_arms() {
            return Err(Error::ArmOutOfRange {
                arm,
                num_arms: self.num_arms(),
            });
        }
        if reward > 1 {
            return Err(Error::InvalidSpec(format!(
                "Beta update takes a binary reward, got {reward}"
            )));
        }
        let mut next = self.clone();
        if reward == 1 {
            next.alpha[arm] += 1.0;
        } else {
            next.beta[arm] += 1.0;
        }
        Ok(next)
    }

    pub fn posterior_mean(&self, arm: usize) -> f64 {
        self.alpha[arm] / (self.alpha[arm] + self.beta[arm])
    }

    /// One joint draw of the real mean vector from the posterior.
    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(self.beta.iter())
            .map(|(&a, &b)| {
                BetaDist::new(a, b)
                    .expect("positive Beta parameters")
                    .sample(rng)
            })
            .collect()
    }
}
