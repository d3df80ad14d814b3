//! Real (Bernoulli) and imaginary (Gaussian) bandit environments.
//!
//! The real environment draws a mean-reward vector `theta` with independent
//! `Beta(alpha_a, beta_a)` components and pays binary rewards
//! `Bernoulli(theta_a)`. The imaginary environment the agent reasons about
//! instead has mean vector `theta_tilde ~ N(mu0, sigma0)` and pays
//! `N(theta_tilde_a, noise_var)` rewards. Both are parameterized by a single
//! [`EnvSpec`].

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the symmetry check on `sigma0`.
const SYMMETRY_TOL: f64 = 1e-12;

/// Likelihood variances below this are rejected: the rank-one posterior
/// update divides by `noise_var` and becomes numerically singular.
const MIN_NOISE_VAR: f64 = 1e-12;

/// Full experiment configuration: real prior, imaginary prior, likelihood
/// variance, horizon and the target perturbation variance.
///
/// Construction validates every invariant (positive Beta parameters,
/// symmetric positive definite `sigma0`, `delta_sq` strictly inside (0,1)),
/// so a value of this type is always usable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnvSpec", into = "RawEnvSpec")]
pub struct EnvSpec {
    num_arms: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    mu0: DVector<f64>,
    sigma0: DMatrix<f64>,
    noise_var: f64,
    horizon: usize,
    delta_sq: f64,
}

impl EnvSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_arms: usize,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        mu0: Vec<f64>,
        sigma0: DMatrix<f64>,
        noise_var: f64,
        horizon: usize,
        delta_sq: f64,
    ) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::InvalidSpec("num_arms must be positive".into()));
        }
        if alpha.len() != num_arms || beta.len() != num_arms {
            return Err(Error::InvalidSpec(format!(
                "expected {num_arms} Beta parameter pairs, got {} alphas / {} betas",
                alpha.len(),
                beta.len()
            )));
        }
        if mu0.len() != num_arms {
            return Err(Error::InvalidSpec(format!(
                "mu0 has length {}, expected {num_arms}",
                mu0.len()
            )));
        }
        if sigma0.nrows() != num_arms || sigma0.ncols() != num_arms {
            return Err(Error::InvalidSpec(format!(
                "sigma0 is {}x{}, expected {num_arms}x{num_arms}",
                sigma0.nrows(),
                sigma0.ncols()
            )));
        }
        for (i, (&a, &b)) in alpha.iter().zip(beta.iter()).enumerate() {
            if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "Beta parameters for arm {i} must be strictly positive, got ({a}, {b})"
                )));
            }
        }
        if !mu0.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidSpec("mu0 must be finite".into()));
        }
        if !(noise_var.is_finite() && noise_var >= MIN_NOISE_VAR) {
            return Err(Error::InvalidSpec(format!(
                "noise_var must be at least {MIN_NOISE_VAR}, got {noise_var}"
            )));
        }
        if !(delta_sq.is_finite() && delta_sq > 0.0 && delta_sq < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "delta_sq must lie strictly inside (0, 1), got {delta_sq}"
            )));
        }
        for i in 0..num_arms {
            for j in (i + 1)..num_arms {
                if (sigma0[(i, j)] - sigma0[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::NotPositiveDefinite(format!(
                        "sigma0 asymmetric at ({i},{j}): {} vs {}",
                        sigma0[(i, j)],
                        sigma0[(j, i)]
                    )));
                }
            }
        }
        if sigma0.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite(
                "sigma0 has a non-positive eigenvalue (Cholesky failed)".into(),
            ));
        }
        Ok(Self {
            num_arms,
            alpha,
            beta,
            mu0: DVector::from_vec(mu0),
            sigma0,
            noise_var,
            horizon,
            delta_sq,
        })
    }

    /// Two-arm spec used throughout the examples: `Beta(1,1)` arms,
    /// standard normal imaginary prior centered at `mu0`.
    pub fn symmetric(num_arms: usize, mu0: f64, noise_var: f64, horizon: usize) -> Result<Self> {
        Self::new(
            num_arms,
            vec![1.0; num_arms],
            vec![1.0; num_arms],
            vec![mu0; num_arms],
            DMatrix::identity(num_arms, num_arms),
            noise_var,
            horizon,
            0.5,
        )
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
    pub fn mu0(&self) -> &DVector<f64> {
        &self.mu0
    }
    pub fn sigma0(&self) -> &DMatrix<f64> {
        &self.sigma0
    }
    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn delta_sq(&self) -> f64 {
        self.delta_sq
    }

    /// Largest prior variance across arms, `max_a sigma0[a,a]`.
    pub fn max_prior_var(&self) -> f64 {
        (0..self.num_arms)
            .map(|a| self.sigma0[(a, a)])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when `sigma0` is exactly diagonal.
    pub fn sigma0_is_diagonal(&self) -> bool {
        for i in 0..self.num_arms {
            for j in 0..self.num_arms {
                if i != j && self.sigma0[(i, j)] != 0.0 {
                    return false;
                }
            }
        }
        true
    }

    pub fn check_arm(&self, arm: usize) -> Result<()> {
        if arm < self.num_arms {
            Ok(())
        } else {
            Err(Error::ArmOutOfRange {
                arm,
                num_arms: self.num_arms,
            })
        }
    }
}

/// Wire format for [`EnvSpec`]; the covariance is a row-major nested array.
#[derive(Serialize, Deserialize)]
struct RawEnvSpec {
    num_arms: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    mu0: Vec<f64>,
    sigma0: Vec<Vec<f64>>,
    noise_var: f64,
    horizon: usize,
    delta_sq: f64,
}

impl TryFrom<RawEnvSpec> for EnvSpec {
    type Error = Error;

    fn try_from(raw: RawEnvSpec) -> Result<Self> {
        let n = raw.num_arms;
        if raw.sigma0.len() != n || raw.sigma0.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidSpec(format!(
                "sigma0 must be a {n}x{n} nested array"
            )));
        }
        let sigma0 = DMatrix::from_fn(n, n, |i, j| raw.sigma0[i][j]);
        EnvSpec::new(
            n,
            raw.alpha,
            raw.beta,
            raw.mu0,
            sigma0,
            raw.noise_var,
            raw.horizon,
            raw.delta_sq,
        )
    }
}

impl From<EnvSpec> for RawEnvSpec {
    fn from(spec: EnvSpec) -> Self {
        let n = spec.num_arms;
        RawEnvSpec {
            num_arms: n,
            alpha: spec.alpha,
            beta: spec.beta,
            mu0: spec.mu0.iter().copied().collect(),
            sigma0: (0..n)
                .map(|i| (0..n).map(|j| spec.sigma0[(i, j)]).collect())
                .collect(),
            noise_var: spec.noise_var,
            horizon: spec.horizon,
            delta_sq: spec.delta_sq,
        }
    }
}

/// On-disk experiment document: an [`EnvSpec`] plus the master seed.
///
/// Keys: `num_arms`, `alpha[]`, `beta[]`, `mu0[]`, `sigma0[][]`,
/// `noise_var`, `horizon`, `delta_sq`, `seed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecDoc {
    pub num_arms: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub mu0: Vec<f64>,
    pub sigma0: Vec<Vec<f64>>,
    pub noise_var: f64,
    pub horizon: usize,
    pub delta_sq: f64,
    pub seed: u64,
}

impl SpecDoc {
    pub fn from_spec(spec: &EnvSpec, seed: u64) -> Self {
        let raw: RawEnvSpec = spec.clone().into();
        SpecDoc {
            num_arms: raw.num_arms,
            alpha: raw.alpha,
            beta: raw.beta,
            mu0: raw.mu0,
            sigma0: raw.sigma0,
            noise_var: raw.noise_var,
            horizon: raw.horizon,
            delta_sq: raw.delta_sq,
            seed,
        }
    }

    pub fn to_spec(&self) -> Result<EnvSpec> {
        EnvSpec::try_from(RawEnvSpec {
            num_arms: self.num_arms,
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            mu0: self.mu0.clone(),
            sigma0: self.sigma0.clone(),
            noise_var: self.noise_var,
            horizon: self.horizon,
            delta_sq: self.delta_sq,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// One draw of the real environment: sampled mean rewards, an optimal arm
/// (argmax ties broken uniformly at random) and the optimal mean.
#[derive(Debug, Clone)]
pub struct RealEnvDraw {
    pub theta: Vec<f64>,
    pub optimal_arm: usize,
    pub optimal_mean: f64,
}

/// An ordered list of (arm, binary reward) pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    steps: Vec<(usize, u8)>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, arm: usize, reward: u8) -> Result<()> {
        if reward > 1 {
            return Err(Error::InvalidSpec(format!(
                "history rewards must be 0 or 1, got {reward}"
            )));
        }
        self.steps.push((arm, reward));
        Ok(())
    }

    pub fn from_steps(steps: Vec<(usize, u8)>) -> Result<Self> {
        let mut h = History::new();
        for (arm, r) in steps {
            h.push(arm, r)?;
        }
        Ok(h)
    }

    pub fn steps(&self) -> &[(usize, u8)] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Deterministic per-replication RNG substream.
///
/// Each replication gets its own ChaCha stream keyed by
/// `(master_seed, replication)`, so replications are order-independent and
/// can run in parallel without sharing state.
pub fn replication_rng(master_seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replication);
    rng
}

/// Samples `theta_a ~ Beta(alpha_a, beta_a)` independently and records the
/// optimal arm with uniform tie-breaking.
pub fn sample_real_env<R: Rng + ?Sized>(spec: &EnvSpec, rng: &mut R) -> RealEnvDraw {
    let theta: Vec<f64> = spec
        .alpha
        .iter()
        .zip(spec.beta.iter())
        .map(|(&a, &b)| {
            Beta::new(a, b)
                .expect("validated Beta parameters")
                .sample(rng)
        })
        .collect();
    let optimal_mean = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..theta.len())
        .filter(|&a| theta[a] == optimal_mean)
        .collect();
    let optimal_arm = ties[rng.random_range(0..ties.len())];
    RealEnvDraw {
        theta,
        optimal_arm,
        optimal_mean,
    }
}

/// One Bernoulli reward from the real environment.
pub fn step_real<R: Rng + ?Sized>(theta: &[f64], arm: usize, rng: &mut R) -> Result<u8> {
    if arm >= theta.len() {
        return Err(Error::ArmOutOfRange {
            arm,
            num_arms: theta.len(),
        });
    }
    debug_assert!((0.0..=1.0).contains(&theta[arm]));
    Ok(u8::from(rng.random::<f64>() < theta[arm]))
}

/// One Gaussian reward from the imaginary environment.
pub fn step_imaginary<R: Rng + ?Sized>(
    theta_tilde: &[f64],
    arm: usize,
    noise_var: f64,
    rng: &mut R,
) -> Result<f64> {
    if arm >= theta_tilde.len() {
        return Err(Error::ArmOutOfRange {
            arm,
            num_arms: theta_tilde.len(),
        });
    }
    debug_assert!(noise_var > 0.0);
    let noise = Normal::new(0.0, noise_var.sqrt())
        .expect("positive noise variance")
        .sample(rng);
    Ok(theta_tilde[arm] + noise)
}
