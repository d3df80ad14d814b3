//! Agent policies over a Gaussian belief: Thompson sampling,
//! information-directed sampling, and a uniform baseline.
//!
//! All policies are stateless functions of `(belief, rng)`. Each returns the
//! sampled arm together with [`StepDiagnostics`]: the per-arm expected
//! one-step regret under the belief, the per-arm information gain about the
//! belief's mean vector, the action distribution actually played, and the
//! achieved one-step ratio (squared expected regret over information gain).

mod gaussmax;

pub use gaussmax::{argmax_probabilities, expected_max_gaussian, EstimatorQuality};

use nalgebra::DVector;
use rand::Rng;

use crate::belief::GaussianBelief;
use crate::error::{Error, Result};

/// Gains below this are treated as zero when deciding whether any arm still
/// carries information.
pub const GAIN_FLOOR: f64 = 1e-15;

/// A probability distribution over arms.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDist {
    probs: Vec<f64>,
}

impl ActionDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidSpec("empty action distribution".into()));
        }
        if probs.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
            return Err(Error::InvalidSpec(
                "action probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "action probabilities sum to {total}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(num_arms: usize) -> Self {
        Self {
            probs: vec![1.0 / num_arms as f64; num_arms],
        }
    }

    pub fn delta(num_arms: usize, arm: usize) -> Self {
        let mut probs = vec![0.0; num_arms];
        probs[arm] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_arms(&self) -> usize {
        self.probs.len()
    }

    /// Number of arms carrying more than `1e-12` probability.
    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 1e-12).count()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (a, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        self.probs.len() - 1
    }
}

/// Per-step diagnostics shared by every policy.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    /// `E[max_b mean_b] - mean_a` for each arm, under the current belief.
    pub expected_regret_per_arm: Vec<f64>,
    /// `0.5 ln(1 + cov_aa / noise_var)` for each arm, in nats.
    pub info_gain_per_arm: Vec<f64>,
    /// The action distribution the policy played this step.
    pub chosen_dist: ActionDist,
    /// Achieved one-step ratio at `chosen_dist`.
    pub ratio_value: f64,
    /// Set when every arm's gain was below [`GAIN_FLOOR`] and the policy
    /// fell back to pure exploitation.
    pub exploit_fallback: bool,
}

/// Information gained about the belief's mean vector by one observation of
/// each arm: `g_a = 0.5 ln(1 + cov_aa / noise_var)`.
///
/// Depends on the history only through the belief covariance, hence only
/// through the per-arm pull counts, never through rewards.
pub fn info_gain_per_arm(belief: &GaussianBelief) -> Vec<f64> {
    let v = belief.noise_var();
    (0..belief.num_arms())
        .map(|a| 0.5 * (1.0 + belief.cov()[(a, a)] / v).ln())
        .collect()
}

/// One-step information ratio of an action distribution given per-arm
/// expected regrets and gains: `(sum_a pi_a d_a)^2 / (sum_a pi_a g_a)`.
/// A zero numerator yields zero regardless of the denominator.
pub fn single_step_ratio(dist: &ActionDist, regrets: &[f64], gains: &[f64]) -> f64 {
    let num: f64 = dist
        .probs()
        .iter()
        .zip(regrets.iter())
        .map(|(p, d)| p * d)
        .sum();
    let num = num * num;
    if num == 0.0 {
        return 0.0;
    }
    let den: f64 = dist
        .probs()
        .iter()
        .zip(gains.iter())
        .map(|(p, g)| p * g)
        .sum();
    if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Draws one posterior sample and returns its argmax, ties broken uniformly.
pub fn ts_sample<R: Rng + ?Sized>(belief: &GaussianBelief, rng: &mut R) -> Result<usize> {
    let draw = belief.sample(rng)?;
    let best = draw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..draw.len()).filter(|&a| draw[a] == best).collect();
    Ok(ties[rng.random_range(0..ties.len())])
}

fn diagnostics_for(
    belief: &GaussianBelief,
    dist: ActionDist,
    exploit_fallback: bool,
) -> StepDiagnostics {
    let emax = expected_max_gaussian(belief.mean(), belief.cov(), EstimatorQuality::Fast);
    let regrets: Vec<f64> = belief.mean().iter().map(|&m| (emax - m).max(0.0)).collect();
    let gains = info_gain_per_arm(belief);
    let ratio_value = single_step_ratio(&dist, &regrets, &gains);
    StepDiagnostics {
        expected_regret_per_arm: regrets,
        info_gain_per_arm: gains,
        chosen_dist: dist,
        ratio_value,
        exploit_fallback,
    }
}

/// Thompson sampling against the Gaussian belief.
///
/// The sampled arm comes from one posterior draw; the diagnostics carry the
/// exact posterior argmax distribution (by quadrature for diagonal
/// covariances, quasi-Monte Carlo otherwise).
pub fn ts_action<R: Rng + ?Sized>(
    belief: &GaussianBelief,
    rng: &mut R,
) -> Result<(usize, StepDiagnostics)> {
    let arm = ts_sample(belief, rng)?;
    let probs = argmax_probabilities(belief.mean(), belief.cov(), EstimatorQuality::Fast);
    let dist = ActionDist::new(probs)?;
    Ok((arm, diagnostics_for(belief, dist, false)))
}

/// Outcome of the information-ratio minimization over the simplex.
#[derive(Debug, Clone)]
pub struct IdsSolution {
    pub dist: ActionDist,
    pub ratio: f64,
    pub exploit_fallback: bool,
}

/// Minimizes `(sum pi_a d_a)^2 / (sum pi_a g_a)` over the simplex.
///
/// The optimum of this objective is attained on a distribution supported on
/// at most two arms, so an exact search over arm pairs with a closed-form
/// one-dimensional minimizer per pair suffices. For the pair `(i, j)` mixed
/// with weight `q` on `i`, the stationary point of
/// `q -> (q d_i + (1-q) d_j)^2 / (q g_i + (1-q) g_j)` solves
/// `2 (d_i - d_j) g(q) = d(q) (g_i - g_j)`, giving
/// `q* = (d_j (g_i - g_j) - 2 (d_i - d_j) g_j) / ((d_i - d_j)(g_i - g_j))`,
/// clipped to `[0, 1]` and compared against the endpoints.
pub fn ids_distribution(expected_regrets: &[f64], info_gains: &[f64]) -> IdsSolution {
    let n = expected_regrets.len();
    assert_eq!(n, info_gains.len());
    let regrets: Vec<f64> = expected_regrets.iter().map(|&d| d.max(0.0)).collect();

    if info_gains.iter().all(|&g| g <= GAIN_FLOOR) {
        // Nothing left to learn: the ratio is 0/0 everywhere, so exploit.
        let best = (0..n)
            .min_by(|&a, &b| regrets[a].partial_cmp(&regrets[b]).unwrap())
            .unwrap();
        return IdsSolution {
            dist: ActionDist::delta(n, best),
            ratio: 0.0,
            exploit_fallback: true,
        };
    }

    if n == 1 {
        let dist = ActionDist::delta(1, 0);
        let ratio = single_step_ratio(&dist, &regrets, info_gains);
        return IdsSolution {
            dist,
            ratio,
            exploit_fallback: false,
        };
    }

    let pair_ratio = |q: f64, i: usize, j: usize| -> f64 {
        let d = q * regrets[i] + (1.0 - q) * regrets[j];
        let num = d * d;
        if num == 0.0 {
            return 0.0;
        }
        let den = q * info_gains[i] + (1.0 - q) * info_gains[j];
        if den <= 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    };

    let mut best_ratio = f64::INFINITY;
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..n {
        for j in (i + 1)..n {
            let dd = regrets[i] - regrets[j];
            let dg = info_gains[i] - info_gains[j];
            let mut candidates: [f64; 3] = [f64::NAN; 3];
            let mut count = 0;
            if dd == 0.0 && dg == 0.0 {
                // Objective is flat along this edge; prefer the balanced mix.
                candidates[count] = 0.5;
                count += 1;
            } else {
                let q_star = (regrets[j] * dg - 2.0 * dd * info_gains[j]) / (dd * dg);
                if q_star.is_finite() {
                    candidates[count] = q_star.clamp(0.0, 1.0);
                    count += 1;
                }
            }
            candidates[count] = 0.0;
            count += 1;
            candidates[count] = 1.0;
            count += 1;

            for &q in &candidates[..count] {
                let r = pair_ratio(q, i, j);
                if r < best_ratio {
                    best_ratio = r;
                    best = Some((i, j, q));
                }
            }
        }
    }

    let (i, j, q) = best.expect("at least one candidate is always evaluated");
    let mut probs = vec![0.0; n];
    probs[i] = q;
    probs[j] += 1.0 - q;
    IdsSolution {
        dist: ActionDist::new(probs).expect("pair mix is a distribution"),
        ratio: best_ratio,
        exploit_fallback: false,
    }
}

/// Information-directed sampling against the Gaussian belief: minimizes the
/// one-step ratio over the simplex and samples from the minimizer.
pub fn ids_action<R: Rng + ?Sized>(
    belief: &GaussianBelief,
    rng: &mut R,
) -> Result<(usize, StepDiagnostics)> {
    let emax = expected_max_gaussian(belief.mean(), belief.cov(), EstimatorQuality::Fast);
    let regrets: Vec<f64> = belief.mean().iter().map(|&m| (emax - m).max(0.0)).collect();
    let gains = info_gain_per_arm(belief);
    let solution = ids_distribution(&regrets, &gains);
    let arm = solution.dist.sample(rng);
    Ok((
        arm,
        StepDiagnostics {
            expected_regret_per_arm: regrets,
            info_gain_per_arm: gains,
            chosen_dist: solution.dist,
            ratio_value: solution.ratio,
            exploit_fallback: solution.exploit_fallback,
        },
    ))
}

/// Uniform-random baseline.
pub fn uniform_action<R: Rng + ?Sized>(num_arms: usize, rng: &mut R) -> usize {
    rng.random_range(0..num_arms)
}
