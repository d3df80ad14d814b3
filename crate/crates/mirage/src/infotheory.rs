//! Information-theoretic quantities in closed form: Gaussian differential
//! entropy and mutual information, Gaussian-Gaussian and Beta-Gaussian
//! KL divergences, and total variation / KL for finite distributions.
//!
//! Everything is in nats. Divergences that blow up (an absolute-continuity
//! violation in [`kl_discrete`]) return an explicit `f64::INFINITY` sentinel
//! rather than an error: downstream bounds consume the sentinel and become
//! vacuous, which is the correct reading of the mathematics.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::envs::EnvSpec;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453; // ln(2*pi)
const LN_2PI_E: f64 = 2.8378770664093453; // ln(2*pi*e)

/// A finitely supported distribution on the reals.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::DimensionMismatch(
                "support and probability lengths differ".into(),
            ));
        }
        if probs.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
            return Err(Error::InvalidSpec(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        let mut seen = support.clone();
        seen.sort_by(f64::total_cmp);
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSpec("support values must be distinct".into()));
        }
        Ok(Self { support, probs })
    }

    /// Two-point distribution on {0, 1} with success probability `p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(vec![0.0, 1.0], vec![1.0 - p, p])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn expectation(&self) -> f64 {
        self.support
            .iter()
            .zip(self.probs.iter())
            .map(|(x, p)| x * p)
            .sum()
    }

    /// Merges the supports of two distributions, treating missing atoms as
    /// probability zero. Returns (atom, p, q) triples.
    fn merged(p: &DiscreteDist, q: &DiscreteDist) -> Vec<(f64, f64, f64)> {
        let mut atoms: Vec<(f64, f64, f64)> = p
            .support
            .iter()
            .zip(p.probs.iter())
            .map(|(&x, &pp)| (x, pp, 0.0))
            .chain(
                q.support
                    .iter()
                    .zip(q.probs.iter())
                    .map(|(&x, &qq)| (x, 0.0, qq)),
            )
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, pp, qq) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => {
                    last.1 += pp;
                    last.2 += qq;
                }
                _ => merged.push((x, pp, qq)),
            }
        }
        merged
    }
}

/// Differential entropy of an n-dimensional Gaussian with covariance `cov`:
/// `0.5 ln|cov| + (n/2) ln(2 pi e)`.
pub fn gaussian_entropy(cov: &DMatrix<f64>) -> Result<f64> {
    if cov.nrows() != cov.ncols() {
        return Err(Error::DimensionMismatch("covariance must be square".into()));
    }
    let n = cov.nrows() as f64;
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("entropy covariance".into()))?;
    let ln_det = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    Ok(0.5 * ln_det + 0.5 * n * LN_2PI_E)
}

/// Mutual information between the perturbed learning target and the
/// imaginary environment: `(num_arms / 2) ln(1 / delta_sq)`.
///
/// Equals `gaussian_entropy(S0) - gaussian_entropy(delta_sq * S0)` for every
/// PD prior covariance; the property tests check that identity.
pub fn target_mutual_information(num_arms: usize, delta_sq: f64) -> Result<f64> {
    if !(delta_sq > 0.0 && delta_sq < 1.0) {
        return Err(Error::InvalidSpec(format!(
            "delta_sq must lie in (0, 1), got {delta_sq}"
        )));
    }
    Ok(num_arms as f64 / 2.0 * (1.0 / delta_sq).ln())
}

/// KL divergence between two multivariate Gaussians,
/// `0.5 [tr(S2^-1 S1) + (m2-m1)^T S2^-1 (m2-m1) - n + ln(|S2|/|S1|)]`.
pub fn kl_gaussian(
    mu1: &DVector<f64>,
    cov1: &DMatrix<f64>,
    mu2: &DVector<f64>,
    cov2: &DMatrix<f64>,
) -> Result<f64> {
    let n = mu1.len();
    if mu2.len() != n || cov1.nrows() != n || cov2.nrows() != n {
        return Err(Error::DimensionMismatch(
            "Gaussian KL inputs must share a dimension".into(),
        ));
    }
    let chol1 = cov1
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("first covariance".into()))?;
    let chol2 = cov2
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("second covariance".into()))?;
    let ln_det1 = 2.0 * chol1.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let ln_det2 = 2.0 * chol2.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let inv2 = chol2.inverse();
    let trace = (&inv2 * cov1).trace();
    let d = mu2 - mu1;
    let quad = (d.transpose() * &inv2 * &d)[(0, 0)];
    Ok(0.5 * (trace + quad - n as f64 + ln_det2 - ln_det1))
}

/// Differential entropy of `Beta(alpha, beta)` in nats.
pub fn beta_entropy(alpha: f64, beta: f64) -> f64 {
    let ln_b = ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta);
    ln_b - (alpha - 1.0) * digamma(alpha) - (beta - 1.0) * digamma(beta)
        + (alpha + beta - 2.0) * digamma(alpha + beta)
}

/// KL divergence from `Beta(alpha, beta)` to `N(mu, var)`, in closed form:
///
/// ```text
/// -H(Beta) + 0.5 ln(2 pi var) + E[(X - mu)^2] / (2 var)
/// ```
///
/// with `E[(X - mu)^2] = Var(X) + (E[X] - mu)^2` from the Beta moments.
pub fn kl_beta_gaussian(alpha: f64, beta: f64, mu: f64, var: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "Beta parameters must be positive, got ({alpha}, {beta})"
        )));
    }
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "Gaussian variance must be positive, got {var}"
        )));
    }
    let mean = alpha / (alpha + beta);
    let variance = alpha * beta / ((alpha + beta).powi(2) * (alpha + beta + 1.0));
    let second_moment = variance + (mean - mu).powi(2);
    Ok(-beta_entropy(alpha, beta) + 0.5 * (LN_2PI + var.ln()) + second_moment / (2.0 * var))
}

/// KL divergence between the prior over real mean rewards (independent Beta
/// arms) and the imaginary Gaussian prior, summed over arms.
///
/// Both priors must factor across arms, so a correlated `sigma0` is rejected.
pub fn prior_mean_kl(spec: &EnvSpec) -> Result<f64> {
    if !spec.sigma0_is_diagonal() {
        return Err(Error::Unsupported(
            "prior KL requires a diagonal imaginary prior covariance".into(),
        ));
    }
    let mut total = 0.0;
    for a in 0..spec.num_arms() {
        total += kl_beta_gaussian(
            spec.alpha()[a],
            spec.beta()[a],
            spec.mu0()[a],
            spec.sigma0()[(a, a)],
        )?;
    }
    Ok(total)
}

/// Total variation distance `0.5 sum |p - q|` over the merged supports.
pub fn tv_distance(p: &DiscreteDist, q: &DiscreteDist) -> f64 {
    DiscreteDist::merged(p, q)
        .iter()
        .map(|(_, pp, qq)| (pp - qq).abs())
        .sum::<f64>()
        / 2.0
}

/// KL divergence `sum p ln(p/q)` with the `0 ln 0 = 0` convention.
/// Returns `f64::INFINITY` when `p` puts mass where `q` has none.
pub fn kl_discrete(p: &DiscreteDist, q: &DiscreteDist) -> f64 {
    let mut total = 0.0;
    for (_, pp, qq) in DiscreteDist::merged(p, q) {
        if pp == 0.0 {
            continue;
        }
        if qq == 0.0 {
            return f64::INFINITY;
        }
        total += pp * (pp / qq).ln();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_gaussian_entropy() {
        let unit = DMatrix::from_element(1, 1, 1.0);
        assert_abs_diff_eq!(gaussian_entropy(&unit).unwrap(), 1.4189385332046727, epsilon = 1e-12);

        // Unit-determinant scaling: var = 1/(2 pi e) has zero entropy.
        let zero = DMatrix::from_element(1, 1, 1.0 / (2.0 * std::f64::consts::PI * std::f64::consts::E));
        assert_abs_diff_eq!(gaussian_entropy(&zero).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_entropy_is_sum_of_scalars() {
        // Oracle: independent coordinates add entropies.
        let one = gaussian_entropy(&DMatrix::from_element(1, 1, 1.0)).unwrap();
        let four = gaussian_entropy(&DMatrix::from_element(1, 1, 4.0)).unwrap();
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let joint = gaussian_entropy(&diag).unwrap();
        assert_abs_diff_eq!(joint, one + four, epsilon = 1e-12);
        assert_abs_diff_eq!(joint, 3.5310156186,  epsilon = 1e-9);
    }

    #[test]
    fn entropy_rejects_indefinite() {
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(gaussian_entropy(&indef).is_err());
    }

    #[test]
    fn target_mi_values() {
        // Two arms at delta_sq = 1/e give exactly 1 nat.
        assert_abs_diff_eq!(
            target_mutual_information(2, (-1.0f64).exp()).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // delta_sq -> 1: no information left in the target.
        assert!(target_mutual_information(3, 1.0 - 1e-12).unwrap() < 1e-10);
        assert_abs_diff_eq!(
            target_mutual_information(3, 0.25).unwrap(),
            1.5 * 4.0f64.ln(),
            epsilon = 1e-12
        );
        assert!(target_mutual_information(2, 1.0).is_err());
        assert!(target_mutual_information(2, 0.0).is_err());
    }

    #[test]
    fn target_mi_matches_entropy_difference() {
        // Identity from the entropy formula:
        // MI = h(S0) - h(delta_sq * S0) for any PD S0.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let n = rng.random_range(1..=5);
            let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let s0 = &a * a.transpose() + DMatrix::identity(n, n) * 0.3;
            let d2 = 0.02 + 0.96 * rng.random::<f64>();
            let mi = target_mutual_information(n, d2).unwrap();
            let diff = gaussian_entropy(&s0).unwrap()
                - gaussian_entropy(&(d2 * &s0)).unwrap();
            assert_abs_diff_eq!(mi, diff, epsilon = 1e-10);
        }
    }

    #[test]
    fn gaussian_kl_cases() {
        let mu0 = DVector::from_vec(vec![0.0]);
        let mu1 = DVector::from_vec(vec![1.0]);
        let one = DMatrix::from_element(1, 1, 1.0);
        assert_abs_diff_eq!(kl_gaussian(&mu0, &one, &mu0, &one).unwrap(), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(kl_gaussian(&mu0, &one, &mu1, &one).unwrap(), 0.5, epsilon = 1e-13);

        // n=2, I vs 2I, equal means: 0.5 (1 - 2 + ln 4) = ln 2 - 0.5.
        // Oracle: the sum of two scalar divergences KL(N(0,1) || N(0,2)).
        let scalar = 0.5 * (0.5 - 1.0 + 2.0f64.ln());
        let m = DVector::zeros(2);
        let id = DMatrix::identity(2, 2);
        let two = 2.0 * DMatrix::identity(2, 2);
        let kl = kl_gaussian(&m, &id, &m, &two).unwrap();
        assert_abs_diff_eq!(kl, 2.0 * scalar, epsilon = 1e-13);
        assert_abs_diff_eq!(kl, 2.0f64.ln() - 0.5, epsilon = 1e-13);

        assert!(kl_gaussian(&mu0, &one, &m, &id).is_err());
    }

    #[test]
    fn beta_gaussian_kl_known_values() {
        // Beta(1,1) vs N(0.5, 1): 0.5 ln(2 pi) + (1/12)/2.
        let expected = 0.5 * LN_2PI + 1.0 / 24.0;
        assert_abs_diff_eq!(
            kl_beta_gaussian(1.0, 1.0, 0.5, 1.0).unwrap(),
            expected,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(expected, 0.9606052, epsilon = 1e-6);

        // Matched mean and variance: the quadratic term collapses to 1/2,
        // so KL = -H(Beta) + 0.5 ln(2 pi e var).
        let kl = kl_beta_gaussian(2.0, 2.0, 0.5, 0.05).unwrap();
        let direct = -beta_entropy(2.0, 2.0) + 0.5 * (LN_2PI_E + 0.05f64.ln());
        assert_abs_diff_eq!(kl, direct, epsilon = 1e-12);
    }

    #[test]
    fn prior_kl_is_permutation_invariant() {
        let spec_ab = EnvSpec::new(
            2,
            vec![2.0, 5.0],
            vec![3.0, 1.0],
            vec![0.4, 0.9],
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])),
            1.0,
            10,
            0.5,
        )
        .unwrap();
        let spec_ba = EnvSpec::new(
            2,
            vec![5.0, 2.0],
            vec![1.0, 3.0],
            vec![0.9, 0.4],
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0])),
            1.0,
            10,
            0.5,
        )
        .unwrap();
        assert_abs_diff_eq!(
            prior_mean_kl(&spec_ab).unwrap(),
            prior_mean_kl(&spec_ba).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn prior_kl_rejects_correlated_sigma0() {
        let sigma0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 1.0]);
        let spec = EnvSpec::new(
            2,
            vec![1.0; 2],
            vec![1.0; 2],
            vec![0.5; 2],
            sigma0,
            1.0,
            10,
            0.5,
        )
        .unwrap();
        assert!(matches!(prior_mean_kl(&spec), Err(Error::Unsupported(_))));
    }

    #[test]
    fn tv_and_kl_discrete_cases() {
        let p = DiscreteDist::bernoulli(0.3).unwrap();
        let q = DiscreteDist::bernoulli(0.5).unwrap();
        assert_abs_diff_eq!(tv_distance(&p, &p), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(tv_distance(&p, &q), 0.2, epsilon = 1e-12);

        let d0 = DiscreteDist::new(vec![0.0], vec![1.0]).unwrap();
        let d1 = DiscreteDist::new(vec![1.0], vec![1.0]).unwrap();
        assert_abs_diff_eq!(tv_distance(&d0, &d1), 1.0, epsilon = 1e-15);

        assert_abs_diff_eq!(kl_discrete(&p, &p), 0.0, epsilon = 1e-15);
        // Direct two-term evaluation: 0.5 ln 2 + 0.5 ln(2/3).
        let expected = 0.5 * 2.0f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        let q25 = DiscreteDist::bernoulli(0.25).unwrap();
        assert_abs_diff_eq!(kl_discrete(&q, &q25), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.143841, epsilon = 1e-6);

        // Support violation: Bern(1) vs Bern(0).
        let b1 = DiscreteDist::bernoulli(1.0).unwrap();
        let b0 = DiscreteDist::bernoulli(0.0).unwrap();
        assert!(kl_discrete(&b1, &b0).is_infinite());
    }

    #[test]
    fn discrete_dist_validation() {
        assert!(DiscreteDist::new(vec![0.0, 1.0], vec![0.6, 0.6]).is_err());
        assert!(DiscreteDist::new(vec![0.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteDist::new(vec![0.0, 1.0], vec![-0.1, 1.1]).is_err());
    }

    fn random_dist(rng: &mut ChaCha8Rng, upper: f64) -> DiscreteDist {
        let k = rng.random_range(2..=6);
        let mut support: Vec<f64> = Vec::with_capacity(k);
        while support.len() < k {
            let x = rng.random::<f64>() * upper;
            if !support.contains(&x) {
                support.push(x);
            }
        }
        let mut probs: Vec<f64> = (0..k).map(|_| rng.random::<f64>().max(1e-6)).collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        let correction: f64 = 1.0 - probs.iter().sum::<f64>();
        probs[0] += correction;
        DiscreteDist::new(support, probs).unwrap()
    }

    #[test]
    fn pinsker_and_expectation_tv_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for _ in 0..1000 {
            let b = 0.5 + 4.5 * rng.random::<f64>();
            let p = random_dist(&mut rng, b);
            // Half the time share the support so the KL is finite.
            let q = if rng.random::<bool>() {
                let mut probs: Vec<f64> =
                    (0..p.probs().len()).map(|_| rng.random::<f64>().max(1e-6)).collect();
                let total: f64 = probs.iter().sum();
                for x in &mut probs {
                    *x /= total;
                }
                let correction: f64 = 1.0 - probs.iter().sum::<f64>();
                probs[0] += correction;
                DiscreteDist::new(p.support().to_vec(), probs).unwrap()
            } else {
                random_dist(&mut rng, b)
            };

            let tv = tv_distance(&p, &q);
            let kl = kl_discrete(&p, &q);
            if kl.is_finite() {
                assert!(tv <= (0.5 * kl).sqrt() + 1e-12, "Pinsker violated: {tv} vs {kl}");
            }
            let de = (p.expectation() - q.expectation()).abs();
            assert!(de <= b * tv + 1e-12, "expectation-TV violated: {de} vs {}", b * tv);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn beta_gaussian_kl_nonnegative(
            alpha in 0.5f64..20.0,
            beta in 0.5f64..20.0,
            mu in -1.0f64..2.0,
            var in 0.02f64..5.0,
        ) {
            let kl = kl_beta_gaussian(alpha, beta, mu, var).unwrap();
            prop_assert!(kl >= -1e-9, "negative KL {kl}");
        }

        #[test]
        fn gaussian_kl_nonnegative(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=4);
            let mk = |rng: &mut ChaCha8Rng| {
                let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
                &a * a.transpose() + DMatrix::identity(n, n) * 0.3
            };
            let c1 = mk(&mut rng);
            let c2 = mk(&mut rng);
            let m1 = DVector::from_fn(n, |_, _| rng.random::<f64>());
            let m2 = DVector::from_fn(n, |_, _| rng.random::<f64>());
            let kl = kl_gaussian(&m1, &c1, &m2, &c2).unwrap();
            prop_assert!(kl >= -1e-10);
        }
    }
}
