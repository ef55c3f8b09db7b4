//! Noise mechanisms and randomizers.
//!
//! Every sampler takes an explicit RNG so runs are reproducible from a seed.
//! An infinite ε is accepted wherever a budget is consumed and means "no
//! noise": the sampler returns zero (or the input) without drawing.

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand_distr::{Distribution, Geometric, OpenClosed01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairgraph::{PairLabel, PairwiseDatum};
use crate::scalar::Scalar;

/// Privacy budget of one training run.
///
/// `epsilon` is kept as an exact rational next to its `f64` value, so the
/// per-epoch share times `t_max` gives back `epsilon` with no rounding.
#[derive(Clone, Debug, PartialEq)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
    pub kappa: usize,
    pub t_max: usize,
    pub per_epoch_epsilon: f64,
    exact_epsilon: Option<BigRational>,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64, kappa: usize, t_max: usize) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidDelta(delta));
        }
        if t_max == 0 {
            return Err(Error::ConfigInvalid("t_max must be at least 1".into()));
        }
        let exact_epsilon = BigRational::from_float(epsilon);
        let per_epoch_epsilon = match &exact_epsilon {
            Some(e) => (e / BigRational::from_integer(t_max.into()))
                .to_f64()
                .unwrap_or(f64::INFINITY),
            None => f64::INFINITY,
        };
        Ok(PrivacyBudget {
            epsilon,
            delta,
            kappa,
            t_max,
            per_epoch_epsilon,
            exact_epsilon,
        })
    }

    pub fn is_unbounded(&self) -> bool {
        self.epsilon.is_infinite()
    }

    /// Exact per-epoch share `ε / t_max`; `None` when ε is infinite.
    pub fn per_epoch_exact(&self) -> Option<BigRational> {
        self.exact_epsilon
            .as_ref()
            .map(|e| e / BigRational::from_integer(self.t_max.into()))
    }

    pub fn epsilon_exact(&self) -> Option<&BigRational> {
        self.exact_epsilon.as_ref()
    }

    /// Per-epoch δ share under basic composition.
    pub fn per_epoch_delta(&self) -> f64 {
        self.delta / self.t_max as f64
    }

    pub fn accountant(&self) -> EpochAccountant {
        EpochAccountant {
            share: self.per_epoch_exact(),
            spent: BigRational::zero(),
            epochs: 0,
            limit: self.t_max,
        }
    }
}

/// Tracks budget spent across epochs. Batches inside an epoch are disjoint,
/// so each epoch costs one share regardless of its batch count.
#[derive(Clone, Debug)]
pub struct EpochAccountant {
    share: Option<BigRational>,
    spent: BigRational,
    epochs: usize,
    limit: usize,
}

impl EpochAccountant {
    pub fn charge_epoch(&mut self) -> Result<()> {
        if self.epochs == self.limit {
            return Err(Error::ConfigInvalid(format!("budget covers only {} epochs", self.limit)));
        }
        self.epochs += 1;
        if let Some(share) = &self.share {
            self.spent += share;
        }
        Ok(())
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    /// Exact ε spent so far; `None` for an unbounded budget.
    pub fn spent(&self) -> Option<&BigRational> {
        self.share.as_ref().map(|_| &self.spent)
    }
}

/// A calibrated noise source applied coordinate-wise to a vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Additive `Lap(0, scale)`.
    Laplace { scale: f64 },
    /// Additive `N(0, sigma²)`.
    Gaussian { sigma: f64 },
    /// Additive staircase noise for budget `epsilon` and `sensitivity`.
    Staircase { epsilon: f64, sensitivity: f64, gamma: f64 },
    /// Duchi one-bit randomizer on values in `[-bound, bound]`.
    Duchi { epsilon: f64, bound: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| if x > 0.0 && x.is_finite() { Ok(()) } else { Err(Error::NonPositiveScale(x)) };
        // a zero additive scale is the noiseless limit
        let additive = |x: f64| if x >= 0.0 && x.is_finite() { Ok(()) } else { Err(Error::NonPositiveScale(x)) };
        match *self {
            NoiseSpec::Laplace { scale } => additive(scale),
            NoiseSpec::Gaussian { sigma } => additive(sigma),
            NoiseSpec::Staircase {
                epsilon,
                sensitivity,
                gamma,
            } => {
                check_epsilon(epsilon)?;
                positive(sensitivity)?;
                check_gamma(gamma)
            }
            NoiseSpec::Duchi { epsilon, bound } => {
                check_epsilon(epsilon)?;
                positive(bound)
            }
        }
    }

    /// Perturbs `v` in place, one independent draw per coordinate.
    pub fn perturb<T: Scalar, R: Rng + ?Sized>(&self, v: &mut [T], rng: &mut R) -> Result<()> {
        self.validate()?;
        match *self {
            NoiseSpec::Laplace { scale } => {
                for x in v.iter_mut() {
                    *x += T::lit(laplace_sample(scale, rng)?);
                }
            }
            NoiseSpec::Gaussian { sigma } => {
                for x in v.iter_mut() {
                    *x += T::lit(gaussian_sample(sigma, rng)?);
                }
            }
            NoiseSpec::Staircase {
                epsilon,
                sensitivity,
                gamma,
            } => {
                for x in v.iter_mut() {
                    *x += T::lit(staircase_sample(epsilon, sensitivity, gamma, rng)?);
                }
            }
            NoiseSpec::Duchi { epsilon, bound } => {
                for x in v.iter_mut() {
                    let scaled = (x.as_f64() / bound).clamp(-1.0, 1.0);
                    *x = T::lit(duchi_randomize(scaled, epsilon, rng)? * bound);
                }
            }
        }
        Ok(())
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        Err(Error::InvalidEpsilon(epsilon))
    } else {
        Ok(())
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidGamma(gamma))
    }
}

/// Zero-mean Laplace variate with scale `b` (variance `2b²`).
///
/// A scale of `0` (from an infinite budget) returns `0` without drawing.
pub fn laplace_sample<R: Rng + ?Sized>(b: f64, rng: &mut R) -> Result<f64> {
    if b == 0.0 {
        return Ok(0.0);
    }
    if !(b > 0.0) || b.is_infinite() {
        return Err(Error::NonPositiveScale(b));
    }
    let u: f64 = rng.sample(OpenClosed01);
    let magnitude = -b * u.ln();
    Ok(if rng.random::<bool>() { magnitude } else { -magnitude })
}

/// Laplace scale `Δ / ε`.
pub fn laplace_scale(sensitivity: f64, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if !(sensitivity >= 0.0) {
        return Err(Error::NonPositiveScale(sensitivity));
    }
    Ok(sensitivity / epsilon)
}

pub fn gaussian_sample<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> Result<f64> {
    if sigma == 0.0 {
        return Ok(0.0);
    }
    if !(sigma > 0.0) || sigma.is_infinite() {
        return Err(Error::NonPositiveScale(sigma));
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(sigma * z)
}

/// Smallest σ with `σ ≥ √(2 ln(1.25/δ)) Δ / ε`.
pub fn gaussian_sigma_raw(epsilon: f64, delta: f64, sensitivity: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if delta == 0.0 {
        return Err(Error::DeltaZero);
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidDelta(delta));
    }
    if !(sensitivity > 0.0) {
        return Err(Error::NonPositiveScale(sensitivity));
    }
    Ok((2.0 * (1.25 / delta).ln()).sqrt() * sensitivity / epsilon)
}

/// Gaussian σ for the whole budget.
pub fn gaussian_sigma(budget: &PrivacyBudget, sensitivity: f64) -> Result<f64> {
    gaussian_sigma_raw(budget.epsilon, budget.delta, sensitivity)
}

/// Variance-minimizing staircase width for budget `epsilon`.
pub fn staircase_optimal_gamma(epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if epsilon.is_infinite() {
        return Ok(1.0);
    }
    let b = (-epsilon).exp();
    let one_b = 1.0 - b;
    let inner = b - 2.0 * b * b + 2.0 * b.powi(4) - b.powi(5);
    let gamma = -b / one_b + inner.cbrt() / (2f64.cbrt() * one_b * one_b);
    Ok(gamma.clamp(f64::MIN_POSITIVE, 1.0))
}

fn staircase_moments(epsilon: f64, gamma: f64) -> (f64, f64, f64) {
    let b = (-epsilon).exp();
    let p0 = gamma / (gamma + (1.0 - gamma) * b);
    let mean_g = b / (1.0 - b);
    let mean_g2 = b * (1.0 + b) / ((1.0 - b) * (1.0 - b));
    let inner = mean_g2 + gamma * mean_g + gamma * gamma / 3.0;
    let outer = mean_g2
        + 2.0 * mean_g * (gamma + (1.0 - gamma) / 2.0)
        + gamma * gamma
        + gamma * (1.0 - gamma)
        + (1.0 - gamma) * (1.0 - gamma) / 3.0;
    (p0, inner, outer)
}

/// Analytic variance of the staircase distribution.
pub fn staircase_variance(epsilon: f64, sensitivity: f64, gamma: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_gamma(gamma)?;
    if epsilon.is_infinite() {
        return Ok(0.0);
    }
    let (p0, inner, outer) = staircase_moments(epsilon, gamma);
    Ok(sensitivity * sensitivity * (p0 * inner + (1.0 - p0) * outer))
}

/// Zero-mean staircase variate.
///
/// The density is flat on steps of width `γΔ` and `(1−γ)Δ` alternating in
/// height by `e^{−ε}`; sampling composes a sign, a geometric step index, a
/// step selector and a uniform offset within the step.
pub fn staircase_sample<R: Rng + ?Sized>(epsilon: f64, sensitivity: f64, gamma: f64, rng: &mut R) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_gamma(gamma)?;
    if !(sensitivity > 0.0) {
        return Err(Error::NonPositiveScale(sensitivity));
    }
    if epsilon.is_infinite() {
        return Ok(0.0);
    }
    let b = (-epsilon).exp();
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let g = Geometric::new(1.0 - b)
        .map_err(|_| Error::InvalidEpsilon(epsilon))?
        .sample(rng) as f64;
    let p0 = gamma / (gamma + (1.0 - gamma) * b);
    let u: f64 = rng.random();
    let step = if rng.random::<f64>() < p0 {
        g + gamma * u
    } else {
        g + gamma + (1.0 - gamma) * u
    };
    Ok(sign * sensitivity * step)
}

/// Output magnitude `(e^ε+1)/(e^ε−1)` of the Duchi randomizer.
pub fn duchi_bound(epsilon: f64) -> f64 {
    if epsilon.is_infinite() {
        1.0
    } else {
        // expm1 keeps precision for small ε
        (epsilon.exp_m1() + 2.0) / epsilon.exp_m1()
    }
}

/// Variance of the Duchi output at input 0.
pub fn duchi_variance(epsilon: f64) -> f64 {
    let c = duchi_bound(epsilon);
    c * c
}

/// Unbiased one-bit randomizer: returns `±C` with `E[out] = value`.
pub fn duchi_randomize<R: Rng + ?Sized>(value: f64, epsilon: f64, rng: &mut R) -> Result<f64> {
    check_epsilon(epsilon)?;
    if !(-1.0..=1.0).contains(&value) {
        return Err(Error::OutOfRange(value));
    }
    if epsilon.is_infinite() {
        return Ok(value);
    }
    let c = duchi_bound(epsilon);
    let p_plus = 0.5 + value / (2.0 * c);
    Ok(if rng.random::<f64>() < p_plus { c } else { -c })
}

/// Probability that randomized response keeps the true label.
pub fn warner_keep_probability(epsilon: f64) -> f64 {
    1.0 / (1.0 + (-epsilon).exp())
}

/// Randomized response on a binary label (ε = 0 is a fair coin).
pub fn warner_flip<R: Rng + ?Sized>(label: PairLabel, epsilon: f64, rng: &mut R) -> Result<PairLabel> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if epsilon.is_infinite() {
        return Ok(label);
    }
    Ok(if rng.random_bool(warner_keep_probability(epsilon)) {
        label
    } else {
        label.flipped()
    })
}

/// Budget split used by [`input_perturb`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputPerturbation {
    /// Fraction of ε spent on the feature differences; the rest goes to labels.
    pub feature_share: f64,
    /// Per-coordinate sensitivity of a feature difference.
    pub coordinate_sensitivity: f64,
}

impl Default for InputPerturbation {
    fn default() -> Self {
        InputPerturbation {
            feature_share: 0.5,
            coordinate_sensitivity: 2.0,
        }
    }
}

/// Input perturbation baseline: Laplace noise on every `Δx` coordinate and
/// randomized response on every label.
///
/// The feature share of ε is split evenly over the `d` coordinates.
pub fn input_perturb<T: Scalar, R: Rng + ?Sized>(
    pairs: &[PairwiseDatum<T>],
    epsilon: f64,
    split: &InputPerturbation,
    rng: &mut R,
) -> Result<Vec<PairwiseDatum<T>>> {
    check_epsilon(epsilon)?;
    if !(split.feature_share > 0.0 && split.feature_share < 1.0) {
        return Err(Error::ConfigInvalid("feature_share must lie in (0, 1)".into()));
    }
    let feature_eps = epsilon * split.feature_share;
    let label_eps = epsilon - feature_eps;
    pairs
        .iter()
        .map(|p| {
            let d = p.delta_x.len().max(1) as f64;
            let scale = if epsilon.is_infinite() {
                0.0
            } else {
                split.coordinate_sensitivity * d / feature_eps
            };
            let mut out = p.clone();
            for x in out.delta_x.iter_mut() {
                *x += T::lit(laplace_sample(scale, rng)?);
            }
            let label_eps = if epsilon.is_infinite() { f64::INFINITY } else { label_eps };
            out.y = warner_flip(p.y, label_eps, rng)?;
            Ok(out)
        })
        .collect()
}
