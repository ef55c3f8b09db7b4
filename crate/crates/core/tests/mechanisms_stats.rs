use dpp_core::mechanisms::{
    duchi_bound, duchi_randomize, duchi_variance, gaussian_sigma_raw, input_perturb, laplace_sample, laplace_scale,
    staircase_optimal_gamma, staircase_sample, staircase_variance, warner_flip, InputPerturbation, NoiseSpec,
    PrivacyBudget,
};
use dpp_core::pairgraph::{PairLabel, PairwiseDatum};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N: usize = 1_000_000;

fn moments(draws: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = draws.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Staircase variance by summing the piecewise-constant density directly.
fn staircase_variance_series(epsilon: f64, delta: f64, gamma: f64) -> f64 {
    let b = (-epsilon).exp();
    let (mut mass, mut second) = (0.0, 0.0);
    // ∫ x² over [lo, hi) is (hi³ − lo³)/3
    let cube = |lo: f64, hi: f64| (hi.powi(3) - lo.powi(3)) / 3.0;
    for k in 0..5000 {
        let k = k as f64;
        let h_in = b.powf(k);
        let h_out = b.powf(k + 1.0);
        let (a0, a1, a2) = (k * delta, (k + gamma) * delta, (k + 1.0) * delta);
        mass += h_in * (a1 - a0) + h_out * (a2 - a1);
        second += h_in * cube(a0, a1) + h_out * cube(a1, a2);
    }
    second / mass
}

#[test]
fn laplace_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for b in [1.0, 1.0 / 6.0] {
        let (mean, var) = moments((0..N).map(|_| laplace_sample(b, &mut rng).unwrap()));
        assert!(mean.abs() < 5.0 * (2.0 * b * b / N as f64).sqrt(), "mean {mean}");
        assert!((var / (2.0 * b * b) - 1.0).abs() < 0.05, "variance {var} for b={b}");
    }
    assert!((laplace_scale(1.0 / 30.0, 0.2).unwrap() - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn duchi_is_unbiased_with_stated_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = (1f64.exp() + 1.0) / (1f64.exp() - 1.0);
    assert!((duchi_bound(1.0) - c).abs() < 1e-12);
    assert!((duchi_bound(1.0) - 2.1640).abs() < 1e-4);
    let (mean, var) = moments((0..N).map(|_| duchi_randomize(0.0, 1.0, &mut rng).unwrap()));
    assert!(mean.abs() < 5.0 * c / (N as f64).sqrt());
    assert!((var / duchi_variance(1.0) - 1.0).abs() < 0.05);
    assert!((duchi_variance(1.0) - 4.683).abs() < 1e-3);
    for v in [1.0, -0.4, 0.73] {
        let (mean, _) = moments((0..N).map(|_| duchi_randomize(v, 1.0, &mut rng).unwrap()));
        assert!((mean - v).abs() < 5.0 * c / (N as f64).sqrt(), "mean {mean} for {v}");
    }
    assert!(duchi_randomize(1.5, 1.0, &mut rng).is_err());
}

#[test]
fn duchi_dwarfs_laplace_at_benchmark_settings() {
    let (h, batch, eps): (f64, f64, f64) = (0.5, 50.0, 1.0);
    let laplace = 4.0 * h * h / (batch * batch * eps * eps);
    assert!((laplace - 4e-4).abs() < 1e-15);
    let ratio = duchi_variance(eps) / laplace;
    assert!((ratio / 1.17e4 - 1.0).abs() < 0.01, "ratio {ratio}");
}

#[test]
fn staircase_variance_matches_series_and_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (eps, delta) in [(1.0, 1.0), (0.5, 0.2), (2.0, 3.0)] {
        let optimal = staircase_optimal_gamma(eps).unwrap();
        for gamma in [1.0, optimal, 0.3] {
            let series = staircase_variance_series(eps, delta, gamma);
            let analytic = staircase_variance(eps, delta, gamma).unwrap();
            assert!((analytic / series - 1.0).abs() < 1e-9, "ε={eps} γ={gamma}");
            let (mean, var) = moments((0..N).map(|_| staircase_sample(eps, delta, gamma, &mut rng).unwrap()));
            assert!(mean.abs() < 5.0 * (series / N as f64).sqrt());
            assert!((var / series - 1.0).abs() < 0.10, "ε={eps} γ={gamma}: {var} vs {series}");
        }
    }
}

#[test]
fn staircase_optimal_gamma_minimizes_series_variance() {
    for eps in [0.3, 1.0, 2.5] {
        let best = staircase_optimal_gamma(eps).unwrap();
        let at_best = staircase_variance_series(eps, 1.0, best);
        for k in 1..200 {
            let gamma = k as f64 / 200.0;
            assert!(at_best <= staircase_variance_series(eps, 1.0, gamma) * (1.0 + 1e-9), "ε={eps} γ={gamma}");
        }
    }
}

#[test]
fn warner_keep_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let trials = 100_000;
    let kept = (0..trials)
        .filter(|_| warner_flip(PairLabel::Similar, 3f64.ln(), &mut rng).unwrap() == PairLabel::Similar)
        .count();
    assert!((kept as f64 / trials as f64 - 0.75).abs() < 0.01);
    let fair = (0..trials)
        .filter(|_| warner_flip(PairLabel::Dissimilar, 0.0, &mut rng).unwrap() == PairLabel::Dissimilar)
        .count();
    assert!((fair as f64 / trials as f64 - 0.5).abs() < 0.01);
    assert!((0..1000).all(|_| warner_flip(PairLabel::Similar, f64::INFINITY, &mut rng).unwrap() == PairLabel::Similar));
}

#[test]
fn input_perturbation_flip_rate_and_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pairs: Vec<PairwiseDatum<f64>> = (0..50_000)
        .map(|k| PairwiseDatum::new(k, k + 1, vec![0.1, -0.2], PairLabel::Similar).unwrap())
        .collect();
    let split = InputPerturbation::default();
    let eps = 2.0;
    let noisy = input_perturb(&pairs, eps, &split, &mut rng).unwrap();
    let flipped = noisy.iter().filter(|p| p.y == PairLabel::Dissimilar).count() as f64 / pairs.len() as f64;
    let expected = 1.0 / (1.0 + (eps * (1.0 - split.feature_share)).exp());
    assert!((flipped - expected).abs() < 0.01, "{flipped} vs {expected}");
    // each coordinate: Laplace with scale 2·d / (ε/2)
    let b = split.coordinate_sensitivity * 2.0 / (eps * split.feature_share);
    let (mean, var) = moments(noisy.iter().map(|p| p.delta_x[0] - 0.1));
    assert!(mean.abs() < 0.1);
    assert!((var / (2.0 * b * b) - 1.0).abs() < 0.05);
    let clean = input_perturb(&pairs[..100], f64::INFINITY, &split, &mut rng).unwrap();
    assert_eq!(clean, pairs[..100].to_vec());
}

#[test]
fn budget_split_is_exact() {
    let eps = 0.7;
    let t = 7;
    let budget = PrivacyBudget::new(eps, 0.0, 2, t).unwrap();
    let share = budget.per_epoch_exact().unwrap();
    let exact_eps = BigRational::from_float(eps).unwrap();
    assert_eq!(share.clone() * BigRational::from_integer(BigInt::from(t)), exact_eps);
    let mut acc = budget.accountant();
    for _ in 0..t {
        acc.charge_epoch().unwrap();
    }
    assert_eq!(acc.spent().unwrap(), &exact_eps);
    assert!(acc.charge_epoch().is_err());
    assert!(PrivacyBudget::new(f64::INFINITY, 0.0, 1, 3).unwrap().per_epoch_exact().is_none());
}

#[test]
fn gaussian_sigma_formula() {
    // ln(1.25/δ) = 2 gives σ = 2 at ε = Δ = 1
    let delta = 1.25 * (-2f64).exp();
    assert!((gaussian_sigma_raw(1.0, delta, 1.0).unwrap() - 2.0).abs() < 1e-12);
    let base = gaussian_sigma_raw(1.0, 1e-5, 0.3).unwrap();
    assert!((gaussian_sigma_raw(1.0, 1e-5, 0.6).unwrap() / base - 2.0).abs() < 1e-12);
    assert!((gaussian_sigma_raw(2.0, 1e-5, 0.3).unwrap() / base - 0.5).abs() < 1e-12);
    assert!(gaussian_sigma_raw(1.0, 0.0, 1.0).is_err());
}

#[test]
fn samplers_are_seed_deterministic() {
    let specs = [
        NoiseSpec::Laplace { scale: 0.3 },
        NoiseSpec::Gaussian { sigma: 0.3 },
        NoiseSpec::Staircase { epsilon: 1.0, sensitivity: 0.3, gamma: 0.5 },
        NoiseSpec::Duchi { epsilon: 1.0, bound: 1.0 },
    ];
    for spec in specs {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = vec![0.25f64; 16];
            spec.perturb(&mut v, &mut rng).unwrap();
            v
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }
}

#[test]
fn zero_scale_draws_nothing() {
    let mut a = ChaCha8Rng::seed_from_u64(6);
    let b = ChaCha8Rng::seed_from_u64(6);
    assert_eq!(laplace_sample(0.0, &mut a).unwrap(), 0.0);
    assert_eq!(a, b);
    assert!(laplace_sample(-1.0, &mut a).is_err());
}
