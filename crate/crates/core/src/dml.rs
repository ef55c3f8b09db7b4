//! Contrastive-loss metric learning with per-batch gradient perturbation.
//!
//! The model is a transformation `W` (`d′ × d`) inducing the metric
//! `M = WᵀW`. Training runs mini-batch descent on the mean contrastive loss;
//! each row of `W` gets its own clipped, averaged and noised gradient.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kappa::{compute_kappa, ExactConfig, KappaMethod, KappaStrategy};
use crate::mechanisms::{self, NoiseSpec, PrivacyBudget};
use crate::pairgraph::{PairGraph, PairLabel, PairwiseDatum};
use crate::scalar::{dot, l2_norm, NormMode, Scalar};

/// Transformation matrix `W`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", into = "ModelFile<T>", try_from = "ModelFile<T>")]
pub struct MetricModel<T> {
    rows: Vec<Vec<T>>,
    dim: usize,
}

/// On-disk layout of a model.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ModelFile<T> {
    d_prime: usize,
    d: usize,
    w: Vec<T>,
}

impl<T: Scalar> From<MetricModel<T>> for ModelFile<T> {
    fn from(m: MetricModel<T>) -> Self {
        ModelFile {
            d_prime: m.rows.len(),
            d: m.dim,
            w: m.rows.into_iter().flatten().collect(),
        }
    }
}

impl<T: Scalar> TryFrom<ModelFile<T>> for MetricModel<T> {
    type Error = Error;

    fn try_from(f: ModelFile<T>) -> Result<Self> {
        if f.w.len() != f.d_prime * f.d {
            return Err(Error::DimensionMismatch {
                expected: f.d_prime * f.d,
                found: f.w.len(),
            });
        }
        let rows = if f.d == 0 {
            vec![Vec::new(); f.d_prime]
        } else {
            f.w.chunks(f.d).map(<[T]>::to_vec).collect()
        };
        MetricModel::new(rows, f.d)
    }
}

impl<T: Scalar> MetricModel<T> {
    pub fn new(rows: Vec<Vec<T>>, dim: usize) -> Result<Self> {
        if rows.is_empty() || rows.len() > dim {
            return Err(Error::ConfigInvalid(format!(
                "d' = {} must lie in 1..={dim}",
                rows.len()
            )));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Ok(MetricModel { rows, dim })
    }

    pub fn zeros(d_prime: usize, dim: usize) -> Result<Self> {
        Self::new(vec![vec![T::zero(); dim]; d_prime], dim)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let rows = (0..dim)
            .map(|r| (0..dim).map(|c| if r == c { T::one() } else { T::zero() }).collect())
            .collect();
        Self::new(rows, dim)
    }

    /// Entries i.i.d. uniform in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(d_prime: usize, dim: usize, scale: f64, rng: &mut R) -> Result<Self> {
        let rows = (0..d_prime)
            .map(|_| {
                (0..dim)
                    .map(|_| T::lit(scale * (2.0 * rng.random::<f64>() - 1.0)))
                    .collect()
            })
            .collect();
        Self::new(rows, dim)
    }

    pub fn d_prime(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn row(&self, r: usize) -> Result<&[T]> {
        self.rows.get(r).map(Vec::as_slice).ok_or(Error::RowOutOfRange {
            row: r,
            rows: self.rows.len(),
        })
    }

    /// `M = WᵀW` (`d × d`).
    pub fn metric(&self) -> Vec<Vec<T>> {
        let mut m = vec![vec![T::zero(); self.dim]; self.dim];
        for row in &self.rows {
            for (a, &wa) in row.iter().enumerate() {
                for (b, &wb) in row.iter().enumerate() {
                    m[a][b] += wa * wb;
                }
            }
        }
        m
    }

    /// `Wx`.
    pub fn project(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_dim(x.len())?;
        Ok(self.rows.iter().map(|r| dot(r, x)).collect())
    }

    /// `‖WΔx‖₂`.
    pub fn distance(&self, delta_x: &[T]) -> Result<T> {
        Ok(l2_norm(&self.project(delta_x)?))
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                found,
            })
        }
    }
}

/// `½(1−y)D² + ½y·max(0, m−D)²` with `D = ‖WΔx‖₂`.
pub fn contrastive_loss<T: Scalar>(model: &MetricModel<T>, pair: &PairwiseDatum<T>, margin: T) -> Result<T> {
    let d = model.distance(&pair.delta_x)?;
    Ok(loss_from_distance(d, pair.y, margin))
}

fn loss_from_distance<T: Scalar>(d: T, y: PairLabel, margin: T) -> T {
    let half = T::lit(0.5);
    match y {
        PairLabel::Similar => half * d * d,
        PairLabel::Dissimilar => {
            let gap = (margin - d).max(T::zero());
            half * gap * gap
        }
    }
}

/// Scalar factor `c` with `∂ℓ/∂W_r = c·(W_rΔx)·Δx`; `None` when undefined.
fn gradient_coefficient<T: Scalar>(d: T, y: PairLabel, margin: T) -> Option<T> {
    match y {
        PairLabel::Similar => Some(T::one()),
        PairLabel::Dissimilar if d >= margin => Some(T::zero()),
        PairLabel::Dissimilar if d == T::zero() => None,
        PairLabel::Dissimilar => Some((d - margin) / d),
    }
}

/// Gradient of the contrastive loss with respect to row `r` of `W`.
///
/// Fails with [`Error::DegenerateDistance`] for a dissimilar pair projected
/// to zero distance, where the hinge term has no gradient.
pub fn gradient_row<T: Scalar>(model: &MetricModel<T>, pair: &PairwiseDatum<T>, margin: T, r: usize) -> Result<Vec<T>> {
    model.row(r)?;
    let proj = model.project(&pair.delta_x)?;
    let coeff = gradient_coefficient(l2_norm(&proj), pair.y, margin).ok_or(Error::DegenerateDistance)?;
    let scale = coeff * proj[r];
    Ok(pair.delta_x.iter().map(|&x| scale * x).collect())
}

/// `g / max(1, ‖g‖/h)`.
pub fn clip_gradient<T: Scalar>(g: &[T], h: T, norm: NormMode) -> Vec<T> {
    let factor = (norm.norm(g) / h).max(T::one());
    g.iter().map(|&x| x / factor).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityMode {
    /// `2κh/|B|` for every row.
    #[default]
    Basic,
    /// Data-dependent `κ(g′ + g″)/|B|`.
    Reduced,
}

/// Which bound produced a [`SensitivityBound`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Basic,
    Reduced,
    ReducedL2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityBound {
    pub per_row: Vec<f64>,
    pub mode: BoundKind,
}

/// Row sensitivity `2κh/|B|`.
pub fn basic_row_sensitivity(kappa: usize, h: f64, batch_size: usize) -> f64 {
    2.0 * kappa as f64 * h / batch_size as f64
}

pub fn sensitivity_basic(kappa: usize, h: f64, batch_size: usize, d_prime: usize) -> SensitivityBound {
    SensitivityBound {
        per_row: vec![basic_row_sensitivity(kappa, h, batch_size); d_prime],
        mode: BoundKind::Basic,
    }
}

/// Bound `g″` on the clipped gradient norm any replacement pair can have.
pub fn counterpart_bound(w_row_norm: f64, h: f64, margin: f64, d_prime: usize, norm: NormMode) -> f64 {
    let hinge = match norm {
        NormMode::L1 => 2.0 * margin * (d_prime as f64).sqrt(),
        NormMode::L2 => 2.0 * margin,
    };
    h.min((4.0 * w_row_norm).max(hinge))
}

/// Reduced sensitivity `κ(g′ + g″)/|B|` of one row.
///
/// `clipped` holds the batch's clipped gradients for that row; `|B|` is its
/// length and `g′` its largest norm.
pub fn reduced_row_sensitivity<T: Scalar>(
    clipped: &[Vec<T>],
    w_row: &[T],
    h: f64,
    margin: f64,
    d_prime: usize,
    kappa: usize,
    norm: NormMode,
) -> Result<f64> {
    if clipped.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let peak = clipped.iter().map(|g| norm.norm(g).as_f64()).fold(0.0, f64::max);
    let counterpart = counterpart_bound(norm.norm(w_row).as_f64(), h, margin, d_prime, norm);
    Ok(kappa as f64 * (peak + counterpart) / clipped.len() as f64)
}

/// Reduced bound for every row; `clipped[r]` are the batch gradients of row `r`.
pub fn sensitivity_reduced<T: Scalar>(
    clipped: &[Vec<Vec<T>>],
    model: &MetricModel<T>,
    h: f64,
    margin: f64,
    kappa: usize,
    norm: NormMode,
) -> Result<SensitivityBound> {
    if clipped.len() != model.d_prime() {
        return Err(Error::DimensionMismatch {
            expected: model.d_prime(),
            found: clipped.len(),
        });
    }
    let per_row = clipped
        .iter()
        .zip(model.rows())
        .map(|(g, w)| reduced_row_sensitivity(g, w, h, margin, model.d_prime(), kappa, norm))
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityBound {
        per_row,
        mode: match norm {
            NormMode::L1 => BoundKind::Reduced,
            NormMode::L2 => BoundKind::ReducedL2,
        },
    })
}

/// `η₀/√τ`.
pub fn step_size(tau: usize, eta0: f64) -> f64 {
    eta0 / (tau.max(1) as f64).sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    /// Non-private descent.
    None,
    #[default]
    Laplace,
    Gaussian,
    Staircase,
    Duchi,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Batching {
    /// One shuffle of the whole pair list, then consecutive chunks.
    #[default]
    Shuffled,
    /// Pairs grouped by graph component, shuffled within each, then chunked.
    PerComponent,
}

/// Hyperparameters of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Rows of `W`; defaults to the feature dimension.
    pub d_prime: Option<usize>,
    /// Margin `m`; when unset, `margin_ratio` times the mean dissimilar distance.
    pub margin: Option<f64>,
    pub margin_ratio: f64,
    /// Clipping threshold `h`.
    pub lipschitz: f64,
    pub batch_size: usize,
    pub t_max: usize,
    #[serde(with = "epsilon_serde")]
    pub epsilon: f64,
    pub delta: f64,
    pub mechanism: MechanismKind,
    pub sensitivity_mode: SensitivityMode,
    pub norm_mode: NormMode,
    pub seed: u64,
    pub init_scale: f64,
    pub eta0: f64,
    pub batching: Batching,
    /// Staircase width; the variance-optimal value when unset.
    pub staircase_gamma: Option<f64>,
    /// Fixed κ; computed from the graph when unset.
    pub kappa: Option<usize>,
    pub kappa_method: KappaStrategy,
    pub exact_limit: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d_prime: None,
            margin: None,
            margin_ratio: 1.0,
            lipschitz: 0.5,
            batch_size: 30,
            t_max: 10,
            epsilon: 2.0,
            delta: 0.0,
            mechanism: MechanismKind::Laplace,
            sensitivity_mode: SensitivityMode::Basic,
            norm_mode: NormMode::L1,
            seed: 0,
            init_scale: 0.1,
            eta0: 1.0,
            batching: Batching::Shuffled,
            staircase_gamma: None,
            kappa: None,
            kappa_method: KappaStrategy::Auto,
            exact_limit: crate::kappa::DEFAULT_EXACT_LIMIT,
        }
    }
}

/// Serializes an infinite ε as the string `"inf"`; accepts numbers or
/// `"inf"`/`"infinity"` on input.
pub mod epsilon_serde {
    use super::*;

    pub fn serialize<S: Serializer>(eps: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if eps.is_infinite() && *eps > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*eps)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Text(t) => parse_epsilon(&t).map_err(serde::de::Error::custom),
        }
    }

    pub fn parse_epsilon(text: &str) -> std::result::Result<f64, String> {
        match text.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
            other => other.parse().map_err(|_| format!("invalid epsilon '{text}'")),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return bad(format!("lipschitz must be positive, got {}", self.lipschitz));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.t_max == 0 {
            return bad("t_max must be at least 1".into());
        }
        if let Some(m) = self.margin {
            if !(m > 0.0 && m.is_finite()) {
                return bad(format!("margin must be positive, got {m}"));
            }
        }
        if !(self.margin_ratio > 0.0 && self.margin_ratio.is_finite()) {
            return bad(format!("margin_ratio must be positive, got {}", self.margin_ratio));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad(format!("init_scale must be non-negative, got {}", self.init_scale));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return bad(format!("eta0 must be positive, got {}", self.eta0));
        }
        if self.d_prime == Some(0) {
            return bad("d_prime must be at least 1".into());
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::InvalidDelta(self.delta));
        }
        if self.mechanism == MechanismKind::Gaussian && self.delta == 0.0 {
            return Err(Error::DeltaZero);
        }
        if let Some(g) = self.staircase_gamma {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::InvalidGamma(g));
            }
        }
        Ok(())
    }
}

/// Mean norm of `Δx` over dissimilar pairs.
pub fn mean_dissimilar_norm<T: Scalar>(pairs: &[PairwiseDatum<T>], norm: NormMode) -> Option<f64> {
    let (sum, count) = pairs
        .iter()
        .filter(|p| p.y.is_dissimilar())
        .fold((0.0, 0usize), |(s, c), p| (s + norm.norm(&p.delta_x).as_f64(), c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Mean contrastive loss over `pairs`.
pub fn objective<T: Scalar>(model: &MetricModel<T>, pairs: &[PairwiseDatum<T>], margin: T) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for p in pairs {
        total += contrastive_loss(model, p, margin)?.as_f64();
    }
    Ok(total / pairs.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub epoch: usize,
    /// Mean loss over the training pairs after this step.
    pub objective: f64,
    pub eta: f64,
    pub sens_basic: f64,
    pub sens_reduced_min: f64,
    pub sens_reduced_max: f64,
    /// Reduced sensitivity of every row.
    pub sens_reduced: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub initial_objective: f64,
    pub kappa: usize,
    pub kappa_method: Option<KappaMethod>,
    pub margin: f64,
    /// Dissimilar pairs met at zero projected distance (gradient set to zero).
    pub degenerate_events: usize,
    pub rows: Vec<TraceRow>,
}

impl TrainTrace {
    pub fn final_objective(&self) -> f64 {
        self.rows.last().map_or(self.initial_objective, |r| r.objective)
    }
}

/// Splits pair indices into disjoint batches.
///
/// A trailing batch smaller than half the batch size is dropped unless it
/// is the only one.
pub fn make_batches<T: Scalar, R: Rng + ?Sized>(
    pairs: &[PairwiseDatum<T>],
    graph: &PairGraph<T>,
    batch_size: usize,
    batching: Batching,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    match batching {
        Batching::Shuffled => order.shuffle(rng),
        Batching::PerComponent => {
            let (comp, count) = graph.topology().components();
            let mut groups = vec![Vec::new(); count];
            for (k, p) in pairs.iter().enumerate() {
                groups[comp[graph.index_of(&p.i)?]].push(k);
            }
            order.clear();
            for mut g in groups {
                g.shuffle(rng);
                order.extend(g);
            }
        }
    }
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| 2 * b.len() < batch_size) {
        batches.pop();
    }
    Ok(batches)
}

struct RunSetup {
    margin: f64,
    kappa: usize,
    kappa_method: Option<KappaMethod>,
    d_prime: usize,
}

fn setup<T: Scalar>(pairs: &[PairwiseDatum<T>], graph: &PairGraph<T>, config: &TrainConfig) -> Result<RunSetup> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let dim = pairs[0].dim();
    for p in pairs {
        p.validate()?;
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
    }
    let d_prime = config.d_prime.unwrap_or(dim);
    if d_prime > dim {
        return Err(Error::ConfigInvalid(format!("d_prime {d_prime} exceeds dimension {dim}")));
    }
    let margin = match config.margin {
        Some(m) => m,
        None => {
            let mean = mean_dissimilar_norm(pairs, config.norm_mode)
                .ok_or_else(|| Error::ConfigInvalid("no dissimilar pairs to derive the margin from".into()))?;
            config.margin_ratio * mean
        }
    };
    if !(margin > 0.0) {
        return Err(Error::ConfigInvalid(format!("derived margin {margin} is not positive")));
    }
    let (kappa, kappa_method) = match (config.kappa, config.mechanism) {
        (Some(k), _) => (k, None),
        (None, MechanismKind::None) => (0, None),
        (None, _) => {
            let cfg = ExactConfig {
                node_limit: config.exact_limit,
                ..ExactConfig::default()
            };
            let report = compute_kappa(graph, config.kappa_method, &cfg)?;
            log::info!("kappa = {} ({:?})", report.kappa, report.method);
            (report.kappa, Some(report.method))
        }
    };
    Ok(RunSetup {
        margin,
        kappa,
        kappa_method,
        d_prime,
    })
}

/// Private mini-batch training.
///
/// `rng` drives initialization and batching; noise comes from a substream
/// seeded from it, so a run with zero noise follows exactly the same
/// trajectory as the non-private run with the same seed.
pub fn train<T: Scalar, R: Rng + ?Sized>(
    pairs: &[PairwiseDatum<T>],
    graph: &PairGraph<T>,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<(MetricModel<T>, TrainTrace)> {
    let run = setup(pairs, graph, config)?;
    let dim = pairs[0].dim();
    let h = config.lipschitz;
    let margin = T::lit(run.margin);
    let budget = PrivacyBudget::new(config.epsilon, config.delta, run.kappa, config.t_max)?;
    let eps_epoch = budget.per_epoch_epsilon;
    let delta_epoch = budget.per_epoch_delta();
    let noisy = config.mechanism != MechanismKind::None && !budget.is_unbounded();
    let gamma = match config.staircase_gamma {
        Some(g) => g,
        None if noisy => mechanisms::staircase_optimal_gamma(eps_epoch)?,
        None => 1.0,
    };

    let mut model = MetricModel::<T>::random(run.d_prime, dim, config.init_scale, rng)?;
    let batches = make_batches(pairs, graph, config.batch_size, config.batching, rng)?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(rng.random());
    let mut accountant = budget.accountant();

    let mut trace = TrainTrace {
        initial_objective: objective(&model, pairs, margin)?,
        kappa: run.kappa,
        kappa_method: run.kappa_method,
        margin: run.margin,
        degenerate_events: 0,
        rows: Vec::with_capacity(config.t_max * batches.len()),
    };
    let h_t = T::lit(h);
    let mut tau = 0;
    for epoch in 1..=config.t_max {
        accountant.charge_epoch()?;
        for batch in &batches {
            tau += 1;
            let eta = step_size(tau, config.eta0);
            // Per-pair projection and gradient factor under the current W.
            let mut factors = Vec::with_capacity(batch.len());
            for &k in batch {
                let p = &pairs[k];
                let proj = model.project(&p.delta_x)?;
                let coeff = match gradient_coefficient(l2_norm(&proj), p.y, margin) {
                    Some(c) => c,
                    None => {
                        trace.degenerate_events += 1;
                        T::zero()
                    }
                };
                factors.push((k, coeff, proj));
            }
            let size = batch.len();
            let sens_basic = basic_row_sensitivity(run.kappa, h, size);
            let mut updates = Vec::with_capacity(run.d_prime);
            let mut reduced = Vec::with_capacity(run.d_prime);
            for r in 0..run.d_prime {
                let clipped: Vec<Vec<T>> = factors
                    .iter()
                    .map(|(k, coeff, proj)| {
                        let s = *coeff * proj[r];
                        let g: Vec<T> = pairs[*k].delta_x.iter().map(|&x| s * x).collect();
                        clip_gradient(&g, h_t, config.norm_mode)
                    })
                    .collect();
                let sens_reduced = reduced_row_sensitivity(
                    &clipped,
                    &model.rows[r],
                    h,
                    run.margin,
                    run.d_prime,
                    run.kappa,
                    config.norm_mode,
                )?;
                reduced.push(sens_reduced);
                let inv = T::lit(1.0 / size as f64);
                let mut mean = vec![T::zero(); dim];
                for g in &clipped {
                    for (m, &x) in mean.iter_mut().zip(g) {
                        *m += x * inv;
                    }
                }
                if noisy {
                    let sens = match config.sensitivity_mode {
                        SensitivityMode::Basic => sens_basic,
                        SensitivityMode::Reduced => sens_reduced,
                    };
                    noise_spec(config, sens, eps_epoch, delta_epoch, gamma, dim, h)?
                        .perturb(&mut mean, &mut noise_rng)?;
                }
                updates.push(mean);
            }
            let eta_t = T::lit(eta);
            for (row, g) in model.rows.iter_mut().zip(&updates) {
                for (w, &x) in row.iter_mut().zip(g) {
                    *w -= eta_t * x;
                }
            }
            let (lo, hi) = reduced
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
            trace.rows.push(TraceRow {
                iter: tau,
                epoch,
                objective: objective(&model, pairs, margin)?,
                eta,
                sens_basic,
                sens_reduced_min: lo,
                sens_reduced_max: hi,
                sens_reduced: reduced,
            });
        }
    }
    Ok((model, trace))
}

/// [`train`] with a generator seeded from `config.seed`.
pub fn train_seeded<T: Scalar>(
    pairs: &[PairwiseDatum<T>],
    graph: &PairGraph<T>,
    config: &TrainConfig,
) -> Result<(MetricModel<T>, TrainTrace)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    train(pairs, graph, config, &mut rng)
}

fn noise_spec(
    config: &TrainConfig,
    sensitivity: f64,
    eps: f64,
    delta: f64,
    gamma: f64,
    dim: usize,
    h: f64,
) -> Result<NoiseSpec> {
    Ok(match config.mechanism {
        MechanismKind::Laplace => NoiseSpec::Laplace {
            scale: mechanisms::laplace_scale(sensitivity, eps)?,
        },
        MechanismKind::Gaussian => NoiseSpec::Gaussian {
            sigma: mechanisms::gaussian_sigma_raw(eps, delta, sensitivity)?,
        },
        MechanismKind::Staircase => NoiseSpec::Staircase {
            epsilon: eps,
            sensitivity,
            gamma,
        },
        // Coordinates of a clipped mean lie in [-h, h]; the budget is split
        // evenly across them.
        MechanismKind::Duchi => NoiseSpec::Duchi {
            epsilon: eps / dim as f64,
            bound: h,
        },
        MechanismKind::None => unreachable!("noise requested for the non-private mode"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairgraph::RelationKind;

    fn pair(dx: Vec<f64>, y: PairLabel) -> PairwiseDatum<f64> {
        PairwiseDatum::new("a", "b", dx, y).unwrap()
    }

    #[test]
    fn loss_cases() {
        let zero = MetricModel::<f64>::zeros(1, 2).unwrap();
        assert_eq!(contrastive_loss(&zero, &pair(vec![0.3, 0.1], PairLabel::Similar), 1.0).unwrap(), 0.0);
        assert_eq!(contrastive_loss(&zero, &pair(vec![0.3, 0.1], PairLabel::Dissimilar), 2.0).unwrap(), 2.0);
        let id = MetricModel::<f64>::identity(2).unwrap();
        assert_eq!(contrastive_loss(&id, &pair(vec![3.0, 4.0], PairLabel::Dissimilar), 5.0).unwrap(), 0.0);
        assert!(matches!(
            contrastive_loss(&id, &pair(vec![1.0], PairLabel::Similar), 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_cases() {
        let id = MetricModel::<f64>::identity(2).unwrap();
        let far = pair(vec![3.0, 4.0], PairLabel::Dissimilar);
        assert_eq!(gradient_row(&id, &far, 1.0, 0).unwrap(), vec![0.0, 0.0]);
        let zero = MetricModel::<f64>::zeros(2, 2).unwrap();
        assert_eq!(gradient_row(&zero, &pair(vec![1.0, 1.0], PairLabel::Similar), 1.0, 1).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            gradient_row(&zero, &pair(vec![1.0, 1.0], PairLabel::Dissimilar), 1.0, 0),
            Err(Error::DegenerateDistance)
        ));
        assert!(matches!(
            gradient_row(&id, &far, 1.0, 2),
            Err(Error::RowOutOfRange { row: 2, rows: 2 })
        ));
        // y = 0, identity: g_r = Δx_r·Δx
        assert_eq!(gradient_row(&id, &pair(vec![0.5, 2.0], PairLabel::Similar), 1.0, 1).unwrap(), vec![1.0, 4.0]);
    }

    #[test]
    fn clipping() {
        let g = [0.1f64, -0.15];
        assert_eq!(clip_gradient(&g, 0.5, NormMode::L1), g.to_vec());
        let big = [0.6f64, -0.4];
        let c = clip_gradient(&big, 0.5, NormMode::L1);
        assert!((NormMode::L1.norm(&c) - 0.5).abs() < 1e-15);
        assert!((c[0] - 0.3).abs() < 1e-15);
        assert_eq!(clip_gradient(&[0.0f64, 0.0], 0.5, NormMode::L2), vec![0.0, 0.0]);
    }

    #[test]
    fn sensitivity_cases() {
        let b = sensitivity_basic(1, 0.5, 30, 2);
        assert!((b.per_row[0] - 1.0 / 30.0).abs() < 1e-15);
        assert_eq!(sensitivity_basic(2, 0.5, 30, 1).per_row[0], 2.0 * b.per_row[0]);
        // all zero: κ·min{h, 2m√d′}/|B|
        let zeros = vec![vec![0.0f64; 3]; 4];
        let s = reduced_row_sensitivity(&zeros, &[0.0; 3], 10.0, 1.0, 2, 1, NormMode::L1).unwrap();
        assert!((s - 2.0 * 2f64.sqrt() / 4.0).abs() < 1e-15);
        // saturation reproduces the basic bound
        let peak = vec![vec![0.5f64, 0.0]; 5];
        let s = reduced_row_sensitivity(&peak, &[1.0, 0.0], 0.5, 0.01, 1, 3, NormMode::L1).unwrap();
        assert!((s - basic_row_sensitivity(3, 0.5, 5)).abs() < 1e-15);
        assert!(matches!(
            reduced_row_sensitivity::<f64>(&[], &[1.0], 0.5, 1.0, 1, 1, NormMode::L1),
            Err(Error::EmptyBatch)
        ));
        assert_eq!(counterpart_bound(0.0, 10.0, 1.0, 4, NormMode::L2), 2.0);
    }

    #[test]
    fn step_sizes() {
        assert_eq!(step_size(1, 1.0), 1.0);
        assert_eq!(step_size(4, 1.0), 0.5);
        assert!((step_size(100, 1.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn model_roundtrip_and_metric() {
        let m = MetricModel::<f64>::new(vec![vec![1.0, 2.0, 0.0], vec![0.0, 1.0, -1.0]], 3).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"d_prime":2,"d":3,"w":[1.0,2.0,0.0,0.0,1.0,-1.0]}"#);
        let back: MetricModel<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        let metric = m.metric();
        assert_eq!(metric[1][1], 5.0);
        assert_eq!(metric[1][2], -1.0);
        assert!(MetricModel::<f64>::new(vec![vec![0.0]; 2], 1).is_err());
    }

    #[test]
    fn config_serde() {
        let c: TrainConfig = serde_json::from_str(r#"{"epsilon":"inf","mechanism":"staircase"}"#).unwrap();
        assert!(c.epsilon.is_infinite());
        assert_eq!(c.mechanism, MechanismKind::Staircase);
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains(r#""epsilon":"inf""#));
        assert!(serde_json::from_str::<TrainConfig>(r#"{"bogus":1}"#).is_err());
        let g = TrainConfig {
            mechanism: MechanismKind::Gaussian,
            ..TrainConfig::default()
        };
        assert!(matches!(g.validate(), Err(Error::DeltaZero)));
    }

    #[test]
    fn batches_partition() {
        let pairs: Vec<_> = (0..10)
            .map(|k| PairwiseDatum::new(k, k + 100, vec![0.0f64], PairLabel::Similar).unwrap())
            .collect();
        let g = PairGraph::build(pairs.clone(), RelationKind::Transitive).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // 10 = 4 + 4 + 2: last is exactly half, kept
        let b = make_batches(&pairs, &g, 4, Batching::Shuffled, &mut rng).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        // 10 = 3·3 + 1: last dropped
        let b = make_batches(&pairs, &g, 3, Batching::PerComponent, &mut rng).unwrap();
        assert_eq!(b.len(), 3);
        let b = make_batches(&pairs, &g, 30, Batching::Shuffled, &mut rng).unwrap();
        assert_eq!(b.len(), 1);
    }
}
