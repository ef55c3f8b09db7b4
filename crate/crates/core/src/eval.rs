//! kNN utility of a learned metric and accuracy-vs-ε experiments.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{normalize, sample_pairs, synth_gaussian_benchmark, GaussianBenchmark, PairSampling, SampleSet};
use crate::dml::{self, MechanismKind, MetricModel, SensitivityMode, TrainConfig};
use crate::error::{Error, Result};
use crate::kappa::{compute_kappa, kappa_node_dp, ExactConfig, KappaReport};
use crate::mechanisms::{input_perturb, InputPerturbation};
use crate::pairgraph::{PairGraph, PairwiseDatum, RelationKind};
use crate::scalar::{NormMode, Scalar};

/// Rows of `X` mapped through `W` (`n × d′`).
pub fn project<T: Scalar>(model: &MetricModel<T>, x: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    x.iter().map(|row| model.project(row)).collect()
}

fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&p, &q)| (p - q) * (p - q)).sum()
}

/// Majority label among the `k` nearest training points, by Euclidean
/// distance in the given coordinates.
///
/// Equal distances go to the lower training index. A tied vote goes to the
/// tied label that appears first in distance order.
pub fn knn_predict<T: Scalar>(train: &[Vec<T>], train_labels: &[u32], query: &[T], k: usize) -> u32 {
    let mut order: Vec<(T, usize)> = train
        .iter()
        .enumerate()
        .map(|(idx, p)| (squared_distance(p, query), idx))
        .collect();
    let cmp = |a: &(T, usize), b: &(T, usize)| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1));
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(cmp);
    let mut votes: Vec<(u32, usize)> = Vec::new();
    for &(_, idx) in &order {
        let label = train_labels[idx];
        match votes.iter_mut().find(|(l, _)| *l == label) {
            Some(v) => v.1 += 1,
            None => votes.push((label, 1)),
        }
    }
    // `votes` is in first-appearance order, so the first maximum is the
    // tied label with the nearest member
    let best = votes.iter().map(|v| v.1).max().unwrap_or(0);
    votes.iter().find(|v| v.1 == best).map_or(0, |v| v.0)
}

/// kNN accuracy on points that are already in the comparison space.
pub fn knn_accuracy_points<T: Scalar>(
    train: &[Vec<T>],
    train_labels: &[u32],
    test: &[Vec<T>],
    test_labels: &[u32],
    k: usize,
) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    if k == 0 || k > train.len() {
        return Err(Error::ConfigInvalid(format!("k = {k} must lie in 1..={}", train.len())));
    }
    if train_labels.len() != train.len() {
        return Err(Error::DimensionMismatch {
            expected: train.len(),
            found: train_labels.len(),
        });
    }
    if test_labels.len() != test.len() {
        return Err(Error::DimensionMismatch {
            expected: test.len(),
            found: test_labels.len(),
        });
    }
    if test.is_empty() {
        return Err(Error::ConfigInvalid("empty test set".into()));
    }
    let correct = test
        .iter()
        .zip(test_labels)
        .filter(|(q, &label)| knn_predict(train, train_labels, q, k) == label)
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// kNN accuracy after projecting both sets through `model`.
pub fn knn_accuracy<T: Scalar>(
    model: &MetricModel<T>,
    train_x: &[Vec<T>],
    train_labels: &[u32],
    test_x: &[Vec<T>],
    test_labels: &[u32],
    k: usize,
) -> Result<f64> {
    let train = project(model, train_x)?;
    let test = project(model, test_x)?;
    knn_accuracy_points(&train, train_labels, &test, test_labels, k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[serde(rename = "nonpriv")]
    NonPriv,
    Dpp,
    DppS,
    NodeDp,
    InputPer,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::NonPriv, Method::Dpp, Method::DppS, Method::NodeDp, Method::InputPer];

    pub fn name(self) -> &'static str {
        match self {
            Method::NonPriv => "nonpriv",
            Method::Dpp => "dpp",
            Method::DppS => "dpp_s",
            Method::NodeDp => "node_dp",
            Method::InputPer => "input_per",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: Method,
    #[serde(with = "crate::dml::epsilon_serde")]
    pub epsilon: f64,
    pub runs: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub per_run: Vec<f64>,
}

impl ExperimentReport {
    pub fn from_runs(method: Method, epsilon: f64, per_run: Vec<f64>) -> Self {
        let n = per_run.len();
        let mean = per_run.iter().sum::<f64>() / n.max(1) as f64;
        let var = if n > 1 {
            per_run.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        ExperimentReport {
            method,
            epsilon,
            runs: n,
            mean_accuracy: mean,
            std_accuracy: var.sqrt(),
            per_run,
        }
    }
}

/// A paired dataset ready for repeated training and evaluation.
///
/// Individuals that appear in a pair form the kNN reference set; all others
/// are the test set.
#[derive(Clone, Debug)]
pub struct Benchmark<T> {
    pub samples: SampleSet<T>,
    pub pairs: Vec<PairwiseDatum<T>>,
    pub graph: PairGraph<T>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl<T: Scalar> Benchmark<T> {
    pub fn new(samples: SampleSet<T>, pairs: Vec<PairwiseDatum<T>>, relation: RelationKind) -> Result<Self> {
        let graph = PairGraph::build(pairs.clone(), relation)?;
        let paired: HashSet<_> = graph.node_ids().iter().collect();
        let (train_idx, test_idx) = (0..samples.len()).partition(|&k| paired.contains(&samples.ids[k]));
        Ok(Benchmark {
            samples,
            pairs,
            graph,
            train_idx,
            test_idx,
        })
    }

    fn split(&self, idx: &[usize]) -> (Vec<Vec<T>>, Vec<u32>) {
        (
            idx.iter().map(|&k| self.samples.x[k].clone()).collect(),
            idx.iter().map(|&k| self.samples.labels[k]).collect(),
        )
    }

    pub fn evaluate(&self, model: &MetricModel<T>, k: usize) -> Result<f64> {
        let (tx, ty) = self.split(&self.train_idx);
        let (qx, qy) = self.split(&self.test_idx);
        knn_accuracy(model, &tx, &ty, &qx, &qy, k)
    }

    /// kNN accuracy in the raw feature space.
    pub fn evaluate_raw(&self, k: usize) -> Result<f64> {
        let (tx, ty) = self.split(&self.train_idx);
        let (qx, qy) = self.split(&self.test_idx);
        knn_accuracy_points(&tx, &ty, &qx, &qy, k)
    }
}

/// Grid of an accuracy-vs-ε experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    pub methods: Vec<Method>,
    #[serde(with = "epsilon_list")]
    pub epsilons: Vec<f64>,
    pub repeats: usize,
    pub k: usize,
    pub input_perturbation: InputPerturbation,
    pub train: TrainConfig,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            methods: Method::ALL.to_vec(),
            epsilons: vec![1.0, 2.0, 3.0, 4.0],
            repeats: 20,
            k: 5,
            input_perturbation: InputPerturbation::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentSettings {
    /// Settings for the synthetic ε sweep: batches of 50, three epochs, and
    /// exact κ on graphs of up to a thousand nodes.
    pub fn benchmark() -> Self {
        ExperimentSettings {
            train: TrainConfig {
                batch_size: 50,
                t_max: 3,
                exact_limit: 1000,
                ..TrainConfig::default()
            },
            ..ExperimentSettings::default()
        }
    }
}

/// Recipe for a synthetic benchmark: multi-dimensional two-class data,
/// normalized, with pairs sampled over part of the individuals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticBenchmark {
    pub n_per_class: usize,
    pub data: GaussianBenchmark,
    pub sampling: PairSampling,
    pub norm_mode: NormMode,
}

impl Default for SyntheticBenchmark {
    fn default() -> Self {
        SyntheticBenchmark {
            n_per_class: 500,
            data: GaussianBenchmark::default(),
            sampling: PairSampling {
                pool_fraction: 0.5,
                ..PairSampling::default()
            },
            norm_mode: NormMode::L1,
        }
    }
}

impl SyntheticBenchmark {
    /// Samples use `seed`, pairs use `seed + 1`.
    pub fn samples<T: Scalar>(&self, seed: u64) -> Result<SampleSet<T>> {
        Ok(normalize(&synth_gaussian_benchmark(self.n_per_class, &self.data, seed)?, self.norm_mode))
    }

    pub fn build<T: Scalar>(&self, seed: u64) -> Result<Benchmark<T>> {
        let samples = self.samples(seed)?;
        let pairs = sample_pairs(&samples, &self.sampling, seed.wrapping_add(1))?;
        Benchmark::new(samples, pairs, RelationKind::Transitive)
    }
}

mod epsilon_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Eps(#[serde(with = "crate::dml::epsilon_serde")] f64);

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&e| Eps(e)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Eps>::deserialize(d)?.into_iter().map(|e| e.0).collect())
    }
}

/// One training run of a method; returns the kNN accuracy.
pub fn run_once<T: Scalar>(
    bench: &Benchmark<T>,
    method: Method,
    epsilon: f64,
    seed: u64,
    settings: &ExperimentSettings,
    kappa: &KappaChoice,
) -> Result<f64> {
    let mut cfg = settings.train.clone();
    cfg.seed = seed;
    cfg.epsilon = epsilon;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perturbed;
    let pairs: &[PairwiseDatum<T>] = match method {
        Method::NonPriv => {
            cfg.mechanism = MechanismKind::None;
            &bench.pairs
        }
        Method::Dpp | Method::DppS | Method::NodeDp => {
            if cfg.mechanism == MechanismKind::None {
                cfg.mechanism = MechanismKind::Laplace;
            }
            cfg.sensitivity_mode = if method == Method::DppS {
                SensitivityMode::Reduced
            } else {
                SensitivityMode::Basic
            };
            cfg.kappa = Some(if method == Method::NodeDp { kappa.node_dp } else { kappa.dpp });
            &bench.pairs
        }
        Method::InputPer => {
            cfg.mechanism = MechanismKind::None;
            // the input noise uses its own stream so training sees the same
            // initialization and batching as the other methods
            let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            perturbed = input_perturb(&bench.pairs, epsilon, &settings.input_perturbation, &mut noise_rng)?;
            &perturbed
        }
    };
    let (model, _) = dml::train(pairs, &bench.graph, &cfg, &mut rng)?;
    bench.evaluate(&model, settings.k)
}

/// κ values used by the private methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaChoice {
    pub dpp: usize,
    pub node_dp: usize,
    pub report: KappaReport,
}

impl KappaChoice {
    pub fn for_benchmark<T: Scalar>(bench: &Benchmark<T>, cfg: &TrainConfig) -> Result<Self> {
        let report = match cfg.kappa {
            Some(k) => KappaReport {
                kappa: k,
                method: crate::kappa::KappaMethod::UpperBound,
                witness_pair: None,
                witness_node: None,
                per_pair_terms: None,
            },
            None => compute_kappa(
                &bench.graph,
                cfg.kappa_method,
                &ExactConfig {
                    node_limit: cfg.exact_limit,
                    ..ExactConfig::default()
                },
            )?,
        };
        Ok(KappaChoice {
            dpp: report.kappa,
            node_dp: kappa_node_dp(&bench.graph).kappa,
            report,
        })
    }
}

/// Trains and evaluates every `(method, ε, run)` cell.
///
/// Run `r` uses seed `train.seed + r` for every method and ε. Cells run in
/// parallel; results come back in grid order, so reports do not depend on
/// scheduling. The non-private method ignores ε but is reported per ε.
pub fn run_experiment<T: Scalar>(bench: &Benchmark<T>, settings: &ExperimentSettings) -> Result<Vec<ExperimentReport>> {
    if settings.repeats == 0 {
        return Err(Error::ConfigInvalid("repeats must be at least 1".into()));
    }
    if settings.epsilons.is_empty() || settings.methods.is_empty() {
        return Err(Error::ConfigInvalid("need at least one method and one epsilon".into()));
    }
    let kappa = KappaChoice::for_benchmark(bench, &settings.train)?;
    let cells: Vec<(Method, f64, usize)> = settings
        .methods
        .iter()
        .flat_map(|&m| {
            settings
                .epsilons
                .iter()
                .flat_map(move |&e| (0..settings.repeats).map(move |r| (m, e, r)))
        })
        .collect();
    let accs = cells
        .par_iter()
        .map(|&(m, e, r)| run_once(bench, m, e, settings.train.seed.wrapping_add(r as u64), settings, &kappa))
        .collect::<Result<Vec<f64>>>()?;
    Ok(cells
        .chunks(settings.repeats)
        .zip(accs.chunks(settings.repeats))
        .map(|(c, a)| ExperimentReport::from_runs(c[0].0, c[0].1, a.to_vec()))
        .collect())
}
