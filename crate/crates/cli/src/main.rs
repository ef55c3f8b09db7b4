//! `dpp`: dataset synthesis, κ analysis, private metric learning and
//! evaluation from the command line.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpp_core::dml::epsilon_serde::parse_epsilon;
use dpp_core::dml::{Batching, MechanismKind, SensitivityMode, TrainConfig};
use dpp_core::eval::Method;
use dpp_core::kappa::KappaStrategy;
use dpp_core::pairgraph::RelationKind;
use dpp_core::scalar::NormMode;

use config::{
    apply_globals, load, serde_name, write_resolved, CompareMechanism, CompareRun, DataSource, DatasetKind, EvalRun,
    KappaRun, PairProtocol, RunSpec, SweepRun, SynthRun, TrainRun,
};
use failure::{CliResult, Failure};

#[derive(Parser, Debug)]
#[command(name = "dpp", version, about = "Pairwise-private distance metric learning")]
struct Cli {
    /// Master seed for every random choice of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON run file: a resolved config from an earlier run, or a bare section.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for all outputs [default: out]
    #[arg(long, global = true)]
    out_dir: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labelled dataset and a pairs file.
    Synth(SynthArgs),
    /// Compute the privacy distance κ of a pairs file.
    AnalyzeKappa(KappaArgs),
    /// Train a metric on a pairs file.
    Train(TrainArgs),
    /// kNN accuracy of a trained metric.
    Evaluate(EvalArgs),
    /// Accuracy against ε for every method, repeated.
    Sweep(SweepArgs),
    /// Objective after one epoch under each gradient perturbation.
    CompareMechanisms(CompareArgs),
}

fn serde_arg<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, String> {
    serde_name(text)
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// toy (2-D strips) or gaussian (multi-dimensional)
    #[arg(long, value_parser = serde_arg::<DatasetKind>)]
    dataset: Option<DatasetKind>,
    #[arg(long)]
    n_per_class: Option<usize>,
    /// toy (acyclic) or sampled (target density)
    #[arg(long, value_parser = serde_arg::<PairProtocol>)]
    protocol: Option<PairProtocol>,
    /// Target |E|/|V| for sampled pairs.
    #[arg(long)]
    density: Option<f64>,
    /// Fraction of individuals eligible for sampled pairs.
    #[arg(long)]
    pool_fraction: Option<f64>,
    /// Equal numbers of similar and dissimilar sampled pairs.
    #[arg(long)]
    balance: Option<bool>,
    /// Dimension of gaussian data.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_parser = serde_arg::<NormMode>)]
    norm_mode: Option<NormMode>,
    #[arg(long)]
    samples_out: Option<String>,
    #[arg(long)]
    pairs_out: Option<String>,
}

impl SynthArgs {
    fn apply(self, run: &mut SynthRun) {
        set(&mut run.dataset, self.dataset);
        set(&mut run.n_per_class, self.n_per_class);
        set(&mut run.protocol, self.protocol);
        set(&mut run.sampling.density, self.density);
        set(&mut run.sampling.pool_fraction, self.pool_fraction);
        set(&mut run.sampling.balance, self.balance);
        set(&mut run.gaussian.dim, self.dim);
        set(&mut run.norm_mode, self.norm_mode);
        set(&mut run.samples_out, self.samples_out);
        set(&mut run.pairs_out, self.pairs_out);
    }
}

#[derive(Args, Debug)]
struct KappaArgs {
    #[arg(long)]
    pairs: Option<String>,
    /// transitive or intransitive
    #[arg(long, value_parser = serde_arg::<RelationKind>)]
    relation: Option<RelationKind>,
    /// exact, upper, node-dp or auto
    #[arg(long, value_parser = serde_arg::<KappaStrategy>)]
    method: Option<KappaStrategy>,
    /// Largest graph searched exactly.
    #[arg(long)]
    exact_limit: Option<usize>,
    #[arg(long)]
    search_budget: Option<u64>,
    #[arg(long)]
    delimiter: Option<char>,
    /// Report the term of every pair.
    #[arg(long)]
    terms: Option<bool>,
    #[arg(long)]
    report_out: Option<String>,
}

impl KappaArgs {
    fn apply(self, run: &mut KappaRun) {
        set(&mut run.pairs, self.pairs);
        set(&mut run.relation, self.relation);
        set(&mut run.method, self.method);
        set(&mut run.exact_limit, self.exact_limit);
        set(&mut run.search_budget, self.search_budget);
        set(&mut run.delimiter, self.delimiter);
        set(&mut run.terms, self.terms);
        set(&mut run.report_out, self.report_out);
    }
}

/// Training hyperparameters shared by the training commands.
#[derive(Args, Debug)]
struct TrainFlags {
    /// Total budget; `inf` disables noise.
    #[arg(long, value_parser = parse_epsilon)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// none, laplace, gaussian, staircase or duchi
    #[arg(long, value_parser = serde_arg::<MechanismKind>)]
    mechanism: Option<MechanismKind>,
    /// basic or reduced
    #[arg(long, value_parser = serde_arg::<SensitivityMode>)]
    sensitivity_mode: Option<SensitivityMode>,
    /// l1 or l2
    #[arg(long, value_parser = serde_arg::<NormMode>)]
    norm_mode: Option<NormMode>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    t_max: Option<usize>,
    /// Clipping threshold h.
    #[arg(long)]
    lipschitz: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    margin_ratio: Option<f64>,
    #[arg(long)]
    d_prime: Option<usize>,
    /// Fixed κ instead of computing it.
    #[arg(long)]
    kappa: Option<usize>,
    /// exact, upper, node-dp or auto
    #[arg(long, value_parser = serde_arg::<KappaStrategy>)]
    kappa_method: Option<KappaStrategy>,
    #[arg(long)]
    exact_limit: Option<usize>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    init_scale: Option<f64>,
    /// shuffled or per_component
    #[arg(long, value_parser = serde_arg::<Batching>)]
    batching: Option<Batching>,
    #[arg(long)]
    staircase_gamma: Option<f64>,
}

impl TrainFlags {
    fn apply(self, cfg: &mut TrainConfig) {
        set(&mut cfg.epsilon, self.epsilon);
        set(&mut cfg.delta, self.delta);
        set(&mut cfg.mechanism, self.mechanism);
        set(&mut cfg.sensitivity_mode, self.sensitivity_mode);
        set(&mut cfg.norm_mode, self.norm_mode);
        set(&mut cfg.batch_size, self.batch_size);
        set(&mut cfg.t_max, self.t_max);
        set(&mut cfg.lipschitz, self.lipschitz);
        set(&mut cfg.margin_ratio, self.margin_ratio);
        set(&mut cfg.kappa_method, self.kappa_method);
        set(&mut cfg.exact_limit, self.exact_limit);
        set(&mut cfg.eta0, self.eta0);
        set(&mut cfg.init_scale, self.init_scale);
        set(&mut cfg.batching, self.batching);
        if self.margin.is_some() {
            cfg.margin = self.margin;
        }
        if self.d_prime.is_some() {
            cfg.d_prime = self.d_prime;
        }
        if self.kappa.is_some() {
            cfg.kappa = self.kappa;
        }
        if self.staircase_gamma.is_some() {
            cfg.staircase_gamma = self.staircase_gamma;
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    pairs: Option<String>,
    #[arg(long, value_parser = serde_arg::<RelationKind>)]
    relation: Option<RelationKind>,
    #[arg(long)]
    delimiter: Option<char>,
    /// Model file name inside the output directory.
    #[arg(long)]
    out: Option<String>,
    /// Trace CSV name inside the output directory.
    #[arg(long)]
    trace: Option<String>,
    #[command(flatten)]
    train: TrainFlags,
}

impl TrainArgs {
    fn apply(self, run: &mut TrainRun) {
        set(&mut run.pairs, self.pairs);
        set(&mut run.relation, self.relation);
        set(&mut run.delimiter, self.delimiter);
        set(&mut run.model_out, self.out);
        set(&mut run.trace_out, self.trace);
        self.train.apply(&mut run.train);
    }
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: Option<String>,
    /// Samples CSV with id and label columns.
    #[arg(long)]
    data: Option<String>,
    /// Pairs file: paired individuals are the reference set.
    #[arg(long, conflicts_with = "test")]
    pairs: Option<String>,
    /// Separate query samples; all of --data is the reference set.
    #[arg(long)]
    test: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    delimiter: Option<char>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    report_out: Option<String>,
}

impl EvalArgs {
    fn apply(self, run: &mut EvalRun) {
        set(&mut run.model, self.model);
        set(&mut run.data, self.data);
        if self.pairs.is_some() {
            run.pairs = self.pairs;
            run.test = None;
        }
        if self.test.is_some() {
            run.test = self.test;
            run.pairs = None;
        }
        set(&mut run.k, self.k);
        set(&mut run.delimiter, self.delimiter);
        set(&mut run.columns.label_column, self.label_column);
        set(&mut run.report_out, self.report_out);
    }
}

/// Benchmark input: files, or synthetic data when both are absent.
#[derive(Args, Debug)]
struct SourceFlags {
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    pairs: Option<String>,
    #[arg(long)]
    delimiter: Option<char>,
    #[arg(long, value_parser = serde_arg::<RelationKind>)]
    relation: Option<RelationKind>,
    /// Synthetic samples per class.
    #[arg(long)]
    n_per_class: Option<usize>,
    /// Synthetic feature dimension.
    #[arg(long)]
    dim: Option<usize>,
}

impl SourceFlags {
    fn apply(self, src: &mut DataSource) {
        if self.data.is_some() {
            src.data = self.data;
        }
        if self.pairs.is_some() {
            src.pairs = self.pairs;
        }
        set(&mut src.delimiter, self.delimiter);
        set(&mut src.relation, self.relation);
        set(&mut src.synthetic.n_per_class, self.n_per_class);
        set(&mut src.synthetic.data.dim, self.dim);
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    source: SourceFlags,
    /// Comma-separated; `inf` allowed.
    #[arg(long, value_delimiter = ',', value_parser = parse_epsilon)]
    epsilons: Option<Vec<f64>>,
    /// Comma-separated: nonpriv, dpp, dpp_s, node_dp, input_per
    #[arg(long, value_delimiter = ',', value_parser = serde_arg::<Method>)]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    train: TrainFlags,
}

impl SweepArgs {
    fn apply(self, run: &mut SweepRun) {
        self.source.apply(&mut run.source);
        set(&mut run.settings.epsilons, self.epsilons);
        set(&mut run.settings.methods, self.methods);
        set(&mut run.settings.repeats, self.repeats);
        set(&mut run.settings.k, self.k);
        self.train.apply(&mut run.settings.train);
    }
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    source: SourceFlags,
    /// Comma-separated: lap, lap_s, scdf, duchi
    #[arg(long, value_delimiter = ',', value_parser = serde_arg::<CompareMechanism>)]
    mechanisms: Option<Vec<CompareMechanism>>,
    #[arg(long)]
    repeats: Option<usize>,
    #[command(flatten)]
    train: TrainFlags,
}

impl CompareArgs {
    fn apply(self, run: &mut CompareRun) {
        self.source.apply(&mut run.source);
        set(&mut run.mechanisms, self.mechanisms);
        set(&mut run.repeats, self.repeats);
        self.train.apply(&mut run.train);
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

struct Globals {
    seed: Option<u64>,
    config: Option<PathBuf>,
    out_dir: Option<String>,
}

/// Merges defaults, config file, flags and globals, then records the result.
fn resolve<R: RunSpec>(g: &Globals, flags: impl FnOnce(&mut R)) -> CliResult<R> {
    let mut run: R = load(g.config.as_deref())?;
    flags(&mut run);
    apply_globals(&mut run, g.seed, g.out_dir.as_deref());
    run.finish()?;
    let out_dir = PathBuf::from(run.out_dir_mut().as_str());
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    write_resolved(&run, &out_dir)?;
    Ok(run)
}

fn configure_threads() -> CliResult<()> {
    let Ok(text) = std::env::var("DPP_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::input(format!("DPP_THREADS must be a positive integer, got '{text}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::runtime(e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let g = Globals {
        seed: cli.seed,
        config: cli.config,
        out_dir: cli.out_dir,
    };
    match cli.command {
        Command::Synth(a) => commands::synth(&resolve(&g, |r| a.apply(r))?),
        Command::AnalyzeKappa(a) => commands::analyze_kappa(&resolve(&g, |r| a.apply(r))?),
        Command::Train(a) => commands::train(&resolve(&g, |r| a.apply(r))?),
        Command::Evaluate(a) => commands::evaluate(&resolve(&g, |r| a.apply(r))?),
        Command::Sweep(a) => commands::sweep(&resolve(&g, |r| a.apply(r))?),
        Command::CompareMechanisms(a) => commands::compare_mechanisms(&resolve(&g, |r| a.apply(r))?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
