use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use dpp_core::dataio::{
    load_csv, load_pairs, normalize, sample_pairs, save_pairs, save_samples, synth_gaussian_benchmark,
    synth_two_gaussians, toy_pairs,
};
use dpp_core::dml::{epsilon_serde, train_seeded, MechanismKind, MetricModel, SensitivityMode, TrainTrace};
use dpp_core::eval::{knn_accuracy, knn_accuracy_points, run_experiment, Benchmark, KappaChoice};
use dpp_core::kappa::{compute_kappa, ExactConfig};
use dpp_core::pairgraph::{NodeId, PairGraph, RelationKind};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{
    out_path, write_json, CompareMechanism, CompareRun, DataSource, DatasetKind, EvalRun, KappaRun, PairProtocol,
    SweepRun, SynthRun, TrainRun,
};
use crate::failure::{CliResult, Failure};

fn print_json<S: Serialize>(value: &S) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
}

fn fmt_epsilon(e: f64) -> String {
    if e.is_infinite() {
        "inf".into()
    } else {
        e.to_string()
    }
}

pub fn synth(run: &SynthRun) -> CliResult<()> {
    let raw = match run.dataset {
        DatasetKind::Toy => synth_two_gaussians::<f64>(run.n_per_class, run.seed)?,
        DatasetKind::Gaussian => synth_gaussian_benchmark::<f64>(run.n_per_class, &run.gaussian, run.seed)?,
    };
    let samples = normalize(&raw, run.norm_mode);
    let pair_seed = run.seed.wrapping_add(1);
    let pairs = match run.protocol {
        PairProtocol::Toy => toy_pairs(&samples, &run.toy, pair_seed)?,
        PairProtocol::Sampled => sample_pairs(&samples, &run.sampling, pair_seed)?,
    };
    let graph = PairGraph::build(pairs.clone(), RelationKind::Transitive)?;
    save_samples(out_path(&run.out_dir, &run.samples_out), &samples)?;
    save_pairs(out_path(&run.out_dir, &run.pairs_out), &pairs, b',')?;
    print_json(&json!({
        "samples": samples.len(),
        "dim": samples.dim(),
        "pairs": pairs.len(),
        "paired_individuals": graph.node_count(),
        "components": graph.component_count(),
    }))
}

pub fn analyze_kappa(run: &KappaRun) -> CliResult<()> {
    let pairs = load_pairs::<f64>(&run.pairs, run.delimiter()?)?;
    let graph = PairGraph::build(pairs, run.relation)?;
    let cfg = ExactConfig {
        node_limit: run.exact_limit,
        search_budget: run.search_budget,
        record_terms: run.terms,
    };
    let report = compute_kappa(&graph, run.method, &cfg)?;
    write_json(&out_path(&run.out_dir, &run.report_out), &report)?;
    print_json(&report)
}

fn write_trace(path: &Path, trace: &TrainTrace) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["iter", "epoch", "objective", "eta", "sens_basic", "sens_reduced_min", "sens_reduced_max"])?;
    for r in &trace.rows {
        w.write_record([
            r.iter.to_string(),
            r.epoch.to_string(),
            r.objective.to_string(),
            r.eta.to_string(),
            r.sens_basic.to_string(),
            r.sens_reduced_min.to_string(),
            r.sens_reduced_max.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn train(run: &TrainRun) -> CliResult<()> {
    let pairs = load_pairs::<f64>(&run.pairs, run.delimiter as u8)?;
    let graph = PairGraph::build(pairs.clone(), run.relation)?;
    let (model, trace) = train_seeded(&pairs, &graph, &run.train)?;
    write_json(&out_path(&run.out_dir, &run.model_out), &model)?;
    write_trace(&out_path(&run.out_dir, &run.trace_out), &trace)?;
    let summary = json!({
        "kappa": trace.kappa,
        "kappa_method": trace.kappa_method,
        "margin": trace.margin,
        "initial_objective": trace.initial_objective,
        "final_objective": trace.final_objective(),
        "iterations": trace.rows.len(),
        "degenerate_events": trace.degenerate_events,
    });
    if !run.summary_out.is_empty() {
        write_json(&out_path(&run.out_dir, &run.summary_out), &summary)?;
    }
    print_json(&summary)
}

pub fn evaluate(run: &EvalRun) -> CliResult<()> {
    let file = File::open(&run.model).map_err(|e| Failure::input(format!("cannot open {}: {e}", run.model)))?;
    let model: MetricModel<f64> = serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| Failure::input(format!("model {}: {e}", run.model)))?;
    let schema = run.columns.schema(run.delimiter)?;
    let data = load_csv::<f64>(&run.data, &schema)?;
    let (train, test) = match (&run.pairs, &run.test) {
        (Some(p), _) => {
            let pairs = load_pairs::<f64>(p, run.delimiter as u8)?;
            let paired: HashSet<&NodeId> = pairs.iter().flat_map(|p| [&p.i, &p.j]).collect();
            let (a, b): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&k| paired.contains(&data.ids[k]));
            (data.subset(&a), data.subset(&b))
        }
        (None, Some(t)) => {
            let test = load_csv::<f64>(t, &schema)?;
            (data, test)
        }
        (None, None) => return Err(Failure::input("give exactly one of --pairs and --test")),
    };
    let accuracy = knn_accuracy(&model, &train.x, &train.labels, &test.x, &test.labels, run.k)?;
    let raw = knn_accuracy_points(&train.x, &train.labels, &test.x, &test.labels, run.k)?;
    let report = json!({
        "accuracy": accuracy,
        "raw_accuracy": raw,
        "k": run.k,
        "n_reference": train.len(),
        "n_query": test.len(),
    });
    write_json(&out_path(&run.out_dir, &run.report_out), &report)?;
    print_json(&report)
}

fn load_benchmark(source: &DataSource, seed: u64) -> CliResult<Benchmark<f64>> {
    match (&source.data, &source.pairs) {
        (Some(d), Some(p)) => {
            let delimiter = source.columns.schema(source.delimiter)?;
            let samples = load_csv::<f64>(d, &delimiter)?;
            let pairs = load_pairs::<f64>(p, delimiter.delimiter)?;
            Ok(Benchmark::new(samples, pairs, source.relation)?)
        }
        _ => Ok(source.synthetic.build(seed)?),
    }
}

pub fn sweep(run: &SweepRun) -> CliResult<()> {
    let bench = load_benchmark(&run.source, run.seed)?;
    let kappa = KappaChoice::for_benchmark(&bench, &run.settings.train)?;
    let reports = run_experiment(&bench, &run.settings)?;

    let mut w = csv_writer(&out_path(&run.out_dir, &run.csv_out))?;
    w.write_record(["method", "epsilon", "run", "accuracy"])?;
    for rep in &reports {
        for (r, acc) in rep.per_run.iter().enumerate() {
            w.write_record([rep.method.name().to_string(), fmt_epsilon(rep.epsilon), r.to_string(), acc.to_string()])?;
        }
    }
    w.flush()?;

    #[derive(Serialize)]
    struct Row<'a> {
        method: &'a str,
        #[serde(with = "epsilon_serde")]
        epsilon: f64,
        mean_accuracy: f64,
        std_accuracy: f64,
    }
    let table: Vec<Row> = reports
        .iter()
        .map(|r| Row {
            method: r.method.name(),
            epsilon: r.epsilon,
            mean_accuracy: r.mean_accuracy,
            std_accuracy: r.std_accuracy,
        })
        .collect();
    let summary = json!({
        "pairs": bench.pairs.len(),
        "reference_points": bench.train_idx.len(),
        "query_points": bench.test_idx.len(),
        "raw_accuracy": bench.evaluate_raw(run.settings.k)?,
        "kappa": kappa,
        "reports": reports,
    });
    write_json(&out_path(&run.out_dir, &run.summary_out), &summary)?;
    print_json(&table)
}

pub fn compare_mechanisms(run: &CompareRun) -> CliResult<()> {
    let bench = load_benchmark(&run.source, run.seed)?;
    let kappa = KappaChoice::for_benchmark(&bench, &run.train)?;
    let cells: Vec<(CompareMechanism, usize)> = run
        .mechanisms
        .iter()
        .flat_map(|&m| (0..run.repeats).map(move |r| (m, r)))
        .collect();
    let traces: Vec<Vec<f64>> = cells
        .par_iter()
        .map(|&(mech, r)| {
            let mut cfg = run.train.clone();
            cfg.seed = run.seed.wrapping_add(r as u64);
            cfg.kappa = Some(kappa.dpp);
            (cfg.mechanism, cfg.sensitivity_mode) = match mech {
                CompareMechanism::Lap => (MechanismKind::Laplace, SensitivityMode::Basic),
                CompareMechanism::LapS => (MechanismKind::Laplace, SensitivityMode::Reduced),
                CompareMechanism::Scdf => (MechanismKind::Staircase, SensitivityMode::Basic),
                CompareMechanism::Duchi => (MechanismKind::Duchi, SensitivityMode::Basic),
            };
            let (_, trace) = train_seeded(&bench.pairs, &bench.graph, &cfg)?;
            Ok(std::iter::once(trace.initial_objective)
                .chain(trace.rows.iter().map(|row| row.objective))
                .collect())
        })
        .collect::<dpp_core::error::Result<_>>()?;

    // every run of a seed shares its batching, so run lengths agree
    let len = traces.iter().map(Vec::len).min().unwrap_or(0);
    let means: Vec<Vec<f64>> = traces
        .chunks(run.repeats)
        .map(|group| {
            (0..len)
                .map(|i| group.iter().map(|t| t[i]).sum::<f64>() / group.len() as f64)
                .collect()
        })
        .collect();

    let mut w = csv_writer(&out_path(&run.out_dir, &run.csv_out))?;
    let mut header = vec!["iter".to_string()];
    header.extend(run.mechanisms.iter().map(|m| m.name().to_string()));
    w.write_record(&header)?;
    for i in 0..len {
        let mut record = vec![i.to_string()];
        record.extend(means.iter().map(|m| m[i].to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;

    let finals: serde_json::Map<String, serde_json::Value> = run
        .mechanisms
        .iter()
        .zip(&means)
        .map(|(m, v)| (m.name().to_string(), json!(v.last().copied().unwrap_or(f64::NAN))))
        .collect();
    print_json(&json!({ "kappa": kappa.dpp, "final_objective": finals }))
}
