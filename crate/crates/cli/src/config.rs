//! Run records: one per subcommand, merged from defaults, an optional JSON
//! file and explicit flags, and echoed back as `resolved-config.json`.

use std::path::{Path, PathBuf};

use dpp_core::dataio::{CsvSchema, GaussianBenchmark, PairSampling, ToyProtocol};
use dpp_core::dml::TrainConfig;
use dpp_core::eval::{ExperimentSettings, SyntheticBenchmark};
use dpp_core::kappa::{KappaStrategy, DEFAULT_EXACT_LIMIT, DEFAULT_SEARCH_BUDGET};
use dpp_core::pairgraph::RelationKind;
use dpp_core::scalar::NormMode;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::failure::{CliResult, Failure};

pub const RESOLVED_CONFIG: &str = "resolved-config.json";

pub trait RunSpec: Serialize + DeserializeOwned + Default {
    const COMMAND: &'static str;

    fn seed_mut(&mut self) -> &mut u64;

    fn out_dir_mut(&mut self) -> &mut String;

    /// Interprets a config file that is not a full run record, such as a
    /// bare training section.
    fn from_section(_value: Value) -> Option<serde_json::Result<Self>> {
        None
    }

    /// Copies the run seed into nested sections and checks the record.
    fn finish(&mut self) -> CliResult<()>;
}

/// Defaults, then the config file, if any. Flags are applied by the caller.
pub fn load<R: RunSpec>(config: Option<&Path>) -> CliResult<R> {
    let Some(path) = config else {
        return Ok(R::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("config {} is not valid JSON: {e}", path.display())))?;
    let bad = |e: serde_json::Error| Failure::input(format!("config {}: {e}", path.display()));
    if let Some(obj) = value.as_object_mut() {
        if let Some(cmd) = obj.remove("command") {
            if cmd.as_str() != Some(R::COMMAND) {
                return Err(Failure::input(format!(
                    "config {} is for command {cmd}, not \"{}\"",
                    path.display(),
                    R::COMMAND
                )));
            }
            return serde_json::from_value(value).map_err(bad);
        }
    }
    match serde_json::from_value::<R>(value.clone()) {
        Ok(run) => Ok(run),
        Err(first) => match R::from_section(value) {
            Some(Ok(run)) => Ok(run),
            _ => Err(bad(first)),
        },
    }
}

pub fn apply_globals<R: RunSpec>(run: &mut R, seed: Option<u64>, out_dir: Option<&str>) {
    if let Some(s) = seed {
        *run.seed_mut() = s;
    }
    if let Some(d) = out_dir {
        *run.out_dir_mut() = d.to_owned();
    }
}

/// Writes the run record with its command tag into the output directory.
pub fn write_resolved<R: RunSpec>(run: &R, out_dir: &Path) -> CliResult<()> {
    let mut value = serde_json::to_value(run)?;
    if let Some(obj) = value.as_object_mut() {
        obj.insert("command".into(), Value::String(R::COMMAND.into()));
    }
    write_json(&out_dir.join(RESOLVED_CONFIG), &value)
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn out_path(out_dir: &str, name: &str) -> PathBuf {
    Path::new(out_dir).join(name)
}

fn default_out_dir() -> String {
    "out".into()
}

fn delimiter_byte(c: char) -> CliResult<u8> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| Failure::input(format!("delimiter '{c}' must be a single ASCII character")))
}

fn require(value: &str, what: &str) -> CliResult<()> {
    if value.is_empty() {
        return Err(Failure::input(format!("missing {what}")));
    }
    Ok(())
}

/// Checks that an input file exists before any work starts.
pub fn require_file(path: &str, what: &str) -> CliResult<()> {
    require(path, what)?;
    if !Path::new(path).is_file() {
        return Err(Failure::input(format!("{what} {path} does not exist")));
    }
    Ok(())
}

/// Samples table layout shared by the commands that read samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleColumns {
    pub label_column: String,
    pub id_column: Option<String>,
}

impl Default for SampleColumns {
    fn default() -> Self {
        let schema = CsvSchema::default();
        SampleColumns {
            label_column: schema.label_column,
            id_column: schema.id_column,
        }
    }
}

impl SampleColumns {
    pub fn schema(&self, delimiter: char) -> CliResult<CsvSchema> {
        Ok(CsvSchema {
            label_column: self.label_column.clone(),
            id_column: self.id_column.clone(),
            delimiter: delimiter_byte(delimiter)?,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    /// Two elongated 2-D strips.
    #[default]
    Toy,
    /// Multi-dimensional classes separated along one axis.
    Gaussian,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairProtocol {
    /// Acyclic chains plus inter-class leaves.
    #[default]
    Toy,
    /// Uniform sampling to a target density.
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthRun {
    pub seed: u64,
    pub out_dir: String,
    pub dataset: DatasetKind,
    pub n_per_class: usize,
    pub protocol: PairProtocol,
    pub toy: ToyProtocol,
    pub sampling: PairSampling,
    pub gaussian: GaussianBenchmark,
    pub norm_mode: NormMode,
    pub samples_out: String,
    pub pairs_out: String,
}

impl Default for SynthRun {
    fn default() -> Self {
        SynthRun {
            seed: 0,
            out_dir: default_out_dir(),
            dataset: DatasetKind::Toy,
            n_per_class: 100,
            protocol: PairProtocol::Toy,
            toy: ToyProtocol::default(),
            sampling: PairSampling::default(),
            gaussian: GaussianBenchmark::default(),
            norm_mode: NormMode::L1,
            samples_out: "samples.csv".into(),
            pairs_out: "pairs.csv".into(),
        }
    }
}

impl RunSpec for SynthRun {
    const COMMAND: &'static str = "synth";

    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn out_dir_mut(&mut self) -> &mut String {
        &mut self.out_dir
    }

    fn finish(&mut self) -> CliResult<()> {
        if self.n_per_class == 0 {
            return Err(Failure::input("n_per_class must be at least 1"));
        }
        require(&self.samples_out, "samples output name")?;
        require(&self.pairs_out, "pairs output name")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KappaRun {
    pub seed: u64,
    pub out_dir: String,
    pub pairs: String,
    pub delimiter: char,
    pub relation: RelationKind,
    pub method: KappaStrategy,
    pub exact_limit: usize,
    pub search_budget: u64,
    /// Include every pair's `|P| + min(c_s, c_t)` term in the report.
    pub terms: bool,
    pub report_out: String,
}

impl Default for KappaRun {
    fn default() -> Self {
        KappaRun {
            seed: 0,
            out_dir: default_out_dir(),
            pairs: String::new(),
            delimiter: ',',
            relation: RelationKind::Transitive,
            method: KappaStrategy::Auto,
            exact_limit: DEFAULT_EXACT_LIMIT,
            search_budget: DEFAULT_SEARCH_BUDGET,
            terms: false,
            report_out: "kappa.json".into(),
        }
    }
}

impl KappaRun {
    pub fn delimiter(&self) -> CliResult<u8> {
        delimiter_byte(self.delimiter)
    }
}

impl RunSpec for KappaRun {
    const COMMAND: &'static str = "analyze-kappa";

    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn out_dir_mut(&mut self) -> &mut String {
        &mut self.out_dir
    }

    fn finish(&mut self) -> CliResult<()> {
        self.delimiter()?;
        require_file(&self.pairs, "pairs file")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRun {
    pub seed: u64,
    pub out_dir: String,
    pub pairs: String,
    pub delimiter: char,
    pub relation: RelationKind,
    pub train: TrainConfig,
    pub model_out: String,
    pub trace_out: String,
    pub summary_out: String,
}

impl Default for TrainRun {
    fn default() -> Self {
        TrainRun {
            seed: 0,
            out_dir: default_out_dir(),
            pairs: String::new(),
            delimiter: ',',
            relation: RelationKind::Transitive,
            train: TrainConfig::default(),
            model_out: "model.json".into(),
            trace_out: "trace.csv".into(),
            summary_out: "train-summary.json".into(),
        }
    }
}

impl RunSpec for TrainRun {
    const COMMAND: &'static str = "train";

    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn out_dir_mut(&mut self) -> &mut String {
        &mut self.out_dir
    }

    fn from_section(value: Value) -> Option<serde_json::Result<Self>> {
        Some(serde_json::from_value::<TrainConfig>(value).map(|train| TrainRun {
            seed: train.seed,
            train,
            ..TrainRun::default()
        }))
    }

    fn finish(&mut self) -> CliResult<()> {
        self.train.seed = self.seed;
        self.train.validate()?;
        delimiter_byte(self.delimiter)?;
        require(&self.model_out, "model output name")?;
        require(&self.trace_out, "trace output name")?;
        require_file(&self.pairs, "pairs file")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalRun {
    pub seed: u64,
    pub out_dir: String,
    pub model: String,
    pub data: String,
    /// Individuals in these pairs are the reference set; the rest are queries.
    pub pairs: Option<String>,
    /// Separate query set; the whole of `data` is then the reference set.
    pub test: Option<String>,
    pub delimiter: char,
    pub columns: SampleColumns,
    pub k: usize,
    pub report_out: String,
}

impl Default for EvalRun {
    fn default() -> Self {
        EvalRun {
            seed: 0,
            out_dir: default_out_dir(),
            model: String::new(),
            data: String::new(),
            pairs: None,
            test: None,
            delimiter: ',',
            columns: SampleColumns::default(),
            k: 5,
            report_out: "accuracy.json".into(),
        }
    }
}

impl RunSpec for EvalRun {
    const COMMAND: &'static str = "evaluate";

    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn out_dir_mut(&mut self) -> &mut String {
        &mut self.out_dir
    }

    fn finish(&mut self) -> CliResult<()> {
        if self.k == 0 {
            return Err(Failure::input("k must be at least 1"));
        }
        delimiter_byte(self.delimiter)?;
        require_file(&self.model, "model file")?;
        require_file(&self.data, "data file")?;
        match (&self.pairs, &self.test) {
            (Some(p), None) => require_file(p, "pairs file"),
            (None, Some(t)) => require_file(t, "test file"),
            _ => Err(Failure::input("give exactly one of --pairs and --test")),
        }
    }
}

/// Where a benchmark comes from: two files, or the synthetic recipe when
/// neither file is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSource {
    pub data: Option<String>,
    pub pairs: Option<String>,
    pub delimiter: char,
    pub relation: RelationKind,
    pub columns: SampleColumns,
    pub synthetic: SyntheticBenchmark,
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource {
            data: None,
            pairs: None,
            delimiter: ',',
            relation: RelationKind::Transitive,
            columns: SampleColumns::default(),
            synthetic: SyntheticBenchmark::default(),
        }
    }
}

impl DataSource {
    fn check(&self) -> CliResult<()> {
        delimiter_byte(self.delimiter)?;
        match (&self.data, &self.pairs) {
            (Some(d), Some(p)) => {
                require_file(d, "data file")?;
                require_file(p, "pairs file")
            }
            (None, None) => Ok(()),
            _ => Err(Failure::input("give both --data and --pairs, or neither for synthetic data")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepRun {
    pub seed: u64,
    pub out_dir: String,
    pub source: DataSource,
    pub settings: ExperimentSettings,
    pub csv_out: String,
    pub summary_out: String,
}

impl Default for SweepRun {
    fn default() -> Self {
        SweepRun {
            seed: 0,
            out_dir: default_out_dir(),
            source: DataSource::default(),
            settings: ExperimentSettings::benchmark(),
            csv_out: "sweep.csv".into(),
            summary_out: "sweep-summary.json".into(),
        }
    }
}

impl RunSpec for SweepRun {
    const COMMAND: &'static str = "sweep";

    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn out_dir_mut(&mut self) -> &mut String {
        &mut self.out_dir
    }

    fn from_section(value: Value) -> Option<serde_json::Result<Self>> {
        Some(serde_json::from_value::<ExperimentSettings>(value).map(|settings| SweepRun {
            seed: settings.train.seed,
            settings,
            ..SweepRun::default()
        }))
    }

    fn finish(&mut self) -> CliResult<()> {
        self.settings.train.seed = self.seed;
        self.settings.train.validate()?;
        if self.settings.repeats == 0 || self.settings.k == 0 {
            return Err(Failure::input("repeats and k must be at least 1"));
        }
        if self.settings.methods.is_empty() || self.settings.epsilons.is_empty() {
            return Err(Failure::input("need at least one method and one epsilon"));
        }
        if let Some(&e) = self.settings.epsilons.iter().find(|e| e.is_nan() || **e <= 0.0) {
            return Err(Failure::input(format!("epsilon must be positive, got {e}")));
        }
        self.source.check()
    }
}

/// Gradient perturbation variants compared after one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareMechanism {
    /// Laplace, basic sensitivity.
    Lap,
    /// Laplace, reduced sensitivity.
    LapS,
    /// Staircase, basic sensitivity.
    Scdf,
    /// Per-coordinate Duchi randomizer.
    Duchi,
}

impl CompareMechanism {
    pub const ALL: [CompareMechanism; 4] = [
        CompareMechanism::Lap,
        CompareMechanism::LapS,
        CompareMechanism::Scdf,
        CompareMechanism::Duchi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CompareMechanism::Lap => "lap",
            CompareMechanism::LapS => "lap_s",
            CompareMechanism::Scdf => "scdf",
            CompareMechanism::Duchi => "duchi",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareRun {
    pub seed: u64,
    pub out_dir: String,
    pub source: DataSource,
    pub train: TrainConfig,
    pub mechanisms: Vec<CompareMechanism>,
    pub repeats: usize,
    pub csv_out: String,
}

impl Default for CompareRun {
    fn default() -> Self {
        CompareRun {
            seed: 0,
            out_dir: default_out_dir(),
            source: DataSource::default(),
            train: TrainConfig {
                batch_size: 50,
                t_max: 1,
                epsilon: 1.0,
                exact_limit: 1000,
                ..TrainConfig::default()
            },
            mechanisms: CompareMechanism::ALL.to_vec(),
            repeats: 10,
            csv_out: "mechanisms.csv".into(),
        }
    }
}

impl RunSpec for CompareRun {
    const COMMAND: &'static str = "compare-mechanisms";

    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn out_dir_mut(&mut self) -> &mut String {
        &mut self.out_dir
    }

    fn from_section(value: Value) -> Option<serde_json::Result<Self>> {
        Some(serde_json::from_value::<TrainConfig>(value).map(|train| CompareRun {
            seed: train.seed,
            train,
            ..CompareRun::default()
        }))
    }

    fn finish(&mut self) -> CliResult<()> {
        self.train.seed = self.seed;
        self.train.validate()?;
        if self.train.epsilon.is_infinite() {
            return Err(Failure::input("mechanism comparison needs a finite epsilon"));
        }
        if self.repeats == 0 || self.mechanisms.is_empty() {
            return Err(Failure::input("need at least one mechanism and one repeat"));
        }
        self.source.check()
    }
}

/// Parses a value through its serde name, so flags and JSON agree.
pub fn serde_name<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(text.to_owned())).map_err(|e| format!("'{text}': {e}"))
}
