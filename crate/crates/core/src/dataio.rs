//! Sample sets, synthetic data, normalization, pair sampling and CSV I/O.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairgraph::{NodeId, PairLabel, PairwiseDatum};
use crate::scalar::{NormMode, Scalar};

/// Feature rows with a class label and an id per individual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SampleSet<T> {
    pub x: Vec<Vec<T>>,
    pub labels: Vec<u32>,
    pub ids: Vec<NodeId>,
}

impl<T: Scalar> SampleSet<T> {
    pub fn new(x: Vec<Vec<T>>, labels: Vec<u32>, ids: Vec<NodeId>) -> Result<Self> {
        if labels.len() != x.len() || ids.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: if labels.len() != x.len() { labels.len() } else { ids.len() },
            });
        }
        let d = x.first().map_or(0, Vec::len);
        if let Some(row) = x.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        Ok(SampleSet { x, labels, ids })
    }

    /// Samples with ids `0..n`.
    pub fn with_index_ids(x: Vec<Vec<T>>, labels: Vec<u32>) -> Result<Self> {
        let ids = (0..x.len()).map(NodeId::from).collect();
        Self::new(x, labels, ids)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        SampleSet {
            x: indices.iter().map(|&k| self.x[k].clone()).collect(),
            labels: indices.iter().map(|&k| self.labels[k]).collect(),
            ids: indices.iter().map(|&k| self.ids[k].clone()).collect(),
        }
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<u32> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// The pair `(a, b)` with `Δx = x_a − x_b` and its class-derived label.
    pub fn pair(&self, a: usize, b: usize) -> Result<PairwiseDatum<T>> {
        let dx = self.x[a].iter().zip(&self.x[b]).map(|(&p, &q)| p - q).collect();
        PairwiseDatum::new(
            self.ids[a].clone(),
            self.ids[b].clone(),
            dx,
            PairLabel::from_classes(self.labels[a], self.labels[b]),
        )
    }
}

/// Generator constants for the two-strip toy data.
///
/// Both classes share an elongated covariance along the first axis and are
/// offset from each other along the narrow second axis.
pub mod toy {
    /// Standard deviation along the long axis.
    pub const MAJOR_STD: f64 = 0.22;
    /// Standard deviation along the narrow axis.
    pub const MINOR_STD: f64 = 0.035;
    /// Class means sit at `(0, ±MEAN_OFFSET)`.
    pub const MEAN_OFFSET: f64 = 0.06;
    /// Between-class mean distance over the narrow-axis standard deviation.
    pub const SEPARATION_RATIO: f64 = 2.0 * MEAN_OFFSET / MINOR_STD;
}

/// Two parallel anisotropic Gaussian strips in 2-D, `n_per_class` points
/// each; class 0 first, then class 1.
pub fn synth_two_gaussians<T: Scalar>(n_per_class: usize, seed: u64) -> Result<SampleSet<T>> {
    if n_per_class == 0 {
        return Err(Error::ConfigInvalid("n_per_class must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let major = Normal::new(0.0, toy::MAJOR_STD).expect("valid std");
    let minor = Normal::new(0.0, toy::MINOR_STD).expect("valid std");
    let mut x = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for (class, centre) in [(0u32, toy::MEAN_OFFSET), (1, -toy::MEAN_OFFSET)] {
        for _ in 0..n_per_class {
            let a = major.sample(&mut rng);
            let b = centre + minor.sample(&mut rng);
            x.push(vec![T::lit(a), T::lit(b)]);
            labels.push(class);
        }
    }
    SampleSet::with_index_ids(x, labels)
}

/// Shape of the multi-dimensional two-class benchmark.
///
/// Class means differ only along the first axis; the remaining axes are
/// class-independent noise with a larger spread, so raw Euclidean
/// neighbourhoods are dominated by uninformative directions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianBenchmark {
    pub dim: usize,
    /// Class means sit at `±mean_offset` on the first axis.
    pub mean_offset: f64,
    /// Standard deviation along the first axis.
    pub informative_std: f64,
    /// Standard deviation along every other axis.
    pub noise_std: f64,
}

impl Default for GaussianBenchmark {
    fn default() -> Self {
        GaussianBenchmark {
            dim: 5,
            mean_offset: 0.24,
            informative_std: 0.16,
            noise_std: 0.48,
        }
    }
}

/// Two Gaussian classes of `n_per_class` points in `spec.dim` dimensions;
/// class 0 first.
pub fn synth_gaussian_benchmark<T: Scalar>(n_per_class: usize, spec: &GaussianBenchmark, seed: u64) -> Result<SampleSet<T>> {
    if n_per_class == 0 || spec.dim == 0 {
        return Err(Error::ConfigInvalid("n_per_class and dim must be at least 1".into()));
    }
    let normal = |std: f64| Normal::new(0.0, std).map_err(|e| Error::ConfigInvalid(format!("standard deviation {std}: {e}")));
    let informative = normal(spec.informative_std)?;
    let noise = normal(spec.noise_std)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for (class, centre) in [(0u32, spec.mean_offset), (1, -spec.mean_offset)] {
        for _ in 0..n_per_class {
            let mut row = Vec::with_capacity(spec.dim);
            row.push(T::lit(centre + informative.sample(&mut rng)));
            row.extend((1..spec.dim).map(|_| T::lit(noise.sample(&mut rng))));
            x.push(row);
            labels.push(class);
        }
    }
    SampleSet::with_index_ids(x, labels)
}

/// Largest norm a normalized row may have.
pub const NORM_LIMIT: f64 = 1.0 - 1e-6;

/// Scales every row whose norm exceeds [`NORM_LIMIT`] down to it.
///
/// Rows already inside are left untouched, so the operation is idempotent.
pub fn normalize<T: Scalar>(samples: &SampleSet<T>, mode: NormMode) -> SampleSet<T> {
    let limit = T::lit(NORM_LIMIT);
    let shrink = T::one() - T::epsilon() * T::lit(4.0);
    let mut out = samples.clone();
    for (k, row) in out.x.iter_mut().enumerate() {
        let n = mode.norm(row);
        if n == T::zero() {
            log::warn!("row {} ({}) is all zero", k, samples.ids[k]);
            continue;
        }
        if n <= limit {
            continue;
        }
        let factor = limit / n;
        row.iter_mut().for_each(|v| *v *= factor);
        // rounding can leave the norm a hair above the limit
        while mode.norm(row) > limit {
            row.iter_mut().for_each(|v| *v *= shrink);
        }
    }
    out
}

/// Settings for [`sample_pairs`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairSampling {
    /// Target `|E| / |V|` over individuals that appear in a pair.
    pub density: f64,
    /// Equal numbers of similar and dissimilar pairs.
    pub balance: bool,
    /// Fraction of individuals eligible for pairs; the others stay unpaired.
    pub pool_fraction: f64,
}

impl Default for PairSampling {
    fn default() -> Self {
        PairSampling {
            density: 2.0,
            balance: true,
            pool_fraction: 1.0,
        }
    }
}

/// Above this many candidate pairs, sampling switches from enumeration to
/// rejection.
const ENUMERATION_LIMIT: usize = 4_000_000;

/// Uniformly samples distinct unordered pairs until `|E| = round(density·|V|)`
/// where `|V|` counts the individuals covered so far.
pub fn sample_pairs<T: Scalar>(samples: &SampleSet<T>, opts: &PairSampling, seed: u64) -> Result<Vec<PairwiseDatum<T>>> {
    if !(opts.density > 0.0 && opts.density.is_finite()) {
        return Err(Error::ConfigInvalid(format!("density must be positive, got {}", opts.density)));
    }
    if !(opts.pool_fraction > 0.0 && opts.pool_fraction <= 1.0) {
        return Err(Error::ConfigInvalid(format!(
            "pool_fraction must lie in (0, 1], got {}",
            opts.pool_fraction
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..samples.len()).collect();
    if opts.pool_fraction < 1.0 {
        pool.shuffle(&mut rng);
        pool.truncate((opts.pool_fraction * samples.len() as f64).round() as usize);
        pool.sort_unstable();
    }
    let n = pool.len();
    let available = n * n.saturating_sub(1) / 2;
    if opts.density * n as f64 > available as f64 {
        return Err(Error::InfeasibleDensity {
            density: opts.density,
            needed: (opts.density * n as f64).ceil() as usize,
            available,
        });
    }
    let similar_available = {
        let mut counts = std::collections::BTreeMap::new();
        for &k in &pool {
            *counts.entry(samples.labels[k]).or_insert(0usize) += 1;
        }
        counts.values().map(|&c| c * c.saturating_sub(1) / 2).sum::<usize>()
    };
    if opts.balance {
        let needed = (opts.density * n as f64 / 2.0).ceil() as usize;
        let least = similar_available.min(available - similar_available);
        if needed > least {
            return Err(Error::InfeasibleBalance {
                needed,
                available: least,
            });
        }
    }

    let mut source = PairSource::new(samples, &pool, available, &mut rng);
    let mut covered = vec![false; samples.len()];
    let mut covered_count = 0;
    let mut out = Vec::new();
    loop {
        let target = (opts.density * covered_count as f64).round() as usize;
        if !out.is_empty() && out.len() >= target && (!opts.balance || out.len() % 2 == 0) {
            break;
        }
        let want = opts.balance.then_some(if out.len() % 2 == 0 {
            PairLabel::Similar
        } else {
            PairLabel::Dissimilar
        });
        let Some((a, b)) = source.next(samples, want, &mut rng) else {
            return Err(Error::InfeasibleDensity {
                density: opts.density,
                needed: target,
                available: out.len(),
            });
        };
        for v in [a, b] {
            if !covered[v] {
                covered[v] = true;
                covered_count += 1;
            }
        }
        out.push(samples.pair(a, b)?);
    }
    Ok(out)
}

/// Stream of distinct random pairs over a pool of sample indices.
enum PairSource {
    /// Pre-shuffled candidates split by label; cursors advance on use.
    Enumerated {
        similar: Vec<(usize, usize)>,
        dissimilar: Vec<(usize, usize)>,
        all: Vec<(usize, usize)>,
        used: HashSet<(usize, usize)>,
        cursor: [usize; 3],
    },
    Rejection {
        pool: Vec<usize>,
        used: HashSet<(usize, usize)>,
    },
}

impl PairSource {
    fn new<T: Scalar, R: Rng>(samples: &SampleSet<T>, pool: &[usize], available: usize, rng: &mut R) -> Self {
        if available > ENUMERATION_LIMIT {
            return PairSource::Rejection {
                pool: pool.to_vec(),
                used: HashSet::new(),
            };
        }
        let mut all = Vec::with_capacity(available);
        for (p, &a) in pool.iter().enumerate() {
            for &b in &pool[p + 1..] {
                all.push((a, b));
            }
        }
        all.shuffle(rng);
        let (similar, dissimilar) = all
            .iter()
            .partition(|&&(a, b)| samples.labels[a] == samples.labels[b]);
        PairSource::Enumerated {
            similar,
            dissimilar,
            all,
            used: HashSet::new(),
            cursor: [0; 3],
        }
    }

    fn next<T: Scalar, R: Rng>(&mut self, samples: &SampleSet<T>, want: Option<PairLabel>, rng: &mut R) -> Option<(usize, usize)> {
        match self {
            PairSource::Enumerated {
                similar,
                dissimilar,
                all,
                used,
                cursor,
            } => {
                let (list, slot) = match want {
                    Some(PairLabel::Similar) => (&*similar, 0),
                    Some(PairLabel::Dissimilar) => (&*dissimilar, 1),
                    None => (&*all, 2),
                };
                while cursor[slot] < list.len() {
                    let pair = list[cursor[slot]];
                    cursor[slot] += 1;
                    if used.insert(pair) {
                        return Some(pair);
                    }
                }
                None
            }
            PairSource::Rejection { pool, used } => loop {
                let a = *pool.choose(rng)?;
                let b = *pool.choose(rng)?;
                if a == b {
                    continue;
                }
                let key = (a.min(b), a.max(b));
                let label = PairLabel::from_classes(samples.labels[a], samples.labels[b]);
                if want.is_some_and(|w| w != label) || !used.insert(key) {
                    continue;
                }
                return Some(key);
            },
        }
    }
}

/// Counts for the acyclic toy pair selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyProtocol {
    /// Similar pairs inside each of the two classes.
    pub intra_per_class: usize,
    /// Dissimilar pairs between the classes.
    pub inter: usize,
}

impl Default for ToyProtocol {
    fn default() -> Self {
        ToyProtocol {
            intra_per_class: 50,
            inter: 50,
        }
    }
}

/// Acyclic pair selection on two-class data.
///
/// Each class contributes a chain of `intra_per_class` edges over random
/// members. One dissimilar edge joins the two chain ends; the remaining
/// dissimilar edges attach unused members of one class as leaves to random
/// chain nodes of the other, alternating between the classes. The result is
/// a single tree, so every pair has privacy distance 1.
pub fn toy_pairs<T: Scalar>(samples: &SampleSet<T>, protocol: &ToyProtocol, seed: u64) -> Result<Vec<PairwiseDatum<T>>> {
    let classes = samples.classes();
    if classes.len() != 2 {
        return Err(if classes.len() < 2 {
            Error::SingleClass
        } else {
            Error::ConfigInvalid("toy protocol needs exactly two classes".into())
        });
    }
    if protocol.intra_per_class == 0 {
        return Err(Error::ConfigInvalid("intra_per_class must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extra = protocol.inter.saturating_sub(1);
    // leaves[c]: unused members of class c hung on the other class's chain
    let leaves = [extra / 2, extra - extra / 2];
    let mut members: Vec<Vec<usize>> = classes
        .iter()
        .map(|&c| (0..samples.len()).filter(|&k| samples.labels[k] == c).collect())
        .collect();
    for (c, list) in members.iter_mut().enumerate() {
        let needed = protocol.intra_per_class + 1 + leaves[c];
        if list.len() < needed {
            return Err(Error::ConfigInvalid(format!(
                "class {} has {} members, the toy protocol needs {needed}",
                classes[c],
                list.len()
            )));
        }
        list.shuffle(&mut rng);
    }
    let chain_len = protocol.intra_per_class + 1;
    let mut out = Vec::with_capacity(2 * protocol.intra_per_class + protocol.inter);
    for list in &members {
        for w in list[..chain_len].windows(2) {
            out.push(samples.pair(w[0], w[1])?);
        }
    }
    if protocol.inter > 0 {
        out.push(samples.pair(members[0][chain_len - 1], members[1][chain_len - 1])?);
    }
    let mut next = [chain_len, chain_len];
    for k in 0..extra {
        let leaf_class = k % 2;
        let leaf_class = if next[leaf_class] - chain_len < leaves[leaf_class] {
            leaf_class
        } else {
            1 - leaf_class
        };
        let leaf = members[leaf_class][next[leaf_class]];
        next[leaf_class] += 1;
        let anchor = members[1 - leaf_class][rng.random_range(0..chain_len)];
        out.push(samples.pair(anchor, leaf)?);
    }
    Ok(out)
}

/// Randomly subsamples every class down to the size of the smallest one,
/// keeping the original row order.
pub fn downsample_majority<T: Scalar>(samples: &SampleSet<T>, seed: u64) -> Result<SampleSet<T>> {
    let classes = samples.classes();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = classes
        .iter()
        .map(|&c| (0..samples.len()).filter(|&k| samples.labels[k] == c).collect())
        .collect();
    let minority = groups.iter().map(Vec::len).min().unwrap_or(0);
    let mut keep = Vec::with_capacity(minority * groups.len());
    for g in groups {
        if g.len() == minority {
            keep.extend(g);
        } else {
            keep.extend(g.choose_multiple(&mut rng, minority).copied());
        }
    }
    keep.sort_unstable();
    Ok(samples.subset(&keep))
}

/// Column layout of a samples CSV.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub label_column: String,
    /// Used for ids when present in the header; rows are numbered otherwise.
    pub id_column: Option<String>,
    pub delimiter: u8,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            label_column: "label".into(),
            id_column: Some("id".into()),
            delimiter: b',',
        }
    }
}

/// Reads a samples table with a header row. Every column other than the
/// label and id columns is a numeric feature.
pub fn read_samples<T: Scalar, R: Read>(reader: R, schema: &CsvSchema) -> Result<SampleSet<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let label_col = header
        .iter()
        .position(|h| h == schema.label_column)
        .ok_or_else(|| Error::MissingLabelColumn(schema.label_column.clone()))?;
    let id_col = schema
        .id_column
        .as_ref()
        .and_then(|name| header.iter().position(|h| h == name));
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != label_col && Some(c) != id_col)
        .collect();
    let (mut x, mut labels, mut ids) = (Vec::new(), Vec::new(), Vec::new());
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 1;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let label = cell(label_col).parse::<u32>().map_err(|e| Error::Parse {
            row,
            col: label_col + 1,
            msg: format!("label '{}': {e}", cell(label_col)),
        })?;
        let mut features = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let v = parse_number::<T>(cell(c), row, c + 1)?;
            features.push(v);
        }
        x.push(features);
        labels.push(label);
        ids.push(match id_col {
            Some(c) => NodeId::from(cell(c)),
            None => NodeId::from(k),
        });
    }
    SampleSet::new(x, labels, ids)
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SampleSet<T>> {
    read_samples(File::open(path)?, schema)
}

fn parse_number<T: Scalar>(text: &str, row: usize, col: usize) -> Result<T> {
    let v: f64 = text.parse().map_err(|_| Error::Parse {
        row,
        col,
        msg: format!("'{text}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            col,
            msg: format!("'{text}' is not finite"),
        });
    }
    Ok(T::lit(v))
}

/// Writes `id,label,f1,…,fd`.
pub fn write_samples<T: Scalar, W: Write>(writer: W, samples: &SampleSet<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((1..=samples.dim()).map(|k| format!("f{k}")));
    w.write_record(&header)?;
    for k in 0..samples.len() {
        let mut rec = vec![samples.ids[k].to_string(), samples.labels[k].to_string()];
        rec.extend(samples.x[k].iter().map(|v| v.as_f64().to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_samples<T: Scalar>(path: impl AsRef<Path>, samples: &SampleSet<T>) -> Result<()> {
    write_samples(File::create(path)?, samples)
}

/// Writes `i,j,y,dx1,…,dxd` with a header row.
pub fn write_pairs<T: Scalar, W: Write>(writer: W, pairs: &[PairwiseDatum<T>], delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    let d = pairs.first().map_or(0, PairwiseDatum::dim);
    let mut header = vec!["i".to_string(), "j".to_string(), "y".to_string()];
    header.extend((1..=d).map(|k| format!("dx{k}")));
    w.write_record(&header)?;
    for p in pairs {
        let mut rec = vec![p.i.to_string(), p.j.to_string(), u8::from(p.y).to_string()];
        rec.extend(p.delta_x.iter().map(|v| v.as_f64().to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_pairs<T: Scalar>(path: impl AsRef<Path>, pairs: &[PairwiseDatum<T>], delimiter: u8) -> Result<()> {
    write_pairs(File::create(path)?, pairs, delimiter)
}

/// Reads a pairs file. A first row whose label or feature cells are not
/// numeric is taken as a header. Row numbers in errors are 1-based file lines.
pub fn read_pairs<T: Scalar, R: Read>(reader: R, delimiter: u8) -> Result<Vec<PairwiseDatum<T>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut width = None;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 1;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if k == 0 && is_header(&rec) {
            continue;
        }
        if rec.len() < 3 {
            return Err(Error::Parse {
                row,
                col: rec.len() + 1,
                msg: "expected at least i, j, y".into(),
            });
        }
        if let Some(w) = width {
            if rec.len() != w {
                return Err(Error::Parse {
                    row,
                    col: rec.len().min(w) + 1,
                    msg: format!("expected {w} fields, found {}", rec.len()),
                });
            }
        }
        width = Some(rec.len());
        let y_text = &rec[2];
        let y = y_text
            .parse::<u8>()
            .ok()
            .and_then(|v| PairLabel::try_from(v).ok())
            .ok_or_else(|| Error::Parse {
                row,
                col: 3,
                msg: format!("label '{y_text}' is not 0 or 1"),
            })?;
        let dx = (3..rec.len())
            .map(|c| parse_number::<T>(&rec[c], row, c + 1))
            .collect::<Result<Vec<_>>>()?;
        let pair = PairwiseDatum::new(&rec[0], &rec[1], dx, y).map_err(|e| Error::Parse {
            row,
            col: 1,
            msg: e.to_string(),
        })?;
        out.push(pair);
    }
    Ok(out)
}

fn is_header(rec: &csv::StringRecord) -> bool {
    let numeric = |s: &str| s.parse::<f64>().is_ok();
    rec.len() >= 3 && (!numeric(&rec[2]) || rec.iter().skip(3).any(|c| !numeric(c)))
}

pub fn load_pairs<T: Scalar>(path: impl AsRef<Path>, delimiter: u8) -> Result<Vec<PairwiseDatum<T>>> {
    read_pairs(File::open(path)?, delimiter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairgraph::{PairGraph, RelationKind};

    #[test]
    fn synth_shape_and_determinism() {
        let a = synth_two_gaussians::<f64>(100, 7).unwrap();
        assert_eq!(a.len(), 200);
        assert_eq!(a.labels.iter().filter(|&&l| l == 1).count(), 100);
        assert_eq!(a, synth_two_gaussians::<f64>(100, 7).unwrap());
        assert_ne!(a, synth_two_gaussians::<f64>(100, 8).unwrap());
    }

    #[test]
    fn normalize_scales_and_is_idempotent() {
        let s = SampleSet::<f64>::with_index_ids(vec![vec![3.0, -2.0], vec![0.1, 0.2], vec![0.0, 0.0]], vec![0, 1, 0]).unwrap();
        let n = normalize(&s, NormMode::L1);
        assert!((n.x[0][0] - 3.0 * NORM_LIMIT / 5.0).abs() < 1e-12);
        assert!(NormMode::L1.norm(&n.x[0]) <= NORM_LIMIT);
        assert_eq!(n.x[1], s.x[1]);
        assert_eq!(normalize(&n, NormMode::L1), n);
        let n2 = normalize(&s, NormMode::L2);
        assert!(NormMode::L2.norm(&n2.x[0]) <= 1.0);
    }

    #[test]
    fn pair_sampling_density() {
        let s = synth_two_gaussians::<f64>(500, 1).unwrap();
        let opts = PairSampling {
            density: 2.0,
            balance: false,
            pool_fraction: 1.0,
        };
        let pairs = sample_pairs(&s, &opts, 3).unwrap();
        let g = PairGraph::build(pairs.clone(), RelationKind::Transitive).unwrap();
        assert_eq!(pairs.len(), (2.0 * g.node_count() as f64).round() as usize);
        assert!(pairs.len() > 1900 && pairs.len() <= 2000);
    }

    #[test]
    fn pair_sampling_balance_and_errors() {
        let s = synth_two_gaussians::<f64>(50, 1).unwrap();
        let pairs = sample_pairs(&s, &PairSampling::default(), 3).unwrap();
        let dis = pairs.iter().filter(|p| p.y.is_dissimilar()).count();
        assert_eq!(2 * dis, pairs.len());
        let two = SampleSet::<f64>::with_index_ids(vec![vec![0.0], vec![1.0]], vec![0, 1]).unwrap();
        let one = PairSampling {
            density: 0.5,
            balance: false,
            pool_fraction: 1.0,
        };
        assert_eq!(sample_pairs(&two, &one, 0).unwrap().len(), 1);
        let over = PairSampling { density: 0.6, ..one };
        assert!(matches!(sample_pairs(&two, &over, 0), Err(Error::InfeasibleDensity { .. })));
        let bal = PairSampling { balance: true, ..one };
        assert!(matches!(sample_pairs(&two, &bal, 0), Err(Error::InfeasibleBalance { .. })));
    }

    #[test]
    fn toy_protocol_is_a_tree() {
        let s = synth_two_gaussians::<f64>(100, 2).unwrap();
        let pairs = toy_pairs(&s, &ToyProtocol::default(), 5).unwrap();
        assert_eq!(pairs.len(), 150);
        let intra = pairs.iter().filter(|p| !p.y.is_dissimilar()).count();
        assert_eq!(intra, 100);
        let g = PairGraph::build(pairs, RelationKind::Transitive).unwrap();
        assert!(g.topology().is_forest());
        assert_eq!(g.node_count(), 151);
    }

    #[test]
    fn downsampling() {
        let x = (0..1000).map(|k| vec![k as f64]).collect();
        let labels = (0..1000).map(|k| u32::from(k % 10 == 0)).collect();
        let s = SampleSet::<f64>::with_index_ids(x, labels).unwrap();
        let d = downsample_majority(&s, 4).unwrap();
        assert_eq!(d.len(), 200);
        assert_eq!(d.labels.iter().filter(|&&l| l == 1).count(), 100);
        assert_eq!(d, downsample_majority(&s, 4).unwrap());
        let bal = synth_two_gaussians::<f64>(10, 0).unwrap();
        assert_eq!(downsample_majority(&bal, 1).unwrap(), bal);
        let single = SampleSet::<f64>::with_index_ids(vec![vec![0.0]], vec![3]).unwrap();
        assert!(matches!(downsample_majority(&single, 0), Err(Error::SingleClass)));
    }

    #[test]
    fn csv_samples() {
        let text = "id,f1,label,f2\na,0.5,1,2\nb,1,0,3\nc,-1,1,4\n";
        let s: SampleSet<f64> = read_samples(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!((s.len(), s.dim()), (3, 2));
        assert_eq!(s.x[0], vec![0.5, 2.0]);
        assert_eq!(s.ids[2], NodeId::from("c"));
        let bad = "label,f1\n1,0.5\n0,oops\n";
        match read_samples::<f64, _>(bad.as_bytes(), &CsvSchema::default()) {
            Err(Error::Parse { row: 2, col: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let nolabel = "class,f1\n1,0.5\n";
        assert!(matches!(
            read_samples::<f64, _>(nolabel.as_bytes(), &CsvSchema::default()),
            Err(Error::MissingLabelColumn(_))
        ));
        let mut buf = Vec::new();
        write_samples(&mut buf, &s).unwrap();
        let back: SampleSet<f64> = read_samples(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn csv_pairs() {
        let s = synth_two_gaussians::<f64>(5, 0).unwrap();
        let pairs = vec![s.pair(0, 1).unwrap(), s.pair(2, 7).unwrap()];
        let mut buf = Vec::new();
        write_pairs(&mut buf, &pairs, b';').unwrap();
        let back: Vec<PairwiseDatum<f64>> = read_pairs(buf.as_slice(), b';').unwrap();
        assert_eq!(back, pairs);
        let headless = "a,b,0,0.5\nb,c,1,0.25\n";
        assert_eq!(read_pairs::<f64, _>(headless.as_bytes(), b',').unwrap().len(), 2);
        let bad = "a,b,0,0.5\nb,c,2,0.25\n";
        assert!(matches!(
            read_pairs::<f64, _>(bad.as_bytes(), b','),
            Err(Error::Parse { row: 2, col: 3, .. })
        ));
    }
}
