//! Monte Carlo harness and experiment recipes.
//!
//! Every recipe takes a [`Source`] (a dataset on disk or a synthetic channel
//! model) and an [`RngSeed`]. Random trials are cut into fixed-size chunks,
//! each chunk draws from its own child stream, and results are gathered in
//! chunk order, so the output does not depend on the rayon pool size.

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ingest::{ArrayGeometry, Dataset, IngestError};
use crate::linalg::{self, CMatrix};
use crate::metrics::{
    self, correlation_coefficient, correlation_matrix, eigen_energy_fraction, gain_std,
    inverse_condition_number, mean_gain, normalize, pairwise_sum, Decibel, GainSeries,
    MetricsError, NormalizedTensor, DB_FLOOR_LINEAR,
};
use crate::synth::{ChannelGenerator, ChannelModel, RngSeed, SynthError};
use crate::tensor::{segment_windows, select_antennas, TensorError, TimeWindow};

/// Trials per Monte Carlo chunk; each chunk owns one child RNG stream.
pub const CHUNK_TRIALS: usize = 1024;
/// Snapshots per virtual location when continuous data is split up.
pub const VIRTUAL_LOCATION_SNAPSHOTS: usize = 100;
pub const DEFAULT_CORRELATION_TRIALS: usize = 100_000;
pub const DEFAULT_CONDITION_TRIALS: usize = 10_000;
pub const DEFAULT_WINDOW_LENGTH: usize = 600;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid experiment parameters: {0}")]
    Config(String),
    #[error("unknown position {0:?}")]
    UnknownPosition(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

type Result<T> = std::result::Result<T, ExperimentError>;

/// Where channel data comes from.
#[derive(Debug, Clone)]
pub enum Source {
    Dataset(Dataset),
    /// A channel model; `positions` realizations are drawn whenever a
    /// recipe needs whole position tensors.
    Model { model: ChannelModel, positions: usize },
}

/// A position's normalized channel tensor.
#[derive(Debug, Clone)]
pub struct Location {
    pub id: String,
    pub tensor: NormalizedTensor,
}

impl Source {
    pub fn geometry(&self) -> ArrayGeometry {
        match self {
            Source::Dataset(ds) => ds.geometry().clone(),
            Source::Model { model, .. } => ArrayGeometry::ula(model.antennas),
        }
    }

    pub fn antennas(&self) -> usize {
        self.geometry().num_elements()
    }

    /// Id of the `i`-th synthetic realization.
    pub fn realization_id(i: usize) -> String {
        format!("synth-{i:05}")
    }

    /// All positions, normalized. Synthetic realization `i` is drawn from
    /// `seed.child(i)`.
    pub fn locations(&self, seed: RngSeed) -> Result<Vec<Location>> {
        match self {
            Source::Dataset(ds) => {
                let ids: Vec<String> = ds.position_ids().map(str::to_string).collect();
                ids.par_iter()
                    .map(|id| {
                        let tensor = normalize(&ds.tensor(id)?)?;
                        Ok(Location { id: id.clone(), tensor })
                    })
                    .collect()
            }
            Source::Model { model, positions } => {
                let gen = ChannelGenerator::new(model)?;
                (0..*positions)
                    .into_par_iter()
                    .map(|i| {
                        let id = Self::realization_id(i);
                        let t = gen.tensor(&id, &mut seed.child(i as u64).rng());
                        Ok(Location { id, tensor: normalize(&t)? })
                    })
                    .collect()
            }
        }
    }
}

/// Canonical-to-stored antenna order.
fn canonical_order(geometry: &ArrayGeometry) -> Vec<usize> {
    (0..geometry.num_elements())
        .map(|i| geometry.physical_index(i))
        .collect()
}

/// Runs `trials` independent trials. Chunk `c` draws from `seed.child(c)`.
pub fn monte_carlo<T, F>(trials: usize, seed: RngSeed, trial: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    let chunks = trials.div_ceil(CHUNK_TRIALS);
    let per_chunk: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed.child(c as u64).rng();
            let len = CHUNK_TRIALS.min(trials - c * CHUNK_TRIALS);
            (0..len).map(|_| trial(&mut rng)).collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_chunk.into_iter().flatten().collect())
}

/// Sample mean and its standard error (`s / sqrt(n)`, `s` with divisor
/// `n - 1`).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Db,
}

/// A metric evaluated along an integer axis with Monte Carlo statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricCurve {
    pub metric_name: String,
    /// CSV header of the x column, `m` or `k`.
    pub x_label: String,
    pub x: Vec<usize>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub trials: Vec<usize>,
    pub scale: Scale,
}

impl MetricCurve {
    fn new(metric_name: &str, x_label: &str, scale: Scale) -> Self {
        Self {
            metric_name: metric_name.to_string(),
            x_label: x_label.to_string(),
            x: Vec::new(),
            mean: Vec::new(),
            stderr: Vec::new(),
            trials: Vec::new(),
            scale,
        }
    }

    fn push(&mut self, x: usize, samples: &[f64]) {
        let (mean, stderr) = mean_stderr(samples);
        self.x.push(x);
        self.mean.push(mean);
        self.stderr.push(stderr);
        self.trials.push(samples.len());
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Mean at axis value `x`, if present.
    pub fn at(&self, x: usize) -> Option<f64> {
        self.x.iter().position(|&v| v == x).map(|i| self.mean[i])
    }

    pub fn stderr_at(&self, x: usize) -> Option<f64> {
        self.x.iter().position(|&v| v == x).map(|i| self.stderr[i])
    }

    /// `x,mean,stderr,trials` with one row per point.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},mean,stderr,trials\n", self.x_label);
        for i in 0..self.x.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.x[i], self.mean[i], self.stderr[i], self.trials[i]
            ));
        }
        out
    }
}

/// Empirical distribution of a scalar sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    values: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fraction of samples `<= q`.
    pub fn eval(&self, q: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.partition_point(|&v| v <= q) as f64 / self.values.len() as f64
    }

    /// `value,cdf` with one row per sample, cdf = rank / n.
    pub fn to_csv(&self) -> String {
        let n = self.values.len() as f64;
        let mut out = String::from("value,cdf\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", v, (i + 1) as f64 / n));
        }
        out
    }
}

fn check_antenna_counts(counts: &[usize], antennas: usize, what: &str) -> Result<()> {
    if counts.is_empty() {
        return Err(ExperimentError::Config(format!("{what} must not be empty")));
    }
    if counts.iter().any(|&m| m == 0 || m > antennas) {
        return Err(ExperimentError::Config(format!(
            "{what} must lie in 1..={antennas}, got {counts:?}"
        )));
    }
    if counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::Config(format!(
            "{what} must be strictly increasing, got {counts:?}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Channel hardening

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardeningCurves {
    /// Mean gain standard deviation over windows, per antenna count.
    pub std: MetricCurve,
    /// Mean of per-window `10 log10(sigma_1 / sigma_m)`. Windows where
    /// either sigma is zero are left out; `None` when no window qualifies.
    pub db: Option<MetricCurve>,
    pub windows: usize,
    /// Set when some window has zero gain spread.
    pub degenerate: bool,
}

/// Gain standard deviation of each requested prefix of the canonical
/// antenna order, each prefix rescaled to unit mean gain. Index 0 of the
/// result is the single-antenna value.
fn window_sigmas(window: &NormalizedTensor, order: &[usize], counts: &[usize]) -> Result<Vec<f64>> {
    let t = window.tensor();
    let nf = t.snapshots() * t.freqs();
    let mut all_counts = Vec::with_capacity(counts.len() + 1);
    all_counts.push(1);
    all_counts.extend_from_slice(counts);
    let max_m = *all_counts.iter().max().unwrap_or(&1);

    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(nf); all_counts.len()];
    let mut prefix = vec![0.0; max_m + 1];
    for v in t.vectors() {
        for (i, &p) in order[..max_m].iter().enumerate() {
            prefix[i + 1] = prefix[i] + v[p].norm_sqr();
        }
        for (s, &m) in series.iter_mut().zip(&all_counts) {
            s.push(prefix[m] / m as f64);
        }
    }

    series
        .into_iter()
        .zip(&all_counts)
        .map(|(values, &m)| {
            let mut g = GainSeries {
                values,
                antenna_count: m,
            };
            let mu = mean_gain(&g)?;
            if mu <= 0.0 {
                return Err(MetricsError::Degenerate(format!("first {m} antennas carry no energy")).into());
            }
            g.values.iter_mut().for_each(|x| *x /= mu);
            Ok(gain_std(&g)?)
        })
        .collect()
}

/// Average gain spread and hardening versus number of antennas.
///
/// For a dataset every complete window of every position is used and
/// `trials` is ignored. For a model, `trials` independent realizations of
/// the model are drawn (realization `i` from `seed.child(i)`) and each is
/// windowed the same way.
pub fn run_hardening_curve(
    source: &Source,
    window_length: usize,
    antenna_counts: &[usize],
    trials: usize,
    seed: RngSeed,
) -> Result<HardeningCurves> {
    if window_length == 0 {
        return Err(ExperimentError::Config("window_length must be positive".into()));
    }
    let geometry = source.geometry();
    check_antenna_counts(antenna_counts, geometry.num_elements(), "antenna_counts")?;
    let order = canonical_order(&geometry);

    let per_location = |tensor: &NormalizedTensor| -> Result<Vec<Vec<f64>>> {
        segment_windows(tensor.tensor(), window_length)
            .into_iter()
            .map(|w| window_sigmas(&tensor.window(w)?, &order, antenna_counts))
            .collect()
    };

    let nested: Vec<Vec<Vec<f64>>> = match source {
        Source::Dataset(ds) => {
            let ids: Vec<String> = ds.position_ids().map(str::to_string).collect();
            ids.par_iter()
                .map(|id| per_location(&normalize(&ds.tensor(id)?)?))
                .collect::<Result<_>>()?
        }
        Source::Model { model, .. } => {
            if trials == 0 {
                return Err(ExperimentError::Config("trials must be positive".into()));
            }
            let gen = ChannelGenerator::new(model)?;
            (0..trials)
                .into_par_iter()
                .map(|i| {
                    let t = gen.tensor(&Source::realization_id(i), &mut seed.child(i as u64).rng());
                    per_location(&normalize(&t)?)
                })
                .collect::<Result<_>>()?
        }
    };
    let windows: Vec<Vec<f64>> = nested.into_iter().flatten().collect();
    if windows.is_empty() {
        return Err(ExperimentError::InsufficientData(format!(
            "no complete window of {window_length} snapshots"
        )));
    }

    let mut std = MetricCurve::new("hardening_std", "m", Scale::Linear);
    let mut db = MetricCurve::new("hardening_db", "m", Scale::Db);
    let mut degenerate = false;
    let mut db_complete = true;
    for (k, &m) in antenna_counts.iter().enumerate() {
        let sigmas: Vec<f64> = windows.iter().map(|w| w[k + 1]).collect();
        std.push(m, &sigmas);
        let dbs: Vec<f64> = windows
            .iter()
            .filter(|w| w[0] > 0.0 && w[k + 1] > 0.0)
            .map(|w| 10.0 * (w[0] / w[k + 1]).log10())
            .collect();
        if dbs.len() < windows.len() {
            degenerate = true;
        }
        if dbs.is_empty() {
            db_complete = false;
        } else {
            db.push(m, &dbs);
        }
    }
    Ok(HardeningCurves {
        std,
        db: db_complete.then_some(db),
        windows: windows.len(),
        degenerate,
    })
}

// ---------------------------------------------------------------------------
// Random channel-vector draws for correlation and condition number

/// Draws channel vectors of `k` distinct locations, one random `(n, f)`
/// each, restricted to the first antennas in canonical order.
enum VectorPool {
    Model {
        gen: ChannelGenerator,
        order: Vec<usize>,
    },
    Locations {
        tensors: Vec<NormalizedTensor>,
        /// (tensor index, snapshot range) per virtual location.
        slots: Vec<(usize, TimeWindow)>,
        order: Vec<usize>,
    },
}

impl VectorPool {
    fn new(source: &Source, seed: RngSeed) -> Result<Self> {
        let order = canonical_order(&source.geometry());
        match source {
            Source::Model { model, .. } => Ok(VectorPool::Model {
                gen: ChannelGenerator::new(model)?,
                order,
            }),
            Source::Dataset(_) => {
                let locations = source.locations(seed)?;
                let mut slots = Vec::new();
                for (i, loc) in locations.iter().enumerate() {
                    let n = loc.tensor.tensor().snapshots();
                    let windows = segment_windows(loc.tensor.tensor(), VIRTUAL_LOCATION_SNAPSHOTS);
                    if windows.is_empty() {
                        slots.push((i, TimeWindow::new(0, n)));
                    } else {
                        slots.extend(windows.into_iter().map(|w| (i, w)));
                    }
                }
                Ok(VectorPool::Locations {
                    tensors: locations.into_iter().map(|l| l.tensor).collect(),
                    slots,
                    order,
                })
            }
        }
    }

    /// Number of distinct locations available per draw.
    fn capacity(&self) -> Option<usize> {
        match self {
            VectorPool::Model { .. } => None,
            VectorPool::Locations { slots, .. } => Some(slots.len()),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, k: usize, m: usize) -> Vec<Vec<Complex64>> {
        match self {
            VectorPool::Model { gen, order } => (0..k)
                .map(|_| {
                    let v = gen.vector(rng);
                    order[..m].iter().map(|&p| v[p]).collect()
                })
                .collect(),
            VectorPool::Locations { tensors, slots, order } => {
                let picks = draw_distinct(rng, slots.len(), k);
                picks
                    .into_iter()
                    .map(|s| {
                        let (ti, w) = slots[s];
                        let t = tensors[ti].tensor();
                        let n = w.start + rng.gen_range(0..w.length);
                        let f = rng.gen_range(0..t.freqs());
                        let v = t.vector(n, f);
                        order[..m].iter().map(|&p| v[p]).collect()
                    })
                    .collect()
            }
        }
    }
}

/// `k` distinct indices from `0..n`, uniformly, in draw order.
pub fn draw_distinct(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    index::sample(rng, n, k).into_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationCurves {
    /// Mean correlation coefficient (linear).
    pub delta: MetricCurve,
    /// Mean squared correlation coefficient.
    pub delta_sq: MetricCurve,
    /// `20 log10` of the mean coefficient, for display only.
    pub delta_db: Vec<Decibel>,
    /// Distinct locations drawn from; `None` for model sources.
    pub locations: Option<usize>,
}

/// Correlation coefficient between random pairs of distinct locations,
/// `trials` pairs per antenna count. Antenna count `j` uses `seed.child(j)`.
pub fn run_correlation_curve(
    source: &Source,
    antenna_counts: &[usize],
    trials: usize,
    seed: RngSeed,
) -> Result<CorrelationCurves> {
    check_antenna_counts(antenna_counts, source.antennas(), "antenna_counts")?;
    if trials == 0 {
        return Err(ExperimentError::Config("trials must be positive".into()));
    }
    let pool = VectorPool::new(source, seed)?;
    if let Some(n) = pool.capacity() {
        if n < 2 {
            return Err(ExperimentError::InsufficientData(format!(
                "correlation needs at least 2 locations, found {n}"
            )));
        }
    }
    let mut delta = MetricCurve::new("correlation_delta", "m", Scale::Linear);
    let mut delta_sq = MetricCurve::new("correlation_delta_sq", "m", Scale::Linear);
    let mut delta_db = Vec::new();
    for (j, &m) in antenna_counts.iter().enumerate() {
        let d = monte_carlo(trials, seed.child(j as u64), |rng| {
            let v = pool.draw(rng, 2, m);
            Ok(correlation_coefficient(&v[0], &v[1])?)
        })?;
        let d2: Vec<f64> = d.iter().map(|x| x * x).collect();
        delta.push(m, &d);
        delta_sq.push(m, &d2);
        let mean = *delta.mean.last().unwrap();
        delta_db.push(Decibel::from_power_floored(mean * mean, DB_FLOOR_LINEAR));
    }
    Ok(CorrelationCurves {
        delta,
        delta_sq,
        delta_db,
        locations: pool.capacity(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCurves {
    /// Mean inverse condition number versus node count `k`.
    pub curve: MetricCurve,
    /// Per node count, the distribution of the inverse condition number.
    pub cdfs: Vec<(usize, EmpiricalCdf)>,
    pub locations: Option<usize>,
}

/// Inverse condition number of `k` stacked channels from distinct random
/// locations on the first `antenna_count` antennas. Node count `j` uses
/// `seed.child(j)`.
pub fn run_condition_curve(
    source: &Source,
    node_counts: &[usize],
    antenna_count: usize,
    trials: usize,
    seed: RngSeed,
) -> Result<ConditionCurves> {
    let m = antenna_count;
    if m == 0 || m > source.antennas() {
        return Err(ExperimentError::Config(format!(
            "antenna_count must lie in 1..={}, got {m}",
            source.antennas()
        )));
    }
    if node_counts.is_empty() || node_counts.iter().any(|&k| k < 2) {
        return Err(ExperimentError::Config(format!(
            "node_counts must be non-empty and at least 2, got {node_counts:?}"
        )));
    }
    if node_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::Config("node_counts must be strictly increasing".into()));
    }
    if trials == 0 {
        return Err(ExperimentError::Config("trials must be positive".into()));
    }
    let pool = VectorPool::new(source, seed)?;
    if let Some(n) = pool.capacity() {
        let k_max = *node_counts.last().unwrap();
        if k_max > n {
            return Err(ExperimentError::InsufficientData(format!(
                "{k_max} nodes requested but only {n} locations available"
            )));
        }
    }
    let mut curve = MetricCurve::new("condition_inv_kappa", "k", Scale::Linear);
    let mut cdfs = Vec::new();
    for (j, &k) in node_counts.iter().enumerate() {
        let values = monte_carlo(trials, seed.child(j as u64), |rng| {
            let cols = pool.draw(rng, k, m);
            let refs: Vec<&[Complex64]> = cols.iter().map(|c| c.as_slice()).collect();
            let h = CMatrix::from_columns(&refs).map_err(MetricsError::from)?;
            Ok(inverse_condition_number(&h)?)
        })?;
        curve.push(k, &values);
        cdfs.push((k, EmpiricalCdf::new(values)));
    }
    Ok(ConditionCurves {
        curve,
        cdfs,
        locations: pool.capacity(),
    })
}

// ---------------------------------------------------------------------------
// Eigenstructure and chordal distance

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenConfig {
    pub window_length: usize,
    /// Dimension of the dominant eigenspace.
    pub p: usize,
    /// Frequency index the correlation matrices are formed at.
    pub frequency: usize,
    /// Antenna counts for the chordal-distance curve.
    pub antenna_counts: Vec<usize>,
    /// Two position groups whose windows are compared pairwise.
    pub groups: Option<(Vec<String>, Vec<String>)>,
}

impl EigenConfig {
    pub fn new(window_length: usize, p: usize) -> Self {
        Self {
            window_length,
            p,
            frequency: 0,
            antenna_counts: Vec::new(),
            groups: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowEigen {
    pub position_id: String,
    pub window_start: usize,
    /// Descending eigenvalues of the window's correlation matrix, in dB.
    pub values_db: Vec<Decibel>,
    pub energy_fraction: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenAnalysis {
    pub windows: Vec<WindowEigen>,
    /// Windows whose correlation matrix has rank below `p`.
    pub rank_deficient_windows: usize,
    pub chordal: Option<MetricCurve>,
    /// Windows left out of the chordal curve for lack of rank, summed over
    /// antenna counts.
    pub chordal_skipped: usize,
}

impl EigenAnalysis {
    /// One row per window: `position,window_start,lambda_1,...,lambda_M` in dB.
    pub fn values_csv(&self) -> String {
        let dim = self.windows.first().map_or(0, |w| w.values_db.len());
        let mut out = String::from("position,window_start");
        for i in 1..=dim {
            out.push_str(&format!(",lambda_{i}"));
        }
        out.push('\n');
        for w in &self.windows {
            out.push_str(&format!("{},{}", w.position_id, w.window_start));
            for v in &w.values_db {
                out.push_str(&format!(",{}", v.reported()));
            }
            out.push('\n');
        }
        out
    }

    pub fn energy_csv(&self) -> String {
        let mut out = String::from("position,window_start,energy_fraction,rank\n");
        for w in &self.windows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                w.position_id, w.window_start, w.energy_fraction, w.rank
            ));
        }
        out
    }
}

/// Per-window eigenvalue spectra and, when groups are configured, the mean
/// chordal distance between the groups' `p`-dominant eigenspaces versus the
/// number of antennas.
pub fn run_eigen_analysis(source: &Source, config: &EigenConfig, seed: RngSeed) -> Result<EigenAnalysis> {
    let geometry = source.geometry();
    let antennas = geometry.num_elements();
    if config.p == 0 || config.p > antennas {
        return Err(ExperimentError::Config(format!(
            "p must lie in 1..={antennas}, got {}",
            config.p
        )));
    }
    if config.window_length < config.p {
        return Err(ExperimentError::Config(format!(
            "window_length {} is shorter than p = {}",
            config.window_length, config.p
        )));
    }
    if config.groups.is_some() {
        check_antenna_counts(&config.antenna_counts, antennas, "antenna_counts")?;
        if config.antenna_counts[0] < config.p {
            return Err(ExperimentError::Config(format!(
                "antenna_counts must be at least p = {}",
                config.p
            )));
        }
    }
    let locations = source.locations(seed)?;
    if let Some(l) = locations.first() {
        if config.frequency >= l.tensor.tensor().freqs() {
            return Err(ExperimentError::Config(format!(
                "frequency index {} out of range",
                config.frequency
            )));
        }
    }

    let per_location: Vec<Vec<WindowEigen>> = locations
        .par_iter()
        .map(|loc| {
            segment_windows(loc.tensor.tensor(), config.window_length)
                .into_iter()
                .map(|w| {
                    let r = correlation_matrix(&loc.tensor, w, config.frequency)?;
                    let s = linalg::eigh(&r).map_err(MetricsError::from)?;
                    Ok(WindowEigen {
                        position_id: loc.id.clone(),
                        window_start: w.start,
                        values_db: s
                            .values()
                            .iter()
                            .map(|&v| Decibel::from_power_floored(v, DB_FLOOR_LINEAR))
                            .collect(),
                        energy_fraction: eigen_energy_fraction(&s, config.p)?,
                        rank: s.rank(),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let windows: Vec<WindowEigen> = per_location.into_iter().flatten().collect();
    let rank_deficient_windows = windows.iter().filter(|w| w.rank < config.p).count();

    let (chordal, chordal_skipped) = match &config.groups {
        None => (None, 0),
        Some((a, b)) => {
            let (curve, skipped) = chordal_curve(&locations, &geometry, config, a, b)?;
            (Some(curve), skipped)
        }
    };
    Ok(EigenAnalysis {
        windows,
        rank_deficient_windows,
        chordal,
        chordal_skipped,
    })
}

fn group_eigenspaces(
    locations: &[Location],
    geometry: &ArrayGeometry,
    ids: &[String],
    config: &EigenConfig,
    m: usize,
) -> Result<(Vec<CMatrix>, usize)> {
    let mut spaces = Vec::new();
    let mut skipped = 0;
    for id in ids {
        let loc = locations
            .iter()
            .find(|l| &l.id == id)
            .ok_or_else(|| ExperimentError::UnknownPosition(id.clone()))?;
        let subset = NormalizedTensor::assume_normalized(select_antennas(loc.tensor.tensor(), geometry, m, 0)?);
        for w in segment_windows(subset.tensor(), config.window_length) {
            let r = correlation_matrix(&subset, w, config.frequency)?;
            let s = linalg::eigh(&r).map_err(MetricsError::from)?;
            match metrics::dominant_eigenspace(&s, config.p) {
                Ok(u) => spaces.push(u),
                Err(MetricsError::InsufficientRank { .. }) => skipped += 1,
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok((spaces, skipped))
}

fn chordal_curve(
    locations: &[Location],
    geometry: &ArrayGeometry,
    config: &EigenConfig,
    group_a: &[String],
    group_b: &[String],
) -> Result<(MetricCurve, usize)> {
    let mut curve = MetricCurve::new("eigen_chordal", "m", Scale::Linear);
    let mut skipped_total = 0;
    for &m in &config.antenna_counts {
        let (ua, sa) = group_eigenspaces(locations, geometry, group_a, config, m)?;
        let (ub, sb) = group_eigenspaces(locations, geometry, group_b, config, m)?;
        skipped_total += sa + sb;
        let mut d = Vec::with_capacity(ua.len() * ub.len());
        for x in &ua {
            for y in &ub {
                d.push(metrics::chordal_distance(x, y)?);
            }
        }
        if !d.is_empty() {
            curve.push(m, &d);
        }
    }
    Ok((curve, skipped_total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{write_dataset, load_dataset, DatasetManifest, PositionEntry};
    use crate::synth::{generate, ModelKind};
    use crate::tensor::ChannelTensor;
    use std::collections::BTreeMap;

    fn iid_source(m: usize, n: usize, f: usize, positions: usize) -> Source {
        Source::Model {
            model: ChannelModel::iid(m, n, f),
            positions,
        }
    }

    fn dataset_from(tensors: Vec<ChannelTensor>, dir: &std::path::Path) -> Dataset {
        let m = tensors[0].antennas();
        let f = tensors[0].freqs();
        let mut manifest = DatasetManifest::new(ArrayGeometry::ula(m), f, 869.525e6, 0.01);
        let mut map = BTreeMap::new();
        for t in tensors {
            manifest.positions.push(PositionEntry {
                id: t.position_id().to_string(),
                label: String::new(),
                los: true,
                distance_m: None,
                path_label: None,
                num_snapshots: t.snapshots(),
                file: format!("{}.cf64", t.position_id()),
            });
            map.insert(t.position_id().to_string(), t);
        }
        write_dataset(&manifest, &map, dir).unwrap();
        load_dataset(dir).unwrap()
    }

    #[test]
    fn monte_carlo_is_chunk_deterministic() {
        let seed = RngSeed::new(3, 0);
        let a = monte_carlo(3000, seed, |rng| Ok(rng.gen::<u64>())).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| monte_carlo(3000, seed, |rng| Ok(rng.gen::<u64>())).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.len(), 3000);
        let mut first = seed.child(1).rng();
        assert_eq!(a[CHUNK_TRIALS], first.gen::<u64>());
    }

    #[test]
    fn mean_stderr_examples() {
        assert_eq!(mean_stderr(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cdf_is_monotone() {
        let cdf = EmpiricalCdf::new(vec![0.3, 0.1, 0.2, 0.2]);
        assert_eq!(cdf.values(), &[0.1, 0.2, 0.2, 0.3]);
        assert_eq!(cdf.eval(0.0), 0.0);
        assert_eq!(cdf.eval(0.2), 0.75);
        assert_eq!(cdf.eval(1.0), 1.0);
        assert_eq!(cdf.to_csv(), "value,cdf\n0.1,0.25\n0.2,0.5\n0.2,0.75\n0.3,1\n");
    }

    #[test]
    fn curve_csv_header() {
        let mut c = MetricCurve::new("x", "m", Scale::Linear);
        c.push(1, &[1.0, 1.0]);
        assert_eq!(c.to_csv(), "m,mean,stderr,trials\n1,1,0,2\n");
    }

    #[test]
    fn hardening_iid_sixteen_antennas() {
        let src = iid_source(16, 600, 2, 0);
        let c = run_hardening_curve(&src, 600, &[1, 4, 16], 400, RngSeed::new(1, 0)).unwrap();
        let db = c.db.unwrap();
        assert_eq!(db.at(1), Some(0.0));
        assert!((db.at(16).unwrap() - 5.0 * 16f64.log10()).abs() < 0.3);
        assert!((db.at(4).unwrap() - 5.0 * 4f64.log10()).abs() < 0.3);
        assert_eq!(c.windows, 400);
        assert!(!c.degenerate);
    }

    #[test]
    fn hardening_matches_metric_definition_per_window() {
        let t = generate(&ChannelModel::iid(8, 300, 2), RngSeed::new(5, 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let ds = dataset_from(vec![t.clone().with_position_id("a")], dir.path());
        let c = run_hardening_curve(&Source::Dataset(ds), 300, &[3, 8], 1, RngSeed::new(0, 0)).unwrap();
        let n = normalize(&t).unwrap();
        let g = ArrayGeometry::ula(8);
        let expected = metrics::hardening_db(&n, &g, 8).unwrap();
        assert!((c.db.unwrap().at(8).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn hardening_constant_channel_is_degenerate() {
        let t = ChannelTensor::from_fn("c", 20, 2, 4, |_, _, _| Complex64::new(1.0, -1.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let ds = dataset_from(vec![t], dir.path());
        let c = run_hardening_curve(&Source::Dataset(ds), 10, &[1, 2, 4], 1, RngSeed::new(0, 0)).unwrap();
        assert!(c.degenerate);
        assert!(c.db.is_none());
        assert!(c.std.mean.iter().all(|&s| s.abs() < 1e-15));
    }

    #[test]
    fn hardening_without_windows_fails() {
        let src = iid_source(4, 10, 1, 0);
        assert!(matches!(
            run_hardening_curve(&src, 20, &[1, 4], 3, RngSeed::new(0, 0)),
            Err(ExperimentError::InsufficientData(_))
        ));
        assert!(matches!(
            run_hardening_curve(&src, 5, &[1, 5], 3, RngSeed::new(0, 0)),
            Err(ExperimentError::Config(_))
        ));
    }

    #[test]
    fn correlation_single_antenna_is_one() {
        let src = iid_source(4, 1, 1, 0);
        let c = run_correlation_curve(&src, &[1, 4], 2000, RngSeed::new(2, 0)).unwrap();
        assert_eq!(c.delta.at(1), Some(1.0));
        assert_eq!(c.delta_sq.at(1), Some(1.0));
        let d2 = c.delta_sq.at(4).unwrap();
        assert!((d2 - 0.25).abs() < 4.0 * c.delta_sq.stderr_at(4).unwrap());
    }

    #[test]
    fn correlation_needs_two_locations() {
        let t = generate(&ChannelModel::iid(4, 50, 1), RngSeed::new(0, 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let ds = dataset_from(vec![t.with_position_id("only")], dir.path());
        assert!(matches!(
            run_correlation_curve(&Source::Dataset(ds), &[2], 10, RngSeed::new(0, 0)),
            Err(ExperimentError::InsufficientData(_))
        ));
    }

    #[test]
    fn dataset_draws_never_pair_a_location_with_itself() {
        // Each virtual location holds one constant vector, and distinct
        // locations hold orthogonal vectors, so any self-pair would give 1.
        let tensors: Vec<ChannelTensor> = (0..3)
            .map(|p| {
                ChannelTensor::from_fn(format!("p{p}"), 200, 1, 6, move |n, _, m| {
                    let slot = p * 2 + n / 100;
                    if m == slot { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
                })
                .unwrap()
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let ds = dataset_from(tensors, dir.path());
        let c = run_correlation_curve(&Source::Dataset(ds), &[6], 5000, RngSeed::new(4, 0)).unwrap();
        assert_eq!(c.locations, Some(6));
        assert_eq!(c.delta.at(6), Some(0.0));
    }

    #[test]
    fn condition_k_above_m_is_zero() {
        let src = iid_source(8, 1, 1, 0);
        let c = run_condition_curve(&src, &[4, 5], 3, 500, RngSeed::new(6, 0)).unwrap();
        assert_eq!(c.curve.at(4), Some(0.0));
        assert_eq!(c.curve.at(5), Some(0.0));
    }

    #[test]
    fn condition_two_nodes_cdf_spans_unit_interval() {
        let src = iid_source(8, 1, 1, 0);
        let c = run_condition_curve(&src, &[2], 8, 2000, RngSeed::new(6, 1)).unwrap();
        let cdf = &c.cdfs[0].1;
        assert!(cdf.values()[0] > 0.0);
        assert!(*cdf.values().last().unwrap() <= 1.0);
        let mut prev = 0.0;
        for q in [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
            let v = cdf.eval(q);
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(cdf.eval(1.0), 1.0);
    }

    #[test]
    fn condition_rejects_more_nodes_than_locations() {
        let t = generate(&ChannelModel::iid(4, 200, 1), RngSeed::new(0, 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let ds = dataset_from(vec![t.with_position_id("a")], dir.path());
        assert!(matches!(
            run_condition_curve(&Source::Dataset(ds), &[2, 3], 4, 10, RngSeed::new(0, 0)),
            Err(ExperimentError::InsufficientData(_))
        ));
    }

    #[test]
    fn eigen_analysis_identical_groups_have_zero_distance() {
        let src = iid_source(8, 200, 1, 2);
        let mut cfg = EigenConfig::new(100, 3);
        cfg.antenna_counts = vec![3, 5, 8];
        cfg.groups = Some((vec![Source::realization_id(0)], vec![Source::realization_id(0)]));
        let a = run_eigen_analysis(&src, &cfg, RngSeed::new(1, 0)).unwrap();
        assert_eq!(a.windows.len(), 4);
        let chordal = a.chordal.unwrap();
        assert_eq!(chordal.x, vec![3, 5, 8]);
        // Two windows per group: matching windows give 0, others do not.
        assert_eq!(chordal.trials, vec![4, 4, 4]);

        cfg.groups = Some((vec![Source::realization_id(0)], vec![Source::realization_id(1)]));
        let b = run_eigen_analysis(&src, &cfg, RngSeed::new(1, 0)).unwrap();
        for &d in &b.chordal.unwrap().mean {
            assert!(d > 0.0 && d <= 6.0);
        }
    }

    #[test]
    fn eigen_analysis_multipath_energy() {
        let model = ChannelModel {
            kind: ModelKind::SparseMultipath {
                steering_angles: vec![-0.4, 0.2, 0.7],
                path_powers: vec![1.0, 1.0, 1.0],
                noise_floor: 0.01,
            },
            antennas: 16,
            snapshots: 600,
            freqs: 1,
        };
        let src = Source::Model { model, positions: 3 };
        let a = run_eigen_analysis(&src, &EigenConfig::new(600, 3), RngSeed::new(2, 0)).unwrap();
        assert_eq!(a.windows.len(), 3);
        assert!(a.windows.iter().all(|w| w.energy_fraction >= 0.95));
        assert_eq!(a.rank_deficient_windows, 0);
    }

    #[test]
    fn eigen_analysis_validates_parameters() {
        let src = iid_source(4, 10, 1, 1);
        assert!(run_eigen_analysis(&src, &EigenConfig::new(2, 3), RngSeed::new(0, 0)).is_err());
        let mut cfg = EigenConfig::new(10, 2);
        cfg.antenna_counts = vec![1, 4];
        cfg.groups = Some((vec![], vec![]));
        assert!(run_eigen_analysis(&src, &cfg, RngSeed::new(0, 0)).is_err());
        cfg.antenna_counts = vec![2, 4];
        cfg.groups = Some((vec!["nope".into()], vec![]));
        assert!(matches!(
            run_eigen_analysis(&src, &cfg, RngSeed::new(0, 0)),
            Err(ExperimentError::UnknownPosition(_))
        ));
    }

    #[test]
    fn rank_deficient_windows_are_counted() {
        // A constant channel has a rank-1 correlation matrix.
        let t = ChannelTensor::from_fn("c", 30, 1, 4, |_, _, m| Complex64::new(1.0 + m as f64, 0.5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let ds = dataset_from(vec![t], dir.path());
        let mut cfg = EigenConfig::new(10, 2);
        cfg.antenna_counts = vec![2, 4];
        cfg.groups = Some((vec!["c".into()], vec!["c".into()]));
        let a = run_eigen_analysis(&Source::Dataset(ds), &cfg, RngSeed::new(0, 0)).unwrap();
        assert_eq!(a.windows.len(), 3);
        assert_eq!(a.rank_deficient_windows, 3);
        assert!(a.windows.iter().all(|w| w.rank == 1 && (w.energy_fraction - 1.0).abs() < 1e-12));
        assert!(a.chordal.unwrap().is_empty());
        assert_eq!(a.chordal_skipped, 12);
    }
}
