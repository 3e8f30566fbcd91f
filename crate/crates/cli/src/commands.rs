use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chanmetrics::experiments::{
    self, EigenConfig, ExperimentError, Source, DEFAULT_CONDITION_TRIALS, DEFAULT_CORRELATION_TRIALS,
    DEFAULT_WINDOW_LENGTH, VIRTUAL_LOCATION_SNAPSHOTS,
};
use chanmetrics::ingest::{self, IngestError, PositionEntry};
use chanmetrics::scheduler::{self, ChordalSeparation, CorrelationSeparation, ScheduleError, Separation};
use chanmetrics::synth::ChannelGenerator;
use chanmetrics::{DatasetManifest, RngSeed};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{load_config, ModelSpec, RunConfig, SourceConfig};
use crate::output::Outputs;
use crate::{AnalyzeArgs, Cli, CliError, Command, ModelArgs, ScheduleArgs};

const SYNTH_CARRIER_HZ: f64 = 869.525e6;
const SYNTH_SNAPSHOT_INTERVAL_S: f64 = 0.01;
const DEFAULT_HARDENING_TRIALS: usize = 100;
const DEFAULT_CONDITION_NODES: usize = 8;
const DEFAULT_OUT: &str = "results";

// Child streams of the master seed, one per experiment family. Eigen
// analysis and scheduling share one so they see the same synthetic
// positions.
const STREAM_HARDENING: u64 = 1;
const STREAM_CORRELATION: u64 = 2;
const STREAM_CONDITION: u64 = 3;
const STREAM_POSITIONS: u64 = 4;

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let seed = RngSeed::new(cli.seed.or(cfg.seed).unwrap_or(0), 0);
    let threads = cli.threads.or(cfg.threads).unwrap_or(0);
    let out = cli.out.clone().or_else(|| cfg.out.clone());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))?;
    pool.install(move || match cli.command {
        Command::Synth(args) => synth(&args, &cfg, seed, out),
        Command::Analyze(args) => analyze(&args, cfg, seed, out),
        Command::Validate { dataset } => validate(&dataset),
        Command::Schedule(args) => schedule(&args, &cfg, seed, out),
    })
}

fn ingest_err(e: IngestError) -> CliError {
    match e {
        IngestError::Io { .. } => CliError::Io(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn experiment_err(e: ExperimentError) -> CliError {
    match e {
        ExperimentError::Config(_) | ExperimentError::UnknownPosition(_) | ExperimentError::Synth(_) => {
            CliError::Usage(e.to_string())
        }
        ExperimentError::Ingest(e) => ingest_err(e),
        other => CliError::Data(other.to_string()),
    }
}

fn schedule_err(e: ScheduleError) -> CliError {
    match e {
        ScheduleError::InvalidInput(_) => CliError::Usage(e.to_string()),
        ScheduleError::Experiment(e) => experiment_err(e),
        other => CliError::Data(other.to_string()),
    }
}

fn config_model(cfg: &RunConfig) -> ModelSpec {
    match &cfg.source {
        Some(SourceConfig::Model(spec)) => spec.clone(),
        _ => ModelSpec::default(),
    }
}

fn synth(args: &ModelArgs, cfg: &RunConfig, seed: RngSeed, out: Option<PathBuf>) -> Result<(), CliError> {
    let spec = config_model(cfg).merged(&args.spec());
    let model = spec.channel_model()?;
    let geometry = spec.geometry()?;
    let positions = spec.positions();
    if positions == 0 {
        return Err(CliError::Usage("--positions must be positive".into()));
    }
    let out = out.ok_or_else(|| CliError::Usage("synth needs --out".into()))?;
    let gen = ChannelGenerator::new(&model).map_err(|e| CliError::Usage(e.to_string()))?;

    let ids: Vec<String> = (0..positions).map(|i| format!("p{i:03}")).collect();
    let tensors: BTreeMap<_, _> = ids
        .par_iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), gen.tensor(id, &mut seed.child(i as u64).rng())))
        .collect();

    let mut manifest = DatasetManifest::new(geometry, model.freqs, SYNTH_CARRIER_HZ, SYNTH_SNAPSHOT_INTERVAL_S);
    for id in &ids {
        manifest.positions.push(PositionEntry {
            id: id.clone(),
            label: format!("synthetic {}", spec.kind.as_deref().unwrap_or("iid")),
            los: false,
            distance_m: None,
            path_label: None,
            num_snapshots: model.snapshots,
            file: format!("{id}.cf64"),
        });
    }
    ingest::write_dataset(&manifest, &tensors, &out).map_err(ingest_err)?;
    println!(
        "synth: wrote {positions} positions ({} antennas, {} snapshots, {} freqs) to {}",
        model.antennas,
        model.snapshots,
        model.freqs,
        out.display()
    );
    Ok(())
}

fn validate(path: &Path) -> Result<(), CliError> {
    if !path.exists() {
        return Err(CliError::Io(format!("{} does not exist", path.display())));
    }
    let report = ingest::validate_dataset(path);
    match &report.manifest_error {
        Some(e) => println!("FAIL manifest: {e}"),
        None => println!("PASS manifest"),
    }
    for p in &report.positions {
        match &p.error {
            Some(e) => println!("FAIL {}: {e}", p.id),
            None => println!("PASS {}", p.id),
        }
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} failed validation", path.display())))
    }
}

/// A resolved data source plus what validation needs to know about it.
struct ResolvedSource {
    source: Source,
    freqs: usize,
    /// Snapshot counts per position; `None` for model sources.
    snapshots: Option<Vec<usize>>,
    model_snapshots: usize,
    ids: Vec<String>,
    summary: Value,
}

impl ResolvedSource {
    fn antennas(&self) -> usize {
        self.source.antennas()
    }

    fn max_snapshots(&self) -> usize {
        match &self.snapshots {
            Some(n) => n.iter().copied().max().unwrap_or(0),
            None => self.model_snapshots,
        }
    }

    /// Distinct draw locations, `None` when every draw is fresh.
    fn locations(&self) -> Option<usize> {
        self.snapshots.as_ref().map(|n| {
            n.iter()
                .map(|&s| (s / VIRTUAL_LOCATION_SNAPSHOTS).max(1))
                .sum()
        })
    }
}

fn resolve_source(dataset: Option<&PathBuf>, flags: &ModelArgs, cfg: &RunConfig) -> Result<ResolvedSource, CliError> {
    let flag_spec = flags.spec();
    let dataset_path = match (dataset, &cfg.source) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(SourceConfig::Dataset(p))) if flag_spec.is_empty() => Some(p.clone()),
        _ => None,
    };
    if let Some(path) = dataset_path {
        let ds = ingest::load_dataset(&path).map_err(ingest_err)?;
        let manifest = ds.manifest();
        let snapshots: Vec<usize> = manifest.positions.iter().map(|p| p.num_snapshots).collect();
        let summary = json!({
            "kind": "dataset",
            "positions": manifest.positions.len(),
            "antennas": manifest.num_antennas,
            "freqs": manifest.num_freqs,
        });
        return Ok(ResolvedSource {
            freqs: manifest.num_freqs,
            ids: ds.position_ids().map(str::to_string).collect(),
            snapshots: Some(snapshots),
            model_snapshots: 0,
            source: Source::Dataset(ds),
            summary,
        });
    }
    let spec = config_model(cfg).merged(&flag_spec);
    if spec.is_empty() {
        return Err(CliError::Usage(
            "no data source: pass --dataset, model flags, or a config source".into(),
        ));
    }
    let model = spec.channel_model()?;
    let positions = spec.positions();
    if positions == 0 {
        return Err(CliError::Usage("--positions must be positive".into()));
    }
    let summary = json!({
        "kind": "model",
        "model": serde_json::to_value(&model).expect("model serializes"),
        "positions": positions,
    });
    Ok(ResolvedSource {
        freqs: model.freqs,
        ids: (0..positions).map(Source::realization_id).collect(),
        snapshots: None,
        model_snapshots: model.snapshots,
        source: Source::Model { model, positions },
        summary,
    })
}

fn check_counts(counts: &[usize], min: usize, max: usize, what: &str) -> Result<(), CliError> {
    if counts.is_empty() {
        return Err(CliError::Usage(format!("{what} must not be empty")));
    }
    if counts.iter().any(|&c| c < min || c > max) {
        return Err(CliError::Usage(format!("{what} must lie in {min}..={max}, got {counts:?}")));
    }
    if counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage(format!("{what} must be strictly increasing, got {counts:?}")));
    }
    Ok(())
}

fn check_positive(value: usize, what: &str) -> Result<(), CliError> {
    if value == 0 {
        return Err(CliError::Usage(format!("{what} must be positive")));
    }
    Ok(())
}

fn check_window(src: &ResolvedSource, window_length: usize, what: &str) -> Result<(), CliError> {
    check_positive(window_length, what)?;
    if window_length > src.max_snapshots() {
        return Err(CliError::Usage(format!(
            "{what} {window_length} exceeds the longest position ({} snapshots)",
            src.max_snapshots()
        )));
    }
    Ok(())
}

fn default_correlation_counts(m: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = std::iter::successors(Some(1usize), |c| Some(c * 2))
        .take_while(|&c| c <= m)
        .collect();
    if counts.last() != Some(&m) {
        counts.push(m);
    }
    counts
}

struct HardeningPlan {
    window_length: usize,
    antenna_counts: Vec<usize>,
    trials: usize,
}

struct CorrelationPlan {
    antenna_counts: Vec<usize>,
    trials: usize,
}

struct ConditionPlan {
    node_counts: Vec<usize>,
    antenna_count: usize,
    trials: usize,
}

struct SchedulePlan {
    window_length: usize,
    p: usize,
    group_size: usize,
    metric: String,
}

#[derive(Default)]
struct Plan {
    hardening: Option<HardeningPlan>,
    correlation: Option<CorrelationPlan>,
    condition: Option<ConditionPlan>,
    eigen: Option<EigenConfig>,
    schedule: Option<SchedulePlan>,
}

fn schedule_plan(
    src: &ResolvedSource,
    section: Option<&crate::config::ScheduleConfig>,
    window_length: Option<usize>,
    p: Option<usize>,
    group_size: Option<usize>,
    metric: Option<&String>,
) -> Result<SchedulePlan, CliError> {
    let plan = SchedulePlan {
        window_length: window_length
            .or(section.and_then(|s| s.window_length))
            .unwrap_or(DEFAULT_WINDOW_LENGTH.min(src.max_snapshots())),
        p: p.or(section.and_then(|s| s.p))
            .unwrap_or(scheduler::DEFAULT_SUBSPACE_DIM.min(src.antennas())),
        group_size: group_size.or(section.and_then(|s| s.group_size)).unwrap_or(2),
        metric: metric
            .cloned()
            .or(section.and_then(|s| s.metric.clone()))
            .unwrap_or_else(|| "chordal".into()),
    };
    check_window(src, plan.window_length, "schedule window_length")?;
    check_counts(&[plan.p], 1, src.antennas(), "schedule p")?;
    if plan.group_size < 2 {
        return Err(CliError::Usage(format!(
            "group_size must be at least 2, got {}",
            plan.group_size
        )));
    }
    if plan.metric != "chordal" && plan.metric != "correlation" {
        return Err(CliError::Usage(format!(
            "unknown scheduling metric {:?} (expected chordal or correlation)",
            plan.metric
        )));
    }
    Ok(plan)
}

/// Resolves every enabled experiment's parameters and checks them.
fn build_plan(args: &AnalyzeArgs, cfg: &RunConfig, src: &ResolvedSource) -> Result<Plan, CliError> {
    let mut sections = cfg.experiments.clone();
    if let Some(names) = &args.experiments {
        let mut selected = crate::config::ExperimentsConfig::default();
        for name in names {
            selected.enable(name)?;
        }
        // Keep configured parameters for the selected experiments.
        macro_rules! keep {
            ($($f:ident),*) => { $( if selected.$f.is_some() && sections.$f.is_some() { selected.$f = sections.$f.take(); } )* };
        }
        keep!(hardening, correlation, condition, eigen, schedule);
        sections = selected;
    }
    if sections.names().is_empty() {
        return Err(CliError::Usage(
            "no experiments selected: pass --experiments or configure some".into(),
        ));
    }
    let m = src.antennas();
    let mut plan = Plan::default();

    if let Some(s) = &sections.hardening {
        let h = HardeningPlan {
            window_length: args
                .window_length
                .or(s.window_length)
                .unwrap_or(DEFAULT_WINDOW_LENGTH.min(src.max_snapshots())),
            antenna_counts: args
                .antenna_counts
                .clone()
                .or(s.antenna_counts.clone())
                .unwrap_or_else(|| (1..=m).collect()),
            trials: args.trials.or(s.trials).unwrap_or(DEFAULT_HARDENING_TRIALS),
        };
        check_window(src, h.window_length, "hardening window_length")?;
        check_counts(&h.antenna_counts, 1, m, "hardening antenna_counts")?;
        check_positive(h.trials, "hardening trials")?;
        plan.hardening = Some(h);
    }

    if let Some(s) = &sections.correlation {
        let c = CorrelationPlan {
            antenna_counts: args
                .antenna_counts
                .clone()
                .or(s.antenna_counts.clone())
                .unwrap_or_else(|| default_correlation_counts(m)),
            trials: args.trials.or(s.trials).unwrap_or(DEFAULT_CORRELATION_TRIALS),
        };
        check_counts(&c.antenna_counts, 1, m, "correlation antenna_counts")?;
        check_positive(c.trials, "correlation trials")?;
        if src.locations().is_some_and(|n| n < 2) {
            return Err(CliError::Usage("correlation needs at least 2 locations".into()));
        }
        plan.correlation = Some(c);
    }

    if let Some(s) = &sections.condition {
        let max_nodes = src.locations().unwrap_or(usize::MAX);
        let c = ConditionPlan {
            node_counts: args
                .node_counts
                .clone()
                .or(s.node_counts.clone())
                .unwrap_or_else(|| (2..=DEFAULT_CONDITION_NODES.min(max_nodes)).collect()),
            antenna_count: args.antenna_count.or(s.antenna_count).unwrap_or(m),
            trials: args.trials.or(s.trials).unwrap_or(DEFAULT_CONDITION_TRIALS),
        };
        check_counts(&c.node_counts, 2, max_nodes, "condition node_counts")?;
        check_counts(&[c.antenna_count], 1, m, "condition antenna_count")?;
        check_positive(c.trials, "condition trials")?;
        plan.condition = Some(c);
    }

    if let Some(s) = &sections.eigen {
        let p = args
            .p
            .or(s.p)
            .unwrap_or(scheduler::DEFAULT_SUBSPACE_DIM.min(m));
        let mut e = EigenConfig::new(
            args.window_length
                .or(s.window_length)
                .unwrap_or(DEFAULT_WINDOW_LENGTH.min(src.max_snapshots())),
            p,
        );
        e.frequency = args.frequency.or(s.frequency).unwrap_or(0);
        check_counts(&[p], 1, m, "eigen p")?;
        e.antenna_counts = args
            .antenna_counts
            .clone()
            .or(s.antenna_counts.clone())
            .unwrap_or_else(|| (p..=m).collect());
        check_window(src, e.window_length, "eigen window_length")?;
        check_counts(&e.antenna_counts, p, m, "eigen antenna_counts")?;
        if e.frequency >= src.freqs {
            return Err(CliError::Usage(format!(
                "eigen frequency {} out of range (source has {} frequencies)",
                e.frequency, src.freqs
            )));
        }
        let a = args.group_a.clone().or(s.group_a.clone());
        let b = args.group_b.clone().or(s.group_b.clone());
        e.groups = match (a, b) {
            (None, None) => None,
            (Some(a), Some(b)) => {
                for id in a.iter().chain(&b) {
                    if !src.ids.contains(id) {
                        return Err(CliError::Usage(format!("unknown position {id:?} in eigen groups")));
                    }
                }
                if a.is_empty() || b.is_empty() {
                    return Err(CliError::Usage("eigen groups must not be empty".into()));
                }
                Some((a, b))
            }
            _ => return Err(CliError::Usage("eigen needs both group_a and group_b, or neither".into())),
        };
        plan.eigen = Some(e);
    }

    if let Some(s) = &sections.schedule {
        plan.schedule = Some(schedule_plan(
            src,
            Some(s),
            args.window_length,
            args.p,
            args.group_size,
            args.metric.as_ref(),
        )?);
    }
    Ok(plan)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

fn analyze(args: &AnalyzeArgs, cfg: RunConfig, seed: RngSeed, out: Option<PathBuf>) -> Result<(), CliError> {
    let src = resolve_source(args.dataset.as_ref(), &args.model, &cfg)?;
    let plan = build_plan(args, &cfg, &src)?;
    let out = out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

    let mut files = Outputs::default();
    let mut summary = serde_json::Map::new();
    let mut lines = Vec::new();

    if let Some(h) = &plan.hardening {
        let curves = experiments::run_hardening_curve(
            &src.source,
            h.window_length,
            &h.antenna_counts,
            h.trials,
            seed.child(STREAM_HARDENING),
        )
        .map_err(experiment_err)?;
        files.add("hardening_std.csv", curves.std.to_csv());
        if let Some(db) = &curves.db {
            files.add("hardening_db.csv", db.to_csv());
        }
        let m_max = *h.antenna_counts.last().unwrap();
        let final_db = curves.db.as_ref().and_then(|c| c.at(m_max));
        lines.push(format!(
            "hardening: {} windows of {} snapshots, hardening({m_max}) = {} dB{}",
            curves.windows,
            h.window_length,
            fmt_opt(final_db),
            if curves.degenerate { " (degenerate windows skipped)" } else { "" }
        ));
        summary.insert(
            "hardening".into(),
            json!({
                "window_length": h.window_length,
                "windows": curves.windows,
                "degenerate": curves.degenerate,
                "antenna_counts": h.antenna_counts,
                "hardening_db": final_db,
                "std": curves.std.mean,
            }),
        );
    }

    if let Some(c) = &plan.correlation {
        let curves = experiments::run_correlation_curve(
            &src.source,
            &c.antenna_counts,
            c.trials,
            seed.child(STREAM_CORRELATION),
        )
        .map_err(experiment_err)?;
        files.add("correlation_delta.csv", curves.delta.to_csv());
        files.add("correlation_delta_sq.csv", curves.delta_sq.to_csv());
        let m_max = *c.antenna_counts.last().unwrap();
        lines.push(format!(
            "correlation: {} trials per count, mean delta^2 at M={m_max} = {} (1/M = {:.4})",
            c.trials,
            fmt_opt(curves.delta_sq.at(m_max)),
            1.0 / m_max as f64
        ));
        summary.insert(
            "correlation".into(),
            json!({
                "trials": c.trials,
                "locations": curves.locations,
                "antenna_counts": c.antenna_counts,
                "delta": curves.delta.mean,
                "delta_sq": curves.delta_sq.mean,
                "delta_db": curves.delta_db,
            }),
        );
    }

    if let Some(c) = &plan.condition {
        let curves = experiments::run_condition_curve(
            &src.source,
            &c.node_counts,
            c.antenna_count,
            c.trials,
            seed.child(STREAM_CONDITION),
        )
        .map_err(experiment_err)?;
        files.add("condition_inv_kappa.csv", curves.curve.to_csv());
        for (k, cdf) in &curves.cdfs {
            files.add(format!("condition_cdf_k{k}.csv"), cdf.to_csv());
        }
        let k0 = c.node_counts[0];
        lines.push(format!(
            "condition: M={} over {} trials, mean inverse condition number at K={k0} = {}",
            c.antenna_count,
            c.trials,
            fmt_opt(curves.curve.at(k0))
        ));
        summary.insert(
            "condition".into(),
            json!({
                "antenna_count": c.antenna_count,
                "trials": c.trials,
                "locations": curves.locations,
                "node_counts": c.node_counts,
                "inv_kappa": curves.curve.mean,
            }),
        );
    }

    if let Some(e) = &plan.eigen {
        let analysis = experiments::run_eigen_analysis(&src.source, e, seed.child(STREAM_POSITIONS))
            .map_err(experiment_err)?;
        files.add("eigen_values_db.csv", analysis.values_csv());
        files.add("eigen_energy.csv", analysis.energy_csv());
        if let Some(chordal) = &analysis.chordal {
            files.add("eigen_chordal.csv", chordal.to_csv());
        }
        let fractions: Vec<f64> = analysis.windows.iter().map(|w| w.energy_fraction).collect();
        let (mean_fraction, _) = experiments::mean_stderr(&fractions);
        lines.push(format!(
            "eigen: {} windows ({} rank-deficient), mean energy in {} dominant eigenvalues = {:.4}",
            analysis.windows.len(),
            analysis.rank_deficient_windows,
            e.p,
            mean_fraction
        ));
        summary.insert(
            "eigen".into(),
            json!({
                "window_length": e.window_length,
                "p": e.p,
                "frequency": e.frequency,
                "windows": analysis.windows.len(),
                "rank_deficient_windows": analysis.rank_deficient_windows,
                "mean_energy_fraction": if fractions.is_empty() { None } else { Some(mean_fraction) },
                "chordal_skipped": analysis.chordal_skipped,
                "chordal": analysis.chordal.as_ref().map(|c| &c.mean),
            }),
        );
    }

    if let Some(s) = &plan.schedule {
        let (json_text, value, line) = run_schedule(&src, s, seed)?;
        files.add("schedule_groups.json", json_text);
        lines.push(line);
        summary.insert("schedule".into(), value);
    }

    let summary = json!({
        "seed": seed.seed,
        "source": src.summary,
        "experiments": Value::Object(summary),
        "files": files.names().collect::<Vec<_>>(),
    });
    files.add(
        "summary.json",
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    );
    files.write(&out)?;
    for line in lines {
        println!("{line}");
    }
    Ok(())
}

/// Returns the groups file, its summary entry and a one-line summary.
fn run_schedule(src: &ResolvedSource, plan: &SchedulePlan, seed: RngSeed) -> Result<(String, Value, String), CliError> {
    let set = scheduler::build_signatures(&src.source, plan.window_length, plan.p, seed.child(STREAM_POSITIONS))
        .map_err(schedule_err)?;
    let metric: &dyn Separation = match plan.metric.as_str() {
        "correlation" => &CorrelationSeparation,
        _ => &ChordalSeparation,
    };
    let groups = scheduler::greedy_group_by(&set.signatures, plan.group_size, metric).map_err(schedule_err)?;
    let value = json!({
        "metric": plan.metric,
        "p": plan.p,
        "window_length": plan.window_length,
        "group_size": plan.group_size,
        "groups": groups,
        "skipped": set.skipped,
    });
    let worst = groups
        .iter()
        .filter_map(|g| g.min_pairwise_chordal)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))));
    let line = format!(
        "schedule: {} groups from {} signatures ({} skipped), smallest in-group chordal distance = {}",
        groups.len(),
        set.signatures.len(),
        set.skipped.len(),
        fmt_opt(worst)
    );
    let text = serde_json::to_string_pretty(&value).expect("groups serialize") + "\n";
    Ok((text, value, line))
}

fn schedule(args: &ScheduleArgs, cfg: &RunConfig, seed: RngSeed, out: Option<PathBuf>) -> Result<(), CliError> {
    let src = resolve_source(args.dataset.as_ref(), &args.model, cfg)?;
    let plan = schedule_plan(
        &src,
        cfg.experiments.schedule.as_ref(),
        args.window_length,
        args.p,
        args.group_size,
        args.metric.as_ref(),
    )?;
    let (text, value, line) = run_schedule(&src, &plan, seed)?;
    let mut files = Outputs::default();
    files.add("schedule_groups.json", text);
    files.write(&out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)))?;
    println!("{line}");
    for g in value["groups"].as_array().into_iter().flatten() {
        println!("  {}", g["members"]);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_counts_default_to_powers_of_two() {
        assert_eq!(default_correlation_counts(32), vec![1, 2, 4, 8, 16, 32]);
        assert_eq!(default_correlation_counts(31), vec![1, 2, 4, 8, 16, 31]);
        assert_eq!(default_correlation_counts(1), vec![1]);
    }

    #[test]
    fn count_checks() {
        assert!(check_counts(&[1, 2, 3], 1, 3, "x").is_ok());
        assert!(check_counts(&[], 1, 3, "x").is_err());
        assert!(check_counts(&[0, 1], 1, 3, "x").is_err());
        assert!(check_counts(&[2, 2], 1, 3, "x").is_err());
        assert!(check_counts(&[4], 1, 3, "x").is_err());
    }
}
