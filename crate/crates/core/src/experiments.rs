//! Seeded replicate batches for the three behavior models, and the CSV
//! files the command-line tool writes.
//!
//! Every replicate owns its `SimState` and a seed derived from the master
//! seed, the case index and the replicate index, so batches run on the
//! rayon pool and still give the same bytes as a sequential run.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::behavior::BehaviorModel;
use crate::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::estimation::{bayes_estimate, minimax_estimate, MeetingObservation, ObservationBatch};
use crate::games::MeetingRecord;
use crate::seed::replicate_seed;
use crate::snapshot::snapshot;
use crate::state::{DriverType, SimConfig, SimState};
use crate::stats::{aggregate_replicates, linear_slope, mean_and_se, Aggregate, BoxSummary, RunSummary};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub check_invariants: bool,
    pub snapshot_every: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub meetings: Vec<MeetingRecord>,
    /// `(step, text)` pairs, present only when snapshots were requested.
    pub snapshots: Vec<(u64, String)>,
}

/// Runs `total_steps` steps of a fresh simulation.
pub fn run_replicate(sim: SimConfig, total_steps: u64, opts: RunOptions) -> Result<RunOutput> {
    let mut state = SimState::new(sim)?;
    let mut snapshots = Vec::new();
    for _ in 0..total_steps {
        state.step_network();
        if opts.check_invariants {
            state.check_invariants()?;
        }
        if let Some(every) = opts.snapshot_every {
            let t = state.step_count();
            if t % every == 0 || t == total_steps {
                snapshots.push((t, snapshot(&state)));
            }
        }
    }
    Ok(RunOutput {
        summary: state.summary(),
        meetings: state.meeting_log().to_vec(),
        snapshots,
    })
}

/// One point of an experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    /// Named grid coordinates, written as leading CSV columns.
    pub params: Vec<(&'static str, f64)>,
    pub behavior: BehaviorModel,
    pub p_new: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub spec: CaseSpec,
    pub runs: Vec<RunOutput>,
    pub aggregate: Aggregate,
}

impl CaseResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.spec.params.iter().find(|(n, _)| *n == name).map(|&(_, v)| v)
    }

    pub fn summaries(&self) -> Vec<RunSummary> {
        self.runs.iter().map(|r| r.summary.clone()).collect()
    }
}

/// Runs every replicate of every case, in parallel, and groups the results
/// back by case in grid order.
pub fn run_cases(cfg: &ExperimentConfig, specs: Vec<CaseSpec>, total_steps: u64) -> Result<Vec<CaseResult>> {
    cfg.validate()?;
    let mut jobs = Vec::with_capacity(specs.len() * cfg.replicates);
    for (k, spec) in specs.iter().enumerate() {
        for r in 0..cfg.replicates {
            let seed = replicate_seed(cfg.seed, k as u64, r as u64);
            let mut sim = cfg.sim_config(spec.behavior, spec.p_new, seed)?;
            sim.record_series = cfg.emit_series;
            sim.record_meetings = cfg.emit_meetings;
            let opts = RunOptions {
                check_invariants: cfg.check_invariants,
                snapshot_every: if r == 0 { cfg.snapshot_every } else { None },
            };
            jobs.push((sim, opts));
        }
    }
    let outputs: Vec<RunOutput> = jobs
        .into_par_iter()
        .map(|(sim, opts)| run_replicate(sim, total_steps, opts))
        .collect::<Result<_>>()?;
    let burn_in = match cfg.experiment {
        Experiment::Model2 => cfg.burn_in,
        _ => 0,
    };
    let mut outputs = outputs.into_iter();
    specs
        .into_iter()
        .map(|spec| {
            let runs: Vec<RunOutput> = outputs.by_ref().take(cfg.replicates).collect();
            let summaries: Vec<RunSummary> = runs.iter().map(|r| r.summary.clone()).collect();
            let aggregate = aggregate_replicates(&summaries, burn_in)
                .ok_or_else(|| Error::NoData("case without replicates".into()))?;
            Ok(CaseResult { spec, runs, aggregate })
        })
        .collect()
}

pub fn model1_specs(cfg: &ExperimentConfig) -> Vec<CaseSpec> {
    let mut specs = Vec::new();
    for &p_new in &cfg.p_new {
        for &p_de in &cfg.p_de {
            specs.push(CaseSpec {
                params: vec![("p_new", p_new), ("p_de", p_de)],
                behavior: BehaviorModel::FixedRatio { p_co: 1.0 - p_de },
                p_new,
            });
        }
    }
    specs
}

pub fn model2_specs(cfg: &ExperimentConfig) -> Vec<CaseSpec> {
    let mut specs = Vec::new();
    for &p_new in &cfg.p_new {
        for &core in &cfg.core_fraction {
            for &p0 in &cfg.p_de {
                specs.push(CaseSpec {
                    params: vec![("p_new", p_new), ("core_fraction", core), ("initial_p_de", p0)],
                    behavior: BehaviorModel::Imitation {
                        initial_p_de: p0,
                        core_fraction: core,
                        tau: cfg.tau,
                    },
                    p_new,
                });
            }
        }
    }
    specs
}

pub fn model3_specs(cfg: &ExperimentConfig) -> Vec<CaseSpec> {
    cfg.p_new
        .iter()
        .map(|&p_new| CaseSpec {
            params: vec![("p_new", p_new)],
            behavior: cfg.impatience(),
            p_new,
        })
        .collect()
}

pub fn model2_total_steps(cfg: &ExperimentConfig) -> u64 {
    cfg.warmup_steps + cfg.cycles * cfg.tau
}

/// Stabilized level and trend of one Model II run: mean and least-squares
/// slope of the DE share after the burn-in.
pub fn stabilized_q(summary: &RunSummary, burn_in: usize) -> Option<(f64, f64)> {
    let tail = summary.q_series.get(burn_in..)?;
    let slope = linear_slope(tail)?;
    Some((tail.iter().sum::<f64>() / tail.len() as f64, slope))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Collects CSV rows and writes them after the config echo.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self, echo: &str) -> Result<Vec<u8>> {
        let mut out = echo.as_bytes().to_vec();
        let mut w = csv::Writer::from_writer(&mut out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush()?;
        drop(w);
        Ok(out)
    }

    fn write(&self, cfg: &ExperimentConfig, path: PathBuf, written: &mut Vec<PathBuf>) -> Result<()> {
        fs::write(&path, self.render(&cfg.echo_block())?)?;
        written.push(path);
        Ok(())
    }
}

fn param_cells(case: &CaseResult) -> Vec<String> {
    case.spec.params.iter().map(|(_, v)| v.to_string()).collect()
}

fn param_names(case: Option<&CaseResult>) -> Vec<String> {
    case.map(|c| c.spec.params.iter().map(|(n, _)| n.to_string()).collect())
        .unwrap_or_default()
}

fn write_extras(cfg: &ExperimentConfig, cases: &[CaseResult], out_dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let name = cfg.experiment.name();
    let names = param_names(cases.first());
    if cfg.emit_series {
        let mut header = names.clone();
        header.extend(
            [
                "replicate", "step", "n_co", "n_de", "mean_speed_all", "mean_speed_co", "mean_speed_de", "ratio_q",
                "conflicts", "type_changes", "mean_wait",
            ]
            .map(String::from),
        );
        let mut t = Table::new(&header);
        for c in cases {
            for (r, run) in c.runs.iter().enumerate() {
                for m in run.summary.series.iter().flatten() {
                    let mut row = param_cells(c);
                    row.extend([
                        r.to_string(),
                        m.step.to_string(),
                        m.n_co.to_string(),
                        m.n_de.to_string(),
                        opt(m.mean_speed_all),
                        opt(m.mean_speed_co),
                        opt(m.mean_speed_de),
                        opt(m.ratio_q),
                        m.n_conflicts_step.to_string(),
                        m.n_type_changes_step.to_string(),
                        opt(m.mean_wait),
                    ]);
                    t.push(row);
                }
            }
        }
        t.write(cfg, out_dir.join(format!("{name}_series.csv")), written)?;
    }
    if cfg.emit_meetings {
        let mut header = names.clone();
        header.extend(
            [
                "replicate", "step", "intersection", "left_vehicle", "right_vehicle", "left_type", "right_type",
                "left_hold", "right_hold", "conflict",
            ]
            .map(String::from),
        );
        let mut t = Table::new(&header);
        for c in cases {
            for (r, run) in c.runs.iter().enumerate() {
                for m in &run.meetings {
                    let mut row = param_cells(c);
                    row.extend([
                        r.to_string(),
                        m.step.to_string(),
                        m.intersection_id.to_string(),
                        m.left_vehicle.to_string(),
                        m.right_vehicle.to_string(),
                        m.left_type.as_str().to_string(),
                        m.right_type.as_str().to_string(),
                        m.left_hold.to_string(),
                        m.right_hold.to_string(),
                        m.is_conflict.to_string(),
                    ]);
                    t.push(row);
                }
            }
        }
        t.write(cfg, out_dir.join(format!("{name}_meetings.csv")), written)?;
    }
    if cfg.snapshot_every.is_some() {
        let dir = out_dir.join("snapshots");
        fs::create_dir_all(&dir)?;
        for (k, c) in cases.iter().enumerate() {
            for (step, text) in c.runs.iter().flat_map(|r| &r.snapshots) {
                let path = dir.join(format!("{name}_case{k:02}_step{step:06}.txt"));
                fs::write(&path, format!("{}{text}", cfg.echo_block()))?;
                written.push(path);
            }
        }
    }
    Ok(())
}

fn box_cells(b: Option<BoxSummary>) -> Vec<String> {
    match b {
        Some(b) => vec![
            b.n.to_string(),
            b.min.to_string(),
            b.q1.to_string(),
            b.median.to_string(),
            b.q3.to_string(),
            b.max.to_string(),
        ],
        None => vec!["0".into(), String::new(), String::new(), String::new(), String::new(), String::new()],
    }
}

const BOX_HEADER: [&str; 6] = ["n", "min", "q1", "median", "q3", "max"];

/// Fixed-ratio drivers over the `(p_new, p_de)` grid.
pub fn run_model1(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let cases = run_cases(cfg, model1_specs(cfg), cfg.warmup_steps + cfg.steps)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let mut summary = Table::new(&[
        "p_new", "p_de", "replicates", "recorded_steps", "mean_speed_all", "mean_speed_co", "mean_speed_de",
        "co_minus_de", "co_minus_de_se", "total_conflicts", "conflict_frequency",
    ]);
    let mut speeds = Table::new(&["p_new", "p_de", "group", "mean_speed"]);
    for c in &cases {
        let s = &c.aggregate.summary;
        let diffs: Vec<f64> = c
            .runs
            .iter()
            .filter_map(|r| Some(r.summary.mean_speed_co? - r.summary.mean_speed_de?))
            .collect();
        let diff = match diffs.len() {
            0 => None,
            1 => Some((diffs[0], None)),
            _ => mean_and_se(&diffs).map(|(m, se)| (m, Some(se))),
        };
        let mut row = param_cells(c);
        row.extend([
            c.aggregate.replicates.to_string(),
            s.recorded_steps.to_string(),
            opt(s.mean_speed_all),
            opt(s.mean_speed_co),
            opt(s.mean_speed_de),
            opt(diff.map(|d| d.0)),
            opt(diff.and_then(|d| d.1)),
            s.total_conflicts.to_string(),
            s.conflict_frequency().to_string(),
        ]);
        summary.push(row);
        for (group, v) in [("all", s.mean_speed_all), ("CO", s.mean_speed_co), ("DE", s.mean_speed_de)] {
            let mut row = param_cells(c);
            row.extend([group.to_string(), opt(v)]);
            speeds.push(row);
        }
    }
    summary.write(cfg, out_dir.join("model1_summary.csv"), &mut written)?;
    speeds.write(cfg, out_dir.join("model1_speeds.csv"), &mut written)?;
    write_extras(cfg, &cases, out_dir, &mut written)?;
    Ok(written)
}

/// Imitating drivers over the `(core_fraction, initial_p_de)` grid.
pub fn run_model2(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let cases = run_cases(cfg, model2_specs(cfg), model2_total_steps(cfg))?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let mut series = Table::new(&["p_new", "core_fraction", "initial_p_de", "replicate", "cycle", "q"]);
    let mut boxes = Table::new(
        &["p_new", "core_fraction", "initial_p_de"]
            .into_iter()
            .chain(BOX_HEADER)
            .collect::<Vec<_>>(),
    );
    let mut summary = Table::new(&[
        "p_new", "core_fraction", "initial_p_de", "replicates", "q_stable_mean", "q_stable_abs_slope",
        "mean_speed_all", "mean_speed_co", "mean_speed_de",
    ]);
    for c in &cases {
        for (r, run) in c.runs.iter().enumerate() {
            for (i, q) in run.summary.q_series.iter().enumerate() {
                let mut row = param_cells(c);
                row.extend([r.to_string(), (i + 1).to_string(), q.to_string()]);
                series.push(row);
            }
        }
        let mut row = param_cells(c);
        row.extend(box_cells(c.aggregate.q_box));
        boxes.push(row);

        let stable: Vec<(f64, f64)> = c.runs.iter().filter_map(|r| stabilized_q(&r.summary, cfg.burn_in)).collect();
        let n = stable.len() as f64;
        let level = (!stable.is_empty()).then(|| stable.iter().map(|s| s.0).sum::<f64>() / n);
        let trend = (!stable.is_empty()).then(|| stable.iter().map(|s| s.1.abs()).sum::<f64>() / n);
        let s = &c.aggregate.summary;
        let mut row = param_cells(c);
        row.extend([
            c.aggregate.replicates.to_string(),
            opt(level),
            opt(trend),
            opt(s.mean_speed_all),
            opt(s.mean_speed_co),
            opt(s.mean_speed_de),
        ]);
        summary.push(row);
    }
    series.write(cfg, out_dir.join("model2_q_series.csv"), &mut written)?;
    boxes.write(cfg, out_dir.join("model2_q_box.csv"), &mut written)?;
    summary.write(cfg, out_dir.join("model2_summary.csv"), &mut written)?;
    write_extras(cfg, &cases, out_dir, &mut written)?;
    Ok(written)
}

/// Impatient drivers over the entry-probability grid, as a table with one
/// column per `p_new`.
pub fn run_model3(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let cases = run_cases(cfg, model3_specs(cfg), cfg.warmup_steps + cfg.steps)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let mut header = vec!["statistic".to_string()];
    header.extend(cases.iter().map(|c| c.spec.p_new.to_string()));
    let mut table = Table::new(&header);
    type Stat = fn(&RunSummary) -> String;
    let rows: [(&str, Stat); 8] = [
        ("recorded_steps", |s| s.recorded_steps.to_string()),
        ("total_type_changes", |s| s.total_type_changes.to_string()),
        ("type_change_frequency", |s| s.type_change_frequency().to_string()),
        ("total_conflicts", |s| s.total_conflicts.to_string()),
        ("conflict_frequency", |s| s.conflict_frequency().to_string()),
        ("avg_de_ratio", |s| opt(s.avg_de_ratio)),
        ("avg_wait", |s| opt(s.avg_wait)),
        ("mean_speed_all", |s| opt(s.mean_speed_all)),
    ];
    for (label, stat) in rows {
        let mut row = vec![label.to_string()];
        row.extend(cases.iter().map(|c| stat(&c.aggregate.summary)));
        table.push(row);
    }
    let mut boxes = Table::new(&["p_new"].into_iter().chain(BOX_HEADER).collect::<Vec<_>>());
    for c in &cases {
        let mut row = param_cells(c);
        row.extend(box_cells(c.aggregate.speed_box));
        boxes.push(row);
    }
    table.write(cfg, out_dir.join("model3_table.csv"), &mut written)?;
    boxes.write(cfg, out_dir.join("model3_speed_box.csv"), &mut written)?;
    write_extras(cfg, &cases, out_dir, &mut written)?;
    Ok(written)
}

/// Meetings read back from a meeting-log CSV, keyed by the grid columns
/// that precede `replicate`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeetingGroup {
    pub key: Vec<(String, String)>,
    pub batch: ObservationBatch,
}

pub fn read_meeting_log(path: &Path) -> Result<Vec<MeetingGroup>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let parse = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    let header = reader.headers().map_err(parse)?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("{}: missing column '{name}'", path.display())))
    };
    let (left, right) = (col("left_type")?, col("right_type")?);
    let key_cols = header.iter().position(|h| h == "replicate").unwrap_or(0);
    let driver = |s: &str| match s {
        "CO" => Ok(DriverType::Co),
        "DE" => Ok(DriverType::De),
        other => Err(Error::Parse(format!("{}: unknown driver type '{other}'", path.display()))),
    };
    let mut groups: Vec<MeetingGroup> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(parse)?;
        let key: Vec<(String, String)> = (0..key_cols)
            .map(|i| (header[i].to_string(), record[i].to_string()))
            .collect();
        let obs = MeetingObservation::new(driver(&record[left])?, driver(&record[right])?);
        match groups.iter_mut().find(|g| g.key == key) {
            Some(g) => g.batch.push(obs),
            None => {
                let mut batch = ObservationBatch::default();
                batch.push(obs);
                groups.push(MeetingGroup { key, batch });
            }
        }
    }
    if groups.is_empty() {
        return Err(Error::NoData(format!("{} holds no meetings", path.display())));
    }
    Ok(groups)
}

/// Minimax and Bayes estimates of the CO share for every group of a
/// meeting log.
pub fn run_estimate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let input = cfg.input.as_deref().expect("validated");
    let groups = read_meeting_log(input)?;
    fs::create_dir_all(out_dir)?;
    let mut header: Vec<String> = groups[0].key.iter().map(|(k, _)| k.clone()).collect();
    header.extend(["meetings", "sigma_xi", "minimax", "bayes"].map(String::from));
    let mut t = Table::new(&header);
    for g in &groups {
        let mut row: Vec<String> = g.key.iter().map(|(_, v)| v.clone()).collect();
        row.extend([
            g.batch.n.to_string(),
            g.batch.sigma_xi.to_string(),
            minimax_estimate(g.batch)?.to_string(),
            bayes_estimate(g.batch, cfg.prior_alpha, cfg.prior_beta)?.to_string(),
        ]);
        t.push(row);
    }
    let mut written = Vec::new();
    t.write(cfg, out_dir.join("estimate.csv"), &mut written)?;
    Ok(written)
}

/// A single run rendered as text every `snapshot_every` steps and at the end.
pub fn run_snapshot(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let p_new = cfg.p_new[0];
    let p_de = cfg.p_de[0];
    let behavior = match cfg.model {
        1 => BehaviorModel::FixedRatio { p_co: 1.0 - p_de },
        2 => BehaviorModel::Imitation {
            initial_p_de: p_de,
            core_fraction: cfg.core_fraction[0],
            tau: cfg.tau,
        },
        _ => cfg.impatience(),
    };
    let sim = cfg.sim_config(behavior, p_new, replicate_seed(cfg.seed, 0, 0))?;
    let total = cfg.warmup_steps + cfg.steps;
    let opts = RunOptions {
        check_invariants: cfg.check_invariants,
        snapshot_every: Some(cfg.snapshot_every.unwrap_or(total)),
    };
    let run = run_replicate(sim, total, opts)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for (step, text) in &run.snapshots {
        let path = out_dir.join(format!("snapshot_step{step:06}.txt"));
        fs::write(&path, format!("{}{text}", cfg.echo_block()))?;
        written.push(path);
    }
    Ok(written)
}
