//! Per-step metrics, per-run summaries and cross-replicate aggregation.
//!
//! Averages over empty groups (no DE vehicle on the lattice, nobody
//! waiting) are `None`, never zero, and are skipped when averaging over
//! time or replicates.

use crate::state::{DriverType, SimState};

/// `#DE / (#CO + #DE)`, `None` for an empty population.
pub fn ratio_q(n_de: usize, n_co: usize) -> Option<f64> {
    let total = n_de + n_co;
    (total > 0).then(|| n_de as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub n_co: usize,
    pub n_de: usize,
    pub mean_speed_all: Option<f64>,
    pub mean_speed_co: Option<f64>,
    pub mean_speed_de: Option<f64>,
    pub ratio_q: Option<f64>,
    pub n_conflicts_step: u64,
    pub n_type_changes_step: u64,
    /// Mean accumulated waiting time over the vehicles waiting this step.
    pub mean_wait: Option<f64>,
}

impl SimState {
    /// Metrics of the step that just finished, over vehicles on the lattice.
    pub fn collect_step(&self, step: u64) -> StepMetrics {
        let (mut n_co, mut n_de) = (0usize, 0usize);
        let (mut sum_co, mut sum_de) = (0u64, 0u64);
        let (mut n_wait, mut sum_wait) = (0usize, 0u64);
        for v in self.on_lattice() {
            match v.driver_type {
                DriverType::Co => {
                    n_co += 1;
                    sum_co += u64::from(v.speed);
                }
                DriverType::De => {
                    n_de += 1;
                    sum_de += u64::from(v.speed);
                }
            }
            if v.waiting_now {
                n_wait += 1;
                sum_wait += u64::from(v.waiting_time);
            }
        }
        let mean = |sum: u64, n: usize| (n > 0).then(|| sum as f64 / n as f64);
        StepMetrics {
            step,
            n_co,
            n_de,
            mean_speed_all: mean(sum_co + sum_de, n_co + n_de),
            mean_speed_co: mean(sum_co, n_co),
            mean_speed_de: mean(sum_de, n_de),
            ratio_q: ratio_q(n_de, n_co),
            n_conflicts_step: self.counters.conflicts,
            n_type_changes_step: self.counters.type_changes,
            mean_wait: mean(sum_wait, n_wait),
        }
    }

    /// DE share over the whole population, queued drivers included.
    pub fn population_ratio_q(&self) -> f64 {
        let n_de = self
            .vehicles
            .iter()
            .filter(|v| v.driver_type == DriverType::De)
            .count();
        ratio_q(n_de, self.vehicles.len() - n_de).unwrap_or(0.0)
    }

    /// Summary of everything recorded so far.
    pub fn summary(&self) -> RunSummary {
        self.recorder.summary()
    }
}

/// Running mean that ignores absent values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct MeanAcc {
    sum: f64,
    n: u64,
}

impl MeanAcc {
    fn push(&mut self, x: Option<f64>) {
        if let Some(x) = x {
            self.sum += x;
            self.n += 1;
        }
    }

    fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Recorder {
    keep_series: bool,
    recorded_steps: u64,
    conflicts: u64,
    type_changes: u64,
    speed_all: MeanAcc,
    speed_co: MeanAcc,
    speed_de: MeanAcc,
    de_ratio: MeanAcc,
    wait: MeanAcc,
    speed_series: Vec<f64>,
    q_series: Vec<f64>,
    series: Vec<StepMetrics>,
}

impl Recorder {
    pub fn new(keep_series: bool) -> Self {
        Recorder {
            keep_series,
            ..Default::default()
        }
    }

    pub fn record(&mut self, m: &StepMetrics) {
        self.recorded_steps += 1;
        self.conflicts += m.n_conflicts_step;
        self.type_changes += m.n_type_changes_step;
        self.speed_all.push(m.mean_speed_all);
        self.speed_co.push(m.mean_speed_co);
        self.speed_de.push(m.mean_speed_de);
        self.de_ratio.push(m.ratio_q);
        self.wait.push(m.mean_wait);
        if let Some(s) = m.mean_speed_all {
            self.speed_series.push(s);
        }
        if self.keep_series {
            self.series.push(m.clone());
        }
    }

    /// DE share sampled at an imitation update.
    pub fn record_cycle(&mut self, q: f64) {
        self.q_series.push(q);
    }

    pub fn recorded_steps(&self) -> u64 {
        self.recorded_steps
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            recorded_steps: self.recorded_steps,
            total_type_changes: self.type_changes,
            total_conflicts: self.conflicts,
            mean_speed_all: self.speed_all.mean(),
            mean_speed_co: self.speed_co.mean(),
            mean_speed_de: self.speed_de.mean(),
            avg_de_ratio: self.de_ratio.mean(),
            avg_wait: self.wait.mean(),
            speed_series: self.speed_series.clone(),
            q_series: self.q_series.clone(),
            series: self.keep_series.then(|| self.series.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub recorded_steps: u64,
    pub total_type_changes: u64,
    pub total_conflicts: u64,
    pub mean_speed_all: Option<f64>,
    pub mean_speed_co: Option<f64>,
    pub mean_speed_de: Option<f64>,
    pub avg_de_ratio: Option<f64>,
    pub avg_wait: Option<f64>,
    /// Per-step mean speed of all vehicles (steps with vehicles only).
    pub speed_series: Vec<f64>,
    /// Population DE share at each imitation update.
    pub q_series: Vec<f64>,
    pub series: Option<Vec<StepMetrics>>,
}

impl RunSummary {
    pub fn type_change_frequency(&self) -> f64 {
        frequency(self.total_type_changes, self.recorded_steps)
    }

    pub fn conflict_frequency(&self) -> f64 {
        frequency(self.total_conflicts, self.recorded_steps)
    }
}

fn frequency(total: u64, steps: u64) -> f64 {
    if steps == 0 {
        0.0
    } else {
        total as f64 / steps as f64
    }
}

/// Five-number summary. Quartiles interpolate linearly between order
/// statistics at rank `p (n + 1)`, clamped to the sample range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub n: usize,
}

pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p * (n as f64 + 1.0)).clamp(1.0, n as f64);
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo >= n {
        return sorted[n - 1];
    }
    sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
}

impl BoxSummary {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Some(BoxSummary {
            min: sorted[0],
            q1: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q3: quantile_sorted(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
            n: sorted.len(),
        })
    }
}

/// Merged view of several replicates of one case.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub replicates: usize,
    pub summary: RunSummary,
    /// DE share samples left after the burn-in, pooled over replicates.
    pub q_box: Option<BoxSummary>,
    pub speed_box: Option<BoxSummary>,
}

/// Totals are summed and per-run means averaged over replicates. The first
/// `burn_in_cycles` imitation samples of each replicate are dropped from
/// `q_box`.
pub fn aggregate_replicates(summaries: &[RunSummary], burn_in_cycles: usize) -> Option<Aggregate> {
    let first = summaries.first()?;
    if summaries.len() == 1 {
        let tail: Vec<f64> = first.q_series.iter().skip(burn_in_cycles).copied().collect();
        return Some(Aggregate {
            replicates: 1,
            q_box: BoxSummary::from_samples(&tail),
            speed_box: BoxSummary::from_samples(&first.speed_series),
            summary: first.clone(),
        });
    }
    let avg = |f: &dyn Fn(&RunSummary) -> Option<f64>| {
        let mut acc = MeanAcc::default();
        for s in summaries {
            acc.push(f(s));
        }
        acc.mean()
    };
    let q_len = summaries.iter().map(|s| s.q_series.len()).min().unwrap_or(0);
    let q_series: Vec<f64> = (0..q_len)
        .map(|i| summaries.iter().map(|s| s.q_series[i]).sum::<f64>() / summaries.len() as f64)
        .collect();
    let q_tail: Vec<f64> = summaries
        .iter()
        .flat_map(|s| s.q_series.iter().skip(burn_in_cycles).copied())
        .collect();
    let speeds: Vec<f64> = summaries.iter().flat_map(|s| s.speed_series.iter().copied()).collect();
    let summary = RunSummary {
        recorded_steps: summaries.iter().map(|s| s.recorded_steps).sum(),
        total_type_changes: summaries.iter().map(|s| s.total_type_changes).sum(),
        total_conflicts: summaries.iter().map(|s| s.total_conflicts).sum(),
        mean_speed_all: avg(&|s| s.mean_speed_all),
        mean_speed_co: avg(&|s| s.mean_speed_co),
        mean_speed_de: avg(&|s| s.mean_speed_de),
        avg_de_ratio: avg(&|s| s.avg_de_ratio),
        avg_wait: avg(&|s| s.avg_wait),
        speed_series: Vec::new(),
        q_series,
        series: None,
    };
    Some(Aggregate {
        replicates: summaries.len(),
        summary,
        q_box: BoxSummary::from_samples(&q_tail),
        speed_box: BoxSummary::from_samples(&speeds),
    })
}

/// Least-squares slope of `ys` against `0, 1, 2, ...`.
pub fn linear_slope(ys: &[f64]) -> Option<f64> {
    let n = ys.len();
    if n < 2 {
        return None;
    }
    let mx = (n as f64 - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    Some(sxy / sxx)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    pearson(&rx, &ry)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Sample mean and standard error.
pub fn mean_and_se(xs: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    Some((mean, (var / n as f64).sqrt()))
}
