//! Experiment configuration: a flat `key = value` file, overridable key by
//! key from the command line.
//!
//! Lists (`p_new`, `p_de`, `core_fraction`) are comma-separated. Lines
//! starting with `#` are comments. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::behavior::{BehaviorModel, HazardMode, WeibullParams};
use crate::error::{Error, Result};
use crate::games::PayoffTable;
use crate::state::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Model1,
    Model2,
    Model3,
    Estimate,
    Snapshot,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Model1 => "model1",
            Experiment::Model2 => "model2",
            Experiment::Model3 => "model3",
            Experiment::Estimate => "estimate",
            Experiment::Snapshot => "snapshot",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub replicates: usize,
    /// Recorded steps per run, after the warm-up. Model II runs
    /// `cycles * tau` steps instead.
    pub steps: u64,
    pub warmup_steps: u64,
    pub p_new: Vec<f64>,
    /// DE share for Model I, initial DE share for Model II.
    pub p_de: Vec<f64>,
    pub core_fraction: Vec<f64>,
    pub tau: u64,
    pub cycles: u64,
    pub burn_in: usize,
    pub p_slow: f64,
    pub v_max: u32,
    pub max_vehicles: usize,
    pub approach_window: usize,
    pub clear_junction: bool,
    pub conflict_cost: u32,
    pub collision_cost: u32,
    /// Explicit entries `co_co, co_de, de_co, de_de` replacing the model default.
    pub payoff_overrides: [Option<(u32, u32)>; 4],
    pub hazard_mode: HazardMode,
    pub weibull: WeibullParams,
    pub prior_alpha: f64,
    pub prior_beta: f64,
    pub emit_series: bool,
    pub emit_meetings: bool,
    pub snapshot_every: Option<u64>,
    /// Behavior model used by the snapshot subcommand: 1, 2 or 3.
    pub model: u8,
    pub check_invariants: bool,
    pub input: Option<PathBuf>,
}

const PAYOFF_KEYS: [&str; 4] = ["payoff_co_co", "payoff_co_de", "payoff_de_co", "payoff_de_de"];

impl ExperimentConfig {
    /// Desk-scale defaults.
    pub fn new(experiment: Experiment) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            seed: 1,
            replicates: 20,
            steps: 2_000,
            warmup_steps: 50,
            p_new: vec![0.3, 0.6],
            p_de: vec![0.01, 0.1, 0.25, 0.5, 0.75, 0.9],
            core_fraction: vec![0.0, 0.1, 0.3],
            tau: 500,
            cycles: 200,
            burn_in: 100,
            p_slow: 0.1,
            v_max: 1,
            max_vehicles: 350,
            approach_window: 1,
            clear_junction: true,
            conflict_cost: 3,
            collision_cost: 50,
            payoff_overrides: [None; 4],
            hazard_mode: HazardMode::DiscreteConditional,
            weibull: WeibullParams::default(),
            prior_alpha: 1.0,
            prior_beta: 1.0,
            emit_series: false,
            emit_meetings: false,
            snapshot_every: None,
            model: 1,
            check_invariants: false,
            input: None,
        };
        match experiment {
            Experiment::Model1 | Experiment::Estimate => {}
            Experiment::Model2 => {
                c.replicates = 2;
                c.p_new = vec![0.3];
                c.p_de = vec![0.25, 0.5, 0.75];
            }
            Experiment::Model3 => {
                c.replicates = 10;
                c.steps = 10_000;
                c.p_new = (1..=9).map(|k| k as f64 / 10.0).collect();
                c.p_de = vec![0.0];
            }
            Experiment::Snapshot => {
                c.replicates = 1;
                c.steps = 500;
                c.p_new = vec![0.3];
                c.p_de = vec![0.25];
                c.max_vehicles = 250;
                c.snapshot_every = Some(100);
            }
        }
        c
    }

    /// Replicate and step counts of the original study.
    pub fn paper_scale(experiment: Experiment) -> Self {
        let mut c = Self::new(experiment);
        match experiment {
            Experiment::Model1 => c.replicates = 10_000,
            Experiment::Model2 => c.replicates = 1,
            Experiment::Model3 => {
                c.replicates = 1;
                c.steps = 75_000;
            }
            Experiment::Estimate | Experiment::Snapshot => {}
        }
        c
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_str(&text)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{line}'", n + 1)))?;
            self.apply(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Sets one key. Values are validated as far as they can be on their own.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = num(key, value)?,
            "replicates" => self.replicates = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "warmup_steps" => self.warmup_steps = num(key, value)?,
            "p_new" => self.p_new = prob_list(key, value)?,
            "p_de" => self.p_de = prob_list(key, value)?,
            "core_fraction" => self.core_fraction = prob_list(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "cycles" => self.cycles = num(key, value)?,
            "burn_in" => self.burn_in = num(key, value)?,
            "p_slow" => self.p_slow = prob(key, value)?,
            "v_max" => self.v_max = num(key, value)?,
            "max_vehicles" => self.max_vehicles = num(key, value)?,
            "approach_window" => self.approach_window = num(key, value)?,
            "clear_junction" => self.clear_junction = flag(key, value)?,
            "conflict_cost" => self.conflict_cost = num(key, value)?,
            "collision_cost" => self.collision_cost = num(key, value)?,
            "hazard_mode" => self.hazard_mode = value.parse()?,
            "weibull_a" => self.weibull = WeibullParams::new(num(key, value)?, self.weibull.b)?,
            "weibull_b" => self.weibull = WeibullParams::new(self.weibull.a, num(key, value)?)?,
            "prior_alpha" => self.prior_alpha = num(key, value)?,
            "prior_beta" => self.prior_beta = num(key, value)?,
            "emit_series" => self.emit_series = flag(key, value)?,
            "emit_meetings" => self.emit_meetings = flag(key, value)?,
            "snapshot_every" => {
                let every: u64 = num(key, value)?;
                self.snapshot_every = (every > 0).then_some(every);
            }
            "model" => self.model = num(key, value)?,
            "check_invariants" => self.check_invariants = flag(key, value)?,
            "input" => self.input = Some(PathBuf::from(value)),
            _ => match PAYOFF_KEYS.iter().position(|&k| k == key) {
                Some(i) => self.payoff_overrides[i] = Some(pair(key, value)?),
                None => return Err(Error::Config(format!("unknown key '{key}'"))),
            },
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let nonzero = |name: &str, v: u64| {
            if v == 0 {
                Err(Error::Config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        nonzero("replicates", self.replicates as u64)?;
        nonzero("tau", self.tau)?;
        nonzero("cycles", self.cycles)?;
        for (name, list) in [("p_new", &self.p_new), ("p_de", &self.p_de), ("core_fraction", &self.core_fraction)] {
            if list.is_empty() {
                return Err(Error::Config(format!("{name} needs at least one value")));
            }
        }
        if !(self.prior_alpha > 0.0 && self.prior_beta > 0.0) {
            return Err(Error::Config("prior_alpha and prior_beta must be positive".into()));
        }
        if !(1..=3).contains(&self.model) {
            return Err(Error::Config(format!("model must be 1, 2 or 3, got {}", self.model)));
        }
        match self.experiment {
            Experiment::Model2 if (self.burn_in as u64) >= self.cycles => Err(Error::Config(format!(
                "burn_in ({}) must be smaller than cycles ({})",
                self.burn_in, self.cycles
            ))),
            Experiment::Estimate if self.input.is_none() => {
                Err(Error::Config("estimate needs an input meeting log".into()))
            }
            _ => nonzero("steps", self.steps),
        }
    }

    /// Simulation settings for one case. `p_new` and the behavior come from
    /// the case grid.
    pub fn sim_config(&self, behavior: BehaviorModel, p_new: f64, seed: u64) -> Result<SimConfig> {
        let mut c = SimConfig::new(behavior);
        c.p_new = p_new;
        c.p_slow = self.p_slow;
        c.v_max = self.v_max;
        c.max_vehicles = self.max_vehicles;
        c.warmup_steps = self.warmup_steps;
        c.approach_window = self.approach_window;
        c.clear_junction = self.clear_junction;
        c.seed = seed;
        c.payoffs = self.payoffs_for(&behavior);
        c.validate()?;
        Ok(c)
    }

    pub fn payoffs_for(&self, behavior: &BehaviorModel) -> PayoffTable {
        let mut table = match behavior {
            BehaviorModel::Impatience { .. } => PayoffTable::model3(),
            _ => PayoffTable::model1(self.conflict_cost, self.collision_cost),
        };
        let slots = [&mut table.co_co, &mut table.co_de, &mut table.de_co, &mut table.de_de];
        for (slot, o) in slots.into_iter().zip(self.payoff_overrides) {
            if let Some(pair) = o {
                *slot = pair;
            }
        }
        table
    }

    pub fn impatience(&self) -> BehaviorModel {
        BehaviorModel::Impatience {
            weibull: self.weibull,
            hazard_mode: self.hazard_mode,
        }
    }

    /// Every setting as `key=value`, in a fixed order, for output headers.
    pub fn echo(&self) -> Vec<(String, String)> {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = vec![
            ("experiment".to_string(), self.experiment.name().to_string()),
            ("seed".into(), self.seed.to_string()),
            ("replicates".into(), self.replicates.to_string()),
            ("steps".into(), self.steps.to_string()),
            ("warmup_steps".into(), self.warmup_steps.to_string()),
            ("p_new".into(), list(&self.p_new)),
            ("p_de".into(), list(&self.p_de)),
        ];
        if self.experiment == Experiment::Model2 {
            out.push(("core_fraction".into(), list(&self.core_fraction)));
            out.push(("tau".into(), self.tau.to_string()));
            out.push(("cycles".into(), self.cycles.to_string()));
            out.push(("burn_in".into(), self.burn_in.to_string()));
        }
        out.extend([
            ("p_slow".into(), self.p_slow.to_string()),
            ("v_max".into(), self.v_max.to_string()),
            ("max_vehicles".into(), self.max_vehicles.to_string()),
            ("approach_window".into(), self.approach_window.to_string()),
            ("clear_junction".into(), self.clear_junction.to_string()),
        ]);
        let behavior = match self.experiment {
            Experiment::Model3 => self.impatience(),
            Experiment::Snapshot if self.model == 3 => self.impatience(),
            _ => BehaviorModel::FixedRatio { p_co: 1.0 },
        };
        let t = self.payoffs_for(&behavior);
        for (key, (l, r)) in PAYOFF_KEYS.iter().zip([t.co_co, t.co_de, t.de_co, t.de_de]) {
            out.push((key.to_string(), format!("{l},{r}")));
        }
        if matches!(behavior, BehaviorModel::Impatience { .. }) {
            out.push(("hazard_mode".into(), self.hazard_mode.as_str().to_string()));
            out.push(("weibull_a".into(), self.weibull.a.to_string()));
            out.push(("weibull_b".into(), self.weibull.b.to_string()));
        }
        match self.experiment {
            Experiment::Estimate => {
                out.push(("prior_alpha".into(), self.prior_alpha.to_string()));
                out.push(("prior_beta".into(), self.prior_beta.to_string()));
            }
            Experiment::Snapshot => out.push(("model".into(), self.model.to_string())),
            _ => {}
        }
        out
    }

    /// The echo as `# key=value` comment lines.
    pub fn echo_block(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.echo() {
            let _ = writeln!(s, "# {k}={v}");
        }
        s
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn prob(key: &str, value: &str) -> Result<f64> {
    let p: f64 = num(key, value)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("{key}: {p} is not a probability")));
    }
    Ok(p)
}

fn prob_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| prob(key, s))
        .collect()
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got '{value}'"))),
    }
}

fn pair(key: &str, value: &str) -> Result<(u32, u32)> {
    let (l, r) = value
        .split_once(',')
        .ok_or_else(|| Error::Config(format!("{key}: expected two costs 'left,right', got '{value}'")))?;
    Ok((num(key, l.trim())?, num(key, r.trim())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_text_overrides_defaults() {
        let mut c = ExperimentConfig::new(Experiment::Model1);
        c.apply_str(
            "# comment\n\nseed = 9\np_new = 0.2, 0.4\npayoff_de_de = 100,100\nclear_junction=false\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.p_new, vec![0.2, 0.4]);
        assert!(!c.clear_junction);
        let t = c.payoffs_for(&BehaviorModel::FixedRatio { p_co: 0.5 });
        assert_eq!(t.de_de, (100, 100));
        assert_eq!(t.co_co, (2, 1));
    }

    #[test]
    fn bad_input_is_a_config_error() {
        let mut c = ExperimentConfig::new(Experiment::Model3);
        for bad in ["colour = red", "p_new = 1.5", "seed = -1", "no equals sign", "hazard_mode = sometimes"] {
            assert!(matches!(c.apply_str(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn later_values_win() {
        let mut c = ExperimentConfig::new(Experiment::Model2);
        c.apply_str("tau = 100").unwrap();
        c.apply("tau", "250").unwrap();
        assert_eq!(c.tau, 250);
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::new(Experiment::Model2);
        c.validate().unwrap();
        c.burn_in = 200;
        assert!(c.validate().is_err());
        let e = ExperimentConfig::new(Experiment::Estimate);
        assert!(e.validate().is_err());
    }

    #[test]
    fn model3_defaults_and_payoffs() {
        let c = ExperimentConfig::new(Experiment::Model3);
        assert_eq!(c.p_new.len(), 9);
        assert_eq!(c.steps, 10_000);
        let t = c.payoffs_for(&c.impatience());
        assert_eq!(t, PayoffTable::model3());
        assert!(c.echo_block().contains("# hazard_mode=discrete_conditional\n"));
    }

    #[test]
    fn paper_scale_counts() {
        assert_eq!(ExperimentConfig::paper_scale(Experiment::Model1).replicates, 10_000);
        assert_eq!(ExperimentConfig::paper_scale(Experiment::Model3).steps, 75_000);
    }
}
