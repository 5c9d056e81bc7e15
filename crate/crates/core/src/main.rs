use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use trafficgame::config::{Experiment, ExperimentConfig};
use trafficgame::experiments::{run_estimate, run_model1, run_model2, run_model3, run_snapshot};
use trafficgame::Error;

/// Traffic on a grid of unsignalized intersections with rule-abiding (CO)
/// and rule-breaking (DE) drivers.
#[derive(Parser)]
#[command(name = "trafficgame", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fixed DE share: mean speeds by driver type over a (p_new, p_de) grid.
    Model1(Common),
    /// Imitation with a law-abiding core: DE share per update cycle.
    Model2(Common),
    /// Impatient drivers: type changes, conflicts and waits per entry probability.
    Model3(Common),
    /// Minimax and Bayes estimates of the CO share from a meeting log.
    Estimate {
        /// Meeting log written by `model1 --emit-meetings`.
        input: PathBuf,
        #[arg(long)]
        prior_alpha: Option<f64>,
        #[arg(long)]
        prior_beta: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Text pictures of the lattice during one run.
    Snapshot {
        /// Behavior model: 1 fixed share, 2 imitation, 3 impatience.
        #[arg(long)]
        model: Option<u8>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Recorded steps per run after the warm-up.
    #[arg(long)]
    steps: Option<u64>,
    /// Entry probability, or a comma-separated grid.
    #[arg(long)]
    p_new: Option<String>,
    /// DE share (initial share for model2), or a comma-separated grid.
    #[arg(long)]
    p_de: Option<String>,
    #[arg(long)]
    core_fraction: Option<String>,
    #[arg(long)]
    tau: Option<u64>,
    #[arg(long)]
    p_slow: Option<f64>,
    #[arg(long)]
    max_vehicles: Option<usize>,
    #[arg(long)]
    collision_cost: Option<u32>,
    #[arg(long)]
    conflict_cost: Option<u32>,
    /// discrete_conditional or raw_clipped.
    #[arg(long)]
    hazard_mode: Option<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Start from the replicate and step counts of the original study.
    #[arg(long)]
    paper_scale: bool,
    /// Also write every recorded step.
    #[arg(long)]
    emit_series: bool,
    /// Also write every resolved meeting.
    #[arg(long)]
    emit_meetings: bool,
    #[arg(long)]
    snapshot_every: Option<u64>,
    /// Check lattice invariants after every step; violations exit with 2.
    #[arg(long)]
    check_invariants: bool,
    /// Any other config key, e.g. `--set warmup_steps=100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn build(&self, experiment: Experiment) -> Result<ExperimentConfig, Error> {
        self.build_with(experiment, |_| Ok(()))
    }

    /// `extra` runs after the shared flags and before validation.
    fn build_with(
        &self,
        experiment: Experiment,
        extra: impl FnOnce(&mut ExperimentConfig) -> Result<(), Error>,
    ) -> Result<ExperimentConfig, Error> {
        let mut cfg = if self.paper_scale {
            ExperimentConfig::paper_scale(experiment)
        } else {
            ExperimentConfig::new(experiment)
        };
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        let numbers = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("replicates", self.replicates.map(|v| v.to_string())),
            ("steps", self.steps.map(|v| v.to_string())),
            ("p_new", self.p_new.clone()),
            ("p_de", self.p_de.clone()),
            ("core_fraction", self.core_fraction.clone()),
            ("tau", self.tau.map(|v| v.to_string())),
            ("p_slow", self.p_slow.map(|v| v.to_string())),
            ("max_vehicles", self.max_vehicles.map(|v| v.to_string())),
            ("collision_cost", self.collision_cost.map(|v| v.to_string())),
            ("conflict_cost", self.conflict_cost.map(|v| v.to_string())),
            ("hazard_mode", self.hazard_mode.clone()),
            ("snapshot_every", self.snapshot_every.map(|v| v.to_string())),
        ];
        for (key, value) in numbers {
            if let Some(v) = value {
                cfg.apply(key, &v)?;
            }
        }
        for (key, on) in [
            ("emit_series", self.emit_series),
            ("emit_meetings", self.emit_meetings),
            ("check_invariants", self.check_invariants),
        ] {
            if on {
                cfg.apply(key, "true")?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            cfg.apply(k.trim(), v.trim())?;
        }
        extra(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, Error> {
    match cli.command {
        Command::Model1(c) => run_model1(&c.build(Experiment::Model1)?, &c.out_dir),
        Command::Model2(c) => run_model2(&c.build(Experiment::Model2)?, &c.out_dir),
        Command::Model3(c) => run_model3(&c.build(Experiment::Model3)?, &c.out_dir),
        Command::Estimate {
            input,
            prior_alpha,
            prior_beta,
            common,
        } => {
            let cfg = common.build_with(Experiment::Estimate, |cfg| {
                cfg.input = Some(input);
                if let Some(a) = prior_alpha {
                    cfg.prior_alpha = a;
                }
                if let Some(b) = prior_beta {
                    cfg.prior_beta = b;
                }
                Ok(())
            })?;
            run_estimate(&cfg, &common.out_dir)
        }
        Command::Snapshot { model, common } => {
            let cfg = common.build_with(Experiment::Snapshot, |cfg| {
                if let Some(m) = model {
                    cfg.model = m;
                }
                Ok(())
            })?;
            run_snapshot(&cfg, &common.out_dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Invariant(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
