use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use bexpucb::edge::{degenerate_assignment_check, prune_splitting_points, EdgeScenario};
use bexpucb::error::{Error, Result};
use bexpucb::policies::PolicyKind;
use bexpucb::runner::{
    format_sig9, output_root, run_experiment, simulate, sweep, AttackerChoice, ExperimentConfig, Prepared,
    TaskDistribution, PRESETS,
};

#[derive(Parser)]
#[command(
    name = "bexpucb",
    version,
    about = "Adversarial group linear bandits for edge inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration over its seeds.
    Sim(Source),
    /// Run learners over presets and seeds.
    Sweep {
        /// Presets to run; all when omitted.
        #[arg(long = "preset", value_name = "NAME")]
        presets: Vec<String>,
        /// Experiment TOML files to run as well.
        #[arg(long = "config", value_name = "FILE")]
        configs: Vec<PathBuf>,
        /// Learners to run; all when omitted.
        #[arg(long = "algo", value_enum, value_name = "ALGO")]
        algos: Vec<PolicyKind>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the best fixed group in hindsight and its reward.
    Oracle(Source),
    /// Print candidate split points and degenerate-assignment verdicts.
    Prune {
        /// Preset whose scenario to inspect; resnet when nothing is given.
        #[arg(long, conflicts_with = "scenario")]
        preset: Option<String>,
        /// Scenario TOML file.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Check a configuration without running it.
    Validate(Source),
}

#[derive(Args)]
struct Source {
    /// yolo, resnet, mixed, task-shift, attacker-shift or adaptive.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Experiment TOML file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Learner replacing the configured one.
    #[arg(long, value_enum, value_name = "ALGO")]
    algo: Option<PolicyKind>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Clone)]
struct Overrides {
    /// yolo, resnet, mixed[:p] or shift.
    #[arg(long)]
    tasks: Option<String>,
    /// Comma-separated seeds or inclusive ranges, e.g. `1,4,10..20`.
    #[arg(long)]
    seeds: Option<String>,
    /// Attacker preset name.
    #[arg(long)]
    attacker: Option<String>,
    /// Number of rounds.
    #[arg(long)]
    horizon: Option<u64>,
    /// Output root; defaults to $BEXPUCB_OUT, then `results`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::invalid("seeds", format!("cannot parse `{text}`"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let a: u64 = a.parse().map_err(|_| bad())?;
                let b: u64 = b.trim_start_matches('=').parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(seeds)
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(t) = &self.tasks {
            cfg.tasks = TaskDistribution::parse(t)?;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_seeds(s)?;
        }
        if let Some(a) = &self.attacker {
            cfg.attacker = AttackerChoice::Preset(a.clone());
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        Ok(())
    }
}

fn load(preset: Option<&str>, config: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match (preset, config) {
        (Some(p), _) => ExperimentConfig::preset(p),
        (None, Some(c)) => ExperimentConfig::from_file(c),
        (None, None) => Err(Error::invalid("source", "give --preset or --config")),
    }
}

impl Source {
    fn prepare(&self) -> Result<Prepared> {
        let mut cfg = load(self.preset.as_deref(), self.config.as_ref())?;
        if let Some(a) = self.algo {
            cfg.policy = a;
        }
        self.overrides.apply(&mut cfg)?;
        cfg.prepare()
    }
}

fn print_oracle(prepared: &Prepared) -> Result<()> {
    let oracle = prepared.with_policy(PolicyKind::Oracle);
    println!("seed,oracle_group,oracle_reward");
    for &seed in &prepared.config.seeds {
        let out = simulate(&oracle, seed)?;
        let total: f64 = out.record.oracle_rewards().iter().sum();
        println!("{seed},{},{}", out.info.oracle_group, format_sig9(total));
    }
    Ok(())
}

fn print_prune(scenario: &EdgeScenario) -> Result<()> {
    for dnn in scenario.profiles() {
        let splits: Vec<String> = prune_splitting_points(dnn).iter().map(|s| s.to_string()).collect();
        println!(
            "{}: {} layers, candidate splits [{}]",
            dnn.name(),
            dnn.len(),
            splits.join(", ")
        );
        for (g, path) in scenario.paths().iter().enumerate() {
            let verdict = degenerate_assignment_check(path, dnn, scenario.graph())?;
            println!("  group {}: {verdict:?}", g + 1);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sim(src) => {
            let prepared = src.prepare()?;
            let root = output_root(&prepared.config);
            for dir in run_experiment(&prepared, &root)? {
                println!("{}", dir.display());
            }
        }
        Command::Sweep {
            presets,
            configs,
            algos,
            overrides,
        } => {
            let mut cfgs = Vec::new();
            let names: Vec<String> = if presets.is_empty() && configs.is_empty() {
                PRESETS.map(String::from).to_vec()
            } else {
                presets
            };
            for name in &names {
                cfgs.push(ExperimentConfig::preset(name)?);
            }
            for path in &configs {
                cfgs.push(ExperimentConfig::from_file(path)?);
            }
            let algos = if algos.is_empty() {
                PolicyKind::ALL.to_vec()
            } else {
                algos
            };
            for mut cfg in cfgs {
                overrides.apply(&mut cfg)?;
                let prepared = cfg.prepare()?;
                let root = output_root(&prepared.config);
                for dir in sweep(&prepared, &algos, &root)? {
                    println!("{}", dir.display());
                }
            }
        }
        Command::Oracle(src) => print_oracle(&src.prepare()?)?,
        Command::Prune { preset, scenario } => {
            let scenario = match (preset, scenario) {
                (_, Some(path)) => EdgeScenario::from_file(&path)?,
                (preset, None) => {
                    let cfg = ExperimentConfig::preset(preset.as_deref().unwrap_or("resnet"))?;
                    cfg.scenario.load(std::path::Path::new("."))?
                }
            };
            print_prune(&scenario)?;
        }
        Command::Validate(src) => {
            let prepared = src.prepare()?;
            println!(
                "ok: {} groups, {} seeds, horizon {}",
                prepared.scenario.groups(),
                prepared.config.seeds.len(),
                prepared.config.horizon
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Validation(problems)) => {
            for p in problems {
                eprintln!("error: {p}");
            }
            ExitCode::FAILURE
        }
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
