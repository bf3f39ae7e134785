//! Command-line front end.
//!
//! Exit codes: 0 success, 1 classification negative, 2 input error,
//! 3 estimation failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::chain::{self, EmpiricalChain, StationaryResult};
use crate::config::RunConfig;
use crate::dynamics::{self, StepSizeCheck};
use crate::error::{Error, Result};
use crate::game::{Game, GameClassReport, JointAction, Witness};
use crate::simulate::{self, OccupationStats};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_COORDINATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ESTIMATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "apla", version, about = "Aspiration-based perturbed learning automata on strategic-form games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a game: Nash set, coordination conditions, payoff-dominant set.
    Classify(CommonArgs),
    /// Run one long trajectory and record occupation.
    Simulate(CommonArgs),
    /// Sweep (lambda, h) and record payoff-dominant occupation per cell.
    Sweep(SweepArgs),
    /// Estimate the transition matrix between equilibrium states and its stationary vector.
    Chain(ChainArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long = "h")]
    pub h: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Treat a failed step-size check as an error.
    #[arg(long)]
    pub strict: bool,
    /// Run even if the game is not a coordination game.
    #[arg(long)]
    pub force: bool,
    /// Extra `key=value` overrides, e.g. `sweep.replicates=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub hs: Option<Vec<f64>>,
    #[arg(long)]
    pub replicates: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ChainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub episodes: Option<u64>,
    #[arg(long)]
    pub episode_cap: Option<u64>,
    /// Occupation CSV from a `simulate` run to cross-validate against.
    #[arg(long)]
    pub occupation: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Classify,
    Simulate,
    Sweep,
    Chain,
}

/// Fully resolved inputs of one command.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub command: CommandKind,
    pub game_path: PathBuf,
    pub config: RunConfig,
    pub output_dir: PathBuf,
    pub overrides: Vec<String>,
    pub strict: bool,
    pub force: bool,
    pub threads: Option<usize>,
    pub occupation: Option<PathBuf>,
}

impl RunSpec {
    pub fn from_common(command: CommandKind, args: &CommonArgs) -> Result<RunSpec> {
        let mut config = match &args.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                RunConfig::from_toml_named(&text, &p.display().to_string())?
            }
            None => RunConfig::default(),
        };
        for o in &args.overrides {
            config.apply_override(o)?;
        }
        let sim = &mut config.sim;
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = args.$field {
                    sim.$field = v;
                }
            };
        }
        set!(seed);
        set!(horizon);
        set!(lambda);
        set!(h);
        set!(epsilon);
        set!(nu);
        set!(delta);
        if !args.game.is_file() {
            return Err(Error::Config(format!("game file {} does not exist", args.game.display())));
        }
        Ok(RunSpec {
            command,
            game_path: args.game.clone(),
            config,
            output_dir: args.out.clone(),
            overrides: args.overrides.clone(),
            strict: args.strict,
            force: args.force,
            threads: args.threads,
            occupation: None,
        })
    }

    fn load_game(&self) -> Result<Game> {
        let text = fs::read_to_string(&self.game_path)?;
        Game::from_json_named(&text, &self.game_path.display().to_string())
    }

    fn write(&self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        fs::create_dir_all(&self.output_dir)?;
        let path = self.output_dir.join(name);
        fs::write(&path, contents)?;
        Ok(path)
    }

    fn provenance(&self) -> Value {
        json!({
            "command": format!("{:?}", self.command).to_lowercase(),
            "game": self.game_path.display().to_string(),
            "seed": self.config.sim.seed,
            "overrides": self.overrides,
            "config": self.config,
        })
    }

    fn provenance_comment(&self) -> String {
        format!("config: {}", self.provenance())
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub report: Value,
    pub message: String,
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::EstimationFailed { .. } | Error::SolverDiverged { .. } => EXIT_ESTIMATION,
        Error::NoEquilibria => EXIT_NOT_COORDINATION,
        _ => EXIT_INPUT,
    }
}

fn label_list(game: &Game, set: &[JointAction]) -> Vec<String> {
    set.iter().map(|p| game.profile_label(p)).collect()
}

fn witness_json(game: &Game, w: &Witness) -> Value {
    let moved = w.profile.with(w.player, w.action);
    json!({
        "profile": game.profile_label(&w.profile),
        "player": w.player + 1,
        "action": game.action_label(w.player, w.action),
        "result": game.profile_label(&moved),
        "payoffs_before": game.payoffs_unchecked(&w.profile.0),
        "payoffs_after": game.payoffs_unchecked(&moved.0),
    })
}

/// JSON view of a classification report with labels and 1-based players.
pub fn classification_json(game: &Game, report: &GameClassReport) -> Value {
    json!({
        "players": game.players(),
        "actions": game.actions(),
        "tolerance": game.tolerance(),
        "positive_utility": report.is_positive_utility,
        "positive_utility_violation": report.positive_utility_violation.as_ref().map(|v| json!({
            "profile": game.profile_label(&v.profile),
            "player": v.player + 1,
            "value": v.value,
        })),
        "coordination": report.is_coordination,
        "condition_a": report.condition_a,
        "condition_a_lenient": report.condition_a_lenient,
        "condition_b": report.condition_b,
        "nash": label_list(game, &report.nash_set),
        "dominant": label_list(game, &report.payoff_dominant_set),
        "improvement_witnesses": report.improvement_witnesses.iter().map(|w| witness_json(game, w)).collect::<Vec<_>>(),
        "punishment_witnesses": report.punishment_witnesses.iter().map(|w| witness_json(game, w)).collect::<Vec<_>>(),
        "violations": {
            "condition_a": report.condition_a_violation.as_ref().map(|p| game.profile_label(p)),
            "condition_b": report.condition_b_violation.as_ref().map(|p| game.profile_label(p)),
        },
    })
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialise");
    s.push('\n');
    s.into_bytes()
}

pub fn cmd_classify(spec: &RunSpec) -> Result<Outcome> {
    let game = spec.load_game()?;
    let report = game.check_coordination();
    let mut body = classification_json(&game, &report);
    body["provenance"] = spec.provenance();
    let file = spec.write("classification.json", &pretty(&body))?;
    let exit_code = if report.is_coordination { EXIT_OK } else { EXIT_NOT_COORDINATION };
    let message = format!(
        "coordination: {}\nnash: {}\npayoff-dominant: {}",
        report.is_coordination,
        label_list(&game, &report.nash_set).join(" "),
        label_list(&game, &report.payoff_dominant_set).join(" "),
    );
    Ok(Outcome {
        exit_code,
        files: vec![file],
        report: body,
        message,
    })
}

/// Loads the game and applies the classification gate shared by the
/// simulation commands. `Err(outcome)` short-circuits with exit code 1.
fn gated_game(spec: &RunSpec) -> Result<std::result::Result<(Game, GameClassReport), Outcome>> {
    let game = spec.load_game()?;
    let report = game.check_coordination();
    if !report.is_coordination && !spec.force {
        return Ok(Err(Outcome {
            exit_code: EXIT_NOT_COORDINATION,
            files: vec![],
            report: classification_json(&game, &report),
            message: "game is not a coordination game (use --force to run anyway)".into(),
        }));
    }
    Ok(Ok((game, report)))
}

fn step_size_gate(spec: &RunSpec, game: &Game) -> Result<Option<StepSizeCheck>> {
    let sim = &spec.config.sim;
    match dynamics::validate_step_sizes(game, sim.epsilon, sim.nu, sim.delta) {
        Ok(c) => {
            if !c.satisfied {
                let msg = format!(
                    "step sizes fail the speed condition: lhs {:.4e} > rhs {:.4e}",
                    c.lhs, c.rhs
                );
                if spec.strict {
                    return Err(Error::Config(msg));
                }
                log::warn!("{msg}");
            }
            Ok(Some(c))
        }
        Err(e) => {
            if spec.strict {
                return Err(e);
            }
            log::warn!("step-size check not applicable: {e}");
            Ok(None)
        }
    }
}

fn occupation_json(stats: &OccupationStats) -> Value {
    let occ: serde_json::Map<String, Value> = stats
        .rows()
        .into_iter()
        .map(|(l, f)| (l, Value::from(f)))
        .collect();
    let play: serde_json::Map<String, Value> = stats
        .labels
        .iter()
        .zip(&stats.play_frequency)
        .map(|(l, &f)| (l.clone(), Value::from(f)))
        .collect();
    json!({
        "occupation": occ,
        "play_frequency": play,
        "window_start": stats.window_start,
        "window_end": stats.window_end,
    })
}

pub fn cmd_simulate(spec: &RunSpec) -> Result<Outcome> {
    let (game, report) = match gated_game(spec)? {
        Ok(x) => x,
        Err(outcome) => return Ok(outcome),
    };
    let check = step_size_gate(spec, &game)?;
    let (stats, trajectory) = simulate::run(&game, &spec.config.sim, None)?;
    let comment = spec.provenance_comment();

    let mut traj_buf = Vec::new();
    simulate::write_trajectory_csv(&mut traj_buf, &game, &trajectory, Some(&comment))?;
    let mut occ_buf = Vec::new();
    simulate::write_occupation_csv(&mut occ_buf, &stats, Some(&comment))?;

    let (dominant, dominant_occ) = stats.dominant();
    let mut summary = json!({
        "dominant_state": game.profile_label(&dominant),
        "dominant_occupation": dominant_occ,
        "payoff_dominant_set": label_list(&game, &report.payoff_dominant_set),
        "payoff_dominant_occupation": stats.mass_on(&report.payoff_dominant_set),
        "step_size_check": check,
        "provenance": spec.provenance(),
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut summary, occupation_json(&stats)) {
        dst.extend(src);
    }
    let files = vec![
        spec.write("trajectory.csv", &traj_buf)?,
        spec.write("occupation.csv", &occ_buf)?,
        spec.write("summary.json", &pretty(&summary))?,
    ];
    let message = format!(
        "dominant state {} with occupation {:.4} (window {}..{})",
        game.profile_label(&dominant),
        dominant_occ,
        stats.window_start,
        stats.window_end
    );
    Ok(Outcome {
        exit_code: EXIT_OK,
        files,
        report: summary,
        message,
    })
}

pub fn cmd_sweep(spec: &RunSpec) -> Result<Outcome> {
    let s = &spec.config.sweep;
    if s.lambdas.is_empty() || s.hs.is_empty() {
        return Err(Error::Config("sweep grid is empty: give at least one lambda and one h".into()));
    }
    let (game, _) = match gated_game(spec)? {
        Ok(x) => x,
        Err(outcome) => return Ok(outcome),
    };
    step_size_gate(spec, &game)?;
    let table = simulate::sweep(&game, &spec.config.sim, &s.grid(), s.replicates, s.derive_seeds)?;
    let mut buf = Vec::new();
    simulate::write_sweep_csv(&mut buf, &table, Some(&spec.provenance_comment()))?;

    let mut lines = vec![format!(
        "{:>10} {:>10} {:>12} {:>10}",
        "lambda", "h", "mean_occ", "std"
    )];
    let mut cells = Vec::new();
    for c in &table.cells {
        lines.push(format!(
            "{:>10} {:>10} {:>12.4} {:>10.4}",
            c.lambda, c.h, c.mean_dominant, c.std_dominant
        ));
        cells.push(json!({
            "lambda": c.lambda,
            "h": c.h,
            "mean_payoff_dominant_occupation": c.mean_dominant,
            "std_payoff_dominant_occupation": c.std_dominant,
        }));
    }
    let summary = json!({
        "payoff_dominant_set": label_list(&game, &table.payoff_dominant_set),
        "replicates": s.replicates,
        "cells": cells,
        "provenance": spec.provenance(),
    });
    let files = vec![
        spec.write("sweep.csv", &buf)?,
        spec.write("sweep_summary.json", &pretty(&summary))?,
    ];
    Ok(Outcome {
        exit_code: EXIT_OK,
        files,
        report: summary,
        message: lines.join("\n"),
    })
}

/// JSON report of an estimated chain.
pub fn chain_json(chain: &EmpiricalChain, stationary: &StationaryResult) -> Value {
    json!({
        "states": chain.labels,
        "matrix": chain.matrix,
        "counts": chain.counts,
        "pi": stationary.pi,
        "residual": stationary.residual,
        "iterations": stationary.iterations,
        "unique": stationary.unique,
        "escapes": chain.escapes,
        "episodes": chain.episodes,
        "episode_cap": chain.episode_cap,
    })
}

pub fn cmd_chain(spec: &RunSpec) -> Result<Outcome> {
    let (game, _) = match gated_game(spec)? {
        Ok(x) => x,
        Err(outcome) => return Ok(outcome),
    };
    step_size_gate(spec, &game)?;
    let occupation = match &spec.occupation {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            Some(simulate::read_occupation_csv(&text)?)
        }
        None => None,
    };
    let chain = chain::estimate_phat(&game, &spec.config.sim, &spec.config.chain.options())?;
    let stationary = chain.stationary(spec.config.chain.tolerance)?;
    let mut body = chain_json(&chain, &stationary);
    body["config"] = spec.provenance();
    let mut message = format!(
        "states {:?}\npi {:?}\nresidual {:.3e}{}",
        chain.labels,
        stationary.pi,
        stationary.residual,
        if stationary.unique { "" } else { " (chain is reducible; pi is not unique)" }
    );
    if let Some(rows) = occupation {
        let cv = chain::cross_validate_rows(&chain.labels, &stationary, &rows);
        message.push_str(&format!("\ncross-validation max discrepancy {:.4}", cv.max_discrepancy));
        body["cross_validation"] = serde_json::to_value(&cv)?;
    }
    let file = spec.write("chain.json", &pretty(&body))?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        files: vec![file],
        report: body,
        message,
    })
}

/// Resolves a parsed command line into a [`RunSpec`].
pub fn resolve(cli: &Cli) -> Result<RunSpec> {
    match &cli.command {
        Command::Classify(a) => RunSpec::from_common(CommandKind::Classify, a),
        Command::Simulate(a) => RunSpec::from_common(CommandKind::Simulate, a),
        Command::Sweep(a) => {
            let mut spec = RunSpec::from_common(CommandKind::Sweep, &a.common)?;
            if let Some(l) = &a.lambdas {
                spec.config.sweep.lambdas = l.clone();
            }
            if let Some(h) = &a.hs {
                spec.config.sweep.hs = h.clone();
            }
            if let Some(r) = a.replicates {
                spec.config.sweep.replicates = r;
            }
            Ok(spec)
        }
        Command::Chain(a) => {
            let mut spec = RunSpec::from_common(CommandKind::Chain, &a.common)?;
            if let Some(e) = a.episodes {
                spec.config.chain.episodes = e;
            }
            if a.episode_cap.is_some() {
                spec.config.chain.episode_cap = a.episode_cap;
            }
            spec.occupation = a.occupation.clone();
            Ok(spec)
        }
    }
}

pub fn execute(spec: &RunSpec) -> Result<Outcome> {
    let run = || match spec.command {
        CommandKind::Classify => cmd_classify(spec),
        CommandKind::Simulate => cmd_simulate(spec),
        CommandKind::Sweep => cmd_sweep(spec),
        CommandKind::Chain => cmd_chain(spec),
    };
    match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Entry point shared by the binary and tests; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = resolve(&cli).and_then(|spec| execute(&spec));
    match result {
        Ok(outcome) => {
            println!("{}", outcome.message);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::EstimationFailed { escapes, episodes, .. } = &e {
                eprintln!("escape statistics: {escapes} of {episodes} episodes hit the cap");
            }
            exit_code_for(&e)
        }
    }
}

/// Reads an occupation CSV from disk.
pub fn load_occupation(path: &Path) -> Result<Vec<(String, f64)>> {
    simulate::read_occupation_csv(&fs::read_to_string(path)?)
}
