//! Long-horizon trajectories, δ-neighbourhood occupation and parameter sweeps.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{self, AgentState, SimConfig, SystemState};
use crate::error::{Error, Result};
use crate::game::{Game, JointAction};
use crate::rng::{stream_rng, SimRng};

/// Label used for the part of the measurement window spent outside every
/// pure-state neighbourhood.
pub const ELSEWHERE: &str = "elsewhere";

/// A joint action together with the vertex strategies and utility-valued
/// aspirations it induces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PureStrategyState {
    pub profile: JointAction,
}

impl PureStrategyState {
    pub fn new(profile: JointAction) -> Self {
        PureStrategyState { profile }
    }

    pub fn to_system_state(&self, game: &Game) -> SystemState {
        let u = game.payoffs_unchecked(&self.profile.0);
        let agents = self
            .profile
            .0
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let mut strategy = vec![0.0; game.actions()[i]];
                strategy[a] = 1.0;
                AgentState {
                    strategy,
                    aspiration: u[i],
                    action: a,
                }
            })
            .collect();
        SystemState { agents, time: 0 }
    }
}

/// Squared distances of `state`'s strategy and aspiration profiles to the
/// pure strategy state of `profile`.
fn squared_distances(state: &SystemState, game: &Game, profile: &[usize]) -> (f64, f64) {
    let u = game.payoffs_unchecked(profile);
    let mut dx = 0.0;
    let mut dr = 0.0;
    for ((agent, &a), &ui) in state.agents.iter().zip(profile).zip(u) {
        for (k, &x) in agent.strategy.iter().enumerate() {
            let e = if k == a { 1.0 } else { 0.0 };
            dx += (x - e) * (x - e);
        }
        dr += (agent.aspiration - ui) * (agent.aspiration - ui);
    }
    (dx, dr)
}

/// Joint action equal to the target's, and both the strategy profile and the
/// aspiration profile within Euclidean distance `delta` of it.
pub fn in_neighborhood(
    state: &SystemState,
    target: &PureStrategyState,
    game: &Game,
    delta: f64,
) -> bool {
    if state.agents.len() != target.profile.len()
        || state.agents.iter().zip(&target.profile.0).any(|(a, &t)| a.action != t)
    {
        return false;
    }
    let (dx, dr) = squared_distances(state, game, &target.profile.0);
    dx < delta * delta && dr < delta * delta
}

/// Index of the pure strategy state whose neighbourhood contains `state`, if any.
/// Neighbourhoods require a matching joint action, so only one candidate exists.
pub fn locate(state: &SystemState, game: &Game, delta: f64, profile_buf: &mut Vec<usize>) -> Option<usize> {
    profile_buf.clear();
    profile_buf.extend(state.agents.iter().map(|a| a.action));
    let (dx, dr) = squared_distances(state, game, profile_buf);
    if dx < delta * delta && dr < delta * delta {
        Some(game.profile_index(profile_buf))
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationStats {
    pub labels: Vec<String>,
    pub profiles: Vec<JointAction>,
    /// Fraction of the window spent in each pure state's neighbourhood,
    /// indexed like `profiles`.
    pub neighborhood: Vec<f64>,
    pub elsewhere: f64,
    /// Fraction of the window in which each joint action was played.
    pub play_frequency: Vec<f64>,
    /// Window is `(window_start, window_end]` in step counts.
    pub window_start: u64,
    pub window_end: u64,
    pub total_steps: u64,
}

impl OccupationStats {
    pub fn fraction(&self, profile: &JointAction) -> Option<f64> {
        self.profiles
            .iter()
            .position(|p| p == profile)
            .map(|k| self.neighborhood[k])
    }

    pub fn mass_on(&self, set: &[JointAction]) -> f64 {
        set.iter().filter_map(|p| self.fraction(p)).sum()
    }

    /// Pure state with the largest neighbourhood occupation (first on ties).
    pub fn dominant(&self) -> (JointAction, f64) {
        let mut best = 0;
        for k in 1..self.neighborhood.len() {
            if self.neighborhood[k] > self.neighborhood[best] {
                best = k;
            }
        }
        (self.profiles[best].clone(), self.neighborhood[best])
    }

    /// `(label, occupation)` rows, pure states in lexicographic order then
    /// the elsewhere bucket.
    pub fn rows(&self) -> Vec<(String, f64)> {
        self.labels
            .iter()
            .cloned()
            .zip(self.neighborhood.iter().copied())
            .chain(std::iter::once((ELSEWHERE.to_string(), self.elsewhere)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: u64,
    pub actions: Vec<usize>,
    /// All strategies concatenated, player-major.
    pub strategies: Vec<f64>,
    pub aspirations: Vec<f64>,
}

impl TrajectoryPoint {
    fn of(state: &SystemState) -> Self {
        TrajectoryPoint {
            t: state.time,
            actions: state.agents.iter().map(|a| a.action).collect(),
            strategies: state.agents.iter().flat_map(|a| a.strategy.iter().copied()).collect(),
            aspirations: state.agents.iter().map(|a| a.aspiration).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub stride: u64,
    pub points: Vec<TrajectoryPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub record_trajectory: bool,
    /// RNG stream of `config.seed`; 0 for a plain run.
    pub stream: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            record_trajectory: true,
            stream: 0,
        }
    }
}

/// Runs `config.horizon` steps and measures occupation over the configured window.
pub fn run(
    game: &Game,
    config: &SimConfig,
    init: Option<SystemState>,
) -> Result<(OccupationStats, Trajectory)> {
    run_with(game, config, init, RunOptions::default())
}

pub fn run_with(
    game: &Game,
    config: &SimConfig,
    init: Option<SystemState>,
    options: RunOptions,
) -> Result<(OccupationStats, Trajectory)> {
    config.validate_for(game)?;
    if let Some(v) = game.positive_utility_violation() {
        return Err(Error::NonPositiveUtility {
            player: v.player,
            payoff: v.value,
        });
    }
    match dynamics::validate_step_sizes(game, config.epsilon, config.nu, config.delta) {
        Ok(c) if !c.satisfied => log::warn!(
            "step sizes violate the aspiration/strategy speed condition (lhs {:.4e} > rhs {:.4e})",
            c.lhs,
            c.rhs
        ),
        Err(e) => log::warn!("step-size check not applicable: {e}"),
        _ => {}
    }
    if config.horizon == 0 {
        return Err(Error::EmptyStats("horizon is 0".into()));
    }
    let window_start = config.window_start();
    if window_start >= config.horizon {
        return Err(Error::EmptyStats(format!(
            "window starts at {window_start}, horizon is {}",
            config.horizon
        )));
    }

    let mut rng = stream_rng(config.seed, options.stream);
    let mut state = match init {
        Some(s) => {
            s.validate(game)?;
            s
        }
        None => SystemState::initial(game, config, &mut rng)?,
    };
    let start_time = state.time;
    simulate_from(game, config, &mut state, &mut rng, window_start, start_time, options)
}

fn simulate_from(
    game: &Game,
    config: &SimConfig,
    state: &mut SystemState,
    rng: &mut SimRng,
    window_start: u64,
    start_time: u64,
    options: RunOptions,
) -> Result<(OccupationStats, Trajectory)> {
    let profiles_n = game.num_profiles();
    let mut in_nbhd = vec![0u64; profiles_n];
    let mut played = vec![0u64; profiles_n];
    let mut elsewhere = 0u64;
    let stride = config.stride();
    let mut trajectory = Trajectory {
        stride,
        points: Vec::new(),
    };
    if options.record_trajectory {
        trajectory.points.push(TrajectoryPoint::of(state));
    }
    let mut buf = Vec::with_capacity(game.players());
    for k in 1..=config.horizon {
        dynamics::step_in_place(state, game, config, rng)?;
        if k > window_start {
            match locate(state, game, config.delta, &mut buf) {
                Some(idx) => in_nbhd[idx] += 1,
                None => elsewhere += 1,
            }
            played[game.profile_index(&buf)] += 1;
        }
        if options.record_trajectory && (k % stride == 0 || k == config.horizon) {
            trajectory.points.push(TrajectoryPoint::of(state));
        }
    }
    debug_assert_eq!(state.time - start_time, config.horizon);
    let window = (config.horizon - window_start) as f64;
    let profiles: Vec<JointAction> = game.profiles().collect();
    let stats = OccupationStats {
        labels: profiles.iter().map(|p| game.profile_label(p)).collect(),
        profiles,
        neighborhood: in_nbhd.iter().map(|&c| c as f64 / window).collect(),
        elsewhere: elsewhere as f64 / window,
        play_frequency: played.iter().map(|&c| c as f64 / window).collect(),
        window_start,
        window_end: config.horizon,
        total_steps: config.horizon,
    };
    Ok((stats, trajectory))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub lambdas: Vec<f64>,
    pub hs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub lambda: f64,
    pub h: f64,
    pub replicates: Vec<OccupationStats>,
    /// Mean occupation of the payoff-dominant set over replicates.
    pub mean_dominant: f64,
    /// Sample standard deviation of the same (0 for a single replicate).
    pub std_dominant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub payoff_dominant_set: Vec<JointAction>,
    /// Cells in lambda-major order, matching the grid.
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn cell(&self, lambda: f64, h: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.lambda == lambda && c.h == h)
    }
}

/// Runs every `(lambda, h, replicate)` combination. Replicate `r` uses RNG
/// stream `r` of `base.seed` (or stream 0 for all when `derive_seeds` is off),
/// so cells share common random numbers across the grid.
pub fn sweep(
    game: &Game,
    base: &SimConfig,
    grid: &SweepGrid,
    replicates: usize,
    derive_seeds: bool,
) -> Result<SweepTable> {
    if grid.lambdas.is_empty() || grid.hs.is_empty() {
        return Err(Error::Config("sweep grid needs at least one lambda and one h".into()));
    }
    if replicates == 0 {
        return Err(Error::Config("sweep needs at least one replicate".into()));
    }
    let dominant = game.payoff_dominant_states();
    let cells: Vec<(f64, f64)> = grid
        .lambdas
        .iter()
        .flat_map(|&l| grid.hs.iter().map(move |&h| (l, h)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..replicates).map(move |r| (c, r)))
        .collect();
    let results: Vec<Result<OccupationStats>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (lambda, h) = cells[c];
            let cfg = SimConfig {
                lambda,
                h,
                ..base.clone()
            };
            let options = RunOptions {
                record_trajectory: false,
                stream: if derive_seeds { r as u64 } else { 0 },
            };
            run_with(game, &cfg, None, options).map(|(s, _)| s)
        })
        .collect();
    let mut results = results.into_iter();
    let mut out = Vec::with_capacity(cells.len());
    for &(lambda, h) in &cells {
        let reps = (0..replicates)
            .map(|_| results.next().expect("one result per job"))
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<f64> = reps.iter().map(|s| s.mass_on(&dominant)).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        out.push(SweepCell {
            lambda,
            h,
            replicates: reps,
            mean_dominant: mean,
            std_dominant: std,
        });
    }
    Ok(SweepTable {
        payoff_dominant_set: dominant,
        cells: out,
    })
}

fn write_comment<W: Write>(w: &mut W, comment: Option<&str>) -> std::io::Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(())
}

/// Header `t, action_1..action_n, x_i_a for all i,a, rho_1..rho_n` with
/// 1-based player and action indices. Lines of `comment` are written first,
/// each prefixed with `# `.
pub fn write_trajectory_csv<W: Write>(
    mut w: W,
    game: &Game,
    trajectory: &Trajectory,
    comment: Option<&str>,
) -> Result<()> {
    write_comment(&mut w, comment)?;
    let mut csv = csv::Writer::from_writer(w);
    let n = game.players();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("action_{i}")));
    for (i, &k) in game.actions().iter().enumerate() {
        header.extend((1..=k).map(|a| format!("x_{}_{a}", i + 1)));
    }
    header.extend((1..=n).map(|i| format!("rho_{i}")));
    csv.write_record(&header)?;
    for p in &trajectory.points {
        let mut rec = vec![p.t.to_string()];
        rec.extend(p.actions.iter().map(|a| (a + 1).to_string()));
        rec.extend(p.strategies.iter().map(|x| x.to_string()));
        rec.extend(p.aspirations.iter().map(|x| x.to_string()));
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

/// Header `state_label, occupation`; one row per pure state plus `elsewhere`.
pub fn write_occupation_csv<W: Write>(
    mut w: W,
    stats: &OccupationStats,
    comment: Option<&str>,
) -> Result<()> {
    write_comment(&mut w, comment)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["state_label", "occupation"])?;
    for (label, occ) in stats.rows() {
        csv.write_record([label, occ.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

/// Parses an occupation CSV (as written by [`write_occupation_csv`]); `#`
/// lines are skipped.
pub fn read_occupation_csv(text: &str) -> Result<Vec<(String, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            source_name: "occupation csv".into(),
            message: format!("missing column `{name}`"),
        })
    };
    let label_col = find("state_label")?;
    let occ_col = find("occupation")?;
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse_err = |m: String| Error::Parse {
            source_name: "occupation csv".into(),
            message: format!("record {}: {m}", line + 1),
        };
        let label = rec
            .get(label_col)
            .ok_or_else(|| parse_err("missing state_label".into()))?
            .to_string();
        let occ: f64 = rec
            .get(occ_col)
            .ok_or_else(|| parse_err("missing occupation".into()))?
            .parse()
            .map_err(|e| parse_err(format!("bad occupation value: {e}")))?;
        if !(0.0..=1.0).contains(&occ) {
            return Err(parse_err(format!("occupation {occ} outside [0, 1]")));
        }
        rows.push((label, occ));
    }
    Ok(rows)
}

/// Header `lambda, h, replicate, state_label, occupation`.
pub fn write_sweep_csv<W: Write>(mut w: W, table: &SweepTable, comment: Option<&str>) -> Result<()> {
    write_comment(&mut w, comment)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["lambda", "h", "replicate", "state_label", "occupation"])?;
    for cell in &table.cells {
        for (r, stats) in cell.replicates.iter().enumerate() {
            for (label, occ) in stats.rows() {
                csv.write_record([
                    cell.lambda.to_string(),
                    cell.h.to_string(),
                    r.to_string(),
                    label,
                    occ.to_string(),
                ])?;
            }
        }
    }
    csv.flush()?;
    Ok(())
}
