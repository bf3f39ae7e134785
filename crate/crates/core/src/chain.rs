//! Empirical transition matrix between pure Nash equilibrium states and its
//! stationary distribution.
//!
//! Each row of the estimate is built by kicking the source equilibrium with a
//! step in which at least two agents tremble, then following the unperturbed
//! process (at most one tremble per step) until it settles into the
//! δ-neighbourhood of some equilibrium state. Episodes that do not settle
//! within the cap are counted as escapes and left out of the row.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{self, SimConfig, SystemState};
use crate::error::{Error, Result};
use crate::game::{Game, JointAction};
use crate::rng::{episode_stream, stream_rng, SimRng};
use crate::simulate::{self, OccupationStats, PureStrategyState};

/// Per-agent tremble rate used when sampling the multi-tremble kick.
pub const DEFAULT_KICK_LAMBDA: f64 = 0.1;

/// Largest chain solved by direct elimination; bigger classes use power iteration.
const DIRECT_SOLVE_LIMIT: usize = 32;
const POWER_ITERATION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainOptions {
    pub episodes: u64,
    /// Defaults to ten times the strategy-side step count of the step-size check.
    pub episode_cap: Option<u64>,
    pub kick_lambda: f64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            episodes: 10_000,
            episode_cap: None,
            kick_lambda: DEFAULT_KICK_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalChain {
    pub states: Vec<JointAction>,
    pub labels: Vec<String>,
    /// Row-stochastic estimate over resolved episodes.
    pub matrix: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
    pub escapes: Vec<u64>,
    pub episodes: u64,
    pub episode_cap: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryResult {
    pub pi: Vec<f64>,
    /// `max |pi - pi P|`.
    pub residual: f64,
    /// Power iterations spent (0 when solved directly).
    pub iterations: usize,
    /// False when the chain has more than one closed class; `pi` is then the
    /// equal-weight mixture of each class's stationary distribution.
    pub unique: bool,
    pub closed_classes: Vec<Vec<usize>>,
}

/// Draws the tremble mask of a step conditioned on at least two trembles,
/// each agent trembling independently at rate `lambda`.
fn multi_tremble_mask(n: usize, lambda: f64, rng: &mut SimRng) -> Vec<bool> {
    // Condition the binomial count on k >= 2, then pick a uniform subset of
    // that size (all subsets of equal size are equally likely).
    let weights: Vec<f64> = (2..=n)
        .map(|k| binomial(n, k) * lambda.powi(k as i32) * (1.0 - lambda).powi((n - k) as i32))
        .collect();
    let k = 2 + dynamics::categorical(&normalized(&weights), rng);
    let mut idx: Vec<usize> = (0..n).collect();
    for j in 0..k {
        let pick = rng.random_range(j..n);
        idx.swap(j, pick);
    }
    let mut mask = vec![false; n];
    for &i in &idx[..k] {
        mask[i] = true;
    }
    mask
}

/// Draws the tremble mask of a step conditioned on at most one tremble.
fn single_tremble_mask(n: usize, lambda: f64, rng: &mut SimRng, mask: &mut [bool]) {
    mask.iter_mut().for_each(|m| *m = false);
    // P(no tremble) : P(only agent i) = (1 - lambda) : lambda
    let p_none = (1.0 - lambda) / ((1.0 - lambda) + n as f64 * lambda);
    let r: f64 = rng.random();
    if r >= p_none {
        mask[rng.random_range(0..n)] = true;
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn normalized(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// One step from the pure state in which at least two agents tremble; the
/// rest play their vertex strategies. Strategies and aspirations are then
/// updated as in a regular step.
pub fn sample_q_kick(
    state: &PureStrategyState,
    game: &Game,
    config: &SimConfig,
    kick_lambda: f64,
    rng: &mut SimRng,
) -> Result<SystemState> {
    let n = game.players();
    if n < 2 {
        return Err(Error::TooFewPlayers(n));
    }
    if !(kick_lambda > 0.0 && kick_lambda <= 1.0) {
        return Err(Error::Config(format!("kick lambda must be in (0, 1], got {kick_lambda}")));
    }
    game.check_profile(&state.profile)?;
    let mut s = state.to_system_state(game);
    let mask = multi_tremble_mask(n, kick_lambda, rng);
    dynamics::step_with_trembles(&mut s, game, config, &mask, rng)?;
    Ok(s)
}

/// Outcome of one episode: index into `nash` of the neighbourhood entered, or
/// `None` on escape.
fn run_episode(
    game: &Game,
    config: &SimConfig,
    source: &PureStrategyState,
    nash_index: &[Option<usize>],
    cap: u64,
    kick_lambda: f64,
    rng: &mut SimRng,
) -> Result<Option<usize>> {
    let mut state = sample_q_kick(source, game, config, kick_lambda, rng)?;
    let n = game.players();
    let mut mask = vec![false; n];
    let mut buf = Vec::with_capacity(n);
    let mut t = 0u64;
    loop {
        if let Some(idx) = simulate::locate(&state, game, config.delta, &mut buf) {
            if let Some(k) = nash_index[idx] {
                return Ok(Some(k));
            }
        }
        if t >= cap {
            return Ok(None);
        }
        single_tremble_mask(n, config.lambda, rng, &mut mask);
        dynamics::step_with_trembles(&mut state, game, config, &mask, rng)?;
        t += 1;
    }
}

pub fn default_episode_cap(game: &Game, config: &SimConfig) -> Result<u64> {
    let check = dynamics::validate_step_sizes(game, config.epsilon, config.nu, config.delta)?;
    Ok((10.0 * check.rhs).ceil() as u64)
}

/// Estimates the transition matrix between pure Nash equilibrium states.
/// Row and column order is lexicographic in the joint action.
pub fn estimate_phat(game: &Game, config: &SimConfig, options: &ChainOptions) -> Result<EmpiricalChain> {
    config.validate_for(game)?;
    if let Some(v) = game.positive_utility_violation() {
        return Err(Error::NonPositiveUtility { player: v.player, payoff: v.value });
    }
    if !(config.lambda < 1.0) {
        return Err(Error::Config("unperturbed process needs lambda < 1".into()));
    }
    if options.episodes == 0 {
        return Err(Error::Config("need at least one episode per row".into()));
    }
    let states = game.pure_nash_equilibria();
    if states.is_empty() {
        return Err(Error::NoEquilibria);
    }
    let cap = match options.episode_cap {
        Some(c) => c,
        None => default_episode_cap(game, config)?,
    };
    let mut nash_index = vec![None; game.num_profiles()];
    for (k, p) in states.iter().enumerate() {
        nash_index[game.profile_index(&p.0)] = Some(k);
    }
    let m = states.len();
    let jobs: Vec<(usize, u64)> = (0..m)
        .flat_map(|row| (0..options.episodes).map(move |e| (row, e)))
        .collect();
    let outcomes: Vec<Result<Option<usize>>> = jobs
        .par_iter()
        .map(|&(row, e)| {
            let mut rng = stream_rng(config.seed, episode_stream(row, e));
            let source = PureStrategyState::new(states[row].clone());
            run_episode(game, config, &source, &nash_index, cap, options.kick_lambda, &mut rng)
        })
        .collect();

    let mut counts = vec![vec![0u64; m]; m];
    let mut escapes = vec![0u64; m];
    for (&(row, _), outcome) in jobs.iter().zip(outcomes) {
        match outcome? {
            Some(k) => counts[row][k] += 1,
            None => escapes[row] += 1,
        }
    }
    let labels: Vec<String> = states.iter().map(|p| game.profile_label(p)).collect();
    let mut matrix = Vec::with_capacity(m);
    for row in 0..m {
        let resolved: u64 = counts[row].iter().sum();
        if resolved == 0 {
            return Err(Error::EstimationFailed {
                row,
                label: labels[row].clone(),
                episodes: options.episodes,
                escapes: escapes[row],
            });
        }
        matrix.push(counts[row].iter().map(|&c| c as f64 / resolved as f64).collect());
    }
    Ok(EmpiricalChain {
        states,
        labels,
        matrix,
        counts,
        escapes,
        episodes: options.episodes,
        episode_cap: cap,
    })
}

impl EmpiricalChain {
    pub fn stationary(&self, tol: f64) -> Result<StationaryResult> {
        stationary_distribution(&self.matrix, tol)
    }

    /// Binomial standard error of each entry.
    pub fn standard_errors(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .zip(&self.matrix)
            .map(|(c, p)| {
                let n: u64 = c.iter().sum();
                p.iter().map(|&q| (q * (1.0 - q) / n as f64).sqrt()).collect()
            })
            .collect()
    }
}

fn check_stochastic(p: &[Vec<f64>]) -> Result<()> {
    let m = p.len();
    if m == 0 {
        return Err(Error::Config("empty transition matrix".into()));
    }
    for (i, row) in p.iter().enumerate() {
        if row.len() != m {
            return Err(Error::Config(format!("row {i} has {} entries, expected {m}", row.len())));
        }
        if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Config(format!("row {i} has a negative or non-finite entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("row {i} sums to {s}")));
        }
    }
    Ok(())
}

/// Closed communicating classes, each sorted, ordered by smallest member.
pub fn closed_classes(p: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let m = p.len();
    let mut reach: Vec<Vec<bool>> = (0..m)
        .map(|i| (0..m).map(|j| i == j || p[i][j] > 0.0).collect())
        .collect();
    for k in 0..m {
        for i in 0..m {
            if reach[i][k] {
                let via = reach[k].clone();
                for (r, v) in reach[i].iter_mut().zip(via) {
                    *r |= v;
                }
            }
        }
    }
    let mut seen = vec![false; m];
    let mut classes = Vec::new();
    for i in 0..m {
        if seen[i] {
            continue;
        }
        let closed = (0..m).all(|j| !reach[i][j] || reach[j][i]);
        let class: Vec<usize> = (0..m).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &class {
            seen[j] = true;
        }
        if closed {
            classes.push(class);
        }
    }
    classes
}

fn residual(pi: &[f64], p: &[Vec<f64>]) -> f64 {
    let m = pi.len();
    (0..m)
        .map(|j| {
            let pj: f64 = (0..m).map(|i| pi[i] * p[i][j]).sum();
            (pi[j] - pj).abs()
        })
        .fold(0.0, f64::max)
}

/// Solves `pi (P - I) = 0, sum(pi) = 1` by Gaussian elimination with partial pivoting.
fn direct_solve(p: &[Vec<f64>]) -> Option<Vec<f64>> {
    let m = p.len();
    // rows of A = (P - I)^T, last equation replaced by normalisation
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let mut row: Vec<f64> = (0..m).map(|i| p[i][j] - if i == j { 1.0 } else { 0.0 }).collect();
            row.push(0.0);
            row
        })
        .collect();
    a[m - 1] = vec![1.0; m + 1];
    for col in 0..m {
        let pivot = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    let pivot_row = a[col].clone();
                    for (x, y) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * y;
                    }
                }
            }
        }
    }
    let mut pi: Vec<f64> = (0..m).map(|i| a[i][m] / a[i][i]).collect();
    pi.iter_mut().for_each(|x| *x = x.max(0.0));
    let s: f64 = pi.iter().sum();
    if !(s > 0.0) {
        return None;
    }
    pi.iter_mut().for_each(|x| *x /= s);
    Some(pi)
}

/// Power iteration on the lazy chain `(P + I) / 2`, which shares the
/// stationary distribution and is aperiodic.
fn power_iterate(p: &[Vec<f64>], mut pi: Vec<f64>, tol: f64, cap: usize) -> Result<(Vec<f64>, usize)> {
    let m = p.len();
    let mut prev_res = f64::NAN;
    let mut gap_estimate = f64::NAN;
    for it in 0..cap {
        let res = residual(&pi, p);
        if res <= tol {
            return Ok((pi, it));
        }
        if prev_res.is_finite() && prev_res > 0.0 {
            gap_estimate = 1.0 - res / prev_res;
        }
        prev_res = res;
        let mut next = vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                next[j] += pi[i] * p[i][j];
            }
        }
        let s: f64 = next.iter().sum();
        for j in 0..m {
            pi[j] = 0.5 * (pi[j] + next[j] / s);
        }
    }
    Err(Error::SolverDiverged {
        iterations: cap,
        residual: residual(&pi, p),
        gap_estimate,
    })
}

fn restrict(p: &[Vec<f64>], class: &[usize]) -> Vec<Vec<f64>> {
    class
        .iter()
        .map(|&i| {
            let row: Vec<f64> = class.iter().map(|&j| p[i][j]).collect();
            let s: f64 = row.iter().sum();
            row.into_iter().map(|x| x / s).collect()
        })
        .collect()
}

/// Stationary distribution of a row-stochastic matrix, with residual at most `tol`.
pub fn stationary_distribution(p: &[Vec<f64>], tol: f64) -> Result<StationaryResult> {
    check_stochastic(p)?;
    let m = p.len();
    let classes = closed_classes(p);
    let weight = 1.0 / classes.len() as f64;
    let mut pi = vec![0.0; m];
    let mut iterations = 0;
    for class in &classes {
        let sub = restrict(p, class);
        let local = if class.len() <= DIRECT_SOLVE_LIMIT {
            match direct_solve(&sub) {
                Some(x) => x,
                None => {
                    let (x, it) =
                        power_iterate(&sub, vec![1.0 / class.len() as f64; class.len()], tol, POWER_ITERATION_CAP)?;
                    iterations += it;
                    x
                }
            }
        } else {
            let (x, it) =
                power_iterate(&sub, vec![1.0 / class.len() as f64; class.len()], tol, POWER_ITERATION_CAP)?;
            iterations += it;
            x
        };
        for (&i, x) in class.iter().zip(local) {
            pi[i] = weight * x;
        }
    }
    let mut res = residual(&pi, p);
    if res > tol {
        let (polished, it) = power_iterate(p, pi, tol, POWER_ITERATION_CAP)?;
        iterations += it;
        pi = polished;
        res = residual(&pi, p);
    }
    Ok(StationaryResult {
        pi,
        residual: res,
        iterations,
        unique: classes.len() == 1,
        closed_classes: classes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossValidation {
    pub labels: Vec<String>,
    pub pi: Vec<f64>,
    /// Occupation of each equilibrium neighbourhood, renormalised over the
    /// equilibrium neighbourhoods (all zeros if none was visited).
    pub occupation: Vec<f64>,
    /// Raw occupation mass on equilibrium neighbourhoods before renormalising.
    pub nash_mass: f64,
    pub max_discrepancy: f64,
}

/// Compares `pi` with time-average occupation given as `(label, fraction)` rows.
pub fn cross_validate_rows(
    labels: &[String],
    stationary: &StationaryResult,
    occupation: &[(String, f64)],
) -> CrossValidation {
    let raw: Vec<f64> = labels
        .iter()
        .map(|l| {
            occupation
                .iter()
                .find(|(ol, _)| ol == l)
                .map_or(0.0, |(_, f)| *f)
        })
        .collect();
    let mass: f64 = raw.iter().sum();
    let occ: Vec<f64> = if mass > 0.0 {
        raw.iter().map(|x| x / mass).collect()
    } else {
        vec![0.0; raw.len()]
    };
    let max_discrepancy = stationary
        .pi
        .iter()
        .zip(&occ)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    CrossValidation {
        labels: labels.to_vec(),
        pi: stationary.pi.clone(),
        occupation: occ,
        nash_mass: mass,
        max_discrepancy,
    }
}

pub fn cross_validate(
    chain: &EmpiricalChain,
    stationary: &StationaryResult,
    occupation: &OccupationStats,
) -> CrossValidation {
    cross_validate_rows(&chain.labels, stationary, &occupation.rows())
}
