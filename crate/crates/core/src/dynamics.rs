//! One step of the aspiration-based perturbed learning automaton.
//!
//! Each agent keeps a mixed strategy on the simplex and an aspiration level.
//! Per step, every agent (in index order) samples an action, possibly
//! trembling to a uniform draw; all agents then observe their utility at the
//! new joint action, reinforce the chosen action by
//! `epsilon * u * phi(u - aspiration)` using the aspiration from *before* the
//! step, and finally move their aspiration toward the observed utility.
//!
//! With `h = 1` the satisfaction factor is identically one and the rule
//! reduces to plain perturbed learning automata.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, JointAction};
use crate::rng::SimRng;

/// Lower clamp for noisy utility measurements.
pub const PAYOFF_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub strategy: Vec<f64>,
    pub aspiration: f64,
    pub action: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub agents: Vec<AgentState>,
    pub time: u64,
}

impl SystemState {
    /// Uniform (or configured) strategies, an initial joint action drawn from
    /// them, and aspirations equal to the utilities of that joint action.
    pub fn initial(game: &Game, config: &SimConfig, rng: &mut SimRng) -> Result<SystemState> {
        let strategies: Vec<Vec<f64>> = match &config.initial_strategies {
            Some(s) => {
                if s.len() != game.players() {
                    return Err(Error::Config(format!(
                        "initial_strategies has {} entries, game has {} players",
                        s.len(),
                        game.players()
                    )));
                }
                for (i, x) in s.iter().enumerate() {
                    check_simplex(x, game.actions()[i]).map_err(|m| {
                        Error::Config(format!("initial strategy of player {}: {m}", i + 1))
                    })?;
                }
                s.clone()
            }
            None => game
                .actions()
                .iter()
                .map(|&k| vec![1.0 / k as f64; k])
                .collect(),
        };
        let actions: Vec<usize> = strategies.iter().map(|x| categorical(x, rng)).collect();
        let payoffs = game.payoffs_unchecked(&actions);
        let agents = strategies
            .into_iter()
            .zip(&actions)
            .zip(payoffs)
            .map(|((strategy, &action), &u)| AgentState {
                strategy,
                aspiration: u,
                action,
            })
            .collect();
        Ok(SystemState { agents, time: 0 })
    }

    pub fn joint_action(&self) -> JointAction {
        JointAction(self.agents.iter().map(|a| a.action).collect())
    }

    pub fn validate(&self, game: &Game) -> Result<()> {
        if self.agents.len() != game.players() {
            return Err(Error::InvalidProfile(format!(
                "state has {} agents, game has {} players",
                self.agents.len(),
                game.players()
            )));
        }
        game.check_profile(&self.joint_action())?;
        for (i, a) in self.agents.iter().enumerate() {
            check_simplex(&a.strategy, game.actions()[i]).map_err(|m| {
                Error::InvalidProfile(format!("strategy of player {}: {m}", i + 1))
            })?;
            if !a.aspiration.is_finite() {
                return Err(Error::InvalidProfile(format!(
                    "aspiration of player {} is not finite",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

fn check_simplex(x: &[f64], len: usize) -> std::result::Result<(), String> {
    if x.len() != len {
        return Err(format!("length {} but player has {len} actions", x.len()));
    }
    if x.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err("entries must be finite and non-negative".into());
    }
    let s: f64 = x.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(format!("entries sum to {s}, not 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Strategy step size.
    pub epsilon: f64,
    /// Aspiration step size.
    pub nu: f64,
    /// Tremble probability per agent per step.
    pub lambda: f64,
    /// Satisfaction floor in `(0, 1]`; `1` recovers plain PLA.
    pub h: f64,
    pub horizon: u64,
    pub seed: u64,
    /// Neighbourhood radius for pure-state occupation.
    pub delta: f64,
    /// First step counted toward occupation. Defaults to `horizon / 2`.
    pub window_start: Option<u64>,
    /// Trajectory sampling stride. Defaults to `max(1, horizon / 2000)`.
    pub stride: Option<u64>,
    /// Half-width of zero-mean uniform noise added to utility measurements.
    pub noise: f64,
    pub initial_strategies: Option<Vec<Vec<f64>>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            epsilon: 1e-4,
            nu: 1e-3,
            lambda: 0.01,
            h: 0.01,
            horizon: 2_000_000,
            seed: 0,
            delta: 0.05,
            window_start: None,
            stride: None,
            noise: 0.0,
            initial_strategies: None,
        }
    }
}

impl SimConfig {
    pub fn window_start(&self) -> u64 {
        self.window_start.unwrap_or(self.horizon / 2)
    }

    pub fn stride(&self) -> u64 {
        self.stride.unwrap_or((self.horizon / 2000).max(1)).max(1)
    }

    /// Parameter-range checks that do not depend on a game.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return bad(format!("nu must be in (0, 1], got {}", self.nu));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must be in [0, 1], got {}", self.lambda));
        }
        if !(self.h > 0.0 && self.h <= 1.0) {
            return bad(format!("h must be in (0, 1], got {}", self.h));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be non-negative, got {}", self.noise));
        }
        if self.stride == Some(0) {
            return bad("stride must be at least 1".into());
        }
        Ok(())
    }

    /// Range checks plus `epsilon * u < 1` for every utility entry.
    pub fn validate_for(&self, game: &Game) -> Result<()> {
        self.validate()?;
        let (_, umax) = game.utility_bounds();
        if self.epsilon * (umax + self.noise) >= 1.0 {
            return Err(Error::Config(format!(
                "epsilon * max utility = {} must stay below 1",
                self.epsilon * (umax + self.noise)
            )));
        }
        Ok(())
    }
}

/// Satisfaction factor: `1` when `y >= 0`, otherwise `max(h, 1 + y/h)`.
pub fn phi(y: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("satisfaction floor h must be positive, got {h}")));
    }
    Ok(satisfaction(y, h))
}

#[inline]
pub(crate) fn satisfaction(y: f64, h: f64) -> f64 {
    if y >= 0.0 {
        1.0
    } else {
        (1.0 + y / h).max(h)
    }
}

/// Index drawn from the categorical distribution `weights`.
#[inline]
pub fn categorical(weights: &[f64], rng: &mut SimRng) -> usize {
    let r: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = k;
        }
        acc += w;
        if r < acc {
            return k;
        }
    }
    // r landed in the rounding gap above the cumulative sum
    last_positive
}

/// With probability `1 - lambda` a draw from `strategy`, otherwise a uniform action.
#[inline]
pub fn sample_action(strategy: &[f64], lambda: f64, rng: &mut SimRng) -> usize {
    let tremble: f64 = rng.random();
    sample_action_given(strategy, tremble < lambda, rng)
}

/// Action draw with the tremble decision already made.
#[inline]
pub fn sample_action_given(strategy: &[f64], tremble: bool, rng: &mut SimRng) -> usize {
    if tremble {
        rng.random_range(0..strategy.len())
    } else {
        categorical(strategy, rng)
    }
}

/// Reinforces `chosen` in place by `gain` and renormalises.
#[inline]
fn reinforce(strategy: &mut [f64], chosen: usize, gain: f64) {
    let mut sum = 0.0;
    for (k, x) in strategy.iter_mut().enumerate() {
        let target = if k == chosen { 1.0 } else { 0.0 };
        *x += gain * (target - *x);
        sum += *x;
    }
    for x in strategy.iter_mut() {
        *x /= sum;
    }
}

/// `x + epsilon * payoff * phi(payoff - aspiration) * (e_chosen - x)`.
pub fn strategy_update(
    agent: &AgentState,
    chosen: usize,
    payoff: f64,
    epsilon: f64,
    h: f64,
) -> Result<Vec<f64>> {
    if !(payoff > 0.0) {
        return Err(Error::NonPositiveUtility { player: 0, payoff });
    }
    if chosen >= agent.strategy.len() {
        return Err(Error::InvalidProfile(format!(
            "action {chosen} out of range for {} actions",
            agent.strategy.len()
        )));
    }
    if !(h > 0.0) {
        return Err(Error::Config(format!("satisfaction floor h must be positive, got {h}")));
    }
    let mut next = agent.strategy.clone();
    reinforce(
        &mut next,
        chosen,
        epsilon * payoff * satisfaction(payoff - agent.aspiration, h),
    );
    Ok(next)
}

/// `aspiration + nu * (payoff - aspiration)`.
#[inline]
pub fn aspiration_update(aspiration: f64, payoff: f64, nu: f64) -> f64 {
    aspiration + nu * (payoff - aspiration)
}

/// Pure transition: returns the successor of `state`.
pub fn step(
    state: &SystemState,
    game: &Game,
    config: &SimConfig,
    rng: &mut SimRng,
) -> Result<SystemState> {
    let mut next = state.clone();
    step_in_place(&mut next, game, config, rng)?;
    Ok(next)
}

/// [`step`] without the clone.
pub fn step_in_place(
    state: &mut SystemState,
    game: &Game,
    config: &SimConfig,
    rng: &mut SimRng,
) -> Result<()> {
    for agent in state.agents.iter_mut() {
        agent.action = sample_action(&agent.strategy, config.lambda, rng);
    }
    learn(state, game, config, rng)
}

/// One step where each agent's tremble decision is given by `trembles`
/// rather than drawn at rate `lambda`.
pub fn step_with_trembles(
    state: &mut SystemState,
    game: &Game,
    config: &SimConfig,
    trembles: &[bool],
    rng: &mut SimRng,
) -> Result<()> {
    for (agent, &t) in state.agents.iter_mut().zip(trembles) {
        agent.action = sample_action_given(&agent.strategy, t, rng);
    }
    learn(state, game, config, rng)
}

/// Evaluation, strategy update and aspiration update for the joint action
/// already stored in `state`.
fn learn(state: &mut SystemState, game: &Game, config: &SimConfig, rng: &mut SimRng) -> Result<()> {
    // Small fixed buffer avoids an allocation per step for typical games.
    let mut profile_buf = [0usize; 8];
    let mut profile_vec;
    let n = state.agents.len();
    let profile: &mut [usize] = if n <= 8 {
        &mut profile_buf[..n]
    } else {
        profile_vec = vec![0; n];
        &mut profile_vec
    };
    for (slot, a) in profile.iter_mut().zip(&state.agents) {
        *slot = a.action;
    }
    let payoffs = game.payoffs_unchecked(profile);
    for (i, agent) in state.agents.iter_mut().enumerate() {
        let mut u = payoffs[i];
        if config.noise > 0.0 {
            u = (u + rng.random_range(-config.noise..=config.noise)).max(PAYOFF_FLOOR);
        }
        if !(u > 0.0) {
            return Err(Error::NonPositiveUtility { player: i, payoff: u });
        }
        let gain = config.epsilon * u * satisfaction(u - agent.aspiration, config.h);
        reinforce(&mut agent.strategy, agent.action, gain);
        agent.aspiration = aspiration_update(agent.aspiration, u, config.nu);
    }
    state.time += 1;
    Ok(())
}

/// Both sides of the step-size admissibility inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepSizeCheck {
    /// Steps for the aspiration to close the utility spread to within `delta`.
    pub lhs: f64,
    /// Fewest steps for a strategy to come within `delta` of a vertex under
    /// continuous play, minimised over profiles and players.
    pub rhs: f64,
    pub satisfied: bool,
}

pub fn validate_step_sizes(game: &Game, epsilon: f64, nu: f64, delta: f64) -> Result<StepSizeCheck> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::StepSizeDomain(format!("epsilon must be in (0,1), got {epsilon}")));
    }
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::StepSizeDomain(format!("nu must be in (0,1), got {nu}")));
    }
    let (lo, hi) = game.utility_bounds();
    let spread = hi - lo;
    if !(spread > 0.0) {
        return Err(Error::StepSizeDomain(
            "utility spread is zero; aspiration bracket is degenerate".into(),
        ));
    }
    if !(delta > 0.0 && delta <= spread) {
        return Err(Error::StepSizeDomain(format!(
            "delta must be in (0, {spread}], got {delta}"
        )));
    }
    let lhs = (delta / spread).ln() / (1.0 - nu).ln();
    let mut rhs = f64::INFINITY;
    for p in game.profiles() {
        for &u in game.payoffs_unchecked(&p.0) {
            let contraction = 1.0 - epsilon * u;
            if !(contraction > 0.0 && contraction < 1.0) {
                return Err(Error::StepSizeDomain(format!(
                    "1 - epsilon * u = {contraction} at utility {u}; need epsilon * u in (0, 1)"
                )));
            }
            rhs = rhs.min(delta.ln() / contraction.ln());
        }
    }
    Ok(StepSizeCheck {
        lhs,
        rhs,
        satisfied: lhs <= rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;

    fn agent(strategy: Vec<f64>, aspiration: f64) -> AgentState {
        AgentState { strategy, aspiration, action: 0 }
    }

    #[test]
    fn phi_branches() {
        assert_eq!(phi(0.5, 0.01).unwrap(), 1.0);
        assert_relative_eq!(phi(-0.005, 0.1).unwrap(), 0.95, epsilon = 1e-15);
        assert_eq!(phi(-10.0, 0.1).unwrap(), 0.1);
        assert!(phi(1.0, 0.0).is_err());
        assert!(phi(1.0, -0.5).is_err());
    }

    #[test]
    fn strategy_update_examples() {
        let a = agent(vec![0.5, 0.5], 4.0);
        let x = strategy_update(&a, 0, 5.0, 0.1, 0.3).unwrap();
        assert_relative_eq!(x[0], 0.75, epsilon = 1e-15);
        assert_relative_eq!(x[1], 0.25, epsilon = 1e-15);

        let v = agent(vec![1.0, 0.0], 3.0);
        assert_eq!(strategy_update(&v, 0, 2.0, 0.1, 0.01).unwrap(), vec![1.0, 0.0]);

        assert!(matches!(
            strategy_update(&a, 0, 0.0, 0.1, 0.5),
            Err(Error::NonPositiveUtility { .. })
        ));
    }

    #[test]
    fn toy_update_formula() {
        // x = (1/2, 1/2), action 1 chosen: x' = 1/2 (1 + e u phi, 1 - e u phi)
        for &(u, rho, eps, h) in &[(3.0, 4.0, 0.01, 0.5), (5.0, 2.0, 0.05, 0.1), (1.0, 1.2, 0.2, 0.3)] {
            let f = phi(u - rho, h).unwrap();
            let x = strategy_update(&agent(vec![0.5, 0.5], rho), 0, u, eps, h).unwrap();
            assert_relative_eq!(x[0], 0.5 * (1.0 + eps * u * f), epsilon = 1e-15);
            assert_relative_eq!(x[1], 0.5 * (1.0 - eps * u * f), epsilon = 1e-15);
        }
    }

    #[test]
    fn aspiration_examples() {
        assert_relative_eq!(aspiration_update(4.0, 5.0, 0.1), 4.1, epsilon = 1e-15);
        assert_eq!(aspiration_update(2.5, 2.5, 0.3), 2.5);
        assert_eq!(aspiration_update(5.0, 1.0, 1.0), 1.0);
    }

    #[test]
    fn sample_action_vertex_and_symmetry() {
        let mut rng = stream_rng(3, 0);
        for _ in 0..1000 {
            assert_eq!(sample_action(&[1.0, 0.0], 0.0, &mut rng), 0);
        }
        let n = 200_000;
        let ones = (0..n).filter(|_| sample_action(&[0.5, 0.5], 0.3, &mut rng) == 0).count();
        let p = ones as f64 / n as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt() + 1e-3);
    }

    #[test]
    fn sample_action_tremble_frequency() {
        // vertex e_1 with lambda = 0.5: P(action 1) = 0.5 + 0.5 * 0.5 = 0.75
        let mut rng = stream_rng(11, 0);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| sample_action(&[1.0, 0.0], 0.5, &mut rng) == 0).count();
        let p = hits as f64 / n as f64;
        let sigma = (0.75 * 0.25 / n as f64).sqrt();
        assert!((p - 0.75).abs() < 3.0 * sigma, "p = {p}");
    }

    #[test]
    fn vertex_state_is_fixed_without_trembles() {
        let game = Game::stag_hunt();
        let cfg = SimConfig { lambda: 0.0, ..SimConfig::default() };
        let s = SystemState {
            agents: vec![agent(vec![1.0, 0.0], 5.0), agent(vec![1.0, 0.0], 5.0)],
            time: 0,
        };
        let mut rng = stream_rng(0, 0);
        let next = step(&s, &game, &cfg, &mut rng).unwrap();
        assert_eq!(next.agents, s.agents);
        assert_eq!(next.time, 1);
    }

    #[test]
    fn full_tremble_is_uniform_over_profiles() {
        let game = Game::stag_hunt();
        let cfg = SimConfig { lambda: 1.0, ..SimConfig::default() };
        let mut rng = stream_rng(5, 0);
        let mut state = SystemState::initial(&game, &cfg, &mut rng).unwrap();
        let n = 40_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            step_in_place(&mut state, &game, &cfg, &mut rng).unwrap();
            counts[game.profile_index(&state.joint_action().0)] += 1;
        }
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn step_reads_old_aspiration() {
        // Player 1 sits (numerically) on vertex B, so (B,B) is played for sure.
        // Payoff 4 against old aspiration 4.2 gives phi = max(0.5, 0.6) = 0.6;
        // the updated aspiration 4.02 would give 0.96 instead.
        let game = Game::stag_hunt();
        let cfg = SimConfig { lambda: 0.0, h: 0.5, nu: 0.9, epsilon: 0.1, ..SimConfig::default() };
        let tiny = 1e-300;
        let s = SystemState {
            agents: vec![agent(vec![tiny, 1.0 - tiny], 4.2), agent(vec![0.0, 1.0], 4.2)],
            time: 0,
        };
        let mut rng = stream_rng(0, 0);
        let next = step(&s, &game, &cfg, &mut rng).unwrap();
        assert_eq!(next.joint_action().0, vec![1, 1]);
        let gain = 0.1 * 4.0 * 0.6;
        assert_relative_eq!(next.agents[0].strategy[0], tiny * (1.0 - gain), max_relative = 1e-12);
        assert_relative_eq!(next.agents[0].aspiration, 4.2 + 0.9 * (4.0 - 4.2), epsilon = 1e-12);
    }

    #[test]
    fn step_size_check_stag_hunt() {
        let g = Game::stag_hunt();
        let c = validate_step_sizes(&g, 1e-4, 1e-3, 0.01).unwrap();
        assert!(c.satisfied);
        assert_relative_eq!(c.lhs, (0.01f64 / 4.0).ln() / (0.999f64).ln(), max_relative = 1e-12);
        assert_relative_eq!(c.rhs, (0.01f64).ln() / (1.0 - 5e-4f64).ln(), max_relative = 1e-12);

        // nu = epsilon: aspiration is far too slow
        assert!(!validate_step_sizes(&g, 1e-3, 1e-3, 0.01).unwrap().satisfied);
        // delta equal to the full spread: lhs = 0 (needs delta < 1 so rhs > 0)
        let small = Game::new(vec![2, 2], vec![0.9, 0.9, 0.5, 0.6, 0.6, 0.5, 0.8, 0.8]).unwrap();
        let c = validate_step_sizes(&small, 1e-3, 1e-3, 0.4).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!(c.satisfied);
        // with delta >= 1 the rhs is non-positive
        assert!(validate_step_sizes(&g, 1e-3, 1e-3, 4.0).unwrap().rhs <= 0.0);

        assert!(matches!(
            validate_step_sizes(&g, 0.2, 1e-3, 0.01),
            Err(Error::StepSizeDomain(_))
        ));
    }

    #[test]
    fn lhs_decreases_with_nu() {
        let g = Game::stag_hunt();
        let mut prev = f64::INFINITY;
        for nu in [1e-4, 1e-3, 1e-2, 0.1, 0.5] {
            let c = validate_step_sizes(&g, 1e-4, nu, 0.01).unwrap();
            assert!(c.lhs <= prev);
            prev = c.lhs;
        }
    }

    #[test]
    fn config_validation() {
        let g = Game::stag_hunt();
        assert!(SimConfig::default().validate_for(&g).is_ok());
        assert!(SimConfig { epsilon: 0.2, ..SimConfig::default() }.validate_for(&g).is_err());
        assert!(SimConfig { h: 0.0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { lambda: 1.5, ..SimConfig::default() }.validate().is_err());
    }

    #[test]
    fn noisy_payoffs_stay_positive() {
        let game = Game::new(vec![2, 2], vec![0.01; 8]).unwrap();
        let cfg = SimConfig { noise: 0.5, epsilon: 0.1, lambda: 0.2, ..SimConfig::default() };
        let mut rng = stream_rng(1, 0);
        let mut s = SystemState::initial(&game, &cfg, &mut rng).unwrap();
        for _ in 0..10_000 {
            step_in_place(&mut s, &game, &cfg, &mut rng).unwrap();
        }
        s.validate(&game).unwrap();
    }
}
