use apla::dynamics::{self, phi, strategy_update, AgentState, SimConfig, SystemState};
use apla::game::{Game, JointAction};
use apla::rng::{stream_rng, SimRng};
use proptest::prelude::*;
use rand::Rng;

fn positive_game(players: usize, max_actions: usize) -> impl Strategy<Value = Game> {
    prop::collection::vec(2..=max_actions, players).prop_flat_map(|actions| {
        let len = actions.iter().product::<usize>() * actions.len();
        prop::collection::vec(0.1f64..5.0, len)
            .prop_map(move |flat| Game::new(actions.clone(), flat).unwrap())
    })
}

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, k).prop_map(|mut v| {
        v[0] += 1e-3;
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    })
}

/// Identical-interest game with pairwise distinct common payoffs.
fn potential_game() -> impl Strategy<Value = Game> {
    (prop::collection::vec(2usize..=3, 2..=3), any::<u64>()).prop_map(|(actions, seed)| {
        let n: usize = actions.iter().product();
        let mut values: Vec<f64> = (1..=n).map(|v| v as f64).collect();
        let mut rng = stream_rng(seed, 0);
        for i in (1..n).rev() {
            values.swap(i, rng.random_range(0..=i));
        }
        let players = actions.len();
        let flat = values.iter().flat_map(|&v| std::iter::repeat_n(v, players)).collect();
        Game::new(actions, flat).unwrap()
    })
}

fn brute_force_nash(game: &Game, p: &JointAction) -> bool {
    let u = game.utility(p).unwrap();
    (0..game.players()).all(|i| (0..game.actions()[i]).all(|a| game.utility(&p.with(i, a)).unwrap()[i] <= u[i]))
}

/// Reference step of standard perturbed learning automata, written without
/// any satisfaction term. Draw order: per agent a tremble coin, then the action.
fn pla_reference_step(state: &mut SystemState, game: &Game, eps: f64, nu: f64, lambda: f64, rng: &mut SimRng) {
    for agent in state.agents.iter_mut() {
        let coin: f64 = rng.random();
        agent.action = if coin < lambda {
            rng.random_range(0..agent.strategy.len())
        } else {
            let r: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = None;
            let mut last = 0;
            for (k, &w) in agent.strategy.iter().enumerate() {
                if w > 0.0 {
                    last = k;
                }
                acc += w;
                if pick.is_none() && r < acc {
                    pick = Some(k);
                }
            }
            pick.unwrap_or(last)
        };
    }
    let profile: Vec<usize> = state.agents.iter().map(|a| a.action).collect();
    let u = game.utility(&JointAction(profile)).unwrap();
    for (i, agent) in state.agents.iter_mut().enumerate() {
        let step = eps * u[i];
        for (k, x) in agent.strategy.iter_mut().enumerate() {
            let e = if k == agent.action { 1.0 } else { 0.0 };
            *x += step * (e - *x);
        }
        let s: f64 = agent.strategy.iter().sum();
        agent.strategy.iter_mut().for_each(|x| *x /= s);
        agent.aspiration += nu * (u[i] - agent.aspiration);
    }
    state.time += 1;
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simplex_and_aspiration_bracket(
        game in positive_game(3, 3),
        eps in 1e-4f64..0.15,
        nu in 1e-4f64..0.5,
        lambda in 0.0f64..1.0,
        h in 1e-3f64..1.0,
        seed in any::<u64>(),
    ) {
        let cfg = SimConfig { epsilon: eps, nu, lambda, h, seed, ..SimConfig::default() };
        let (lo, hi) = game.utility_bounds();
        let mut rng = stream_rng(seed, 0);
        let mut s = SystemState::initial(&game, &cfg, &mut rng).unwrap();
        for _ in 0..500 {
            dynamics::step_in_place(&mut s, &game, &cfg, &mut rng).unwrap();
            for a in &s.agents {
                prop_assert!(a.strategy.iter().all(|&x| (0.0..=1.0).contains(&x)));
                prop_assert!((a.strategy.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                prop_assert!(a.aspiration >= lo - 1e-9 && a.aspiration <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn phi_properties(y in -10.0f64..10.0, dy in 0.0f64..5.0, h in 1e-6f64..=1.0) {
        let v = phi(y, h).unwrap();
        prop_assert!(v >= h && v <= 1.0);
        prop_assert!(phi(y + dy, h).unwrap() >= v);
        if y >= 0.0 {
            prop_assert_eq!(v, 1.0);
        } else {
            prop_assert_eq!(v, h.max(1.0 + y / h));
        }
        prop_assert_eq!(phi(y, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn satisfaction_increment_monotone(
        x in simplex(3),
        chosen in 0usize..3,
        rho in 0.1f64..5.0,
        u1 in 0.1f64..5.0,
        du in 0.0f64..3.0,
        h in 1e-3f64..1.0,
    ) {
        // increment magnitude is eps * u * phi * |e - x|; compare at equal
        // payoffs but different aspirations so only phi differs
        let a = AgentState { strategy: x.clone(), aspiration: rho + du, action: chosen };
        let b = AgentState { strategy: x.clone(), aspiration: rho, action: chosen };
        let na = strategy_update(&a, chosen, u1, 0.1, h).unwrap();
        let nb = strategy_update(&b, chosen, u1, 0.1, h).unwrap();
        let move_a = (na[chosen] - x[chosen]).abs();
        let move_b = (nb[chosen] - x[chosen]).abs();
        prop_assert!(move_b + 1e-15 >= move_a);
    }

    #[test]
    fn h_one_matches_reference(
        game in positive_game(2, 3),
        lambda in 0.0f64..0.5,
        seed in any::<u64>(),
    ) {
        let cfg = SimConfig { epsilon: 0.05, nu: 0.01, lambda, h: 1.0, ..SimConfig::default() };
        let mut rng = stream_rng(seed, 0);
        let mut a = SystemState::initial(&game, &cfg, &mut rng).unwrap();
        let mut b = a.clone();
        let mut rng_b = rng.clone();
        for _ in 0..300 {
            dynamics::step_in_place(&mut a, &game, &cfg, &mut rng).unwrap();
            pla_reference_step(&mut b, &game, cfg.epsilon, cfg.nu, lambda, &mut rng_b);
        }
        prop_assert_eq!(a, b);
    }

    #[test]
    fn nash_set_matches_brute_force(game in positive_game(3, 3)) {
        let nash = game.pure_nash_equilibria();
        for p in game.profiles() {
            prop_assert_eq!(nash.contains(&p), brute_force_nash(&game, &p));
            for i in 0..game.players() {
                prop_assert!(!game.best_response(i, &p).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn payoff_dominant_invariants(game in positive_game(2, 3)) {
        let nash = game.pure_nash_equilibria();
        let top = game.payoff_dominant_states();
        prop_assert!(top.iter().all(|p| nash.contains(p)));
        prop_assert!(nash.is_empty() || !top.is_empty());
        for s in &top {
            let us = game.utility(s).unwrap();
            for t in nash.iter().filter(|t| !top.contains(t)) {
                let ut = game.utility(t).unwrap();
                prop_assert!(us.iter().zip(&ut).all(|(a, b)| a > b));
            }
        }
    }

    #[test]
    fn coordination_paths_reach_nash(game in potential_game()) {
        let report = game.check_coordination();
        let nash = report.nash_set.clone();
        prop_assert!(!nash.is_empty());
        // common payoffs: every best-response move helps everyone, so
        // condition (a) holds and paths must terminate in the Nash set
        prop_assert!(report.condition_a);
        for start in game.profiles() {
            let path = game.improvement_path(&start).expect("finite path");
            prop_assert!(path.len() <= game.num_profiles());
            prop_assert!(nash.contains(path.last().unwrap()));
            for w in path.windows(2) {
                let moved: Vec<usize> = (0..game.players()).filter(|&i| w[0].0[i] != w[1].0[i]).collect();
                prop_assert_eq!(moved.len(), 1);
            }
        }
    }
}

#[test]
fn aspiration_contracts_geometrically() {
    let nu = 0.01;
    let u = 3.0;
    let mut rho: f64 = 5.0;
    for k in 1..=2000 {
        let next = dynamics::aspiration_update(rho, u, nu);
        assert!(((next - u).abs() - (1.0 - nu) * (rho - u).abs()).abs() <= 1e-15);
        rho = next;
        if k % 500 == 0 {
            assert!((rho - u).abs() <= 2.0 * (1.0 - nu).powi(k) + 1e-12);
        }
    }
}

#[test]
fn pure_states_fixed_under_zero_lambda() {
    let game = Game::stag_hunt();
    let cfg = SimConfig { lambda: 0.0, ..SimConfig::default() };
    for p in game.profiles() {
        let mut s = apla::PureStrategyState::new(p.clone()).to_system_state(&game);
        let start = s.clone();
        let mut rng = stream_rng(3, 0);
        for _ in 0..1000 {
            dynamics::step_in_place(&mut s, &game, &cfg, &mut rng).unwrap();
        }
        for (a, b) in s.agents.iter().zip(&start.agents) {
            assert_eq!(a.strategy, b.strategy);
            assert_eq!(a.aspiration, b.aspiration);
            assert_eq!(a.action, b.action);
        }
    }
}
