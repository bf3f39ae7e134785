//! Finite strategic-form games and their static predicates.
//!
//! A [`Game`] stores a dense utility tensor indexed by joint action, with the
//! last player's action varying fastest (lexicographic order). Every
//! enumeration here is an exhaustive scan over all `|A_1| * ... * |A_n|`
//! profiles, so cost grows exponentially in the number of players. That is
//! fine for the desk-scale games this crate targets.
//!
//! Utility comparisons honour an optional tolerance (default `0.0`, i.e.
//! exact floating-point comparison).

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// One action index per player.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointAction(pub Vec<usize>);

impl JointAction {
    pub fn new(actions: Vec<usize>) -> Self {
        JointAction(actions)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy of `self` with player `player` switched to `action`.
    pub fn with(&self, player: usize, action: usize) -> JointAction {
        let mut next = self.0.clone();
        next[player] = action;
        JointAction(next)
    }
}

impl From<Vec<usize>> for JointAction {
    fn from(v: Vec<usize>) -> Self {
        JointAction(v)
    }
}

impl fmt::Display for JointAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, a) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    actions: Vec<usize>,
    strides: Vec<usize>,
    /// Flattened `[profile][player]`.
    utilities: Vec<f64>,
    labels: Option<Vec<Vec<String>>>,
    tolerance: f64,
}

impl Game {
    /// Builds a game from per-player action counts and a flat utility buffer laid
    /// out as `[profile_index * n + player]`.
    pub fn new(actions: Vec<usize>, utilities: Vec<f64>) -> Result<Game> {
        let n = actions.len();
        if n < 2 {
            return Err(Error::InvalidGame(format!("need at least 2 players, got {n}")));
        }
        if let Some((i, &k)) = actions.iter().enumerate().find(|(_, &k)| k < 2) {
            return Err(Error::InvalidGame(format!(
                "player {} has {k} actions; every player needs at least 2",
                i + 1
            )));
        }
        let profiles = actions
            .iter()
            .try_fold(1usize, |acc, &k| acc.checked_mul(k))
            .ok_or_else(|| Error::InvalidGame("profile count overflows".into()))?;
        if utilities.len() != profiles * n {
            return Err(Error::InvalidGame(format!(
                "utility tensor has {} entries, expected {} ({} profiles x {} players)",
                utilities.len(),
                profiles * n,
                profiles,
                n
            )));
        }
        if let Some(pos) = utilities.iter().position(|u| !u.is_finite()) {
            return Err(Error::InvalidGame(format!(
                "non-finite utility at profile {} player {}",
                pos / n,
                pos % n + 1
            )));
        }
        let mut strides = vec![1usize; n];
        for i in (0..n - 1).rev() {
            strides[i] = strides[i + 1] * actions[i + 1];
        }
        Ok(Game {
            actions,
            strides,
            utilities,
            labels: None,
            tolerance: 0.0,
        })
    }

    /// Builds a game by evaluating `payoffs` on every joint action.
    pub fn from_fn<F>(actions: Vec<usize>, mut payoffs: F) -> Result<Game>
    where
        F: FnMut(&[usize]) -> Vec<f64>,
    {
        let n = actions.len();
        let mut flat = Vec::new();
        for profile in ProfileIter::new(&actions) {
            let u = payoffs(&profile);
            if u.len() != n {
                return Err(Error::InvalidGame(format!(
                    "payoff vector for {:?} has length {}, expected {n}",
                    profile,
                    u.len()
                )));
            }
            flat.extend(u);
        }
        Game::new(actions, flat)
    }

    /// The Stag-Hunt game: (A,A) = 5,5; (A,B) = 1,3; (B,A) = 3,1; (B,B) = 4,4.
    pub fn stag_hunt() -> Game {
        Game::new(vec![2, 2], vec![5.0, 5.0, 1.0, 3.0, 3.0, 1.0, 4.0, 4.0])
            .and_then(|g| g.with_labels(vec![vec!["A".into(), "B".into()]; 2]))
            .expect("static game is valid")
    }

    pub fn with_labels(mut self, labels: Vec<Vec<String>>) -> Result<Game> {
        if labels.len() != self.players() {
            return Err(Error::InvalidGame(format!(
                "action_labels has {} entries, expected {}",
                labels.len(),
                self.players()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.len() != self.actions[i] {
                return Err(Error::InvalidGame(format!(
                    "action_labels[{i}] has {} labels, expected {}",
                    l.len(),
                    self.actions[i]
                )));
            }
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Result<Game> {
        if !(tolerance >= 0.0 && tolerance.is_finite()) {
            return Err(Error::InvalidGame(format!(
                "tolerance must be finite and non-negative, got {tolerance}"
            )));
        }
        self.tolerance = tolerance;
        Ok(self)
    }

    pub fn players(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn labels(&self) -> Option<&[Vec<String>]> {
        self.labels.as_deref()
    }

    pub fn num_profiles(&self) -> usize {
        self.utilities.len() / self.players()
    }

    pub fn profiles(&self) -> impl Iterator<Item = JointAction> + '_ {
        ProfileIter::new(&self.actions).map(JointAction)
    }

    pub fn check_profile(&self, profile: &JointAction) -> Result<()> {
        if profile.len() != self.players() {
            return Err(Error::InvalidProfile(format!(
                "profile {profile} has {} entries, game has {} players",
                profile.len(),
                self.players()
            )));
        }
        for (i, (&a, &k)) in profile.0.iter().zip(&self.actions).enumerate() {
            if a >= k {
                return Err(Error::InvalidProfile(format!(
                    "player {} action {a} out of range (has {k} actions)",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Lexicographic index of a profile. The profile must be valid.
    pub fn profile_index(&self, profile: &[usize]) -> usize {
        profile.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn profile_at(&self, mut index: usize) -> JointAction {
        let mut out = vec![0; self.players()];
        for (slot, &s) in out.iter_mut().zip(&self.strides) {
            *slot = index / s;
            index %= s;
        }
        JointAction(out)
    }

    /// Payoff vector at a raw, already validated profile.
    #[inline]
    pub fn payoffs_unchecked(&self, profile: &[usize]) -> &[f64] {
        let n = self.players();
        let k = self.profile_index(profile);
        &self.utilities[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn payoff_unchecked(&self, profile: &[usize], player: usize) -> f64 {
        self.utilities[self.profile_index(profile) * self.players() + player]
    }

    /// `(u_1(a), ..., u_n(a))`.
    pub fn utility(&self, profile: &JointAction) -> Result<Vec<f64>> {
        self.check_profile(profile)?;
        Ok(self.payoffs_unchecked(&profile.0).to_vec())
    }

    /// Smallest and largest utility entry over all players and profiles.
    pub fn utility_bounds(&self) -> (f64, f64) {
        self.utilities
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &u| {
                (lo.min(u), hi.max(u))
            })
    }

    pub fn action_label(&self, player: usize, action: usize) -> String {
        match &self.labels {
            Some(l) => l[player][action].clone(),
            None => action.to_string(),
        }
    }

    /// Human-readable label such as `(A,B)`.
    pub fn profile_label(&self, profile: &JointAction) -> String {
        let parts: Vec<String> = profile
            .0
            .iter()
            .enumerate()
            .map(|(i, &a)| self.action_label(i, a))
            .collect();
        format!("({})", parts.join(","))
    }

    fn weakly_ge(&self, a: f64, b: f64) -> bool {
        a >= b - self.tolerance
    }

    fn strictly_gt(&self, a: f64, b: f64) -> bool {
        a > b + self.tolerance
    }

    /// All maximisers of `u_i(a, profile_{-i})` over `a`, ties included.
    pub fn best_response(&self, player: usize, profile: &JointAction) -> Result<Vec<usize>> {
        self.check_profile(profile)?;
        if player >= self.players() {
            return Err(Error::InvalidProfile(format!(
                "player index {player} out of range"
            )));
        }
        Ok(self.best_response_unchecked(player, &profile.0))
    }

    fn best_response_unchecked(&self, player: usize, profile: &[usize]) -> Vec<usize> {
        let mut p = profile.to_vec();
        let values: Vec<f64> = (0..self.actions[player])
            .map(|a| {
                p[player] = a;
                self.payoff_unchecked(&p, player)
            })
            .collect();
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..values.len())
            .filter(|&a| self.weakly_ge(values[a], best))
            .collect()
    }

    fn is_nash_unchecked(&self, profile: &[usize]) -> bool {
        let mut p = profile.to_vec();
        (0..self.players()).all(|i| {
            let current = self.payoff_unchecked(profile, i);
            (0..self.actions[i]).all(|a| {
                p[i] = a;
                let ok = self.weakly_ge(current, self.payoff_unchecked(&p, i));
                p[i] = profile[i];
                ok
            })
        })
    }

    pub fn is_pure_nash(&self, profile: &JointAction) -> Result<bool> {
        self.check_profile(profile)?;
        Ok(self.is_nash_unchecked(&profile.0))
    }

    /// Every pure Nash equilibrium, in lexicographic order.
    pub fn pure_nash_equilibria(&self) -> Vec<JointAction> {
        self.profiles()
            .filter(|p| self.is_nash_unchecked(&p.0))
            .collect()
    }

    /// `None` when every utility entry is strictly positive, otherwise the
    /// first offending entry in lexicographic order.
    pub fn positive_utility_violation(&self) -> Option<UtilityViolation> {
        let n = self.players();
        self.utilities
            .iter()
            .position(|&u| u <= 0.0)
            .map(|pos| UtilityViolation {
                profile: self.profile_at(pos / n),
                player: pos % n,
                value: self.utilities[pos],
            })
    }

    pub fn check_positive_utility(&self) -> (bool, Option<UtilityViolation>) {
        let v = self.positive_utility_violation();
        (v.is_none(), v)
    }

    /// First `(player, action)` satisfying the weak-improvement condition at a
    /// non-equilibrium profile: `action` is a best response of `player` and no
    /// other player is made worse off by the switch. With `require_change`,
    /// `action` must differ from the player's current action.
    ///
    /// Search order is players by index, then best responses by action index.
    pub fn improvement_witness(
        &self,
        profile: &JointAction,
        require_change: bool,
    ) -> Option<(usize, usize)> {
        let n = self.players();
        for i in 0..n {
            for a in self.best_response_unchecked(i, &profile.0) {
                if require_change && a == profile.0[i] {
                    continue;
                }
                let moved = profile.with(i, a);
                let before = self.payoffs_unchecked(&profile.0);
                let after = self.payoffs_unchecked(&moved.0);
                if (0..n)
                    .filter(|&j| j != i)
                    .all(|j| self.weakly_ge(after[j], before[j]))
                {
                    return Some((i, a));
                }
            }
        }
        None
    }

    /// First `(player, action)` whose unilateral switch leaves every player
    /// strictly worse off than at `profile`.
    pub fn punishment_witness(&self, profile: &JointAction) -> Option<(usize, usize)> {
        let n = self.players();
        let base = self.payoffs_unchecked(&profile.0);
        for i in 0..n {
            for a in 0..self.actions[i] {
                if a == profile.0[i] {
                    continue;
                }
                let moved = profile.with(i, a);
                let after = self.payoffs_unchecked(&moved.0);
                if (0..n).all(|j| self.strictly_gt(base[j], after[j])) {
                    return Some((i, a));
                }
            }
        }
        None
    }

    /// Follows improvement witnesses from `start` until a pure Nash
    /// equilibrium is reached. Returns `None` if some profile on the way has
    /// no witness or the path exceeds `num_profiles()` moves.
    pub fn improvement_path(&self, start: &JointAction) -> Option<Vec<JointAction>> {
        let mut path = vec![start.clone()];
        let mut current = start.clone();
        for _ in 0..=self.num_profiles() {
            if self.is_nash_unchecked(&current.0) {
                return Some(path);
            }
            let (i, a) = self.improvement_witness(&current, true)?;
            current = current.with(i, a);
            path.push(current.clone());
        }
        None
    }

    /// Runs both coordination conditions and the positive-utility check.
    pub fn check_coordination(&self) -> GameClassReport {
        let (is_positive_utility, positive_utility_violation) = self.check_positive_utility();
        if !is_positive_utility {
            log::warn!("game violates the positive-utility property; classifying anyway");
        }
        let nash_set = self.pure_nash_equilibria();
        let mut improvement_witnesses = Vec::new();
        let mut punishment_witnesses = Vec::new();
        let mut condition_a_violation = None;
        let mut condition_a_lenient_violation = None;
        let mut condition_b_violation = None;

        for profile in self.profiles() {
            if self.is_nash_unchecked(&profile.0) {
                match self.punishment_witness(&profile) {
                    Some((player, action)) => punishment_witnesses.push(Witness {
                        profile,
                        player,
                        action,
                    }),
                    None => {
                        condition_b_violation.get_or_insert(profile);
                    }
                }
            } else {
                if self.improvement_witness(&profile, false).is_none() {
                    condition_a_lenient_violation.get_or_insert(profile.clone());
                }
                match self.improvement_witness(&profile, true) {
                    Some((player, action)) => improvement_witnesses.push(Witness {
                        profile,
                        player,
                        action,
                    }),
                    None => {
                        condition_a_violation.get_or_insert(profile);
                    }
                }
            }
        }

        let condition_a = condition_a_violation.is_none();
        let condition_b = condition_b_violation.is_none();
        let payoff_dominant_set = self.payoff_dominant_among(&nash_set);
        GameClassReport {
            is_positive_utility,
            positive_utility_violation,
            is_coordination: condition_a && condition_b,
            condition_a,
            condition_a_lenient: condition_a_lenient_violation.is_none(),
            condition_b,
            nash_set,
            payoff_dominant_set,
            improvement_witnesses,
            punishment_witnesses,
            condition_a_violation,
            condition_b_violation,
        }
    }

    /// The top tier of pure Nash equilibria: the smallest nonempty subset whose
    /// members strictly dominate (for every player) each equilibrium outside it.
    /// Equals the whole Nash set when no strict dominance structure exists.
    pub fn payoff_dominant_states(&self) -> Vec<JointAction> {
        let nash = self.pure_nash_equilibria();
        self.payoff_dominant_among(&nash)
    }

    fn payoff_dominant_among(&self, nash: &[JointAction]) -> Vec<JointAction> {
        let dominates = |a: &JointAction, b: &JointAction| {
            let ua = self.payoffs_unchecked(&a.0);
            let ub = self.payoffs_unchecked(&b.0);
            ua.iter().zip(ub).all(|(&x, &y)| self.strictly_gt(x, y))
        };
        // Admissible subsets are nested, so the smallest closure of any single
        // seed is the minimal one.
        let mut best: Option<Vec<bool>> = None;
        for seed in 0..nash.len() {
            let mut member = vec![false; nash.len()];
            member[seed] = true;
            loop {
                let outsider = (0..nash.len()).find(|&s| {
                    !member[s]
                        && (0..nash.len()).any(|m| member[m] && !dominates(&nash[m], &nash[s]))
                });
                match outsider {
                    Some(s) => member[s] = true,
                    None => break,
                }
            }
            let size = member.iter().filter(|&&m| m).count();
            if best
                .as_ref()
                .is_none_or(|b| size < b.iter().filter(|&&m| m).count())
            {
                best = Some(member);
            }
        }
        match best {
            Some(member) => nash
                .iter()
                .zip(member)
                .filter(|(_, m)| *m)
                .map(|(p, _)| p.clone())
                .collect(),
            None => Vec::new(),
        }
    }

    /// Parses the JSON game format.
    pub fn from_json_str(text: &str) -> Result<Game> {
        Self::from_json_named(text, "game")
    }

    pub fn from_json_named(text: &str, source_name: &str) -> Result<Game> {
        let parse_err = |message: String| Error::Parse {
            source_name: source_name.to_string(),
            message,
        };
        let file: GameFile = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        if file.players != file.actions.len() {
            return Err(parse_err(format!(
                "field `players` is {} but `actions` lists {} players",
                file.players,
                file.actions.len()
            )));
        }
        let mut flat = Vec::new();
        flatten_utilities(
            &file.utilities,
            &file.actions,
            file.players,
            &mut String::from("utilities"),
            &mut flat,
        )
        .map_err(parse_err)?;
        let mut game =
            Game::new(file.actions, flat).map_err(|e| parse_err(e.to_string()))?;
        if let Some(labels) = file.action_labels {
            game = game
                .with_labels(labels)
                .map_err(|e| parse_err(e.to_string()))?;
        }
        if let Some(tol) = file.tolerance {
            game = game
                .with_tolerance(tol)
                .map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(game)
    }

    pub fn to_json_value(&self) -> Value {
        fn nest(game: &Game, depth: usize, prefix: &mut Vec<usize>) -> Value {
            if depth == game.players() {
                return Value::from(game.payoffs_unchecked(prefix).to_vec());
            }
            let items = (0..game.actions[depth])
                .map(|a| {
                    prefix.push(a);
                    let v = nest(game, depth + 1, prefix);
                    prefix.pop();
                    v
                })
                .collect();
            Value::Array(items)
        }
        let mut obj = serde_json::Map::new();
        obj.insert("players".into(), Value::from(self.players()));
        obj.insert("actions".into(), Value::from(self.actions.clone()));
        obj.insert("utilities".into(), nest(self, 0, &mut Vec::new()));
        if let Some(l) = &self.labels {
            obj.insert("action_labels".into(), serde_json::to_value(l).unwrap_or(Value::Null));
        }
        if self.tolerance > 0.0 {
            obj.insert("tolerance".into(), Value::from(self.tolerance));
        }
        Value::Object(obj)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile {
    players: usize,
    actions: Vec<usize>,
    utilities: Value,
    #[serde(default)]
    action_labels: Option<Vec<Vec<String>>>,
    #[serde(default)]
    tolerance: Option<f64>,
}

fn flatten_utilities(
    value: &Value,
    actions: &[usize],
    n: usize,
    path: &mut String,
    out: &mut Vec<f64>,
) -> std::result::Result<(), String> {
    let arr = value
        .as_array()
        .ok_or_else(|| format!("{path}: expected an array"))?;
    match actions.split_first() {
        None => {
            if arr.len() != n {
                return Err(format!(
                    "{path}: expected {n} payoffs, got {}",
                    arr.len()
                ));
            }
            for (k, v) in arr.iter().enumerate() {
                let x = v
                    .as_f64()
                    .ok_or_else(|| format!("{path}[{k}]: expected a number"))?;
                out.push(x);
            }
            Ok(())
        }
        Some((&k, rest)) => {
            if arr.len() != k {
                return Err(format!(
                    "{path}: expected {k} entries, got {}",
                    arr.len()
                ));
            }
            for (a, v) in arr.iter().enumerate() {
                let len = path.len();
                path.push_str(&format!("[{a}]"));
                flatten_utilities(v, rest, n, path, out)?;
                path.truncate(len);
            }
            Ok(())
        }
    }
}

/// Lexicographic odometer over joint actions.
pub struct ProfileIter {
    actions: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl ProfileIter {
    pub fn new(actions: &[usize]) -> Self {
        let next = if actions.iter().all(|&k| k > 0) {
            Some(vec![0; actions.len()])
        } else {
            None
        };
        ProfileIter {
            actions: actions.to_vec(),
            next,
        }
    }
}

impl Iterator for ProfileIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut carry = true;
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < self.actions[i] {
                carry = false;
                break;
            }
            succ[i] = 0;
        }
        if !carry {
            self.next = Some(succ);
        }
        Some(current)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityViolation {
    pub profile: JointAction,
    pub player: usize,
    pub value: f64,
}

/// A `(player, action)` move attached to the profile it applies to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub profile: JointAction,
    pub player: usize,
    pub action: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameClassReport {
    pub is_positive_utility: bool,
    pub positive_utility_violation: Option<UtilityViolation>,
    pub is_coordination: bool,
    /// Improvement condition, requiring the witness action to differ from the current one.
    pub condition_a: bool,
    /// Improvement condition, allowing the witness to keep the current action.
    pub condition_a_lenient: bool,
    pub condition_b: bool,
    pub nash_set: Vec<JointAction>,
    pub payoff_dominant_set: Vec<JointAction>,
    /// One entry per non-equilibrium profile that has a witness.
    pub improvement_witnesses: Vec<Witness>,
    /// One entry per equilibrium that has a punishing deviation.
    pub punishment_witnesses: Vec<Witness>,
    pub condition_a_violation: Option<JointAction>,
    pub condition_b_violation: Option<JointAction>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ja(v: &[usize]) -> JointAction {
        JointAction(v.to_vec())
    }

    fn constant_2x2() -> Game {
        Game::new(vec![2, 2], vec![2.0; 8]).unwrap()
    }

    fn matching_pennies_shifted() -> Game {
        // (2,0)/(0,2) pattern shifted by +1.
        Game::new(
            vec![2, 2],
            vec![3.0, 1.0, 1.0, 3.0, 1.0, 3.0, 3.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn stag_hunt_utilities() {
        let g = Game::stag_hunt();
        assert_eq!(g.utility(&ja(&[0, 0])).unwrap(), vec![5.0, 5.0]);
        assert_eq!(g.utility(&ja(&[1, 0])).unwrap(), vec![3.0, 1.0]);
        assert_eq!(g.utility(&ja(&[0, 1])).unwrap(), vec![1.0, 3.0]);
        assert_eq!(g.utility(&ja(&[1, 1])).unwrap(), vec![4.0, 4.0]);
    }

    #[test]
    fn invalid_profile_rejected() {
        let g = Game::stag_hunt();
        assert!(matches!(g.utility(&ja(&[2, 0])), Err(Error::InvalidProfile(_))));
        assert!(matches!(g.utility(&ja(&[0])), Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn construction_errors() {
        assert!(Game::new(vec![2], vec![1.0; 2]).is_err());
        assert!(Game::new(vec![2, 1], vec![1.0; 4]).is_err());
        assert!(Game::new(vec![2, 2], vec![1.0; 7]).is_err());
        let mut bad = vec![1.0; 8];
        bad[3] = f64::NAN;
        assert!(Game::new(vec![2, 2], bad).is_err());
        // zero utilities are allowed at construction
        assert!(Game::new(vec![2, 2], vec![0.0; 8]).is_ok());
    }

    #[test]
    fn best_response_brute_force() {
        let g = Game::stag_hunt();
        // player 1 facing A: rows give 5 vs 3; facing B: 1 vs 4
        assert_eq!(g.best_response(0, &ja(&[1, 0])).unwrap(), vec![0]);
        assert_eq!(g.best_response(0, &ja(&[0, 1])).unwrap(), vec![1]);
        assert_eq!(constant_2x2().best_response(1, &ja(&[0, 0])).unwrap(), vec![0, 1]);
    }

    #[test]
    fn nash_sets() {
        assert_eq!(
            Game::stag_hunt().pure_nash_equilibria(),
            vec![ja(&[0, 0]), ja(&[1, 1])]
        );
        assert_eq!(constant_2x2().pure_nash_equilibria().len(), 4);
        assert!(matching_pennies_shifted().pure_nash_equilibria().is_empty());
    }

    #[test]
    fn positive_utility() {
        let g = Game::stag_hunt();
        assert!(g.check_positive_utility().0);

        let mut u = vec![5.0, 5.0, 1.0, 3.0, 3.0, 1.0, 4.0, 4.0];
        u[3] = 0.0;
        let (ok, v) = Game::new(vec![2, 2], u.clone()).unwrap().check_positive_utility();
        assert!(!ok);
        let v = v.unwrap();
        assert_eq!((v.profile, v.player, v.value), (ja(&[0, 1]), 1, 0.0));

        let neg: Vec<f64> = [5.0, 5.0, 1.0, 3.0, 3.0, 1.0, 4.0, 4.0].iter().map(|x: &f64| -x).collect();
        assert!(!Game::new(vec![2, 2], neg).unwrap().check_positive_utility().0);
    }

    #[test]
    fn stag_hunt_is_coordination() {
        let r = Game::stag_hunt().check_coordination();
        assert!(r.is_coordination);
        assert!(r.condition_a && r.condition_b && r.condition_a_lenient);
        assert_eq!(r.payoff_dominant_set, vec![ja(&[0, 0])]);
        // at (A,A) player 1 switching to B gives (3,1): both strictly below 5
        assert_eq!(
            r.punishment_witnesses[0],
            Witness { profile: ja(&[0, 0]), player: 0, action: 1 }
        );
        assert_eq!(r.improvement_witnesses.len(), 2);
    }

    #[test]
    fn constant_game_fails_condition_b() {
        let r = constant_2x2().check_coordination();
        assert!(!r.is_coordination);
        assert!(!r.condition_b);
        assert_eq!(r.condition_b_violation, Some(ja(&[0, 0])));
        // no non-Nash profiles, so condition (a) holds vacuously
        assert!(r.condition_a);
    }

    #[test]
    fn lenient_condition_a_differs() {
        // At (0,1) player 2 wants to move but that hurts player 1, and player 1 is
        // indifferent but switching hurts player 2. Only the lenient reading
        // (keep the current action) is satisfied.
        let g = Game::from_fn(vec![2, 2], |p| match (p[0], p[1]) {
            (0, 0) => vec![1.0, 2.0],
            (0, 1) => vec![2.0, 1.0],
            (1, 0) => vec![1.0, 1.0],
            _ => vec![2.0, 0.5],
        })
        .unwrap();
        let r = g.check_coordination();
        assert!(r.condition_a_lenient);
        assert_eq!(r.condition_a_violation, Some(ja(&[0, 1])));
    }

    #[test]
    fn payoff_dominance_cases() {
        assert_eq!(Game::stag_hunt().payoff_dominant_states(), vec![ja(&[0, 0])]);

        // two Nash profiles with identical payoffs
        let g = Game::from_fn(vec![2, 2], |p| {
            if p[0] == p[1] { vec![4.0, 4.0] } else { vec![1.0, 1.0] }
        })
        .unwrap();
        assert_eq!(g.payoff_dominant_states().len(), 2);

        // 3 players: Nash at all-0 (5,5,5) and all-1 (4,4,4)
        let g3 = Game::from_fn(vec![2, 2, 2], |p| match p {
            [0, 0, 0] => vec![5.0; 3],
            [1, 1, 1] => vec![4.0; 3],
            _ => vec![1.0; 3],
        })
        .unwrap();
        assert_eq!(g3.pure_nash_equilibria(), vec![ja(&[0, 0, 0]), ja(&[1, 1, 1])]);
        assert_eq!(g3.payoff_dominant_states(), vec![ja(&[0, 0, 0])]);
    }

    #[test]
    fn payoff_dominance_top_tier_of_three() {
        // Nash payoffs: a=(6,6), b=(5,5), c=(5,5) on the diagonal of a 3x3
        let vals = [6.0, 5.0, 5.0];
        let g = Game::from_fn(vec![3, 3], |p| {
            if p[0] == p[1] { vec![vals[p[0]]; 2] } else { vec![1.0; 2] }
        })
        .unwrap();
        assert_eq!(g.payoff_dominant_states(), vec![ja(&[0, 0])]);
    }

    #[test]
    fn tolerance_merges_near_ties() {
        let g = Game::new(vec![2, 2], vec![5.0, 5.0, 1.0, 1.0, 5.0 + 1e-9, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(g.best_response(0, &ja(&[0, 0])).unwrap(), vec![1]);
        let g = g.with_tolerance(1e-6).unwrap();
        assert_eq!(g.best_response(0, &ja(&[0, 0])).unwrap(), vec![0, 1]);
    }

    #[test]
    fn json_round_trip_and_errors() {
        let g = Game::stag_hunt();
        let text = g.to_json_value().to_string();
        assert_eq!(Game::from_json_str(&text).unwrap(), g);

        let bad = r#"{"players": 2, "actions": [2, 2], "utilities": [[[5,5],[1,3]],[[3,1],[4]]]}"#;
        let err = Game::from_json_str(bad).unwrap_err().to_string();
        assert!(err.contains("utilities[1][1]"), "{err}");

        let truncated = r#"{"players": 2, "actions": [2, 2], "utilities": [[[5,5],"#;
        let err = Game::from_json_str(truncated).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn profile_index_round_trip() {
        let g = Game::from_fn(vec![2, 3, 4], |_| vec![1.0; 3]).unwrap();
        for (k, p) in g.profiles().enumerate() {
            assert_eq!(g.profile_index(&p.0), k);
            assert_eq!(g.profile_at(k), p);
        }
    }
}
