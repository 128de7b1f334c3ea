//! Tabular Q-learning with ε-greedy exploration, and the uniform random baseline.
//!
//! Every episode starts in the question state and ends after one action, so the
//! table holds a single row of 12 action values and the update target is the
//! sampled reward itself (no bootstrap term, hence no discount factor).

use std::fmt::Write as _;

use rand::Rng;

use crate::domain::{action_space, RobotAction, ACTION_COUNT};
use crate::error::{Error, Result};

/// Gap below which a learned runner-up is reported as a near tie.
pub const LEARNED_NEAR_TIE_GAP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub initial_q: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig { epsilon: 0.1, alpha: 0.03, initial_q: 0.0 }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig(format!("epsilon {} is outside [0, 1]", self.epsilon)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!("alpha {} is outside (0, 1]", self.alpha)));
        }
        if !self.initial_q.is_finite() {
            return Err(Error::InvalidConfig("initial Q-value must be finite".into()));
        }
        Ok(())
    }
}

/// Action values of the question state, indexed in action-space order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QTable {
    values: [f64; ACTION_COUNT],
}

impl Default for QTable {
    fn default() -> Self {
        QTable::filled(0.0)
    }
}

impl QTable {
    pub fn filled(value: f64) -> Self {
        QTable { values: [value; ACTION_COUNT] }
    }

    pub fn from_values(values: [f64; ACTION_COUNT]) -> Self {
        QTable { values }
    }

    pub fn get(&self, action: RobotAction) -> f64 {
        self.values[action.index()]
    }

    pub fn set(&mut self, action: RobotAction, value: f64) {
        self.values[action.index()] = value;
    }

    pub fn values(&self) -> &[f64; ACTION_COUNT] {
        &self.values
    }

    /// V(Question): the largest action value.
    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn maximizers(&self) -> ([usize; ACTION_COUNT], usize) {
        let best = self.max_value();
        let mut idx = [0; ACTION_COUNT];
        let mut n = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v == best {
                idx[n] = i;
                n += 1;
            }
        }
        (idx, n)
    }

    /// `rate,difficulty,q_value` lines in action-space order, after a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rate,difficulty,q_value\n");
        for action in action_space() {
            let _ = writeln!(out, "{},{},{:?}", action.rate, action.difficulty, self.get(action));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut values = [None; ACTION_COUNT];
        for (n, line) in text.lines().enumerate() {
            let line_no = n as u64 + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "rate,difficulty,q_value" {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            if fields.len() != 3 {
                return Err(parse_err(format!("expected 3 fields, found {}", fields.len())));
            }
            let action = RobotAction::new(
                fields[0].parse().map_err(|e: Error| parse_err(e.to_string()))?,
                fields[1].parse().map_err(|e: Error| parse_err(e.to_string()))?,
            );
            let q: f64 = fields[2].parse().map_err(|_| parse_err(format!("bad value `{}`", fields[2])))?;
            if !q.is_finite() {
                return Err(parse_err(format!("non-finite value `{}`", fields[2])));
            }
            values[action.index()] = Some(q);
        }
        let mut out = [0.0; ACTION_COUNT];
        for (i, v) in values.iter().enumerate() {
            out[i] = v.ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("missing action {}", action_space()[i]),
            })?;
        }
        Ok(QTable { values: out })
    }
}

/// Maps one uniform draw onto `0..n`.
pub(crate) fn uniform_index(u: f64, n: usize) -> usize {
    ((u * n as f64) as usize).min(n - 1)
}

/// ε-greedy choice.
///
/// One draw decides between exploring and exploiting; a second draw picks
/// uniformly among all actions when exploring, or among the tied maximizers
/// when exploiting with a tie.
pub fn select_action<R: Rng + ?Sized>(table: &QTable, epsilon: f64, rng: &mut R) -> RobotAction {
    let actions = action_space();
    if rng.gen::<f64>() < epsilon {
        return actions[uniform_index(rng.gen::<f64>(), ACTION_COUNT)];
    }
    let (idx, n) = table.maximizers();
    if n == 1 {
        actions[idx[0]]
    } else {
        actions[idx[uniform_index(rng.gen::<f64>(), n)]]
    }
}

/// Moves Q(action) toward `reward` by `alpha` and returns the signed change.
pub fn q_update(table: &mut QTable, action: RobotAction, reward: f64, alpha: f64) -> f64 {
    let old = table.get(action);
    let delta = alpha * (reward - old);
    table.set(action, old + delta);
    delta
}

/// Uniform random action; one draw.
pub fn random_agent_select<R: Rng + ?Sized>(rng: &mut R) -> RobotAction {
    action_space()[uniform_index(rng.gen::<f64>(), ACTION_COUNT)]
}

/// Deterministic greedy policy read off a table.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyPolicy {
    pub action: RobotAction,
    pub value: f64,
    /// All actions by decreasing value; equal values keep action-space order.
    pub ranking: Vec<(RobotAction, f64)>,
}

impl GreedyPolicy {
    /// Runner-up actions within `gap` of the best value, with their gaps.
    pub fn near_ties(&self, gap: f64) -> Vec<(RobotAction, f64)> {
        self.ranking
            .iter()
            .skip(1)
            .map(|&(a, v)| (a, self.value - v))
            .take_while(|&(_, g)| g < gap)
            .collect()
    }
}

/// Argmax with exact ties going to the lowest action index.
pub fn greedy_policy(table: &QTable) -> GreedyPolicy {
    let mut ranking: Vec<(RobotAction, f64)> =
        action_space().into_iter().map(|a| (a, table.get(a))).collect();
    ranking.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (action, value) = ranking[0];
    GreedyPolicy { action, value, ranking }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::domain::{Difficulty, FollowUpRate};

    const BEST: RobotAction = RobotAction::new(FollowUpRate::Always, Difficulty::Difficult);

    fn frequencies(mut pick: impl FnMut() -> RobotAction, n: usize) -> [f64; ACTION_COUNT] {
        let mut counts = [0usize; ACTION_COUNT];
        for _ in 0..n {
            counts[pick().index()] += 1;
        }
        counts.map(|c| c as f64 / n as f64)
    }

    #[test]
    fn greedy_with_unique_max() {
        let mut table = QTable::default();
        table.set(BEST, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(select_action(&table, 0.0, &mut rng), BEST);
        }
        assert_eq!(greedy_policy(&table).action, BEST);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut table = QTable::default();
        table.set(BEST, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let freq = frequencies(|| select_action(&table, 1.0, &mut rng), 120_000);
        for f in freq {
            assert!((f - 1.0 / 12.0).abs() <= 0.01, "{freq:?}");
        }
    }

    #[test]
    fn all_ties_break_uniformly() {
        let table = QTable::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let freq = frequencies(|| select_action(&table, 0.0, &mut rng), 120_000);
        for f in freq {
            assert!((f - 1.0 / 12.0).abs() <= 0.01, "{freq:?}");
        }
    }

    #[test]
    fn random_agent_is_uniform_and_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let freq = frequencies(|| random_agent_select(&mut rng), 120_000);
        for f in freq {
            assert!((f - 1.0 / 12.0).abs() <= 0.01, "{freq:?}");
        }
        let seq = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| random_agent_select(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(seq(8), seq(8));
    }

    #[test]
    fn single_update_arithmetic() {
        let mut table = QTable::default();
        let delta = q_update(&mut table, BEST, 3.0, 0.03);
        assert!((delta - 0.09).abs() < 1e-15);
        assert!((table.get(BEST) - 0.09).abs() < 1e-15);
        let before = table;
        let current = table.get(BEST);
        assert_eq!(q_update(&mut table, BEST, current, 0.03), 0.0);
        assert_eq!(table, before);
    }

    #[test]
    fn greedy_ties_go_to_lowest_index() {
        let mut table = QTable::default();
        let a = RobotAction::new(FollowUpRate::Occasional, Difficulty::Moderate);
        table.set(a, 2.0);
        table.set(BEST, 2.0);
        let policy = greedy_policy(&table);
        assert_eq!(policy.action, a);
        assert_eq!(policy.near_ties(LEARNED_NEAR_TIE_GAP), vec![(BEST, 0.0)]);
        assert_eq!(policy.ranking.len(), 12);
    }

    #[test]
    fn config_validation() {
        assert!(AgentConfig::default().validate().is_ok());
        assert!(AgentConfig { epsilon: 1.5, ..Default::default() }.validate().is_err());
        assert!(AgentConfig { alpha: 0.0, ..Default::default() }.validate().is_err());
        assert!(AgentConfig { alpha: 1.0, ..Default::default() }.validate().is_ok());
    }

    #[test]
    fn csv_rejects_incomplete_tables() {
        let text = QTable::default().to_csv();
        let short: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(QTable::from_csv(&short).is_err());
        assert!(QTable::from_csv("0.1,easy\n").is_err());
    }

    fn table_strategy() -> impl Strategy<Value = QTable> {
        prop::array::uniform12(-10.0f64..10.0).prop_map(QTable::from_values)
    }

    proptest! {
        #[test]
        fn update_contracts_toward_reward(
            table in table_strategy(),
            idx in 0usize..12,
            reward in -0.6f64..3.0,
            alpha in 0.001f64..=1.0,
        ) {
            let action = RobotAction::from_index(idx).unwrap();
            let mut t = table;
            let old = t.get(action);
            let delta = q_update(&mut t, action, reward, alpha);
            let new = t.get(action);
            prop_assert!(((new - reward).abs() - (1.0 - alpha) * (old - reward).abs()).abs() < 1e-12);
            prop_assert!((new - old - delta).abs() < 1e-12);
            for other in action_space().into_iter().filter(|&a| a != action) {
                prop_assert_eq!(t.get(other), table.get(other));
            }
        }

        #[test]
        fn argmax_is_scale_invariant(table in table_strategy(), scale in 0.01f64..100.0) {
            let scaled = QTable::from_values(table.values().map(|v| v * scale));
            prop_assert_eq!(greedy_policy(&table).action, greedy_policy(&scaled).action);
        }

        #[test]
        fn csv_round_trip(table in table_strategy()) {
            prop_assert_eq!(QTable::from_csv(&table.to_csv()).unwrap(), table);
        }

        #[test]
        fn values_stay_in_reward_hull(rewards in prop::collection::vec((0usize..12, -0.6f64..=3.0), 1..200)) {
            let mut t = QTable::default();
            for (idx, r) in rewards {
                q_update(&mut t, RobotAction::from_index(idx).unwrap(), r, 0.03);
            }
            prop_assert!(t.values().iter().all(|v| (-0.6..=3.0).contains(v)));
        }
    }
}
