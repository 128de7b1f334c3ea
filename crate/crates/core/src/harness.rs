//! Experiment driver: epochs of episodes, per-epoch metrics, seeded multi-run
//! sweeps, the random baseline comparison and CSV export.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{greedy_policy, q_update, random_agent_select, select_action, AgentConfig, QTable};
use crate::domain::RobotAction;
use crate::environment::step;
use crate::error::{Error, Result};
use crate::oracle::ActionValueTable;
use crate::user_sim::{find_user, EngagementLevel, ResponseProfile, UserModel};

/// Relative half-width of the convergence band around the optimal value.
pub const CONVERGENCE_BAND: f64 = 0.15;

/// Number of trailing epochs treated as the converged phase in comparisons.
pub const CONVERGED_WINDOW: usize = 50;

pub const METRICS_HEADER: &str = "user,engagement,agent,seed,epoch,average_return,start_state_value,q_update_sum,greedy_rate,greedy_difficulty";

pub const POLICY_HEADER: &str =
    "user,engagement,agent,seed,final_rate,final_difficulty,oracle_rate,oracle_difficulty,match";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentKind {
    QLearning,
    Random,
}

impl AgentKind {
    pub const ALL: [AgentKind; 2] = [AgentKind::QLearning, AgentKind::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::QLearning => "qlearning",
            AgentKind::Random => "random",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownName { kind: "agent", name: s.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub user: String,
    pub engagement: EngagementLevel,
    pub agent_kind: AgentKind,
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub agent: AgentConfig,
    pub seed: u64,
    pub perturbation_width: f64,
}

impl RunConfig {
    /// Default experiment (100 epochs of 150 episodes, ε = 0.1, α = 0.03).
    pub fn new(user: impl Into<String>, engagement: EngagementLevel, agent_kind: AgentKind, seed: u64) -> Self {
        RunConfig {
            user: user.into(),
            engagement,
            agent_kind,
            epochs: 100,
            episodes_per_epoch: 150,
            agent: AgentConfig::default(),
            seed,
            perturbation_width: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if self.episodes_per_epoch == 0 {
            return Err(Error::InvalidConfig("episodes per epoch must be positive".into()));
        }
        if !(self.perturbation_width >= 0.0 && self.perturbation_width.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "perturbation width {} must be a non-negative number",
                self.perturbation_width
            )));
        }
        self.agent.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch_index: usize,
    pub average_return: f64,
    /// max Q before the epoch's first episode; 0 for the random agent.
    pub start_state_value: f64,
    /// Sum of |ΔQ| over the epoch; 0 for the random agent.
    pub q_update_sum: f64,
    /// Greedy action after the epoch; none for the random agent.
    pub greedy_action: Option<RobotAction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: RunConfig,
    pub metrics: Vec<EpochMetrics>,
    /// Learned table; none for the random agent.
    pub final_q: Option<QTable>,
    pub converged_epoch: Option<usize>,
}

impl RunResult {
    pub fn final_greedy(&self) -> Option<RobotAction> {
        self.final_q.as_ref().map(|q| greedy_policy(q).action)
    }

    /// Mean average return over the last `window` epochs.
    pub fn tail_mean_return(&self, window: usize) -> f64 {
        tail_mean(self.metrics.iter().map(|m| m.average_return), window)
    }

    /// Mean start-state value over the last `window` epochs.
    pub fn tail_mean_value(&self, window: usize) -> f64 {
        tail_mean(self.metrics.iter().map(|m| m.start_state_value), window)
    }
}

fn tail_mean(values: impl DoubleEndedIterator<Item = f64>, window: usize) -> f64 {
    let tail: Vec<f64> = values.rev().take(window).collect();
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xCBF2_9CE4_8422_2325u64, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3))
}

/// Seed of the random stream for one (user, engagement, seed) cell.
///
/// `splitmix64(splitmix64(seed ^ fnv1a(user)) ^ (engagement index + 1))`.
/// Both agents of a cell share the stream; other cells never affect it.
pub fn cell_stream_seed(seed: u64, user: &str, engagement: EngagementLevel) -> u64 {
    splitmix64(splitmix64(seed ^ fnv1a(user.as_bytes())) ^ (engagement.index() as u64 + 1))
}

/// Runs one experiment against a user from `users`.
pub fn run(config: &RunConfig, users: &[UserModel]) -> Result<RunResult> {
    let user = find_user(users, &config.user)?;
    run_profile(config, user.profile(config.engagement))
}

/// Runs one experiment against an explicit profile.
///
/// Per episode, the learner draws its action (one or two uniforms), then the
/// perturbation draws its two uniforms if enabled, then the environment
/// steps.
pub fn run_profile(config: &RunConfig, profile: &ResponseProfile) -> Result<RunResult> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cell_stream_seed(config.seed, &config.user, config.engagement));
    let episodes = config.episodes_per_epoch;
    let learning = config.agent_kind == AgentKind::QLearning;
    let mut table = QTable::filled(config.agent.initial_q);
    let mut metrics = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let start_state_value = if learning { table.max_value() } else { 0.0 };
        let mut total_reward = 0.0;
        let mut q_update_sum = 0.0;
        for _ in 0..episodes {
            let action = if learning {
                select_action(&table, config.agent.epsilon, &mut rng)
            } else {
                random_agent_select(&mut rng)
            };
            let episode = if config.perturbation_width > 0.0 {
                let d = action.difficulty;
                let noisy = profile.get(d).perturbed(config.perturbation_width, &mut rng);
                step(&profile.with(d, noisy), action, &mut rng)
            } else {
                step(profile, action, &mut rng)
            };
            total_reward += episode.reward;
            if learning {
                q_update_sum += q_update(&mut table, action, episode.reward, config.agent.alpha).abs();
            }
        }
        metrics.push(EpochMetrics {
            epoch_index: epoch,
            average_return: total_reward / episodes as f64,
            start_state_value,
            q_update_sum,
            greedy_action: learning.then(|| greedy_policy(&table).action),
        });
    }

    let converged_epoch = if learning {
        let optimum = ActionValueTable::from_profile(profile).optimal_value();
        detect_convergence(&metrics, optimum)
    } else {
        None
    };
    Ok(RunResult {
        config: config.clone(),
        metrics,
        final_q: learning.then_some(table),
        converged_epoch,
    })
}

/// First epoch from which every start-state value stays within
/// `0.15 · max(1, |oracle_value|)` of `oracle_value`.
pub fn detect_convergence(metrics: &[EpochMetrics], oracle_value: f64) -> Option<usize> {
    let band = CONVERGENCE_BAND * oracle_value.abs().max(1.0);
    let inside = |m: &EpochMetrics| (m.start_state_value - oracle_value).abs() <= band;
    match metrics.iter().rposition(|m| !inside(m)) {
        None => metrics.first().map(|m| m.epoch_index),
        Some(last_out) => metrics.get(last_out + 1).map(|m| m.epoch_index),
    }
}

/// Epoch-wise pairing of two runs of the same experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub first: AgentKind,
    pub second: AgentKind,
    /// (epoch, first average return, second average return).
    pub epochs: Vec<(usize, f64, f64)>,
    /// Number of trailing epochs averaged below.
    pub window: usize,
    pub first_mean: f64,
    pub second_mean: f64,
}

impl Comparison {
    pub fn difference(&self) -> f64 {
        self.first_mean - self.second_mean
    }

    pub fn render(&self) -> String {
        let mut out = String::from("epoch,first_average_return,second_average_return\n");
        for (e, a, b) in &self.epochs {
            out.push_str(&format!("{e},{a},{b}\n"));
        }
        out.push_str(&format!(
            "# converged window: last {} epochs\nmean,{},{}\nmean,{},{}\ndifference,{}\n",
            self.window,
            self.first,
            self.first_mean,
            self.second,
            self.second_mean,
            self.difference()
        ));
        out
    }
}

/// Runs both configurations and compares their converged-phase returns.
///
/// The two must share user, engagement, epoch count, episode count and
/// perturbation width.
pub fn compare(first: &RunConfig, second: &RunConfig, users: &[UserModel]) -> Result<Comparison> {
    let mismatch = |what: &str| Err(Error::InvalidConfig(format!("compared runs differ in {what}")));
    if !first.user.eq_ignore_ascii_case(&second.user) {
        return mismatch("user");
    }
    if first.engagement != second.engagement {
        return mismatch("engagement");
    }
    if first.epochs != second.epochs {
        return mismatch("epochs");
    }
    if first.episodes_per_epoch != second.episodes_per_epoch {
        return mismatch("episodes per epoch");
    }
    if first.perturbation_width != second.perturbation_width {
        return mismatch("perturbation width");
    }
    let a = run(first, users)?;
    let b = run(second, users)?;
    let window = CONVERGED_WINDOW.min(first.epochs);
    Ok(Comparison {
        first: first.agent_kind,
        second: second.agent_kind,
        epochs: a
            .metrics
            .iter()
            .zip(&b.metrics)
            .map(|(x, y)| (x.epoch_index, x.average_return, y.average_return))
            .collect(),
        window,
        first_mean: a.tail_mean_return(window),
        second_mean: b.tail_mean_return(window),
    })
}

/// What a sweep covers. `template` supplies the epoch, episode, agent and
/// perturbation settings for every cell.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub engagements: Vec<EngagementLevel>,
    pub agents: Vec<AgentKind>,
    pub seeds: Vec<u64>,
    pub template: RunConfig,
}

#[derive(Debug)]
pub struct SweepCell {
    pub user: String,
    pub engagement: EngagementLevel,
    pub agent: AgentKind,
    pub seed: u64,
    pub result: Result<RunResult>,
}

/// Runs every (user, engagement, agent, seed) combination. Results come back in
/// that nesting order regardless of how cells were scheduled; a failing cell
/// does not stop the others.
pub fn sweep(users: &[UserModel], plan: &SweepPlan) -> Result<Vec<SweepCell>> {
    if users.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one user".into()));
    }
    if plan.engagements.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one engagement level".into()));
    }
    if plan.agents.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one agent".into()));
    }
    if plan.seeds.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one seed".into()));
    }

    let mut keys = Vec::new();
    for user in users {
        for &engagement in &plan.engagements {
            for &agent in &plan.agents {
                for &seed in &plan.seeds {
                    keys.push((user, engagement, agent, seed));
                }
            }
        }
    }

    let run_cell = |&(user, engagement, agent, seed): &(&UserModel, EngagementLevel, AgentKind, u64)| {
        let config = RunConfig {
            user: user.name.clone(),
            engagement,
            agent_kind: agent,
            seed,
            ..plan.template.clone()
        };
        SweepCell {
            user: user.name.clone(),
            engagement,
            agent,
            seed,
            result: run_profile(&config, user.profile(engagement)),
        }
    };

    #[cfg(feature = "parallel")]
    let cells = {
        use rayon::prelude::*;
        keys.par_iter().map(run_cell).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cells = keys.iter().map(run_cell).collect();
    Ok(cells)
}

fn action_fields(action: Option<RobotAction>) -> (String, String) {
    action.map_or((String::new(), String::new()), |a| (a.rate.to_string(), a.difficulty.to_string()))
}

/// Writes metrics rows for `runs` in the given order, after the header.
pub fn write_metrics_csv<'a, W: Write>(
    runs: impl IntoIterator<Item = &'a RunResult>,
    out: W,
) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(METRICS_HEADER.split(','))?;
    for run in runs {
        let c = &run.config;
        for m in &run.metrics {
            let (rate, difficulty) = action_fields(m.greedy_action);
            writer.write_record([
                c.user.clone(),
                c.engagement.to_string(),
                c.agent_kind.to_string(),
                c.seed.to_string(),
                m.epoch_index.to_string(),
                m.average_return.to_string(),
                m.start_state_value.to_string(),
                m.q_update_sum.to_string(),
                rate,
                difficulty,
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// How a learned policy relates to the exact optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMatch {
    Exact,
    NearTie,
    Mismatch,
}

impl PolicyMatch {
    pub fn classify(learned: RobotAction, oracle: &ActionValueTable) -> Self {
        if learned == oracle.optimal {
            PolicyMatch::Exact
        } else if oracle.near_ties.iter().any(|&(a, _)| a == learned) {
            PolicyMatch::NearTie
        } else {
            PolicyMatch::Mismatch
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyMatch::Exact => "exact",
            PolicyMatch::NearTie => "near_tie",
            PolicyMatch::Mismatch => "mismatch",
        }
    }
}

/// Writes one policy-summary row per successful learning run. Random-agent
/// runs have no learned policy and are skipped.
pub fn write_policy_summary<'a, W: Write>(
    runs: impl IntoIterator<Item = &'a RunResult>,
    users: &[UserModel],
    out: W,
) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(POLICY_HEADER.split(','))?;
    for run in runs {
        let Some(learned) = run.final_greedy() else { continue };
        let c = &run.config;
        let oracle = ActionValueTable::from_profile(find_user(users, &c.user)?.profile(c.engagement));
        writer.write_record([
            c.user.clone(),
            c.engagement.to_string(),
            c.agent_kind.to_string(),
            c.seed.to_string(),
            learned.rate.to_string(),
            learned.difficulty.to_string(),
            oracle.optimal.rate.to_string(),
            oracle.optimal.difficulty.to_string(),
            PolicyMatch::classify(learned, &oracle).as_str().to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Difficulty, FollowUpRate};
    use crate::user_sim::builtin_catalog;

    fn metrics_with_values(values: &[f64]) -> Vec<EpochMetrics> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| EpochMetrics {
                epoch_index: i + 1,
                average_return: v,
                start_state_value: v,
                q_update_sum: 0.0,
                greedy_action: None,
            })
            .collect()
    }

    #[test]
    fn convergence_on_constant_metrics() {
        assert_eq!(detect_convergence(&metrics_with_values(&[2.0; 10]), 2.0), Some(1));
        assert_eq!(detect_convergence(&[], 2.0), None);
    }

    #[test]
    fn convergence_enters_band_late() {
        let mut values = vec![0.0; 24];
        values.extend([2.0; 20]);
        assert_eq!(detect_convergence(&metrics_with_values(&values), 2.0), Some(25));
        // a late spike resets the detection
        values[40] = 0.0;
        assert_eq!(detect_convergence(&metrics_with_values(&values), 2.0), Some(42));
        values[43] = 0.0;
        assert_eq!(detect_convergence(&metrics_with_values(&values), 2.0), None);
    }

    #[test]
    fn band_is_absolute_below_one() {
        let m = metrics_with_values(&[0.14, -0.15]);
        assert_eq!(detect_convergence(&m, 0.0), Some(1));
        let m = metrics_with_values(&[0.16]);
        assert_eq!(detect_convergence(&m, 0.0), None);
        // relative above one: band 0.45 around 3.0
        assert_eq!(detect_convergence(&metrics_with_values(&[2.56]), 3.0), Some(1));
    }

    #[test]
    fn single_update_run() {
        let users = builtin_catalog();
        let mut config = RunConfig::new("user1", EngagementLevel::High, AgentKind::QLearning, 0);
        config.epochs = 1;
        config.episodes_per_epoch = 1;
        config.agent.epsilon = 0.0;
        let result = run(&config, &users).unwrap();
        let m = &result.metrics[0];
        // one update from a zero table: |ΔQ| = α·|r|
        assert!((m.q_update_sum - 0.03 * m.average_return.abs()).abs() < 1e-15);
        assert_eq!(m.start_state_value, 0.0);
    }

    #[test]
    fn random_agent_records_no_values() {
        let users = builtin_catalog();
        let mut config = RunConfig::new("user2", EngagementLevel::Low, AgentKind::Random, 3);
        config.epochs = 5;
        let result = run(&config, &users).unwrap();
        assert!(result.final_q.is_none());
        assert!(result.converged_epoch.is_none());
        for m in &result.metrics {
            assert_eq!(m.start_state_value, 0.0);
            assert_eq!(m.q_update_sum, 0.0);
            assert!(m.greedy_action.is_none());
        }
    }

    #[test]
    fn run_rejects_bad_config() {
        let users = builtin_catalog();
        let mut config = RunConfig::new("user1", EngagementLevel::High, AgentKind::QLearning, 0);
        config.epochs = 0;
        assert!(matches!(run(&config, &users), Err(Error::InvalidConfig(_))));
        config.epochs = 1;
        config.perturbation_width = -0.1;
        assert!(run(&config, &users).is_err());
        let config = RunConfig::new("nobody", EngagementLevel::High, AgentKind::QLearning, 0);
        assert!(matches!(run(&config, &users), Err(Error::UnknownUser(_))));
    }

    #[test]
    fn perfect_user_learns_difficult_questions() {
        let users = builtin_catalog();
        let config = RunConfig::new("user1", EngagementLevel::High, AgentKind::QLearning, 7);
        let result = run(&config, &users).unwrap();
        assert_eq!(result.metrics.len(), 100);
        assert_eq!(
            result.final_greedy(),
            Some(RobotAction::new(FollowUpRate::Always, Difficulty::Difficult))
        );
        assert!(result.converged_epoch.is_some());
    }

    #[test]
    fn identical_seeds_give_identical_runs() {
        let users = builtin_catalog();
        let mut config = RunConfig::new("user3", EngagementLevel::Medium, AgentKind::QLearning, 11);
        config.epochs = 10;
        config.perturbation_width = 0.05;
        assert_eq!(run(&config, &users).unwrap(), run(&config, &users).unwrap());
    }

    #[test]
    fn compare_same_config_has_zero_difference() {
        let users = builtin_catalog();
        let mut config = RunConfig::new("user2", EngagementLevel::High, AgentKind::Random, 4);
        config.epochs = 20;
        let report = compare(&config, &config, &users).unwrap();
        assert_eq!(report.difference(), 0.0);
        assert_eq!(report.window, 20);
    }

    #[test]
    fn compare_rejects_mismatched_experiments() {
        let users = builtin_catalog();
        let a = RunConfig::new("user2", EngagementLevel::High, AgentKind::QLearning, 4);
        let mut b = RunConfig::new("user2", EngagementLevel::Low, AgentKind::Random, 4);
        assert!(compare(&a, &b, &users).is_err());
        b.engagement = EngagementLevel::High;
        b.epochs = 10;
        assert!(compare(&a, &b, &users).is_err());
    }

    #[test]
    fn sweep_requires_seeds() {
        let users = builtin_catalog();
        let plan = SweepPlan {
            engagements: EngagementLevel::ALL.to_vec(),
            agents: AgentKind::ALL.to_vec(),
            seeds: vec![],
            template: RunConfig::new("", EngagementLevel::High, AgentKind::QLearning, 0),
        };
        assert!(sweep(&users, &plan).is_err());
    }

    #[test]
    fn sweep_marks_failed_cells_and_keeps_order() {
        let users = builtin_catalog();
        let mut template = RunConfig::new("", EngagementLevel::High, AgentKind::QLearning, 0);
        template.epochs = 2;
        template.agent.alpha = 0.0;
        let plan = SweepPlan {
            engagements: vec![EngagementLevel::Low, EngagementLevel::High],
            agents: AgentKind::ALL.to_vec(),
            seeds: vec![5, 1],
            template,
        };
        let cells = sweep(&users[..2], &plan).unwrap();
        assert_eq!(cells.len(), 2 * 2 * 2 * 2);
        assert!(cells.iter().all(|c| c.result.is_err()));
        let keys: Vec<_> = cells.iter().take(4).map(|c| (c.engagement, c.agent, c.seed)).collect();
        assert_eq!(
            keys,
            [
                (EngagementLevel::Low, AgentKind::QLearning, 5),
                (EngagementLevel::Low, AgentKind::QLearning, 1),
                (EngagementLevel::Low, AgentKind::Random, 5),
                (EngagementLevel::Low, AgentKind::Random, 1),
            ]
        );
    }

    #[test]
    fn stream_seeds_differ_per_cell() {
        let a = cell_stream_seed(1, "user1", EngagementLevel::High);
        assert_ne!(a, cell_stream_seed(1, "user1", EngagementLevel::Low));
        assert_ne!(a, cell_stream_seed(1, "user2", EngagementLevel::High));
        assert_ne!(a, cell_stream_seed(2, "user1", EngagementLevel::High));
        assert_eq!(a, cell_stream_seed(1, "user1", EngagementLevel::High));
    }

    #[test]
    fn metrics_csv_shape() {
        let users = builtin_catalog();
        let mut config = RunConfig::new("user1", EngagementLevel::High, AgentKind::Random, 1);
        config.epochs = 3;
        let result = run(&config, &users).unwrap();
        let mut buf = Vec::new();
        write_metrics_csv([&result], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("user1,high,random,1,1,"));
        assert!(lines[1].ends_with(",0,0,,"));
    }
}
