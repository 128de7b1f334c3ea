//! Learning follow-up question strategies for a conversational robot that
//! answers repetitive questions from people living with dementia.
//!
//! Each episode starts with the user asking a question. The robot answers and,
//! with some probability, asks a follow-up question of a chosen difficulty; the
//! simulated user then answers relevantly, irrelevantly or not at all. A tabular
//! Q-learner picks the follow-up rate and difficulty, and a closed-form oracle
//! gives the exact expected return of every action for comparison.

pub mod agents;
#[cfg(feature = "cli")]
pub mod cli;
pub mod domain;
pub mod environment;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod user_sim;

pub use agents::{greedy_policy, q_update, random_agent_select, select_action, AgentConfig, GreedyPolicy, QTable};
pub use domain::{action_space, compute_reward, DialogueState, Difficulty, FollowUpRate, RobotAction, Transition};
pub use environment::{step, Episode};
pub use error::{Error, Result};
pub use harness::{
    compare, detect_convergence, run, run_profile, sweep, AgentKind, Comparison, EpochMetrics, RunConfig,
    RunResult, SweepCell, SweepPlan,
};
pub use oracle::{expected_return, optimal_policy, value_ordering_report, ActionValueTable};
pub use user_sim::{
    builtin_catalog, load_users, sample_response, write_users, EngagementLevel, ResponseProbabilities,
    ResponseProfile, UserModel,
};
