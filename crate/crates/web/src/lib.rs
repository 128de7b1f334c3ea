//! WebAssembly bindings behind `www/index.html`.
//!
//! Every exported function takes plain strings and numbers and returns a JSON
//! document. The `*_json` functions hold the logic and are callable from
//! native code as well.

use dialogue_policy::{
    builtin_catalog, compare, optimal_policy, step, AgentKind, DialogueState, Difficulty, EngagementLevel,
    FollowUpRate, RobotAction, RunConfig, UserModel,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest number of episodes accepted by the browser operations.
pub const MAX_EPISODES: usize = 2_000_000;

fn user(name: &str) -> Result<UserModel, String> {
    builtin_catalog()
        .into_iter()
        .find(|u| u.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| format!("unknown user {name:?}"))
}

fn engagement(name: &str) -> Result<EngagementLevel, String> {
    name.parse().map_err(|e: dialogue_policy::Error| e.to_string())
}

fn action_json(action: RobotAction) -> Value {
    json!({ "rate": action.rate.value(), "difficulty": action.difficulty.to_string(), "label": action.label() })
}

/// The built-in users with their descriptions.
pub fn users_json() -> Value {
    builtin_catalog()
        .iter()
        .map(|u| json!({ "name": u.name, "description": u.description }))
        .collect()
}

/// Closed-form expected return of all 12 actions for one cell.
pub fn oracle_json(user_name: &str, engagement_name: &str) -> Result<Value, String> {
    let user = user(user_name)?;
    let engagement = engagement(engagement_name)?;
    let table = optimal_policy(&user, engagement);
    let actions: Vec<Value> = dialogue_policy::action_space()
        .into_iter()
        .map(|a| {
            let mut entry = action_json(a);
            entry["value"] = json!(table.value(a));
            entry
        })
        .collect();
    Ok(json!({
        "user": user.name,
        "description": user.description,
        "engagement": engagement.as_str(),
        "actions": actions,
        "optimal": action_json(table.optimal),
        "optimal_value": table.optimal_value(),
        "near_ties": table.near_ties.iter().map(|&(a, gap)| json!({ "action": action_json(a), "gap": gap })).collect::<Vec<_>>(),
        "random_mean": table.random_policy_mean(),
    }))
}

/// Trains Q-learning and the random baseline on one cell and returns both
/// learning curves.
pub fn train_json(
    user_name: &str,
    engagement_name: &str,
    seed: u64,
    epochs: usize,
    episodes_per_epoch: usize,
    epsilon: f64,
    alpha: f64,
) -> Result<Value, String> {
    let users = builtin_catalog();
    let user = user(user_name)?;
    let engagement = engagement(engagement_name)?;
    if epochs.saturating_mul(episodes_per_epoch) > MAX_EPISODES {
        return Err(format!("at most {MAX_EPISODES} episodes per run"));
    }
    let config = |kind| {
        let mut c = RunConfig::new(user.name.clone(), engagement, kind, seed);
        c.epochs = epochs;
        c.episodes_per_epoch = episodes_per_epoch;
        c.agent.epsilon = epsilon;
        c.agent.alpha = alpha;
        c
    };
    let learned = dialogue_policy::run(&config(AgentKind::QLearning), &users).map_err(|e| e.to_string())?;
    let comparison =
        compare(&config(AgentKind::QLearning), &config(AgentKind::Random), &users).map_err(|e| e.to_string())?;
    let q = learned.final_q.as_ref().expect("q-learning keeps its table");
    let oracle = optimal_policy(&user, engagement);
    Ok(json!({
        "epochs": learned.metrics.iter().map(|m| m.epoch_index).collect::<Vec<_>>(),
        "qlearning_return": comparison.epochs.iter().map(|e| e.1).collect::<Vec<_>>(),
        "random_return": comparison.epochs.iter().map(|e| e.2).collect::<Vec<_>>(),
        "start_state_value": learned.metrics.iter().map(|m| m.start_state_value).collect::<Vec<_>>(),
        "oracle_value": oracle.optimal_value(),
        "random_mean": oracle.random_policy_mean(),
        "window": comparison.window,
        "qlearning_mean": comparison.first_mean,
        "random_window_mean": comparison.second_mean,
        "converged_epoch": learned.converged_epoch,
        "greedy": learned.final_greedy().map(action_json),
        "q_values": dialogue_policy::action_space().into_iter().map(|a| json!({ "action": action_json(a), "q": q.get(a), "expected": oracle.value(a) })).collect::<Vec<_>>(),
    }))
}

/// Samples `episodes` outcomes of one action and reports empirical against
/// analytic frequencies.
pub fn sample_json(
    user_name: &str,
    engagement_name: &str,
    rate: &str,
    difficulty: &str,
    episodes: usize,
    seed: u64,
) -> Result<Value, String> {
    let user = user(user_name)?;
    let engagement = engagement(engagement_name)?;
    let rate: FollowUpRate = rate.parse().map_err(|e: dialogue_policy::Error| e.to_string())?;
    let difficulty: Difficulty = difficulty.parse().map_err(|e: dialogue_policy::Error| e.to_string())?;
    if episodes == 0 || episodes > MAX_EPISODES {
        return Err(format!("episodes must be between 1 and {MAX_EPISODES}"));
    }
    let action = RobotAction::new(rate, difficulty);
    let profile = user.profile(engagement);
    let p = profile.get(difficulty);
    let outcomes = [
        (DialogueState::NoFollowUp, 1.0 - rate.value()),
        (DialogueState::RelevantResponse, rate.value() * p.relevant()),
        (DialogueState::IrrelevantResponse, rate.value() * p.irrelevant()),
        (DialogueState::NoResponse, rate.value() * p.none()),
    ];
    let mut counts = [0usize; 4];
    let mut total = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..episodes {
        let episode = step(profile, action, &mut rng);
        let slot = outcomes.iter().position(|(s, _)| *s == episode.outcome).expect("terminal outcome");
        counts[slot] += 1;
        total += episode.reward;
    }
    Ok(json!({
        "action": action_json(action),
        "episodes": episodes,
        "outcomes": outcomes.iter().zip(counts).map(|(&(state, prob), count)| json!({
            "state": state.to_string(),
            "expected": prob,
            "count": count,
            "frequency": count as f64 / episodes as f64,
        })).collect::<Vec<_>>(),
        "mean_reward": total / episodes as f64,
        "expected_reward": dialogue_policy::expected_return(profile, action),
    }))
}

fn to_js(result: Result<Value, String>) -> Result<String, JsError> {
    result.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn users() -> String {
    users_json().to_string()
}

#[wasm_bindgen]
pub fn oracle(user: &str, engagement: &str) -> Result<String, JsError> {
    to_js(oracle_json(user, engagement))
}

#[wasm_bindgen]
pub fn train(
    user: &str,
    engagement: &str,
    seed: u32,
    epochs: u32,
    episodes_per_epoch: u32,
    epsilon: f64,
    alpha: f64,
) -> Result<String, JsError> {
    to_js(train_json(
        user,
        engagement,
        u64::from(seed),
        epochs as usize,
        episodes_per_epoch as usize,
        epsilon,
        alpha,
    ))
}

#[wasm_bindgen]
pub fn sample(
    user: &str,
    engagement: &str,
    rate: &str,
    difficulty: &str,
    episodes: u32,
    seed: u32,
) -> Result<String, JsError> {
    to_js(sample_json(user, engagement, rate, difficulty, episodes as usize, u64::from(seed)))
}
