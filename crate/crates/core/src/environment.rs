//! One-step episodes: the user asks, the robot answers and maybe follows up,
//! the episode ends in one of the four terminal states.

use rand::Rng;

use crate::domain::{terminal_reward, DialogueState, RobotAction};
use crate::user_sim::ResponseProfile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Episode {
    pub action: RobotAction,
    pub outcome: DialogueState,
    pub reward: f64,
}

/// Plays one episode against `profile`.
///
/// The first uniform draw decides whether the robot follows up; a second
/// draw, taken only when it does, picks the user's answer.
pub fn step<R: Rng + ?Sized>(profile: &ResponseProfile, action: RobotAction, rng: &mut R) -> Episode {
    step_with_rate(profile, action, action.rate.value(), rng)
}

/// [`step`] with an explicit follow-up probability in place of the action's rate.
pub(crate) fn step_with_rate<R: Rng + ?Sized>(
    profile: &ResponseProfile,
    action: RobotAction,
    follow_up_probability: f64,
    rng: &mut R,
) -> Episode {
    let follows_up = rng.gen::<f64>() < follow_up_probability;
    let outcome = if follows_up {
        profile.get(action.difficulty).outcome_for(rng.gen::<f64>())
    } else {
        DialogueState::NoFollowUp
    };
    Episode { action, outcome, reward: terminal_reward(outcome, action.difficulty) }
}
