//! Dialogue states, robot actions and the immediate reward.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Conversation state. `Question` is the only start state, the rest are terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DialogueState {
    Question,
    NoFollowUp,
    RelevantResponse,
    IrrelevantResponse,
    NoResponse,
}

impl DialogueState {
    pub const ALL: [DialogueState; 5] = [
        DialogueState::Question,
        DialogueState::NoFollowUp,
        DialogueState::RelevantResponse,
        DialogueState::IrrelevantResponse,
        DialogueState::NoResponse,
    ];

    pub const TERMINAL: [DialogueState; 4] = [
        DialogueState::NoFollowUp,
        DialogueState::RelevantResponse,
        DialogueState::IrrelevantResponse,
        DialogueState::NoResponse,
    ];

    pub fn is_terminal(self) -> bool {
        self != DialogueState::Question
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DialogueState::Question => "Q",
            DialogueState::NoFollowUp => "NF",
            DialogueState::RelevantResponse => "RR",
            DialogueState::IrrelevantResponse => "IR",
            DialogueState::NoResponse => "NR",
        }
    }
}

impl fmt::Display for DialogueState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DialogueState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DialogueState::ALL
            .into_iter()
            .find(|state| state.as_str() == s)
            .ok_or_else(|| Error::UnknownName { kind: "state", name: s.to_string() })
    }
}

/// Follow-up question difficulty with its integer reward weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Difficulty {
    Easy,
    Moderate,
    Difficult,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Difficult];

    pub fn weight(self) -> u8 {
        match self {
            Difficulty::Easy => 1,
            Difficulty::Moderate => 2,
            Difficulty::Difficult => 3,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Moderate => "moderate",
            Difficulty::Difficult => "difficult",
        }
    }

    /// Single-letter label: E, M or D.
    pub fn short(self) -> char {
        match self {
            Difficulty::Easy => 'E',
            Difficulty::Moderate => 'M',
            Difficulty::Difficult => 'D',
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Difficulty::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownName { kind: "difficulty", name: s.to_string() })
    }
}

/// Probability of asking a follow-up question after answering.
///
/// Only the four levels 0.1, 0.4, 0.7 and 1.0 exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FollowUpRate {
    Rare,
    Occasional,
    Frequent,
    Always,
}

impl FollowUpRate {
    pub const ALL: [FollowUpRate; 4] = [
        FollowUpRate::Rare,
        FollowUpRate::Occasional,
        FollowUpRate::Frequent,
        FollowUpRate::Always,
    ];

    pub fn value(self) -> f64 {
        match self {
            FollowUpRate::Rare => 0.1,
            FollowUpRate::Occasional => 0.4,
            FollowUpRate::Frequent => 0.7,
            FollowUpRate::Always => 1.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FollowUpRate::Rare => "0.1",
            FollowUpRate::Occasional => "0.4",
            FollowUpRate::Frequent => "0.7",
            FollowUpRate::Always => "1.0",
        }
    }
}

impl fmt::Display for FollowUpRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FollowUpRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let by_name = FollowUpRate::ALL.into_iter().find(|r| r.as_str() == s);
        if let Some(rate) = by_name {
            return Ok(rate);
        }
        // accept "1", "0.10" and similar spellings of the same value
        s.parse::<f64>()
            .ok()
            .and_then(|v| FollowUpRate::ALL.into_iter().find(|r| r.value() == v))
            .ok_or_else(|| Error::UnknownName { kind: "follow-up rate", name: s.to_string() })
    }
}

/// A robot action: how often to follow up and how hard the follow-up question is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RobotAction {
    pub rate: FollowUpRate,
    pub difficulty: Difficulty,
}

/// Number of actions in the action space.
pub const ACTION_COUNT: usize = 12;

impl RobotAction {
    pub const fn new(rate: FollowUpRate, difficulty: Difficulty) -> Self {
        RobotAction { rate, difficulty }
    }

    /// Position in [`action_space`]: rate-major, difficulty-minor.
    pub fn index(self) -> usize {
        self.rate.index() * Difficulty::ALL.len() + self.difficulty.index()
    }

    pub fn from_index(index: usize) -> Option<Self> {
        if index >= ACTION_COUNT {
            return None;
        }
        Some(RobotAction {
            rate: FollowUpRate::ALL[index / 3],
            difficulty: Difficulty::ALL[index % 3],
        })
    }

    /// Compact label such as `[1.0,D]`.
    pub fn label(self) -> String {
        format!("[{},{}]", self.rate, self.difficulty.short())
    }
}

impl fmt::Display for RobotAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.rate, self.difficulty)
    }
}

/// All 12 actions, rates ascending then difficulty ascending.
pub fn action_space() -> [RobotAction; ACTION_COUNT] {
    let mut actions = [RobotAction::new(FollowUpRate::Rare, Difficulty::Easy); ACTION_COUNT];
    for (i, slot) in actions.iter_mut().enumerate() {
        *slot = RobotAction {
            rate: FollowUpRate::ALL[i / 3],
            difficulty: Difficulty::ALL[i % 3],
        };
    }
    actions
}

/// Immediate reward for ending an episode in `end` after a follow-up of `difficulty`.
///
/// NF pays 0, RR pays the difficulty weight, IR pays a flat 0.5 and NR costs
/// 0.2 per unit of weight.
pub fn compute_reward(end: DialogueState, difficulty: Difficulty) -> Result<f64, Error> {
    let weight = f64::from(difficulty.weight());
    match end {
        DialogueState::Question => Err(Error::NonTerminalState(end)),
        DialogueState::NoFollowUp => Ok(0.0),
        DialogueState::RelevantResponse => Ok(weight),
        DialogueState::IrrelevantResponse => Ok(0.5),
        // exact decimal constants: -0.2 * 3.0 would round to -0.6000000000000001
        DialogueState::NoResponse => Ok([-0.2, -0.4, -0.6][difficulty.index()]),
    }
}

/// Reward for a terminal outcome; infallible counterpart of [`compute_reward`].
pub(crate) fn terminal_reward(end: DialogueState, difficulty: Difficulty) -> f64 {
    debug_assert!(end.is_terminal());
    compute_reward(end, difficulty).unwrap_or(0.0)
}

/// One Question → terminal transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    end: DialogueState,
    action: RobotAction,
    reward: f64,
}

impl Transition {
    pub fn new(end: DialogueState, action: RobotAction) -> Result<Self, Error> {
        let reward = compute_reward(end, action.difficulty)?;
        Ok(Transition { end, action, reward })
    }

    pub fn start(&self) -> DialogueState {
        DialogueState::Question
    }

    pub fn end(&self) -> DialogueState {
        self.end
    }

    pub fn action(&self) -> RobotAction {
        self.action
    }

    pub fn reward(&self) -> f64 {
        self.reward
    }
}
