//! Simulated conversation partners.
//!
//! A user is described by the probability of a relevant, irrelevant or
//! missing answer to a follow-up question, for every combination of
//! engagement level and question difficulty. Four users ship built in,
//! ranging from no cognitive impairment (`user1`) to severe dementia
//! (`user4`); custom users are read from a comma-separated profile file.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Deserialize;

use crate::domain::{DialogueState, Difficulty};
use crate::error::{Error, Result};

/// Absolute tolerance on the sum of a probability triple.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Column header of the user-profile file format.
pub const PROFILE_HEADER: [&str; 6] =
    ["user", "engagement", "difficulty", "p_relevant", "p_irrelevant", "p_none"];

const DESCRIPTION_DIRECTIVE: &str = "# @description ";

/// Probabilities of a relevant, irrelevant or absent answer. Always on the unit simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseProbabilities {
    relevant: f64,
    irrelevant: f64,
    none: f64,
}

impl ResponseProbabilities {
    pub fn new(relevant: f64, irrelevant: f64, none: f64) -> Result<Self> {
        Self::validated(relevant, irrelevant, none, "response probabilities")
    }

    fn validated(relevant: f64, irrelevant: f64, none: f64, context: &str) -> Result<Self> {
        for (label, p) in [("p_relevant", relevant), ("p_irrelevant", irrelevant), ("p_none", none)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation {
                    context: context.to_string(),
                    message: format!("{label} = {p} is outside [0, 1]"),
                });
            }
        }
        let sum = relevant + irrelevant + none;
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::Validation {
                context: context.to_string(),
                message: format!("probabilities sum to {sum}, expected 1"),
            });
        }
        Ok(ResponseProbabilities { relevant, irrelevant, none })
    }

    pub fn relevant(&self) -> f64 {
        self.relevant
    }

    pub fn irrelevant(&self) -> f64 {
        self.irrelevant
    }

    pub fn none(&self) -> f64 {
        self.none
    }

    /// Relevant plus irrelevant.
    pub fn response_rate(&self) -> f64 {
        self.relevant + self.irrelevant
    }

    /// Shifts the relevant and irrelevant rates by independent uniform noise in
    /// `[-width, width]`, clamps to `[0, 1]` and renormalizes.
    ///
    /// Consumes two uniform draws when `width > 0` and none otherwise.
    pub fn perturbed<R: Rng + ?Sized>(&self, width: f64, rng: &mut R) -> ResponseProbabilities {
        if width <= 0.0 {
            return *self;
        }
        let shift = |p: f64, u: f64| (p + (2.0 * u - 1.0) * width).clamp(0.0, 1.0);
        let relevant = shift(self.relevant, rng.gen::<f64>());
        let irrelevant = shift(self.irrelevant, rng.gen::<f64>());
        let total = relevant + irrelevant + self.none;
        if total <= 0.0 {
            return *self;
        }
        ResponseProbabilities {
            relevant: relevant / total,
            irrelevant: irrelevant / total,
            none: self.none / total,
        }
    }

    /// Maps one uniform draw `u ∈ [0, 1)` onto an answer by inverse CDF in
    /// the order relevant, irrelevant, none.
    pub fn outcome_for(&self, u: f64) -> DialogueState {
        if u < self.relevant {
            DialogueState::RelevantResponse
        } else if u < self.relevant + self.irrelevant {
            DialogueState::IrrelevantResponse
        } else {
            DialogueState::NoResponse
        }
    }
}

/// Response probabilities for each of the three difficulties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseProfile {
    by_difficulty: [ResponseProbabilities; 3],
}

impl ResponseProfile {
    /// Probabilities for easy, moderate and difficult questions, in that order.
    pub fn new(by_difficulty: [ResponseProbabilities; 3]) -> Self {
        ResponseProfile { by_difficulty }
    }

    pub fn get(&self, difficulty: Difficulty) -> &ResponseProbabilities {
        &self.by_difficulty[difficulty.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Difficulty, &ResponseProbabilities)> {
        Difficulty::ALL.into_iter().zip(self.by_difficulty.iter())
    }

    /// Returns a copy with `probs` in place of the `difficulty` entry.
    pub fn with(&self, difficulty: Difficulty, probs: ResponseProbabilities) -> ResponseProfile {
        let mut by_difficulty = self.by_difficulty;
        by_difficulty[difficulty.index()] = probs;
        ResponseProfile { by_difficulty }
    }

    /// Harder questions should not raise the relevant rate nor lower the
    /// no-response rate. Returns a description of each violation.
    pub fn difficulty_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for pair in Difficulty::ALL.windows(2) {
            let (easier, harder) = (self.get(pair[0]), self.get(pair[1]));
            if harder.relevant > easier.relevant {
                out.push(format!(
                    "p_relevant rises from {} ({}) to {} ({})",
                    pair[0], easier.relevant, pair[1], harder.relevant
                ));
            }
            if harder.none < easier.none {
                out.push(format!(
                    "p_none falls from {} ({}) to {} ({})",
                    pair[0], easier.none, pair[1], harder.none
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EngagementLevel {
    High,
    Medium,
    Low,
}

impl EngagementLevel {
    pub const ALL: [EngagementLevel; 3] =
        [EngagementLevel::High, EngagementLevel::Medium, EngagementLevel::Low];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EngagementLevel::High => "high",
            EngagementLevel::Medium => "medium",
            EngagementLevel::Low => "low",
        }
    }
}

impl fmt::Display for EngagementLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EngagementLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EngagementLevel::ALL
            .into_iter()
            .find(|e| e.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownName { kind: "engagement level", name: s.to_string() })
    }
}

/// A named simulated user with one profile per engagement level.
#[derive(Debug, Clone, PartialEq)]
pub struct UserModel {
    pub name: String,
    pub description: String,
    profiles: [ResponseProfile; 3],
}

impl UserModel {
    /// Profiles for high, medium and low engagement, in that order.
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        profiles: [ResponseProfile; 3],
    ) -> Self {
        UserModel { name: name.into(), description: description.into(), profiles }
    }

    pub fn profile(&self, engagement: EngagementLevel) -> &ResponseProfile {
        &self.profiles[engagement.index()]
    }

    pub fn profiles(&self) -> impl Iterator<Item = (EngagementLevel, &ResponseProfile)> {
        EngagementLevel::ALL.into_iter().zip(self.profiles.iter())
    }

    /// Soft checks on this user alone: difficulty monotonicity within every
    /// engagement level, and a response rate that does not grow as engagement
    /// drops.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (engagement, profile) in self.profiles() {
            for message in profile.difficulty_violations() {
                out.push(Diagnostic {
                    rule: Rule::HarderQuestionsFewerAnswers,
                    subject: format!("{} {}", self.name, engagement),
                    message,
                });
            }
        }
        for pair in EngagementLevel::ALL.windows(2) {
            for d in Difficulty::ALL {
                let upper = self.profile(pair[0]).get(d).response_rate();
                let lower = self.profile(pair[1]).get(d).response_rate();
                if lower > upper + SIMPLEX_TOLERANCE {
                    out.push(Diagnostic {
                        rule: Rule::LowerEngagementFewerAnswers,
                        subject: format!("{} {}", self.name, d),
                        message: format!(
                            "response rate rises from {upper} ({}) to {lower} ({})",
                            pair[0], pair[1]
                        ),
                    });
                }
            }
        }
        out
    }
}

/// Which modelling rule a diagnostic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// Lower cognitive capability, lower relevant rate (across users).
    LowerCapabilityFewerRelevant,
    /// Lower engagement, lower total response rate.
    LowerEngagementFewerAnswers,
    /// Harder question, lower relevant rate and higher no-response rate.
    HarderQuestionsFewerAnswers,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::LowerCapabilityFewerRelevant => "capability",
            Rule::LowerEngagementFewerAnswers => "engagement",
            Rule::HarderQuestionsFewerAnswers => "difficulty",
        })
    }
}

/// A non-fatal modelling-rule violation.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub rule: Rule,
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "warning [{}] {}: {}", self.rule, self.subject, self.message)
    }
}

/// Cross-user check for a catalog ordered from most to least capable: at equal
/// engagement and difficulty the relevant rate must not increase down the list.
///
/// Irrelevant rates are not compared; the most impaired users answer almost
/// nothing at all, so that ordering is legitimately non-monotone.
pub fn capability_diagnostics(users: &[UserModel]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for pair in users.windows(2) {
        for engagement in EngagementLevel::ALL {
            for d in Difficulty::ALL {
                let upper = pair[0].profile(engagement).get(d).relevant();
                let lower = pair[1].profile(engagement).get(d).relevant();
                if lower > upper {
                    out.push(Diagnostic {
                        rule: Rule::LowerCapabilityFewerRelevant,
                        subject: format!("{engagement} {d}"),
                        message: format!(
                            "p_relevant rises from {upper} ({}) to {lower} ({})",
                            pair[0].name, pair[1].name
                        ),
                    });
                }
            }
        }
    }
    out
}

/// Draws the user's answer to a follow-up question of `difficulty`.
///
/// Consumes exactly one uniform draw.
pub fn sample_response<R: Rng + ?Sized>(
    profile: &ResponseProfile,
    difficulty: Difficulty,
    rng: &mut R,
) -> DialogueState {
    profile.get(difficulty).outcome_for(rng.gen::<f64>())
}

fn probs(relevant: f64, irrelevant: f64, none: f64) -> ResponseProbabilities {
    ResponseProbabilities::new(relevant, irrelevant, none)
        .expect("built-in probabilities lie on the simplex")
}

fn profile(rows: [(f64, f64, f64); 3]) -> ResponseProfile {
    ResponseProfile::new(rows.map(|(r, i, n)| probs(r, i, n)))
}

/// The four built-in users, from no cognitive impairment to severe dementia.
pub fn builtin_catalog() -> Vec<UserModel> {
    vec![
        UserModel::new(
            "user1",
            "older adult without cognitive impairment",
            [
                profile([(1.0, 0.0, 0.0), (1.0, 0.0, 0.0), (1.0, 0.0, 0.0)]),
                profile([(0.95, 0.0, 0.05), (0.92, 0.0, 0.08), (0.90, 0.0, 0.10)]),
                profile([(0.90, 0.0, 0.10), (0.88, 0.0, 0.12), (0.85, 0.0, 0.15)]),
            ],
        ),
        UserModel::new(
            "user2",
            "older adult with mild cognitive impairment",
            [
                profile([(0.9, 0.1, 0.0), (0.86, 0.14, 0.0), (0.82, 0.18, 0.0)]),
                profile([(0.83, 0.11, 0.06), (0.75, 0.15, 0.10), (0.68, 0.20, 0.12)]),
                profile([(0.75, 0.14, 0.11), (0.65, 0.16, 0.19), (0.50, 0.18, 0.32)]),
            ],
        ),
        UserModel::new(
            "user3",
            "person with moderate dementia",
            [
                profile([(0.70, 0.20, 0.10), (0.63, 0.22, 0.15), (0.50, 0.23, 0.27)]),
                profile([(0.60, 0.21, 0.19), (0.50, 0.25, 0.25), (0.30, 0.20, 0.50)]),
                profile([(0.35, 0.15, 0.50), (0.20, 0.13, 0.67), (0.08, 0.10, 0.82)]),
            ],
        ),
        UserModel::new(
            "user4",
            "person with severe dementia",
            [
                profile([(0.04, 0.08, 0.88), (0.02, 0.08, 0.90), (0.01, 0.04, 0.95)]),
                profile([(0.02, 0.05, 0.93), (0.01, 0.04, 0.95), (0.005, 0.02, 0.975)]),
                profile([(0.01, 0.04, 0.95), (0.0, 0.02, 0.98), (0.0, 0.01, 0.99)]),
            ],
        ),
    ]
}

/// Looks a user up by name, ignoring ASCII case.
pub fn find_user<'a>(users: &'a [UserModel], name: &str) -> Result<&'a UserModel> {
    users
        .iter()
        .find(|u| u.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownUser(name.to_string()))
}

/// Users read from a profile document, plus any soft-rule warnings.
#[derive(Debug, Clone)]
pub struct LoadedUsers {
    pub users: Vec<UserModel>,
    pub warnings: Vec<Diagnostic>,
}

#[derive(Debug, Deserialize)]
struct ProfileRow {
    user: String,
    engagement: String,
    difficulty: String,
    p_relevant: f64,
    p_irrelevant: f64,
    p_none: f64,
}

type PartialUser = [[Option<ResponseProbabilities>; 3]; 3];

/// Parses and validates a user-profile document.
///
/// Simplex violations and missing or duplicate rows are errors; modelling-rule
/// violations are collected as warnings. Users keep their order of first
/// appearance.
pub fn load_users(source: &str) -> Result<LoadedUsers> {
    let mut descriptions = BTreeMap::new();
    for line in source.lines() {
        if let Some(rest) = line.strip_prefix(DESCRIPTION_DIRECTIVE) {
            if let Some((name, text)) = rest.split_once(':') {
                descriptions.insert(name.trim().to_string(), text.trim().to_string());
            }
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source.as_bytes());

    let header = reader.headers().map_err(parse_error)?.clone();
    if header.iter().ne(PROFILE_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: header.position().map_or(1, |p| p.line()),
            message: format!("expected header `{}`", PROFILE_HEADER.join(",")),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, PartialUser> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(parse_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let row: ProfileRow = record.deserialize(Some(&header)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let at_line = |e: Error| match e {
            Error::UnknownName { kind, name } => Error::Parse {
                line,
                message: format!("unknown {kind} `{name}`"),
            },
            other => other,
        };
        let engagement: EngagementLevel = row.engagement.parse().map_err(at_line)?;
        let difficulty: Difficulty = row.difficulty.parse().map_err(at_line)?;
        let context = format!("{} {} {} (line {line})", row.user, engagement, difficulty);
        let probs =
            ResponseProbabilities::validated(row.p_relevant, row.p_irrelevant, row.p_none, &context)?;

        if !rows.contains_key(&row.user) {
            order.push(row.user.clone());
        }
        let slot = &mut rows.entry(row.user.clone()).or_default()[engagement.index()]
            [difficulty.index()];
        if slot.is_some() {
            return Err(Error::DuplicateRow {
                user: row.user,
                engagement: engagement.to_string(),
                difficulty: difficulty.to_string(),
                line,
            });
        }
        *slot = Some(probs);
    }

    let mut users = Vec::with_capacity(order.len());
    for name in order {
        let partial = &rows[&name];
        let mut profiles = Vec::with_capacity(3);
        for engagement in EngagementLevel::ALL {
            let mut entries = Vec::with_capacity(3);
            for d in Difficulty::ALL {
                let probs = partial[engagement.index()][d.index()].ok_or_else(|| Error::MissingRow {
                    user: name.clone(),
                    engagement: engagement.to_string(),
                    difficulty: d.to_string(),
                })?;
                entries.push(probs);
            }
            profiles.push(ResponseProfile::new([entries[0], entries[1], entries[2]]));
        }
        let description = descriptions.get(&name).cloned().unwrap_or_default();
        users.push(UserModel::new(name, description, [profiles[0], profiles[1], profiles[2]]));
    }

    let mut warnings: Vec<Diagnostic> = users.iter().flat_map(UserModel::diagnostics).collect();
    warnings.extend(capability_diagnostics(&users));
    Ok(LoadedUsers { users, warnings })
}

fn parse_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse { line, message: e.to_string() }
}

/// Serializes users to the profile format; [`load_users`] reads it back unchanged.
pub fn write_users(users: &[UserModel]) -> String {
    let mut out = String::new();
    for user in users.iter().filter(|u| !u.description.is_empty()) {
        out.push_str(&format!("{DESCRIPTION_DIRECTIVE}{}: {}\n", user.name, user.description));
    }
    out.push_str(&PROFILE_HEADER.join(","));
    out.push('\n');
    for user in users {
        for (engagement, profile) in user.profiles() {
            for (d, p) in profile.iter() {
                out.push_str(&format!(
                    "{},{},{},{:?},{:?},{:?}\n",
                    user.name, engagement, d, p.relevant, p.irrelevant, p.none
                ));
            }
        }
    }
    out
}
