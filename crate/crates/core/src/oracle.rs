//! Exact expected returns.
//!
//! With one-step episodes the value of an action is a closed form:
//! `rate · (w·P_R + 0.5·P_IR − 0.2·w·P_N)` for a question of weight `w`.
//! It is linear in the follow-up rate with zero intercept, so the best rate
//! is 1.0 whenever some difficulty has a positive bracket and 0.1 when all
//! three brackets are negative.

use std::fmt::Write as _;

use crate::domain::{action_space, Difficulty, FollowUpRate, RobotAction, ACTION_COUNT};
use crate::user_sim::{EngagementLevel, ResponseProfile, UserModel};

/// Actions within this gap of the optimum are listed as near ties.
pub const NEAR_TIE_GAP: f64 = 0.15;

/// Expected reward of one episode under `action`.
pub fn expected_return(profile: &ResponseProfile, action: RobotAction) -> f64 {
    let p = profile.get(action.difficulty);
    let w = f64::from(action.difficulty.weight());
    action.rate.value() * (w * p.relevant() + 0.5 * p.irrelevant() - 0.2 * w * p.none())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionValueTable {
    pub values: [f64; ACTION_COUNT],
    pub optimal: RobotAction,
    /// Other actions within [`NEAR_TIE_GAP`] of the optimum, closest first.
    pub near_ties: Vec<(RobotAction, f64)>,
}

impl ActionValueTable {
    pub fn from_profile(profile: &ResponseProfile) -> Self {
        let values = action_space().map(|a| expected_return(profile, a));
        let mut best = 0;
        for (i, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = i;
            }
        }
        let optimal = action_space()[best];
        let mut near_ties: Vec<(RobotAction, f64)> = action_space()
            .into_iter()
            .filter(|&a| a != optimal)
            .map(|a| (a, values[best] - values[a.index()]))
            .filter(|&(_, gap)| gap < NEAR_TIE_GAP)
            .collect();
        near_ties.sort_by(|a, b| a.1.total_cmp(&b.1));
        ActionValueTable { values, optimal, near_ties }
    }

    pub fn value(&self, action: RobotAction) -> f64 {
        self.values[action.index()]
    }

    /// V*(Question).
    pub fn optimal_value(&self) -> f64 {
        self.value(self.optimal)
    }

    /// Optimal action plus its near ties.
    pub fn acceptable(&self) -> impl Iterator<Item = RobotAction> + '_ {
        std::iter::once(self.optimal).chain(self.near_ties.iter().map(|&(a, _)| a))
    }

    /// Mean return of the uniform random policy.
    pub fn random_policy_mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / ACTION_COUNT as f64
    }

    /// The table as printed by the `oracle` subcommand.
    pub fn render(&self, user: &str, engagement: EngagementLevel) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# user={user} engagement={engagement}");
        out.push_str("rate,difficulty,expected_return\n");
        for action in action_space() {
            let _ = writeln!(
                out,
                "{},{},{}",
                action.rate,
                action.difficulty,
                fmt_decimal(self.value(action))
            );
        }
        let _ = writeln!(
            out,
            "optimal,{},{},{}",
            self.optimal.rate,
            self.optimal.difficulty,
            fmt_decimal(self.optimal_value())
        );
        for &(action, gap) in &self.near_ties {
            let _ = writeln!(
                out,
                "near_tie,{},{},{},{}",
                action.rate,
                action.difficulty,
                fmt_decimal(self.value(action)),
                fmt_decimal(gap)
            );
        }
        out
    }
}

/// Prints a value rounded to 12 decimals without trailing zeros.
pub fn fmt_decimal(value: f64) -> String {
    let s = format!("{value:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    match s {
        "-0" | "" => "0".to_string(),
        other => other.to_string(),
    }
}

/// Exact action values, the optimum and its near ties for one user and engagement.
pub fn optimal_policy(user: &UserModel, engagement: EngagementLevel) -> ActionValueTable {
    ActionValueTable::from_profile(user.profile(engagement))
}

/// Optimal policies reported for the built-in users (indexed user1..user4).
/// Cells with two entries were reported as either-or.
pub fn reference_optima(user_index: usize, engagement: EngagementLevel) -> Option<&'static [RobotAction]> {
    use Difficulty::*;
    use EngagementLevel::*;
    use FollowUpRate::*;
    const D1: RobotAction = RobotAction::new(Always, Difficult);
    const M1: RobotAction = RobotAction::new(Always, Moderate);
    const E1: RobotAction = RobotAction::new(Always, Easy);
    const E01: RobotAction = RobotAction::new(Rare, Easy);
    let cell: &'static [RobotAction] = match (user_index, engagement) {
        (0, _) => &[D1],
        (1, High | Medium) => &[D1],
        (1, Low) => &[D1, M1],
        (2, High) => &[D1, M1],
        (2, Medium) => &[M1],
        (2, Low) => &[E1],
        (3, _) => &[E01],
        _ => return None,
    };
    Some(cell)
}

/// Best achievable values, compared across users and engagement levels.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingReport {
    /// Per engagement level: each user's optimal value in catalog order, and
    /// whether they are non-increasing down the catalog.
    pub across_users: Vec<(EngagementLevel, Vec<(String, f64)>, bool)>,
    /// Per user: optimal values for high, medium and low engagement, and
    /// whether they are non-increasing.
    pub across_engagement: Vec<(String, [f64; 3], bool)>,
}

impl OrderingReport {
    pub fn all_ordered(&self) -> bool {
        self.across_users.iter().all(|(_, _, ok)| *ok)
            && self.across_engagement.iter().all(|(_, _, ok)| *ok)
    }
}

fn non_increasing(values: impl IntoIterator<Item = f64>) -> bool {
    let values: Vec<f64> = values.into_iter().collect();
    values.windows(2).all(|w| w[1] <= w[0])
}

/// Checks that better cognitive capability and higher engagement never lower
/// the best achievable value. `catalog` is ordered from most to least capable.
pub fn value_ordering_report(catalog: &[UserModel]) -> OrderingReport {
    let optimum = |u: &UserModel, e| optimal_policy(u, e).optimal_value();
    let across_users = EngagementLevel::ALL
        .into_iter()
        .map(|e| {
            let values: Vec<(String, f64)> =
                catalog.iter().map(|u| (u.name.clone(), optimum(u, e))).collect();
            let ok = non_increasing(values.iter().map(|(_, v)| *v));
            (e, values, ok)
        })
        .collect();
    let across_engagement = catalog
        .iter()
        .map(|u| {
            let values = EngagementLevel::ALL.map(|e| optimum(u, e));
            (u.name.clone(), values, non_increasing(values))
        })
        .collect();
    OrderingReport { across_users, across_engagement }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::user_sim::builtin_catalog;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn spot_values() {
        let users = builtin_catalog();
        let v = |u: usize, e: EngagementLevel, r: FollowUpRate, d: Difficulty| {
            expected_return(users[u].profile(e), RobotAction::new(r, d))
        };
        use Difficulty::*;
        use EngagementLevel::*;
        use FollowUpRate::*;
        assert!(close(v(0, High, Always, Difficult), 3.0));
        assert!(close(v(2, Medium, Always, Moderate), 1.025));
        assert!(close(v(3, High, Rare, Easy), -0.0096));
        assert!(close(v(2, Low, Always, Easy), 0.325));
    }

    #[test]
    fn linear_in_rate() {
        for user in builtin_catalog() {
            for (_, profile) in user.profiles() {
                for d in Difficulty::ALL {
                    let full = expected_return(profile, RobotAction::new(FollowUpRate::Always, d));
                    for r in FollowUpRate::ALL {
                        let v = expected_return(profile, RobotAction::new(r, d));
                        assert!(close(v, r.value() * full));
                    }
                }
            }
        }
    }

    #[test]
    fn optimal_policies() {
        let users = builtin_catalog();
        let t = optimal_policy(&users[1], EngagementLevel::Medium);
        assert_eq!(t.optimal, RobotAction::new(FollowUpRate::Always, Difficulty::Difficult));
        assert!(close(t.optimal_value(), 2.068));
        assert!(close(t.value(RobotAction::new(FollowUpRate::Always, Difficulty::Moderate)), 1.535));

        let t = optimal_policy(&users[2], EngagementLevel::Low);
        assert_eq!(t.optimal, RobotAction::new(FollowUpRate::Always, Difficulty::Easy));
        assert!(close(t.optimal_value(), 0.325));

        let t = optimal_policy(&users[3], EngagementLevel::Medium);
        assert_eq!(t.optimal, RobotAction::new(FollowUpRate::Rare, Difficulty::Easy));
        assert!(t.values.iter().all(|&v| v < 0.0));
    }

    #[test]
    fn sign_analysis_explains_every_optimum() {
        for user in builtin_catalog() {
            for engagement in EngagementLevel::ALL {
                let t = optimal_policy(&user, engagement);
                let any_positive = Difficulty::ALL
                    .iter()
                    .any(|&d| t.value(RobotAction::new(FollowUpRate::Always, d)) > 0.0);
                let expected_rate = if any_positive { FollowUpRate::Always } else { FollowUpRate::Rare };
                assert_eq!(t.optimal.rate, expected_rate, "{} {engagement}", user.name);
            }
        }
    }

    #[test]
    fn oracle_contains_every_reference_optimum() {
        for (i, user) in builtin_catalog().iter().enumerate() {
            for engagement in EngagementLevel::ALL {
                let t = optimal_policy(user, engagement);
                let acceptable: Vec<RobotAction> = t.acceptable().collect();
                for a in reference_optima(i, engagement).unwrap() {
                    assert!(acceptable.contains(a), "{} {engagement} {a}", user.name);
                }
                assert!(reference_optima(i, engagement).unwrap().contains(&t.optimal));
            }
        }
        assert!(reference_optima(4, EngagementLevel::High).is_none());
    }

    #[test]
    fn dual_optima_are_near_ties() {
        let users = builtin_catalog();
        let dual = [(1, EngagementLevel::Low), (2, EngagementLevel::High)];
        for (u, e) in dual {
            let t = optimal_policy(&users[u], e);
            let m = RobotAction::new(FollowUpRate::Always, Difficulty::Moderate);
            assert!(t.near_ties.iter().any(|&(a, _)| a == m));
        }
    }

    #[test]
    fn ordering_report_on_catalog() {
        let report = value_ordering_report(&builtin_catalog());
        assert!(report.all_ordered());
        let (_, high, ok) = &report.across_users[0];
        assert!(ok);
        let expected = [3.0, 2.55, 1.453, -0.0096];
        for ((_, v), e) in high.iter().zip(expected) {
            assert!(close(*v, e), "{v} vs {e}");
        }
        let (_, user1, ok) = &report.across_engagement[0];
        assert!(ok);
        for (v, e) in user1.iter().zip([3.0, 2.64, 2.46]) {
            assert!(close(*v, e), "{v} vs {e}");
        }
    }

    #[test]
    fn single_user_catalog_is_vacuously_ordered() {
        let report = value_ordering_report(&builtin_catalog()[..1]);
        assert!(report.across_users.iter().all(|(_, _, ok)| *ok));
    }

    #[test]
    fn random_policy_mean_for_perfect_user() {
        let users = builtin_catalog();
        let t = optimal_policy(&users[0], EngagementLevel::High);
        assert!(close(t.random_policy_mean(), 1.1));
    }

    #[test]
    fn decimal_formatting() {
        assert_eq!(fmt_decimal(0.325), "0.325");
        assert_eq!(fmt_decimal(3.0), "3");
        assert_eq!(fmt_decimal(-0.0096), "-0.0096");
        assert_eq!(fmt_decimal(-0.0), "0");
        assert_eq!(fmt_decimal(1e-14), "0");
    }

    #[test]
    fn render_has_twelve_rows_and_optimal_line() {
        let users = builtin_catalog();
        let text = optimal_policy(&users[2], EngagementLevel::Low).render("user3", EngagementLevel::Low);
        assert!(text.contains("\noptimal,1.0,easy,0.325\n"));
        let rows = text.lines().filter(|l| l.starts_with("0.") || l.starts_with("1.")).count();
        assert_eq!(rows, 12);
    }
}
