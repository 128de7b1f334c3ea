use dialogue_policy_web::{oracle_json, sample_json, train_json, users_json};

#[test]
fn lists_the_builtin_users() {
    let users = users_json();
    let names: Vec<&str> = users.as_array().unwrap().iter().map(|u| u["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["user1", "user2", "user3", "user4"]);
}

#[test]
fn oracle_reports_the_best_action() {
    let t = oracle_json("user3", "low").unwrap();
    assert_eq!(t["actions"].as_array().unwrap().len(), 12);
    assert_eq!(t["optimal"]["label"], "[1.0,E]");
    assert!((t["optimal_value"].as_f64().unwrap() - 0.325).abs() < 1e-12);
    assert_eq!(t["near_ties"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_names_are_errors() {
    assert!(oracle_json("nobody", "high").is_err());
    assert!(oracle_json("user1", "sleepy").is_err());
    assert!(sample_json("user1", "high", "0.5", "easy", 10, 0).is_err());
}

#[test]
fn training_returns_both_curves() {
    let r = train_json("user1", "high", 4, 60, 150, 0.1, 0.03).unwrap();
    assert_eq!(r["qlearning_return"].as_array().unwrap().len(), 60);
    assert_eq!(r["random_return"].as_array().unwrap().len(), 60);
    assert_eq!(r["greedy"]["label"], "[1.0,D]");
    assert!(r["qlearning_mean"].as_f64().unwrap() > r["random_window_mean"].as_f64().unwrap() + 0.5);
    assert_eq!(r, train_json("user1", "high", 4, 60, 150, 0.1, 0.03).unwrap());
}

#[test]
fn training_rejects_bad_settings() {
    assert!(train_json("user1", "high", 0, 0, 150, 0.1, 0.03).is_err());
    assert!(train_json("user1", "high", 0, 10, 150, 1.5, 0.03).is_err());
    assert!(train_json("user1", "high", 0, 100_000, 100_000, 0.1, 0.03).is_err());
}

#[test]
fn sampled_frequencies_are_close() {
    let s = sample_json("user4", "high", "0.1", "easy", 100_000, 3).unwrap();
    for o in s["outcomes"].as_array().unwrap() {
        let (f, e) = (o["frequency"].as_f64().unwrap(), o["expected"].as_f64().unwrap());
        assert!((f - e).abs() < 0.01, "{o}");
    }
    let total: u64 = s["outcomes"].as_array().unwrap().iter().map(|o| o["count"].as_u64().unwrap()).sum();
    assert_eq!(total, 100_000);
}
