// Each example exposes run_example; run them all so they stay in sync with the API.
#[path = "../examples/classify_regime.rs"]
mod classify_regime;
#[path = "../examples/identities.rs"]
mod identities;
#[path = "../examples/invariance_experiment.rs"]
mod invariance_experiment;
#[path = "../examples/limit_covariance.rs"]
mod limit_covariance;
#[path = "../examples/qtable.rs"]
mod qtable;
#[path = "../examples/simulate_field.rs"]
mod simulate_field;
#[path = "../examples/step_law.rs"]
mod step_law;
#[path = "../examples/synthesize_limit.rs"]
mod synthesize_limit;

#[test]
fn classify_regime_runs() {
    classify_regime::run_example().unwrap();
}

#[test]
fn identities_runs() {
    identities::run_example().unwrap();
}

#[test]
fn invariance_experiment_runs() {
    invariance_experiment::run_example().unwrap();
}

#[test]
fn limit_covariance_runs() {
    limit_covariance::run_example().unwrap();
}

#[test]
fn qtable_runs() {
    qtable::run_example().unwrap();
}

#[test]
fn simulate_field_runs() {
    simulate_field::run_example().unwrap();
}

#[test]
fn step_law_runs() {
    step_law::run_example().unwrap();
}

#[test]
fn synthesize_limit_runs() {
    synthesize_limit::run_example().unwrap();
}
