//! Scripted behaviors and the metric scenarios built on them.

pub mod behaviors;
pub mod metrics;
pub mod scenario;

pub use behaviors::{
    aim_and_kick, go_to_ball, go_to_point, goalkeeper, goalkeeper_target, standoff_point, AimConfig, Behavior,
    Contact, Gains,
};
pub use metrics::{MetricsReport, CSV_HEADER};
pub use scenario::{run_scenario, Jitter, Scenario, ScenarioConfig, UnknownScenario};
