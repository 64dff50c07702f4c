//! Collaborative edge-inference environment.

mod assignment;
mod dnn;
mod network;
mod scenario;

pub use assignment::{
    degenerate_assignment_check, delay, delay_breakdown, enumerate_assignments, loads, DegenerateVerdict,
    DelayBreakdown, LayerAssignment, Loads,
};
pub use dnn::{prune_splitting_points, DnnProfile, Layer, BUILTIN_PROFILES};
pub use network::{dijkstra_transmission_path, InferencePath, Link, NetworkGraph, Node};
pub use scenario::{
    arm_features, arm_id_for, implied_theta, switching_cost, EdgeScenario, FeatureUnits, LocalConfig, PathSpec,
    ProfileSpec, ScenarioFile, ScenarioParts, TaskArms,
};
