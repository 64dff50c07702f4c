//! A loaded edge-inference environment: network, candidate paths, DNN
//! profiles and the arm sets they induce.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::assignment::{delay, enumerate_assignments, loads, LayerAssignment};
use super::dnn::{prune_splitting_points, DnnProfile};
use super::network::{InferencePath, Link, NetworkGraph, Node};
use crate::error::{Error, Result};
use crate::model::{Arm, ArmId, ArmSet, AttackVector, FeatureVector, GroupParameter};
use crate::policies::{PolicyDecision, Route};

/// Scale applied to raw workloads and data sizes before they enter features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureUnits {
    pub workload_mac: f64,
    pub data_bits: f64,
}

impl Default for FeatureUnits {
    fn default() -> Self {
        Self {
            workload_mac: 1e9,
            data_bits: 1e6,
        }
    }
}

/// Where the unattackable fallback runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalConfig {
    /// One-based path whose source node runs the task.
    #[serde(default = "one")]
    pub path: usize,
    /// Whether the final output still travels the path to its destination.
    #[serde(default = "yes")]
    pub deliver_output: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self {
            path: 1,
            deliver_output: true,
        }
    }
}

/// Arms of every group for one DNN profile.
#[derive(Clone, Debug)]
pub struct TaskArms {
    profile: String,
    sets: Vec<ArmSet>,
    /// Aligned with `sets[g].arms()`.
    assignments: Vec<Vec<LayerAssignment>>,
    delays: Vec<Vec<f64>>,
    full_offload: Vec<ArmId>,
    local: Arm,
    local_delay: f64,
}

impl TaskArms {
    pub fn profile(&self) -> &str {
        &self.profile
    }

    pub fn sets(&self) -> &[ArmSet] {
        &self.sets
    }

    pub fn full_offload(&self) -> &[ArmId] {
        &self.full_offload
    }

    pub fn local(&self) -> &Arm {
        &self.local
    }

    pub fn local_delay(&self) -> f64 {
        self.local_delay
    }

    fn index(&self, group: usize, id: ArmId) -> Result<usize> {
        let set = self
            .sets
            .get(group)
            .ok_or_else(|| Error::invalid("group", format!("{} out of range", group + 1)))?;
        set.arms()
            .binary_search_by_key(&id, |a| a.id)
            .map_err(|_| Error::invalid("arm", format!("{id} not offered in group {}", group + 1)))
    }

    pub fn assignment(&self, group: usize, id: ArmId) -> Result<&LayerAssignment> {
        Ok(&self.assignments[group][self.index(group, id)?])
    }

    pub fn delay(&self, route: Route, id: ArmId) -> Result<f64> {
        match route {
            Route::Local => Ok(self.local_delay),
            Route::Group(g) => Ok(self.delays[g][self.index(g, id)?]),
        }
    }

    /// Largest delay over all arms, including the local one.
    pub fn max_delay(&self) -> f64 {
        self.delays.iter().flatten().copied().fold(self.local_delay, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct EdgeScenario {
    name: String,
    graph: NetworkGraph,
    paths: Vec<InferencePath>,
    profiles: Vec<DnnProfile>,
    deadline_s: f64,
    tau: f64,
    units: FeatureUnits,
    kappa: f64,
    local: LocalConfig,
    tasks: Vec<TaskArms>,
    thetas: Vec<GroupParameter>,
}

/// Deterministic arm id from the cut carried by each link.
pub fn arm_id_for(f: &LayerAssignment, hops: usize) -> ArmId {
    let radix = f.layers() as u64 + 1;
    let id = f
        .cuts(hops)
        .iter()
        .rev()
        .fold(0u64, |acc, &cut| acc * radix + cut as u64);
    ArmId(id)
}

/// Raw (unscaled by kappa) payload: work per position then data per link,
/// both in feature units.
fn raw_payload(path: &InferencePath, f: &LayerAssignment, dnn: &DnnProfile, units: &FeatureUnits) -> Result<Vec<f64>> {
    let l = loads(path, f, dnn)?;
    Ok(l.work_mac
        .iter()
        .map(|w| w / units.workload_mac)
        .chain(l.link_bits.iter().map(|u| u / units.data_bits))
        .collect())
}

/// Feature vector `(1, w / kappa, u / kappa)` and id for an assignment.
pub fn arm_features(
    path: &InferencePath,
    f: &LayerAssignment,
    dnn: &DnnProfile,
    units: &FeatureUnits,
    kappa: f64,
) -> Result<(ArmId, FeatureVector)> {
    let mut x = vec![1.0];
    x.extend(raw_payload(path, f, dnn, units)?.into_iter().map(|v| v / kappa));
    Ok((arm_id_for(f, path.hops()), FeatureVector::new(x)?))
}

/// Coefficients turning [`arm_features`] into `deadline - delay`.
pub fn implied_theta(
    path: &InferencePath,
    graph: &NetworkGraph,
    deadline_s: f64,
    units: &FeatureUnits,
    kappa: f64,
) -> Result<GroupParameter> {
    let mut th = vec![deadline_s];
    th.extend(path.speeds(graph).iter().map(|p| -kappa * units.workload_mac / p));
    th.extend(path.rates(graph).iter().map(|b| -kappa * units.data_bits / b));
    GroupParameter::new(th)
}

pub struct ScenarioParts {
    pub name: String,
    pub graph: NetworkGraph,
    pub paths: Vec<InferencePath>,
    pub profiles: Vec<DnnProfile>,
    pub deadline_s: f64,
    pub tau: f64,
    pub units: FeatureUnits,
    pub local: LocalConfig,
}

impl EdgeScenario {
    pub fn new(parts: ScenarioParts) -> Result<Self> {
        let ScenarioParts {
            name,
            graph,
            paths,
            profiles,
            deadline_s,
            tau,
            units,
            local,
        } = parts;
        let mut problems = Vec::new();
        if paths.is_empty() {
            problems.push("scenario has no paths".to_string());
        }
        if profiles.is_empty() {
            problems.push("scenario has no profiles".to_string());
        }
        if !(deadline_s.is_finite() && deadline_s > 0.0) {
            problems.push(format!("deadline_s must be positive, got {deadline_s}"));
        }
        if !(tau.is_finite() && tau >= 0.0) {
            problems.push(format!("tau must be non-negative, got {tau}"));
        }
        if !(units.workload_mac > 0.0 && units.data_bits > 0.0) {
            problems.push("feature units must be positive".to_string());
        }
        if local.path == 0 || local.path > paths.len() {
            problems.push(format!("local path {} outside 1..={}", local.path, paths.len()));
        }
        let mut names: Vec<&str> = profiles.iter().map(|p| p.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            problems.push("profile names must be unique".to_string());
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }

        // Candidate assignments per (profile, path).
        let mut candidates: Vec<Vec<Vec<LayerAssignment>>> = Vec::new();
        let mut kappa = 0.0f64;
        for dnn in &profiles {
            let splits = prune_splitting_points(dnn);
            let mut per_path = Vec::new();
            for path in &paths {
                let all = enumerate_assignments(path, dnn, Some(&splits));
                for f in &all {
                    let raw = raw_payload(path, f, dnn, &units)?;
                    kappa = kappa.max(crate::model::norm(&raw));
                }
                per_path.push(all);
            }
            candidates.push(per_path);
        }
        if kappa.is_nan() || kappa <= 0.0 {
            return Err(Error::Scenario("all arms have zero load".into()));
        }

        let thetas = paths
            .iter()
            .map(|p| implied_theta(p, &graph, deadline_s, &units, kappa))
            .collect::<Result<Vec<_>>>()?;

        let mut tasks = Vec::new();
        for (dnn, per_path) in profiles.iter().zip(candidates) {
            let mut sets = Vec::new();
            let mut assignments = Vec::new();
            let mut delays = Vec::new();
            let mut full_offload = Vec::new();
            for (g, (path, all)) in paths.iter().zip(per_path).enumerate() {
                let mut arms = Vec::new();
                let mut rows: Vec<(ArmId, LayerAssignment, f64)> = Vec::new();
                for f in all {
                    let (id, x) = arm_features(path, &f, dnn, &units, kappa)?;
                    rows.push((id, f.clone(), delay(path, &f, dnn, &graph)?));
                    arms.push(Arm { id, features: x });
                }
                rows.sort_by_key(|r| r.0);
                full_offload.push(arm_id_for(
                    &LayerAssignment::uniform(dnn.len(), path.hops()),
                    path.hops(),
                ));
                sets.push(ArmSet::new(g, arms)?);
                assignments.push(rows.iter().map(|r| r.1.clone()).collect());
                delays.push(rows.iter().map(|r| r.2).collect());
            }
            let local_path = &paths[local.path - 1];
            let on_source = LayerAssignment::uniform(dnn.len(), 0);
            let (local_arm, local_delay) = if local.deliver_output {
                let (id, x) = arm_features(local_path, &on_source, dnn, &units, kappa)?;
                (Arm { id, features: x }, delay(local_path, &on_source, dnn, &graph)?)
            } else {
                let bare = InferencePath::new(&graph, &[graph.nodes()[local_path.node_indices()[0]].id.clone()], None)?;
                let (id, x) = arm_features(&bare, &on_source, dnn, &units, kappa)?;
                (Arm { id, features: x }, delay(&bare, &on_source, dnn, &graph)?)
            };
            tasks.push(TaskArms {
                profile: dnn.name().to_string(),
                sets,
                assignments,
                delays,
                full_offload,
                local: local_arm,
                local_delay,
            });
        }

        Ok(Self {
            name,
            graph,
            paths,
            profiles,
            deadline_s,
            tau,
            units,
            kappa,
            local,
            tasks,
            thetas,
        })
    }

    /// Mobile device feeding four relays over one hop each, with both
    /// bundled profiles.
    pub fn single_relay(deadline_s: f64) -> Result<Self> {
        const MOBILE_MAC_PER_S: f64 = 8.255e9;
        const RELAY_MAC_PER_S: [f64; 4] = [4.125e10, 4.125e10, 8.25e10, 8.25e10];
        const LINK_MBPS: [f64; 4] = [50.0, 40.0, 20.0, 10.0];
        let mut nodes = vec![Node {
            id: "mobile".into(),
            mac_per_s: MOBILE_MAC_PER_S,
        }];
        let mut links = Vec::new();
        for (k, (p, r)) in RELAY_MAC_PER_S.iter().zip(LINK_MBPS).enumerate() {
            let relay = format!("relay{}", k + 1);
            nodes.push(Node {
                id: relay.clone(),
                mac_per_s: *p,
            });
            links.push(Link {
                id: format!("mobile-{relay}"),
                from: "mobile".into(),
                to: relay,
                bits_per_s: r * 1e6,
            });
        }
        let graph = NetworkGraph::new(nodes, links)?;
        let paths = (1..=4)
            .map(|k| InferencePath::new(&graph, &["mobile".into(), format!("relay{k}")], None))
            .collect::<Result<Vec<_>>>()?;
        let profiles = vec![DnnProfile::builtin("yolo")?, DnnProfile::builtin("resnet50")?];
        Self::new(ScenarioParts {
            name: "single-relay".into(),
            graph,
            paths,
            profiles,
            deadline_s,
            tau: 1.0,
            units: FeatureUnits::default(),
            local: LocalConfig::default(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ScenarioFile = toml::from_str(&text)?;
        file.build(path.parent().unwrap_or(Path::new(".")))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn paths(&self) -> &[InferencePath] {
        &self.paths
    }

    pub fn profiles(&self) -> &[DnnProfile] {
        &self.profiles
    }

    pub fn groups(&self) -> usize {
        self.paths.len()
    }

    pub fn deadline_s(&self) -> f64 {
        self.deadline_s
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn units(&self) -> &FeatureUnits {
        &self.units
    }

    pub fn local(&self) -> &LocalConfig {
        &self.local
    }

    pub fn tasks(&self) -> &[TaskArms] {
        &self.tasks
    }

    pub fn task(&self, index: usize) -> &TaskArms {
        &self.tasks[index]
    }

    pub fn profile_index(&self, name: &str) -> Result<usize> {
        self.profiles
            .iter()
            .position(|p| p.name() == name)
            .ok_or_else(|| Error::UnknownName {
                kind: "profile",
                name: name.to_string(),
                available: self.profiles.iter().map(|p| p.name().to_string()).collect(),
            })
    }

    /// Effective per-group parameters, in feature units.
    pub fn thetas(&self) -> &[GroupParameter] {
        &self.thetas
    }

    pub fn dims(&self) -> Vec<usize> {
        self.thetas.iter().map(GroupParameter::dim).collect()
    }

    /// Noise-free reward of playing `id` on `route` for task `task`.
    pub fn expected_reward(&self, task: usize, route: Route, id: ArmId) -> Result<f64> {
        Ok(self.deadline_s - self.tasks[task].delay(route, id)?)
    }

    /// Realized reward; the local route is never attacked.
    pub fn realize_round(
        &self,
        task: usize,
        decision: &PolicyDecision,
        attack: &AttackVector,
        noise: f64,
    ) -> Result<f64> {
        let base = self.expected_reward(task, decision.route, decision.arm_id)? + noise;
        match decision.route {
            Route::Local => Ok(base),
            Route::Group(g) => Ok(attack.factor(g)? * base),
        }
    }

    /// Rejects deadlines that leave unattacked rewards within `noise_amplitude`
    /// of zero, which would break the positive-reward attack test.
    pub fn check_margin(&self, noise_amplitude: f64, tasks: &[usize]) -> Result<()> {
        let mut problems = Vec::new();
        for t in tasks.iter().filter_map(|&i| self.tasks.get(i)) {
            let margin = self.deadline_s - t.max_delay();
            if margin <= noise_amplitude {
                problems.push(format!(
                    "profile `{}`: worst delay {:.6} s leaves margin {:.6} s under deadline {} s, not above noise amplitude {}",
                    t.profile,
                    t.max_delay(),
                    margin,
                    self.deadline_s,
                    noise_amplitude
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// Switching cost between consecutive routes; the first round always counts.
pub fn switching_cost(now: Route, prev: Option<Route>, tau: f64) -> f64 {
    if prev == Some(now) {
        0.0
    } else {
        tau
    }
}

// ── Scenario files ─────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub nodes: Vec<String>,
    #[serde(default)]
    pub links: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub name: String,
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

/// On-disk scenario description (TOML).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub deadline_s: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub units: FeatureUnits,
    #[serde(default)]
    pub local: LocalConfig,
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub paths: Vec<PathSpec>,
    pub profiles: Vec<ProfileSpec>,
}

fn default_tau() -> f64 {
    1.0
}

impl ScenarioFile {
    /// Resolves relative profile paths against `base`.
    pub fn build(&self, base: &Path) -> Result<EdgeScenario> {
        let graph = NetworkGraph::new(self.nodes.clone(), self.links.clone())?;
        let paths = self
            .paths
            .iter()
            .map(|p| InferencePath::new(&graph, &p.nodes, p.links.as_deref()))
            .collect::<Result<Vec<_>>>()?;
        let profiles = self
            .profiles
            .iter()
            .map(|p| match (&p.builtin, &p.csv) {
                (Some(b), None) => {
                    let d = DnnProfile::builtin(b)?;
                    DnnProfile::new(&p.name, d.input_bits(), d.layers().to_vec())
                }
                (None, Some(csv)) => DnnProfile::from_csv_path(&p.name, &base.join(csv)),
                _ => Err(Error::Scenario(format!(
                    "profile `{}` needs exactly one of `builtin` or `csv`",
                    p.name
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        EdgeScenario::new(ScenarioParts {
            name: self.name.clone(),
            graph,
            paths,
            profiles,
            deadline_s: self.deadline_s,
            tau: self.tau,
            units: self.units,
            local: self.local,
        })
    }
}
