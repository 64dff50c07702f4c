//! Acceptance suite: one PASS/FAIL line per criterion.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use bexpucb::adversaries::ATTACKER_PRESETS;
use bexpucb::edge::{
    degenerate_assignment_check, delay, enumerate_assignments, prune_splitting_points, DegenerateVerdict, DnnProfile,
    EdgeScenario, FeatureUnits, InferencePath, LayerAssignment, Link, LocalConfig, NetworkGraph, Node, ScenarioParts,
};
use bexpucb::metrics::{reward_regret, switching_regret};
use bexpucb::model::{
    draw_noise, oracle_group, sample_categorical, Arm, ArmId, ArmSet, AttackVector, FeatureVector, GroupParameter,
    NoiseSpec,
};
use bexpucb::policies::{
    bonus_sum_bound, build_policy, sampling_distribution, theorem_schedule, Exp3State, PolicyConfig, PolicyContext,
    PolicyKind, RoundOffer, Route,
};
use bexpucb::runner::{emit_csv, run_seeds, AttackerChoice, ExperimentConfig, Prepared, SimOutput};

const SEEDS: usize = 20;
const GOLDEN_PRESET: &str = "resnet";
const GOLDEN_SEED: u64 = 7;
const GOLDEN_SHA256: &str = "9de040e0e8fec4ae01ceddabdd5428cf86b39062e8e6bf05e49ac907676657fe";

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn prepare(preset: &str, edit: impl FnOnce(&mut ExperimentConfig)) -> Prepared {
    let mut cfg = ExperimentConfig::preset(preset).expect("preset exists");
    cfg.seeds = (1..=SEEDS as u64).collect();
    edit(&mut cfg);
    cfg.prepare().expect("preset prepares")
}

fn runs(prepared: &Prepared, kind: PolicyKind) -> Vec<SimOutput> {
    run_seeds(&prepared.with_policy(kind)).expect("simulation runs")
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn final_switching(out: &SimOutput) -> f64 {
    *switching_regret(&out.record).last().expect("non-empty run")
}

fn final_regret(out: &SimOutput) -> f64 {
    *reward_regret(&out.record, &out.record.oracle_rewards())
        .expect("aligned")
        .last()
        .expect("non-empty run")
}

fn switching_bound() -> Outcome {
    let blocks = 3000u64.div_ceil(theorem_schedule(3000).unwrap().block_length) as f64;
    let mut worst = 0.0f64;
    for attacker in ATTACKER_PRESETS {
        let p = prepare("resnet", |c| c.attacker = AttackerChoice::Preset(attacker.into()));
        for out in runs(&p, PolicyKind::BExpUcb) {
            worst = worst.max(final_switching(&out));
        }
    }
    outcome(
        worst <= blocks,
        format!(
            "max S_T {worst} over {} attackers x {SEEDS} seeds, bound {blocks}",
            ATTACKER_PRESETS.len()
        ),
    )
}

fn switching_separation() -> Outcome {
    let p = prepare("mixed", |_| {});
    let blocked = mean(runs(&p, PolicyKind::BExpUcb).iter().map(final_switching));
    let unblocked = mean(runs(&p, PolicyKind::ExpUcb).iter().map(final_switching));
    let ratio = blocked / unblocked;
    outcome(
        ratio <= 0.1,
        format!("mean S_T {blocked:.2} vs {unblocked:.2}, ratio {ratio:.4} (<= 0.1)"),
    )
}

fn sublinear_regret() -> Outcome {
    let regret_at = |kind: PolicyKind, horizon: u64| {
        let p = prepare("yolo", |c| c.horizon = horizon);
        mean(runs(&p, kind).iter().map(final_regret))
    };
    let learner = regret_at(PolicyKind::BExpUcb, 3000) / regret_at(PolicyKind::BExpUcb, 1500);
    let local = regret_at(PolicyKind::Local, 3000) / regret_at(PolicyKind::Local, 1500);
    // Same-run growth between rounds 1500 and 3000, reported only.
    let p = prepare("yolo", |_| {});
    let within: Vec<_> = runs(&p, PolicyKind::BExpUcb)
        .iter()
        .map(|o| {
            let r = reward_regret(&o.record, &o.record.oracle_rewards()).unwrap();
            (r[1499], r[2999])
        })
        .collect();
    let within_ratio = mean(within.iter().map(|w| w.1)) / mean(within.iter().map(|w| w.0));
    outcome(
        learner <= 1.9 && local > 1.95,
        format!(
            "R(3000)/R(1500): b-expucb {learner:.3} (<= 1.9), local {local:.3} (> 1.95); \
             single-run b-expucb {within_ratio:.3}"
        ),
    )
}

fn single_group_scenario() -> EdgeScenario {
    let base = EdgeScenario::single_relay(1.1).unwrap();
    EdgeScenario::new(ScenarioParts {
        name: "single-group".into(),
        graph: base.graph().clone(),
        paths: vec![base.paths()[0].clone()],
        profiles: vec![DnnProfile::builtin("resnet50").unwrap()],
        deadline_s: 1.1,
        tau: 1.0,
        units: FeatureUnits::default(),
        local: LocalConfig::default(),
    })
    .unwrap()
}

fn confidence_coverage() -> Outcome {
    const ROUNDS: u64 = 10_000;
    let scenario = single_group_scenario();
    let config = PolicyConfig {
        lambda: 1.0,
        delta: 0.1,
        sigma: 0.05,
        d: None,
        tau: 1.0,
        ..PolicyConfig::for_horizon(ROUNDS).unwrap()
    };
    let ctx = PolicyContext {
        config,
        dims: scenario.dims(),
        oracle: None,
    };
    let mut policy = build_policy(PolicyKind::BExpUcb, &ctx).unwrap();
    let noise = NoiseSpec::uniform(0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let theta = &scenario.thetas()[0];
    let arms = scenario.task(0);
    let clear = AttackVector::clear(1);
    let mut covered = 0u64;
    let mut tightest = 0.0f64;
    for t in 1..=ROUNDS {
        let offer = RoundOffer {
            sets: arms.sets(),
            full_offload: arms.full_offload(),
            local: None,
        };
        let decision = policy.choose(t, &offer, &mut rng).unwrap();
        let ucb = decision.ucb.expect("ucb learner reports its score");
        let truth = theta.score(&decision.arm).unwrap();
        let error = (ucb.estimate - truth).abs();
        if error <= ucb.bonus() {
            covered += 1;
        }
        tightest = tightest.max(error / ucb.bonus());
        let eps = draw_noise(&mut rng, &noise);
        let reward = scenario.realize_round(0, &decision, &clear, eps).unwrap();
        policy.update(&decision, reward).unwrap();
    }
    let coverage = covered as f64 / ROUNDS as f64;
    outcome(
        coverage >= 0.88,
        format!("coverage {coverage:.4} over {ROUNDS} rounds (>= 0.88), max error/radius {tightest:.3}"),
    )
}

fn bonus_ceiling() -> Outcome {
    let p = prepare("mixed", |_| {});
    let dims = p.scenario.dims();
    let horizon = p.config.horizon;
    let mut worst = 0.0f64;
    for out in runs(&p, PolicyKind::BExpUcb) {
        let mut sums = vec![0.0; dims.len()];
        for row in &out.record.rows {
            if let (Route::Group(g), Some(b)) = (row.route, row.bonus) {
                sums[g] += b;
            }
        }
        for (g, s) in sums.iter().enumerate() {
            worst = worst.max(s / bonus_sum_bound(&p.policy_config, dims[g], horizon));
        }
    }
    outcome(
        worst <= 1.0,
        format!("max realized/bound {worst:.4} per group over {SEEDS} seeds"),
    )
}

fn importance_weights() -> Outcome {
    const DRAWS: u64 = 100_000;
    let rewards = [0.3, 0.7, 0.5, 0.9];
    let probs = sampling_distribution(&[0.2, 1.0, -0.4, 0.6], 1.5, 0.2).unwrap();
    let mut state = Exp3State::new(rewards.len(), 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..DRAWS {
        let g = sample_categorical(&probs, rng.random());
        state.update_cumulative_estimates(g, rewards[g], probs[g]).unwrap();
    }
    let mut worst_z = 0.0f64;
    for (g, r) in rewards.iter().enumerate() {
        let estimate = state.estimates()[g] / DRAWS as f64;
        let se = r * ((1.0 - probs[g]) / (probs[g] * DRAWS as f64)).sqrt();
        worst_z = worst_z.max((estimate - r).abs() / se);
    }
    outcome(
        worst_z <= 3.0,
        format!("max |z| {worst_z:.3} over {DRAWS} draws (<= 3)"),
    )
}

fn random_chain(rng: &mut ChaCha8Rng, hops: usize) -> (NetworkGraph, InferencePath) {
    let nodes: Vec<Node> = (0..=hops)
        .map(|i| Node {
            id: format!("n{i}"),
            mac_per_s: rng.random_range(1.0..10.0),
        })
        .collect();
    let links: Vec<Link> = (0..hops)
        .map(|j| Link {
            id: format!("e{j}"),
            from: format!("n{j}"),
            to: format!("n{}", j + 1),
            bits_per_s: rng.random_range(1.0..10.0),
        })
        .collect();
    let ids: Vec<String> = nodes.iter().map(|n| n.id.clone()).collect();
    let graph = NetworkGraph::new(nodes, links).unwrap();
    let path = InferencePath::new(&graph, &ids, None).unwrap();
    (graph, path)
}

fn min_delay(assignments: &[LayerAssignment], path: &InferencePath, dnn: &DnnProfile, graph: &NetworkGraph) -> f64 {
    assignments
        .iter()
        .map(|f| delay(path, f, dnn, graph).unwrap())
        .fold(f64::INFINITY, f64::min)
}

fn pruning_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut mismatches, mut verdicts, mut wrong_verdicts) = (0, 0, 0);
    for _ in 0..1000 {
        let layers = rng.random_range(1..=5);
        let hops = rng.random_range(1..=3);
        let work: Vec<f64> = (0..layers).map(|_| rng.random_range(0.1..5.0)).collect();
        // Small integer sizes make ties common.
        let sizes: Vec<f64> = (0..=layers).map(|_| rng.random_range(1..=6) as f64).collect();
        let dnn = DnnProfile::from_sizes("random", &work, &sizes).unwrap();
        let (graph, path) = random_chain(&mut rng, hops);
        let full = min_delay(&enumerate_assignments(&path, &dnn, None), &path, &dnn, &graph);
        let splits = prune_splitting_points(&dnn);
        let pruned = min_delay(&enumerate_assignments(&path, &dnn, Some(&splits)), &path, &dnn, &graph);
        if pruned != full {
            mismatches += 1;
        }
        let end = match degenerate_assignment_check(&path, &dnn, &graph).unwrap() {
            DegenerateVerdict::AllOnDestination => Some(hops),
            DegenerateVerdict::AllOnSource => Some(0),
            DegenerateVerdict::Inconclusive => None,
        };
        if let Some(pos) = end {
            verdicts += 1;
            let d = delay(&path, &LayerAssignment::uniform(layers, pos), &dnn, &graph).unwrap();
            if d > full * (1.0 + 1e-12) {
                wrong_verdicts += 1;
            }
        }
    }
    outcome(
        mismatches == 0 && wrong_verdicts == 0,
        format!("1000 instances: {mismatches} optimum mismatches, {wrong_verdicts}/{verdicts} refuted verdicts"),
    )
}

fn random_feature(rng: &mut ChaCha8Rng, dim: usize) -> FeatureVector {
    let payload: Vec<f64> = (1..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let scale = payload.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    FeatureVector::new(std::iter::once(1.0).chain(payload.iter().map(|v| v / scale)).collect()).unwrap()
}

/// Best total of a fixed group over every per-round arm sequence.
fn exhaustive_total(theta: &GroupParameter, set: &ArmSet, attacks: &[AttackVector], g: usize) -> f64 {
    let n = set.len();
    let rounds = attacks.len();
    let mut best = f64::NEG_INFINITY;
    for code in 0..n.pow(rounds as u32) {
        let mut c = code;
        let mut total = 0.0;
        for attack in attacks {
            let arm = &set.arms()[c % n];
            c /= n;
            total += attack.factor(g).unwrap() * theta.score(&arm.features).unwrap();
        }
        best = best.max(total);
    }
    best
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut disagreements = 0;
    for _ in 0..500 {
        let groups = rng.random_range(1..=3);
        let rounds = rng.random_range(1..=6);
        let dim = rng.random_range(2..=4);
        let thetas: Vec<GroupParameter> = (0..groups)
            .map(|_| GroupParameter::new((0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap())
            .collect();
        let sets: Vec<ArmSet> = (0..groups)
            .map(|g| {
                let arms = (0..rng.random_range(1..=4))
                    .map(|i| Arm {
                        id: ArmId(i),
                        features: random_feature(&mut rng, dim),
                    })
                    .collect();
                ArmSet::new(g, arms).unwrap()
            })
            .collect();
        let attacks: Vec<AttackVector> = (0..rounds)
            .map(|_| AttackVector::new((0..groups).map(|_| rng.random_bool(0.4)).collect()).unwrap())
            .collect();
        let chosen = oracle_group(&attacks, &thetas, |_| &sets[..]).unwrap();
        let totals: Vec<f64> = (0..groups)
            .map(|g| exhaustive_total(&thetas[g], &sets[g], &attacks, g))
            .collect();
        let best = totals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let first_best = totals.iter().position(|&v| v >= best - 1e-12).unwrap();
        if chosen != first_best {
            disagreements += 1;
        }
    }
    outcome(
        disagreements == 0,
        format!("{disagreements} disagreements over 500 instances"),
    )
}

fn baseline_ordering() -> Outcome {
    let p = prepare("mixed", |_| {});
    let order = [
        PolicyKind::Oracle,
        PolicyKind::ExpUcb,
        PolicyKind::BExpUcb,
        PolicyKind::LinUcb,
        PolicyKind::Exp3,
        PolicyKind::Local,
    ];
    let rewards: Vec<f64> = order
        .iter()
        .map(|&k| mean(runs(&p, k).iter().map(|o| o.record.final_reward())))
        .collect();
    let ordered = rewards.windows(2).all(|w| w[0] >= w[1]);
    let gap = (rewards[1] - rewards[2]).abs() / rewards[1];
    let listing: Vec<String> = order
        .iter()
        .zip(&rewards)
        .map(|(k, r)| format!("{} {r:.1}", k.name()))
        .collect();
    outcome(
        ordered && gap <= 0.1,
        format!("{}; expucb/b-expucb gap {:.1}%", listing.join(" >= "), gap * 100.0),
    )
}

fn golden_rounds() -> (Vec<u8>, Vec<u8>) {
    let p = prepare(GOLDEN_PRESET, |c| c.seeds = vec![GOLDEN_SEED]);
    let read = || {
        let dir = tempfile::tempdir().unwrap();
        let out = bexpucb::runner::simulate(&p, GOLDEN_SEED).unwrap();
        emit_csv(&out, dir.path()).unwrap();
        std::fs::read(dir.path().join("rounds.csv")).unwrap()
    };
    (read(), read())
}

fn determinism() -> Outcome {
    let (a, b) = golden_rounds();
    let digest: String = Sha256::digest(&a).iter().map(|b| format!("{b:02x}")).collect();
    outcome(
        a == b && digest == GOLDEN_SHA256,
        format!(
            "{GOLDEN_PRESET} seed {GOLDEN_SEED}: repeat identical {}, sha256 {digest}",
            a == b
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("switching bound per block", switching_bound),
        ("switching separation", switching_separation),
        ("sublinear reward regret", sublinear_regret),
        ("confidence coverage", confidence_coverage),
        ("bonus-sum ceiling", bonus_ceiling),
        ("importance-weight unbiasedness", importance_weights),
        ("pruning soundness", pruning_soundness),
        ("oracle equivalence", oracle_equivalence),
        ("baseline ordering", baseline_ordering),
        ("determinism golden", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] criterion {}: {name} - {} ({:.1}s)",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
