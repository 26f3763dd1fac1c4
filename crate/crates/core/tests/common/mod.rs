//! Shared fixtures: a seeded random DAG-model generator and oracles that
//! work straight off the rule list, independent of the engine's indices.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use gotm::{build_model, FuzzyRule, RuleId, SymbolId, TreatmentModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CORPUS_SEED: u64 = 0x5EED_2024;
pub const CORPUS_SIZE: usize = 250;

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_goals: usize,
    pub max_interventions: usize,
    pub max_rules_per_goal: usize,
    pub max_rhs: usize,
    pub min_weight_step: u32,
}

impl Default for Shape {
    fn default() -> Self {
        Self {
            max_goals: 12,
            max_interventions: 10,
            max_rules_per_goal: 3,
            max_rhs: 4,
            min_weight_step: 0,
        }
    }
}

pub fn sym(s: &str) -> SymbolId {
    SymbolId::new(s).unwrap()
}

/// Weights from {0.05 k : k = 0..=20}, computed as k / 20 so each is the
/// double nearest its two-digit decimal.
pub fn weight(k: u32) -> f64 {
    k as f64 / 20.0
}

pub fn random_model(rng: &mut impl Rng, shape: Shape) -> TreatmentModel {
    let n_goals = rng.gen_range(1..=shape.max_goals);
    let n_ivs = rng.gen_range(1..=shape.max_interventions);
    let goals: Vec<SymbolId> = (0..n_goals)
        .map(|i| {
            if i == 0 {
                sym("s")
            } else {
                sym(&format!("g{i}"))
            }
        })
        .collect();
    let ivs: Vec<SymbolId> = (1..=n_ivs).map(|i| sym(&format!("i{i}"))).collect();

    let mut rules = Vec::new();
    for (gi, goal) in goals.iter().enumerate() {
        let lo = usize::from(gi == 0);
        let count = rng.gen_range(lo..=shape.max_rules_per_goal);
        // Goals only refine into later goals, so the model is acyclic.
        let pool: Vec<&SymbolId> = goals[gi + 1..].iter().chain(ivs.iter()).collect();
        for _ in 0..count {
            let size = rng.gen_range(1..=shape.max_rhs.min(pool.len()));
            let rhs: Vec<SymbolId> = pool
                .choose_multiple(rng, size)
                .map(|s| (*s).clone())
                .collect();
            let k = rng.gen_range(shape.min_weight_step..=20);
            let id = RuleId::new(format!("r{}", rules.len() + 1)).unwrap();
            rules.push(FuzzyRule::new(id, goal.clone(), rhs, weight(k)));
        }
    }

    let goal_set: BTreeSet<SymbolId> = goals.into_iter().collect();
    let iv_set: BTreeSet<SymbolId> = ivs.into_iter().collect();
    build_model(sym("s"), rules, Some(&goal_set), Some(&iv_set)).expect("generated model is valid")
}

pub fn corpus_with(shape: Shape, seed: u64, size: usize) -> Vec<TreatmentModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size).map(|_| random_model(&mut rng, shape)).collect()
}

pub fn corpus() -> Vec<TreatmentModel> {
    corpus_with(Shape::default(), CORPUS_SEED, CORPUS_SIZE)
}

/// Same symbols and declarations with a different rule list.
pub fn with_rules(model: &TreatmentModel, rules: Vec<FuzzyRule>) -> TreatmentModel {
    build_model(
        model.root().clone(),
        rules,
        Some(model.goals()),
        Some(model.interventions()),
    )
    .expect("rule edits keep the model valid")
}

pub fn all_symbols(model: &TreatmentModel) -> Vec<&SymbolId> {
    model.goals().iter().chain(model.interventions()).collect()
}

/// Brute-force impact: recursive max over rules, min along the path,
/// evaluated on the raw rule list.
pub fn brute_impact(rules: &[FuzzyRule], from: &SymbolId, to: &SymbolId) -> f64 {
    if from == to {
        return 1.0;
    }
    let mut best: f64 = 0.0;
    for rule in rules.iter().filter(|r| &r.lhs == from) {
        for child in &rule.rhs {
            best = best.max(rule.membership.min(brute_impact(rules, child, to)));
        }
    }
    best
}

pub fn reachable(rules: &[FuzzyRule], from: &SymbolId, to: &SymbolId) -> bool {
    from == to
        || rules
            .iter()
            .filter(|r| &r.lhs == from)
            .any(|r| r.rhs.iter().any(|c| reachable(rules, c, to)))
}

/// Recursive satisfaction evaluator over the raw rule list.
pub fn brute_satisfaction(
    rules: &[FuzzyRule],
    degrees: &BTreeMap<SymbolId, f64>,
    symbol: &SymbolId,
) -> f64 {
    let own: Vec<&FuzzyRule> = rules.iter().filter(|r| &r.lhs == symbol).collect();
    if own.is_empty() {
        return degrees.get(symbol).copied().unwrap_or(0.0);
    }
    own.iter()
        .map(|r| {
            r.rhs
                .iter()
                .map(|c| brute_satisfaction(rules, degrees, c))
                .fold(r.membership, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Table II: rows s, g1..g11; columns i1..i10.
pub const TABLE_II: [(&str, [f64; 10]); 12] = [
    ("s", [0.9, 0.7, 0.6, 0.85, 0.8, 0.7, 0.7, 0.65, 0.6, 0.6]),
    ("g1", [0.9, 0.7, 0.0, 0.0, 0.0, 0.7, 0.7, 0.65, 0.6, 0.6]),
    ("g2", [0.85, 0.7, 0.6, 0.85, 0.8, 0.7, 0.7, 0.65, 0.6, 0.6]),
    ("g3", [0.9, 0.7, 0.0, 0.0, 0.0, 0.7, 0.7, 0.65, 0.6, 0.6]),
    ("g4", [0.0, 0.0, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
    ("g5", [0.0, 0.0, 0.0, 0.9, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0]),
    ("g6", [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.6, 0.6]),
    ("g7", [0.0, 0.0, 0.0, 0.0, 0.0, 0.85, 0.0, 0.0, 0.0, 0.0]),
    ("g8", [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.75, 0.65, 0.0, 0.0]),
    ("g9", [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.6, 0.6]),
    ("g10", [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.85, 0.0, 0.0]),
    ("g11", [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.8, 0.85]),
];

pub fn sample_path() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/examples/sample.gotm")
}
