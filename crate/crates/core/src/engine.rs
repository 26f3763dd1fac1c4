//! Impact analysis and satisfaction propagation.
//!
//! The impact of a goal `g` on a symbol `v` is the strongest derivation
//! chain from `g` to `v`, where a chain is as strong as its weakest rule:
//!
//! ```text
//! impact(g, v) = max over chains g = n0 -> n1 -> ... -> nk = v of
//!                min over steps j of membership(rule_j)
//! ```
//!
//! [`impact`] and [`impact_matrix`] evaluate this with one reverse
//! topological sweep per target, `impact(g, v) = max over edges (g, c, w)
//! of min(w, impact(c, v))`, which is linear in the number of edges.
//! [`enumerate_chains`] lists chains explicitly and serves as the
//! exhaustive reference for the sweep.
//!
//! Conventions: `impact(x, x) = 1` (the empty chain), and unreachable pairs
//! are 0. AND-sets play no role in impact since a chain threads a single
//! rhs symbol through each rule; they only matter for [`satisfaction`].

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{ModelError, RuleId, SymbolId, SymbolKind, TreatmentModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("unknown intervention `{0}`")]
    UnknownIntervention(String),

    #[error("degree {value} for `{intervention}` is outside [0, 1]")]
    DegreeOutOfRange { intervention: String, value: f64 },
}

/// A rule-backed path `n0 -> ... -> nk`; `rule_ids[j]` derives
/// `symbols[j + 1]` from `symbols[j]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DerivationChain {
    pub symbols: Vec<SymbolId>,
    pub rule_ids: Vec<RuleId>,
}

impl DerivationChain {
    pub fn new(symbols: Vec<SymbolId>, rule_ids: Vec<RuleId>) -> Self {
        Self { symbols, rule_ids }
    }

    /// Builds a chain from string tokens, e.g. `(&["s", "g1"], &["p1"])`.
    pub fn parse(symbols: &[&str], rule_ids: &[&str]) -> Result<Self, ModelError> {
        Ok(Self {
            symbols: symbols
                .iter()
                .map(|s| SymbolId::new(*s))
                .collect::<Result<_, _>>()?,
            rule_ids: rule_ids
                .iter()
                .map(|r| RuleId::new(*r))
                .collect::<Result<_, _>>()?,
        })
    }

    /// Number of derivation steps.
    pub fn len(&self) -> usize {
        self.rule_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule_ids.is_empty()
    }
}

impl fmt::Display for DerivationChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, sym) in self.symbols.iter().enumerate() {
            if i > 0 {
                f.write_str(" -> ")?;
            }
            f.write_str(sym.as_str())?;
        }
        Ok(())
    }
}

/// A chain together with its min-composed membership.
#[derive(Debug, Clone, PartialEq)]
pub struct RatedChain {
    pub chain: DerivationChain,
    pub membership: f64,
}

/// Witness for a nonzero impact value.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub chain: DerivationChain,
    pub value: f64,
    /// Earliest rule on the chain whose membership equals `value`.
    pub bottleneck: RuleId,
}

/// Membership of a chain: the minimum over its rules.
pub fn chain_membership(
    model: &TreatmentModel,
    chain: &DerivationChain,
) -> Result<f64, EngineError> {
    if chain.rule_ids.is_empty() || chain.symbols.len() != chain.rule_ids.len() + 1 {
        return Err(EngineError::InvalidChain(format!(
            "{} symbols and {} rules; need k + 1 symbols for k >= 1 rules",
            chain.symbols.len(),
            chain.rule_ids.len()
        )));
    }
    let mut value = f64::INFINITY;
    for (step, rule_id) in chain.symbols.windows(2).zip(&chain.rule_ids) {
        let rule = model
            .rule(rule_id.as_str())
            .ok_or_else(|| EngineError::InvalidChain(format!("unknown rule `{rule_id}`")))?;
        if rule.lhs != step[0] || !rule.rhs.contains(&step[1]) {
            return Err(EngineError::InvalidChain(format!(
                "rule `{rule_id}` does not derive `{}` from `{}`",
                step[1], step[0]
            )));
        }
        value = value.min(rule.membership);
    }
    Ok(value)
}

/// Every simple chain from `from` to `to` in depth-first order (rule order,
/// then rhs order). Empty when `to` is unreachable or `from == to`.
pub fn enumerate_chains(
    model: &TreatmentModel,
    from: &str,
    to: &str,
) -> Result<Vec<RatedChain>, EngineError> {
    let start = model.symbol_index(from)?;
    let target = model.symbol_index(to)?;

    // Prune branches that cannot reach the target.
    let mut reaches = vec![false; model.symbol_count()];
    reaches[target] = true;
    for &node in model.topo_order().iter().rev() {
        if model.edges_of(node).iter().any(|e| reaches[e.child]) {
            reaches[node] = true;
        }
    }

    let mut out = Vec::new();
    if start == target || !reaches[start] {
        return Ok(out);
    }

    struct Walk<'m> {
        model: &'m TreatmentModel,
        target: usize,
        reaches: Vec<bool>,
        symbols: Vec<usize>,
        rules: Vec<usize>,
    }

    impl Walk<'_> {
        fn visit(&mut self, node: usize, out: &mut Vec<RatedChain>) {
            if node == self.target {
                let chain = DerivationChain {
                    symbols: self
                        .symbols
                        .iter()
                        .map(|&s| self.model.symbol(s).clone())
                        .collect(),
                    rule_ids: self
                        .rules
                        .iter()
                        .map(|&r| self.model.rule_at(r).id.clone())
                        .collect(),
                };
                let membership = self
                    .rules
                    .iter()
                    .map(|&r| self.model.rule_at(r).membership)
                    .fold(f64::INFINITY, f64::min);
                out.push(RatedChain { chain, membership });
                return;
            }
            let edges = self.model.edges_of(node);
            for (i, edge) in edges.iter().enumerate() {
                if !self.reaches[edge.child] {
                    continue;
                }
                // A rule listing the same rhs symbol twice yields one chain.
                if edges[..i]
                    .iter()
                    .any(|e| e.child == edge.child && e.rule == edge.rule)
                {
                    continue;
                }
                self.symbols.push(edge.child);
                self.rules.push(edge.rule);
                self.visit(edge.child, out);
                self.symbols.pop();
                self.rules.pop();
            }
        }
    }

    let mut walk = Walk {
        model,
        target,
        reaches,
        symbols: vec![start],
        rules: Vec::new(),
    };
    walk.visit(start, &mut out);
    Ok(out)
}

/// Impact of every symbol on `target`, indexed like the model's symbols.
fn sweep(model: &TreatmentModel, target: usize) -> Vec<f64> {
    let mut values = vec![0.0; model.symbol_count()];
    values[target] = 1.0;
    for &node in model.topo_order().iter().rev() {
        if node == target || !model.is_goal_index(node) {
            continue;
        }
        values[node] = model
            .edges_of(node)
            .iter()
            .map(|e| model.rule_at(e.rule).membership.min(values[e.child]))
            .fold(0.0, f64::max);
    }
    values
}

/// Impact of goal `from` on symbol `to`.
pub fn impact(model: &TreatmentModel, from: &str, to: &str) -> Result<f64, EngineError> {
    let start = model.goal_index(from)?;
    let target = model.symbol_index(to)?;
    if start == target {
        return Ok(1.0);
    }
    Ok(sweep(model, target)[start])
}

/// Impact values for every goal × intervention pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactMatrix {
    fingerprint: u64,
    goals: Vec<SymbolId>,
    interventions: Vec<SymbolId>,
    values: Vec<f64>,
}

impl ImpactMatrix {
    /// Fingerprint of the model the matrix was computed from.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Row labels: the root first, then the other goals in natural order.
    pub fn goals(&self) -> &[SymbolId] {
        &self.goals
    }

    /// Column labels in natural order.
    pub fn interventions(&self) -> &[SymbolId] {
        &self.interventions
    }

    pub fn row(&self, index: usize) -> &[f64] {
        let n = self.interventions.len();
        &self.values[index * n..(index + 1) * n]
    }

    pub fn get(&self, goal: &str, intervention: &str) -> Option<f64> {
        let r = self.goals.iter().position(|g| g.as_str() == goal)?;
        let c = self
            .interventions
            .iter()
            .position(|i| i.as_str() == intervention)?;
        Some(self.values[r * self.interventions.len() + c])
    }

    /// `(goal, intervention, value)` triples in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (&SymbolId, &SymbolId, f64)> + '_ {
        self.goals.iter().enumerate().flat_map(move |(r, g)| {
            self.interventions
                .iter()
                .zip(self.row(r))
                .map(move |(i, &v)| (g, i, v))
        })
    }
}

/// Complete matrix, one sweep per intervention. Sweeps run in parallel and
/// are assembled in a fixed order, so the result does not depend on
/// scheduling.
pub fn impact_matrix(model: &TreatmentModel) -> ImpactMatrix {
    let goals: Vec<SymbolId> = model.goals_root_first().into_iter().cloned().collect();
    let interventions: Vec<SymbolId> = model.interventions().iter().cloned().collect();
    let goal_idx: Vec<usize> = goals
        .iter()
        .map(|g| model.index_of(g.as_str()).expect("goal is indexed"))
        .collect();

    let columns: Vec<Vec<f64>> = interventions
        .par_iter()
        .map(|iv| {
            let column = sweep(
                model,
                model
                    .index_of(iv.as_str())
                    .expect("intervention is indexed"),
            );
            goal_idx.iter().map(|&g| column[g]).collect()
        })
        .collect();

    let mut values = Vec::with_capacity(goals.len() * interventions.len());
    for r in 0..goals.len() {
        values.extend(columns.iter().map(|col| col[r]));
    }

    ImpactMatrix {
        fingerprint: model.fingerprint(),
        goals,
        interventions,
        values,
    }
}

/// A chain realizing `impact(from, to)` and its bottleneck rule. Among
/// optimal chains the one with the smallest symbol sequence (natural
/// order) is returned. `None` when the impact is 0 and for `from == to`,
/// which has no chain of length one or more.
pub fn explain_impact(
    model: &TreatmentModel,
    from: &str,
    to: &str,
) -> Result<Option<Explanation>, EngineError> {
    let start = model.goal_index(from)?;
    let target = model.symbol_index(to)?;
    if start == target {
        return Ok(None);
    }
    let values = sweep(model, target);
    let best = values[start];
    if best == 0.0 {
        return Ok(None);
    }

    // Any edge whose weight and downstream value both reach `best` lies on
    // an optimal chain; greedily take the smallest such successor.
    let mut symbols = vec![start];
    let mut rules = Vec::new();
    let mut node = start;
    while node != target {
        let edge = model
            .edges_of(node)
            .iter()
            .filter(|e| model.rule_at(e.rule).membership >= best && values[e.child] >= best)
            .min_by(|a, b| {
                model
                    .symbol(a.child)
                    .cmp(model.symbol(b.child))
                    .then(a.rule.cmp(&b.rule))
            })
            .expect("an optimal successor exists while value >= best");
        symbols.push(edge.child);
        rules.push(edge.rule);
        node = edge.child;
    }

    let bottleneck = rules
        .iter()
        .map(|&r| model.rule_at(r))
        .find(|r| r.membership == best)
        .expect("the chain attains the optimum")
        .id
        .clone();
    Ok(Some(Explanation {
        chain: DerivationChain {
            symbols: symbols
                .into_iter()
                .map(|s| model.symbol(s).clone())
                .collect(),
            rule_ids: rules
                .into_iter()
                .map(|r| model.rule_at(r).id.clone())
                .collect(),
        },
        value: best,
        bottleneck,
    }))
}

/// What-if employment degrees per intervention. Unlisted interventions
/// are not employed (degree 0).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SatisfactionAssignment {
    degrees: BTreeMap<String, f64>,
}

impl SatisfactionAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fully employ every listed intervention.
    pub fn employing<'a>(names: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            degrees: names.into_iter().map(|n| (n.to_string(), 1.0)).collect(),
        }
    }

    pub fn set(&mut self, intervention: &str, degree: f64) -> Result<(), EngineError> {
        if !(0.0..=1.0).contains(&degree) {
            return Err(EngineError::DegreeOutOfRange {
                intervention: intervention.to_string(),
                value: degree,
            });
        }
        self.degrees.insert(intervention.to_string(), degree);
        Ok(())
    }

    pub fn degree(&self, intervention: &str) -> f64 {
        self.degrees.get(intervention).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.degrees.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// Bottom-up satisfaction. A rule yields the min of its membership and its
/// rhs satisfactions (AND); a goal takes the max over its rules (OR); goals
/// without rules are 0.
pub fn satisfaction(
    model: &TreatmentModel,
    assignment: &SatisfactionAssignment,
) -> Result<BTreeMap<SymbolId, f64>, EngineError> {
    let mut sat = vec![0.0; model.symbol_count()];
    for (name, degree) in assignment.iter() {
        match model.index_of(name) {
            Some(idx) if model.kind(name) == Some(SymbolKind::Intervention) => sat[idx] = degree,
            _ => return Err(EngineError::UnknownIntervention(name.to_string())),
        }
    }

    for &node in model.topo_order().iter().rev() {
        if !model.is_goal_index(node) {
            continue;
        }
        let mut best: f64 = 0.0;
        // Edges of one rule are contiguous.
        let edges = model.edges_of(node);
        let mut i = 0;
        while i < edges.len() {
            let rule = edges[i].rule;
            let mut value = model.rule_at(rule).membership;
            while i < edges.len() && edges[i].rule == rule {
                value = value.min(sat[edges[i].child]);
                i += 1;
            }
            best = best.max(value);
        }
        sat[node] = best;
    }

    Ok(model
        .goals()
        .iter()
        .map(|g| {
            (
                g.clone(),
                sat[model.index_of(g.as_str()).expect("goal is indexed")],
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar_io::parse_model;
    use crate::sample;

    fn chain(symbols: &[&str], rules: &[&str]) -> DerivationChain {
        DerivationChain::parse(symbols, rules).unwrap()
    }

    #[test]
    fn chain_membership_takes_the_minimum() {
        let m = sample::model();
        let c = chain(&["s", "g1", "g3", "i1"], &["p1", "p2", "p4"]);
        assert_eq!(chain_membership(&m, &c), Ok(0.9));
        let c = chain(&["s", "g2", "g3", "i1"], &["p1", "p3", "p4"]);
        assert_eq!(chain_membership(&m, &c), Ok(0.85));
        let c = chain(&["g11", "i10"], &["p16"]);
        assert_eq!(chain_membership(&m, &c), Ok(0.85));
    }

    #[test]
    fn invalid_chains() {
        let m = sample::model();
        let bad = [
            chain(&["s", "g3"], &["p1"]),
            chain(&["s", "g1"], &["p2"]),
            chain(&["s"], &[]),
            chain(&["s", "g1", "g3"], &["p1"]),
            chain(&["s", "g1"], &["p77"]),
        ];
        for c in bad {
            assert!(matches!(
                chain_membership(&m, &c),
                Err(EngineError::InvalidChain(_))
            ));
        }
    }

    #[test]
    fn enumerate_sample_pairs() {
        let m = sample::model();
        let chains = enumerate_chains(&m, "s", "i1").unwrap();
        assert_eq!(chains.len(), 2);
        assert_eq!(
            chains[0].chain,
            chain(&["s", "g1", "g3", "i1"], &["p1", "p2", "p4"])
        );
        assert_eq!(chains[0].membership, 0.9);
        assert_eq!(
            chains[1].chain,
            chain(&["s", "g2", "g3", "i1"], &["p1", "p3", "p4"])
        );
        assert_eq!(chains[1].membership, 0.85);

        assert!(enumerate_chains(&m, "g4", "i1").unwrap().is_empty());

        let chains = enumerate_chains(&m, "s", "i9").unwrap();
        assert_eq!(chains.len(), 2);
        assert!(chains.iter().all(|c| c.membership == 0.6));
        assert_eq!(
            chains[0].chain.to_string(),
            "s -> g1 -> g3 -> g6 -> g9 -> g11 -> i9"
        );
        assert_eq!(
            chains[1].chain.to_string(),
            "s -> g2 -> g3 -> g6 -> g9 -> g11 -> i9"
        );

        assert!(matches!(
            enumerate_chains(&m, "s", "nope"),
            Err(EngineError::Model(ModelError::UnknownSymbol(_)))
        ));
    }

    #[test]
    fn impact_values() {
        let m = sample::model();
        assert_eq!(impact(&m, "s", "i1"), Ok(0.9));
        assert_eq!(impact(&m, "g7", "i6"), Ok(0.85));
        assert_eq!(impact(&m, "s", "i6"), Ok(0.7));
        assert_eq!(impact(&m, "s", "s"), Ok(1.0));
        assert_eq!(impact(&m, "s", "g3"), Ok(0.9));
        assert_eq!(impact(&m, "g4", "i1"), Ok(0.0));
        assert!(matches!(
            impact(&m, "i1", "i1"),
            Err(EngineError::Model(ModelError::NotAGoal(_)))
        ));
        assert!(matches!(
            impact(&m, "s", "x"),
            Err(EngineError::Model(ModelError::UnknownSymbol(_)))
        ));
    }

    #[test]
    fn matrix_rows() {
        let m = sample::model();
        let mx = impact_matrix(&m);
        assert_eq!(mx.goals()[0].as_str(), "s");
        assert_eq!(
            mx.row(0),
            &[0.9, 0.7, 0.6, 0.85, 0.8, 0.7, 0.7, 0.65, 0.6, 0.6]
        );
        for iv in mx.interventions() {
            let expected = if iv.as_str() == "i8" { 0.85 } else { 0.0 };
            assert_eq!(mx.get("g10", iv.as_str()), Some(expected));
        }
        assert_eq!(mx.iter().count(), 120);

        let tiny = impact_matrix(&parse_model("root s\np: s -> i1 @ 0.5\n").unwrap());
        assert_eq!(tiny.iter().collect::<Vec<_>>().len(), 1);
        assert_eq!(tiny.get("s", "i1"), Some(0.5));
    }

    #[test]
    fn explanations() {
        let m = sample::model();
        let e = explain_impact(&m, "s", "i1").unwrap().unwrap();
        assert_eq!(
            e.chain,
            chain(&["s", "g1", "g3", "i1"], &["p1", "p2", "p4"])
        );
        assert_eq!(e.bottleneck.as_str(), "p2");
        assert_eq!(e.value, 0.9);

        assert_eq!(explain_impact(&m, "g4", "i1"), Ok(None));
        assert_eq!(explain_impact(&m, "s", "s"), Ok(None));

        let e = explain_impact(&m, "g11", "i10").unwrap().unwrap();
        assert_eq!(e.chain, chain(&["g11", "i10"], &["p16"]));
        assert_eq!(e.bottleneck.as_str(), "p16");
    }

    #[test]
    fn explanation_tie_break_is_smallest_sequence() {
        // Both chains have value 0.5; g2 < g10 in natural order.
        let m = parse_model(
            "root s\np1: s -> g10 @ 0.5\np2: s -> g2 @ 0.5\np3: g10 -> i @ 1\np4: g2 -> i @ 1\n",
        )
        .unwrap();
        let e = explain_impact(&m, "s", "i").unwrap().unwrap();
        assert_eq!(e.chain.to_string(), "s -> g2 -> i");
        assert_eq!(e.bottleneck.as_str(), "p2");
    }

    #[test]
    fn satisfaction_sample() {
        let m = sample::model();
        let all = SatisfactionAssignment::employing(m.interventions().iter().map(|i| i.as_str()));
        let sat = satisfaction(&m, &all).unwrap();
        let get = |s: &BTreeMap<SymbolId, f64>, g: &str| s[&SymbolId::new(g).unwrap()];
        assert_eq!(get(&sat, "s"), 0.6);
        assert_eq!(get(&sat, "g4"), 0.6);

        let none = satisfaction(&m, &SatisfactionAssignment::new()).unwrap();
        assert!(none.values().all(|&v| v == 0.0));
        assert_eq!(none.len(), 12);

        let only_i1 = satisfaction(&m, &SatisfactionAssignment::employing(["i1"])).unwrap();
        assert_eq!(get(&only_i1, "g3"), 0.9);
        assert_eq!(get(&only_i1, "g1"), 0.9);
        assert_eq!(get(&only_i1, "g2"), 0.0);
        assert_eq!(get(&only_i1, "s"), 0.0);
    }

    #[test]
    fn satisfaction_errors() {
        let m = sample::model();
        assert_eq!(
            satisfaction(&m, &SatisfactionAssignment::employing(["g1"])),
            Err(EngineError::UnknownIntervention("g1".into()))
        );
        assert_eq!(
            satisfaction(&m, &SatisfactionAssignment::employing(["zz"])),
            Err(EngineError::UnknownIntervention("zz".into()))
        );
        let mut a = SatisfactionAssignment::new();
        assert!(a.set("i1", 1.5).is_err());
        assert!(a.set("i1", 0.25).is_ok());
        assert_eq!(a.degree("i1"), 0.25);
        assert_eq!(a.degree("i2"), 0.0);
    }
}
