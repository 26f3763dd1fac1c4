//! Treatment models as fuzzy grammars.
//!
//! A [`TreatmentModel`] holds a root goal, the goal and intervention
//! partitions, and an ordered list of [`FuzzyRule`]s. A rule with several
//! right-hand symbols is an AND-junction; several rules sharing a left-hand
//! goal are OR-alternatives. Every right-hand symbol of a rule carries the
//! rule's single membership value.
//!
//! Models are immutable once built and [`build_model`] guarantees the
//! structural invariants: memberships in `[0, 1]`, unique rule ids, a
//! disjoint goal/intervention partition, and an acyclic edge graph.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

/// Errors raised while building or querying a model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid token `{0}`: expected a letter followed by letters, digits or underscores")]
    InvalidToken(String),

    #[error("model has no rules")]
    EmptyModel,

    #[error("duplicate rule id `{0}`")]
    DuplicateRuleId(RuleId),

    #[error("rule `{rule}` has membership {value} outside [0, 1]")]
    MembershipOutOfRange { rule: RuleId, value: f64 },

    #[error("rule `{0}` has an empty right-hand side")]
    EmptyRhs(RuleId),

    #[error("cycle detected: {}", join_symbols(.0))]
    CycleDetected(Vec<SymbolId>),

    #[error("kind conflict for `{symbol}`: {reason}")]
    KindConflict { symbol: SymbolId, reason: String },

    #[error("root `{0}` is not a goal of the model")]
    UnknownRoot(SymbolId),

    #[error("unknown rule `{0}`")]
    UnknownRule(String),

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("`{0}` is an intervention, not a goal")]
    NotAGoal(SymbolId),
}

fn join_symbols(symbols: &[SymbolId]) -> String {
    symbols
        .iter()
        .map(SymbolId::as_str)
        .collect::<Vec<_>>()
        .join(" -> ")
}

fn is_token(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Natural ordering: digit runs compare numerically, everything else
/// bytewise, so `i2 < i10` and `g9 < g11`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a.as_bytes(), b.as_bytes());
    loop {
        match (a.first(), b.first()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let da = a.iter().take_while(|c| c.is_ascii_digit()).count();
                let db = b.iter().take_while(|c| c.is_ascii_digit()).count();
                let (na, ra) = a.split_at(da);
                let (nb, rb) = b.split_at(db);
                let ta = trim_zeros(na);
                let tb = trim_zeros(nb);
                let ord = ta.len().cmp(&tb.len()).then_with(|| ta.cmp(tb));
                if ord != Ordering::Equal {
                    return ord;
                }
                a = ra;
                b = rb;
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(y);
                }
                a = &a[1..];
                b = &b[1..];
            }
        }
    }
}

fn trim_zeros(digits: &[u8]) -> &[u8] {
    let start = digits
        .iter()
        .position(|&d| d != b'0')
        .unwrap_or(digits.len());
    &digits[start..]
}

macro_rules! token_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(name: impl Into<String>) -> Result<Self, ModelError> {
                let name = name.into();
                if is_token(&name) {
                    Ok(Self(name))
                } else {
                    Err(ModelError::InvalidToken(name))
                }
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl Ord for $name {
            fn cmp(&self, other: &Self) -> Ordering {
                natural_cmp(&self.0, &other.0).then_with(|| self.0.cmp(&other.0))
            }
        }

        impl PartialOrd for $name {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl std::str::FromStr for $name {
            type Err = ModelError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::new(s)
            }
        }
    };
}

token_newtype!(
    /// Name of a goal or intervention. Ordered naturally (`i2 < i10`).
    SymbolId
);
token_newtype!(
    /// Identifier of a fuzzy derivation rule.
    RuleId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    Goal,
    Intervention,
}

/// One derivation rule `lhs -> rhs... @ membership`.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyRule {
    pub id: RuleId,
    pub lhs: SymbolId,
    pub rhs: Vec<SymbolId>,
    pub membership: f64,
}

impl FuzzyRule {
    pub fn new(id: RuleId, lhs: SymbolId, rhs: Vec<SymbolId>, membership: f64) -> Self {
        Self {
            id,
            lhs,
            rhs,
            membership,
        }
    }

    /// Convenience constructor from string tokens.
    pub fn parse(id: &str, lhs: &str, rhs: &[&str], membership: f64) -> Result<Self, ModelError> {
        Ok(Self {
            id: RuleId::new(id)?,
            lhs: SymbolId::new(lhs)?,
            rhs: rhs
                .iter()
                .map(|s| SymbolId::new(*s))
                .collect::<Result<_, _>>()?,
            membership,
        })
    }
}

/// Edge view of a rule: one entry per rhs symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct ChildEdge<'a> {
    pub child: &'a SymbolId,
    pub rule_id: &'a RuleId,
    pub membership: f64,
}

/// Precomputed adjacency over dense symbol indices.
#[derive(Debug, Clone)]
pub(crate) struct Edge {
    pub child: usize,
    pub rule: usize,
}

/// An immutable, validated treatment model.
#[derive(Debug, Clone)]
pub struct TreatmentModel {
    root: SymbolId,
    goals: BTreeSet<SymbolId>,
    interventions: BTreeSet<SymbolId>,
    rules: Vec<FuzzyRule>,

    // Derived indices. Symbols are stored goals first, then interventions,
    // each in natural order.
    symbols: Vec<SymbolId>,
    index: HashMap<String, usize>,
    edges: Vec<Vec<Edge>>,
    topo: Vec<usize>,
    fingerprint: u64,
}

impl PartialEq for TreatmentModel {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
            && self.goals == other.goals
            && self.interventions == other.interventions
            && self.rules == other.rules
    }
}

impl TreatmentModel {
    pub fn root(&self) -> &SymbolId {
        &self.root
    }

    pub fn goals(&self) -> &BTreeSet<SymbolId> {
        &self.goals
    }

    pub fn interventions(&self) -> &BTreeSet<SymbolId> {
        &self.interventions
    }

    pub fn rules(&self) -> &[FuzzyRule] {
        &self.rules
    }

    pub fn kind(&self, symbol: &str) -> Option<SymbolKind> {
        let idx = self.index_of(symbol)?;
        Some(if idx < self.goals.len() {
            SymbolKind::Goal
        } else {
            SymbolKind::Intervention
        })
    }

    /// Goals with the root first, then the rest in natural order.
    pub fn goals_root_first(&self) -> Vec<&SymbolId> {
        std::iter::once(&self.root)
            .chain(self.goals.iter().filter(|g| **g != self.root))
            .collect()
    }

    /// Stable digest of the model's structure.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn rule(&self, rule_id: &str) -> Option<&FuzzyRule> {
        self.rules.iter().find(|r| r.id.as_str() == rule_id)
    }

    pub fn rule_membership(&self, rule_id: &str) -> Result<f64, ModelError> {
        self.rule(rule_id)
            .map(|r| r.membership)
            .ok_or_else(|| ModelError::UnknownRule(rule_id.to_string()))
    }

    /// Outgoing edges of `goal`, in rule order then rhs order.
    pub fn child_edges(&self, goal: &str) -> Result<Vec<ChildEdge<'_>>, ModelError> {
        let idx = self.goal_index(goal)?;
        Ok(self.edges[idx]
            .iter()
            .map(|e| {
                let rule = &self.rules[e.rule];
                ChildEdge {
                    child: &self.symbols[e.child],
                    rule_id: &rule.id,
                    membership: rule.membership,
                }
            })
            .collect())
    }

    pub(crate) fn symbol_count(&self) -> usize {
        self.symbols.len()
    }

    pub(crate) fn symbol(&self, idx: usize) -> &SymbolId {
        &self.symbols[idx]
    }

    pub(crate) fn index_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub(crate) fn symbol_index(&self, symbol: &str) -> Result<usize, ModelError> {
        self.index_of(symbol)
            .ok_or_else(|| ModelError::UnknownSymbol(symbol.to_string()))
    }

    pub(crate) fn goal_index(&self, symbol: &str) -> Result<usize, ModelError> {
        let idx = self.symbol_index(symbol)?;
        if self.is_goal_index(idx) {
            Ok(idx)
        } else {
            Err(ModelError::NotAGoal(self.symbols[idx].clone()))
        }
    }

    pub(crate) fn is_goal_index(&self, idx: usize) -> bool {
        idx < self.goals.len()
    }

    pub(crate) fn edges_of(&self, idx: usize) -> &[Edge] {
        &self.edges[idx]
    }

    /// Symbol indices such that every edge points from an earlier to a
    /// later position.
    pub(crate) fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub(crate) fn rule_at(&self, idx: usize) -> &FuzzyRule {
        &self.rules[idx]
    }
}

/// Builds a model, inferring symbol kinds from lhs occurrence where no
/// declaration is given.
pub fn build_model(
    root: SymbolId,
    rules: Vec<FuzzyRule>,
    declared_goals: Option<&BTreeSet<SymbolId>>,
    declared_interventions: Option<&BTreeSet<SymbolId>>,
) -> Result<TreatmentModel, ModelError> {
    if rules.is_empty() {
        return Err(ModelError::EmptyModel);
    }
    check_rules(&rules)?;

    let empty = BTreeSet::new();
    let declared_goals = declared_goals.unwrap_or(&empty);
    let declared_interventions = declared_interventions.unwrap_or(&empty);

    if let Some(both) = declared_goals.intersection(declared_interventions).next() {
        return Err(ModelError::KindConflict {
            symbol: both.clone(),
            reason: "declared as both goal and intervention".into(),
        });
    }

    let mut goals: BTreeSet<SymbolId> = declared_goals.clone();
    for rule in &rules {
        if declared_interventions.contains(&rule.lhs) {
            return Err(ModelError::KindConflict {
                symbol: rule.lhs.clone(),
                reason: format!("declared intervention is the lhs of rule `{}`", rule.id),
            });
        }
        goals.insert(rule.lhs.clone());
    }
    let mut interventions: BTreeSet<SymbolId> = declared_interventions.clone();
    for sym in rules.iter().flat_map(|r| r.rhs.iter()) {
        if !goals.contains(sym) {
            interventions.insert(sym.clone());
        }
    }

    if !goals.contains(&root) {
        if interventions.contains(&root) {
            return Err(ModelError::KindConflict {
                symbol: root.clone(),
                reason: "root must be a goal".into(),
            });
        }
        return Err(ModelError::UnknownRoot(root));
    }

    let symbols: Vec<SymbolId> = goals.iter().chain(interventions.iter()).cloned().collect();
    let index: HashMap<String, usize> = symbols
        .iter()
        .enumerate()
        .map(|(i, s)| (s.0.clone(), i))
        .collect();
    let mut edges: Vec<Vec<Edge>> = vec![Vec::new(); symbols.len()];
    for (rule_idx, rule) in rules.iter().enumerate() {
        let lhs = index[rule.lhs.as_str()];
        for sym in &rule.rhs {
            edges[lhs].push(Edge {
                child: index[sym.as_str()],
                rule: rule_idx,
            });
        }
    }

    let topo = topological_order(&edges).map_err(|cycle| {
        ModelError::CycleDetected(cycle.into_iter().map(|i| symbols[i].clone()).collect())
    })?;

    let fingerprint = compute_fingerprint(&root, &goals, &interventions, &rules);

    Ok(TreatmentModel {
        root,
        goals,
        interventions,
        rules,
        symbols,
        index,
        edges,
        topo,
        fingerprint,
    })
}

/// Per-rule hard checks shared by [`build_model`] and [`validate`].
fn check_rules(rules: &[FuzzyRule]) -> Result<(), ModelError> {
    let mut seen = BTreeSet::new();
    for rule in rules {
        if !seen.insert(&rule.id) {
            return Err(ModelError::DuplicateRuleId(rule.id.clone()));
        }
        if !(0.0..=1.0).contains(&rule.membership) {
            return Err(ModelError::MembershipOutOfRange {
                rule: rule.id.clone(),
                value: rule.membership,
            });
        }
        if rule.rhs.is_empty() {
            return Err(ModelError::EmptyRhs(rule.id.clone()));
        }
    }
    Ok(())
}

/// Iterative three-colour DFS. On a cycle, returns its node sequence with
/// the first node repeated at the end.
fn topological_order(edges: &[Vec<Edge>]) -> Result<Vec<usize>, Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }

    let n = edges.len();
    let mut mark = vec![Mark::New; n];
    let mut post = Vec::with_capacity(n);
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for start in 0..n {
        if mark[start] != Mark::New {
            continue;
        }
        mark[start] = Mark::Active;
        stack.push((start, 0));
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(edge) = edges[node].get(*next) {
                *next += 1;
                match mark[edge.child] {
                    Mark::New => {
                        mark[edge.child] = Mark::Active;
                        stack.push((edge.child, 0));
                    }
                    Mark::Active => {
                        let from = stack.iter().position(|&(s, _)| s == edge.child).unwrap();
                        let mut cycle: Vec<usize> = stack[from..].iter().map(|&(s, _)| s).collect();
                        cycle.push(edge.child);
                        return Err(cycle);
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                post.push(node);
                stack.pop();
            }
        }
    }
    post.reverse();
    Ok(post)
}

fn compute_fingerprint(
    root: &SymbolId,
    goals: &BTreeSet<SymbolId>,
    interventions: &BTreeSet<SymbolId>,
    rules: &[FuzzyRule],
) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    root.hash(&mut h);
    goals.iter().for_each(|g| g.hash(&mut h));
    0xffu8.hash(&mut h);
    interventions.iter().for_each(|i| i.hash(&mut h));
    for rule in rules {
        rule.id.hash(&mut h);
        rule.lhs.hash(&mut h);
        rule.rhs.hash(&mut h);
        rule.membership.to_bits().hash(&mut h);
    }
    h.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FindingCode {
    DuplicateRuleId,
    MembershipOutOfRange,
    EmptyRhs,
    CycleDetected,
    KindConflict,
    UnknownRoot,
    UnknownSymbol,
    UnsatisfiableGoal,
    Unreachable,
    ZeroMembership,
}

impl FindingCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingCode::DuplicateRuleId => "duplicate-rule-id",
            FindingCode::MembershipOutOfRange => "membership-out-of-range",
            FindingCode::EmptyRhs => "empty-rhs",
            FindingCode::CycleDetected => "cycle-detected",
            FindingCode::KindConflict => "kind-conflict",
            FindingCode::UnknownRoot => "unknown-root",
            FindingCode::UnknownSymbol => "unknown-symbol",
            FindingCode::UnsatisfiableGoal => "unsatisfiable-goal",
            FindingCode::Unreachable => "unreachable",
            FindingCode::ZeroMembership => "zero-membership",
        }
    }
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub code: FindingCode,
    pub message: String,
    /// Offending symbol or rule id.
    pub subject: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.code, self.subject, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has_warning(&self, code: FindingCode, subject: &str) -> bool {
        self.warnings
            .iter()
            .any(|w| w.code == code && w.subject == subject)
    }
}

impl From<&ModelError> for Finding {
    fn from(err: &ModelError) -> Self {
        let (code, subject) = match err {
            ModelError::DuplicateRuleId(r) => (FindingCode::DuplicateRuleId, r.to_string()),
            ModelError::MembershipOutOfRange { rule, .. } => {
                (FindingCode::MembershipOutOfRange, rule.to_string())
            }
            ModelError::EmptyRhs(r) => (FindingCode::EmptyRhs, r.to_string()),
            ModelError::CycleDetected(c) => (
                FindingCode::CycleDetected,
                c.first().map(|s| s.to_string()).unwrap_or_default(),
            ),
            ModelError::KindConflict { symbol, .. } => {
                (FindingCode::KindConflict, symbol.to_string())
            }
            ModelError::UnknownRoot(s) => (FindingCode::UnknownRoot, s.to_string()),
            ModelError::NotAGoal(s) => (FindingCode::KindConflict, s.to_string()),
            ModelError::UnknownSymbol(s)
            | ModelError::UnknownRule(s)
            | ModelError::InvalidToken(s) => (FindingCode::UnknownSymbol, s.clone()),
            ModelError::EmptyModel => (FindingCode::UnknownRoot, String::new()),
        };
        Finding {
            code,
            message: err.to_string(),
            subject,
        }
    }
}

/// Re-checks the hard invariants and collects soft findings. Total: never
/// fails, the report carries everything.
pub fn validate(model: &TreatmentModel) -> ValidationReport {
    let mut report = ValidationReport::default();

    if let Err(e) = check_rules(&model.rules) {
        report.errors.push(Finding::from(&e));
    }
    if !model.goals.contains(&model.root) {
        report
            .errors
            .push(Finding::from(&ModelError::UnknownRoot(model.root.clone())));
    }
    for rule in &model.rules {
        if !model.goals.contains(&rule.lhs) {
            report.errors.push(Finding::from(&ModelError::KindConflict {
                symbol: rule.lhs.clone(),
                reason: format!("lhs of rule `{}` is not a goal", rule.id),
            }));
        }
        for sym in &rule.rhs {
            if model.index_of(sym.as_str()).is_none() {
                report
                    .errors
                    .push(Finding::from(&ModelError::UnknownSymbol(sym.to_string())));
            }
        }
    }
    if let Some(both) = model.goals.intersection(&model.interventions).next() {
        report.errors.push(Finding::from(&ModelError::KindConflict {
            symbol: both.clone(),
            reason: "both goal and intervention".into(),
        }));
    }
    if let Err(cycle) = topological_order(&model.edges) {
        report.errors.push(Finding::from(&ModelError::CycleDetected(
            cycle
                .into_iter()
                .map(|i| model.symbols[i].clone())
                .collect(),
        )));
    }

    for (idx, goal) in model.goals.iter().enumerate() {
        if model.edges[idx].is_empty() {
            report.warnings.push(Finding {
                code: FindingCode::UnsatisfiableGoal,
                message: "goal has no derivation rule; its impact on everything is 0".into(),
                subject: goal.to_string(),
            });
        }
    }

    let mut reached = vec![false; model.symbols.len()];
    let mut stack = vec![model.index[model.root.as_str()]];
    reached[stack[0]] = true;
    while let Some(node) = stack.pop() {
        for e in &model.edges[node] {
            if !reached[e.child] {
                reached[e.child] = true;
                stack.push(e.child);
            }
        }
    }
    for (idx, sym) in model.symbols.iter().enumerate() {
        if !reached[idx] {
            report.warnings.push(Finding {
                code: FindingCode::Unreachable,
                message: format!("not reachable from root `{}`", model.root),
                subject: sym.to_string(),
            });
        }
    }

    for rule in &model.rules {
        if rule.membership == 0.0 {
            report.warnings.push(Finding {
                code: FindingCode::ZeroMembership,
                message: "membership is 0; the rule contributes nothing".into(),
                subject: rule.id.to_string(),
            });
        }
    }

    report
}

/// Symbols grouped by lhs, handy for serializers that need declaration
/// lines.
pub(crate) fn lhs_set(rules: &[FuzzyRule]) -> BTreeSet<&SymbolId> {
    rules.iter().map(|r| &r.lhs).collect()
}

pub(crate) fn rhs_set(rules: &[FuzzyRule]) -> BTreeSet<&SymbolId> {
    rules.iter().flat_map(|r| r.rhs.iter()).collect()
}
