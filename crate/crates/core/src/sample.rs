//! The bundled sample treatment model (12 goals, 10 interventions,
//! 16 rules).

use crate::model::{build_model, FuzzyRule, SymbolId, TreatmentModel};

/// `.gotm` source of the sample model.
pub const SOURCE: &str = include_str!("../examples/sample.gotm");

const RULES: [(&str, &str, &[&str], f64); 16] = [
    ("p1", "s", &["g1", "g2"], 0.95),
    ("p2", "g1", &["g3"], 0.9),
    ("p3", "g2", &["g3", "g4", "g5"], 0.85),
    ("p4", "g3", &["i1"], 0.9),
    ("p5", "g3", &["g6", "g7", "g8", "i2"], 0.7),
    ("p6", "g4", &["i3"], 0.6),
    ("p7", "g5", &["i4"], 0.9),
    ("p8", "g5", &["i5"], 0.8),
    ("p9", "g6", &["g9"], 0.75),
    ("p10", "g7", &["i6"], 0.85),
    ("p11", "g8", &["i7"], 0.75),
    ("p12", "g8", &["g10"], 0.65),
    ("p13", "g9", &["g11"], 0.6),
    ("p14", "g10", &["i8"], 0.85),
    ("p15", "g11", &["i9"], 0.8),
    ("p16", "g11", &["i10"], 0.85),
];

pub fn rules() -> Vec<FuzzyRule> {
    RULES
        .iter()
        .map(|(id, lhs, rhs, w)| FuzzyRule::parse(id, lhs, rhs, *w).expect("static rule"))
        .collect()
}

/// The sample model built directly from its rule table.
pub fn model() -> TreatmentModel {
    build_model(SymbolId::new("s").unwrap(), rules(), None, None).expect("sample model is valid")
}

#[cfg(test)]
mod tests {
    #[test]
    fn source_matches_rule_table() {
        assert_eq!(crate::parse_model(super::SOURCE).unwrap(), super::model());
    }
}
