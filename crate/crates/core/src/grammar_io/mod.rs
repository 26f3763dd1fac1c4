//! Concrete syntax for treatment models and exporters for analysis results.

mod export;
mod parse;

pub(crate) use export::json_number;
pub use export::{export_csv, export_dot, export_json, ExportError};
pub use parse::{parse_model, ParseError, ParseErrorKind};

use std::fmt::Write;

use crate::model::{lhs_set, rhs_set, TreatmentModel};

/// Shortest decimal rendering that parses back to the same value
/// (`0.9`, `1`, `0`).
pub fn format_weight(value: f64) -> String {
    if value == 0.0 {
        // also folds -0
        return "0".to_string();
    }
    format!("{value}")
}

/// Canonical `.gotm` text: `root` first, declarations only for symbols whose
/// kind can't be inferred from the rules, then rules in stored order.
pub fn serialize_model(model: &TreatmentModel) -> String {
    let mut out = String::new();
    writeln!(out, "root {}", model.root()).unwrap();

    let lhs = lhs_set(model.rules());
    let rhs = rhs_set(model.rules());
    let goals: Vec<_> = model.goals().iter().filter(|g| !lhs.contains(g)).collect();
    let interventions: Vec<_> = model
        .interventions()
        .iter()
        .filter(|i| !rhs.contains(i))
        .collect();
    if !goals.is_empty() {
        let names: Vec<&str> = goals.iter().map(|g| g.as_str()).collect();
        writeln!(out, "goal {}", names.join(", ")).unwrap();
    }
    if !interventions.is_empty() {
        let names: Vec<&str> = interventions.iter().map(|i| i.as_str()).collect();
        writeln!(out, "intervention {}", names.join(", ")).unwrap();
    }

    for rule in model.rules() {
        let rhs: Vec<&str> = rule.rhs.iter().map(|s| s.as_str()).collect();
        writeln!(
            out,
            "{}: {} -> {} @ {}",
            rule.id,
            rule.lhs,
            rhs.join(" "),
            format_weight(rule.membership)
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights() {
        assert_eq!(format_weight(0.9), "0.9");
        assert_eq!(format_weight(1.0), "1");
        assert_eq!(format_weight(0.0), "0");
        assert_eq!(format_weight(-0.0), "0");
        assert_eq!(format_weight(0.05 * 3.0), "0.15000000000000002");
        assert_eq!(format_weight(3.0 / 20.0), "0.15");
        assert_eq!(format_weight(1e-9), "0.000000001");
    }

    #[test]
    fn minimal_canonical_form() {
        let m = parse_model("root   s\n\np1 : s->i1 @0.50 # note\n").unwrap();
        assert_eq!(serialize_model(&m), "root s\np1: s -> i1 @ 0.5\n");
    }

    #[test]
    fn sample_round_trip() {
        let m = crate::sample::model();
        let text = serialize_model(&m);
        assert_eq!(text.lines().count(), 17);
        assert!(text.lines().any(|l| l == "p5: g3 -> g6 g7 g8 i2 @ 0.7"));
        assert_eq!(parse_model(&text).unwrap(), m);
    }

    #[test]
    fn declarations_survive_round_trip() {
        let src = "root s\ngoal g9\nintervention x, y\np1: s -> g9 i1 @ 0.25\n";
        let m = parse_model(src).unwrap();
        assert_eq!(serialize_model(&m), src);
        assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
    }
}
