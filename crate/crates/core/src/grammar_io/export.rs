use std::fmt::Write;

use serde_json::{json, Map, Number, Value};
use thiserror::Error;

use super::format_weight;
use crate::engine::ImpactMatrix;
use crate::model::TreatmentModel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExportError {
    #[error("impact matrix was computed from a different model")]
    MatrixModelMismatch,
}

/// Integral values become JSON integers so `1` and `0` render like
/// [`format_weight`] does.
pub(crate) fn json_number(value: f64) -> Value {
    if value == 0.0 {
        Value::from(0u8)
    } else if value == 1.0 {
        Value::from(1u8)
    } else {
        Number::from_f64(value).map_or(Value::Null, Value::Number)
    }
}

/// Pretty-printed JSON document describing the model and, optionally, its
/// impact matrix.
pub fn export_json(
    model: &TreatmentModel,
    matrix: Option<&ImpactMatrix>,
) -> Result<String, ExportError> {
    let mut doc = Map::new();
    doc.insert("root".into(), json!(model.root().as_str()));
    doc.insert(
        "goals".into(),
        model.goals().iter().map(|g| g.as_str()).collect(),
    );
    doc.insert(
        "interventions".into(),
        model.interventions().iter().map(|i| i.as_str()).collect(),
    );
    let rules: Vec<Value> = model
        .rules()
        .iter()
        .map(|r| {
            json!({
                "id": r.id.as_str(),
                "lhs": r.lhs.as_str(),
                "rhs": r.rhs.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
                "membership": json_number(r.membership),
            })
        })
        .collect();
    doc.insert("rules".into(), Value::Array(rules));

    if let Some(matrix) = matrix {
        if matrix.fingerprint() != model.fingerprint() {
            return Err(ExportError::MatrixModelMismatch);
        }
        let mut impact = Map::new();
        for (row, goal) in matrix.goals().iter().enumerate() {
            let cells: Map<String, Value> = matrix
                .interventions()
                .iter()
                .zip(matrix.row(row))
                .map(|(iv, &v)| (iv.to_string(), json_number(v)))
                .collect();
            impact.insert(goal.to_string(), Value::Object(cells));
        }
        doc.insert("impact".into(), Value::Object(impact));
    }

    let mut text =
        serde_json::to_string_pretty(&Value::Object(doc)).expect("JSON values serialize");
    text.push('\n');
    Ok(text)
}

/// `goal,<interventions...>` header then one row per goal, root first.
pub fn export_csv(matrix: &ImpactMatrix) -> String {
    let mut out = String::from("goal");
    for iv in matrix.interventions() {
        write!(out, ",{iv}").unwrap();
    }
    out.push('\n');
    for (row, goal) in matrix.goals().iter().enumerate() {
        out.push_str(goal.as_str());
        for &v in matrix.row(row) {
            write!(out, ",{}", format_weight(v)).unwrap();
        }
        out.push('\n');
    }
    out
}

fn quote(id: &str) -> String {
    format!("\"{}\"", id.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz rendering. Goals are ellipses, interventions boxes. A rule with
/// several rhs symbols gets a point-shaped junction node; the membership
/// labels the edge into the junction.
pub fn export_dot(model: &TreatmentModel) -> String {
    let mut out = String::new();
    out.push_str("digraph treatment_model {\n");
    out.push_str("  rankdir=TB;\n");
    out.push_str("  node [fontname=\"Helvetica\"];\n");
    out.push_str("  edge [fontname=\"Helvetica\", fontsize=10];\n");

    for goal in model.goals_root_first() {
        let extra = if goal == model.root() {
            ", peripheries=2"
        } else {
            ""
        };
        writeln!(out, "  {} [shape=ellipse{extra}];", quote(goal.as_str())).unwrap();
    }
    for iv in model.interventions() {
        writeln!(out, "  {} [shape=box];", quote(iv.as_str())).unwrap();
    }

    for rule in model.rules() {
        let lhs = quote(rule.lhs.as_str());
        let label = format_weight(rule.membership);
        if let [only] = rule.rhs.as_slice() {
            writeln!(
                out,
                "  {lhs} -> {} [label=\"{label}\", tooltip=\"{}\"];",
                quote(only.as_str()),
                rule.id
            )
            .unwrap();
        } else {
            // `/` can't occur in a symbol token, so junction ids never collide.
            let junction = quote(&format!("{}/and", rule.id));
            writeln!(
                out,
                "  {junction} [shape=point, width=0.08, label=\"\", tooltip=\"{}\"];",
                rule.id
            )
            .unwrap();
            writeln!(
                out,
                "  {lhs} -> {junction} [label=\"{label}\", arrowhead=none];"
            )
            .unwrap();
            for sym in &rule.rhs {
                writeln!(out, "  {junction} -> {};", quote(sym.as_str())).unwrap();
            }
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::impact_matrix;
    use crate::grammar_io::parse_model;

    fn minimal() -> TreatmentModel {
        parse_model("root s\np1: s -> i1 @ 0.5\n").unwrap()
    }

    #[test]
    fn json_minimal() {
        let text = export_json(&minimal(), None).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["rules"].as_array().unwrap().len(), 1);
        assert_eq!(v["root"], "s");
        assert!(v.get("impact").is_none());
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["root", "goals", "interventions", "rules"]);
    }

    #[test]
    fn json_sample_with_impact() {
        let m = crate::sample::model();
        let mx = impact_matrix(&m);
        let text = export_json(&m, Some(&mx)).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["impact"]["s"]["i1"].as_f64(), Some(0.9));
        assert_eq!(v["impact"]["g4"]["i1"], json!(0));
        assert_eq!(text, export_json(&m, Some(&mx)).unwrap());
    }

    #[test]
    fn json_mismatch() {
        let other = impact_matrix(&minimal());
        assert_eq!(
            export_json(&crate::sample::model(), Some(&other)),
            Err(ExportError::MatrixModelMismatch)
        );
    }

    #[test]
    fn csv_rows() {
        let m = crate::sample::model();
        let csv = export_csv(&impact_matrix(&m));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "goal,i1,i2,i3,i4,i5,i6,i7,i8,i9,i10");
        assert_eq!(lines[1], "s,0.9,0.7,0.6,0.85,0.8,0.7,0.7,0.65,0.6,0.6");
        assert!(lines.contains(&"g4,0,0,0.6,0,0,0,0,0,0,0"));
        let g11 = lines.iter().find(|l| l.starts_with("g11,")).unwrap();
        assert!(g11.ends_with(",0.8,0.85"));
        assert_eq!(lines.len(), 13);
    }

    #[test]
    fn csv_single_pair() {
        let m = parse_model("root s\np: s -> i1 @ 1\n").unwrap();
        assert_eq!(export_csv(&impact_matrix(&m)), "goal,i1\ns,1\n");
    }

    #[test]
    fn dot_minimal() {
        let dot = export_dot(&minimal());
        assert_eq!(dot.matches("shape=ellipse").count(), 1);
        assert_eq!(dot.matches("shape=box").count(), 1);
        assert_eq!(dot.matches("shape=point").count(), 0);
        assert_eq!(dot.matches(" -> ").count(), 1);
        assert!(dot.contains("\"s\" -> \"i1\" [label=\"0.5\""));
    }

    #[test]
    fn dot_sample_junctions() {
        let dot = export_dot(&crate::sample::model());
        assert_eq!(dot.matches("shape=point").count(), 3);
        assert_eq!(
            dot.matches("shape=ellipse").count() + dot.matches("shape=box").count(),
            22
        );
        assert!(dot.contains("\"s\" -> \"p1/and\" [label=\"0.95\", arrowhead=none];"));
        assert!(dot.contains("\"p5/and\" -> \"i2\";"));
    }
}
