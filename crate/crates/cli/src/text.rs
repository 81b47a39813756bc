//! Human-readable renderings for the terminal.

use recourse::cfe::{CfeResult, Classification, Interpolant, Label};
use recourse::schema::{format_scaled, FeatureSchema, Instance, Value};

fn show(schema: &FeatureSchema, inst: &Instance, feature: &str) -> String {
    let scale = schema.get(feature).map(|f| f.scale()).unwrap_or(0);
    match inst.get(feature) {
        Some(Value::Num(n)) => format_scaled(*n, scale),
        Some(v) => v.to_string(),
        None => "?".into(),
    }
}

pub fn instance(schema: &FeatureSchema, inst: &Instance) -> String {
    schema
        .features()
        .iter()
        .filter(|f| inst.get(&f.name).is_some())
        .map(|f| format!("{}={}", f.name, show(schema, inst, &f.name)))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn classification(c: &Classification) -> String {
    let kind = match c.label {
        Label::Undesired => "undesired",
        Label::Desired => "desired",
    };
    format!("label: {} ({kind})\njustification:\n{}", c.label_text, c.justification.render())
}

/// One result: its controls, then each changed feature as `pre -> post`,
/// with the admissible range for numeric ones.
pub fn result(schema: &FeatureSchema, r: &CfeResult, with_factual: bool) -> String {
    let mut out = format!("cost {}  controls {}\n", r.cost, r.controls);
    if with_factual {
        out.push_str(&format!("  factual: {}\n", instance(schema, &r.factual)));
    }
    for f in r.controls.changed(schema) {
        let scale = schema.get(f).map(|d| d.scale()).unwrap_or(0);
        out.push_str(&format!("  {f}: {} -> {}", show(schema, &r.factual, f), show(schema, &r.counterfactual, f)));
        if let Some((lo, hi)) = r.intervals.get(f) {
            out.push_str(&format!("  (any of {}..{})", format_scaled(*lo, scale), format_scaled(*hi, scale)));
        }
        out.push('\n');
    }
    out
}

pub fn results(schema: &FeatureSchema, rs: &[CfeResult], with_factual: bool) -> String {
    if rs.is_empty() {
        return "no counterfactuals\n".into();
    }
    rs.iter().enumerate().map(|(i, r)| format!("[{}] {}", i + 1, result(schema, r, with_factual))).collect()
}

pub fn interpolant(schema: &FeatureSchema, i: &Interpolant) -> String {
    match i {
        Interpolant::NoRecourse => "no recourse: no allowed change reaches the desired label\n".into(),
        Interpolant::Found { cost, results: rs } => {
            format!("X* = {cost} (changes {})\n{}", i.features(schema).join(", "), results(schema, rs, false))
        }
    }
}
