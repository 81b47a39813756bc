//! Justification trees: how each goal literal of a solution was established.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use serde_json::{json, Value as Json};
use thiserror::Error;

use super::store::{ConstraintStore, Operand, StoreError};
use crate::dual::DualProgram;
use crate::rulelang::{Atom, BodyLiteral, CmpOp, Decimal, Head, Rule, Term};
use crate::schema::{FeatureKind, FeatureSchema};
use crate::symbol::Symbol;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// Resolved with clause `clause` (1-based, textual order) of the predicate.
    Proved { clause: usize },
    /// Resolved with dual clause `clause` (1-based) of the negated predicate.
    ProvedViaDual { clause: usize },
    /// An abducible choice: `feature` is the domain feature (or the predicate
    /// name for explicit two-value choices).
    Abduced { feature: String, value: Symbol },
    /// Comparison, domain membership or range typing checked by the store.
    ConstraintSatisfied,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Proved { clause } => write!(f, "proved (clause {clause})"),
            Outcome::ProvedViaDual { clause } => write!(f, "proved-via-dual (clause {clause})"),
            Outcome::Abduced { feature, value } => write!(f, "abduced({feature}, {value})"),
            Outcome::ConstraintSatisfied => f.write_str("constraint-satisfied"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Justification {
    pub goal: BodyLiteral,
    pub outcome: Outcome,
    pub children: Vec<Justification>,
}

impl Justification {
    /// Indented text, two spaces per level: `<goal> ← <outcome>`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0);
        out
    }

    fn render_into(&self, out: &mut String, depth: usize) {
        let _ = writeln!(out, "{:width$}{} ← {}", "", self.goal, self.outcome, width = depth * 2);
        for c in &self.children {
            c.render_into(out, depth + 1);
        }
    }

    pub fn to_json(&self) -> Json {
        let mut obj = serde_json::Map::new();
        obj.insert("goal".into(), json!(self.goal.to_string()));
        match &self.outcome {
            Outcome::Proved { clause } => {
                obj.insert("outcome".into(), json!("proved"));
                obj.insert("clause".into(), json!(clause));
            }
            Outcome::ProvedViaDual { clause } => {
                obj.insert("outcome".into(), json!("proved-via-dual"));
                obj.insert("clause".into(), json!(clause));
            }
            Outcome::Abduced { feature, value } => {
                obj.insert("outcome".into(), json!("abduced"));
                obj.insert("feature".into(), json!(feature));
                obj.insert("value".into(), json!(value.as_str()));
            }
            Outcome::ConstraintSatisfied => {
                obj.insert("outcome".into(), json!("constraint-satisfied"));
            }
        }
        obj.insert("children".into(), Json::Array(self.children.iter().map(Justification::to_json).collect()));
        Json::Object(obj)
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Justification::size).sum::<usize>()
    }

    /// Depth-first iterator over nodes.
    pub fn nodes(&self) -> Vec<&Justification> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.nodes());
        }
        out
    }
}

/// Renders a forest, one tree after another.
pub fn render_forest(trees: &[Justification]) -> String {
    trees.iter().map(Justification::render).collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("`{goal}`: {msg}")]
    Mismatch { goal: String, msg: String },
    #[error("`{goal}` is not ground")]
    NotGround { goal: String },
    #[error("abducible {pred} takes both {a} and {b}")]
    Exclusivity { pred: String, a: String, b: String },
}

/// Re-checks a ground justification forest against the program: every
/// internal node must be an instance of the clause it names with children
/// matching the clause body in order, and every leaf must hold on its own.
pub fn replay(trees: &[Justification], program: &DualProgram, schema: &FeatureSchema) -> Result<(), ReplayError> {
    let mut choices: BTreeMap<String, Symbol> = BTreeMap::new();
    for t in trees {
        replay_node(t, program, schema, &mut choices)?;
    }
    Ok(())
}

fn mismatch(goal: &BodyLiteral, msg: impl Into<String>) -> ReplayError {
    ReplayError::Mismatch { goal: goal.to_string(), msg: msg.into() }
}

fn replay_node(
    j: &Justification,
    program: &DualProgram,
    schema: &FeatureSchema,
    choices: &mut BTreeMap<String, Symbol>,
) -> Result<(), ReplayError> {
    if j.goal.terms().iter().any(|t| matches!(t, Term::Var(_))) {
        return Err(ReplayError::NotGround { goal: j.goal.to_string() });
    }
    match &j.outcome {
        Outcome::ConstraintSatisfied => {
            if !j.children.is_empty() {
                return Err(mismatch(&j.goal, "constraint node has children"));
            }
            if !leaf_holds(&j.goal, program, schema) {
                return Err(mismatch(&j.goal, "does not hold"));
            }
        }
        Outcome::Abduced { value, .. } => {
            let (atom, positive) = match &j.goal {
                BodyLiteral::Pos(a) => (a, true),
                BodyLiteral::Naf(a) => (a, false),
                _ => return Err(mismatch(&j.goal, "abduced node is a comparison")),
            };
            let src = &program.source;
            let (pred, positive) = match (src.abducible(&atom.pred), src.abducible_for_complement(&atom.pred)) {
                (Some(a), _) => (a.pred.clone(), positive),
                (None, Some(a)) => (a.pred.clone(), !positive),
                _ => return Err(mismatch(&j.goal, "not an abducible")),
            };
            if let Some(prev) = choices.get(&pred) {
                if prev != value {
                    return Err(ReplayError::Exclusivity { pred, a: prev.to_string(), b: value.to_string() });
                }
            }
            choices.insert(pred, value.clone());
            let arg_is_value = matches!(&atom.args[0], Term::Sym(s) if s == value);
            if arg_is_value != positive {
                return Err(mismatch(&j.goal, format!("inconsistent with choice {value}")));
            }
        }
        Outcome::Proved { clause } => {
            let BodyLiteral::Pos(atom) = &j.goal else {
                return Err(mismatch(&j.goal, "proved node is not a positive atom"));
            };
            let clauses = program.source.clauses(&atom.key());
            let rule = clauses.get(clause.wrapping_sub(1)).ok_or_else(|| mismatch(&j.goal, "no such clause"))?;
            check_instance(j, atom, rule)?;
        }
        Outcome::ProvedViaDual { clause } => {
            let BodyLiteral::Naf(atom) = &j.goal else {
                return Err(mismatch(&j.goal, "dual node is not a negated atom"));
            };
            let duals = program.duals_for(&atom.key());
            let rule = duals.get(clause.wrapping_sub(1)).ok_or_else(|| mismatch(&j.goal, "no such dual clause"))?;
            check_instance(j, atom, rule)?;
        }
    }
    for c in &j.children {
        replay_node(c, program, schema, choices)?;
    }
    Ok(())
}

fn check_instance(j: &Justification, atom: &Atom, rule: &Rule) -> Result<(), ReplayError> {
    let head = match &rule.head {
        Head::Atom(h) | Head::Negated(h) => h,
        Head::Constraint => return Err(mismatch(&j.goal, "constraint used as clause")),
    };
    let mut env = HashMap::new();
    for (p, g) in head.args.iter().zip(&atom.args) {
        if !match_term(p, g, &mut env) {
            return Err(mismatch(&j.goal, format!("does not match head of `{rule}`")));
        }
    }
    if rule.body.len() != j.children.len() {
        return Err(mismatch(&j.goal, format!("{} children for a body of {}", j.children.len(), rule.body.len())));
    }
    for (lit, child) in rule.body.iter().zip(&j.children) {
        let ok = match (lit, &child.goal) {
            (BodyLiteral::Pos(p), BodyLiteral::Pos(g)) | (BodyLiteral::Naf(p), BodyLiteral::Naf(g)) => {
                p.pred == g.pred
                    && p.args.len() == g.args.len()
                    && p.args.iter().zip(&g.args).all(|(p, g)| match_term(p, g, &mut env))
            }
            (BodyLiteral::Cmp { lhs, op, rhs }, BodyLiteral::Cmp { lhs: gl, op: gop, rhs: grhs }) => {
                op == gop && match_term(lhs, gl, &mut env) && match_term(rhs, grhs, &mut env)
            }
            _ => false,
        };
        if !ok {
            return Err(mismatch(&child.goal, format!("is not an instance of `{lit}` in `{rule}`")));
        }
    }
    Ok(())
}

fn match_term(pattern: &Term, ground: &Term, env: &mut HashMap<String, Term>) -> bool {
    match pattern {
        Term::Var(v) if v == "_" => true,
        Term::Var(v) => match env.get(v) {
            Some(bound) => same_value(bound, ground),
            None => {
                env.insert(v.clone(), ground.clone());
                true
            }
        },
        c => same_value(c, ground),
    }
}

fn same_value(a: &Term, b: &Term) -> bool {
    match (a, b) {
        (Term::Num(x), Term::Num(y)) => num_eq(*x, *y),
        _ => a == b,
    }
}

fn num_eq(x: Decimal, y: Decimal) -> bool {
    let s = x.scale.max(y.scale);
    x.to_scale(s) == y.to_scale(s)
}

fn operand(t: &Term) -> Operand {
    match t {
        Term::Sym(s) => Operand::Sym(s.clone()),
        Term::Num(d) => Operand::Num(*d),
        Term::Var(_) => unreachable!("ground"),
    }
}

fn leaf_holds(goal: &BodyLiteral, program: &DualProgram, schema: &FeatureSchema) -> bool {
    let scale = schema.max_scale();
    let cmp = |a: &Term, op: CmpOp, b: &Term| -> bool {
        let s = ConstraintStore::new(scale);
        match s.with(operand(a), op, operand(b)) {
            Ok(_) => true,
            Err(StoreError::Infeasible) => false,
            Err(_) => false,
        }
    };
    match goal {
        BodyLiteral::Cmp { lhs, op, rhs } => cmp(lhs, *op, rhs),
        BodyLiteral::Pos(a) | BodyLiteral::Naf(a) => {
            let positive = matches!(goal, BodyLiteral::Pos(_));
            if a.pred == "f_domain" && a.args.len() == 2 {
                let Term::Sym(f) = &a.args[0] else { return false };
                let Some(domain) = schema.get(f.as_str()).and_then(|d| d.domain()) else { return false };
                let member = matches!(&a.args[1], Term::Sym(v) if domain.contains(v));
                return member == positive;
            }
            if a.args.len() == 1 && !program.source.defines(&a.key()) {
                if let Some(FeatureKind::Numeric { min, max, scale: fs }) = schema.get(&a.pred).map(|d| &d.kind) {
                    let lo = Term::Num(Decimal { mantissa: *min, scale: *fs });
                    let hi = Term::Num(Decimal { mantissa: *max, scale: *fs });
                    let within = matches!(&a.args[0], Term::Num(_))
                        && cmp(&a.args[0], CmpOp::Ge, &lo)
                        && cmp(&a.args[0], CmpOp::Le, &hi)
                        && matches!(&a.args[0], Term::Num(d) if d.to_scale(*fs).is_some());
                    return within == positive;
                }
            }
            false
        }
    }
}
