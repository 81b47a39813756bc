//! Causal constraint rules: ordinary predicates relating feature values that
//! every admissible world (factual or counterfactual) must satisfy.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::engine::{Engine, EngineError, SolveOptions};
use crate::rulelang::{Atom, BodyLiteral, Decimal, Directive, PredKey, Program, Section, Term};
use crate::schema::{format_scaled, FeatureKind, FeatureSchema};
use crate::Symbol;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CausalError {
    #[error("causal predicate {pred} has no feature mapping (add `#causal {pred}(...)`)")]
    Unmapped { pred: String },
    #[error("causal predicate {pred} maps unknown feature `{feature}`")]
    UnknownFeature { pred: String, feature: String },
    #[error("no world variable for feature `{feature}` (needed by {pred})")]
    MissingVariable { pred: String, feature: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// A causal constraint predicate with the feature behind each argument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CausalPredicate {
    pub pred: String,
    pub features: Vec<String>,
}

impl CausalPredicate {
    pub fn key(&self) -> PredKey {
        PredKey::new(&self.pred, self.features.len())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CausalRuleSet {
    predicates: Vec<CausalPredicate>,
}

impl CausalRuleSet {
    pub fn new(predicates: Vec<CausalPredicate>) -> Self {
        CausalRuleSet { predicates }
    }

    /// Reads `#causal` directives. Every predicate defined in the causal
    /// section must be declared or be a helper called from that section.
    pub fn from_program(p: &Program) -> Result<Self, CausalError> {
        let predicates: Vec<CausalPredicate> = p
            .directives()
            .filter_map(|d| match d {
                Directive::Causal { pred, features } => {
                    Some(CausalPredicate { pred: pred.clone(), features: features.clone() })
                }
                _ => None,
            })
            .collect();
        let declared: BTreeSet<PredKey> = predicates.iter().map(CausalPredicate::key).collect();
        let mut called = BTreeSet::new();
        let mut defined = BTreeSet::new();
        for r in p.rules_in(Section::Causal) {
            if let Some(h) = r.head_atom() {
                defined.insert(h.key());
            }
            for l in &r.body {
                if let Some(a) = l.atom() {
                    called.insert(a.key());
                }
            }
        }
        for k in defined {
            if !declared.contains(&k) && !called.contains(&k) {
                return Err(CausalError::Unmapped { pred: k.name });
            }
        }
        Ok(CausalRuleSet { predicates })
    }

    pub fn predicates(&self) -> &[CausalPredicate] {
        &self.predicates
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    /// Features mentioned by any causal predicate.
    pub fn features(&self) -> BTreeSet<String> {
        self.predicates.iter().flat_map(|p| p.features.iter().cloned()).collect()
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<(), CausalError> {
        for p in &self.predicates {
            for f in &p.features {
                if schema.get(f).is_none() {
                    return Err(CausalError::UnknownFeature { pred: p.pred.clone(), feature: f.clone() });
                }
            }
        }
        Ok(())
    }
}

/// Appends one atom per causal predicate for each world, in the order the
/// worlds are given (pre first, then post). `worlds` maps feature names to
/// the term standing for that feature in the world.
pub fn apply_causal(
    goal: &mut Vec<BodyLiteral>,
    c: &CausalRuleSet,
    worlds: &[&BTreeMap<String, Term>],
) -> Result<(), CausalError> {
    for world in worlds {
        for p in &c.predicates {
            let args = p
                .features
                .iter()
                .map(|f| {
                    world
                        .get(f)
                        .cloned()
                        .ok_or_else(|| CausalError::MissingVariable { pred: p.pred.clone(), feature: f.clone() })
                })
                .collect::<Result<Vec<_>, _>>()?;
            goal.push(BodyLiteral::Pos(Atom::new(&p.pred, args)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredicateTotality {
    pub pred: String,
    pub features: Vec<String>,
    /// Tuples checked in the discretized cross product.
    pub tuples: usize,
    pub uncovered: usize,
    /// First uncovered tuple in enumeration order.
    pub counterexample: Option<Vec<String>>,
    /// `(feature, value)` pairs for which the predicate is unsatisfiable
    /// whatever the other arguments are. Such a value can never occur in
    /// any world, which usually means a catch-all clause is missing.
    pub deleted_values: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TotalityReport {
    pub predicates: Vec<PredicateTotality>,
}

impl TotalityReport {
    /// Every tuple of every predicate is covered.
    pub fn strictly_total(&self) -> bool {
        self.predicates.iter().all(|p| p.uncovered == 0)
    }

    /// No predicate deletes a feature value outright.
    pub fn total(&self) -> bool {
        self.predicates.iter().all(|p| p.deleted_values.is_empty())
    }
}

#[derive(Debug, Clone)]
enum Point {
    Sym(Symbol),
    /// Value in feature units and the feature's scale.
    Num(i64, u32),
}

impl Point {
    fn term(&self) -> Term {
        match self {
            Point::Sym(s) => Term::Sym(s.clone()),
            Point::Num(n, scale) => Term::Num(Decimal { mantissa: *n, scale: *scale }),
        }
    }

    fn show(&self) -> String {
        match self {
            Point::Sym(s) => s.as_str().to_string(),
            Point::Num(n, s) => format_scaled(*n, *s),
        }
    }
}

/// Numeric constants of the program, used as discretization boundaries.
fn constants(p: &Program) -> Vec<Decimal> {
    let mut out = Vec::new();
    for r in p.rules() {
        for l in &r.body {
            for t in l.terms() {
                if let Term::Num(d) = t {
                    out.push(*d);
                }
            }
        }
    }
    out
}

/// Discretized values: the whole domain for categorical features; the
/// bounds plus each constant and its neighbours for numeric ones.
fn discretize(schema: &FeatureSchema, feature: &str, consts: &[Decimal]) -> Vec<Point> {
    let def = schema.get(feature).expect("validated feature");
    match &def.kind {
        FeatureKind::Categorical { values } => values.iter().cloned().map(Point::Sym).collect(),
        FeatureKind::Numeric { min, max, scale } => {
            let mut pts = BTreeSet::from([*min, *max]);
            for c in consts {
                let (Some(lo), Some(hi)) = (c.floor_at(*scale), c.ceil_at(*scale)) else { continue };
                for x in [lo - 1, lo, hi, hi + 1] {
                    if x >= *min && x <= *max {
                        pts.insert(x);
                    }
                }
            }
            pts.into_iter().map(|n| Point::Num(n, *scale)).collect()
        }
    }
}

fn typing_literal(schema: &FeatureSchema, feature: &str, var: Term) -> BodyLiteral {
    if schema.get(feature).is_some_and(|d| d.is_categorical()) {
        BodyLiteral::Pos(Atom::new("f_domain", vec![Term::sym(feature), var]))
    } else {
        BodyLiteral::Pos(Atom::new(feature, vec![var]))
    }
}

fn satisfiable(engine: &Engine, goal: &[BodyLiteral]) -> Result<bool, CausalError> {
    let mut it = engine.solve(goal, SolveOptions { max_solutions: Some(1), ..SolveOptions::default() })?;
    match it.next() {
        None => Ok(false),
        Some(Ok(_)) => Ok(true),
        Some(Err(e)) => Err(e.into()),
    }
}

/// Whether `pred` holds for a ground tuple (values given as rule terms).
pub fn covers(engine: &Engine, pred: &str, tuple: &[Term]) -> Result<bool, CausalError> {
    satisfiable(engine, &[BodyLiteral::Pos(Atom::new(pred, tuple.to_vec()))])
}

/// Checks each causal predicate against the discretized cross product of
/// its features (strict coverage) and for values it deletes outright.
pub fn check_totality(c: &CausalRuleSet, engine: &Engine) -> Result<TotalityReport, CausalError> {
    let schema = engine.schema();
    c.validate(schema)?;
    let consts = constants(&engine.program().source);
    let mut predicates = Vec::new();
    for p in &c.predicates {
        let axes: Vec<Vec<Point>> = p.features.iter().map(|f| discretize(schema, f, &consts)).collect();

        // Mixed-radix enumeration, last axis fastest.
        let tuples: usize = axes.iter().map(Vec::len).product();
        let mut uncovered = 0;
        let mut counterexample = None;
        for n in 0..tuples {
            let mut rest = n;
            let mut idx = vec![0usize; axes.len()];
            for i in (0..axes.len()).rev() {
                idx[i] = rest % axes[i].len();
                rest /= axes[i].len();
            }
            let tuple: Vec<Term> = idx.iter().enumerate().map(|(i, &k)| axes[i][k].term()).collect();
            if !covers(engine, &p.pred, &tuple)? {
                uncovered += 1;
                if counterexample.is_none() {
                    counterexample = Some(idx.iter().enumerate().map(|(i, &k)| axes[i][k].show()).collect());
                }
            }
        }

        let mut deleted_values = Vec::new();
        for (i, f) in p.features.iter().enumerate() {
            for v in &axes[i] {
                let mut goal = Vec::new();
                let args: Vec<Term> =
                    (0..p.features.len()).map(|j| if j == i { v.term() } else { Term::Var(format!("V{j}")) }).collect();
                for (j, g) in p.features.iter().enumerate() {
                    if j != i {
                        goal.push(typing_literal(schema, g, Term::Var(format!("V{j}"))));
                    }
                }
                goal.push(BodyLiteral::Pos(Atom::new(&p.pred, args)));
                if !satisfiable(engine, &goal)? {
                    deleted_values.push((f.clone(), v.show()));
                }
            }
        }
        predicates.push(PredicateTotality {
            pred: p.pred.clone(),
            features: p.features.clone(),
            tuples,
            uncovered,
            counterexample,
            deleted_values,
        });
    }
    Ok(TotalityReport { predicates })
}
