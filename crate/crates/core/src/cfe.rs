//! Counterfactual search: pair a factual world that gets the undesired
//! label with a counterfactual world that does not, under per-feature
//! controls and the causal rules, and find the cheapest such pairs.
//!
//! Each cost level is queried separately with an exact control vector, so
//! a level with no answers is a definite "no recourse at this cost".

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::causal::{apply_causal, CausalError};
use crate::engine::{Dom, EngineError, Justification, Scalar, Solution, SolveOptions, StoreError, VarId, VarState};
use crate::rulelang::{Atom, BodyLiteral, CmpOp, Decimal, Phase, Term};
use crate::schema::{validate_instance, FeatureDef, FeatureKind, FeatureSchema, Instance, SchemaError, Value};
use crate::symbol::Symbol;
use crate::workspace::{world_predicate, Workspace};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CfeError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Causal(#[from] CausalError),
    #[error("instance is partial, missing {}", .0.join(", "))]
    PartialInstance(Vec<String>),
    #[error("instance is already classified `{0}`, nothing to explain")]
    AlreadyDesired(String),
    #[error("control on `{feature}` contradicts the factual instance: {msg}")]
    ControlConflict { feature: String, msg: String },
    #[error("every feature is immutable")]
    NoMutableFeature,
    #[error("control `{control}` does not apply to {kind} feature `{feature}`")]
    InvalidControl { feature: String, control: Control, kind: &'static str },
    #[error("`{a}` and `{b}` are not both in the domain of `{feature}`")]
    CrossDomain { feature: String, a: String, b: String },
    #[error("classification is inconsistent: {0}")]
    Inconsistent(String),
}

impl CfeError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            CfeError::Schema(_) => "invalid-instance",
            CfeError::Engine(_) => "engine-error",
            CfeError::Causal(_) => "causal-error",
            CfeError::PartialInstance(_) => "partial-instance",
            CfeError::AlreadyDesired(_) => "already-desired",
            CfeError::ControlConflict { .. } => "control-conflict",
            CfeError::NoMutableFeature => "no-mutable-feature",
            CfeError::InvalidControl { .. } => "invalid-control",
            CfeError::CrossDomain { .. } => "cross-domain",
            CfeError::Inconsistent(_) => "inconsistent",
        }
    }
}

fn store_err(goal: &str) -> impl Fn(StoreError) -> CfeError + '_ {
    move |e| CfeError::Engine(EngineError::Store { goal: goal.to_string(), source: e })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    #[default]
    Any,
    Immutable,
    MustChange,
    MustIncrease,
    MustDecrease,
}

impl fmt::Display for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Control::Any => "any",
            Control::Immutable => "immutable",
            Control::MustChange => "must_change",
            Control::MustIncrease => "must_increase",
            Control::MustDecrease => "must_decrease",
        })
    }
}

/// Per-feature mutability. Features not mentioned are `Any`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlSpec {
    controls: BTreeMap<String, Control>,
}

impl ControlSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, feature: &str, c: Control) -> Self {
        self.controls.insert(feature.to_string(), c);
        self
    }

    pub fn immutable(features: &[&str]) -> Self {
        features.iter().fold(Self::new(), |s, f| s.set(f, Control::Immutable))
    }

    pub fn all_immutable(schema: &FeatureSchema) -> Self {
        schema.features().iter().fold(Self::new(), |s, f| s.set(&f.name, Control::Immutable))
    }

    pub fn get(&self, feature: &str) -> Control {
        self.controls.get(feature).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Control)> {
        self.controls.iter().map(|(f, c)| (f.as_str(), *c))
    }

    pub fn from_json(json: &Json) -> Result<Self, SchemaError> {
        serde_json::from_value(json.clone()).map_err(|e| SchemaError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> Json {
        serde_json::to_value(self).unwrap_or(Json::Null)
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<(), CfeError> {
        for (f, c) in self.iter() {
            let def = schema.get(f).ok_or_else(|| SchemaError::UnknownFeature(f.to_string()))?;
            let bad = match (c, def.is_categorical()) {
                (Control::MustIncrease | Control::MustDecrease, true) => Some("categorical"),
                (Control::MustChange, false) => Some("numeric"),
                _ => None,
            };
            if let Some(kind) = bad {
                return Err(CfeError::InvalidControl { feature: f.to_string(), control: c, kind });
            }
        }
        Ok(())
    }

    /// Allowed control values for one feature, ascending.
    fn options(&self, def: &FeatureDef) -> Vec<i8> {
        match (self.get(&def.name), def.is_categorical()) {
            (Control::Immutable, _) => vec![0],
            (Control::MustChange | Control::MustIncrease, _) => vec![1],
            (Control::MustDecrease, _) => vec![-1],
            (Control::Any, true) => vec![0, 1],
            (Control::Any, false) => vec![-1, 0, 1],
        }
    }
}

/// One entry per feature in schema order: 0 unchanged, 1 changed
/// (categorical) or increased (numeric), -1 decreased.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ControlVector(pub Vec<i8>);

impl ControlVector {
    pub fn to_json(&self, schema: &FeatureSchema) -> Json {
        let map = schema.features().iter().zip(&self.0).map(|(f, z)| (f.name.clone(), json!(z))).collect();
        Json::Object(map)
    }

    /// Names of features with a nonzero entry.
    pub fn changed<'a>(&self, schema: &'a FeatureSchema) -> Vec<&'a str> {
        schema.features().iter().zip(&self.0).filter(|(_, z)| **z != 0).map(|(f, _)| f.name.as_str()).collect()
    }
}

impl fmt::Display for ControlVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|z| z.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

pub fn compare_categorical(def: &FeatureDef, pre: &Symbol, post: &Symbol) -> Result<i8, CfeError> {
    let domain = def.domain().unwrap_or(&[]);
    if !domain.contains(pre) || !domain.contains(post) {
        return Err(CfeError::CrossDomain { feature: def.name.clone(), a: pre.to_string(), b: post.to_string() });
    }
    Ok(i8::from(pre != post))
}

pub fn compare_numeric(pre: i64, post: i64) -> i8 {
    match post.cmp(&pre) {
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
        std::cmp::Ordering::Greater => 1,
    }
}

/// Sum of squared entries, i.e. the number of changed features.
pub fn intervention_cost(z: &ControlVector) -> u32 {
    z.0.iter().map(|&v| (i32::from(v) * i32::from(v)) as u32).sum()
}

/// Controls recomputed from two total instances.
pub fn controls_between(schema: &FeatureSchema, pre: &Instance, post: &Instance) -> Result<ControlVector, CfeError> {
    let mut z = Vec::with_capacity(schema.len());
    for def in schema.features() {
        let missing = || CfeError::PartialInstance(vec![def.name.clone()]);
        let (a, b) = (pre.get(&def.name).ok_or_else(missing)?, post.get(&def.name).ok_or_else(missing)?);
        z.push(match (a, b) {
            (Value::Sym(a), Value::Sym(b)) => compare_categorical(def, a, b)?,
            (Value::Num(a), Value::Num(b)) => compare_numeric(*a, *b),
            _ => return Err(SchemaError::KindMismatch { feature: def.name.clone(), expected: "matching kinds" }.into()),
        });
    }
    Ok(ControlVector(z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Undesired,
    Desired,
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub label: Label,
    /// The label as named by the rules (`#labels`).
    pub label_text: String,
    pub justification: Justification,
}

impl Classification {
    pub fn to_json(&self) -> Json {
        json!({
            "label": self.label_text,
            "desired": self.label == Label::Desired,
            "justification": self.justification.to_json(),
        })
    }
}

/// Ground term for a feature value, at the feature's own scale.
pub fn value_term(def: &FeatureDef, v: &Value) -> Term {
    match v {
        Value::Sym(s) => Term::Sym(s.clone()),
        Value::Num(n) => Term::Num(Decimal { mantissa: *n, scale: def.scale() }),
    }
}

fn require_total(schema: &FeatureSchema, inst: &Instance) -> Result<(), CfeError> {
    let missing: Vec<String> =
        schema.features().iter().filter(|f| inst.get(&f.name).is_none()).map(|f| f.name.clone()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CfeError::PartialInstance(missing))
    }
}

/// Labels a total instance. The decision atom and its negation are both
/// queried; exactly one must succeed.
pub fn classify(ws: &Workspace, inst: &Instance) -> Result<Classification, CfeError> {
    let schema = ws.schema();
    let inst = validate_instance(schema, inst.clone())?;
    require_total(schema, &inst)?;
    let d = ws.decision();
    let args = d
        .features
        .iter()
        .map(|f| {
            let def = schema.get(f).ok_or_else(|| SchemaError::UnknownFeature(f.clone()))?;
            Ok(value_term(def, inst.get(f).ok_or_else(|| CfeError::PartialInstance(vec![f.clone()]))?))
        })
        .collect::<Result<Vec<_>, CfeError>>()?;
    let atom = Atom::new(&d.pred, args);
    let first = |lit: BodyLiteral| -> Result<Option<Justification>, CfeError> {
        match ws.engine().solve(&[lit], SolveOptions::limit(1))?.next() {
            None => Ok(None),
            Some(sol) => {
                let sol = sol?.witnessed()?;
                Ok(sol.justification.into_iter().next())
            }
        }
    };
    let pos = first(BodyLiteral::Pos(atom.clone()))?;
    let neg = first(BodyLiteral::Naf(atom.clone()))?;
    let labels = ws.labels();
    match (pos, neg) {
        (Some(j), None) => {
            Ok(Classification { label: Label::Undesired, label_text: labels.undesired.clone(), justification: j })
        }
        (None, Some(j)) => {
            Ok(Classification { label: Label::Desired, label_text: labels.desired.clone(), justification: j })
        }
        (Some(_), Some(_)) => Err(CfeError::Inconsistent(format!("both {atom} and not {atom} succeed"))),
        (None, None) => Err(CfeError::Inconsistent(format!("neither {atom} nor not {atom} succeeds"))),
    }
}

/// One factual/counterfactual pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfeResult {
    pub factual: Instance,
    pub counterfactual: Instance,
    /// Residual range of each numeric counterfactual feature once the
    /// factual world is fixed, at the feature's scale. The witness in
    /// `counterfactual` is the smallest value in it.
    pub intervals: BTreeMap<String, (i64, i64)>,
    pub controls: ControlVector,
    pub cost: u32,
    pub factual_justification: Justification,
    pub counterfactual_justification: Justification,
}

impl CfeResult {
    pub fn to_json(&self, schema: &FeatureSchema) -> Json {
        let mut intervals = serde_json::Map::new();
        for f in schema.features() {
            if let Some((lo, hi)) = self.intervals.get(&f.name) {
                intervals.insert(
                    f.name.clone(),
                    json!([Value::Num(*lo).to_json(f.scale()), Value::Num(*hi).to_json(f.scale())]),
                );
            }
        }
        json!({
            "factual": self.factual.to_json(schema),
            "counterfactual": {
                "values": self.counterfactual.to_json(schema),
                "intervals": intervals,
            },
            "controls": self.controls.to_json(schema),
            "cost": self.cost,
            "justifications": {
                "factual": self.factual_justification.to_json(),
                "counterfactual": self.counterfactual_justification.to_json(),
            },
        })
    }

    fn sort_key(&self, schema: &FeatureSchema) -> (ControlVector, Vec<usize>, Vec<usize>, Vec<i64>, Vec<i64>) {
        let cat = |inst: &Instance| -> Vec<usize> {
            schema
                .features()
                .iter()
                .filter_map(|f| match (f.domain(), inst.get(&f.name)) {
                    (Some(d), Some(Value::Sym(s))) => d.iter().position(|x| x == s),
                    _ => None,
                })
                .collect()
        };
        let num = |inst: &Instance| -> Vec<i64> {
            schema
                .features()
                .iter()
                .filter_map(|f| match inst.get(&f.name) {
                    Some(Value::Num(n)) if !f.is_categorical() => Some(*n),
                    _ => None,
                })
                .collect()
        };
        (
            self.controls.clone(),
            cat(&self.factual),
            cat(&self.counterfactual),
            num(&self.factual),
            num(&self.counterfactual),
        )
    }
}

fn pre_var(f: &str) -> String {
    format!("F_{f}")
}

fn post_var(f: &str) -> String {
    format!("C_{f}")
}

/// Every control vector allowed by `spec` with exactly `k` nonzero
/// entries, in lexicographic order.
pub fn control_vectors(schema: &FeatureSchema, spec: &ControlSpec, k: usize) -> Vec<ControlVector> {
    let options: Vec<Vec<i8>> = schema.features().iter().map(|f| spec.options(f)).collect();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(options.len());
    fn go(options: &[Vec<i8>], k: usize, cur: &mut Vec<i8>, out: &mut Vec<ControlVector>) {
        let used = cur.iter().filter(|z| **z != 0).count();
        if used > k || used + (options.len() - cur.len()) < k {
            return;
        }
        if cur.len() == options.len() {
            out.push(ControlVector(cur.clone()));
            return;
        }
        for &z in &options[cur.len()] {
            cur.push(z);
            go(options, k, cur, out);
            cur.pop();
        }
    }
    go(&options, k, &mut cur, &mut out);
    out
}

/// The paired-world goal for one control vector. Factual features are
/// the variables `F_<feature>`, counterfactual ones `C_<feature>`.
pub fn paired_goal(ws: &Workspace, factual: &Instance, z: &ControlVector) -> Result<Vec<BodyLiteral>, CfeError> {
    let schema = ws.schema();
    let var = |s: String| Term::Var(s);
    let mut goal = Vec::new();
    for name in [pre_var as fn(&str) -> String, post_var] {
        for f in schema.features() {
            let v = var(name(&f.name));
            goal.push(match f.kind {
                FeatureKind::Categorical { .. } => {
                    BodyLiteral::Pos(Atom::new("f_domain", vec![Term::Sym(Symbol::new(&f.name)), v]))
                }
                FeatureKind::Numeric { .. } => BodyLiteral::Pos(Atom::new(&f.name, vec![v])),
            });
        }
    }
    for f in schema.features() {
        if let Some(v) = factual.get(&f.name) {
            goal.push(BodyLiteral::Cmp { lhs: var(pre_var(&f.name)), op: CmpOp::Eq, rhs: value_term(f, v) });
        }
    }
    for (f, &zi) in schema.features().iter().zip(&z.0) {
        let (p, c) = (var(pre_var(&f.name)), var(post_var(&f.name)));
        let op = match (zi, f.is_categorical()) {
            (0, _) => CmpOp::Eq,
            (1, true) => CmpOp::Neq,
            (1, false) => CmpOp::Lt,
            _ => CmpOp::Gt,
        };
        goal.push(BodyLiteral::Cmp { lhs: p, op, rhs: c });
    }
    for phase in [Phase::Pre, Phase::Post] {
        for f in schema.features().iter().filter(|f| f.is_categorical()) {
            let v = if phase == Phase::Pre { pre_var(&f.name) } else { post_var(&f.name) };
            goal.push(BodyLiteral::Pos(Atom::new(&world_predicate(&f.name, phase), vec![var(v)])));
        }
    }
    let world = |name: fn(&str) -> String| -> BTreeMap<String, Term> {
        schema.features().iter().map(|f| (f.name.clone(), var(name(&f.name)))).collect()
    };
    let (pre, post) = (world(pre_var), world(post_var));
    apply_causal(&mut goal, ws.causal(), &[&pre, &post])?;
    let d = ws.decision();
    goal.push(BodyLiteral::Pos(Atom::new(&d.pred, d.features.iter().map(|f| var(pre_var(f))).collect())));
    goal.push(BodyLiteral::Naf(Atom::new(&d.pred, d.features.iter().map(|f| var(post_var(f))).collect())));
    Ok(goal)
}

fn scalar_value(s: &Scalar, def: &FeatureDef, engine_scale: u32) -> Value {
    match s {
        Scalar::Sym(s) => Value::Sym(s.clone()),
        Scalar::Num(n) => Value::Num(n / 10i64.pow(engine_scale - def.scale())),
    }
}

/// Lazy stream of results, level by level and control vector by control
/// vector. Results sharing a control vector are buffered and sorted.
pub struct Counterfactuals<'a> {
    ws: &'a Workspace,
    factual: Instance,
    levels: std::vec::IntoIter<usize>,
    vectors: std::vec::IntoIter<ControlVector>,
    spec: ControlSpec,
    buffer: std::vec::IntoIter<CfeResult>,
    failed: bool,
}

impl<'a> Counterfactuals<'a> {
    fn solve_vector(&self, z: &ControlVector) -> Result<Vec<CfeResult>, CfeError> {
        let goal = paired_goal(self.ws, &self.factual, z)?;
        let schema = self.ws.schema();
        let mut out: Vec<CfeResult> = Vec::new();
        let mut seen = HashSet::new();
        let n = goal.len();
        for sol in self.ws.engine().solve(&goal, SolveOptions::unlimited())? {
            let sol = sol?;
            if let Some(r) = self.result(&sol, z, n)? {
                let key = (r.factual.clone(), r.counterfactual.clone(), r.intervals.clone());
                if seen.insert(key) {
                    out.push(r);
                }
            }
        }
        out.sort_by_cached_key(|r| (r.sort_key(schema), r.intervals.clone()));
        Ok(out)
    }

    fn result(&self, sol: &Solution, z: &ControlVector, goal_len: usize) -> Result<Option<CfeResult>, CfeError> {
        let schema = self.ws.schema();
        let scale = sol.scale();
        let lookup = |name: String| sol.var(&name).ok_or_else(|| CfeError::Inconsistent(format!("{name} vanished")));
        let pre: Vec<VarId> = schema.features().iter().map(|f| lookup(pre_var(&f.name))).collect::<Result<_, _>>()?;
        let post: Vec<VarId> = schema.features().iter().map(|f| lookup(post_var(&f.name))).collect::<Result<_, _>>()?;

        // Fix the factual world first; what is left of each numeric
        // counterfactual variable is its residual interval.
        let partial = match sol.store.witness_vars(&pre) {
            Ok(s) => s,
            Err(StoreError::Infeasible) => return Ok(None),
            Err(e) => return Err(store_err("witness")(e)),
        };
        let mut intervals = BTreeMap::new();
        for (f, &v) in schema.features().iter().zip(&post) {
            if f.is_categorical() {
                continue;
            }
            let div = 10i64.pow(scale - f.scale());
            let (lo, hi) = match partial.state(v) {
                VarState::Bound(Scalar::Num(n)) => (*n, *n),
                VarState::Free(Dom::Num { lo, hi, .. }) => (*lo, *hi),
                _ => return Err(CfeError::Inconsistent(format!("{} is not numeric", f.name))),
            };
            intervals
                .insert(f.name.clone(), (lo.div_euclid(div) + i64::from(lo.rem_euclid(div) != 0), hi.div_euclid(div)));
        }

        let order: Vec<VarId> = pre.iter().chain(&post).copied().collect();
        let w = match sol.witnessed_in_order(&order) {
            Ok(w) => w,
            Err(EngineError::Store { source: StoreError::Infeasible, .. }) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let mut factual = Instance::new();
        let mut counterfactual = Instance::new();
        for (f, (&p, &c)) in schema.features().iter().zip(pre.iter().zip(&post)) {
            let get =
                |v: VarId| w.store.value(v).ok_or_else(|| CfeError::Inconsistent(format!("{} has no witness", f.name)));
            factual.assignments.insert(f.name.clone(), scalar_value(get(p)?, f, scale));
            counterfactual.assignments.insert(f.name.clone(), scalar_value(get(c)?, f, scale));
        }
        let controls = controls_between(schema, &factual, &counterfactual)?;
        if &controls != z {
            return Err(CfeError::Inconsistent(format!("witnessed controls {controls} differ from {z}")));
        }
        let j = &w.justification;
        if j.len() != goal_len {
            return Err(CfeError::Inconsistent("justification forest does not match the goal".into()));
        }
        Ok(Some(CfeResult {
            factual,
            counterfactual,
            intervals,
            cost: intervention_cost(&controls),
            controls,
            factual_justification: j[goal_len - 2].clone(),
            counterfactual_justification: j[goal_len - 1].clone(),
        }))
    }
}

impl Iterator for Counterfactuals<'_> {
    type Item = Result<CfeResult, CfeError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            if let Some(r) = self.buffer.next() {
                return Some(Ok(r));
            }
            let z = match self.vectors.next() {
                Some(z) => z,
                None => {
                    let k = self.levels.next()?;
                    self.vectors = control_vectors(self.ws.schema(), &self.spec, k).into_iter();
                    continue;
                }
            };
            match self.solve_vector(&z) {
                Ok(rs) => self.buffer = rs.into_iter(),
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

/// Counterfactual pairs for a (possibly partial) factual instance. With a
/// `cost_bound` only that exact cost is searched, otherwise every cost
/// from 1 to the number of features, cheapest first.
pub fn counterfactuals<'a>(
    ws: &'a Workspace,
    factual: &Instance,
    spec: &ControlSpec,
    cost_bound: Option<usize>,
) -> Result<Counterfactuals<'a>, CfeError> {
    let schema = ws.schema();
    let factual = validate_instance(schema, factual.clone())?;
    spec.validate(schema)?;
    if schema.features().iter().all(|f| spec.get(&f.name) == Control::Immutable) {
        return Err(CfeError::NoMutableFeature);
    }
    for f in schema.features() {
        let conflict = |msg: &str| Err(CfeError::ControlConflict { feature: f.name.clone(), msg: msg.into() });
        match (spec.get(&f.name), &f.kind, factual.get(&f.name)) {
            (Control::MustChange, FeatureKind::Categorical { values }, _) if values.len() < 2 => {
                return conflict("the domain has a single value")
            }
            (Control::MustIncrease, FeatureKind::Numeric { max, .. }, Some(Value::Num(v))) if v >= max => {
                return conflict("the value is already at its maximum")
            }
            (Control::MustDecrease, FeatureKind::Numeric { min, .. }, Some(Value::Num(v))) if v <= min => {
                return conflict("the value is already at its minimum")
            }
            _ => {}
        }
    }
    if factual.is_total(schema) {
        let c = classify(ws, &factual)?;
        if c.label == Label::Desired {
            return Err(CfeError::AlreadyDesired(c.label_text));
        }
    }
    let levels: Vec<usize> = match cost_bound {
        Some(0) => vec![],
        Some(k) => vec![k],
        None => (1..=schema.len()).collect(),
    };
    Ok(Counterfactuals {
        ws,
        factual,
        levels: levels.into_iter(),
        vectors: Vec::new().into_iter(),
        spec: spec.clone(),
        buffer: Vec::new().into_iter(),
        failed: false,
    })
}

/// Outcome of the minimal-cost search.
#[derive(Debug, Clone)]
pub enum Interpolant {
    /// The cheapest level with any answer, and every answer at it.
    Found { cost: u32, results: Vec<CfeResult> },
    /// No level up to the feature count has an answer.
    NoRecourse,
}

impl Interpolant {
    pub fn cost(&self) -> Option<u32> {
        match self {
            Interpolant::Found { cost, .. } => Some(*cost),
            Interpolant::NoRecourse => None,
        }
    }

    pub fn results(&self) -> &[CfeResult] {
        match self {
            Interpolant::Found { results, .. } => results,
            Interpolant::NoRecourse => &[],
        }
    }

    /// Features changed by some result, in schema order.
    pub fn features<'s>(&self, schema: &'s FeatureSchema) -> Vec<&'s str> {
        schema
            .features()
            .iter()
            .enumerate()
            .filter(|(i, _)| self.results().iter().any(|r| r.controls.0[*i] != 0))
            .map(|(_, f)| f.name.as_str())
            .collect()
    }

    pub fn to_json(&self, schema: &FeatureSchema) -> Json {
        match self {
            Interpolant::Found { cost, results } => json!({
                "cost": cost,
                "interpolant": self.features(schema),
                "results": results.iter().map(|r| r.to_json(schema)).collect::<Vec<_>>(),
            }),
            Interpolant::NoRecourse => json!({ "no_recourse": true }),
        }
    }
}

/// Searches cost 1, 2, ... and stops at the first level with an answer.
pub fn craig_interpolant(ws: &Workspace, factual: &Instance, spec: &ControlSpec) -> Result<Interpolant, CfeError> {
    let schema = ws.schema();
    let factual = validate_instance(schema, factual.clone())?;
    require_total(schema, &factual)?;
    let c = classify(ws, &factual)?;
    if c.label == Label::Desired {
        return Err(CfeError::AlreadyDesired(c.label_text));
    }
    spec.validate(schema)?;
    if schema.features().iter().all(|f| spec.get(&f.name) == Control::Immutable) {
        return Ok(Interpolant::NoRecourse);
    }
    for k in 1..=schema.len() {
        let results = counterfactuals(ws, &factual, spec, Some(k))?.collect::<Result<Vec<_>, _>>()?;
        if !results.is_empty() {
            return Ok(Interpolant::Found { cost: k as u32, results });
        }
    }
    Ok(Interpolant::NoRecourse)
}

/// Transitions with both worlds solved for, cheapest first.
pub fn enumerate_transitions(ws: &Workspace, limit: usize) -> Result<Vec<CfeResult>, CfeError> {
    if limit == 0 {
        return Ok(Vec::new());
    }
    counterfactuals(ws, &Instance::new(), &ControlSpec::new(), None)?.take(limit).collect()
}
