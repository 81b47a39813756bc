//! Goal-directed evaluation without grounding.
//!
//! A query is resolved depth-first against the program clauses (positive
//! goals) and the dual clauses (negated goals). Variables live in a
//! [`ConstraintStore`], so a solution may leave a variable partially
//! determined (an interval, a set of excluded values). Abducible predicates
//! pick exactly one value per derivation from their domain.

mod justify;
pub mod store;

pub use justify::{render_forest, replay, Justification, Outcome, ReplayError};
pub use store::{ConstraintStore, Dom, Operand, Scalar, StoreError, VarId, VarState};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::dual::{dualize_program, DualError, DualProgram};
use crate::rulelang::{Abducible, AbducibleDomain, Atom, BodyLiteral, CmpOp, Decimal, PredKey, Program, Rule, Term};
use crate::schema::{format_scaled, FeatureKind, FeatureSchema};
use crate::symbol::Symbol;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("undefined predicate {0}")]
    UndefinedPredicate(String),
    #[error("no dual clauses for `not {0}`")]
    MissingDual(String),
    #[error("abducible {pred} ranges over unknown feature `{feature}`")]
    UnknownFeature { pred: String, feature: String },
    #[error("{goal}: {source}")]
    Store { goal: String, source: StoreError },
    #[error(transparent)]
    Dual(#[from] DualError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbducibleOrder {
    /// Domain declaration order.
    #[default]
    Domain,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    /// `None` for no limit.
    pub max_solutions: Option<usize>,
    pub abducible_order: AbducibleOrder,
    /// Reject solutions that satisfy an integrity constraint body.
    pub check_constraints: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { max_solutions: Some(64), abducible_order: AbducibleOrder::Domain, check_constraints: true }
    }
}

impl SolveOptions {
    pub fn unlimited() -> Self {
        SolveOptions { max_solutions: None, ..Self::default() }
    }

    pub fn limit(n: usize) -> Self {
        SolveOptions { max_solutions: Some(n), ..Self::default() }
    }
}

// ---- internal goal representation ----------------------------------------

#[derive(Debug, Clone)]
enum T {
    V(VarId),
    S(Symbol),
    N(Decimal),
}

impl T {
    fn operand(&self) -> Operand {
        match self {
            T::V(v) => Operand::Var(*v),
            T::S(s) => Operand::Sym(s.clone()),
            T::N(d) => Operand::Num(*d),
        }
    }
}

#[derive(Debug, Clone)]
enum Lit {
    Pos(Arc<str>, Vec<T>),
    Naf(Arc<str>, Vec<T>),
    Cmp(T, CmpOp, T),
}

/// Immutable linked list; cloning a search state shares the tails.
struct Cons<X> {
    head: X,
    tail: List<X>,
}

type List<X> = Option<Arc<Cons<X>>>;

fn cons<X>(tail: &List<X>, head: X) -> List<X> {
    Some(Arc::new(Cons { head, tail: tail.clone() }))
}

#[derive(Clone)]
struct Goal {
    lit: Lit,
    parent: usize,
}

#[derive(Debug, Clone)]
struct Node {
    id: usize,
    parent: usize,
    lit: Lit,
    outcome: Outcome,
}

#[derive(Clone)]
struct State {
    store: ConstraintStore,
    goals: List<Goal>,
    chosen: BTreeMap<String, Symbol>,
    trace: List<Node>,
    next_id: usize,
    order: AbducibleOrder,
}

impl State {
    fn record(&mut self, lit: Lit, parent: usize, outcome: Outcome) -> usize {
        self.next_id += 1;
        let id = self.next_id;
        self.trace = cons(&self.trace, Node { id, parent, lit, outcome });
        id
    }

    fn push_goal(&mut self, lit: Lit, parent: usize) {
        self.goals = cons(&self.goals, Goal { lit, parent });
    }
}

enum Step {
    Continue,
    Fail,
    Branch(Vec<State>),
}

// ---- engine ------------------------------------------------------------------

/// Immutable evaluation context: a schema and a dualized program. Cheap to
/// clone; independent evaluations may share one engine across threads.
#[derive(Debug, Clone)]
pub struct Engine {
    schema: Arc<FeatureSchema>,
    program: Arc<DualProgram>,
    scale: u32,
    domains: Arc<HashMap<String, Arc<[Symbol]>>>,
    /// Numeric features in engine units: `(lo, hi, step)`.
    ranges: Arc<HashMap<String, (i64, i64, i64)>>,
}

impl Engine {
    pub fn new(schema: FeatureSchema, program: DualProgram) -> Self {
        let scale = schema.max_scale();
        let mut domains = HashMap::new();
        let mut ranges = HashMap::new();
        for f in schema.features() {
            match &f.kind {
                FeatureKind::Categorical { values } => {
                    domains.insert(f.name.clone(), values.iter().cloned().collect::<Arc<[Symbol]>>());
                }
                FeatureKind::Numeric { min, max, scale: s } => {
                    let step = 10i64.pow(scale - s);
                    ranges.insert(f.name.clone(), (min * step, max * step, step));
                }
            }
        }
        Engine {
            schema: Arc::new(schema),
            program: Arc::new(program),
            scale,
            domains: Arc::new(domains),
            ranges: Arc::new(ranges),
        }
    }

    /// Dualizes `program` and builds an engine over it.
    pub fn from_program(schema: FeatureSchema, program: &Program) -> Result<Self, EngineError> {
        Ok(Self::new(schema, dualize_program(program)?))
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn program(&self) -> &DualProgram {
        &self.program
    }

    /// Engine units are `10^-scale`.
    pub fn scale(&self) -> u32 {
        self.scale
    }

    /// An engine whose dual program also covers `roots`.
    pub fn with_duals_for(&self, roots: &[PredKey]) -> Result<Engine, EngineError> {
        match self.program.with_roots(roots)? {
            None => Ok(self.clone()),
            Some(p) => Ok(Engine { program: Arc::new(p), ..self.clone() }),
        }
    }

    /// Lazily enumerates solutions of a conjunctive goal.
    pub fn solve(&self, goal: &[BodyLiteral], opts: SolveOptions) -> Result<Solutions, EngineError> {
        let roots: Vec<PredKey> = goal
            .iter()
            .filter_map(|l| match l {
                BodyLiteral::Naf(a) => Some(a.key()),
                _ => None,
            })
            .collect();
        let engine = self.with_duals_for(&roots)?;
        let mut store = ConstraintStore::new(engine.scale);
        let mut env: HashMap<String, T> = HashMap::new();
        let mut vars = Vec::new();
        for lit in goal {
            for t in lit.terms() {
                if let Term::Var(name) = t {
                    if name != "_" && !env.contains_key(name) {
                        let v = store.new_var();
                        env.insert(name.clone(), T::V(v));
                        vars.push((name.clone(), v));
                    }
                }
            }
        }
        let lits: Vec<Lit> = goal.iter().map(|l| compile_lit(&mut store, &mut env, l)).collect();
        let mut st =
            State { store, goals: None, chosen: BTreeMap::new(), trace: None, next_id: 0, order: opts.abducible_order };
        for l in lits.into_iter().rev() {
            st.push_goal(l, 0);
        }
        Ok(Solutions { engine, stack: vec![st], vars: Arc::new(vars), seen: HashSet::new(), emitted: 0, opts })
    }

    fn store_err(&self, lit: &Lit, store: &ConstraintStore, e: StoreError) -> Result<Step, EngineError> {
        match e {
            StoreError::Infeasible => Ok(Step::Fail),
            other => {
                Err(EngineError::Store { goal: render_lit(lit, store, &[], self.scale).to_string(), source: other })
            }
        }
    }

    /// Processes one goal. On `Continue` the state was updated in place.
    fn expand(&self, st: &mut State, goal: Goal) -> Result<Step, EngineError> {
        match &goal.lit {
            Lit::Cmp(l, op, r) => match st.store.add(l.operand(), *op, r.operand()) {
                Ok(()) => {
                    st.record(goal.lit.clone(), goal.parent, Outcome::ConstraintSatisfied);
                    Ok(Step::Continue)
                }
                Err(e) => self.store_err(&goal.lit, &st.store, e),
            },
            Lit::Pos(pred, args) => self.expand_pos(st, &goal, pred, args),
            Lit::Naf(pred, args) => self.expand_naf(st, &goal, pred, args),
        }
    }

    fn schema_domain(&self, pred: &str, args: &[T]) -> Option<Arc<[Symbol]>> {
        if pred != "f_domain" || args.len() != 2 {
            return None;
        }
        match &args[0] {
            T::S(f) => self.domains.get(f.as_str()).cloned(),
            _ => None,
        }
    }

    fn expand_pos(&self, st: &mut State, goal: &Goal, pred: &str, args: &[T]) -> Result<Step, EngineError> {
        if let Some(domain) = self.schema_domain(pred, args) {
            let r = match &args[1] {
                T::V(v) => st.store.restrict_domain(*v, domain),
                T::S(s) if domain.contains(s) => Ok(()),
                _ => Err(StoreError::Infeasible),
            };
            return match r {
                Ok(()) => {
                    st.record(goal.lit.clone(), goal.parent, Outcome::ConstraintSatisfied);
                    Ok(Step::Continue)
                }
                Err(e) => self.store_err(&goal.lit, &st.store, e),
            };
        }
        let src = &self.program.source;
        if args.len() == 1 {
            if let Some(a) = src.abducible(pred) {
                return self.abduce(st, goal, a, &args[0], true);
            }
            if let Some(a) = src.abducible_for_complement(pred) {
                return self.abduce(st, goal, a, &args[0], false);
            }
        }
        let key = PredKey::new(pred, args.len());
        let typed = args.len() == 1 && self.ranges.contains_key(pred);
        if typed {
            let (lo, hi, step) = self.ranges[pred];
            let r = match &args[0] {
                T::V(v) => st.store.restrict_range(*v, lo, hi, step),
                t => st
                    .store
                    .add(t.operand(), CmpOp::Ge, num_op(lo, self.scale))
                    .and_then(|_| st.store.add(t.operand(), CmpOp::Le, num_op(hi, self.scale)))
                    .and_then(|_| match t {
                        T::N(d) if d.to_scale(self.scale).is_some_and(|u| u % step == 0) => Ok(()),
                        _ => Err(StoreError::Infeasible),
                    }),
            };
            if let Err(e) = r {
                return self.store_err(&goal.lit, &st.store, e);
            }
            if !src.defines(&key) {
                st.record(goal.lit.clone(), goal.parent, Outcome::ConstraintSatisfied);
                return Ok(Step::Continue);
            }
        }
        if !src.defines(&key) {
            return Err(EngineError::UndefinedPredicate(key.to_string()));
        }
        let clauses = src.clauses(&key);
        self.resolve(st, goal, args, &clauses, false)
    }

    fn expand_naf(&self, st: &mut State, goal: &Goal, pred: &str, args: &[T]) -> Result<Step, EngineError> {
        if let Some(domain) = self.schema_domain(pred, args) {
            if let T::V(v) = &args[1] {
                for s in domain.iter() {
                    if let Err(e) = st.store.add(Operand::Var(*v), CmpOp::Neq, Operand::Sym(s.clone())) {
                        return self.store_err(&goal.lit, &st.store, e);
                    }
                }
            } else if matches!(&args[1], T::S(s) if domain.contains(s)) {
                return Ok(Step::Fail);
            }
            st.record(goal.lit.clone(), goal.parent, Outcome::ConstraintSatisfied);
            return Ok(Step::Continue);
        }
        let src = &self.program.source;
        if args.len() == 1 {
            if let Some(a) = src.abducible(pred) {
                return self.abduce(st, goal, a, &args[0], false);
            }
            if let Some(a) = src.abducible_for_complement(pred) {
                return self.abduce(st, goal, a, &args[0], true);
            }
        }
        let key = PredKey::new(pred, args.len());
        if args.len() == 1 && self.ranges.contains_key(pred) && !src.defines(&key) {
            // Outside the feature's range: below, or above.
            let (lo, hi, _) = self.ranges[pred];
            let mut out = Vec::new();
            for (op, bound) in [(CmpOp::Lt, lo), (CmpOp::Gt, hi)] {
                let mut s = st.clone();
                match s.store.add(args[0].operand(), op, num_op(bound, self.scale)) {
                    Ok(()) => {
                        s.record(goal.lit.clone(), goal.parent, Outcome::ConstraintSatisfied);
                        out.push(s);
                    }
                    Err(StoreError::Infeasible) => {}
                    Err(e) => return self.store_err(&goal.lit, &st.store, e),
                }
            }
            return Ok(Step::Branch(out));
        }
        if !self.program.has_dual(&key) {
            return Err(EngineError::MissingDual(key.to_string()));
        }
        let duals = self.program.duals_for(&key);
        self.resolve(st, goal, args, &duals, true)
    }

    fn abduce(&self, st: &State, goal: &Goal, abd: &Abducible, arg: &T, positive: bool) -> Result<Step, EngineError> {
        let (feature, domain): (&str, Arc<[Symbol]>) = match &abd.domain {
            AbducibleDomain::Feature(f) => (
                f,
                self.domains
                    .get(f)
                    .cloned()
                    .ok_or_else(|| EngineError::UnknownFeature { pred: abd.pred.clone(), feature: f.clone() })?,
            ),
            AbducibleDomain::Symbols(s) => (&abd.pred, s.iter().cloned().collect()),
        };
        let candidates: Vec<Symbol> = match st.chosen.get(&abd.pred) {
            Some(v) => vec![v.clone()],
            None if st.order == AbducibleOrder::Reverse => domain.iter().rev().cloned().collect(),
            None => domain.iter().cloned().collect(),
        };
        let op = if positive { CmpOp::Eq } else { CmpOp::Neq };
        let mut out = Vec::new();
        for v in candidates {
            let mut s = st.clone();
            match s.store.add(arg.operand(), op, Operand::Sym(v.clone())) {
                Ok(()) => {
                    s.chosen.insert(abd.pred.clone(), v.clone());
                    s.record(
                        goal.lit.clone(),
                        goal.parent,
                        Outcome::Abduced { feature: feature.to_string(), value: v },
                    );
                    out.push(s);
                }
                Err(StoreError::Infeasible) => {}
                Err(e) => return self.store_err(&goal.lit, &st.store, e),
            }
        }
        Ok(Step::Branch(out))
    }

    /// One branch per clause whose head unifies with the call.
    fn resolve(&self, st: &State, goal: &Goal, args: &[T], rules: &[&Rule], dual: bool) -> Result<Step, EngineError> {
        let mut out = Vec::new();
        'clauses: for (i, r) in rules.iter().enumerate() {
            let head = r.head_atom().expect("clause head");
            // Cheap rejection on constant clashes before copying the state.
            for (h, a) in head.args.iter().zip(args) {
                if let Term::Sym(c) = h {
                    let clash = match a {
                        T::S(s) => s != c,
                        T::N(_) => true,
                        T::V(v) => {
                            matches!(st.store.value(*v), Some(Scalar::Sym(s)) if s != c)
                                || matches!(st.store.value(*v), Some(Scalar::Num(_)))
                        }
                    };
                    if clash {
                        continue 'clauses;
                    }
                }
            }
            let mut s = st.clone();
            let mut env: HashMap<String, T> = HashMap::new();
            for (h, a) in head.args.iter().zip(args) {
                let r = match h {
                    Term::Var(n) if n == "_" => Ok(()),
                    Term::Var(n) => match env.get(n) {
                        Some(prev) => s.store.add(prev.operand(), CmpOp::Eq, a.operand()),
                        None => {
                            env.insert(n.clone(), a.clone());
                            Ok(())
                        }
                    },
                    c => s.store.add(term_operand(c), CmpOp::Eq, a.operand()),
                };
                match r {
                    Ok(()) => {}
                    Err(StoreError::Infeasible) => continue 'clauses,
                    Err(e) => return self.store_err(&goal.lit, &st.store, e),
                }
            }
            let outcome =
                if dual { Outcome::ProvedViaDual { clause: i + 1 } } else { Outcome::Proved { clause: i + 1 } };
            let id = s.record(goal.lit.clone(), goal.parent, outcome);
            let body: Vec<Lit> = r.body.iter().map(|l| compile_lit(&mut s.store, &mut env, l)).collect();
            for l in body.into_iter().rev() {
                s.push_goal(l, id);
            }
            out.push(s);
        }
        Ok(Step::Branch(out))
    }

    /// Runs a state until it completes, fails or branches.
    fn run(&self, mut st: State) -> Result<(Option<State>, Vec<State>), EngineError> {
        loop {
            let Some(cell) = st.goals.take() else {
                return Ok((Some(st), Vec::new()));
            };
            st.goals = cell.tail.clone();
            match self.expand(&mut st, cell.head.clone())? {
                Step::Continue => {}
                Step::Fail => return Ok((None, Vec::new())),
                Step::Branch(mut alts) => {
                    if alts.len() == 1 {
                        st = alts.pop().unwrap();
                    } else {
                        return Ok((None, alts));
                    }
                }
            }
        }
    }

    /// Whether some integrity constraint body is satisfiable in `st`.
    fn violates_constraint(&self, st: &State) -> Result<bool, EngineError> {
        for c in self.program.source.integrity_constraints() {
            let mut s = st.clone();
            s.trace = None;
            let mut env = HashMap::new();
            let body: Vec<Lit> = c.body.iter().map(|l| compile_lit(&mut s.store, &mut env, l)).collect();
            for l in body.into_iter().rev() {
                s.push_goal(l, 0);
            }
            let mut stack = vec![s];
            while let Some(s) = stack.pop() {
                let (done, alts) = self.run(s)?;
                if done.is_some() {
                    return Ok(true);
                }
                stack.extend(alts.into_iter().rev());
            }
        }
        Ok(false)
    }
}

fn num_op(units: i64, scale: u32) -> Operand {
    Operand::Num(Decimal { mantissa: units, scale })
}

fn term_operand(t: &Term) -> Operand {
    match t {
        Term::Sym(s) => Operand::Sym(s.clone()),
        Term::Num(d) => Operand::Num(*d),
        Term::Var(_) => unreachable!("constant expected"),
    }
}

fn compile_term(store: &mut ConstraintStore, env: &mut HashMap<String, T>, t: &Term) -> T {
    match t {
        Term::Var(n) if n == "_" => T::V(store.new_var()),
        Term::Var(n) => env.entry(n.clone()).or_insert_with(|| T::V(store.new_var())).clone(),
        Term::Sym(s) => T::S(s.clone()),
        Term::Num(d) => T::N(*d),
    }
}

fn compile_lit(store: &mut ConstraintStore, env: &mut HashMap<String, T>, l: &BodyLiteral) -> Lit {
    match l {
        BodyLiteral::Pos(a) => {
            Lit::Pos(a.pred.as_str().into(), a.args.iter().map(|t| compile_term(store, env, t)).collect())
        }
        BodyLiteral::Naf(a) => {
            Lit::Naf(a.pred.as_str().into(), a.args.iter().map(|t| compile_term(store, env, t)).collect())
        }
        BodyLiteral::Cmp { lhs, op, rhs } => {
            Lit::Cmp(compile_term(store, env, lhs), *op, compile_term(store, env, rhs))
        }
    }
}

/// A number in engine units as a decimal with trailing zeros dropped.
pub fn units_to_decimal(n: i64, scale: u32) -> Decimal {
    let mut d = Decimal { mantissa: n, scale };
    while d.scale > 0 && d.mantissa % 10 == 0 {
        d.mantissa /= 10;
        d.scale -= 1;
    }
    d
}

fn render_term(t: &T, store: &ConstraintStore, names: &[(String, VarId)], scale: u32) -> Term {
    match t {
        T::S(s) => Term::Sym(s.clone()),
        T::N(d) => Term::Num(*d),
        T::V(v) => match store.value(*v) {
            Some(Scalar::Sym(s)) => Term::Sym(s.clone()),
            Some(Scalar::Num(n)) => Term::Num(units_to_decimal(*n, scale)),
            None => Term::Var(var_name(*v, store, names)),
        },
    }
}

fn var_name(v: VarId, store: &ConstraintStore, names: &[(String, VarId)]) -> String {
    let root = store.find(v);
    names.iter().find(|(_, q)| store.find(*q) == root).map(|(n, _)| n.clone()).unwrap_or_else(|| root.to_string())
}

fn render_lit(l: &Lit, store: &ConstraintStore, names: &[(String, VarId)], scale: u32) -> BodyLiteral {
    let atom = |p: &Arc<str>, args: &[T]| Atom {
        pred: p.to_string(),
        args: args.iter().map(|t| render_term(t, store, names, scale)).collect(),
    };
    match l {
        Lit::Pos(p, args) => BodyLiteral::Pos(atom(p, args)),
        Lit::Naf(p, args) => BodyLiteral::Naf(atom(p, args)),
        Lit::Cmp(a, op, b) => BodyLiteral::Cmp {
            lhs: render_term(a, store, names, scale),
            op: *op,
            rhs: render_term(b, store, names, scale),
        },
    }
}

// ---- solutions -------------------------------------------------------------

/// Lazy sequence of solutions in deterministic order (clause order, then
/// abducible domain order). Equal solutions are reported once.
pub struct Solutions {
    engine: Engine,
    stack: Vec<State>,
    vars: Arc<Vec<(String, VarId)>>,
    seen: HashSet<String>,
    emitted: usize,
    opts: SolveOptions,
}

impl Solutions {
    /// The engine the query runs on (with any duals the query needed).
    pub fn engine(&self) -> &Engine {
        &self.engine
    }
}

impl Iterator for Solutions {
    type Item = Result<Solution, EngineError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.opts.max_solutions.is_some_and(|m| self.emitted >= m) {
            return None;
        }
        while let Some(st) = self.stack.pop() {
            let (done, alts) = match self.engine.run(st) {
                Ok(r) => r,
                Err(e) => return Some(Err(e)),
            };
            self.stack.extend(alts.into_iter().rev());
            let Some(st) = done else { continue };
            if !st.store.is_feasible() {
                continue;
            }
            if self.opts.check_constraints {
                match self.engine.violates_constraint(&st) {
                    Ok(true) => continue,
                    Ok(false) => {}
                    Err(e) => return Some(Err(e)),
                }
            }
            let sol = Solution::build(&self.engine, st, self.vars.clone());
            if !self.seen.insert(sol.key()) {
                continue;
            }
            self.emitted += 1;
            return Some(Ok(sol));
        }
        None
    }
}

/// What is known about a query variable in a solution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Binding {
    Value(Scalar),
    /// Categorical values still allowed, in domain order.
    OneOf(Vec<Symbol>),
    /// Numeric interval in engine units (`None` = unbounded) with excluded points.
    Interval {
        lo: Option<i64>,
        hi: Option<i64>,
        step: i64,
        excluded: Vec<i64>,
    },
    /// No positive information; lists the excluded constants.
    Unconstrained {
        excluded: Vec<String>,
    },
}

impl Binding {
    fn of(store: &ConstraintStore, v: VarId) -> Binding {
        match store.state(v) {
            VarState::Bound(s) => Binding::Value(s.clone()),
            VarState::Free(Dom::Cat { domain, allowed }) => {
                Binding::OneOf(domain.iter().zip(allowed).filter(|(_, a)| **a).map(|(s, _)| s.clone()).collect())
            }
            VarState::Free(Dom::Num { lo, hi, step, excluded }) => Binding::Interval {
                lo: (*lo > store::NEG_INF).then_some(*lo),
                hi: (*hi < store::POS_INF).then_some(*hi),
                step: *step,
                excluded: excluded.iter().copied().collect(),
            },
            VarState::Free(Dom::Any { not_syms, not_nums }) => Binding::Unconstrained {
                excluded: not_syms
                    .iter()
                    .map(|s| s.to_string())
                    .chain(not_nums.iter().map(|n| n.to_string()))
                    .collect(),
            },
        }
    }

    /// Text form with numbers shown at `scale`.
    pub fn render(&self, scale: u32) -> String {
        let num = |n: i64| units_to_decimal(n, scale).to_string();
        match self {
            Binding::Value(Scalar::Sym(s)) => s.to_string(),
            Binding::Value(Scalar::Num(n)) => num(*n),
            Binding::OneOf(v) => format!("{{{}}}", v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")),
            Binding::Interval { lo, hi, excluded, .. } => {
                let mut s = format!(
                    "[{}, {}]",
                    lo.map(num).unwrap_or_else(|| "-inf".into()),
                    hi.map(num).unwrap_or_else(|| "inf".into())
                );
                if !excluded.is_empty() {
                    let ex: Vec<String> = excluded.iter().map(|n| num(*n)).collect();
                    s.push_str(&format!(" \\ {{{}}}", ex.join(", ")));
                }
                s
            }
            Binding::Unconstrained { excluded } if excluded.is_empty() => "_".into(),
            Binding::Unconstrained { excluded } => format!("_ \\ {{{}}}", excluded.join(", ")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Query variables in order of first appearance.
    pub bindings: Vec<(String, Binding)>,
    /// Pending relations between free variables.
    pub relations: Vec<(String, CmpOp, String)>,
    /// Abducible choices `(predicate, value)`.
    pub abduced: Vec<(String, Symbol)>,
    /// One tree per goal literal.
    pub justification: Vec<Justification>,
    pub store: ConstraintStore,
    vars: Arc<Vec<(String, VarId)>>,
    trace: Arc<Vec<Node>>,
    scale: u32,
    program: Arc<DualProgram>,
}

impl Solution {
    fn build(engine: &Engine, st: State, vars: Arc<Vec<(String, VarId)>>) -> Solution {
        let mut trace = Vec::new();
        let mut cur = st.trace.clone();
        while let Some(c) = cur {
            trace.push(c.head.clone());
            cur = c.tail.clone();
        }
        trace.reverse();
        let mut sol = Solution {
            bindings: Vec::new(),
            relations: Vec::new(),
            abduced: st.chosen.into_iter().collect(),
            justification: Vec::new(),
            store: st.store,
            vars,
            trace: Arc::new(trace),
            scale: engine.scale,
            program: engine.program.clone(),
        };
        sol.refresh();
        sol
    }

    fn refresh(&mut self) {
        let store = &self.store;
        self.bindings = self.vars.iter().map(|(n, v)| (n.clone(), Binding::of(store, *v))).collect();
        let names = &self.vars[..];
        self.relations = store
            .relations()
            .into_iter()
            .map(|(a, op, b)| (var_name(a, store, names), op, var_name(b, store, names)))
            .collect();
        // Children of each node, in creation order.
        let mut kids: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, n) in self.trace.iter().enumerate() {
            kids.entry(n.parent).or_default().push(i);
        }
        fn build(
            i: usize,
            t: &[Node],
            kids: &HashMap<usize, Vec<usize>>,
            f: &dyn Fn(&Lit) -> BodyLiteral,
        ) -> Justification {
            let n = &t[i];
            Justification {
                goal: f(&n.lit),
                outcome: n.outcome.clone(),
                children: kids
                    .get(&n.id)
                    .map(|c| c.iter().map(|&k| build(k, t, kids, f)).collect())
                    .unwrap_or_default(),
            }
        }
        let render = |l: &Lit| render_lit(l, store, names, self.scale);
        self.justification = kids
            .get(&0)
            .map(|r| r.iter().map(|&i| build(i, &self.trace, &kids, &render)).collect())
            .unwrap_or_default();
    }

    /// Canonical text used to suppress duplicate solutions.
    fn key(&self) -> String {
        let mut k = String::new();
        for (n, b) in &self.bindings {
            k.push_str(&format!("{n}={};", b.render(self.scale)));
        }
        for (a, op, b) in &self.relations {
            k.push_str(&format!("{a}{op}{b};"));
        }
        k
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.vars.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn binding(&self, name: &str) -> Option<&Binding> {
        self.bindings.iter().find(|(n, _)| n == name).map(|(_, b)| b)
    }

    pub fn value(&self, name: &str) -> Option<&Scalar> {
        self.var(name).and_then(|v| self.store.value(v))
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    /// A copy where every variable is fixed to its witness: query
    /// variables first, in order, then everything else.
    pub fn witnessed(&self) -> Result<Solution, EngineError> {
        self.witnessed_in_order(&self.vars.iter().map(|(_, v)| *v).collect::<Vec<_>>())
    }

    pub fn witnessed_in_order(&self, order: &[VarId]) -> Result<Solution, EngineError> {
        let store =
            self.store.witness_all(order).map_err(|e| EngineError::Store { goal: "witness".into(), source: e })?;
        let mut s = self.clone();
        s.store = store;
        s.refresh();
        Ok(s)
    }

    /// Every ground assignment to the query variables consistent with this
    /// solution (at most `cap` values per variable).
    pub fn expansions(&self, cap: usize) -> Result<Vec<Vec<Scalar>>, StoreError> {
        let vars: Vec<VarId> = self.vars.iter().map(|(_, v)| *v).collect();
        self.store.enumerate_ground(&vars, cap)
    }

    /// Literals established by the derivation as a partial model: user-level
    /// atoms and negations in proof order, plus the implied negations of
    /// unchosen abducible alternatives.
    pub fn model(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |s: String| {
            if !out.contains(&s) {
                out.push(s);
            }
        };
        for n in self.trace.iter() {
            let name = match &n.lit {
                Lit::Pos(p, _) | Lit::Naf(p, _) => p,
                Lit::Cmp(..) => continue,
            };
            if &**name == "f_domain" || is_dual_helper(name) {
                continue;
            }
            push(render_lit(&n.lit, &self.store, &self.vars, self.scale).to_string());
        }
        for (pred, v) in &self.abduced {
            push(format!("{pred}({v})"));
            if let Some(Abducible { domain: AbducibleDomain::Symbols(alts), .. }) = self.program.source.abducible(pred)
            {
                for w in alts.iter().filter(|w| *w != v) {
                    push(format!("not {pred}({w})"));
                }
            }
        }
        out
    }

    pub fn justification_text(&self) -> String {
        render_forest(&self.justification)
    }

    /// Replays the (witnessed) justification against the program.
    pub fn replay(&self, schema: &FeatureSchema) -> Result<(), ReplayError> {
        replay(&self.justification, &self.program, schema)
    }

    /// Value of a query variable formatted at its own feature scale.
    pub fn format_value(&self, name: &str, feature_scale: u32) -> Option<String> {
        match self.value(name)? {
            Scalar::Sym(s) => Some(s.as_str().to_string()),
            Scalar::Num(n) => {
                let div = 10i64.pow(self.scale - feature_scale);
                Some(format_scaled(n / div, feature_scale))
            }
        }
    }
}

fn is_dual_helper(name: &str) -> bool {
    name.starts_with("o_") && name.rsplit('_').next().is_some_and(|d| d.bytes().all(|b| b.is_ascii_digit()))
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> =
            self.bindings.iter().map(|(n, b)| format!("{n} = {}", b.render(self.scale))).collect();
        parts.extend(self.relations.iter().map(|(a, op, b)| format!("{a} {op} {b}")));
        if parts.is_empty() {
            f.write_str("true")
        } else {
            f.write_str(&parts.join(", "))
        }
    }
}
