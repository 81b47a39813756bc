//! Constraint store over engine variables.
//!
//! Numeric values are integers in engine units (the schema's largest
//! scale). A numeric variable carries an interval `[lo, hi]`, a step (its
//! feature's granularity in engine units) and a set of excluded points.
//! A categorical variable carries a domain and the subset still allowed.
//! Untyped variables only remember excluded constants. Relations between
//! two free variables (`<`, `=<`, `\=`) are kept and propagated to bounds.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::rulelang::{CmpOp, Decimal};
use crate::symbol::Symbol;

pub const NEG_INF: i64 = -(1 << 60);
pub const POS_INF: i64 = 1 << 60;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("constraints are infeasible")]
    Infeasible,
    #[error("kind mismatch: {0}")]
    KindMismatch(String),
    #[error("numeric value {0} is outside the representable range")]
    Overflow(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "_G{}", self.0)
    }
}

/// A ground value in engine units.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scalar {
    Sym(Symbol),
    Num(i64),
}

/// Operand of a comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    Var(VarId),
    Sym(Symbol),
    Num(Decimal),
}

impl From<VarId> for Operand {
    fn from(v: VarId) -> Self {
        Operand::Var(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dom {
    Any { not_syms: BTreeSet<Symbol>, not_nums: BTreeSet<i64> },
    Cat { domain: Arc<[Symbol]>, allowed: Vec<bool> },
    Num { lo: i64, hi: i64, step: i64, excluded: BTreeSet<i64> },
}

impl Dom {
    fn any() -> Self {
        Dom::Any { not_syms: BTreeSet::new(), not_nums: BTreeSet::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Slot {
    Alias(VarId),
    Bound(Scalar),
    Free(Dom),
}

/// What is known about a variable, for reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarState<'a> {
    Bound(&'a Scalar),
    Free(&'a Dom),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintStore {
    scale: u32,
    slots: Vec<Slot>,
    /// Step of each variable (1 unless typed by a feature).
    steps: Vec<i64>,
    /// `(a, b, strict)`: `a < b` when strict, else `a =< b`.
    order: Vec<(VarId, VarId, bool)>,
    neq: Vec<(VarId, VarId)>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

fn round_up(v: i64, step: i64) -> i64 {
    if v <= NEG_INF {
        return v;
    }
    v.div_euclid(step) * step + if v.rem_euclid(step) == 0 { 0 } else { step }
}

fn round_down(v: i64, step: i64) -> i64 {
    if v >= POS_INF {
        return v;
    }
    v.div_euclid(step) * step
}

type R<T = ()> = Result<T, StoreError>;

impl ConstraintStore {
    /// An empty store working in units of `10^-scale`.
    pub fn new(scale: u32) -> Self {
        ConstraintStore { scale, slots: Vec::new(), steps: Vec::new(), order: Vec::new(), neq: Vec::new() }
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn new_var(&mut self) -> VarId {
        self.slots.push(Slot::Free(Dom::any()));
        self.steps.push(1);
        VarId(self.slots.len() as u32 - 1)
    }

    pub fn var_count(&self) -> usize {
        self.slots.len()
    }

    pub fn find(&self, mut v: VarId) -> VarId {
        while let Slot::Alias(n) = self.slots[v.0 as usize] {
            v = n;
        }
        v
    }

    pub fn state(&self, v: VarId) -> VarState<'_> {
        match &self.slots[self.find(v).0 as usize] {
            Slot::Bound(s) => VarState::Bound(s),
            Slot::Free(d) => VarState::Free(d),
            Slot::Alias(_) => unreachable!(),
        }
    }

    pub fn value(&self, v: VarId) -> Option<&Scalar> {
        match self.state(v) {
            VarState::Bound(s) => Some(s),
            VarState::Free(_) => None,
        }
    }

    /// Step of a variable in engine units.
    pub fn step(&self, v: VarId) -> i64 {
        self.steps[self.find(v).0 as usize]
    }

    /// Relations between distinct free variables still pending.
    pub fn relations(&self) -> Vec<(VarId, CmpOp, VarId)> {
        let mut out = Vec::new();
        for &(a, b, strict) in &self.order {
            let (a, b) = (self.find(a), self.find(b));
            if self.value(a).is_none() || self.value(b).is_none() {
                out.push((a, if strict { CmpOp::Lt } else { CmpOp::Le }, b));
            }
        }
        for &(a, b) in &self.neq {
            let (a, b) = (self.find(a), self.find(b));
            if self.value(a).is_none() && self.value(b).is_none() {
                out.push((a, CmpOp::Neq, b));
            }
        }
        out.sort_by_key(|(a, op, b)| (*a, op.symbol(), *b));
        out.dedup();
        out
    }

    /// Converts a decimal to engine units if exact.
    pub fn units(&self, d: Decimal) -> Option<i64> {
        d.to_scale(self.scale)
    }

    pub fn is_feasible(&self) -> bool {
        let mut s = self.clone();
        s.propagate().is_ok()
    }

    /// Number of values a variable may still take; `u128::MAX` when unbounded.
    pub fn size(&self, v: VarId) -> u128 {
        match self.state(v) {
            VarState::Bound(_) => 1,
            VarState::Free(Dom::Any { .. }) => u128::MAX,
            VarState::Free(Dom::Cat { allowed, .. }) => allowed.iter().filter(|a| **a).count() as u128,
            VarState::Free(Dom::Num { lo, hi, step, excluded }) => {
                if *lo <= NEG_INF || *hi >= POS_INF {
                    return u128::MAX;
                }
                let n = ((hi - lo) / step + 1) as u128;
                n - excluded.iter().filter(|x| *x >= lo && *x <= hi && (*x - lo) % step == 0).count() as u128
            }
        }
    }

    // ---- typing -------------------------------------------------------

    /// Restricts `v` to a categorical domain.
    pub fn restrict_domain(&mut self, v: VarId, domain: Arc<[Symbol]>) -> R {
        let v = self.find(v);
        let dom = Dom::Cat { allowed: vec![true; domain.len()], domain };
        self.meet(v, dom)?;
        self.propagate()
    }

    /// Restricts `v` to `[lo, hi]` with granularity `step` (engine units).
    pub fn restrict_range(&mut self, v: VarId, lo: i64, hi: i64, step: i64) -> R {
        let v = self.find(v);
        self.meet(v, Dom::Num { lo, hi, step, excluded: BTreeSet::new() })?;
        self.propagate()
    }

    /// Intersects the slot of root `v` with `dom`.
    fn meet(&mut self, v: VarId, dom: Dom) -> R {
        let i = v.0 as usize;
        if let Dom::Num { step, .. } = &dom {
            self.steps[i] = lcm(self.steps[i], *step);
        }
        let current = std::mem::replace(&mut self.slots[i], Slot::Free(Dom::any()));
        let result = match current {
            Slot::Bound(s) => {
                self.slots[i] = Slot::Bound(s.clone());
                if dom_admits(&dom, &s, self.steps[i]) {
                    return Ok(());
                }
                return Err(StoreError::Infeasible);
            }
            Slot::Free(old) => intersect(old, dom, self.steps[i])?,
            Slot::Alias(_) => unreachable!("meet on root"),
        };
        self.slots[i] = normalize(result)?;
        Ok(())
    }

    // ---- comparisons --------------------------------------------------

    /// Pure form of [`add`](Self::add).
    pub fn with(&self, lhs: impl Into<Operand>, op: CmpOp, rhs: impl Into<Operand>) -> R<Self> {
        let mut s = self.clone();
        s.add(lhs.into(), op, rhs.into())?;
        Ok(s)
    }

    pub fn add(&mut self, lhs: Operand, op: CmpOp, rhs: Operand) -> R {
        match (lhs, rhs) {
            (Operand::Var(a), Operand::Var(b)) => self.add_var_var(a, op, b)?,
            (Operand::Var(a), c) => self.add_var_const(a, op, c)?,
            (c, Operand::Var(b)) => self.add_var_const(b, op.flip(), c)?,
            (a, b) => {
                if !const_compare(&a, op, &b, self.scale)? {
                    return Err(StoreError::Infeasible);
                }
            }
        }
        self.propagate()
    }

    fn add_var_const(&mut self, v: VarId, op: CmpOp, c: Operand) -> R {
        let v = self.find(v);
        match (op, c) {
            (CmpOp::Eq, Operand::Sym(s)) => self.bind(v, Scalar::Sym(s)),
            (CmpOp::Eq, Operand::Num(d)) => match self.units(d) {
                Some(n) => self.bind(v, Scalar::Num(check_range(n)?)),
                None => Err(StoreError::Infeasible),
            },
            (CmpOp::Neq, Operand::Sym(s)) => self.exclude(v, &Scalar::Sym(s)),
            (CmpOp::Neq, Operand::Num(d)) => match self.units(d) {
                Some(n) => self.exclude(v, &Scalar::Num(n)),
                None => Ok(()),
            },
            (op, Operand::Sym(s)) => Err(StoreError::KindMismatch(format!("ordering `{op}` against symbol `{s}`"))),
            (op, Operand::Num(d)) => {
                let s = self.scale;
                let ovf = || StoreError::Overflow(d.to_string());
                let (lo, hi) = match op {
                    CmpOp::Le => (NEG_INF, d.floor_at(s).ok_or_else(ovf)?),
                    CmpOp::Lt => (NEG_INF, d.ceil_at(s).ok_or_else(ovf)? - 1),
                    CmpOp::Ge => (d.ceil_at(s).ok_or_else(ovf)?, POS_INF),
                    CmpOp::Gt => (d.floor_at(s).ok_or_else(ovf)? + 1, POS_INF),
                    _ => unreachable!(),
                };
                check_range(lo.max(NEG_INF + 1))?;
                check_range(hi.min(POS_INF - 1))?;
                self.require_numeric(v)?;
                self.meet(v, Dom::Num { lo, hi, step: 1, excluded: BTreeSet::new() })
            }
            (_, Operand::Var(_)) => unreachable!(),
        }
    }

    fn require_numeric(&mut self, v: VarId) -> R {
        match self.state(v) {
            VarState::Bound(Scalar::Sym(s)) => {
                Err(StoreError::KindMismatch(format!("numeric comparison on symbol `{s}`")))
            }
            VarState::Free(Dom::Cat { .. }) => {
                Err(StoreError::KindMismatch("numeric comparison on a categorical variable".into()))
            }
            _ => Ok(()),
        }
    }

    fn add_var_var(&mut self, a: VarId, op: CmpOp, b: VarId) -> R {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return match op {
                CmpOp::Eq | CmpOp::Le | CmpOp::Ge => Ok(()),
                _ => Err(StoreError::Infeasible),
            };
        }
        match op {
            CmpOp::Eq => self.unify(a, b),
            CmpOp::Neq => {
                self.neq.push((a, b));
                Ok(())
            }
            op => {
                self.require_numeric(a)?;
                self.require_numeric(b)?;
                for v in [a, b] {
                    if matches!(self.state(v), VarState::Free(Dom::Any { .. })) {
                        self.meet(v, Dom::Num { lo: NEG_INF, hi: POS_INF, step: 1, excluded: BTreeSet::new() })?;
                    }
                }
                let edge = match op {
                    CmpOp::Lt => (a, b, true),
                    CmpOp::Le => (a, b, false),
                    CmpOp::Gt => (b, a, true),
                    CmpOp::Ge => (b, a, false),
                    _ => unreachable!(),
                };
                self.order.push(edge);
                Ok(())
            }
        }
    }

    fn unify(&mut self, a: VarId, b: VarId) -> R {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return Ok(());
        }
        let step_a = self.steps[a.0 as usize];
        let slot_a = std::mem::replace(&mut self.slots[a.0 as usize], Slot::Alias(b));
        self.steps[b.0 as usize] = lcm(self.steps[b.0 as usize], step_a);
        match slot_a {
            Slot::Bound(s) => self.bind(b, s),
            Slot::Free(dom) => {
                // Re-check step divisibility and domain of b.
                let dom = match dom {
                    Dom::Num { lo, hi, step: _, excluded } => {
                        Dom::Num { lo, hi, step: self.steps[b.0 as usize], excluded }
                    }
                    d => d,
                };
                self.meet(b, dom)
            }
            Slot::Alias(_) => unreachable!(),
        }
    }

    fn bind(&mut self, v: VarId, value: Scalar) -> R {
        let v = self.find(v);
        let i = v.0 as usize;
        match &self.slots[i] {
            Slot::Bound(s) => {
                if *s == value {
                    Ok(())
                } else {
                    Err(StoreError::Infeasible)
                }
            }
            Slot::Free(d) => {
                if dom_admits(d, &value, self.steps[i]) {
                    self.slots[i] = Slot::Bound(value);
                    Ok(())
                } else {
                    Err(StoreError::Infeasible)
                }
            }
            Slot::Alias(_) => unreachable!(),
        }
    }

    /// Removes a single value from the variable's feasible set.
    fn exclude(&mut self, v: VarId, value: &Scalar) -> R {
        let v = self.find(v);
        let i = v.0 as usize;
        let slot = std::mem::replace(&mut self.slots[i], Slot::Free(Dom::any()));
        let next = match slot {
            Slot::Bound(s) => {
                if s == *value {
                    self.slots[i] = Slot::Bound(s);
                    return Err(StoreError::Infeasible);
                }
                Slot::Bound(s)
            }
            Slot::Free(mut d) => {
                match (&mut d, value) {
                    (Dom::Any { not_syms, .. }, Scalar::Sym(s)) => {
                        not_syms.insert(s.clone());
                    }
                    (Dom::Any { not_nums, .. }, Scalar::Num(n)) => {
                        not_nums.insert(*n);
                    }
                    (Dom::Cat { domain, allowed }, Scalar::Sym(s)) => {
                        if let Some(p) = domain.iter().position(|x| x == s) {
                            allowed[p] = false;
                        }
                    }
                    (Dom::Num { excluded, .. }, Scalar::Num(n)) => {
                        excluded.insert(*n);
                    }
                    // A symbol is never equal to a number.
                    _ => {}
                }
                match normalize(d) {
                    Ok(s) => s,
                    Err(e) => {
                        self.slots[i] = Slot::Free(Dom::any());
                        return Err(e);
                    }
                }
            }
            Slot::Alias(_) => unreachable!(),
        };
        self.slots[i] = next;
        Ok(())
    }

    fn num_bounds(&self, v: VarId) -> R<(i64, i64)> {
        match self.state(v) {
            VarState::Bound(Scalar::Num(n)) => Ok((*n, *n)),
            VarState::Free(Dom::Num { lo, hi, .. }) => Ok((*lo, *hi)),
            VarState::Free(Dom::Any { .. }) => Ok((NEG_INF, POS_INF)),
            _ => Err(StoreError::KindMismatch("ordering on a symbolic variable".into())),
        }
    }

    /// Propagates relations to a fixpoint.
    fn propagate(&mut self) -> R {
        if !self.order.is_empty() {
            self.check_strict_cycles()?;
        }
        loop {
            let mut changed = false;
            for k in 0..self.order.len() {
                let (a, b, strict) = self.order[k];
                let (a, b) = (self.find(a), self.find(b));
                if a == b {
                    if strict {
                        return Err(StoreError::Infeasible);
                    }
                    continue;
                }
                let d = strict as i64;
                let (lo_a, hi_a) = self.num_bounds(a)?;
                let (lo_b, hi_b) = self.num_bounds(b)?;
                if lo_a > NEG_INF && lo_a + d > lo_b {
                    self.tighten(b, lo_a + d, POS_INF)?;
                    changed = true;
                }
                if hi_b < POS_INF && hi_b - d < hi_a {
                    self.tighten(a, NEG_INF, hi_b - d)?;
                    changed = true;
                }
            }
            for k in 0..self.neq.len() {
                let (a, b) = self.neq[k];
                let (a, b) = (self.find(a), self.find(b));
                if a == b {
                    return Err(StoreError::Infeasible);
                }
                match (self.value(a).cloned(), self.value(b).cloned()) {
                    (Some(x), Some(y)) => {
                        if x == y {
                            return Err(StoreError::Infeasible);
                        }
                    }
                    (Some(x), None) => {
                        let before = self.slots[b.0 as usize].clone();
                        self.exclude(b, &x)?;
                        changed |= self.slots[b.0 as usize] != before;
                    }
                    (None, Some(y)) => {
                        let before = self.slots[a.0 as usize].clone();
                        self.exclude(a, &y)?;
                        changed |= self.slots[a.0 as usize] != before;
                    }
                    (None, None) => {}
                }
            }
            if !changed {
                return Ok(());
            }
        }
    }

    fn tighten(&mut self, v: VarId, lo: i64, hi: i64) -> R {
        match self.state(v) {
            VarState::Bound(Scalar::Num(n)) => {
                if *n >= lo && *n <= hi {
                    Ok(())
                } else {
                    Err(StoreError::Infeasible)
                }
            }
            _ => {
                let step = self.step(v);
                self.meet(v, Dom::Num { lo, hi, step, excluded: BTreeSet::new() })
            }
        }
    }

    /// A cycle through a strict edge can never be satisfied; bounds
    /// propagation alone would only discover this after ~2^60 rounds.
    fn check_strict_cycles(&self) -> R {
        let edges: Vec<(VarId, VarId, bool)> =
            self.order.iter().map(|&(a, b, s)| (self.find(a), self.find(b), s)).collect();
        for &(a, b, strict) in &edges {
            if !strict {
                continue;
            }
            // Is there a path b ->* a?
            let mut stack = vec![b];
            let mut seen = BTreeSet::new();
            while let Some(x) = stack.pop() {
                if x == a {
                    return Err(StoreError::Infeasible);
                }
                if seen.insert(x) {
                    stack.extend(edges.iter().filter(|e| e.0 == x).map(|e| e.1));
                }
            }
        }
        Ok(())
    }

    // ---- witnesses ----------------------------------------------------

    /// Smallest feasible value (numeric) or first allowed symbol in domain
    /// order (categorical). `None` for an unconstrained untyped variable.
    pub fn witness(&self, v: VarId) -> R<Option<Scalar>> {
        let mut s = self.clone();
        s.propagate()?;
        for cand in s.candidates(v, 4096)? {
            if let Some(c) = cand {
                if s.with(v, CmpOp::Eq, scalar_operand(&c, self.scale)).is_ok() {
                    return Ok(Some(c));
                }
            } else {
                return Ok(None);
            }
        }
        Err(StoreError::Infeasible)
    }

    /// Candidate values in witness order, at most `cap`. A single `None`
    /// stands for "anything" on an unconstrained variable.
    fn candidates(&self, v: VarId, cap: usize) -> R<Vec<Option<Scalar>>> {
        Ok(match self.state(v) {
            VarState::Bound(s) => vec![Some(s.clone())],
            VarState::Free(Dom::Cat { domain, allowed }) => {
                domain.iter().zip(allowed).filter(|(_, a)| **a).map(|(s, _)| Some(Scalar::Sym(s.clone()))).collect()
            }
            VarState::Free(Dom::Num { lo, hi, step, excluded }) => {
                let mut out = Vec::new();
                let mut x = *lo;
                if x <= NEG_INF {
                    // Unbounded below: start from the upper end.
                    x = if *hi >= POS_INF { 0 } else { *hi };
                    return Ok(vec![Some(Scalar::Num(x))]);
                }
                while x <= *hi && out.len() < cap {
                    if !excluded.contains(&x) {
                        out.push(Some(Scalar::Num(x)));
                    }
                    x += step;
                }
                out
            }
            VarState::Free(Dom::Any { not_nums, .. }) => {
                if not_nums.is_empty() {
                    vec![None]
                } else {
                    let x = (0..).find(|x| !not_nums.contains(x)).unwrap_or(0);
                    vec![Some(Scalar::Num(x))]
                }
            }
        })
    }

    /// Binds every variable in `order` (then every remaining variable) to
    /// its witness, backtracking when a greedy choice leaves a later
    /// variable without support.
    pub fn witness_all(&self, order: &[VarId]) -> R<ConstraintStore> {
        let mut vars: Vec<VarId> = Vec::new();
        let mut seen = BTreeSet::new();
        for v in order.iter().copied().chain((0..self.slots.len() as u32).map(VarId)) {
            let r = self.find(v);
            if seen.insert(r) {
                vars.push(r);
            }
        }
        let mut s = self.clone();
        s.propagate()?;
        let mut budget = 100_000usize;
        s.assign(&vars, 0, &mut budget, 64)?.ok_or(StoreError::Infeasible)
    }

    /// Fixes only `vars` to witnesses (in order); the rest stay symbolic
    /// but are guaranteed to still have a joint solution.
    pub fn witness_vars(&self, vars: &[VarId]) -> R<ConstraintStore> {
        let mut s = self.clone();
        s.propagate()?;
        let mut budget = 100_000usize;
        let fixed = s.assign_then(vars, 0, &mut budget, 64, true)?.ok_or(StoreError::Infeasible)?;
        Ok(fixed)
    }

    fn assign(&self, vars: &[VarId], k: usize, budget: &mut usize, cap: usize) -> R<Option<ConstraintStore>> {
        self.assign_then(vars, k, budget, cap, false)
    }

    fn assign_then(
        &self,
        vars: &[VarId],
        k: usize,
        budget: &mut usize,
        cap: usize,
        check_rest: bool,
    ) -> R<Option<ConstraintStore>> {
        if k == vars.len() {
            if check_rest && self.witness_all(&[]).is_err() {
                return Ok(None);
            }
            return Ok(Some(self.clone()));
        }
        let v = vars[k];
        for cand in self.candidates(v, cap)? {
            if *budget == 0 {
                return Ok(None);
            }
            *budget -= 1;
            let Some(c) = cand else {
                return self.assign_then(vars, k + 1, budget, cap, check_rest);
            };
            if let Ok(next) = self.with(v, CmpOp::Eq, scalar_operand(&c, self.scale)) {
                if let Some(done) = next.assign_then(vars, k + 1, budget, cap, check_rest)? {
                    return Ok(Some(done));
                }
            }
        }
        Ok(None)
    }

    /// Every ground assignment of `vars` consistent with the store, in
    /// witness order. Fails with `Overflow` if a variable has more than
    /// `cap` candidates or is unconstrained.
    pub fn enumerate_ground(&self, vars: &[VarId], cap: usize) -> R<Vec<Vec<Scalar>>> {
        let mut out = Vec::new();
        let mut s = self.clone();
        s.propagate()?;
        s.enumerate_rec(vars, &mut Vec::new(), &mut out, cap)?;
        Ok(out)
    }

    fn enumerate_rec(&self, vars: &[VarId], acc: &mut Vec<Scalar>, out: &mut Vec<Vec<Scalar>>, cap: usize) -> R {
        let Some((&v, rest)) = vars.split_first() else {
            // Remaining relations may still be unsatisfiable jointly.
            if self.witness_all(&[]).is_ok() {
                out.push(acc.clone());
            }
            return Ok(());
        };
        if self.size(v) > cap as u128 {
            return Err(StoreError::Overflow(format!("{v} has too many values to enumerate")));
        }
        for cand in self.candidates(v, cap)? {
            let Some(c) = cand else {
                return Err(StoreError::Overflow(format!("{v} is unconstrained")));
            };
            if let Ok(next) = self.with(v, CmpOp::Eq, scalar_operand(&c, self.scale)) {
                acc.push(c);
                next.enumerate_rec(rest, acc, out, cap)?;
                acc.pop();
            }
        }
        Ok(())
    }
}

pub fn scalar_operand(s: &Scalar, scale: u32) -> Operand {
    match s {
        Scalar::Sym(x) => Operand::Sym(x.clone()),
        Scalar::Num(n) => Operand::Num(Decimal { mantissa: *n, scale }),
    }
}

fn check_range(n: i64) -> R<i64> {
    if n <= NEG_INF || n >= POS_INF {
        Err(StoreError::Overflow(n.to_string()))
    } else {
        Ok(n)
    }
}

fn const_compare(a: &Operand, op: CmpOp, b: &Operand, scale: u32) -> R<bool> {
    match (a, b) {
        (Operand::Sym(x), Operand::Sym(y)) => match op {
            CmpOp::Eq => Ok(x == y),
            CmpOp::Neq => Ok(x != y),
            _ => Err(StoreError::KindMismatch(format!("ordering `{op}` between symbols"))),
        },
        (Operand::Num(x), Operand::Num(y)) => {
            // Compare at a common scale.
            let s = x.scale.max(y.scale).max(scale);
            let (xa, ya) = (x.to_scale(s), y.to_scale(s));
            match (xa, ya) {
                (Some(xa), Some(ya)) => Ok(op.eval(&xa, &ya)),
                _ => Err(StoreError::Overflow(format!("{x} {op} {y}"))),
            }
        }
        _ => match op {
            CmpOp::Eq => Ok(false),
            CmpOp::Neq => Ok(true),
            _ => Err(StoreError::KindMismatch(format!("ordering `{op}` between a symbol and a number"))),
        },
    }
}

fn dom_admits(d: &Dom, value: &Scalar, step: i64) -> bool {
    match (d, value) {
        (Dom::Any { not_syms, .. }, Scalar::Sym(s)) => !not_syms.contains(s),
        (Dom::Any { not_nums, .. }, Scalar::Num(n)) => !not_nums.contains(n) && n.rem_euclid(step) == 0,
        (Dom::Cat { domain, allowed }, Scalar::Sym(s)) => {
            domain.iter().position(|x| x == s).is_some_and(|p| allowed[p])
        }
        (Dom::Num { lo, hi, excluded, .. }, Scalar::Num(n)) => {
            n >= lo && n <= hi && !excluded.contains(n) && n.rem_euclid(step) == 0
        }
        _ => false,
    }
}

fn intersect(a: Dom, b: Dom, step: i64) -> R<Dom> {
    Ok(match (a, b) {
        (Dom::Any { not_syms: s1, not_nums: n1 }, Dom::Any { not_syms: s2, not_nums: n2 }) => {
            Dom::Any { not_syms: s1.union(&s2).cloned().collect(), not_nums: n1.union(&n2).cloned().collect() }
        }
        (Dom::Any { not_syms, .. }, Dom::Cat { domain, mut allowed })
        | (Dom::Cat { domain, mut allowed }, Dom::Any { not_syms, .. }) => {
            for (i, s) in domain.iter().enumerate() {
                if not_syms.contains(s) {
                    allowed[i] = false;
                }
            }
            Dom::Cat { domain, allowed }
        }
        (Dom::Any { not_nums, .. }, Dom::Num { lo, hi, excluded, .. })
        | (Dom::Num { lo, hi, excluded, .. }, Dom::Any { not_nums, .. }) => {
            Dom::Num { lo, hi, step, excluded: excluded.union(&not_nums).cloned().collect() }
        }
        (Dom::Cat { domain: d1, allowed: a1 }, Dom::Cat { domain: d2, allowed: a2 }) => {
            let mut allowed = a1;
            for (i, s) in d1.iter().enumerate() {
                let in_other = d2.iter().position(|x| x == s).is_some_and(|p| a2[p]);
                allowed[i] = allowed[i] && in_other;
            }
            Dom::Cat { domain: d1, allowed }
        }
        (Dom::Num { lo: l1, hi: h1, excluded: e1, .. }, Dom::Num { lo: l2, hi: h2, excluded: e2, .. }) => {
            Dom::Num { lo: l1.max(l2), hi: h1.min(h2), step, excluded: e1.union(&e2).cloned().collect() }
        }
        _ => return Err(StoreError::KindMismatch("categorical and numeric constraints on one variable".into())),
    })
}

/// Canonical form: empty → infeasible, singleton → bound, numeric bounds
/// rounded to the step and moved past excluded end points.
fn normalize(d: Dom) -> R<Slot> {
    match d {
        Dom::Cat { domain, allowed } => {
            let live: Vec<usize> = (0..allowed.len()).filter(|&i| allowed[i]).collect();
            match live.len() {
                0 => Err(StoreError::Infeasible),
                1 => Ok(Slot::Bound(Scalar::Sym(domain[live[0]].clone()))),
                _ => Ok(Slot::Free(Dom::Cat { domain, allowed })),
            }
        }
        Dom::Num { lo, hi, step, excluded } => {
            let mut lo = round_up(lo, step);
            let mut hi = round_down(hi, step);
            while lo <= hi && excluded.contains(&lo) {
                lo += step;
            }
            while lo <= hi && excluded.contains(&hi) {
                hi -= step;
            }
            if lo > hi {
                return Err(StoreError::Infeasible);
            }
            if lo == hi {
                return Ok(Slot::Bound(Scalar::Num(lo)));
            }
            let excluded = excluded.into_iter().filter(|x| *x > lo && *x < hi).collect();
            Ok(Slot::Free(Dom::Num { lo, hi, step, excluded }))
        }
        any => Ok(Slot::Free(any)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(n: i64) -> Operand {
        Operand::Num(Decimal::int(n))
    }

    fn bounds(s: &ConstraintStore, v: VarId) -> (i64, i64) {
        s.num_bounds(v).unwrap()
    }

    #[test]
    fn interval_intersection_of_thresholds() {
        let mut s = ConstraintStore::new(0);
        let x = s.new_var();
        s.restrict_range(x, 0, 99999, 1).unwrap();
        let s = s.with(x, CmpOp::Le, num(6849)).unwrap().with(x, CmpOp::Gt, num(5013)).unwrap();
        assert_eq!(bounds(&s, x), (5014, 6849));
    }

    #[test]
    fn empty_intersection() {
        let mut s = ConstraintStore::new(0);
        let x = s.new_var();
        s.restrict_range(x, 1, 16, 1).unwrap();
        let s = s.with(x, CmpOp::Gt, num(12)).unwrap();
        assert_eq!(s.with(x, CmpOp::Le, num(12)), Err(StoreError::Infeasible));
    }

    #[test]
    fn exclusions_leave_singleton() {
        let mut s = ConstraintStore::new(0);
        let x = s.new_var();
        let dom: Arc<[Symbol]> = ["husband", "wife", "unmarried"].iter().map(|v| Symbol::new(v)).collect();
        s.restrict_domain(x, dom).unwrap();
        let s = s
            .with(x, CmpOp::Neq, Operand::Sym(Symbol::new("husband")))
            .unwrap()
            .with(x, CmpOp::Neq, Operand::Sym(Symbol::new("wife")))
            .unwrap();
        assert_eq!(s.value(x), Some(&Scalar::Sym(Symbol::new("unmarried"))));
    }

    #[test]
    fn witnesses() {
        let mut s = ConstraintStore::new(0);
        let x = s.new_var();
        s.restrict_range(x, 0, 99999, 1).unwrap();
        let s2 = s.with(x, CmpOp::Gt, Operand::Num(Decimal { mantissa: 68490, scale: 1 })).unwrap();
        assert_eq!(s2.witness(x).unwrap(), Some(Scalar::Num(6850)));

        let mut s = ConstraintStore::new(0);
        let age = s.new_var();
        s.restrict_range(age, 17, 90, 1).unwrap();
        assert_eq!(s.witness(age).unwrap(), Some(Scalar::Num(17)));

        let mut s = ConstraintStore::new(0);
        let m = s.new_var();
        let dom: Arc<[Symbol]> =
            ["divorced", "married_civ_spouse", "never_married"].iter().map(|v| Symbol::new(v)).collect();
        s.restrict_domain(m, dom).unwrap();
        let s = s.with(m, CmpOp::Neq, Operand::Sym(Symbol::new("divorced"))).unwrap();
        assert_eq!(s.witness(m).unwrap(), Some(Scalar::Sym(Symbol::new("married_civ_spouse"))));
    }

    #[test]
    fn kind_mismatch() {
        let mut s = ConstraintStore::new(0);
        let x = s.new_var();
        let s = s.with(x, CmpOp::Eq, Operand::Sym(Symbol::new("a"))).unwrap();
        assert!(matches!(s.with(x, CmpOp::Lt, num(3)), Err(StoreError::KindMismatch(_))));
        assert!(matches!(
            s.with(Operand::Sym(Symbol::new("a")), CmpOp::Lt, Operand::Sym(Symbol::new("b"))),
            Err(StoreError::KindMismatch(_))
        ));
    }

    #[test]
    fn var_var_ordering_propagates() {
        let mut s = ConstraintStore::new(0);
        let (a, b) = (s.new_var(), s.new_var());
        s.restrict_range(a, 0, 10, 1).unwrap();
        s.restrict_range(b, 0, 10, 1).unwrap();
        let s = s.with(a, CmpOp::Lt, b).unwrap();
        assert_eq!(bounds(&s, a), (0, 9));
        assert_eq!(bounds(&s, b), (1, 10));
        let s2 = s.with(a, CmpOp::Eq, num(9)).unwrap();
        assert_eq!(s2.value(b), Some(&Scalar::Num(10)));
        assert_eq!(s.with(b, CmpOp::Lt, a), Err(StoreError::Infeasible));
        let mut t = ConstraintStore::new(0);
        let (x, y) = (t.new_var(), t.new_var());
        t.add(x.into(), CmpOp::Lt, y.into()).unwrap();
        assert_eq!(t.with(y, CmpOp::Le, x), Err(StoreError::Infeasible));
    }

    #[test]
    fn var_var_disequality_suspends() {
        let mut s = ConstraintStore::new(0);
        let (a, b) = (s.new_var(), s.new_var());
        let dom: Arc<[Symbol]> = ["x", "y"].iter().map(|v| Symbol::new(v)).collect();
        s.restrict_domain(a, dom.clone()).unwrap();
        s.restrict_domain(b, dom).unwrap();
        let s = s.with(a, CmpOp::Neq, b).unwrap();
        assert_eq!(s.relations().len(), 1);
        let s = s.with(a, CmpOp::Eq, Operand::Sym(Symbol::new("x"))).unwrap();
        assert_eq!(s.value(b), Some(&Scalar::Sym(Symbol::new("y"))));
        assert!(s.relations().is_empty());
    }

    #[test]
    fn unification_merges_domains() {
        let mut s = ConstraintStore::new(0);
        let (a, b) = (s.new_var(), s.new_var());
        s.restrict_range(a, 0, 10, 1).unwrap();
        s.restrict_range(b, 5, 20, 1).unwrap();
        let s = s.with(a, CmpOp::Eq, b).unwrap();
        assert_eq!(bounds(&s, a), (5, 10));
        assert_eq!(s.find(a), s.find(b));
    }

    #[test]
    fn non_integral_constants() {
        let mut s = ConstraintStore::new(0);
        let x = s.new_var();
        s.restrict_range(x, 0, 10, 1).unwrap();
        let half = Operand::Num(Decimal { mantissa: 45, scale: 1 });
        assert_eq!(bounds(&s.with(x, CmpOp::Le, half.clone()).unwrap(), x), (0, 4));
        assert_eq!(bounds(&s.with(x, CmpOp::Gt, half.clone()).unwrap(), x), (5, 10));
        assert_eq!(bounds(&s.with(x, CmpOp::Lt, half.clone()).unwrap(), x), (0, 4));
        assert_eq!(bounds(&s.with(x, CmpOp::Ge, half.clone()).unwrap(), x), (5, 10));
        assert_eq!(s.with(x, CmpOp::Eq, half), Err(StoreError::Infeasible));
    }

    #[test]
    fn steps_and_enumeration() {
        let mut s = ConstraintStore::new(1);
        let x = s.new_var();
        s.restrict_range(x, 0, 50, 10).unwrap();
        let s = s.with(x, CmpOp::Gt, Operand::Num(Decimal::int(2))).unwrap();
        assert_eq!(s.witness(x).unwrap(), Some(Scalar::Num(30)));
        let all = s.enumerate_ground(&[x], 100).unwrap();
        assert_eq!(all, vec![vec![Scalar::Num(30)], vec![Scalar::Num(40)], vec![Scalar::Num(50)]]);
        assert_eq!(s.size(x), 3);
    }
}
