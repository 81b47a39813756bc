//! Dual-rule synthesis: clauses for `not p` derived from the clauses of `p`,
//! so that a negated goal can be proved constructively.
//!
//! For `p/n` with clauses `C1..Ck` the duals are
//!
//! ```text
//! not p(Var0, ..) :- not o_p_1(Var0, ..), .., not o_p_k(Var0, ..).
//! not o_p_i(Var0, ..) :- L1, .., L(j-1), ¬Lj.      for each body literal Lj of Ci
//! ```
//!
//! Clause heads are first normalized to distinct variables `Var0..`; head
//! constants and repeated variables become leading equalities.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::rulelang::{Atom, BodyLiteral, CmpOp, Head, PredKey, Program, Rule, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DualError {
    #[error("cannot dualize `{clause}`: variable `{var}` occurs only in the body")]
    UnsupportedClause { clause: String, var: String },
}

pub fn negate_literal(l: &BodyLiteral) -> BodyLiteral {
    match l {
        BodyLiteral::Pos(a) => BodyLiteral::Naf(a.clone()),
        BodyLiteral::Naf(a) => BodyLiteral::Pos(a.clone()),
        BodyLiteral::Cmp { lhs, op, rhs } => {
            BodyLiteral::Cmp { lhs: lhs.clone(), op: op.complement(), rhs: rhs.clone() }
        }
    }
}

fn head_vars(arity: usize) -> Vec<Term> {
    (0..arity).map(|i| Term::Var(format!("Var{i}"))).collect()
}

/// Rewrites a clause so its head is `p(Var0, .., Var(n-1))`.
fn normalize_clause(rule: &Rule) -> Result<Vec<BodyLiteral>, DualError> {
    let head = rule.head_atom().expect("clause has a head");
    let mut rename: HashMap<&str, Term> = HashMap::new();
    let mut body = Vec::new();
    for (i, arg) in head.args.iter().enumerate() {
        let v = Term::Var(format!("Var{i}"));
        match arg {
            Term::Var(name) if name == "_" => {}
            Term::Var(name) => match rename.get(name.as_str()) {
                Some(prev) => body.push(BodyLiteral::cmp(v, CmpOp::Eq, prev.clone())),
                None => {
                    rename.insert(name, v);
                }
            },
            c => body.push(BodyLiteral::cmp(v, CmpOp::Eq, c.clone())),
        }
    }
    let map_term = |t: &Term| -> Result<Term, DualError> {
        match t {
            Term::Var(name) => rename
                .get(name.as_str())
                .cloned()
                .ok_or_else(|| DualError::UnsupportedClause { clause: rule.to_string(), var: name.clone() }),
            c => Ok(c.clone()),
        }
    };
    for lit in &rule.body {
        body.push(match lit {
            BodyLiteral::Pos(a) => BodyLiteral::Pos(Atom {
                pred: a.pred.clone(),
                args: a.args.iter().map(map_term).collect::<Result<_, _>>()?,
            }),
            BodyLiteral::Naf(a) => BodyLiteral::Naf(Atom {
                pred: a.pred.clone(),
                args: a.args.iter().map(map_term).collect::<Result<_, _>>()?,
            }),
            BodyLiteral::Cmp { lhs, op, rhs } => BodyLiteral::cmp(map_term(lhs)?, *op, map_term(rhs)?),
        });
    }
    Ok(body)
}

/// Name of the helper predicate for clause `i` (1-based) of `pred`.
pub fn clause_dual_name(pred: &str, i: usize) -> String {
    format!("o_{pred}_{i}")
}

/// Dual clauses for one predicate: the umbrella clause first, then the
/// per-clause duals in clause order.
pub fn dualize_predicate(p: &Program, key: &PredKey) -> Result<Vec<Rule>, DualError> {
    let vars = head_vars(key.arity);
    let clauses = p.clauses(key);
    let mut out = vec![Rule {
        head: Head::Negated(Atom { pred: key.name.clone(), args: vars.clone() }),
        body: (1..=clauses.len())
            .map(|i| BodyLiteral::Naf(Atom { pred: clause_dual_name(&key.name, i), args: vars.clone() }))
            .collect(),
    }];
    for (i, clause) in clauses.iter().enumerate() {
        let body = normalize_clause(clause)?;
        let head = Atom { pred: clause_dual_name(&key.name, i + 1), args: vars.clone() };
        for j in 0..body.len() {
            let mut dual_body: Vec<BodyLiteral> = body[..j].to_vec();
            dual_body.push(negate_literal(&body[j]));
            out.push(Rule { head: Head::Negated(head.clone()), body: dual_body });
        }
    }
    Ok(out)
}

/// A program together with the dual clauses of every predicate that can be
/// reached under negation.
#[derive(Debug, Clone, PartialEq)]
pub struct DualProgram {
    pub source: Program,
    duals: Vec<Rule>,
    index: HashMap<PredKey, Vec<usize>>,
}

impl DualProgram {
    /// Dual clauses (`not p(...) :- ...`) in generation order.
    pub fn duals(&self) -> &[Rule] {
        &self.duals
    }

    /// Dual clauses whose head is `not key`.
    pub fn duals_for(&self, key: &PredKey) -> Vec<&Rule> {
        self.index.get(key).map(|ix| ix.iter().map(|&i| &self.duals[i]).collect()).unwrap_or_default()
    }

    pub fn has_dual(&self, key: &PredKey) -> bool {
        self.index.contains_key(key)
    }

    /// Returns a copy extended with duals for `roots` (and everything they
    /// reach under negation), or `None` if nothing is missing.
    pub fn with_roots(&self, roots: &[PredKey]) -> Result<Option<DualProgram>, DualError> {
        let missing: Vec<PredKey> =
            roots.iter().filter(|k| !self.index.contains_key(k) && needs_dual(&self.source, k)).cloned().collect();
        if missing.is_empty() {
            return Ok(None);
        }
        let mut next = self.clone();
        next.close_over(missing)?;
        Ok(Some(next))
    }

    fn close_over(&mut self, roots: Vec<PredKey>) -> Result<(), DualError> {
        let mut queue: VecDeque<PredKey> = roots.into();
        let mut done: BTreeSet<PredKey> = self.index.keys().cloned().collect();
        while let Some(key) = queue.pop_front() {
            if !done.insert(key.clone()) || !needs_dual(&self.source, &key) {
                continue;
            }
            let handwritten = self.source.negated_clauses(&key);
            let rules: Vec<Rule> = if handwritten.is_empty() {
                // A clause with an empty normalized body has no dual
                // clauses at all; its helper must still count as defined
                // (and always fail) rather than as missing.
                for i in 1..=self.source.clauses(&key).len() {
                    self.index.entry(PredKey::new(&clause_dual_name(&key.name, i), key.arity)).or_default();
                }
                dualize_predicate(&self.source, &key)?
            } else {
                handwritten.into_iter().cloned().collect()
            };
            for r in rules {
                for lit in &r.body {
                    if let BodyLiteral::Naf(a) = lit {
                        // Helper predicates are defined by the duals themselves.
                        if !a.pred.starts_with("o_") || self.source.defines(&a.key()) {
                            queue.push_back(a.key());
                        }
                    }
                }
                let k = r.head_atom().expect("dual has head").key();
                self.index.entry(k).or_default().push(self.duals.len());
                self.duals.push(r);
            }
        }
        Ok(())
    }
}

/// Builtins and abducibles are negated natively by the engine.
fn needs_dual(p: &Program, key: &PredKey) -> bool {
    if key.name == "f_domain" && key.arity == 2 && !p.defines(key) {
        return false;
    }
    if key.arity == 1 && (p.abducible(&key.name).is_some() || p.abducible_for_complement(&key.name).is_some()) {
        return false;
    }
    true
}

/// Generates duals for every predicate that appears under `not` in the
/// program (closed under the negations the duals themselves introduce).
pub fn dualize_program(p: &Program) -> Result<DualProgram, DualError> {
    let mut roots = Vec::new();
    for r in p.rules() {
        if matches!(r.head, Head::Negated(_)) {
            continue;
        }
        for lit in &r.body {
            if let BodyLiteral::Naf(a) = lit {
                roots.push(a.key());
            }
        }
    }
    for k in p.negated_predicates() {
        roots.push(k);
    }
    let mut dp = DualProgram { source: p.clone(), duals: Vec::new(), index: HashMap::new() };
    dp.close_over(roots)?;
    Ok(dp)
}

/// Generates duals for `roots` plus whatever [`dualize_program`] would.
pub fn dualize_for(p: &Program, roots: &[PredKey]) -> Result<DualProgram, DualError> {
    let dp = dualize_program(p)?;
    Ok(dp.with_roots(roots)?.unwrap_or(dp))
}
