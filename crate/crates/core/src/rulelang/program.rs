use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use super::ast::*;
use super::RuleError;
use crate::symbol::Symbol;

/// An admissible rule program. Clause order is textual order.
#[derive(Debug, Clone, Default)]
pub struct Program {
    items: Vec<Item>,
    clauses: HashMap<PredKey, Vec<usize>>,
    negated: HashMap<PredKey, Vec<usize>>,
    abducibles: HashMap<String, usize>,
    complements: HashMap<String, String>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.items == other.items
    }
}

impl Eq for Program {}

impl Program {
    /// Normalizes even loops into abducible declarations, indexes clauses
    /// and checks admissibility.
    pub fn from_items(items: Vec<Item>) -> Result<Self, RuleError> {
        let items = normalize_even_loops(items);
        let mut p = Program { items, ..Default::default() };
        p.reindex()?;
        p.check_admissible()?;
        Ok(p)
    }

    pub fn from_rules(rules: Vec<Rule>) -> Result<Self, RuleError> {
        Self::from_items(rules.into_iter().map(|r| Item::main(ItemKind::Rule(r))).collect())
    }

    /// Appends items (e.g. a second file or generated declarations).
    pub fn extend(&self, extra: Vec<Item>) -> Result<Self, RuleError> {
        let mut items = self.items.clone();
        items.extend(extra);
        Self::from_items(items)
    }

    fn reindex(&mut self) -> Result<(), RuleError> {
        self.clauses.clear();
        self.negated.clear();
        self.abducibles.clear();
        self.complements.clear();
        for (i, item) in self.items.iter().enumerate() {
            match &item.kind {
                ItemKind::Rule(r) => match &r.head {
                    Head::Atom(a) => self.clauses.entry(a.key()).or_default().push(i),
                    Head::Negated(a) => self.negated.entry(a.key()).or_default().push(i),
                    Head::Constraint => {}
                },
                ItemKind::Abducible(a) => {
                    if self.abducibles.insert(a.pred.clone(), i).is_some() {
                        return Err(RuleError::DuplicateAbducible { pred: a.pred.clone() });
                    }
                    if let Some(c) = &a.complement {
                        self.complements.insert(c.clone(), a.pred.clone());
                    }
                }
                ItemKind::Directive(_) => {}
            }
        }
        Ok(())
    }

    fn check_admissible(&self) -> Result<(), RuleError> {
        for r in self.rules() {
            check_range_restricted(r)?;
        }
        // Depth-first search for cycles in the positive/negative dependency graph.
        let mut state: HashMap<&PredKey, u8> = HashMap::new();
        let mut keys: Vec<&PredKey> = self.clauses.keys().collect();
        keys.sort();
        for k in keys {
            let mut path = Vec::new();
            self.visit(k, &mut state, &mut path)?;
        }
        Ok(())
    }

    fn visit<'a>(
        &'a self,
        key: &'a PredKey,
        state: &mut HashMap<&'a PredKey, u8>,
        path: &mut Vec<&'a PredKey>,
    ) -> Result<(), RuleError> {
        match state.get(key) {
            Some(2) => return Ok(()),
            Some(1) => unreachable!("handled by caller"),
            _ => {}
        }
        state.insert(key, 1);
        path.push(key);
        for &i in &self.clauses[key] {
            let ItemKind::Rule(rule) = &self.items[i].kind else { continue };
            for lit in &rule.body {
                let Some(atom) = lit.atom() else { continue };
                let Some((callee, _)) = self.clauses.get_key_value(&atom.key()) else { continue };
                match state.get(callee) {
                    Some(1) => {
                        let start = path.iter().position(|k| *k == callee).unwrap_or(0);
                        let mut cycle: Vec<String> = path[start..].iter().map(|k| k.to_string()).collect();
                        cycle.push(callee.to_string());
                        return Err(RuleError::Recursion { clause: rule.to_string(), cycle: cycle.join(" -> ") });
                    }
                    Some(2) => {}
                    _ => self.visit(callee, state, path)?,
                }
            }
        }
        path.pop();
        state.insert(key, 2);
        Ok(())
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    /// All rules (facts, rules, integrity constraints, negated-head rules).
    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.items.iter().filter_map(|i| match &i.kind {
            ItemKind::Rule(r) => Some(r),
            _ => None,
        })
    }

    pub fn rules_in(&self, section: Section) -> impl Iterator<Item = &Rule> {
        self.items.iter().filter(move |i| i.section == section).filter_map(|i| match &i.kind {
            ItemKind::Rule(r) => Some(r),
            _ => None,
        })
    }

    /// Clauses defining `key`, in textual order.
    pub fn clauses(&self, key: &PredKey) -> Vec<&Rule> {
        self.clauses
            .get(key)
            .map(|idx| {
                idx.iter()
                    .filter_map(|&i| match &self.items[i].kind {
                        ItemKind::Rule(r) => Some(r),
                        _ => None,
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Hand-written `not p(...) :- ...` clauses.
    pub fn negated_clauses(&self, key: &PredKey) -> Vec<&Rule> {
        self.negated
            .get(key)
            .map(|idx| {
                idx.iter()
                    .filter_map(|&i| match &self.items[i].kind {
                        ItemKind::Rule(r) => Some(r),
                        _ => None,
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn defines(&self, key: &PredKey) -> bool {
        self.clauses.contains_key(key)
    }

    /// Predicates with at least one clause, sorted.
    pub fn defined_predicates(&self) -> Vec<PredKey> {
        let mut v: Vec<PredKey> = self.clauses.keys().cloned().collect();
        v.sort();
        v
    }

    pub fn negated_predicates(&self) -> Vec<PredKey> {
        let mut v: Vec<PredKey> = self.negated.keys().cloned().collect();
        v.sort();
        v
    }

    pub fn integrity_constraints(&self) -> impl Iterator<Item = &Rule> {
        self.rules().filter(|r| matches!(r.head, Head::Constraint))
    }

    pub fn abducible(&self, pred: &str) -> Option<&Abducible> {
        self.abducibles.get(pred).and_then(|&i| match &self.items[i].kind {
            ItemKind::Abducible(a) => Some(a),
            _ => None,
        })
    }

    /// The abducible whose complement predicate is `pred`.
    pub fn abducible_for_complement(&self, pred: &str) -> Option<&Abducible> {
        self.complements.get(pred).and_then(|a| self.abducible(a))
    }

    pub fn abducibles(&self) -> impl Iterator<Item = &Abducible> {
        self.items.iter().filter_map(|i| match &i.kind {
            ItemKind::Abducible(a) => Some(a),
            _ => None,
        })
    }

    pub fn directives(&self) -> impl Iterator<Item = &Directive> {
        self.items.iter().filter_map(|i| match &i.kind {
            ItemKind::Directive(d) => Some(d),
            _ => None,
        })
    }

    /// Whether `pred/1` is an abducible or an abducible complement.
    pub fn is_abducible_call(&self, atom: &Atom) -> bool {
        atom.args.len() == 1 && (self.abducibles.contains_key(&atom.pred) || self.complements.contains_key(&atom.pred))
    }
}

fn check_range_restricted(rule: &Rule) -> Result<(), RuleError> {
    let mut safe: HashSet<&str> = HashSet::new();
    if let Some(h) = rule.head_atom() {
        safe.extend(h.args.iter().filter_map(Term::as_var));
    }
    for lit in &rule.body {
        if let BodyLiteral::Pos(a) = lit {
            safe.extend(a.args.iter().filter_map(Term::as_var));
        }
    }
    for lit in &rule.body {
        for t in lit.terms() {
            if let Term::Var(v) = t {
                let anonymous_in_atom = v == "_" && lit.atom().is_some();
                if !anonymous_in_atom && (v == "_" || !safe.contains(v.as_str())) {
                    return Err(RuleError::NotRangeRestricted { clause: rule.to_string(), var: v.clone() });
                }
            }
        }
    }
    Ok(())
}

/// Replaces even-loop clause pairs by [`Abducible`] declarations.
///
/// Two shapes are recognized:
///
/// ```text
/// not_before_int_f(X) :- f_domain(f, Y), before_int_f(Y), Y \= X.
/// before_int_f(X) :- not not_before_int_f(X).
/// ```
///
/// and the two-world choice `p(a) :- not p(b).  p(b) :- not p(a).`
fn normalize_even_loops(items: Vec<Item>) -> Vec<Item> {
    let mut by_pred: HashMap<PredKey, Vec<usize>> = HashMap::new();
    for (i, item) in items.iter().enumerate() {
        if let ItemKind::Rule(Rule { head: Head::Atom(a), .. }) = &item.kind {
            by_pred.entry(a.key()).or_default().push(i);
        }
    }
    let rule_at = |i: usize| match &items[i].kind {
        ItemKind::Rule(r) => r,
        _ => unreachable!(),
    };

    // (position to place declaration, clause indices consumed, declaration)
    let mut found: Vec<(usize, Vec<usize>, Abducible)> = Vec::new();
    let mut keys: Vec<&PredKey> = by_pred.keys().collect();
    keys.sort();
    for key in keys {
        let idx = &by_pred[key];
        if key.arity != 1 {
            continue;
        }
        // Feature-domain loop: `key` is the abducible predicate.
        if idx.len() == 1 {
            let r = rule_at(idx[0]);
            if let (Some(x), [BodyLiteral::Naf(comp)]) = (r.head_atom().and_then(|h| h.args[0].as_var()), &r.body[..]) {
                if comp.args.len() == 1 && comp.args[0].as_var() == Some(x) && comp.pred != key.name {
                    let ckey = comp.key();
                    if let Some(cidx) = by_pred.get(&ckey).filter(|c| c.len() == 1) {
                        if let Some(feature) = complement_feature(rule_at(cidx[0]), &key.name) {
                            found.push((
                                idx[0].min(cidx[0]),
                                vec![idx[0], cidx[0]],
                                Abducible {
                                    pred: key.name.clone(),
                                    complement: Some(comp.pred.clone()),
                                    domain: AbducibleDomain::Feature(feature),
                                    phase: Phase::from_pred(&key.name),
                                },
                            ));
                            continue;
                        }
                    }
                }
            }
        }
        // Two-world choice over constants.
        if idx.len() == 2 {
            let (r0, r1) = (rule_at(idx[0]), rule_at(idx[1]));
            if let (Some(a), Some(b)) = (choice_pair(r0, &key.name), choice_pair(r1, &key.name)) {
                if a.0 == b.1 && a.1 == b.0 && a.0 != a.1 {
                    found.push((
                        idx[0],
                        idx.clone(),
                        Abducible {
                            pred: key.name.clone(),
                            complement: None,
                            domain: AbducibleDomain::Symbols(vec![a.0, a.1]),
                            phase: Phase::from_pred(&key.name),
                        },
                    ));
                }
            }
        }
    }

    let consumed: BTreeSet<usize> = found.iter().flat_map(|(_, c, _)| c.iter().copied()).collect();
    let mut placed: HashMap<usize, Abducible> = found.into_iter().map(|(pos, _, a)| (pos, a)).collect();
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.into_iter().enumerate() {
        if let Some(a) = placed.remove(&i) {
            out.push(Item { section: item.section, kind: ItemKind::Abducible(a) });
        } else if !consumed.contains(&i) {
            out.push(item);
        }
    }
    out
}

/// Matches `comp(X) :- f_domain(f, Y), abd(Y), Y \= X.` (any body order)
/// and returns `f`.
fn complement_feature(rule: &Rule, abd: &str) -> Option<String> {
    let x = rule.head_atom()?.args.first()?.as_var()?;
    if rule.body.len() != 3 {
        return None;
    }
    let mut feature = None;
    let mut y_dom = None;
    let mut y_abd = None;
    let mut neq = None;
    for lit in &rule.body {
        match lit {
            BodyLiteral::Pos(a) if a.pred == "f_domain" && a.args.len() == 2 => match (&a.args[0], &a.args[1]) {
                (Term::Sym(f), Term::Var(y)) => {
                    feature = Some(f.as_str().to_string());
                    y_dom = Some(y.as_str());
                }
                _ => return None,
            },
            BodyLiteral::Pos(a) if a.pred == abd && a.args.len() == 1 => y_abd = Some(a.args[0].as_var()?),
            BodyLiteral::Cmp { lhs: Term::Var(l), op: CmpOp::Neq, rhs: Term::Var(r) } => {
                neq = Some((l.as_str(), r.as_str()))
            }
            _ => return None,
        }
    }
    let y = y_dom?;
    let ok = y_abd? == y && y != x && matches!(neq?, (l, r) if (l == y && r == x) || (l == x && r == y));
    ok.then_some(feature?)
}

/// Matches `p(a) :- not p(b).` and returns `(a, b)`.
fn choice_pair(rule: &Rule, pred: &str) -> Option<(Symbol, Symbol)> {
    let head = rule.head_atom()?;
    let a = match &head.args[..] {
        [Term::Sym(a)] => a.clone(),
        _ => return None,
    };
    match &rule.body[..] {
        [BodyLiteral::Naf(n)] if n.pred == pred => match &n.args[..] {
            [Term::Sym(b)] => Some((a, b.clone())),
            _ => None,
        },
        _ => None,
    }
}

fn write_item(out: &mut String, kind: &ItemKind) {
    match kind {
        ItemKind::Rule(r) => {
            let _ = writeln!(out, "{r}");
        }
        ItemKind::Abducible(a) => {
            for r in a.loop_clauses() {
                let _ = writeln!(out, "{r}");
            }
        }
        ItemKind::Directive(d) => {
            let _ = writeln!(out, "{d}");
        }
    }
}

/// Canonical text: one rule per line, single space after commas, causal
/// items after a `% causal` line.
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for item in p.items.iter().filter(|i| i.section == Section::Main) {
        write_item(&mut out, &item.kind);
    }
    let mut causal = p.items.iter().filter(|i| i.section == Section::Causal).peekable();
    if causal.peek().is_some() {
        out.push_str("% causal\n");
        for item in causal {
            write_item(&mut out, &item.kind);
        }
    }
    out
}

pub fn print_rules(rules: &[Rule]) -> String {
    let mut out = String::new();
    for r in rules {
        let _ = writeln!(out, "{r}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;

    const LABEL_RULES: &str = "\
label(X,'<=50K') :- not marital_status(X,'Married-civ-spouse'),
        capital_gain(X,N1), N1=<6849.0.
label(X,'<=50K') :- marital_status(X,'Married-civ-spouse'),
        capital_gain(X,N1), N1=<5013.0, education_num(X,N2), N2=<12.0.
";

    const MARITAL_LOOP: &str = "\
not_before_int_marital_status(X) :- f_domain(marital_status, Y),
        before_int_marital_status(Y), Y \\= X.
before_int_marital_status(X):- not not_before_int_marital_status(X).
";

    #[test]
    fn label_rules_have_two_clauses() {
        let p = parse_program(LABEL_RULES).unwrap();
        assert_eq!(p.clauses(&PredKey::new("label", 2)).len(), 2);
        let reparsed = parse_program(&print_program(&p)).unwrap();
        assert_eq!(reparsed, p);
    }

    #[test]
    fn odd_loop_is_rejected() {
        let err = parse_program("p :- q. q :- p.").unwrap_err();
        assert!(matches!(err, RuleError::Recursion { .. }), "{err}");
        assert!(matches!(parse_program("p(X) :- p(X)."), Err(RuleError::Recursion { .. })));
    }

    #[test]
    fn even_loop_becomes_abducible() {
        let p = parse_program(MARITAL_LOOP).unwrap();
        let abds: Vec<_> = p.abducibles().collect();
        assert_eq!(abds.len(), 1);
        assert_eq!(abds[0].domain, AbducibleDomain::Feature("marital_status".into()));
        assert_eq!(abds[0].phase, Phase::Pre);
        assert_eq!(p.rules().count(), 0);
        let printed = print_program(&p);
        assert_eq!(
            printed,
            "not_before_int_marital_status(X) :- f_domain(marital_status, Y), before_int_marital_status(Y), Y \\= X.\n\
             before_int_marital_status(X) :- not not_before_int_marital_status(X).\n"
        );
        assert_eq!(parse_program(&printed).unwrap(), p);
    }

    #[test]
    fn teaches_db_is_a_choice() {
        let p = parse_program("teaches_db(mary) :- not teaches_db(john).\nteaches_db(john) :- not teaches_db(mary).")
            .unwrap();
        let a = p.abducible("teaches_db").unwrap();
        assert_eq!(a.domain, AbducibleDomain::Symbols(vec![Symbol::new("mary"), Symbol::new("john")]));
    }

    #[test]
    fn range_restriction() {
        assert!(matches!(parse_program("p(X) :- Y #> 3."), Err(RuleError::NotRangeRestricted { .. })));
        assert!(matches!(parse_program("p(X) :- not q(Y)."), Err(RuleError::NotRangeRestricted { .. })));
        assert!(matches!(parse_program("p(X) :- X #> _."), Err(RuleError::NotRangeRestricted { .. })));
        assert!(parse_program("p(X) :- q(X, _), not r(X).").is_ok());
        assert!(parse_program(":- bird(X), mammal(X), not bat(X).").is_ok());
    }

    #[test]
    fn printing_forms() {
        let p = parse_program("f_domain(sex,male).\nnot p(X) :- X \\= a.\n:- q(X), X #> 3.\n").unwrap();
        assert_eq!(print_program(&p), "f_domain(sex, male).\nnot p(X) :- X \\= a.\n:- q(X), X #> 3.\n");
    }
}
