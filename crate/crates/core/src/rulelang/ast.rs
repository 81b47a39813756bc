use std::fmt;

use crate::symbol::Symbol;

/// A decimal literal as written, e.g. `6849.0` is `{mantissa: 68490, scale: 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decimal {
    pub mantissa: i64,
    pub scale: u32,
}

impl Decimal {
    pub fn int(v: i64) -> Self {
        Decimal { mantissa: v, scale: 0 }
    }

    pub fn parse(token: &str) -> Option<Self> {
        let (neg, digits) = match token.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, token.strip_prefix('+').unwrap_or(token)),
        };
        let (int_part, frac_part) = match digits.split_once('.') {
            Some((i, f)) => (i, f),
            None => (digits, ""),
        };
        if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if !frac_part.bytes().all(|b| b.is_ascii_digit()) || (digits.contains('.') && frac_part.is_empty()) {
            return None;
        }
        let mut mantissa: i64 = 0;
        for b in int_part.bytes().chain(frac_part.bytes()) {
            mantissa = mantissa.checked_mul(10)?.checked_add((b - b'0') as i64)?;
        }
        Some(Decimal { mantissa: if neg { -mantissa } else { mantissa }, scale: frac_part.len() as u32 })
    }

    /// Exact conversion to an integer at `scale` decimal digits.
    pub fn to_scale(self, scale: u32) -> Option<i64> {
        if self.scale <= scale {
            self.mantissa.checked_mul(10i64.checked_pow(scale - self.scale)?)
        } else {
            let div = 10i64.checked_pow(self.scale - scale)?;
            (self.mantissa % div == 0).then(|| self.mantissa / div)
        }
    }

    /// Largest integer at `scale` not above this value.
    pub fn floor_at(self, scale: u32) -> Option<i64> {
        if self.scale <= scale {
            return self.to_scale(scale);
        }
        let div = 10i64.checked_pow(self.scale - scale)?;
        Some(self.mantissa.div_euclid(div))
    }

    /// Smallest integer at `scale` not below this value.
    pub fn ceil_at(self, scale: u32) -> Option<i64> {
        let f = self.floor_at(scale)?;
        if self.to_scale(scale).is_some() {
            Some(f)
        } else {
            f.checked_add(1)
        }
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 0 {
            return write!(f, "{}", self.mantissa);
        }
        let sign = if self.mantissa < 0 { "-" } else { "" };
        let abs = self.mantissa.unsigned_abs().to_string();
        let width = self.scale as usize + 1;
        let padded = format!("{abs:0>width$}");
        let (i, frac) = padded.split_at(padded.len() - self.scale as usize);
        write!(f, "{sign}{i}.{frac}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    /// `_` is anonymous: every occurrence is a distinct variable.
    Var(String),
    Sym(Symbol),
    Num(Decimal),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }

    pub fn sym(s: &str) -> Self {
        Term::Sym(Symbol::new(s))
    }

    pub fn int(v: i64) -> Self {
        Term::Num(Decimal::int(v))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_anonymous(&self) -> bool {
        matches!(self, Term::Var(v) if v == "_")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Sym(s) => write!(f, "{s}"),
            Term::Num(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredKey {
    pub name: String,
    pub arity: usize,
}

impl PredKey {
    pub fn new(name: &str, arity: usize) -> Self {
        PredKey { name: name.to_string(), arity }
    }
}

impl fmt::Display for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Self {
        Atom { pred: pred.to_string(), args }
    }

    pub fn key(&self) -> PredKey {
        PredKey::new(&self.pred, self.args.len())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn complement(self) -> Self {
        match self {
            CmpOp::Eq => CmpOp::Neq,
            CmpOp::Neq => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
        }
    }

    /// The operator with its operands swapped: `a < b` iff `b > a`.
    pub fn flip(self) -> Self {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Le,
            op => op,
        }
    }

    pub fn is_order(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Neq)
    }

    pub fn eval<T: Ord>(self, a: &T, b: &T) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Neq => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Neq => "\\=",
            CmpOp::Lt => "#<",
            CmpOp::Le => "#=<",
            CmpOp::Gt => "#>",
            CmpOp::Ge => "#>=",
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BodyLiteral {
    Pos(Atom),
    /// Negation as failure: `not p(...)`.
    Naf(Atom),
    Cmp {
        lhs: Term,
        op: CmpOp,
        rhs: Term,
    },
}

impl BodyLiteral {
    pub fn cmp(lhs: Term, op: CmpOp, rhs: Term) -> Self {
        BodyLiteral::Cmp { lhs, op, rhs }
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            BodyLiteral::Pos(a) | BodyLiteral::Naf(a) => a.args.iter().collect(),
            BodyLiteral::Cmp { lhs, rhs, .. } => vec![lhs, rhs],
        }
    }

    pub fn atom(&self) -> Option<&Atom> {
        match self {
            BodyLiteral::Pos(a) | BodyLiteral::Naf(a) => Some(a),
            BodyLiteral::Cmp { .. } => None,
        }
    }
}

impl fmt::Display for BodyLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyLiteral::Pos(a) => write!(f, "{a}"),
            BodyLiteral::Naf(a) => write!(f, "not {a}"),
            BodyLiteral::Cmp { lhs, op, rhs } => write!(f, "{lhs} {op} {rhs}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Head {
    Atom(Atom),
    /// Head of a generated dual clause, printed as `not p(...)`.
    Negated(Atom),
    /// Integrity constraint (`:- body.` or `false :- body.`).
    Constraint,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Head,
    pub body: Vec<BodyLiteral>,
}

impl Rule {
    pub fn fact(head: Atom) -> Self {
        Rule { head: Head::Atom(head), body: Vec::new() }
    }

    pub fn new(head: Atom, body: Vec<BodyLiteral>) -> Self {
        Rule { head: Head::Atom(head), body }
    }

    pub fn head_atom(&self) -> Option<&Atom> {
        match &self.head {
            Head::Atom(a) | Head::Negated(a) => Some(a),
            Head::Constraint => None,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.head {
            Head::Atom(a) => write!(f, "{a}")?,
            Head::Negated(a) => write!(f, "not {a}")?,
            Head::Constraint => {}
        }
        if !self.body.is_empty() {
            if matches!(self.head, Head::Constraint) {
                f.write_str(":- ")?;
            } else {
                f.write_str(" :- ")?;
            }
            for (i, l) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{l}")?;
            }
        }
        f.write_str(".")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Pre,
    Post,
    Choice,
}

impl Phase {
    pub fn from_pred(name: &str) -> Self {
        if name.starts_with("before_int_") {
            Phase::Pre
        } else if name.starts_with("after_int_") {
            Phase::Post
        } else {
            Phase::Choice
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Pre => "pre",
            Phase::Post => "post",
            Phase::Choice => "choice",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AbducibleDomain {
    /// The categorical domain of a schema feature.
    Feature(String),
    /// An explicit set of alternatives (two-clause even loop).
    Symbols(Vec<Symbol>),
}

/// A predicate whose single argument takes exactly one value per world,
/// chosen from `domain`. Recognized from an even loop over negation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Abducible {
    pub pred: String,
    /// `not_before_int_x/1` style complement predicate, if the loop had one.
    pub complement: Option<String>,
    pub domain: AbducibleDomain,
    pub phase: Phase,
}

impl Abducible {
    /// The two clauses of the even loop this declaration stands for.
    pub fn loop_clauses(&self) -> Vec<Rule> {
        match (&self.domain, &self.complement) {
            (AbducibleDomain::Feature(feature), Some(comp)) => vec![
                Rule::new(
                    Atom::new(comp, vec![Term::var("X")]),
                    vec![
                        BodyLiteral::Pos(Atom::new("f_domain", vec![Term::sym(feature), Term::var("Y")])),
                        BodyLiteral::Pos(Atom::new(&self.pred, vec![Term::var("Y")])),
                        BodyLiteral::cmp(Term::var("Y"), CmpOp::Neq, Term::var("X")),
                    ],
                ),
                Rule::new(
                    Atom::new(&self.pred, vec![Term::var("X")]),
                    vec![BodyLiteral::Naf(Atom::new(comp, vec![Term::var("X")]))],
                ),
            ],
            (AbducibleDomain::Symbols(syms), _) if syms.len() == 2 => vec![
                Rule::new(
                    Atom::new(&self.pred, vec![Term::Sym(syms[0].clone())]),
                    vec![BodyLiteral::Naf(Atom::new(&self.pred, vec![Term::Sym(syms[1].clone())]))],
                ),
                Rule::new(
                    Atom::new(&self.pred, vec![Term::Sym(syms[1].clone())]),
                    vec![BodyLiteral::Naf(Atom::new(&self.pred, vec![Term::Sym(syms[0].clone())]))],
                ),
            ],
            // Only constructed by the two recognizers above.
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Directive {
    /// `#decision pred(f1, ..., fn).` marks the classifier predicate for
    /// the undesired label and maps its arguments to features.
    Decision { pred: String, features: Vec<String> },
    /// `#causal pred(f1, ..., fn).` declares a causal constraint predicate.
    Causal { pred: String, features: Vec<String> },
    /// `#labels('<=50K', '>50K').` display names for undesired / desired.
    Labels { undesired: String, desired: String },
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Directive::Decision { pred, features } => write!(f, "#decision {pred}({}).", features.join(", ")),
            Directive::Causal { pred, features } => write!(f, "#causal {pred}({}).", features.join(", ")),
            Directive::Labels { undesired, desired } => {
                write!(f, "#labels('{}', '{}').", undesired.replace('\'', "\\'"), desired.replace('\'', "\\'"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Section {
    #[default]
    Main,
    /// Items after a `% causal` comment line.
    Causal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ItemKind {
    Rule(Rule),
    Abducible(Abducible),
    Directive(Directive),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Item {
    pub section: Section,
    pub kind: ItemKind,
}

impl Item {
    pub fn main(kind: ItemKind) -> Self {
        Item { section: Section::Main, kind }
    }
}
