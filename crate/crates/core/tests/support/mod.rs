//! Random program generators and ground-truth oracles shared by the
//! property suites. The oracles evaluate the generated structures
//! directly, never through the engine.

#![allow(dead_code)]

pub mod adult;
pub mod golden;
pub mod suites;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use recourse::cfe::{Control, ControlSpec};
use recourse::schema::{FeatureDef, FeatureSchema, Instance, Value};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn read_fixture(name: &str, file: &str) -> String {
    std::fs::read_to_string(fixture(name).join(file)).unwrap_or_else(|e| panic!("{name}/{file}: {e}"))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Val {
    S(String),
    N(i64),
}

impl Val {
    pub fn text(&self) -> String {
        match self {
            Val::S(s) => s.clone(),
            Val::N(n) => n.to_string(),
        }
    }

    pub fn to_value(&self) -> Value {
        match self {
            Val::S(s) => Value::sym(s),
            Val::N(n) => Value::Num(*n),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Kind {
    Cat(Vec<String>),
    Num(i64, i64),
}

#[derive(Debug, Clone)]
pub struct Feat {
    pub name: String,
    pub kind: Kind,
}

impl Feat {
    pub fn values(&self) -> Vec<Val> {
        match &self.kind {
            Kind::Cat(vs) => vs.iter().map(|v| Val::S(v.clone())).collect(),
            Kind::Num(lo, hi) => (*lo..=*hi).map(Val::N).collect(),
        }
    }

    pub fn def(&self) -> FeatureDef {
        match &self.kind {
            Kind::Cat(vs) => FeatureDef::categorical(&self.name, &vs.iter().map(|s| s.as_str()).collect::<Vec<_>>()),
            Kind::Num(lo, hi) => FeatureDef::numeric(&self.name, *lo, *hi, 0),
        }
    }

    pub fn is_cat(&self) -> bool {
        matches!(self.kind, Kind::Cat(_))
    }
}

pub fn schema_of(features: &[Feat]) -> FeatureSchema {
    FeatureSchema::new(features.iter().map(Feat::def).collect()).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Op {
    pub fn holds(self, a: &Val, b: &Val) -> bool {
        match (self, a, b) {
            (Op::Eq, _, _) => a == b,
            (Op::Neq, _, _) => a != b,
            (Op::Lt, Val::N(x), Val::N(y)) => x < y,
            (Op::Le, Val::N(x), Val::N(y)) => x <= y,
            (Op::Gt, Val::N(x), Val::N(y)) => x > y,
            (Op::Ge, Val::N(x), Val::N(y)) => x >= y,
            _ => panic!("ordering on symbols"),
        }
    }

    pub fn text(self, numeric: bool) -> &'static str {
        match (self, numeric) {
            (Op::Eq, false) => "=",
            (Op::Neq, false) => "\\=",
            (Op::Eq, true) => "#=",
            (Op::Neq, true) => "#\\=",
            (Op::Lt, _) => "#<",
            (Op::Le, _) => "#=<",
            (Op::Gt, _) => "#>",
            (Op::Ge, _) => "#>=",
        }
    }
}

fn random_features(rng: &mut StdRng, max_features: usize, max_cat: usize, max_width: i64) -> Vec<Feat> {
    let n = rng.gen_range(1..=max_features);
    (0..n)
        .map(|i| {
            let name = format!("f{i}");
            if rng.gen_bool(0.5) {
                let k = rng.gen_range(2..=max_cat);
                Feat { name, kind: Kind::Cat((0..k).map(|j| format!("v{i}_{j}")).collect()) }
            } else {
                let lo = rng.gen_range(0..=5);
                Feat { name, kind: Kind::Num(lo, lo + rng.gen_range(1..=max_width)) }
            }
        })
        .collect()
}

/// A constant near the feature's range (numeric) or from its domain.
fn random_const(rng: &mut StdRng, f: &Feat) -> Val {
    match &f.kind {
        Kind::Cat(vs) => Val::S(vs.choose(rng).unwrap().clone()),
        Kind::Num(lo, hi) => Val::N(rng.gen_range(lo - 1..=hi + 1)),
    }
}

fn random_op(rng: &mut StdRng, f: &Feat) -> Op {
    if f.is_cat() {
        *[Op::Eq, Op::Neq].choose(rng).unwrap()
    } else {
        *[Op::Eq, Op::Neq, Op::Lt, Op::Le, Op::Gt, Op::Ge].choose(rng).unwrap()
    }
}

// ---------------------------------------------------------------------------
// Stratified programs for the duality suite.

#[derive(Debug, Clone)]
pub enum HArg {
    Var,
    Const(Val),
    Wild,
}

#[derive(Debug, Clone)]
pub enum Lit {
    Cmp(usize, Op, Val),
    VarCmp(usize, Op, usize),
    Call(bool, usize),
}

#[derive(Debug, Clone)]
pub struct Clause {
    pub head: Vec<HArg>,
    pub body: Vec<Lit>,
}

/// Predicates `p0..pk`, each taking one argument per feature; `pi` only
/// calls `pj` with `j < i`, so the program is stratified.
#[derive(Debug, Clone)]
pub struct GenProgram {
    pub features: Vec<Feat>,
    pub preds: Vec<Vec<Clause>>,
}

pub type Tuple = Vec<Val>;

impl GenProgram {
    pub fn random(rng: &mut StdRng) -> Self {
        let features = random_features(rng, 3, 4, 20);
        let n = features.len();
        let npreds = rng.gen_range(1..=4);
        let mut preds = Vec::new();
        for i in 0..npreds {
            let nclauses = rng.gen_range(1..=3);
            let mut clauses = Vec::new();
            for _ in 0..nclauses {
                let mut head: Vec<HArg> = (0..n)
                    .map(|j| match rng.gen_range(0..10) {
                        0 | 1 => HArg::Const(random_in_domain(rng, &features[j])),
                        2 => HArg::Wild,
                        _ => HArg::Var,
                    })
                    .collect();
                let has_wild = head.iter().any(|h| matches!(h, HArg::Wild));
                let vars: Vec<usize> = (0..n).filter(|j| matches!(head[*j], HArg::Var)).collect();
                let mut body = Vec::new();
                for _ in 0..rng.gen_range(0..=3) {
                    match rng.gen_range(0..10) {
                        0..=2 if i > 0 && !has_wild => body.push(Lit::Call(rng.gen_bool(0.5), rng.gen_range(0..i))),
                        3 => {
                            let nums: Vec<usize> = vars.iter().copied().filter(|j| !features[*j].is_cat()).collect();
                            if nums.len() >= 2 {
                                let a = nums[0];
                                let b = nums[1];
                                body.push(Lit::VarCmp(a, *[Op::Lt, Op::Le, Op::Neq, Op::Eq].choose(rng).unwrap(), b));
                            }
                        }
                        _ => {
                            if let Some(&j) = vars.choose(rng) {
                                body.push(Lit::Cmp(j, random_op(rng, &features[j]), random_const(rng, &features[j])));
                            }
                        }
                    }
                }
                // An all-wildcard head would make the clause a bare fact.
                if head.iter().all(|h| matches!(h, HArg::Wild)) {
                    head[0] = HArg::Var;
                }
                clauses.push(Clause { head, body });
            }
            preds.push(clauses);
        }
        GenProgram { features, preds }
    }

    pub fn schema(&self) -> FeatureSchema {
        schema_of(&self.features)
    }

    pub fn arity(&self) -> usize {
        self.features.len()
    }

    fn head_term(&self, c: &Clause, j: usize) -> String {
        match &c.head[j] {
            HArg::Var => format!("V{j}"),
            HArg::Const(v) => v.text(),
            HArg::Wild => "_".into(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, clauses) in self.preds.iter().enumerate() {
            for c in clauses {
                let args: Vec<String> = (0..self.arity()).map(|j| self.head_term(c, j)).collect();
                let head = format!("p{i}({})", args.join(", "));
                let body: Vec<String> = c
                    .body
                    .iter()
                    .map(|l| match l {
                        Lit::Cmp(j, op, v) => format!("V{j} {} {}", op.text(!self.features[*j].is_cat()), v.text()),
                        Lit::VarCmp(a, op, b) => format!("V{a} {} V{b}", op.text(true)),
                        Lit::Call(pos, k) => {
                            format!("{}p{k}({})", if *pos { "" } else { "not " }, args.join(", "))
                        }
                    })
                    .collect();
                if body.is_empty() {
                    out.push_str(&format!("{head}.\n"));
                } else {
                    out.push_str(&format!("{head} :- {}.\n", body.join(", ")));
                }
            }
        }
        out
    }

    /// Truth sets of every predicate over the full domain product.
    pub fn oracle(&self) -> Vec<HashSet<Tuple>> {
        let all = product(&self.features.iter().map(Feat::values).collect::<Vec<_>>());
        let mut truth: Vec<HashSet<Tuple>> = Vec::new();
        for clauses in &self.preds {
            let mut set = HashSet::new();
            for t in &all {
                if clauses.iter().any(|c| self.clause_holds(c, t, &truth)) {
                    set.insert(t.clone());
                }
            }
            truth.push(set);
        }
        truth
    }

    fn clause_holds(&self, c: &Clause, t: &Tuple, lower: &[HashSet<Tuple>]) -> bool {
        for (j, h) in c.head.iter().enumerate() {
            if let HArg::Const(v) = h {
                if &t[j] != v {
                    return false;
                }
            }
        }
        c.body.iter().all(|l| match l {
            Lit::Cmp(j, op, v) => op.holds(&t[*j], v),
            Lit::VarCmp(a, op, b) => op.holds(&t[*a], &t[*b]),
            Lit::Call(pos, k) => lower[*k].contains(t) == *pos,
        })
    }

    /// Per-feature points: every categorical value; numeric range ends
    /// plus each constant and its neighbours, clipped to the range.
    pub fn boundary_points(&self) -> Vec<Vec<Val>> {
        let mut consts: Vec<BTreeSet<i64>> = vec![BTreeSet::new(); self.arity()];
        for c in self.preds.iter().flatten() {
            for (j, h) in c.head.iter().enumerate() {
                if let HArg::Const(Val::N(n)) = h {
                    consts[j].insert(*n);
                }
            }
            for l in &c.body {
                if let Lit::Cmp(j, _, Val::N(n)) = l {
                    consts[*j].insert(*n);
                }
            }
        }
        self.features
            .iter()
            .zip(consts)
            .map(|(f, cs)| match &f.kind {
                Kind::Cat(_) => f.values(),
                Kind::Num(lo, hi) => {
                    let mut pts: BTreeSet<i64> = [*lo, *hi].into();
                    for c in cs {
                        for d in [c - 1, c, c + 1] {
                            if (*lo..=*hi).contains(&d) {
                                pts.insert(d);
                            }
                        }
                    }
                    pts.into_iter().map(Val::N).collect()
                }
            })
            .collect()
    }

    /// Typing literals binding `V0..` to their feature domains.
    pub fn typing(&self) -> Vec<String> {
        self.features
            .iter()
            .enumerate()
            .map(|(j, f)| if f.is_cat() { format!("f_domain({}, V{j})", f.name) } else { format!("{}(V{j})", f.name) })
            .collect()
    }
}

fn random_in_domain(rng: &mut StdRng, f: &Feat) -> Val {
    f.values().choose(rng).unwrap().clone()
}

pub fn product(axes: &[Vec<Val>]) -> Vec<Tuple> {
    let mut out: Vec<Tuple> = vec![vec![]];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut t = prefix.clone();
                    t.push(v.clone());
                    t
                })
            })
            .collect();
    }
    out
}

// ---------------------------------------------------------------------------
// Small classifiers with causal rules for the minimality suite.

pub type Cond = (usize, Op, Val);

#[derive(Debug, Clone)]
pub struct CausalRule {
    pub features: Vec<usize>,
    pub clauses: Vec<Vec<Cond>>,
}

#[derive(Debug, Clone)]
pub struct GenClassifier {
    pub features: Vec<Feat>,
    /// Clauses of the undesired-label predicate, each a conjunction.
    pub decision: Vec<Vec<Cond>>,
    pub causal: Option<CausalRule>,
}

fn random_conj(rng: &mut StdRng, features: &[Feat], allowed: &[usize]) -> Vec<Cond> {
    let k = rng.gen_range(1..=2.min(allowed.len()).max(1));
    let mut picks: Vec<usize> = allowed.to_vec();
    picks.shuffle(rng);
    picks
        .into_iter()
        .take(k)
        .map(|j| {
            let f = &features[j];
            let op = if f.is_cat() {
                *[Op::Eq, Op::Neq].choose(rng).unwrap()
            } else {
                *[Op::Le, Op::Gt, Op::Lt, Op::Ge].choose(rng).unwrap()
            };
            (j, op, random_in_domain(rng, f))
        })
        .collect()
}

impl GenClassifier {
    pub fn random(rng: &mut StdRng) -> Self {
        loop {
            let n = rng.gen_range(2..=3);
            let mut features = random_features(rng, n, 3, 7);
            while features.len() < 2 {
                features = random_features(rng, n, 3, 7);
            }
            let worlds: usize = features.iter().map(|f| f.values().len()).product();
            if worlds * worlds > 100_000 {
                continue;
            }
            let all: Vec<usize> = (0..features.len()).collect();
            let decision = (0..rng.gen_range(1..=3)).map(|_| random_conj(rng, &features, &all)).collect();
            let causal = if features.len() >= 2 && rng.gen_bool(0.6) {
                let mut fs = all.clone();
                fs.shuffle(rng);
                let mut fs: Vec<usize> = fs.into_iter().take(2).collect();
                fs.sort();
                let clauses = (0..rng.gen_range(1..=3)).map(|_| random_conj(rng, &features, &fs)).collect();
                Some(CausalRule { features: fs, clauses })
            } else {
                None
            };
            return GenClassifier { features, decision, causal };
        }
    }

    pub fn schema(&self) -> FeatureSchema {
        schema_of(&self.features)
    }

    fn render_clause(&self, pred: &str, positions: &[usize], conj: &[Cond]) -> String {
        let used: BTreeSet<usize> = conj.iter().map(|c| c.0).collect();
        let args: Vec<String> =
            positions.iter().map(|j| if used.contains(j) { format!("V{j}") } else { "_".into() }).collect();
        let body: Vec<String> = conj
            .iter()
            .map(|(j, op, v)| format!("V{j} {} {}", op.text(!self.features[*j].is_cat()), v.text()))
            .collect();
        format!("{pred}({}) :- {}.\n", args.join(", "), body.join(", "))
    }

    pub fn render(&self) -> String {
        let names: Vec<&str> = self.features.iter().map(|f| f.name.as_str()).collect();
        let all: Vec<usize> = (0..self.features.len()).collect();
        let mut out = format!("#decision d({}).\n#labels(bad, good).\n", names.join(", "));
        for conj in &self.decision {
            out.push_str(&self.render_clause("d", &all, conj));
        }
        if let Some(c) = &self.causal {
            let fs: Vec<&str> = c.features.iter().map(|j| names[*j]).collect();
            out.push_str(&format!("% causal\n#causal c({}).\n", fs.join(", ")));
            for conj in &c.clauses {
                out.push_str(&self.render_clause("c", &c.features, conj));
            }
        }
        out
    }

    pub fn worlds(&self) -> Vec<Tuple> {
        product(&self.features.iter().map(Feat::values).collect::<Vec<_>>())
    }

    pub fn undesired(&self, w: &Tuple) -> bool {
        self.decision.iter().any(|conj| conj.iter().all(|(j, op, v)| op.holds(&w[*j], v)))
    }

    pub fn causal_ok(&self, w: &Tuple) -> bool {
        match &self.causal {
            None => true,
            Some(c) => c.clauses.iter().any(|conj| conj.iter().all(|(j, op, v)| op.holds(&w[*j], v))),
        }
    }

    pub fn instance(&self, w: &Tuple) -> Instance {
        let mut inst = Instance::new();
        for (f, v) in self.features.iter().zip(w) {
            inst = inst.with(&f.name, v.to_value());
        }
        inst
    }

    pub fn tuple(&self, inst: &Instance) -> Tuple {
        self.features
            .iter()
            .map(|f| match inst.get(&f.name).expect("total") {
                Value::Sym(s) => Val::S(s.as_str().to_string()),
                Value::Num(n) => Val::N(*n),
            })
            .collect()
    }

    /// Control value per feature for moving from `a` to `b`.
    pub fn controls(&self, a: &Tuple, b: &Tuple) -> Vec<i8> {
        a.iter()
            .zip(b)
            .map(|(x, y)| match (x, y) {
                (Val::N(x), Val::N(y)) => (y > x) as i8 - (y < x) as i8,
                _ => (x != y) as i8,
            })
            .collect()
    }

    pub fn respects(&self, spec: &ControlSpec, z: &[i8]) -> bool {
        self.features.iter().zip(z).all(|(f, &zi)| match spec.get(&f.name) {
            Control::Any => true,
            Control::Immutable => zi == 0,
            Control::MustChange | Control::MustIncrease => zi == 1,
            Control::MustDecrease => zi == -1,
        })
    }

    /// Brute-force minimum cost and the control vectors reaching it.
    pub fn oracle_minimum(&self, factual: &Tuple, spec: &ControlSpec) -> Option<(usize, BTreeSet<Vec<i8>>)> {
        let mut best: Option<(usize, BTreeSet<Vec<i8>>)> = None;
        for w in self.worlds() {
            if self.undesired(&w) || !self.causal_ok(&w) {
                continue;
            }
            let z = self.controls(factual, &w);
            if !self.respects(spec, &z) {
                continue;
            }
            let cost = z.iter().filter(|v| **v != 0).count();
            match &mut best {
                Some((c, set)) if *c == cost => {
                    set.insert(z);
                }
                Some((c, _)) if *c < cost => {}
                _ => best = Some((cost, [z].into())),
            }
        }
        best
    }

    pub fn random_spec(&self, rng: &mut StdRng, factual: &Tuple) -> ControlSpec {
        let mut spec = ControlSpec::new();
        for (f, v) in self.features.iter().zip(factual) {
            let r = rng.gen_range(0..20);
            let c = match (&f.kind, v) {
                _ if r < 12 => Control::Any,
                _ if r < 17 => Control::Immutable,
                (Kind::Cat(_), _) => Control::MustChange,
                (Kind::Num(_, hi), Val::N(x)) if r % 2 == 0 && x < hi => Control::MustIncrease,
                (Kind::Num(lo, _), Val::N(x)) if x > lo => Control::MustDecrease,
                _ => Control::Any,
            };
            spec = spec.set(&f.name, c);
        }
        spec
    }
}

// ---------------------------------------------------------------------------
// Rule text for the round-trip suite: everything the grammar can express.

pub fn random_rule_text(rng: &mut StdRng) -> String {
    let mut out = String::new();
    let g = GenProgram::random(rng);
    out.push_str(&g.render());
    let names: Vec<String> = g.features.iter().map(|f| f.name.clone()).collect();
    let mut emitted = HashSet::new();
    for _ in 0..rng.gen_range(0..4) {
        let s = match rng.gen_range(0..9) {
            0 => format!("fact_{}({}).\n", rng.gen_range(0..9), random_scalar(rng)),
            1 => format!(":- p0({}), {}.\n", vars(g.arity()), cmp_on(rng, &g)),
            2 => format!("not q{0}(X) :- X \\= {1}.\n", rng.gen_range(0..3), random_atom(rng)),
            3 => {
                let p = format!("pick{}", rng.gen_range(0..9));
                format!("{p}(a) :- not {p}(b).\n{p}(b) :- not {p}(a).\n")
            }
            4 => format!("r(X, Y) :- X #>= `{}`, Y #=< {}.\n", random_decimal(rng), random_decimal(rng)),
            5 => format!("#labels({}, {}).\n", random_atom(rng), random_atom(rng)),
            6 => {
                let f = names.choose(rng).unwrap();
                format!(
                    "not_before_int_{f}(X) :- f_domain({f}, Y), before_int_{f}(Y), Y \\= X.\nbefore_int_{f}(X) :- not not_before_int_{f}(X).\n"
                )
            }
            7 => format!("s(X) :- X = {}, not t(X).\nt({}).\n", random_atom(rng), random_atom(rng)),
            _ => {
                let c = cmp_on(rng, &g).replace('V', "W");
                let var = c.split(' ').next().unwrap_or("W0").to_string();
                format!("u({var}, {}) :- {c}.\n", random_scalar(rng))
            }
        };
        if emitted.insert(s.clone()) {
            out.push_str(&s);
        }
    }
    out.push_str(&format!("#decision p0({}).\n", names.join(", ")));
    if rng.gen_bool(0.5) {
        out.push_str(&format!(
            "% causal\n#causal cz({}).\ncz({}) :- {}.\n",
            names.join(", "),
            vars(g.arity()),
            cmp_on(rng, &g)
        ));
    }
    out
}

fn vars(n: usize) -> String {
    (0..n).map(|j| format!("V{j}")).collect::<Vec<_>>().join(", ")
}

fn cmp_on(rng: &mut StdRng, g: &GenProgram) -> String {
    let j = rng.gen_range(0..g.arity());
    let f = &g.features[j];
    format!("V{j} {} {}", random_op(rng, f).text(!f.is_cat()), random_const(rng, f).text())
}

fn random_atom(rng: &mut StdRng) -> String {
    ["a", "b", "'<=50K'", "'>50K'", "married_civ_spouse", "'Hello world'", "x1"].choose(rng).unwrap().to_string()
}

fn random_decimal(rng: &mut StdRng) -> String {
    match rng.gen_range(0..4) {
        0 => rng.gen_range(-50..50).to_string(),
        1 => format!("{}.{}", rng.gen_range(0..9999), rng.gen_range(0..10)),
        2 => format!("-{}.{:02}", rng.gen_range(0..99), rng.gen_range(0..100)),
        _ => format!("{}.0", rng.gen_range(0..99999)),
    }
}

fn random_scalar(rng: &mut StdRng) -> String {
    if rng.gen_bool(0.5) {
        random_atom(rng)
    } else {
        random_decimal(rng)
    }
}

/// Seeded generator for reproducible suites.
pub fn rng(seed: u64) -> StdRng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn tuple_key(t: &Tuple) -> String {
    t.iter().map(Val::text).collect::<Vec<_>>().join(",")
}

pub fn counts<T: Ord + Clone>(items: &[T]) -> BTreeMap<T, usize> {
    let mut m = BTreeMap::new();
    for i in items {
        *m.entry(i.clone()).or_insert(0) += 1;
    }
    m
}
