//! Property suites, shared by their own test files and the acceptance run.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;

use recourse::cfe::{compare_numeric, craig_interpolant, Control, ControlSpec, Interpolant};
use recourse::engine::{Engine, Scalar, SolveOptions};
use recourse::rulelang::{parse_program, parse_query, print_program};
use recourse::workspace::{Workspace, WorkspaceError};

use super::{rng, tuple_key, GenClassifier, GenProgram, Tuple, Val};

#[derive(Debug, Default)]
pub struct SuiteReport {
    pub cases: usize,
    pub checks: usize,
    pub skipped: usize,
    pub violations: Vec<String>,
}

impl SuiteReport {
    fn fail(&mut self, msg: String) {
        if self.violations.len() < 20 {
            self.violations.push(msg);
        }
    }

    pub fn summary(&self) -> String {
        format!("{} cases, {} checks, {} violations", self.cases, self.checks, self.violations.len())
    }
}

fn ground_atom(pred: usize, t: &Tuple) -> String {
    format!("p{pred}({})", tuple_key(t).replace(',', ", "))
}

fn succeeds(engine: &Engine, query: &str) -> Result<bool, String> {
    let goal = parse_query(query).map_err(|e| format!("{query}: {e}"))?;
    match engine.solve(&goal, SolveOptions::limit(1)).map_err(|e| format!("{query}: {e}"))?.next() {
        None => Ok(false),
        Some(Ok(_)) => Ok(true),
        Some(Err(e)) => Err(format!("{query}: {e}")),
    }
}

fn scalar_val(s: &Scalar) -> Val {
    match s {
        Scalar::Sym(s) => Val::S(s.as_str().to_string()),
        Scalar::Num(n) => Val::N(*n),
    }
}

/// Every answer of `query` expanded to ground tuples of `V0..`.
fn answer_set(engine: &Engine, query: &str) -> Result<HashSet<Tuple>, String> {
    let goal = parse_query(query).map_err(|e| format!("{query}: {e}"))?;
    let mut out = HashSet::new();
    for sol in engine.solve(&goal, SolveOptions::unlimited()).map_err(|e| e.to_string())? {
        let sol = sol.map_err(|e| format!("{query}: {e}"))?;
        for t in sol.expansions(64).map_err(|e| format!("{query}: {e}"))? {
            out.insert(t.iter().map(scalar_val).collect());
        }
    }
    Ok(out)
}

/// For every predicate of each random program and every ground atom at
/// the boundary points, exactly one of the atom and its negation
/// succeeds, and the one that does agrees with bottom-up evaluation.
/// Where the domain is small, open queries are also compared as sets.
pub fn duality(programs: usize, seed: u64) -> SuiteReport {
    let mut r = rng(seed);
    let mut rep = SuiteReport::default();
    while rep.cases < programs {
        let g = GenProgram::random(&mut r);
        let text = g.render();
        rep.cases += 1;
        let program = match parse_program(&text) {
            Ok(p) => p,
            Err(e) => {
                rep.fail(format!("generated program rejected: {e}\n{text}"));
                continue;
            }
        };
        let engine = match Engine::from_program(g.schema(), &program) {
            Ok(e) => e,
            Err(e) => {
                rep.fail(format!("engine: {e}\n{text}"));
                continue;
            }
        };
        let truth = g.oracle();
        let points = super::product(&g.boundary_points());
        for (i, set) in truth.iter().enumerate() {
            for t in &points {
                let atom = ground_atom(i, t);
                rep.checks += 1;
                match (succeeds(&engine, &atom), succeeds(&engine, &format!("not {atom}"))) {
                    (Ok(pos), Ok(neg)) => {
                        if pos == neg {
                            rep.fail(format!("{atom}: positive {pos}, negative {neg}\n{text}"));
                        } else if pos != set.contains(t) {
                            rep.fail(format!("{atom}: engine says {pos}, oracle {}\n{text}", set.contains(t)));
                        }
                    }
                    (Err(e), _) | (_, Err(e)) => rep.fail(format!("{e}\n{text}")),
                }
            }
            let size: usize = g.features.iter().map(|f| f.values().len()).product();
            if size <= 3000 {
                let typing = g.typing().join(", ");
                let vars: Vec<String> = (0..g.arity()).map(|j| format!("V{j}")).collect();
                let call = format!("p{i}({})", vars.join(", "));
                let everything: HashSet<Tuple> =
                    super::product(&g.features.iter().map(|f| f.values()).collect::<Vec<_>>()).into_iter().collect();
                for (negated, expect) in [(false, set.clone()), (true, everything.difference(set).cloned().collect())] {
                    let q = format!("{typing}, {}{call}", if negated { "not " } else { "" });
                    rep.checks += 1;
                    match answer_set(&engine, &q) {
                        Ok(got) if got == expect => {}
                        Ok(got) => {
                            let extra = got.difference(&expect).next().map(tuple_key);
                            let missing = expect.difference(&got).next().map(tuple_key);
                            rep.fail(format!("{q}: extra {extra:?}, missing {missing:?}\n{text}"));
                        }
                        Err(e) => rep.fail(format!("{e}\n{text}")),
                    }
                }
            }
        }
    }
    rep
}

/// Random small classifiers with causal rules: the cheapest cost found
/// equals the brute-force minimum, the control vectors at that cost are
/// exactly those of the brute force, and every result keeps the flip,
/// causal closure, control consistency and cost identity.
pub fn minimality(classifiers: usize, seed: u64) -> SuiteReport {
    let mut r = rng(seed);
    let mut rep = SuiteReport::default();
    let mut attempts = 0;
    while rep.cases < classifiers {
        attempts += 1;
        assert!(attempts < classifiers * 50, "generator cannot produce usable classifiers");
        let g = GenClassifier::random(&mut r);
        let text = g.render();
        let ws = match Workspace::load("gen", g.schema(), &text) {
            Ok(ws) => ws,
            Err(WorkspaceError::NotTotal { .. }) => {
                rep.skipped += 1;
                continue;
            }
            Err(e) => {
                rep.cases += 1;
                rep.fail(format!("load: {e}\n{text}"));
                continue;
            }
        };
        // Rules that never mention a feature leave it inactive; the
        // oracle works over the same active features.
        if ws.schema().len() != g.features.len() {
            rep.skipped += 1;
            continue;
        }
        let candidates: Vec<Tuple> = g.worlds().into_iter().filter(|w| g.undesired(w) && g.causal_ok(w)).collect();
        let Some(factual) = candidates.choose(&mut r).cloned() else {
            rep.skipped += 1;
            continue;
        };
        rep.cases += 1;
        let spec = g.random_spec(&mut r, &factual);
        let got = check_interpolant(&g, &ws, &factual, &spec, &text, &mut rep);

        // Loosening one immutable feature never raises the minimum.
        let locked: Vec<&str> =
            g.features.iter().map(|f| f.name.as_str()).filter(|f| spec.get(f) == Control::Immutable).collect();
        if let (Some(f), Some(before)) = (locked.choose(&mut r), got) {
            let looser = spec.clone().set(f, Control::Any);
            rep.checks += 1;
            if let Some(after) = check_interpolant(&g, &ws, &factual, &looser, &text, &mut rep) {
                if after > before {
                    rep.fail(format!("relaxing {f} raised the cost {before} -> {after}\n{text}"));
                }
            }
        }
        if r.gen_bool(0.1) {
            rep.checks += 1;
            let all = ControlSpec::all_immutable(ws.schema());
            match craig_interpolant(&ws, &g.instance(&factual), &all) {
                Ok(Interpolant::NoRecourse) => {}
                other => rep.fail(format!("all immutable gave {other:?}\n{text}")),
            }
        }
    }
    rep
}

/// Checks one search against the oracle; returns the cost (`usize::MAX`
/// for no recourse) when the search itself succeeded.
fn check_interpolant(
    g: &GenClassifier,
    ws: &Workspace,
    factual: &Tuple,
    spec: &ControlSpec,
    text: &str,
    rep: &mut SuiteReport,
) -> Option<usize> {
    let oracle = g.oracle_minimum(factual, spec);
    rep.checks += 1;
    let got = match craig_interpolant(ws, &g.instance(factual), spec) {
        Ok(i) => i,
        Err(e) => {
            rep.fail(format!("search failed: {e}\n{text}"));
            return None;
        }
    };
    let ctx = || format!("factual {} spec {:?}\n{text}", tuple_key(factual), spec);
    match (&got, &oracle) {
        (Interpolant::NoRecourse, None) => return Some(usize::MAX),
        (Interpolant::NoRecourse, Some((c, _))) => {
            rep.fail(format!("no recourse, oracle cost {c}; {}", ctx()));
            return None;
        }
        (Interpolant::Found { cost, .. }, None) => {
            rep.fail(format!("found cost {cost}, oracle none; {}", ctx()));
            return None;
        }
        (Interpolant::Found { cost, results }, Some((c, vectors))) => {
            if *cost as usize != *c {
                rep.fail(format!("cost {cost}, oracle {c}; {}", ctx()));
            }
            let mut seen = BTreeSet::new();
            for res in results {
                rep.checks += 1;
                let pre = g.tuple(&res.factual);
                let post = g.tuple(&res.counterfactual);
                let z = g.controls(&pre, &post);
                let nonzero = z.iter().filter(|v| **v != 0).count();
                let problems = [
                    (pre != *factual, "factual differs from the input"),
                    (!g.undesired(&pre), "factual is not undesired"),
                    (g.undesired(&post), "counterfactual is undesired"),
                    (!g.causal_ok(&pre) || !g.causal_ok(&post), "causal rule violated"),
                    (res.controls.0 != z, "controls disagree with the worlds"),
                    (res.cost as usize != nonzero || nonzero == 0, "cost identity"),
                    (!g.respects(spec, &z), "control spec violated"),
                ];
                for (bad, what) in problems {
                    if bad {
                        rep.fail(format!("{what}: {} -> {}; {}", tuple_key(&pre), tuple_key(&post), ctx()));
                    }
                }
                // Numeric intervals contain their witness.
                for (f, v) in g.features.iter().zip(&post) {
                    if let (Some((lo, hi)), Val::N(n)) = (res.intervals.get(&f.name), v) {
                        if !(lo <= n && n <= hi) || compare_numeric(*lo, *n) < 0 {
                            rep.fail(format!("interval [{lo}, {hi}] misses witness {n} of {}; {}", f.name, ctx()));
                        }
                    }
                }
                seen.insert(z);
            }
            if &seen != vectors {
                rep.fail(format!("control vectors {seen:?}, oracle {vectors:?}; {}", ctx()));
            }
            Some(*cost as usize)
        }
    }
}

/// print then parse is the identity on parsed programs.
pub fn round_trip_texts(texts: &[(String, String)]) -> SuiteReport {
    let mut rep = SuiteReport::default();
    for (name, text) in texts {
        rep.cases += 1;
        rep.checks += 1;
        let p = match parse_program(text) {
            Ok(p) => p,
            Err(e) => {
                rep.fail(format!("{name}: does not parse: {e}\n{text}"));
                continue;
            }
        };
        let printed = print_program(&p);
        match parse_program(&printed) {
            Ok(q) if q == p => {
                if print_program(&q) != printed {
                    rep.fail(format!("{name}: printing is not stable"));
                }
            }
            Ok(_) => rep.fail(format!("{name}: reparsed program differs\n{printed}")),
            Err(e) => rep.fail(format!("{name}: printed form does not parse: {e}\n{printed}")),
        }
    }
    rep
}

pub fn generated_texts(n: usize, seed: u64) -> Vec<(String, String)> {
    let mut r = rng(seed);
    (0..n).map(|i| (format!("generated #{i}"), super::random_rule_text(&mut r))).collect()
}

pub fn fixture_texts() -> Vec<(String, String)> {
    let root = super::fixture("");
    let mut out = Vec::new();
    let mut dirs: Vec<_> = std::fs::read_dir(&root).unwrap().filter_map(|e| e.ok()).map(|e| e.path()).collect();
    dirs.sort();
    for d in dirs.into_iter().filter(|d| d.is_dir()) {
        let mut files: Vec<_> = std::fs::read_dir(&d).unwrap().filter_map(|e| e.ok()).map(|e| e.path()).collect();
        files.sort();
        // Query files hold goals, not programs.
        for p in files.into_iter().filter(|p| p.extension().is_some_and(|e| e == "lp") && !p.ends_with("queries.lp")) {
            if let Ok(text) = std::fs::read_to_string(&p) {
                out.push((p.display().to_string(), text));
            }
        }
    }
    out
}
