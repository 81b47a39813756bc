//! Fixture-backed expectations: the dual listing of the adult decision
//! predicate, and the query files of the multi-world programs.

use std::collections::HashMap;

use recourse::dual::dualize_predicate;
use recourse::engine::{Engine, Scalar, Solution, SolveOptions};
use recourse::rulelang::{parse_items, parse_program, parse_query, BodyLiteral, Head, ItemKind, PredKey, Rule, Term};
use recourse::schema::FeatureSchema;

/// Prints a rule with its variables renamed `V0, V1, ...` in order of
/// first occurrence, so that alpha-equivalent rules print the same.
pub fn canonical(rule: &Rule) -> String {
    let mut names: HashMap<String, String> = HashMap::new();
    let mut rename = |t: &Term| match t {
        Term::Var(v) if v != "_" => {
            let n = names.len();
            Term::Var(names.entry(v.clone()).or_insert_with(|| format!("V{n}")).clone())
        }
        other => other.clone(),
    };
    let mut out = rule.clone();
    match &mut out.head {
        Head::Atom(a) | Head::Negated(a) => a.args = a.args.iter().map(&mut rename).collect(),
        Head::Constraint => {}
    }
    for l in &mut out.body {
        match l {
            BodyLiteral::Pos(a) | BodyLiteral::Naf(a) => a.args = a.args.iter().map(&mut rename).collect(),
            BodyLiteral::Cmp { lhs, rhs, .. } => {
                *lhs = rename(lhs);
                *rhs = rename(rhs);
            }
        }
    }
    out.to_string()
}

/// Compares the generated duals of `lite_le_50K/3` with the stored
/// listing, clause by clause and in order. Returns the rule count.
pub fn dual_golden() -> Result<usize, String> {
    let rules = std::fs::read_to_string(super::fixture("adult").join("rules.lp")).map_err(|e| e.to_string())?;
    let golden =
        std::fs::read_to_string(super::fixture("adult").join("lite_le_50K.dual.lp")).map_err(|e| e.to_string())?;
    let program = parse_program(&rules).map_err(|e| e.to_string())?;
    let got: Vec<String> = dualize_predicate(&program, &PredKey::new("lite_le_50K", 3))
        .map_err(|e| e.to_string())?
        .iter()
        .map(canonical)
        .collect();
    let want: Vec<String> = parse_items(&golden)
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter_map(|i| match i.kind {
            ItemKind::Rule(r) => Some(canonical(&r)),
            _ => None,
        })
        .collect();
    if got == want {
        return Ok(got.len());
    }
    Err(format!("generated:\n{}\nexpected:\n{}", got.join("\n"), want.join("\n")))
}

/// Runs every query of `fixtures/<name>/queries.lp` and returns the
/// answers per query.
pub fn query_answers(name: &str) -> Result<Vec<(String, Vec<Solution>)>, String> {
    let dir = super::fixture(name);
    let rules = std::fs::read_to_string(dir.join("rules.lp")).map_err(|e| e.to_string())?;
    let queries = std::fs::read_to_string(dir.join("queries.lp")).map_err(|e| e.to_string())?;
    let program = parse_program(&rules).map_err(|e| e.to_string())?;
    let engine = Engine::from_program(FeatureSchema::default(), &program).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for line in queries.lines().map(str::trim).filter(|l| l.starts_with("?-")) {
        let goal = parse_query(line).map_err(|e| format!("{line}: {e}"))?;
        let sols = engine
            .solve(&goal, SolveOptions::unlimited())
            .map_err(|e| format!("{line}: {e}"))?
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("{line}: {e}"))?;
        out.push((line.to_string(), sols));
    }
    Ok(out)
}

fn sym(v: &Scalar) -> String {
    match v {
        Scalar::Sym(s) => s.as_str().to_string(),
        Scalar::Num(n) => n.to_string(),
    }
}

/// The multi-world expectations: two worlds for the choice, and default
/// reasoning for the birds. Returns a one-line description.
pub fn multi_world() -> Result<String, String> {
    let teaches = query_answers("teaches_db")?;
    let [(q, sols)] = teaches.as_slice() else {
        return Err(format!("teaches_db: expected one query, found {}", teaches.len()));
    };
    let mut people: Vec<String> = sols.iter().filter_map(|s| s.value("X").map(sym)).collect();
    people.sort();
    if people != ["john", "mary"] {
        return Err(format!("{q}: answers {people:?}"));
    }
    for s in sols {
        let x = s.value("X").map(sym).unwrap_or_default();
        let other = if x == "john" { "mary" } else { "john" };
        if !s.model().contains(&format!("not teaches_db({other})")) {
            return Err(format!("{q}: world for {x} lacks not teaches_db({other}): {:?}", s.model()));
        }
    }
    for (q, sols) in query_answers("bird")? {
        if sols.len() != 1 {
            return Err(format!("{q}: {} answers, expected 1", sols.len()));
        }
    }
    Ok("teaches_db has 2 worlds, fly(tweety) and not fly(pingu) proved".into())
}
