use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::ast::*;
use super::program::Program;
use super::RuleError;
use crate::schema::{FeatureKind, FeatureSchema};

/// Result of [`check_program`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Analysis {
    /// Each defined predicate with the user predicates its clauses call.
    pub dependencies: BTreeMap<String, BTreeSet<String>>,
    /// Predicates grouped by evaluation layer: layer 0 depends on nothing
    /// user-defined, layer k only on layers < k.
    pub strata: Vec<Vec<String>>,
    /// `(predicate, domain, phase)` for every recognized even loop.
    pub abducibles: Vec<(String, String, String)>,
    /// Schema features each predicate constrains, directly or through callees.
    pub constrains: BTreeMap<String, BTreeSet<String>>,
}

/// Analyzes an admissible program against a schema, rejecting references
/// to features the schema does not declare.
pub fn check_program(p: &Program, schema: &FeatureSchema) -> Result<Analysis, RuleError> {
    let defined: BTreeSet<PredKey> = p.defined_predicates().into_iter().collect();

    for r in p.rules() {
        check_feature_refs(r, schema)?;
    }
    for a in p.abducibles() {
        if let AbducibleDomain::Feature(f) = &a.domain {
            match schema.get(f).map(|d| &d.kind) {
                None => return Err(RuleError::UndeclaredFeature { feature: f.clone(), context: a.pred.clone() }),
                Some(FeatureKind::Numeric { .. }) => {
                    return Err(RuleError::FeatureKind {
                        feature: f.clone(),
                        expected: "categorical",
                        context: a.pred.clone(),
                    })
                }
                _ => {}
            }
        }
    }
    for d in p.directives() {
        let (pred, features) = match d {
            Directive::Decision { pred, features } | Directive::Causal { pred, features } => (pred, features),
            Directive::Labels { .. } => continue,
        };
        for f in features {
            if schema.get(f).is_none() {
                return Err(RuleError::UndeclaredFeature { feature: f.clone(), context: d.to_string() });
            }
        }
        if !defined.contains(&PredKey::new(pred, features.len())) {
            return Err(RuleError::Directive {
                directive: d.to_string(),
                msg: format!("{pred}/{} has no clauses", features.len()),
            });
        }
    }

    let mut dependencies: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut direct: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for key in &defined {
        let name = key.to_string();
        let deps = dependencies.entry(name.clone()).or_default();
        let feats = direct.entry(name).or_default();
        for r in p.clauses(key) {
            for lit in &r.body {
                let Some(atom) = lit.atom() else { continue };
                if defined.contains(&atom.key()) {
                    deps.insert(atom.key().to_string());
                }
                if let Some(f) = feature_of_call(p, schema, atom) {
                    feats.insert(f);
                }
            }
        }
    }
    for d in p.directives() {
        if let Directive::Decision { pred, features } | Directive::Causal { pred, features } = d {
            direct.entry(PredKey::new(pred, features.len()).to_string()).or_default().extend(features.iter().cloned());
        }
    }

    // Layers by longest dependency chain; the program is acyclic.
    let mut layer: BTreeMap<String, usize> = BTreeMap::new();
    fn depth(n: &str, deps: &BTreeMap<String, BTreeSet<String>>, memo: &mut BTreeMap<String, usize>) -> usize {
        if let Some(&d) = memo.get(n) {
            return d;
        }
        let d = deps.get(n).map(|ds| ds.iter().map(|c| depth(c, deps, memo) + 1).max().unwrap_or(0)).unwrap_or(0);
        memo.insert(n.to_string(), d);
        d
    }
    for n in dependencies.keys() {
        depth(n, &dependencies, &mut layer);
    }
    let mut strata: Vec<Vec<String>> = Vec::new();
    for (n, &d) in &layer {
        if strata.len() <= d {
            strata.resize(d + 1, Vec::new());
        }
        strata[d].push(n.clone());
    }

    // Features constrained transitively.
    let mut constrains = BTreeMap::new();
    for n in dependencies.keys() {
        let mut acc = BTreeSet::new();
        let mut stack = vec![n.clone()];
        let mut seen = BTreeSet::new();
        while let Some(cur) = stack.pop() {
            if !seen.insert(cur.clone()) {
                continue;
            }
            if let Some(fs) = direct.get(&cur) {
                acc.extend(fs.iter().cloned());
            }
            if let Some(ds) = dependencies.get(&cur) {
                stack.extend(ds.iter().cloned());
            }
        }
        constrains.insert(n.clone(), acc);
    }

    let abducibles = p
        .abducibles()
        .map(|a| {
            let dom = match &a.domain {
                AbducibleDomain::Feature(f) => f.clone(),
                AbducibleDomain::Symbols(s) => {
                    format!("{{{}}}", s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "))
                }
            };
            (a.pred.clone(), dom, a.phase.to_string())
        })
        .collect();

    Ok(Analysis { dependencies, strata, abducibles, constrains })
}

fn feature_of_call(p: &Program, schema: &FeatureSchema, atom: &Atom) -> Option<String> {
    if atom.pred == "f_domain" && atom.args.len() == 2 {
        if let Term::Sym(f) = &atom.args[0] {
            return Some(f.as_str().to_string());
        }
    }
    if atom.args.len() == 1 {
        if let Some(def) = schema.get(&atom.pred) {
            if !def.is_categorical() {
                return Some(def.name.clone());
            }
        }
        let abd = p.abducible(&atom.pred).or_else(|| p.abducible_for_complement(&atom.pred));
        if let Some(Abducible { domain: AbducibleDomain::Feature(f), .. }) = abd {
            return Some(f.clone());
        }
    }
    None
}

fn check_feature_refs(r: &Rule, schema: &FeatureSchema) -> Result<(), RuleError> {
    let atoms = r.head_atom().into_iter().chain(r.body.iter().filter_map(BodyLiteral::atom));
    for a in atoms {
        if a.pred != "f_domain" || a.args.len() != 2 {
            continue;
        }
        let Term::Sym(f) = &a.args[0] else { continue };
        let def = schema
            .get(f.as_str())
            .ok_or_else(|| RuleError::UndeclaredFeature { feature: f.as_str().to_string(), context: r.to_string() })?;
        let Some(domain) = def.domain() else {
            return Err(RuleError::FeatureKind {
                feature: def.name.clone(),
                expected: "categorical",
                context: r.to_string(),
            });
        };
        if let Term::Sym(v) = &a.args[1] {
            if !domain.contains(v) {
                return Err(RuleError::DomainValue {
                    feature: def.name.clone(),
                    value: v.as_str().to_string(),
                    context: r.to_string(),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rulelang::parse_program;
    use crate::schema::FeatureDef;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureDef::categorical("marital_status", &["married_civ_spouse", "divorced"]),
            FeatureDef::numeric("capital_gain", 0, 99999, 0),
            FeatureDef::numeric("education_num", 1, 16, 0),
        ])
        .unwrap()
    }

    #[test]
    fn undeclared_feature() {
        let p = parse_program("p(X) :- f_domain(color, X).").unwrap();
        assert!(matches!(check_program(&p, &schema()), Err(RuleError::UndeclaredFeature { .. })));
        let p = parse_program("#decision p(color).\np(X) :- X = a.").unwrap();
        assert!(matches!(check_program(&p, &schema()), Err(RuleError::UndeclaredFeature { .. })));
    }

    #[test]
    fn strata_and_constraints() {
        let p = parse_program(
            "capital_gain(X) :- X #>= 0, X #=< 99999.\n\
             lite(X, Y) :- X \\= married_civ_spouse, Y #=< 6849.\n\
             w(A, B) :- f_domain(marital_status, A), capital_gain(B), lite(A, B).",
        )
        .unwrap();
        let a = check_program(&p, &schema()).unwrap();
        assert_eq!(a.strata.len(), 2);
        assert_eq!(a.strata[1], vec!["w/2".to_string()]);
        let w: Vec<&str> = a.constrains["w/2"].iter().map(String::as_str).collect();
        assert_eq!(w, vec!["capital_gain", "marital_status"]);
    }

    #[test]
    fn teaches_db_reported_as_choice() {
        let p = parse_program("teaches_db(mary) :- not teaches_db(john).\nteaches_db(john) :- not teaches_db(mary).")
            .unwrap();
        let a = check_program(&p, &FeatureSchema::default()).unwrap();
        assert_eq!(a.abducibles, vec![("teaches_db".into(), "{mary, john}".into(), "choice".into())]);
    }
}
