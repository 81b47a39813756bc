//! The adult fixture's rules written out by hand over the same six
//! features, so brute force never touches the engine.

use std::collections::BTreeSet;

use recourse::schema::{Instance, Value};
use recourse::workspace::Workspace;

use super::{Tuple, Val};

pub fn adult() -> Workspace {
    Workspace::load_dir(&super::fixture("adult")).unwrap()
}

pub fn person(ms: &str, gain: i64, edu: i64, rel: &str, sex: &str, age: i64) -> Instance {
    Instance::new()
        .with("marital_status", Value::sym(ms))
        .with("capital_gain", Value::Num(gain))
        .with("education_num", Value::Num(edu))
        .with("relationship", Value::sym(rel))
        .with("sex", Value::sym(sex))
        .with("age", Value::Num(age))
}

pub struct AdultOracle;

impl AdultOracle {
    pub fn undesired(w: &Tuple) -> bool {
        let (ms, gain, edu) = (s(&w[0]), n(&w[1]), n(&w[2]));
        (ms != "married_civ_spouse" && gain <= 6849) || (ms == "married_civ_spouse" && gain <= 5013 && edu <= 12)
    }

    pub fn causal(w: &Tuple) -> bool {
        let (ms, rel, sex, age) = (s(&w[0]), s(&w[3]), s(&w[4]), n(&w[5]));
        let spouse = rel == "husband" || rel == "wife";
        let ms_ok = match ms {
            "married_civ_spouse" => spouse,
            "never_married" => !spouse && age <= 29,
            _ => !spouse,
        };
        let sex_ok = match rel {
            "husband" => sex != "female" && age > 27,
            "wife" => sex == "female",
            _ => true,
        };
        ms_ok && sex_ok
    }

    /// Categorical domains in full; numeric axes at the thresholds, their
    /// neighbours, the range ends and the factual value.
    pub fn axes(factual: &Tuple) -> Vec<Vec<Val>> {
        let ws = adult();
        let mut axes = Vec::new();
        for (i, f) in ws.schema().features().iter().enumerate() {
            match f.domain() {
                Some(d) => axes.push(d.iter().map(|v| Val::S(v.as_str().to_string())).collect()),
                None => {
                    let pts: &[i64] = match f.name.as_str() {
                        "capital_gain" => &[0, 5012, 5013, 5014, 6848, 6849, 6850, 99999],
                        "education_num" => &[1, 11, 12, 13, 16],
                        _ => &[17, 26, 27, 28, 29, 30, 90],
                    };
                    let mut set: BTreeSet<i64> = pts.iter().copied().collect();
                    if let Val::N(x) = factual[i] {
                        set.extend([x - 1, x, x + 1].into_iter().filter(|v| pts[0] <= *v && *v <= pts[pts.len() - 1]));
                    }
                    axes.push(set.into_iter().map(Val::N).collect());
                }
            }
        }
        axes
    }

    pub fn minimum(factual: &Tuple, locked: &[usize]) -> Option<(usize, BTreeSet<Vec<i8>>)> {
        let mut best: Option<(usize, BTreeSet<Vec<i8>>)> = None;
        for w in super::product(&Self::axes(factual)) {
            if Self::undesired(&w) || !Self::causal(&w) || locked.iter().any(|&i| w[i] != factual[i]) {
                continue;
            }
            let z: Vec<i8> = factual
                .iter()
                .zip(&w)
                .map(|(a, b)| match (a, b) {
                    (Val::N(a), Val::N(b)) => (b > a) as i8 - (b < a) as i8,
                    _ => (a != b) as i8,
                })
                .collect();
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
}

fn s(v: &Val) -> &str {
    match v {
        Val::S(s) => s,
        _ => panic!("symbol expected"),
    }
}

fn n(v: &Val) -> i64 {
    match v {
        Val::N(n) => *n,
        _ => panic!("number expected"),
    }
}

pub fn tuple(ws: &Workspace, inst: &Instance) -> Tuple {
    ws.schema()
        .features()
        .iter()
        .map(|f| match inst.get(&f.name).unwrap() {
            Value::Sym(s) => Val::S(s.as_str().to_string()),
            Value::Num(n) => Val::N(*n),
        })
        .collect()
}
