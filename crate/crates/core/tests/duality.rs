mod support;

use recourse::dual::dualize_program;
use recourse::engine::{Engine, SolveOptions};
use recourse::rulelang::{parse_program, parse_query};
use recourse::schema::FeatureSchema;

#[test]
fn random_programs_are_exactly_complemented() {
    let rep = support::suites::duality(60, 0x5eed_0001);
    assert!(rep.violations.is_empty(), "{}\n{}", rep.summary(), rep.violations.join("\n---\n"));
    assert!(rep.checks > 1000, "{}", rep.summary());
}

#[test]
fn head_constants_and_wildcards() {
    let p = parse_program("p(a, _).\np(X, Y) :- X = b, Y #> 3.\n").unwrap();
    let engine = Engine::from_program(FeatureSchema::default(), &p).unwrap();
    let count = |q: &str| engine.solve(&parse_query(q).unwrap(), SolveOptions::unlimited()).unwrap().count();
    assert_eq!(count("p(a, 7)"), 1);
    assert_eq!(count("not p(a, 7)"), 0);
    assert_eq!(count("not p(b, 3)"), 1);
    assert_eq!(count("not p(b, 4)"), 0);
    assert_eq!(count("not p(c, 4)"), 1);
    assert!(dualize_program(&p).is_ok());
}
