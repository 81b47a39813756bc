mod support;

use recourse::rulelang::{parse_program, print_program};

#[test]
fn shipped_fixtures() {
    let texts = support::suites::fixture_texts();
    assert!(texts.len() >= 6);
    let rep = support::suites::round_trip_texts(&texts);
    assert!(rep.violations.is_empty(), "{}", rep.violations.join("\n---\n"));
}

#[test]
fn generated_programs() {
    let rep = support::suites::round_trip_texts(&support::suites::generated_texts(300, 0x5eed_0003));
    assert!(rep.violations.is_empty(), "{}", rep.violations.join("\n---\n"));
}

#[test]
fn printed_adult_rules_keep_sections() {
    let p = parse_program(&support::read_fixture("adult", "rules.lp")).unwrap();
    let printed = print_program(&p);
    let causal = printed.find("% causal").expect("causal section printed");
    assert!(printed.find("#causal constraint_ms_reln_age").unwrap() > causal);
    assert!(printed.find("lite_le_50K(X, Y, _)").unwrap() < causal);
}
