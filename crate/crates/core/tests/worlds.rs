mod support;

use support::golden::{multi_world, query_answers};

#[test]
fn choice_and_default_reasoning() {
    multi_world().unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn penguins_do_not_fly() {
    let answers = query_answers("bird").unwrap();
    let (_, not_pingu) = &answers[1];
    assert_eq!(
        not_pingu[0].model().iter().filter(|m| m.contains("abnormal(pingu)")).count(),
        1,
        "{:?}",
        not_pingu[0].model()
    );
}
