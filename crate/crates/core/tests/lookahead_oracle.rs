//! Lookahead selection against exhaustive path enumeration on a four-state
//! deterministic model.

mod common;

#[test]
fn lookahead_equals_exhaustive_enumeration() {
    let (cases, mismatches) = common::lookahead_mismatches();
    assert_eq!(cases, 3 * 4 * 4 * 511);
    assert_eq!(mismatches, 0);
}
