mod common;

#[test]
fn input_serializations_match_fixtures() {
    match common::golden::check() {
        Ok(n) => assert_eq!(n, 10),
        Err(bad) => panic!("fixtures differ: {bad:?} (rerun with UPDATE_GOLDEN=1 if intended)"),
    }
}
