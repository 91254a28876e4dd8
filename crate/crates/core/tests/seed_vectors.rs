//! Frozen derived seeds. Changing the derivation invalidates every recorded
//! result file, so these must never be regenerated casually.

use dfa_meet::seed::{format_seed, parse_seed, seed_split};

#[test]
fn golden_vectors() {
    let text = include_str!("data/seed_vectors.csv");
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let mut checked = 0;
    for row in rows.records() {
        let row = row.unwrap();
        let master: u64 = row[0].parse().unwrap();
        let index: u64 = row[1].parse().unwrap();
        let expected = parse_seed(&row[3]).unwrap();
        assert_eq!(
            format_seed(seed_split(master, index, &row[2])),
            format_seed(expected),
            "({master}, {index}, {:?})",
            &row[2]
        );
        checked += 1;
    }
    assert_eq!(checked, 6);
}
