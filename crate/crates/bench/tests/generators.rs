use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use upsilon_bench::{enumerate_conf, fixtures, pairwise_partition, random_structure, random_urelation};
use upsilon_core::uncertain::WorldTable;
use upsilon_core::validate_structure;

#[test]
fn random_structures_are_valid() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let s = random_structure(&mut rng, 1, 5, 4);
        assert!(validate_structure(&s).violations.is_empty(), "{:?}", s.equations);
    }
}

#[test]
fn random_world_tables_are_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let (w, tuples) = random_urelation(&mut rng, 4, 3, 5);
        assert!(w.is_normalized());
        assert!(!tuples.is_empty());
    }
}

#[test]
fn enumeration_of_small_cases() {
    let mut w = WorldTable::default();
    w.insert("a", vec![0.25, 0.75]).unwrap();
    w.insert("b", vec![0.5, 0.5]).unwrap();
    let c = |v: &[(&str, u32)]| v.iter().map(|(n, i)| (n.to_string(), *i)).collect::<Vec<_>>();
    assert!((enumerate_conf(&[c(&[("a", 1)])], &w) - 0.25).abs() < 1e-15);
    assert!((enumerate_conf(&[c(&[("a", 1)]), c(&[("b", 2)])], &w) - 0.625).abs() < 1e-15);
    assert!((enumerate_conf(&[c(&[])], &w) - 1.0).abs() < 1e-15);
    assert_eq!(enumerate_conf(&[], &w), 0.0);
}

#[test]
fn pairwise_partition_of_hand_table() {
    let rows = vec![vec![1.0, 5.0, 2.0, 0.0], vec![1.0, 6.0, 4.0, 0.0], vec![1.0, 5.0, 2.0, 1.0]];
    let want: BTreeSet<BTreeSet<usize>> =
        [BTreeSet::from([0]), BTreeSet::from([1, 2]), BTreeSet::from([3])].into_iter().collect();
    assert_eq!(pairwise_partition(&rows, 4), want);
}

#[test]
fn fixture_directory_exists() {
    assert!(fixtures().join("hypotheses/lotka_volterra.xml").is_file());
}
