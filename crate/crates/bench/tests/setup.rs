use fkq4::loops::extract_loops;
use fkq4::observables::{ArmProfile, Connectivity};
use fkq4::{BoundarySpec, EdgeGraph};
use fkq4_bench::equilibrated;

#[test]
fn bench_inputs_are_valid_configurations() {
    let (d, cfg) = equilibrated(16, BoundarySpec::Wired, 2, 20).unwrap();
    assert_eq!(cfg.open.len(), d.num_edges());
    let set = extract_loops(&d, &cfg);
    assert!(!set.is_empty());
    let conn = Connectivity::compute(&d, &cfg);
    let prof = ArmProfile::from_connectivity(&d, &conn);
    assert!(prof.primal.windows(2).all(|w| w[0] <= w[1]));
    assert!(prof.one_arm(16, 16));
}

#[test]
fn same_seed_same_input() {
    let (_, a) = equilibrated(8, BoundarySpec::Free, 5, 10).unwrap();
    let (_, b) = equilibrated(8, BoundarySpec::Free, 5, 10).unwrap();
    assert_eq!(a, b);
}
