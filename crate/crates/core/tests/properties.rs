use std::f64::consts::PI;

use blocksynth::circuit::{circuit_to_unitary, merge_u3, Circuit, Gate, U3};
use blocksynth::gatemodel::distance;
use blocksynth::qasm::{emit_qasm, parse_qasm};
use blocksynth::recombine::{peephole, PeepholeOptions};
use proptest::prelude::*;

fn angle() -> impl Strategy<Value = f64> {
    -10.0..10.0f64
}

fn gate(n: usize) -> impl Strategy<Value = Gate> {
    prop_oneof![
        (0..n, angle(), angle(), angle()).prop_map(|(w, t, p, l)| Gate::u3(w, t, p, l)),
        (0..n, 1..n).prop_map(move |(c, k)| Gate::cnot(c, (c + k) % n)),
    ]
}

fn circuit() -> impl Strategy<Value = Circuit> {
    (2..5usize)
        .prop_flat_map(|n| prop::collection::vec(gate(n), 0..30).prop_map(move |g| Circuit::from_gates(n, g).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn u3_is_canonical_and_preserves_the_matrix(t in angle(), p in angle(), l in angle()) {
        let g = U3::new(t, p, l);
        prop_assert!((0.0..=PI).contains(&g.theta));
        prop_assert!(g.phi > -PI && g.phi <= PI);
        prop_assert!(g.lambda > -PI && g.lambda <= PI);
        let raw = blocksynth::circuit::u3_matrix(t, p, l);
        prop_assert!(distance(&g.matrix(), &raw).unwrap().value() < 1e-13);
        let back = U3::from_matrix(&raw).unwrap();
        prop_assert!(distance(&back.matrix(), &raw).unwrap().value() < 1e-13);
    }

    #[test]
    fn merged_u3_equals_the_product(a in (angle(), angle(), angle()), b in (angle(), angle(), angle())) {
        let first = U3::new(a.0, a.1, a.2);
        let second = U3::new(b.0, b.1, b.2);
        let merged = merge_u3(&first, &second);
        let product = second.matrix().matmul(&first.matrix());
        prop_assert!(distance(&merged.matrix(), &product).unwrap().value() < 1e-13);
    }

    #[test]
    fn qasm_round_trip_keeps_the_unitary(c in circuit()) {
        let back = parse_qasm(&emit_qasm(&c)).unwrap();
        prop_assert_eq!(back.len(), c.len());
        let d = distance(&circuit_to_unitary(&back).unwrap(), &circuit_to_unitary(&c).unwrap()).unwrap();
        prop_assert!(d.value() < 1e-13);
    }

    #[test]
    fn peephole_never_adds_gates_or_changes_the_unitary(c in circuit()) {
        let p = peephole(&c, &PeepholeOptions::default());
        prop_assert!(p.cnot_count() <= c.cnot_count());
        prop_assert!(p.u3_count() <= c.u3_count());
        let d = distance(&circuit_to_unitary(&p).unwrap(), &circuit_to_unitary(&c).unwrap()).unwrap();
        prop_assert!(d.value() < 1e-10);
    }
}
