//! Property tests: text round-trips, renaming algebra, and agreement of
//! the state-vector lift with the brute-force Kronecker oracle.

mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use common::{dense_apply, lifted_operator, ProgramGen};
use num_complex::Complex64;
use qk_core::{
    builtin_gateset, free_qubits, parse_kernel, rename_qubits, serialize_kernel, unitary_of,
    validate, Matrix, QubitId, StateVector, Style,
};

fn arb_style() -> impl Strategy<Value = Style> {
    prop_oneof![Just(Style::Lines), Just(Style::Compact)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// parse . serialize is the identity on well-formed kernels.
    #[test]
    fn parse_serialize_roundtrip(seed in 0u64..5000, style in arb_style()) {
        let program = ProgramGen::new(seed).program();
        let text = serialize_kernel(&program.kernel, style);
        let back = parse_kernel(&text).unwrap();
        prop_assert_eq!(back, program.kernel);
    }

    /// Generated programs validate cleanly.
    #[test]
    fn generated_programs_validate(seed in 0u64..5000) {
        let program = ProgramGen::new(seed).program();
        let gates = builtin_gateset("cliffords").unwrap();
        prop_assert_eq!(validate(&program, &gates), Vec::new());
    }

    /// rename with an injective map is reversible and commutes with
    /// free-qubit analysis.
    #[test]
    fn rename_algebra(seed in 0u64..5000) {
        let program = ProgramGen::new(seed).program();
        let kernel = &program.kernel;
        let ids: Vec<QubitId> = free_qubits(kernel)
            .into_iter()
            .chain(common::allocation_order(kernel))
            .collect();
        let forward: BTreeMap<QubitId, QubitId> = ids
            .iter()
            .map(|q| (q.clone(), QubitId::new(format!("{q}.x"))))
            .collect();
        let backward: BTreeMap<QubitId, QubitId> =
            forward.iter().map(|(a, b)| (b.clone(), a.clone())).collect();

        let renamed = rename_qubits(kernel, &forward).unwrap();
        let back = rename_qubits(&renamed, &backward).unwrap();
        prop_assert_eq!(&back, kernel);

        let mapped_free: std::collections::BTreeSet<QubitId> = free_qubits(kernel)
            .into_iter()
            .map(|q| forward[&q].clone())
            .collect();
        prop_assert_eq!(free_qubits(&renamed), mapped_free);
    }

    /// The sparse factored state agrees with the dense Kronecker oracle on
    /// random little circuits.
    #[test]
    fn state_vector_matches_dense_oracle(seed in 0u64..2000) {
        let mut gen = ProgramGen::new(seed);
        let program = gen.program();
        let gates = builtin_gateset("cliffords").unwrap();
        // Flatten the program's gates over all qubits at fixed positions.
        let order = common::allocation_order(&program.kernel);
        let n = order.len();
        prop_assume!((1..=6).contains(&n));
        let pos = |q: &QubitId| order.iter().position(|o| o == q).unwrap();

        let mut sparse = StateVector::zeros(n);
        let mut dense: Vec<Complex64> = vec![Complex64::default(); 1 << n];
        dense[0] = Complex64::new(1.0, 0.0);

        for g in common::all_gates(&program.kernel) {
            let u = unitary_of(&gates, &g.gate, &[]).unwrap();
            let positions: Vec<usize> = g.targets.iter().map(&pos).collect();
            sparse.apply(&u, &positions).unwrap();
            dense_apply(&mut dense, &u, &positions);
        }
        let got = sparse.amplitudes();
        for (a, b) in got.iter().zip(&dense) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }
}

/// Applying `cx` with targets in either order matches the brute-force
/// 4x4 matrix action lifted by explicit Kronecker-plus-permutation.
#[test]
fn cx_lift_matches_kron_oracle_in_both_orders() {
    let gates = builtin_gateset("cliffords").unwrap();
    let cx = unitary_of(&gates, "cx", &[]).unwrap();
    let h = unitary_of(&gates, "h", &[]).unwrap();
    for positions in [[1usize, 0usize], [0, 1]] {
        // Prepare a non-trivial 2-qubit state: h on each qubit, then s on 0.
        let mut sparse = StateVector::zeros(2);
        let mut dense = vec![Complex64::default(); 4];
        dense[0] = Complex64::new(1.0, 0.0);
        for p in 0..2 {
            sparse.apply(&h, &[p]).unwrap();
            dense_apply(&mut dense, &h, &[p]);
        }
        let s = unitary_of(&gates, "s", &[]).unwrap();
        sparse.apply(&s, &[0]).unwrap();
        dense_apply(&mut dense, &s, &[0]);

        sparse.apply(&cx, &positions).unwrap();
        let full = lifted_operator(&cx, &positions, 2);
        let mut expected = vec![Complex64::default(); 4];
        for (row, e) in expected.iter_mut().enumerate() {
            for (col, d) in dense.iter().enumerate() {
                *e += full.get(row, col) * d;
            }
        }
        let got = sparse.amplitudes();
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12, "positions {positions:?}");
        }
    }
}

/// The two oracle appliers agree with each other.
#[test]
fn oracle_selfcheck_kron_vs_gather() {
    let gates = builtin_gateset("cliffords").unwrap();
    let cx = unitary_of(&gates, "cx", &[]).unwrap();
    let mut v = vec![Complex64::default(); 8];
    v[5] = Complex64::new(0.6, 0.0);
    v[2] = Complex64::new(0.0, 0.8);
    let full = lifted_operator(&cx, &[0, 2], 3);
    let mut via_matrix = [Complex64::default(); 8];
    for (row, e) in via_matrix.iter_mut().enumerate() {
        for (col, d) in v.iter().enumerate() {
            *e += full.get(row, col) * d;
        }
    }
    let mut via_gather = v.clone();
    dense_apply(&mut via_gather, &cx, &[0, 2]);
    for (a, b) in via_matrix.iter().zip(&via_gather) {
        assert!((a - b).norm() < 1e-12);
    }
    assert!(full.is_unitary(1e-12));
    let _ = Matrix::identity(2);
}
