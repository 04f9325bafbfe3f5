//! Adaptive selected CI on the fixtures.

mod common;

use squish_core::asci::{asci_rank, run_asci, AsciConfig};
use squish_core::cispace::MaskedHamiltonian;
use squish_core::driver::exact_reference;

#[test]
fn lih_reaches_fci_with_variational_iterates() {
    let name = "lih_sto3g";
    let table = common::fixture(name);
    let fci = common::sidecar(name).fci_energies[0];
    let trace = run_asci(&table, &AsciConfig::default()).unwrap();
    assert!(trace.converged);
    assert!((trace.final_energy() - fci).abs() < 1e-8, "{}", trace.final_energy());
    let sizes: Vec<usize> = trace.records.iter().map(|r| r.space_size).collect();
    assert_eq!(&sizes[..4], &[1, 10, 50, 225]);
    for w in trace.records.windows(2) {
        assert!(w[1].e0 <= w[0].e0 + 1e-10, "energy rose at k={}", w[1].k);
    }
    assert!(trace.records.iter().all(|r| r.e0 >= fci - 1e-9));
}

#[test]
fn full_target_on_two_electrons_is_exact_after_one_step() {
    let name = "h2_ccpvdz_6orb";
    let table = common::fixture(name);
    let config = AsciConfig {
        target_sizes: vec![36],
        ..Default::default()
    };
    let trace = run_asci(&table, &config).unwrap();
    assert_eq!(trace.records[1].space_size, 36);
    assert!((trace.records[1].e0 - common::sidecar(name).fci_energies[0]).abs() < 1e-8);
}

#[test]
fn fci_state_is_a_fixed_point() {
    for name in common::FIXTURES {
        let table = common::fixture(name);
        let ex = exact_reference(&table, 1, 1e-12).unwrap();
        let ham = MaskedHamiltonian::new(&table, None);
        let state = &ex.states[0];
        let est = asci_rank(&ex.basis, &state.amplitudes, state.energy, &ham);
        assert!(est.len() >= ex.basis.len() - 1);
        for (det, c) in est {
            let i = ex.basis.position(&det).expect("estimates stay in the sector");
            assert!((c - state.amplitudes[i]).abs() < 1e-8, "{name}: {det:?}");
        }
    }
}

#[test]
fn rejects_open_shell_and_bad_targets() {
    let mut rng = common::rng(3);
    let odd = common::random_table(&mut rng, 3, 3, 1);
    assert!(run_asci(&odd, &AsciConfig::default()).is_err());
    let table = common::fixture("h2_ccpvdz_6orb");
    let bad = AsciConfig {
        target_sizes: vec![],
        ..Default::default()
    };
    assert!(run_asci(&table, &bad).is_err());
}
