//! Checked-in molecular fixtures against their reference energies.

mod common;

use squish_core::cispace::spin_squared;
use squish_core::driver::exact_reference;
use squish_core::fcidump::{parse_fcidump_str, write_fcidump_string};
use squish_core::{classify_orbitals, hf_energy};

#[test]
fn round_trip_preserves_integrals() {
    for name in common::FIXTURES {
        let table = common::fixture(name);
        let again = parse_fcidump_str(&write_fcidump_string(&table).unwrap()).unwrap();
        assert_eq!(again.header, table.header, "{name}");
        assert!(table.max_abs_difference(&again) <= 1e-12, "{name}");
        assert!((table.core_energy - again.core_energy).abs() <= 1e-12, "{name}");
    }
}

#[test]
fn integrals_have_eightfold_symmetry() {
    for name in common::FIXTURES {
        assert!(common::fixture(name).has_permutational_symmetry(1e-12), "{name}");
    }
}

#[test]
fn hf_and_fci_match_sidecar() {
    for name in common::FIXTURES {
        let table = common::fixture(name);
        let side = common::sidecar(name);
        let part = classify_orbitals(&table.header).unwrap();
        let e_hf = hf_energy(&table, &part).unwrap();
        assert!((e_hf - side.hf_energy).abs() < 1e-8, "{name}: HF {e_hf} vs {}", side.hf_energy);
        let ex = exact_reference(&table, side.fci_energies.len(), 1e-10).unwrap();
        for (got, want) in ex.total_energies(table.core_energy).iter().zip(&side.fci_energies) {
            assert!((got - want).abs() < 1e-8, "{name}: FCI {got} vs {want}");
        }
        assert!(ex.states[0].energy + table.core_energy < e_hf);
        assert!(spin_squared(&ex.states[0].amplitudes, &ex.basis).abs() < 1e-8, "{name}");
        let eta = table.header.nelec as f64;
        assert!((ex.rdms[0].trace() - eta).abs() < 1e-10);
        assert!((ex.rdms[0].pair_count() - eta * (eta - 1.0)).abs() < 1e-10);
        assert!(ex.rdms[0].symmetry_violation() < 1e-12);
    }
}

#[test]
fn orbital_partitions() {
    let expect = [("lih_sto3g", 2, 4), ("h2_ccpvdz_6orb", 1, 5), ("h3p_ccpvdz_6orb", 1, 5)];
    for (name, occ, virt) in expect {
        let part = classify_orbitals(&common::fixture(name).header).unwrap();
        assert_eq!((part.n_occupied(), part.n_virtual()), (occ, virt), "{name}");
    }
}
