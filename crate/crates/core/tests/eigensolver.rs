//! Iterative eigensolver against dense diagonalization.

mod common;

use common::eigen;
use squish_core::cispace::{build_matrix, enumerate_basis, MaskedHamiltonian, SparseSymMatrix};
use squish_core::eigensolver::{lowest_eigenpairs, lowest_eigenpairs_with, EigenOptions};

#[test]
fn davidson_matches_dense_on_random_matrices() {
    let count = 12;
    for i in 0..count {
        let n = eigen::instance_size(i, count);
        let j = 1 + i % 4;
        let c = eigen::compare(1000 + i as u64, n, j);
        assert!(c.energy_error < 1e-10, "n={n} J={j}: {:e}", c.energy_error);
        assert!(c.residual < 1e-8, "n={n} J={j}: {:e}", c.residual);
        assert!(c.orthogonality_error < 1e-10, "n={n} J={j}");
    }
}

#[test]
fn davidson_matches_dense_on_lih() {
    let table = common::fixture("lih_sto3g");
    let h = &table.header;
    let basis = enumerate_basis(h.norb, h.nelec, h.ms2).unwrap();
    let mat = build_matrix(&basis, &MaskedHamiltonian::new(&table, None)).unwrap();
    let dense = lowest_eigenpairs(&mat, 3, 1e-9).unwrap();
    let opts = EigenOptions {
        dense_threshold: 0,
        ..Default::default()
    };
    let dav = lowest_eigenpairs_with(&mat, 3, &opts, None).unwrap();
    for (a, b) in dense.iter().zip(&dav) {
        assert!((a.energy - b.energy).abs() < 1e-10);
    }
    let ov: f64 = dense[0].amplitudes.iter().zip(&dav[0].amplitudes).map(|(a, b)| a * b).sum();
    assert!((ov - 1.0).abs() < 1e-9, "ground states differ in sign or shape: {ov}");
}

#[test]
fn degenerate_block_follows_guess() {
    // diag(0, 0, 1): any rotation of the first two axes is an eigenbasis
    let mat = SparseSymMatrix::from_lower(3, vec![0.0, 0.0, 1.0], vec![]);
    let g = std::f64::consts::FRAC_1_SQRT_2;
    let guess = vec![vec![g, g, 0.0]];
    let states =
        lowest_eigenpairs_with(&mat, 1, &EigenOptions::default(), Some(&guess)).unwrap();
    assert!(states[0].degenerate);
    assert!((states[0].amplitudes[0] - g).abs() < 1e-12);
    assert!((states[0].amplitudes[1] - g).abs() < 1e-12);
}

#[test]
fn sign_convention_without_guess() {
    let mat = eigen::random_sparse(7, 80);
    for s in lowest_eigenpairs(&mat, 3, 1e-9).unwrap() {
        let big = s
            .amplitudes
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap();
        assert!(big > 0.0);
    }
}

#[test]
fn rejects_bad_requests() {
    let mat = eigen::random_sparse(1, 10);
    assert!(lowest_eigenpairs(&mat, 0, 1e-9).is_err());
    assert!(lowest_eigenpairs(&mat, 11, 1e-9).is_err());
    assert!(lowest_eigenpairs(&mat, 1, 0.0).is_err());
}
