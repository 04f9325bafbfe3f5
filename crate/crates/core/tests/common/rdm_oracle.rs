//! Worst-case deviations of RDMs and class energies from the Fock-space
//! oracle on one random small system.

use rand::Rng;
use squish_core::cispace::enumerate_basis;
use squish_core::hamiltonian::{Grouping, TermKey, TermSet};
use squish_core::rdm::{build_rdms, class_contribution};

use super::fock;

#[derive(Debug, Default)]
pub struct Deviations {
    pub gamma: f64,
    pub big_gamma: f64,
    pub epsilon: f64,
    /// `|sum epsilon + h_nuc - <H>|`.
    pub total: f64,
}

fn quad(psi: &[f64], h: &nalgebra::DMatrix<f64>) -> f64 {
    let v = nalgebra::DVector::from_column_slice(psi);
    v.dot(&(h * &v))
}

pub fn deviations(seed: u64) -> Deviations {
    let mut rng = super::rng(seed);
    let m = rng.random_range(2..=4);
    let (na, nb) = loop {
        let (a, b) = (rng.random_range(0..=m), rng.random_range(0..=m));
        if a + b > 0 {
            break (a, b);
        }
    };
    let ms2 = na as i32 - nb as i32;
    let table = super::random_table(&mut rng, m, na + nb, ms2);
    let basis = enumerate_basis(m, na + nb, ms2).unwrap();
    let amps = super::random_state(&mut rng, &basis);
    let psi = fock::embed_state(&amps, &basis);
    let rdms = build_rdms(&amps, &basis);
    let mut d = Deviations::default();
    for p in 0..m {
        for q in 0..m {
            d.gamma = d.gamma.max((rdms.one(p, q) - fock::gamma(&psi, m, p, q)).abs());
        }
    }
    for key in super::all_two_body(m) {
        let TermKey::TwoBody(p, q, r, s) = key else { unreachable!() };
        let x = fock::big_gamma(&psi, m, p, q, r, s);
        d.big_gamma = d.big_gamma.max((rdms.two(p, q, r, s) - x).abs());
    }
    let grouping = if seed.is_multiple_of(2) {
        Grouping::Conjugate
    } else {
        Grouping::Permutational
    };
    let mut total = table.core_energy;
    for class in TermSet::full(m, grouping).included_classes() {
        let mut only = TermSet::empty(m, grouping);
        only.insert_class(&class);
        let expected = quad(&psi, &fock::hamiltonian(&table, Some(&only)));
        let got = class_contribution(&class, &rdms, &table);
        d.epsilon = d.epsilon.max((got - expected).abs());
        total += got;
    }
    let exact = quad(&psi, &fock::hamiltonian(&table, None)) + table.core_energy;
    d.total = (total - exact).abs();
    d
}
