#![allow(dead_code)]

pub mod eigen;
pub mod fock;
pub mod rdm_oracle;

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use squish_core::cispace::CiBasis;
use squish_core::fcidump::{read_fcidump, FcidumpHeader, IntegralTable};
use squish_core::hamiltonian::{Grouping, TermKey, TermSet};

pub const FIXTURES: [&str; 3] = ["lih_sto3g", "h2_ccpvdz_6orb", "h3p_ccpvdz_6orb"];

pub fn fixture_path(name: &str, ext: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.{ext}"))
}

pub fn fixture(name: &str) -> IntegralTable {
    read_fcidump(fixture_path(name, "fcidump")).expect("fixture parses")
}

pub struct Sidecar {
    pub hf_energy: f64,
    pub fci_energies: Vec<f64>,
}

pub fn sidecar(name: &str) -> Sidecar {
    let text = std::fs::read_to_string(fixture_path(name, "json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    Sidecar {
        hf_energy: v["hf_energy"].as_f64().unwrap(),
        fci_energies: v["fci_energies"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect(),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random integrals with the full real 8-fold symmetry.
pub fn random_table(rng: &mut ChaCha8Rng, norb: usize, nelec: usize, ms2: i32) -> IntegralTable {
    let mut t = IntegralTable::zeros(FcidumpHeader::new(norb, nelec, ms2).unwrap());
    for p in 0..norb {
        for q in 0..=p {
            t.set_one_body(p, q, rng.random_range(-1.0..1.0));
        }
    }
    for i in 0..norb {
        for j in 0..norb {
            for k in 0..norb {
                for l in 0..norb {
                    if (i, j) >= (k, l) && i >= j && k >= l {
                        t.set_chemist(i, j, k, l, rng.random_range(-0.5..0.5));
                    }
                }
            }
        }
    }
    t.core_energy = rng.random_range(-2.0..2.0);
    t
}

/// Random grouping-closed subset of all classes.
pub fn random_terms(rng: &mut ChaCha8Rng, norb: usize, grouping: Grouping, p: f64) -> TermSet {
    let mut set = TermSet::empty(norb, grouping);
    for class in TermSet::full(norb, grouping).included_classes() {
        if rng.random_bool(p) {
            set.insert_class(&class);
        }
    }
    set
}

pub fn random_state(rng: &mut ChaCha8Rng, basis: &CiBasis) -> Vec<f64> {
    let mut v: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

pub fn all_two_body(norb: usize) -> impl Iterator<Item = TermKey> {
    (0..norb.pow(4)).map(move |x| {
        let (p, q, r, s) = (x / norb.pow(3), (x / norb.pow(2)) % norb, (x / norb) % norb, x % norb);
        TermKey::TwoBody(p, q, r, s)
    })
}

use squish_core::driver::{ConvergenceRef, MSchedule, Mode, SquishConfig};
use squish_core::hamiltonian::InitialSet;

/// Exact-reference convergence at chemical accuracy with the conjugate
/// grouping and the `(2, 3, 1)` schedule used for the count comparisons.
pub fn count_config(mode: Mode) -> SquishConfig {
    SquishConfig {
        mode,
        initial_set: InitialSet::NoVvvv,
        grouping: Grouping::Conjugate,
        schedule: MSchedule {
            m0: 2,
            growth: 3.0,
            grow_every: 1,
        },
        delta: squish_core::CHEMICAL_ACCURACY,
        convergence: ConvergenceRef::Exact,
        ..Default::default()
    }
}

pub const COUNT_MODES: [Mode; 5] = [
    Mode::SquishV,
    Mode::SquishNv,
    Mode::Benchmark1,
    Mode::Benchmark2,
    Mode::CoeffBaseline,
];
