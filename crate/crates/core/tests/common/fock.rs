//! Brute-force Fock-space operators for up to 8 spin orbitals.
//!
//! Spin orbital `P = p + spin * M`; the occupation-number state with bits
//! `n` is the Jordan-Wigner basis vector, so `a_P` picks up `(-1)` to the
//! number of occupied spin orbitals below `P`.

use nalgebra::DMatrix;
use squish_core::cispace::CiBasis;
use squish_core::fcidump::IntegralTable;
use squish_core::hamiltonian::{TermKey, TermSet};

#[derive(Clone, Copy, Debug)]
pub enum Op {
    Create(usize),
    Annihilate(usize),
}

/// Apply `ops` right to left to the basis state `n`.
pub fn apply(ops: &[Op], n: u32) -> Option<(u32, f64)> {
    let mut state = n;
    let mut sign = 1.0;
    for op in ops.iter().rev() {
        let (i, create) = match *op {
            Op::Create(i) => (i, true),
            Op::Annihilate(i) => (i, false),
        };
        let occupied = state >> i & 1 == 1;
        if occupied == create {
            return None;
        }
        if (state & ((1u32 << i) - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        state ^= 1 << i;
    }
    Some((state, sign))
}

pub fn fock_dim(norb: usize) -> usize {
    1 << (2 * norb)
}

/// Add `coef * ops` to the Fock-space matrix.
pub fn add_string(h: &mut DMatrix<f64>, ops: &[Op], coef: f64) {
    if coef == 0.0 {
        return;
    }
    for n in 0..h.ncols() as u32 {
        if let Some((m, s)) = apply(ops, n) {
            h[(m as usize, n as usize)] += coef * s;
        }
    }
}

/// Operator strings of one tuple, summed over spin.
pub fn strings(key: TermKey, norb: usize) -> Vec<(Vec<Op>, f64)> {
    use Op::*;
    let mut out = Vec::new();
    match key {
        TermKey::OneBody(p, q) => {
            for s in 0..2 {
                out.push((vec![Create(p + s * norb), Annihilate(q + s * norb)], 1.0));
            }
        }
        TermKey::TwoBody(p, q, r, s) => {
            for a in 0..2 {
                for b in 0..2 {
                    out.push((
                        vec![
                            Create(p + a * norb),
                            Create(q + b * norb),
                            Annihilate(s + b * norb),
                            Annihilate(r + a * norb),
                        ],
                        0.5,
                    ));
                }
            }
        }
    }
    out
}

/// The full Fock-space Hamiltonian restricted to the tuples in `terms`,
/// without the core energy.
pub fn hamiltonian(table: &IntegralTable, terms: Option<&TermSet>) -> DMatrix<f64> {
    let m = table.norb();
    let dim = fock_dim(m);
    let mut h = DMatrix::zeros(dim, dim);
    let keep = |k: TermKey| terms.is_none_or(|t| t.contains(k));
    for p in 0..m {
        for q in 0..m {
            let k = TermKey::OneBody(p, q);
            if keep(k) {
                for (ops, w) in strings(k, m) {
                    add_string(&mut h, &ops, w * table.h1(p, q));
                }
            }
        }
    }
    for k in super::all_two_body(m) {
        if keep(k) {
            let TermKey::TwoBody(p, q, r, s) = k else { unreachable!() };
            for (ops, w) in strings(k, m) {
                add_string(&mut h, &ops, w * table.h2(p, q, r, s));
            }
        }
    }
    h
}

/// Fock-space index of each basis determinant.
pub fn embedding(basis: &CiBasis) -> Vec<usize> {
    basis
        .dets()
        .iter()
        .map(|d| d.spin_orbital_bits(basis.norb()) as usize)
        .collect()
}

pub fn restrict(h: &DMatrix<f64>, basis: &CiBasis) -> DMatrix<f64> {
    let idx = embedding(basis);
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| h[(idx[i], idx[j])])
}

pub fn embed_state(amplitudes: &[f64], basis: &CiBasis) -> Vec<f64> {
    let mut v = vec![0.0; fock_dim(basis.norb())];
    for (&i, &x) in embedding(basis).iter().zip(amplitudes) {
        v[i] = x;
    }
    v
}

/// `<psi| ops |psi>` for a Fock-space vector.
pub fn expectation(ops: &[Op], psi: &[f64]) -> f64 {
    let mut e = 0.0;
    for (n, &c) in psi.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        if let Some((m, s)) = apply(ops, n as u32) {
            e += psi[m as usize] * s * c;
        }
    }
    e
}

pub fn gamma(psi: &[f64], norb: usize, p: usize, q: usize) -> f64 {
    strings(TermKey::OneBody(p, q), norb)
        .iter()
        .map(|(ops, _)| expectation(ops, psi))
        .sum()
}

pub fn big_gamma(psi: &[f64], norb: usize, p: usize, q: usize, r: usize, s: usize) -> f64 {
    strings(TermKey::TwoBody(p, q, r, s), norb)
        .iter()
        .map(|(ops, _)| expectation(ops, psi))
        .sum()
}
