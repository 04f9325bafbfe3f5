//! Spin-free reduced density matrices and energy decompositions.
//!
//! Conventions, over spatial orbitals:
//!
//! ```text
//! gamma[p,q]     = sum_s       <a+_{p s} a_{q s}>
//! Gamma[p,q,r,s] = sum_{s,t}   <a+_{p s} a+_{q t} a_{s t} a_{r s}>
//! E              = sum h[p,q] gamma[p,q] + 1/2 sum h[p,q,r,s] Gamma[p,q,r,s] + h_nuc
//! ```
//!
//! With this ordering `sum_{p,q} Gamma[p,q,p,q] = eta (eta - 1)`.

use std::io::Write;

use rayon::prelude::*;

use crate::cispace::{CiBasis, Determinant};
use crate::error::Result;
use crate::fcidump::IntegralTable;
use crate::hamiltonian::{ConjClass, TermKey, TermSet};

#[derive(Clone, Debug, PartialEq)]
pub struct RdmPair {
    pub norb: usize,
    /// Row-major `M x M`.
    pub gamma: Vec<f64>,
    /// Row-major `M^4`, physicist order matching `h[p,q,r,s]`.
    pub big_gamma: Vec<f64>,
}

impl RdmPair {
    pub fn zeros(norb: usize) -> Self {
        RdmPair {
            norb,
            gamma: vec![0.0; norb * norb],
            big_gamma: vec![0.0; norb.pow(4)],
        }
    }

    #[inline]
    pub fn one(&self, p: usize, q: usize) -> f64 {
        self.gamma[p * self.norb + q]
    }

    #[inline]
    pub fn two(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let m = self.norb;
        self.big_gamma[((p * m + q) * m + r) * m + s]
    }

    pub fn trace(&self) -> f64 {
        (0..self.norb).map(|p| self.one(p, p)).sum()
    }

    /// `sum_{p,q} Gamma[p,q,p,q]`, equal to `eta (eta - 1)`.
    pub fn pair_count(&self) -> f64 {
        let m = self.norb;
        let mut s = 0.0;
        for p in 0..m {
            for q in 0..m {
                s += self.two(p, q, p, q);
            }
        }
        s
    }

    /// Largest violation of `gamma[p,q] = gamma[q,p]` and of the 2-RDM
    /// index symmetries.
    pub fn symmetry_violation(&self) -> f64 {
        let m = self.norb;
        let mut worst: f64 = 0.0;
        for p in 0..m {
            for q in 0..m {
                worst = worst.max((self.one(p, q) - self.one(q, p)).abs());
                for r in 0..m {
                    for s in 0..m {
                        let v = self.two(p, q, r, s);
                        worst = worst
                            .max((v - self.two(s, r, q, p)).abs())
                            .max((v - self.two(q, p, s, r)).abs())
                            .max((v - self.two(r, s, p, q)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Write both matrices as text: a `# norb=M` header, then
    /// `gamma p q value` and `Gamma p q r s value` lines for nonzero entries.
    pub fn write_text<W: Write>(&self, mut sink: W) -> Result<()> {
        let m = self.norb;
        writeln!(sink, "# norb={m}")?;
        for p in 0..m {
            for q in 0..m {
                let v = self.one(p, q);
                if v != 0.0 {
                    writeln!(sink, "gamma {p} {q} {v:.17e}")?;
                }
            }
        }
        for p in 0..m {
            for q in 0..m {
                for r in 0..m {
                    for s in 0..m {
                        let v = self.two(p, q, r, s);
                        if v != 0.0 {
                            writeln!(sink, "Gamma {p} {q} {r} {s} {v:.17e}")?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn parity_below(bits: u128, i: usize) -> bool {
    let mask = if i == 0 { 0 } else { (1u128 << i) - 1 };
    (bits & mask).count_ones() & 1 == 1
}

/// Apply `a_i` then return the new mask and whether the sign flipped.
#[inline]
fn annihilate(bits: u128, i: usize) -> Option<(u128, bool)> {
    if bits & (1u128 << i) == 0 {
        None
    } else {
        Some((bits ^ (1u128 << i), parity_below(bits, i)))
    }
}

#[inline]
fn create(bits: u128, i: usize) -> Option<(u128, bool)> {
    if bits & (1u128 << i) != 0 {
        None
    } else {
        Some((bits | (1u128 << i), parity_below(bits, i)))
    }
}

const CHUNKS: usize = 64;

/// 1- and 2-RDMs of the state with `amplitudes` over `basis`.
///
/// Determinants outside `basis` carry zero amplitude, so subspace states
/// work as well. Partial sums are combined in a fixed chunk order, so the
/// result does not depend on the thread count.
pub fn build_rdms(amplitudes: &[f64], basis: &CiBasis) -> RdmPair {
    let m = basis.norb();
    let n = 2 * m;
    let dets = basis.dets();
    let chunk = dets.len().div_ceil(CHUNKS).max(1);
    let lookup = |bits: u128| -> f64 {
        basis
            .position(&Determinant::from_spin_orbital_bits(bits, m))
            .map_or(0.0, |i| amplitudes[i])
    };

    let partials: Vec<RdmPair> = dets
        .par_chunks(chunk)
        .enumerate()
        .map(|(c, block)| {
            let mut acc = RdmPair::zeros(m);
            for (off, det) in block.iter().enumerate() {
                let ck = amplitudes[c * chunk + off];
                if ck == 0.0 {
                    continue;
                }
                let ket = det.spin_orbital_bits(m);
                // one-body: a+_P a_Q
                for qs in 0..n {
                    let Some((k1, s1)) = annihilate(ket, qs) else { continue };
                    let spin = qs / m;
                    for p in 0..m {
                        let ps = p + spin * m;
                        let Some((bra, s2)) = create(k1, ps) else { continue };
                        let cb = lookup(bra);
                        if cb != 0.0 {
                            let v = if s1 ^ s2 { -cb * ck } else { cb * ck };
                            acc.gamma[p * m + qs % m] += v;
                        }
                    }
                }
                // two-body: a+_P a+_Q a_S a_R with spin(P)=spin(R), spin(Q)=spin(S)
                for rs_ in 0..n {
                    let Some((k1, s1)) = annihilate(ket, rs_) else { continue };
                    for ss in 0..n {
                        let Some((k2, s2)) = annihilate(k1, ss) else { continue };
                        let (sr, sq) = (rs_ / m, ss / m);
                        for q in 0..m {
                            let qs = q + sq * m;
                            let Some((k3, s3)) = create(k2, qs) else { continue };
                            for p in 0..m {
                                let ps = p + sr * m;
                                let Some((bra, s4)) = create(k3, ps) else { continue };
                                let cb = lookup(bra);
                                if cb != 0.0 {
                                    let odd = s1 ^ s2 ^ s3 ^ s4;
                                    let v = if odd { -cb * ck } else { cb * ck };
                                    let (r, s) = (rs_ % m, ss % m);
                                    acc.big_gamma[((p * m + q) * m + r) * m + s] += v;
                                }
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut out = RdmPair::zeros(m);
    for part in &partials {
        out.gamma.iter_mut().zip(&part.gamma).for_each(|(a, b)| *a += b);
        out.big_gamma
            .iter_mut()
            .zip(&part.big_gamma)
            .for_each(|(a, b)| *a += b);
    }
    symmetrize(&mut out);
    out
}

/// Average over the index images that are equal for real states, summing
/// in sorted order so every image receives bit-identical values.
fn symmetrize(r: &mut RdmPair) {
    let m = r.norb;
    let g = r.gamma.clone();
    for p in 0..m {
        for q in 0..m {
            let (a, b) = (g[p * m + q], g[q * m + p]);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            r.gamma[p * m + q] = 0.5 * (lo + hi);
        }
    }
    let big = r.big_gamma.clone();
    let at = |p: usize, q: usize, r: usize, s: usize| big[((p * m + q) * m + r) * m + s];
    for p in 0..m {
        for q in 0..m {
            for rr in 0..m {
                for s in 0..m {
                    let mut v = [at(p, q, rr, s), at(s, rr, q, p), at(q, p, s, rr), at(rr, s, p, q)];
                    v.sort_by(f64::total_cmp);
                    r.big_gamma[((p * m + q) * m + rr) * m + s] = 0.25 * ((v[0] + v[1]) + (v[2] + v[3]));
                }
            }
        }
    }
}

/// `sum h gamma + 1/2 sum h Gamma + h_nuc` over the tuples in `terms`
/// (all of them when `None`).
pub fn energy_from_rdms(rdms: &RdmPair, table: &IntegralTable, terms: Option<&TermSet>) -> f64 {
    let m = table.norb();
    assert_eq!(m, rdms.norb, "RDMs and table disagree on norb");
    let mut one = 0.0;
    for p in 0..m {
        for q in 0..m {
            if terms.is_none_or(|t| t.contains_one_body(p, q)) {
                one += table.h1(p, q) * rdms.one(p, q);
            }
        }
    }
    let mut two = 0.0;
    for p in 0..m {
        for q in 0..m {
            for r in 0..m {
                for s in 0..m {
                    if terms.is_none_or(|t| t.contains_two_body(p, q, r, s)) {
                        two += table.h2(p, q, r, s) * rdms.two(p, q, r, s);
                    }
                }
            }
        }
    }
    one + 0.5 * two + table.core_energy
}

/// Energy carried by one class: `sum h gamma` over one-body members,
/// `1/2 sum h Gamma` over two-body members.
pub fn class_contribution(class: &ConjClass, rdms: &RdmPair, table: &IntegralTable) -> f64 {
    let mut eps = 0.0;
    for key in &class.members {
        eps += match *key {
            TermKey::OneBody(p, q) => table.h1(p, q) * rdms.one(p, q),
            TermKey::TwoBody(p, q, r, s) => 0.5 * table.h2(p, q, r, s) * rdms.two(p, q, r, s),
        };
    }
    eps
}

/// `(class, epsilon)` for every class included in `pool`.
pub fn term_contributions(
    rdms: &RdmPair,
    table: &IntegralTable,
    pool: &TermSet,
) -> Vec<(ConjClass, f64)> {
    pool.included_classes()
        .into_par_iter()
        .map(|c| {
            let e = class_contribution(&c, rdms, table);
            (c, e)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cispace::enumerate_basis;
    use crate::fcidump::FcidumpHeader;
    use crate::hamiltonian::Grouping;

    #[test]
    fn hf_state_rdms() {
        let b = enumerate_basis(3, 4, 0).unwrap();
        let mut c = vec![0.0; b.len()];
        c[b.position(&Determinant::aufbau(2, 2)).unwrap()] = 1.0;
        let r = build_rdms(&c, &b);
        for p in 0..3 {
            for q in 0..3 {
                let want = if p == q && p < 2 { 2.0 } else { 0.0 };
                assert_eq!(r.one(p, q), want);
            }
        }
        assert!((r.trace() - 4.0).abs() < 1e-14);
        assert!((r.pair_count() - 12.0).abs() < 1e-14);
    }

    #[test]
    fn one_electron_has_no_pairs() {
        let b = enumerate_basis(3, 1, 1).unwrap();
        let c = vec![0.5, -0.5, std::f64::consts::FRAC_1_SQRT_2];
        let r = build_rdms(&c, &b);
        assert!(r.big_gamma.iter().all(|&v| v == 0.0));
        assert!((r.trace() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn empty_mask_core_only() {
        let mut t = IntegralTable::zeros(FcidumpHeader::new(2, 2, 0).unwrap());
        t.core_energy = 0.25;
        t.set_chemist(0, 0, 1, 1, 0.7);
        let b = enumerate_basis(2, 2, 0).unwrap();
        let c = vec![0.5; 4];
        let r = build_rdms(&c, &b);
        let empty = TermSet::empty(2, Grouping::Conjugate);
        assert_eq!(energy_from_rdms(&r, &t, Some(&empty)), 0.25);
    }

    #[test]
    fn zero_coefficient_class() {
        let t = IntegralTable::zeros(FcidumpHeader::new(2, 2, 0).unwrap());
        let r = RdmPair::zeros(2);
        let c = Grouping::Conjugate.class_of(TermKey::TwoBody(0, 1, 1, 0));
        assert_eq!(class_contribution(&c, &r, &t), 0.0);
    }
}
