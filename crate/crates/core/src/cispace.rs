//! Determinant spaces and Slater-Condon matrix elements.
//!
//! Spin orbitals are numbered alpha block first: spin orbital `p` is spatial
//! orbital `p` with alpha spin for `p < M`, and spatial orbital `p - M` with
//! beta spin otherwise. A determinant is the product of creation operators
//! applied in ascending spin-orbital order to the vacuum, so all fermionic
//! signs reduce to popcounts over the occupation mask.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SquishError};
use crate::fcidump::{IntegralTable, OrbitalPartition};
use crate::hamiltonian::TermSet;

pub const DEFAULT_BASIS_CAP: usize = 2_000_000;
pub const DEFAULT_NONZERO_CAP: usize = 400_000_000;
pub const MAX_ORBITALS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Determinant {
    pub alpha: u64,
    pub beta: u64,
}

impl Determinant {
    pub fn new(alpha: u64, beta: u64) -> Self {
        Determinant { alpha, beta }
    }

    /// Lowest `nalpha` alpha and `nbeta` beta orbitals occupied.
    pub fn aufbau(nalpha: usize, nbeta: usize) -> Self {
        Determinant {
            alpha: low_bits(nalpha),
            beta: low_bits(nbeta),
        }
    }

    pub fn n_alpha(&self) -> usize {
        self.alpha.count_ones() as usize
    }

    pub fn n_beta(&self) -> usize {
        self.beta.count_ones() as usize
    }

    /// Spin-orbital occupation mask, alpha in the low `norb` bits.
    #[inline]
    pub fn spin_orbital_bits(&self, norb: usize) -> u128 {
        (self.alpha as u128) | ((self.beta as u128) << norb)
    }

    #[inline]
    pub fn from_spin_orbital_bits(bits: u128, norb: usize) -> Self {
        let mask = low_bits(norb) as u128;
        Determinant {
            alpha: (bits & mask) as u64,
            beta: ((bits >> norb) & mask) as u64,
        }
    }

    /// Number of electrons that must move to turn `self` into `other`.
    pub fn excitation_rank(&self, other: &Determinant) -> usize {
        (((self.alpha ^ other.alpha).count_ones() + (self.beta ^ other.beta).count_ones()) / 2)
            as usize
    }
}

#[inline]
fn low_bits(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Ordered determinant list with a reverse index.
#[derive(Clone, Debug)]
pub struct CiBasis {
    norb: usize,
    nalpha: usize,
    nbeta: usize,
    dets: Vec<Determinant>,
    index: HashMap<Determinant, usize>,
}

impl CiBasis {
    /// Basis over an explicit determinant list; sorted and deduplicated.
    pub fn from_dets(
        norb: usize,
        nalpha: usize,
        nbeta: usize,
        mut dets: Vec<Determinant>,
    ) -> Result<Self> {
        if norb > MAX_ORBITALS {
            return Err(SquishError::Capacity(format!(
                "{norb} spatial orbitals exceeds the {MAX_ORBITALS}-bit determinant encoding"
            )));
        }
        for d in &dets {
            if d.n_alpha() != nalpha || d.n_beta() != nbeta {
                return Err(SquishError::Domain(format!(
                    "determinant {d:?} not in the ({nalpha}, {nbeta}) sector"
                )));
            }
            if (d.alpha | d.beta) & !low_bits(norb) != 0 {
                return Err(SquishError::Domain(format!(
                    "determinant {d:?} occupies orbitals beyond {norb}"
                )));
            }
        }
        dets.sort_unstable();
        dets.dedup();
        let index = dets.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        Ok(CiBasis {
            norb,
            nalpha,
            nbeta,
            dets,
            index,
        })
    }

    pub fn norb(&self) -> usize {
        self.norb
    }

    pub fn electrons(&self) -> (usize, usize) {
        (self.nalpha, self.nbeta)
    }

    pub fn len(&self) -> usize {
        self.dets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dets.is_empty()
    }

    pub fn dets(&self) -> &[Determinant] {
        &self.dets
    }

    pub fn det(&self, i: usize) -> Determinant {
        self.dets[i]
    }

    pub fn position(&self, det: &Determinant) -> Option<usize> {
        self.index.get(det).copied()
    }

    pub fn same_sector(&self, other: &CiBasis) -> bool {
        self.norb == other.norb && self.nalpha == other.nalpha && self.nbeta == other.nbeta
    }
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// All `k`-subsets of `n` bits in ascending integer order (Gosper's hack).
fn combinations(n: usize, k: usize) -> Vec<u64> {
    if k == 0 {
        return vec![0];
    }
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut x: u64 = low_bits(k);
    let limit: u128 = 1u128 << n;
    while (x as u128) < limit {
        out.push(x);
        let c = x & x.wrapping_neg();
        let r = x.wrapping_add(c);
        if r == 0 {
            break;
        }
        x = (((r ^ x) >> 2) / c) | r;
    }
    out
}

pub fn enumerate_basis(norb: usize, nelec: usize, ms2: i32) -> Result<CiBasis> {
    enumerate_basis_capped(norb, nelec, ms2, DEFAULT_BASIS_CAP)
}

/// Full determinant space with `nelec` electrons and spin projection `ms2/2`.
pub fn enumerate_basis_capped(norb: usize, nelec: usize, ms2: i32, cap: usize) -> Result<CiBasis> {
    let n = nelec as i64;
    let ms2 = ms2 as i64;
    if (n + ms2) % 2 != 0 || ms2.abs() > n {
        return Err(SquishError::Domain(format!(
            "no determinants with {nelec} electrons and MS2={ms2}"
        )));
    }
    let nalpha = ((n + ms2) / 2) as usize;
    let nbeta = ((n - ms2) / 2) as usize;
    if nalpha > norb || nbeta > norb {
        return Err(SquishError::Domain(format!(
            "({nalpha}, {nbeta}) electrons do not fit in {norb} orbitals"
        )));
    }
    if norb > MAX_ORBITALS {
        return Err(SquishError::Capacity(format!(
            "{norb} spatial orbitals exceeds the {MAX_ORBITALS}-bit determinant encoding"
        )));
    }
    let size = binomial(norb, nalpha)
        .zip(binomial(norb, nbeta))
        .and_then(|(a, b)| a.checked_mul(b));
    match size {
        Some(s) if s <= cap => {}
        _ => {
            return Err(SquishError::Capacity(format!(
                "determinant space C({norb},{nalpha})*C({norb},{nbeta}) exceeds cap {cap}"
            )))
        }
    }
    let alphas = combinations(norb, nalpha);
    let betas = combinations(norb, nbeta);
    let mut dets = Vec::with_capacity(alphas.len() * betas.len());
    for &a in &alphas {
        for &b in &betas {
            dets.push(Determinant::new(a, b));
        }
    }
    CiBasis::from_dets(norb, nalpha, nbeta, dets)
}

/// Parity of the occupied spin orbitals strictly below `i`.
#[inline]
fn parity_below(bits: u128, i: usize) -> bool {
    let mask = if i == 0 { 0 } else { (1u128 << i) - 1 };
    (bits & mask).count_ones() & 1 == 1
}

#[inline]
fn sign(odd: bool) -> f64 {
    if odd {
        -1.0
    } else {
        1.0
    }
}

/// Integrals of a (possibly truncated) Hamiltonian prepared for
/// Slater-Condon evaluation.
///
/// The spin-summed operators of `(p,q,r,s)` and `(q,p,s,r)` are identical,
/// so excluded tuples are removed and the survivors are averaged over that
/// pair. The resulting operator is exactly the truncated Hamiltonian, and
/// the averaged integrals have the symmetries the Slater-Condon rules need
/// even when truncation has broken the real-orbital 8-fold symmetry.
#[derive(Clone, Debug)]
pub struct MaskedHamiltonian {
    norb: usize,
    h1: Vec<f64>,
    g: Vec<f64>,
}

impl MaskedHamiltonian {
    pub fn new(table: &IntegralTable, terms: Option<&TermSet>) -> Self {
        let m = table.norb();
        if let Some(t) = terms {
            assert_eq!(t.norb(), m, "term set and table disagree on norb");
        }
        let keep1 = |p: usize, q: usize| terms.is_none_or(|t| t.contains_one_body(p, q));
        let keep2 =
            |p: usize, q: usize, r: usize, s: usize| terms.is_none_or(|t| t.contains_two_body(p, q, r, s));
        let mut h1 = vec![0.0; m * m];
        for p in 0..m {
            for q in 0..m {
                if keep1(p, q) {
                    h1[p * m + q] = table.h1(p, q);
                }
            }
        }
        let mut g = vec![0.0; m.pow(4)];
        for p in 0..m {
            for q in 0..m {
                for r in 0..m {
                    for s in 0..m {
                        let a = if keep2(p, q, r, s) { table.h2(p, q, r, s) } else { 0.0 };
                        let b = if keep2(q, p, s, r) { table.h2(q, p, s, r) } else { 0.0 };
                        g[((p * m + q) * m + r) * m + s] = 0.5 * (a + b);
                    }
                }
            }
        }
        MaskedHamiltonian { norb: m, h1, g }
    }

    pub fn norb(&self) -> usize {
        self.norb
    }

    #[inline]
    fn spatial(&self, so: usize) -> (usize, usize) {
        (so % self.norb, so / self.norb)
    }

    #[inline]
    fn g(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let m = self.norb;
        self.g[((p * m + q) * m + r) * m + s]
    }

    #[inline]
    fn one(&self, a: usize, i: usize) -> f64 {
        let (pa, sa) = self.spatial(a);
        let (pi, si) = self.spatial(i);
        if sa != si {
            0.0
        } else {
            self.h1[pa * self.norb + pi]
        }
    }

    /// `<PQ|RS>` over spin orbitals.
    #[inline]
    fn coulomb(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let (pp, sp) = self.spatial(p);
        let (pq, sq) = self.spatial(q);
        let (pr, sr) = self.spatial(r);
        let (ps, ss) = self.spatial(s);
        if sp != sr || sq != ss {
            0.0
        } else {
            self.g(pp, pq, pr, ps)
        }
    }

    /// `<PQ||RS> = <PQ|RS> - <PQ|SR>`.
    #[inline]
    fn antisym(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.coulomb(p, q, r, s) - self.coulomb(p, q, s, r)
    }

    pub fn diagonal_bits(&self, bits: u128) -> f64 {
        let occ = occupied(bits);
        let mut e = 0.0;
        for (n, &i) in occ.iter().enumerate() {
            e += self.one(i, i);
            for &j in &occ[..n] {
                e += self.antisym(i, j, i, j);
            }
        }
        e
    }

    /// `<bra|H|ket>` for spin-orbital occupation masks in the same sector.
    pub fn element_bits(&self, bra: u128, ket: u128) -> f64 {
        if bra == ket {
            return self.diagonal_bits(bra);
        }
        let holes = ket & !bra;
        let parts = bra & !ket;
        match holes.count_ones() {
            1 => {
                let i = holes.trailing_zeros() as usize;
                let a = parts.trailing_zeros() as usize;
                let s1 = parity_below(ket, i);
                let k1 = ket ^ (1u128 << i);
                let s2 = parity_below(k1, a);
                let mut v = self.one(a, i);
                let mut rest = k1;
                while rest != 0 {
                    let j = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    v += self.antisym(a, j, i, j);
                }
                sign(s1 ^ s2) * v
            }
            2 => {
                let i = holes.trailing_zeros() as usize;
                let j = (holes & (holes - 1)).trailing_zeros() as usize;
                let a = parts.trailing_zeros() as usize;
                let b = (parts & (parts - 1)).trailing_zeros() as usize;
                // bra = sign * a+_a a+_b a_j a_i ket
                let mut odd = parity_below(ket, i);
                let k1 = ket ^ (1u128 << i);
                odd ^= parity_below(k1, j);
                let k2 = k1 ^ (1u128 << j);
                odd ^= parity_below(k2, b);
                let k3 = k2 | (1u128 << b);
                odd ^= parity_below(k3, a);
                sign(odd) * self.antisym(a, b, i, j)
            }
            _ => 0.0,
        }
    }

    pub fn element(&self, bra: &Determinant, ket: &Determinant) -> f64 {
        self.element_bits(
            bra.spin_orbital_bits(self.norb),
            ket.spin_orbital_bits(self.norb),
        )
    }
}

fn occupied(bits: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(bits.count_ones() as usize);
    let mut rest = bits;
    while rest != 0 {
        out.push(rest.trailing_zeros() as usize);
        rest &= rest - 1;
    }
    out
}

/// Every determinant reachable from `bits` by one or two spin-conserving
/// excitations.
pub(crate) fn connected_bits(bits: u128, norb: usize) -> Vec<u128> {
    let n = 2 * norb;
    let occ = occupied(bits);
    let virt: Vec<usize> = (0..n).filter(|&a| bits & (1u128 << a) == 0).collect();
    let spin = |x: usize| x / norb;
    let mut out = Vec::new();
    for &i in &occ {
        for &a in &virt {
            if spin(i) == spin(a) {
                out.push(bits ^ (1u128 << i) ^ (1u128 << a));
            }
        }
    }
    for (x, &i) in occ.iter().enumerate() {
        for &j in &occ[x + 1..] {
            let removed = bits ^ (1u128 << i) ^ (1u128 << j);
            let (si, sj) = (spin(i), spin(j));
            for (y, &a) in virt.iter().enumerate() {
                for &b in &virt[y + 1..] {
                    let (sa, sb) = (spin(a), spin(b));
                    if (sa == si && sb == sj) || (sa == sj && sb == si) {
                        out.push(removed | (1u128 << a) | (1u128 << b));
                    }
                }
            }
        }
    }
    out
}

/// `<d1|H_T|d2>` where `H_T` keeps only the tuples in `terms` (all of them
/// when `terms` is `None`). The core energy is not included.
pub fn matrix_element(
    d1: &Determinant,
    d2: &Determinant,
    table: &IntegralTable,
    terms: Option<&TermSet>,
) -> Result<f64> {
    if d1.n_alpha() != d2.n_alpha() || d1.n_beta() != d2.n_beta() {
        return Err(SquishError::Domain(format!(
            "determinants {d1:?} and {d2:?} are in different sectors"
        )));
    }
    Ok(MaskedHamiltonian::new(table, terms).element(d1, d2))
}

/// Symmetric sparse matrix with a dense diagonal and row-compressed
/// off-diagonal entries (both triangles stored).
#[derive(Clone, Debug)]
pub struct SparseSymMatrix {
    dim: usize,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymMatrix {
    /// Build from the diagonal and strictly-lower entries `(i, j, v)` with
    /// `j < i`.
    pub fn from_lower(dim: usize, diag: Vec<f64>, lower: Vec<(usize, usize, f64)>) -> Self {
        assert_eq!(diag.len(), dim);
        let mut counts = vec![0usize; dim];
        for &(i, j, _) in &lower {
            assert!(j < i && i < dim, "entry ({i},{j}) is not strictly lower");
            counts[i] += 1;
            counts[j] += 1;
        }
        let mut row_ptr = vec![0usize; dim + 1];
        for i in 0..dim {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let nnz = row_ptr[dim];
        let mut cols = vec![0usize; nnz];
        let mut vals = vec![0.0; nnz];
        let mut fill = row_ptr.clone();
        for &(i, j, v) in &lower {
            cols[fill[i]] = j;
            vals[fill[i]] = v;
            fill[i] += 1;
            cols[fill[j]] = i;
            vals[fill[j]] = v;
            fill[j] += 1;
        }
        for i in 0..dim {
            let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
            let mut row: Vec<(usize, f64)> = cols[lo..hi]
                .iter()
                .copied()
                .zip(vals[lo..hi].iter().copied())
                .collect();
            row.sort_unstable_by_key(|e| e.0);
            for (k, (c, v)) in row.into_iter().enumerate() {
                cols[lo + k] = c;
                vals[lo + k] = v;
            }
        }
        SparseSymMatrix {
            dim,
            diag,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn from_dense(dense: &nalgebra::DMatrix<f64>) -> Self {
        let n = dense.nrows();
        let diag = (0..n).map(|i| dense[(i, i)]).collect();
        let mut lower = Vec::new();
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (dense[(i, j)] + dense[(j, i)]);
                if v != 0.0 {
                    lower.push((i, j, v));
                }
            }
        }
        Self::from_lower(n, diag, lower)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Stored off-diagonal entries (each symmetric pair counted twice).
    pub fn off_diagonal_nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[lo..hi].binary_search(&j) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[lo..hi]
            .iter()
            .copied()
            .zip(self.vals[lo..hi].iter().copied())
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut acc = self.diag[i] * x[i];
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            *yi = acc;
        });
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            m[(i, i)] = self.diag[i];
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

pub fn build_matrix(basis: &CiBasis, ham: &MaskedHamiltonian) -> Result<SparseSymMatrix> {
    build_matrix_capped(basis, ham, DEFAULT_NONZERO_CAP)
}

/// Assemble `<d_i|H_T|d_j>` over `basis`, visiting only determinant pairs
/// within two excitations of each other.
pub fn build_matrix_capped(
    basis: &CiBasis,
    ham: &MaskedHamiltonian,
    max_nonzeros: usize,
) -> Result<SparseSymMatrix> {
    if basis.is_empty() {
        return Err(SquishError::Domain("empty determinant basis".into()));
    }
    let norb = basis.norb();
    assert_eq!(norb, ham.norb(), "basis and Hamiltonian disagree on norb");
    let (na, nb) = basis.electrons();
    let n = 2 * norb;
    let (ne, nh) = (na + nb, n - na - nb);
    // singles + doubles per determinant, an upper bound on the row length
    let per_row = ne * nh + (ne * ne.saturating_sub(1) / 2) * (nh * nh.saturating_sub(1) / 2);
    if per_row.saturating_mul(basis.len()) > max_nonzeros {
        return Err(SquishError::Capacity(format!(
            "estimated {} nonzeros exceeds the budget of {max_nonzeros}",
            per_row.saturating_mul(basis.len())
        )));
    }
    let rows: Vec<(f64, Vec<(usize, f64)>)> = basis
        .dets()
        .par_iter()
        .enumerate()
        .map(|(i, det)| {
            let bits = det.spin_orbital_bits(norb);
            let diag = ham.diagonal_bits(bits);
            let mut row = Vec::new();
            for other in connected_bits(bits, norb) {
                let d = Determinant::from_spin_orbital_bits(other, norb);
                if let Some(j) = basis.position(&d) {
                    if j < i {
                        let v = ham.element_bits(bits, other);
                        if v != 0.0 {
                            row.push((j, v));
                        }
                    }
                }
            }
            (diag, row)
        })
        .collect();
    let mut diag = Vec::with_capacity(rows.len());
    let mut lower = Vec::new();
    for (i, (d, row)) in rows.into_iter().enumerate() {
        diag.push(d);
        lower.extend(row.into_iter().map(|(j, v)| (i, j, v)));
    }
    Ok(SparseSymMatrix::from_lower(basis.len(), diag, lower))
}

/// Closed-shell restricted Hartree-Fock total energy (core energy included).
pub fn hf_energy(table: &IntegralTable, partition: &OrbitalPartition) -> Result<f64> {
    if table.header.ms2 != 0 || !table.header.nelec.is_multiple_of(2) {
        return Err(SquishError::Unsupported(
            "Hartree-Fock energy is only defined here for closed shells".into(),
        ));
    }
    let occ = &partition.occupied;
    let mut e = table.core_energy;
    for &i in occ {
        e += 2.0 * table.h1(i, i);
        for &j in occ {
            e += 2.0 * table.h2(i, j, i, j) - table.h2(i, j, j, i);
        }
    }
    Ok(e)
}

/// `<S^2>` of a normalized state, as a spin-contamination diagnostic.
pub fn spin_squared(amplitudes: &[f64], basis: &CiBasis) -> f64 {
    let norb = basis.norb();
    let (na, nb) = basis.electrons();
    let sz = (na as f64 - nb as f64) / 2.0;
    // <S- S+> = |S+ psi|^2 with S+ = sum_p a+_{p,alpha} a_{p,beta}
    let mut raised: BTreeMap<u128, f64> = BTreeMap::new();
    for (det, &c) in basis.dets().iter().zip(amplitudes) {
        if c == 0.0 {
            continue;
        }
        let bits = det.spin_orbital_bits(norb);
        for p in 0..norb {
            let (a, b) = (p, p + norb);
            if bits & (1u128 << b) != 0 && bits & (1u128 << a) == 0 {
                let mut odd = parity_below(bits, b);
                let k1 = bits ^ (1u128 << b);
                odd ^= parity_below(k1, a);
                *raised.entry(k1 | (1u128 << a)).or_insert(0.0) += sign(odd) * c;
            }
        }
    }
    let norm2: f64 = raised.values().map(|v| v * v).sum();
    norm2 + sz * sz + sz
}
