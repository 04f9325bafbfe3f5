//! Term bookkeeping for full and truncated Hamiltonians.
//!
//! A "term" is one spatial index tuple, `(p,q)` for `h_pq a+_p a_q` or
//! `(p,q,r,s)` for `h_pqrs a+_p a+_q a_s a_r` (spin summed). Truncation acts on
//! groups of tuples that must enter or leave together so that the truncated
//! operator stays hermitian. The default group is the tuple plus its
//! hermitian conjugate; the optional permutational grouping keeps all eight
//! real-orbital images of a chemist integral together.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SquishError};
use crate::fcidump::{chemist_images, IntegralTable, OrbitalPartition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TermKey {
    OneBody(usize, usize),
    TwoBody(usize, usize, usize, usize),
}

impl TermKey {
    /// Hermitian conjugate: `(p,q) -> (q,p)`, `(p,q,r,s) -> (s,r,q,p)`.
    pub fn hc(self) -> TermKey {
        match self {
            TermKey::OneBody(p, q) => TermKey::OneBody(q, p),
            TermKey::TwoBody(p, q, r, s) => TermKey::TwoBody(s, r, q, p),
        }
    }

    pub fn is_two_body(&self) -> bool {
        matches!(self, TermKey::TwoBody(..))
    }

    pub fn max_index(&self) -> usize {
        match *self {
            TermKey::OneBody(p, q) => p.max(q),
            TermKey::TwoBody(p, q, r, s) => p.max(q).max(r).max(s),
        }
    }

    /// All four indices virtual. One-body keys never qualify.
    pub fn is_vvvv(&self, virtual_mask: &[bool]) -> bool {
        match *self {
            TermKey::OneBody(..) => false,
            TermKey::TwoBody(p, q, r, s) => {
                virtual_mask[p] && virtual_mask[q] && virtual_mask[r] && virtual_mask[s]
            }
        }
    }

    pub fn coefficient(&self, table: &IntegralTable) -> f64 {
        match *self {
            TermKey::OneBody(p, q) => table.h1(p, q),
            TermKey::TwoBody(p, q, r, s) => table.h2(p, q, r, s),
        }
    }
}

impl fmt::Display for TermKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TermKey::OneBody(p, q) => write!(f, "1b {p} {q}"),
            TermKey::TwoBody(p, q, r, s) => write!(f, "2b {p} {q} {r} {s}"),
        }
    }
}

impl FromStr for TermKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let fields: Vec<&str> = s.split_whitespace().collect();
        let nums = |xs: &[&str]| -> std::result::Result<Vec<usize>, String> {
            xs.iter()
                .map(|x| x.parse::<usize>().map_err(|_| format!("bad index {x:?}")))
                .collect()
        };
        match fields.as_slice() {
            ["1b", rest @ ..] if rest.len() == 2 => {
                let v = nums(rest)?;
                Ok(TermKey::OneBody(v[0], v[1]))
            }
            ["2b", rest @ ..] if rest.len() == 4 => {
                let v = nums(rest)?;
                Ok(TermKey::TwoBody(v[0], v[1], v[2], v[3]))
            }
            _ => Err(format!("unrecognised term line {s:?}")),
        }
    }
}

/// How tuples are grouped into truncation units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// A tuple and its hermitian conjugate.
    #[default]
    Conjugate,
    /// All real-orbital permutational images of the underlying integral.
    Permutational,
}

impl FromStr for Grouping {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "conjugate" => Ok(Grouping::Conjugate),
            "permutational" => Ok(Grouping::Permutational),
            _ => Err(format!("unknown grouping {s:?} (conjugate|permutational)")),
        }
    }
}

impl Grouping {
    pub fn members(self, key: TermKey) -> Vec<TermKey> {
        let mut members = match (self, key) {
            (_, TermKey::OneBody(p, q)) => vec![TermKey::OneBody(p, q), TermKey::OneBody(q, p)],
            (Grouping::Conjugate, k) => vec![k, k.hc()],
            (Grouping::Permutational, TermKey::TwoBody(p, q, r, s)) => {
                // (pr|qs) images mapped back through (ab|cd) -> (a,c,b,d)
                chemist_images(p, r, q, s)
                    .iter()
                    .map(|&[a, b, c, d]| TermKey::TwoBody(a, c, b, d))
                    .collect()
            }
        };
        members.sort_unstable();
        members.dedup();
        members
    }

    pub fn canonical(self, key: TermKey) -> TermKey {
        match self {
            Grouping::Conjugate => key.min(key.hc()),
            Grouping::Permutational => self.members(key)[0],
        }
    }

    pub fn class_of(self, key: TermKey) -> ConjClass {
        let members = self.members(key);
        ConjClass {
            canonical: members[0],
            members,
        }
    }

    /// Number of two-body classes over `norb` orbitals.
    pub fn two_body_class_count(self, norb: usize) -> usize {
        match self {
            Grouping::Conjugate => (norb.pow(4) + norb.pow(2)) / 2,
            Grouping::Permutational => {
                let npair = norb * (norb + 1) / 2;
                npair * (npair + 1) / 2
            }
        }
    }
}

/// A truncation unit: the canonical (lexicographically smallest) tuple and
/// every tuple grouped with it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConjClass {
    pub canonical: TermKey,
    pub members: Vec<TermKey>,
}

impl ConjClass {
    pub fn is_two_body(&self) -> bool {
        self.canonical.is_two_body()
    }

    pub fn tuple_count(&self) -> usize {
        self.members.len()
    }

    pub fn vvvv_tuples(&self, virtual_mask: &[bool]) -> usize {
        self.members.iter().filter(|k| k.is_vvvv(virtual_mask)).count()
    }

    /// Largest coefficient magnitude over the members.
    pub fn max_abs_coefficient(&self, table: &IntegralTable) -> f64 {
        self.members
            .iter()
            .map(|k| k.coefficient(table).abs())
            .fold(0.0, f64::max)
    }
}

/// Which tuples start out in the truncated Hamiltonian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSet {
    /// Everything except two-body tuples with four virtual indices.
    #[default]
    NoVvvv,
    /// Only the terms with a nonzero Hartree-Fock expectation value.
    HfMinimal,
}

impl FromStr for InitialSet {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "no_vvvv" => Ok(InitialSet::NoVvvv),
            "hf_minimal" => Ok(InitialSet::HfMinimal),
            _ => Err(format!("unknown initial set {s:?} (no_vvvv|hf_minimal)")),
        }
    }
}

/// Included tuples of a truncated Hamiltonian, closed under the grouping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermSet {
    norb: usize,
    grouping: Grouping,
    one_body: Vec<bool>,
    two_body: Vec<bool>,
}

impl TermSet {
    pub fn empty(norb: usize, grouping: Grouping) -> Self {
        TermSet {
            norb,
            grouping,
            one_body: vec![false; norb * norb],
            two_body: vec![false; norb.pow(4)],
        }
    }

    pub fn full(norb: usize, grouping: Grouping) -> Self {
        TermSet {
            norb,
            grouping,
            one_body: vec![true; norb * norb],
            two_body: vec![true; norb.pow(4)],
        }
    }

    pub fn norb(&self) -> usize {
        self.norb
    }

    pub fn grouping(&self) -> Grouping {
        self.grouping
    }

    #[inline]
    fn slot(&self, key: TermKey) -> (bool, usize) {
        let m = self.norb;
        match key {
            TermKey::OneBody(p, q) => (false, p * m + q),
            TermKey::TwoBody(p, q, r, s) => (true, ((p * m + q) * m + r) * m + s),
        }
    }

    #[inline]
    pub fn contains(&self, key: TermKey) -> bool {
        match self.slot(key) {
            (false, i) => self.one_body[i],
            (true, i) => self.two_body[i],
        }
    }

    #[inline]
    pub fn contains_two_body(&self, p: usize, q: usize, r: usize, s: usize) -> bool {
        let m = self.norb;
        self.two_body[((p * m + q) * m + r) * m + s]
    }

    #[inline]
    pub fn contains_one_body(&self, p: usize, q: usize) -> bool {
        self.one_body[p * self.norb + q]
    }

    fn set(&mut self, key: TermKey, value: bool) -> bool {
        let slot = match self.slot(key) {
            (false, i) => &mut self.one_body[i],
            (true, i) => &mut self.two_body[i],
        };
        let changed = *slot != value;
        *slot = value;
        changed
    }

    pub fn class_of(&self, key: TermKey) -> ConjClass {
        self.grouping.class_of(key)
    }

    /// Insert every member of `class`; returns how many tuples were new.
    pub fn insert_class(&mut self, class: &ConjClass) -> usize {
        class
            .members
            .iter()
            .filter(|&&k| self.set(k, true))
            .count()
    }

    pub fn remove_class(&mut self, class: &ConjClass) -> usize {
        class
            .members
            .iter()
            .filter(|&&k| self.set(k, false))
            .count()
    }

    /// Insert the class containing `key`.
    pub fn insert(&mut self, key: TermKey) -> usize {
        let class = self.class_of(key);
        self.insert_class(&class)
    }

    fn keys(&self) -> impl Iterator<Item = TermKey> + '_ {
        let m = self.norb;
        let one = (0..m * m).map(move |i| TermKey::OneBody(i / m, i % m));
        let two = (0..m.pow(4)).map(move |i| {
            TermKey::TwoBody(i / (m * m * m), (i / (m * m)) % m, (i / m) % m, i % m)
        });
        one.chain(two)
    }

    fn is_canonical(&self, key: TermKey) -> bool {
        self.grouping.canonical(key) == key
    }

    /// Included classes in ascending canonical order.
    pub fn included_classes(&self) -> Vec<ConjClass> {
        self.keys()
            .filter(|&k| self.contains(k) && self.is_canonical(k))
            .map(|k| self.class_of(k))
            .collect()
    }

    /// Excluded classes (the complement) in ascending canonical order.
    pub fn excluded_classes(&self) -> Vec<ConjClass> {
        self.keys()
            .filter(|&k| !self.contains(k) && self.is_canonical(k))
            .map(|k| self.class_of(k))
            .collect()
    }

    pub fn complement(&self) -> TermSet {
        TermSet {
            norb: self.norb,
            grouping: self.grouping,
            one_body: self.one_body.iter().map(|b| !b).collect(),
            two_body: self.two_body.iter().map(|b| !b).collect(),
        }
    }

    /// Total number of classes (included plus excluded).
    pub fn universe(&self) -> usize {
        self.norb * (self.norb + 1) / 2 + self.grouping.two_body_class_count(self.norb)
    }

    pub fn included_class_count(&self) -> usize {
        self.keys()
            .filter(|&k| self.contains(k) && self.is_canonical(k))
            .count()
    }

    pub fn one_body_tuples(&self) -> usize {
        self.one_body.iter().filter(|&&b| b).count()
    }

    pub fn two_body_tuples(&self) -> usize {
        self.two_body.iter().filter(|&&b| b).count()
    }

    /// Included tuples, one- plus two-body.
    pub fn tuple_count(&self) -> usize {
        self.one_body_tuples() + self.two_body_tuples()
    }

    pub fn vvvv_tuples(&self, virtual_mask: &[bool]) -> usize {
        let m = self.norb;
        let virt: Vec<usize> = (0..m).filter(|&i| virtual_mask[i]).collect();
        let mut n = 0;
        for &p in &virt {
            for &q in &virt {
                for &r in &virt {
                    for &s in &virt {
                        n += self.contains_two_body(p, q, r, s) as usize;
                    }
                }
            }
        }
        n
    }

    pub fn is_empty(&self) -> bool {
        !self.one_body.iter().chain(&self.two_body).any(|&b| b)
    }

    /// True when every included tuple's group is entirely included.
    pub fn is_closed(&self) -> bool {
        self.keys()
            .filter(|&k| self.contains(k))
            .all(|k| self.grouping.members(k).iter().all(|&x| self.contains(x)))
    }

    pub fn is_subset_of(&self, other: &TermSet) -> bool {
        self.one_body
            .iter()
            .zip(&other.one_body)
            .chain(self.two_body.iter().zip(&other.two_body))
            .all(|(&a, &b)| !a || b)
    }

    /// Audit format: a comment header, then one canonical tuple per line.
    pub fn write_text<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(
            sink,
            "# norb={} grouping={}",
            self.norb,
            match self.grouping {
                Grouping::Conjugate => "conjugate",
                Grouping::Permutational => "permutational",
            }
        )?;
        for class in self.included_classes() {
            writeln!(sink, "{}", class.canonical)?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R, norb: usize, grouping: Grouping) -> Result<TermSet> {
        let mut set = TermSet::empty(norb, grouping);
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let key: TermKey = text.parse().map_err(|e: String| SquishError::parse(n + 1, e))?;
            if key.max_index() >= norb {
                return Err(SquishError::parse(n + 1, format!("index out of range in {key}")));
            }
            set.insert(key);
        }
        Ok(set)
    }
}

pub fn initial_term_set(
    partition: &OrbitalPartition,
    mode: InitialSet,
    grouping: Grouping,
) -> TermSet {
    let m = partition.norb();
    match mode {
        InitialSet::NoVvvv => {
            let virt = partition.virtual_mask();
            let mut set = TermSet::full(m, grouping);
            for p in 0..m {
                for q in 0..m {
                    for r in 0..m {
                        for s in 0..m {
                            if virt[p] && virt[q] && virt[r] && virt[s] {
                                set.set(TermKey::TwoBody(p, q, r, s), false);
                            }
                        }
                    }
                }
            }
            set
        }
        InitialSet::HfMinimal => {
            let mut set = TermSet::empty(m, grouping);
            for p in 0..m {
                set.insert(TermKey::OneBody(p, p));
            }
            for &i in &partition.occupied {
                for &j in &partition.occupied {
                    set.insert(TermKey::TwoBody(i, j, i, j));
                    set.insert(TermKey::TwoBody(i, j, j, i));
                }
            }
            set
        }
    }
}

/// Copy of `full` with every excluded coefficient zeroed.
pub fn truncated_table(full: &IntegralTable, terms: &TermSet) -> IntegralTable {
    assert_eq!(full.norb(), terms.norb(), "term set and table disagree on norb");
    let mut out = full.clone();
    for (v, &keep) in out.one_body.iter_mut().zip(&terms.one_body) {
        if !keep {
            *v = 0.0;
        }
    }
    for (v, &keep) in out.two_body.iter_mut().zip(&terms.two_body) {
        if !keep {
            *v = 0.0;
        }
    }
    out
}

/// Coefficient 1-norm over spin orbitals, excluding the core energy.
///
/// Each spatial one-body coefficient appears once per spin, each two-body
/// coefficient once per spin pair, so this is
/// `2 sum|h_pq| + (1/2) 4 sum|h_pqrs|`.
pub fn one_norm(table: &IntegralTable) -> f64 {
    let one: f64 = table.one_body.iter().map(|v| v.abs()).sum();
    let two: f64 = table.two_body.iter().map(|v| v.abs()).sum();
    2.0 * one + 2.0 * two
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountReport {
    pub one_body_total: usize,
    pub two_body_total: usize,
    pub included_two_body: usize,
    pub excluded: usize,
    pub vvvv_included: usize,
}

/// Per-tuple term counts of `terms` relative to the full Hamiltonian.
pub fn count_report(partition: &OrbitalPartition, terms: &TermSet) -> CountReport {
    let m = terms.norb();
    let included = terms.two_body_tuples();
    CountReport {
        one_body_total: m * m,
        two_body_total: m.pow(4),
        included_two_body: included,
        excluded: m.pow(4) - included,
        vvvv_included: terms.vvvv_tuples(&partition.virtual_mask()),
    }
}
