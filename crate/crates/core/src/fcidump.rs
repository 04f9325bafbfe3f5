//! FCIDUMP reading and writing.
//!
//! Integrals in the file are chemist-notation `(ij|kl)` with 1-based
//! indices. In memory the two-electron integrals are held densely in the
//! physicist layout used by the Hamiltonian,
//!
//! ```text
//! H = sum_{pq,s} h_pq a+_{p s} a_{q s}
//!   + 1/2 sum_{pqrs} sum_{a,b} h_pqrs a+_{p a} a+_{q b} a_{s b} a_{r a} + h_nuc
//! ```
//!
//! with `h_pqrs = (pr|qs)`: `p` and `r` belong to electron one, `q` and `s`
//! to electron two. All internal indices are 0-based.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SquishError};

/// Tolerance for two lines describing the same integral.
const CONFLICT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FcidumpHeader {
    pub norb: usize,
    pub nelec: usize,
    pub ms2: i32,
    pub orbsym: Vec<i32>,
    pub isym: i32,
}

impl FcidumpHeader {
    pub fn new(norb: usize, nelec: usize, ms2: i32) -> Result<Self> {
        let header = FcidumpHeader {
            norb,
            nelec,
            ms2,
            orbsym: vec![1; norb],
            isym: 1,
        };
        header.validate()?;
        Ok(header)
    }

    pub fn validate(&self) -> Result<()> {
        if self.norb == 0 {
            return Err(SquishError::Domain("NORB must be at least 1".into()));
        }
        if self.nelec > 2 * self.norb {
            return Err(SquishError::Domain(format!(
                "NELEC={} exceeds 2*NORB={}",
                self.nelec,
                2 * self.norb
            )));
        }
        if self.ms2.unsigned_abs() as usize > self.nelec {
            return Err(SquishError::Domain(format!(
                "|MS2|={} exceeds NELEC={}",
                self.ms2.abs(),
                self.nelec
            )));
        }
        if (self.nelec as i64 + self.ms2 as i64) % 2 != 0 {
            return Err(SquishError::Domain(format!(
                "NELEC={} and MS2={} have different parity",
                self.nelec, self.ms2
            )));
        }
        Ok(())
    }

    /// Number of alpha and beta electrons.
    pub fn electrons_by_spin(&self) -> (usize, usize) {
        let n = self.nelec as i64;
        let ms2 = self.ms2 as i64;
        (((n + ms2) / 2) as usize, ((n - ms2) / 2) as usize)
    }

    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.norb
    }
}

/// One- and two-electron integrals plus the core energy, all in Hartree.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralTable {
    pub header: FcidumpHeader,
    /// `h_pq`, row-major `M x M`.
    pub one_body: Vec<f64>,
    /// `h_pqrs = (pr|qs)`, row-major `M^4`.
    pub two_body: Vec<f64>,
    pub core_energy: f64,
}

impl IntegralTable {
    pub fn zeros(header: FcidumpHeader) -> Self {
        let m = header.norb;
        IntegralTable {
            header,
            one_body: vec![0.0; m * m],
            two_body: vec![0.0; m * m * m * m],
            core_energy: 0.0,
        }
    }

    #[inline]
    pub fn norb(&self) -> usize {
        self.header.norb
    }

    #[inline]
    pub fn idx1(&self, p: usize, q: usize) -> usize {
        p * self.header.norb + q
    }

    #[inline]
    pub fn idx2(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        let m = self.header.norb;
        ((p * m + q) * m + r) * m + s
    }

    #[inline]
    pub fn h1(&self, p: usize, q: usize) -> f64 {
        self.one_body[self.idx1(p, q)]
    }

    #[inline]
    pub fn h2(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.two_body[self.idx2(p, q, r, s)]
    }

    /// Chemist-notation lookup `(ij|kl)`.
    #[inline]
    pub fn chemist(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.h2(i, k, j, l)
    }

    pub fn set_one_body(&mut self, p: usize, q: usize, value: f64) {
        let (a, b) = (self.idx1(p, q), self.idx1(q, p));
        self.one_body[a] = value;
        self.one_body[b] = value;
    }

    /// Store `(ij|kl)` and all of its real-orbital permutational images.
    pub fn set_chemist(&mut self, i: usize, j: usize, k: usize, l: usize, value: f64) {
        for [a, b, c, d] in chemist_images(i, j, k, l) {
            let idx = self.idx2(a, c, b, d);
            self.two_body[idx] = value;
        }
    }

    /// Largest violation of `h_pq = h_qp`, `h_pqrs = h_srqp` and
    /// `h_pqrs = h_qpsr`.
    pub fn symmetry_violation(&self) -> f64 {
        let m = self.norb();
        let mut worst: f64 = 0.0;
        for p in 0..m {
            for q in 0..m {
                worst = worst.max((self.h1(p, q) - self.h1(q, p)).abs());
            }
        }
        for p in 0..m {
            for q in 0..m {
                for r in 0..m {
                    for s in 0..m {
                        let v = self.h2(p, q, r, s);
                        let scale = v.abs().max(1.0);
                        worst = worst.max((v - self.h2(s, r, q, p)).abs() / scale);
                        worst = worst.max((v - self.h2(q, p, s, r)).abs() / scale);
                    }
                }
            }
        }
        worst
    }

    /// True when every `(pr|qs)` image agrees, i.e. the table can be written
    /// as an FCIDUMP without losing information.
    pub fn has_permutational_symmetry(&self, tol: f64) -> bool {
        let m = self.norb();
        for p in 0..m {
            for q in 0..m {
                for r in 0..m {
                    for s in 0..m {
                        let v = self.h2(p, q, r, s);
                        for [a, b, c, d] in chemist_images(p, r, q, s) {
                            if (self.h2(a, c, b, d) - v).abs() > tol {
                                return false;
                            }
                        }
                    }
                }
            }
        }
        true
    }

    pub fn max_abs_difference(&self, other: &IntegralTable) -> f64 {
        let d1 = self
            .one_body
            .iter()
            .zip(&other.one_body)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let d2 = self
            .two_body
            .iter()
            .zip(&other.two_body)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        d1.max(d2).max((self.core_energy - other.core_energy).abs())
    }
}

/// The eight index orderings of a real chemist integral `(ij|kl)`.
pub fn chemist_images(i: usize, j: usize, k: usize, l: usize) -> [[usize; 4]; 8] {
    [
        [i, j, k, l],
        [j, i, k, l],
        [i, j, l, k],
        [j, i, l, k],
        [k, l, i, j],
        [l, k, i, j],
        [k, l, j, i],
        [l, k, j, i],
    ]
}

/// Occupied/virtual split of the spatial orbitals for a closed-shell
/// reference.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitalPartition {
    pub occupied: Vec<usize>,
    pub virtual_: Vec<usize>,
}

impl OrbitalPartition {
    pub fn n_occupied(&self) -> usize {
        self.occupied.len()
    }

    pub fn n_virtual(&self) -> usize {
        self.virtual_.len()
    }

    pub fn norb(&self) -> usize {
        self.occupied.len() + self.virtual_.len()
    }

    /// Synthetic partition with the first `norb - n_virtual` orbitals occupied.
    pub fn synthetic(norb: usize, n_virtual: usize) -> Result<Self> {
        if n_virtual > norb {
            return Err(SquishError::Domain(format!(
                "{n_virtual} virtual orbitals requested out of {norb}"
            )));
        }
        let n_occ = norb - n_virtual;
        Ok(OrbitalPartition {
            occupied: (0..n_occ).collect(),
            virtual_: (n_occ..norb).collect(),
        })
    }

    /// Per-orbital flag, true for virtual orbitals.
    pub fn virtual_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.norb()];
        for &v in &self.virtual_ {
            mask[v] = true;
        }
        mask
    }
}

/// Aufbau classification: the lowest `nelec/2` orbitals are occupied.
pub fn classify_orbitals(header: &FcidumpHeader) -> Result<OrbitalPartition> {
    if header.ms2 != 0 {
        return Err(SquishError::Unsupported(format!(
            "occupied/virtual classification needs a closed-shell reference (MS2={})",
            header.ms2
        )));
    }
    let n_occ = header.nelec / 2;
    Ok(OrbitalPartition {
        occupied: (0..n_occ).collect(),
        virtual_: (n_occ..header.norb).collect(),
    })
}

#[derive(Default)]
struct HeaderFields {
    norb: Option<usize>,
    nelec: Option<usize>,
    ms2: Option<i32>,
    orbsym: Vec<i32>,
    isym: Option<i32>,
}

fn parse_int(token: &str, line: usize, key: &str) -> Result<i64> {
    token
        .parse::<i64>()
        .map_err(|_| SquishError::parse(line, format!("invalid value {token:?} for {key}")))
}

fn parse_header(tokens: &[(usize, String)]) -> Result<HeaderFields> {
    let mut fields = HeaderFields::default();
    let mut i = 0;
    while i < tokens.len() {
        let (line, key) = &tokens[i];
        let is_key = tokens.get(i + 1).map(|(_, t)| t == "=").unwrap_or(false);
        if !is_key {
            return Err(SquishError::parse(*line, format!("unexpected token {key:?} in header")));
        }
        let key = key.to_ascii_uppercase();
        let mut values = Vec::new();
        let mut j = i + 2;
        while j < tokens.len() {
            let next_is_key = tokens.get(j + 1).map(|(_, t)| t == "=").unwrap_or(false);
            if next_is_key {
                break;
            }
            values.push(tokens[j].clone());
            j += 1;
        }
        let single = |name: &str| -> Result<i64> {
            match values.as_slice() {
                [(l, v)] => parse_int(v, *l, name),
                [] => Err(SquishError::parse(*line, format!("missing value for {name}"))),
                _ => Err(SquishError::parse(*line, format!("expected one value for {name}"))),
            }
        };
        match key.as_str() {
            "NORB" => {
                let v = single("NORB")?;
                if v < 1 {
                    return Err(SquishError::parse(*line, "NORB must be positive"));
                }
                fields.norb = Some(v as usize);
            }
            "NELEC" => {
                let v = single("NELEC")?;
                if v < 0 {
                    return Err(SquishError::parse(*line, "NELEC must be nonnegative"));
                }
                fields.nelec = Some(v as usize);
            }
            "MS2" => fields.ms2 = Some(single("MS2")? as i32),
            "ISYM" => fields.isym = Some(single("ISYM")? as i32),
            "ORBSYM" => {
                fields.orbsym = values
                    .iter()
                    .map(|(l, v)| parse_int(v, *l, "ORBSYM").map(|x| x as i32))
                    .collect::<Result<_>>()?;
            }
            // UHF, IUHF, TREL, ... are accepted and ignored.
            _ => log::debug!("ignoring FCIDUMP header key {key}"),
        }
        i = j;
    }
    Ok(fields)
}

fn parse_value(token: &str, line: usize) -> Result<f64> {
    let normalized = token.replace(['D', 'd'], "e");
    normalized
        .parse::<f64>()
        .map_err(|_| SquishError::parse(line, format!("invalid integral value {token:?}")))
}

/// Parse an FCIDUMP stream.
pub fn parse_fcidump<R: BufRead>(reader: R) -> Result<IntegralTable> {
    let mut lines = reader.lines().enumerate();

    // Header: everything from "&FCI" up to "/" or "&END".
    let mut header_tokens: Vec<(usize, String)> = Vec::new();
    let mut started = false;
    let mut header_line = 0;
    let mut terminated = false;
    for (n, line) in lines.by_ref() {
        let line = line?;
        let lineno = n + 1;
        let mut text = line.trim().to_string();
        if !started {
            if text.is_empty() {
                continue;
            }
            let upper = text.to_ascii_uppercase();
            if !upper.starts_with("&FCI") {
                return Err(SquishError::parse(lineno, "expected &FCI namelist header"));
            }
            started = true;
            header_line = lineno;
            text = text[4..].to_string();
        }
        let upper = text.to_ascii_uppercase();
        let cut = [upper.find("&END"), upper.find('/')]
            .into_iter()
            .flatten()
            .min();
        if let Some(pos) = cut {
            text.truncate(pos);
            terminated = true;
        }
        let spaced = text.replace('=', " = ").replace(',', " ");
        header_tokens.extend(spaced.split_whitespace().map(|t| (lineno, t.to_string())));
        if terminated {
            break;
        }
    }
    if !started {
        return Err(SquishError::parse(1, "empty FCIDUMP"));
    }
    if !terminated {
        return Err(SquishError::parse(header_line, "unterminated &FCI header"));
    }
    let fields = parse_header(&header_tokens)?;
    let norb = fields
        .norb
        .ok_or_else(|| SquishError::parse(header_line, "missing NORB"))?;
    let nelec = fields
        .nelec
        .ok_or_else(|| SquishError::parse(header_line, "missing NELEC"))?;
    let orbsym = if fields.orbsym.is_empty() {
        vec![1; norb]
    } else {
        fields.orbsym
    };
    let header = FcidumpHeader {
        norb,
        nelec,
        ms2: fields.ms2.unwrap_or(0),
        orbsym,
        isym: fields.isym.unwrap_or(1),
    };
    header
        .validate()
        .map_err(|e| SquishError::parse(header_line, e.to_string()))?;

    let mut table = IntegralTable::zeros(header);
    let mut seen2 = vec![false; table.two_body.len()];
    let mut seen1 = vec![false; table.one_body.len()];
    let mut seen_core = false;

    for (n, line) in lines {
        let line = line?;
        let lineno = n + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 5 {
            return Err(SquishError::parse(
                lineno,
                format!("expected 'value i j k l', found {} fields", tokens.len()),
            ));
        }
        let value = parse_value(tokens[0], lineno)?;
        let mut idx = [0usize; 4];
        for (slot, tok) in idx.iter_mut().zip(&tokens[1..]) {
            let raw = tok
                .parse::<i64>()
                .map_err(|_| SquishError::parse(lineno, format!("invalid index {tok:?}")))?;
            if raw < 0 || raw > norb as i64 {
                return Err(SquishError::Index {
                    line: lineno,
                    index: raw,
                    norb,
                });
            }
            *slot = raw as usize;
        }
        match idx {
            [0, 0, 0, 0] => {
                if seen_core && (table.core_energy - value).abs() > CONFLICT_TOL {
                    return Err(SquishError::Conflict {
                        line: lineno,
                        indices: idx,
                        first: table.core_energy,
                        second: value,
                    });
                }
                table.core_energy = value;
                seen_core = true;
            }
            [i, j, 0, 0] if i > 0 && j > 0 => {
                let (p, q) = (i - 1, j - 1);
                let at = table.idx1(p, q);
                if seen1[at] && (table.one_body[at] - value).abs() > CONFLICT_TOL {
                    return Err(SquishError::Conflict {
                        line: lineno,
                        indices: idx,
                        first: table.one_body[at],
                        second: value,
                    });
                }
                table.set_one_body(p, q, value);
                seen1[at] = true;
                let back = table.idx1(q, p);
                seen1[back] = true;
            }
            [i, 0, 0, 0] if i > 0 => {
                // orbital energy line; not part of the Hamiltonian
                log::debug!("line {lineno}: skipping orbital energy for orbital {i}");
            }
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                let (i, j, k, l) = (i - 1, j - 1, k - 1, l - 1);
                for [a, b, c, d] in chemist_images(i, j, k, l) {
                    let at = table.idx2(a, c, b, d);
                    if seen2[at] && (table.two_body[at] - value).abs() > CONFLICT_TOL {
                        return Err(SquishError::Conflict {
                            line: lineno,
                            indices: idx,
                            first: table.two_body[at],
                            second: value,
                        });
                    }
                }
                table.set_chemist(i, j, k, l, value);
                for [a, b, c, d] in chemist_images(i, j, k, l) {
                    let at = table.idx2(a, c, b, d);
                    seen2[at] = true;
                }
            }
            _ => {
                return Err(SquishError::parse(
                    lineno,
                    format!("unrecognised index pattern {idx:?}"),
                ))
            }
        }
    }
    Ok(table)
}

pub fn parse_fcidump_str(text: &str) -> Result<IntegralTable> {
    parse_fcidump(text.as_bytes())
}

pub fn read_fcidump(path: impl AsRef<std::path::Path>) -> Result<IntegralTable> {
    let file = std::fs::File::open(path)?;
    parse_fcidump(std::io::BufReader::new(file))
}

fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write the symmetry-unique nonzero integrals of `table`.
///
/// The table must carry the full real-orbital permutational symmetry;
/// truncated tables that only keep hermitian-conjugate pairs cannot be
/// represented in chemist notation and are rejected.
pub fn write_fcidump<W: Write>(table: &IntegralTable, mut sink: W) -> Result<()> {
    if !table.has_permutational_symmetry(0.0) {
        return Err(SquishError::Domain(
            "table lacks 8-fold permutational symmetry; not representable as FCIDUMP".into(),
        ));
    }
    let h = &table.header;
    let m = h.norb;
    let orbsym = h
        .orbsym
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(",");
    writeln!(sink, " &FCI NORB={},NELEC={},MS2={},", m, h.nelec, h.ms2)?;
    writeln!(sink, "  ORBSYM={orbsym},")?;
    writeln!(sink, "  ISYM={},", h.isym)?;
    writeln!(sink, " &END")?;
    for i in 0..m {
        for j in 0..=i {
            let ij = i * (i + 1) / 2 + j;
            for k in 0..m {
                for l in 0..=k {
                    let kl = k * (k + 1) / 2 + l;
                    if kl > ij {
                        continue;
                    }
                    let v = table.chemist(i, j, k, l);
                    if v != 0.0 {
                        writeln!(
                            sink,
                            "{} {} {} {} {}",
                            format_value(v),
                            i + 1,
                            j + 1,
                            k + 1,
                            l + 1
                        )?;
                    }
                }
            }
        }
    }
    for i in 0..m {
        for j in 0..=i {
            let v = table.h1(i, j);
            if v != 0.0 {
                writeln!(sink, "{} {} {} 0 0", format_value(v), i + 1, j + 1)?;
            }
        }
    }
    if table.core_energy != 0.0 {
        writeln!(sink, "{} 0 0 0 0", format_value(table.core_energy))?;
    }
    sink.flush()?;
    Ok(())
}

pub fn write_fcidump_string(table: &IntegralTable) -> Result<String> {
    let mut buf = Vec::new();
    write_fcidump(table, &mut buf)?;
    Ok(String::from_utf8(buf).expect("FCIDUMP output is ASCII"))
}
