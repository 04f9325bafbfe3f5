//! Adaptive sampling configuration interaction over a growing target space.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cispace::{build_matrix, connected_bits, CiBasis, Determinant, MaskedHamiltonian};
use crate::driver::format_float;
use crate::eigensolver::{lowest_eigenpairs_with, EigenOptions};
use crate::error::{Result, SquishError};
use crate::fcidump::IntegralTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsciConfig {
    /// Target-space size per iteration; the last entry repeats.
    pub target_sizes: Vec<usize>,
    pub delta_e: f64,
    pub max_iterations: usize,
    pub solver_tol: f64,
}

impl Default for AsciConfig {
    fn default() -> Self {
        AsciConfig {
            target_sizes: vec![10, 50, 225],
            delta_e: 1e-10,
            max_iterations: 50,
            solver_tol: crate::eigensolver::DEFAULT_TOL,
        }
    }
}

impl AsciConfig {
    pub fn target_at(&self, k: usize) -> usize {
        let i = k.saturating_sub(1).min(self.target_sizes.len() - 1);
        self.target_sizes[i]
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_sizes.is_empty() || self.target_sizes.contains(&0) {
            return Err(SquishError::Domain("target sizes must be nonempty and >= 1".into()));
        }
        if !(self.delta_e > 0.0) {
            return Err(SquishError::Domain("delta_e must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsciRecord {
    pub k: usize,
    pub space_size: usize,
    /// Total energy, core included.
    pub e0: f64,
    pub err_self: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsciTrace {
    pub config: AsciConfig,
    pub records: Vec<AsciRecord>,
    pub converged: bool,
    #[serde(skip)]
    pub support: Vec<Determinant>,
    #[serde(skip)]
    pub amplitudes: Vec<f64>,
}

impl AsciTrace {
    pub fn final_energy(&self) -> f64 {
        self.records.last().map(|r| r.e0).unwrap_or(f64::NAN)
    }
}

/// Perturbative coefficient estimates for `support` and every determinant
/// connected to it:
///
/// ```text
/// C_i = -sum_{j in S, j != i} H_ij C_j / (H_ii - E0)
/// ```
///
/// `e0` is the electronic energy of the current state. Candidates whose
/// denominator is below 1e-12 in magnitude are skipped with a warning.
/// The result is sorted by determinant.
pub fn asci_rank(
    support: &CiBasis,
    coeffs: &[f64],
    e0: f64,
    ham: &MaskedHamiltonian,
) -> Vec<(Determinant, f64)> {
    let norb = support.norb();
    let parts: Vec<Vec<(u128, f64)>> = support
        .dets()
        .par_iter()
        .zip(coeffs.par_iter())
        .map(|(det, &cj)| {
            let bits = det.spin_orbital_bits(norb);
            let mut out = vec![(bits, 0.0)];
            if cj != 0.0 {
                for i in connected_bits(bits, norb) {
                    out.push((i, ham.element_bits(i, bits) * cj));
                }
            }
            out
        })
        .collect();
    let mut numer: BTreeMap<u128, f64> = BTreeMap::new();
    for part in parts {
        for (bits, v) in part {
            *numer.entry(bits).or_insert(0.0) += v;
        }
    }
    let mut out = Vec::with_capacity(numer.len());
    for (bits, num) in numer {
        let hii = ham.diagonal_bits(bits);
        let den = hii - e0;
        let det = Determinant::from_spin_orbital_bits(bits, norb);
        if den.abs() < 1e-12 {
            log::warn!("singular pivot for {:x} {:x}; skipped", det.alpha, det.beta);
            continue;
        }
        out.push((det, -num / den));
    }
    out.sort_by_key(|a| a.0);
    out
}

pub fn run_asci(table: &IntegralTable, config: &AsciConfig) -> Result<AsciTrace> {
    config.validate()?;
    let h = &table.header;
    if h.ms2 != 0 || !h.nelec.is_multiple_of(2) {
        return Err(SquishError::Unsupported("ASCI needs a closed-shell reference".into()));
    }
    let (na, nb) = h.electrons_by_spin();
    let norb = h.norb;
    let ham = MaskedHamiltonian::new(table, None);
    let opts = EigenOptions::with_tol(config.solver_tol);
    let core = table.core_energy;

    let mut support = CiBasis::from_dets(norb, na, nb, vec![Determinant::aufbau(na, nb)])?;
    let mut coeffs = vec![1.0];
    let mut e_el = ham.element(&support.det(0), &support.det(0));
    let mut records = vec![AsciRecord {
        k: 0,
        space_size: 1,
        e0: e_el + core,
        err_self: None,
    }];

    for k in 1..=config.max_iterations {
        let ranked = asci_rank(&support, &coeffs, e_el, &ham);
        let target = config.target_at(k).max(support.len());
        let mut candidates: Vec<(Determinant, f64)> = ranked
            .into_iter()
            .filter(|(d, _)| support.position(d).is_none())
            .collect();
        candidates.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        let mut dets = support.dets().to_vec();
        dets.extend(candidates.iter().take(target - support.len()).map(|c| c.0));
        let grew = dets.len() > support.len();
        let next = CiBasis::from_dets(norb, na, nb, dets)?;

        let guess: Vec<f64> = next
            .dets()
            .iter()
            .map(|d| support.position(d).map_or(0.0, |i| coeffs[i]))
            .collect();
        let mat = build_matrix(&next, &ham)?;
        let state = lowest_eigenpairs_with(&mat, 1, &opts, Some(&[guess]))
            .map_err(|e| e.at_iteration(k))?
            .remove(0);
        let de = (state.energy - e_el).abs();
        records.push(AsciRecord {
            k,
            space_size: next.len(),
            e0: state.energy + core,
            err_self: Some(de),
        });
        log::info!("asci k={k} size={} E={:.12}", next.len(), state.energy + core);
        support = next;
        coeffs = state.amplitudes;
        e_el = state.energy;
        if de < config.delta_e || !grew {
            return Ok(AsciTrace {
                config: config.clone(),
                records,
                converged: true,
                support: support.dets().to_vec(),
                amplitudes: coeffs,
            });
        }
    }
    Ok(AsciTrace {
        config: config.clone(),
        records,
        converged: false,
        support: support.dets().to_vec(),
        amplitudes: coeffs,
    })
}

pub const ASCI_CSV_HEADER: &str = "k,space_size,E0,err_self";

pub fn write_asci_csv<W: Write>(trace: &AsciTrace, mut sink: W) -> Result<()> {
    writeln!(sink, "{ASCI_CSV_HEADER}")?;
    for r in &trace.records {
        writeln!(
            sink,
            "{},{},{},{}",
            r.k,
            r.space_size,
            format_float(r.e0),
            r.err_self.map(format_float).unwrap_or_default()
        )?;
    }
    Ok(())
}
