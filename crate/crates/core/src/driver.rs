//! The iterative truncation loop and its variants.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cispace::{
    build_matrix, enumerate_basis, hf_energy, spin_squared, CiBasis, MaskedHamiltonian,
};
use crate::eigensolver::{lowest_eigenpairs_with, overlap, CiState, EigenOptions};
use crate::error::{Result, SquishError};
use crate::fcidump::{classify_orbitals, IntegralTable, OrbitalPartition};
use crate::hamiltonian::{
    initial_term_set, one_norm, truncated_table, ConjClass, Grouping, InitialSet, TermKey,
    TermSet,
};
use crate::ranking::{rank_coefficient, rank_energetic, RankedList};
use crate::rdm::{build_rdms, energy_from_rdms, term_contributions, RdmPair};

/// 1 kcal/mol in Hartree.
pub const CHEMICAL_ACCURACY: f64 = 1.6e-3;

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!(
                        concat!("unknown ", stringify!($name), " {:?} (expected one of: {})"),
                        s,
                        [$($text),+].join(", ")
                    )),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self {
                    $($name::$variant => $text,)+
                })
            }
        }
    };
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SquishNv,
    #[default]
    SquishV,
    Benchmark1,
    Benchmark2,
    CoeffBaseline,
    OneShot,
    MultiRef,
}

string_enum!(Mode {
    SquishNv => "squish_nv",
    SquishV => "squish_v",
    Benchmark1 => "benchmark1",
    Benchmark2 => "benchmark2",
    CoeffBaseline => "coeff_baseline",
    OneShot => "one_shot",
    MultiRef => "multi_ref",
});

/// Which energy drives convergence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyKind {
    /// Eigenvalue of the truncated Hamiltonian.
    NonVariational,
    /// Full-Hamiltonian expectation value of the truncated ground state.
    Variational,
}

/// Which state (or none) scores the excluded classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankingSource {
    Current,
    Exact,
    Coefficient,
}

impl Mode {
    pub fn energy_kind(self) -> EnergyKind {
        match self {
            Mode::SquishNv | Mode::Benchmark1 => EnergyKind::NonVariational,
            _ => EnergyKind::Variational,
        }
    }

    pub fn ranking_source(self) -> RankingSource {
        match self {
            Mode::Benchmark1 | Mode::Benchmark2 => RankingSource::Exact,
            Mode::CoeffBaseline => RankingSource::Coefficient,
            _ => RankingSource::Current,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceRef {
    /// Change from the previous iteration.
    #[default]
    #[serde(rename = "self")]
    SelfConsistent,
    /// Distance from the exact ground-state energy.
    Exact,
}

string_enum!(ConvergenceRef {
    SelfConsistent => "self",
    Exact => "exact",
});

/// Classes added per iteration: `m0 * growth^floor(k / grow_every)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MSchedule {
    pub m0: usize,
    pub growth: f64,
    pub grow_every: usize,
}

impl Default for MSchedule {
    fn default() -> Self {
        MSchedule {
            m0: 2,
            growth: 10.0,
            grow_every: 3,
        }
    }
}

impl MSchedule {
    pub fn m_at(&self, k: usize) -> usize {
        let steps = (k / self.grow_every).min(i32::MAX as usize) as i32;
        let v = self.m0 as f64 * self.growth.powi(steps);
        if v >= usize::MAX as f64 {
            usize::MAX
        } else {
            v.floor() as usize
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m0 < 1 {
            return Err(SquishError::Domain("m0 must be at least 1".into()));
        }
        if !(self.growth >= 1.0) || !self.growth.is_finite() {
            return Err(SquishError::Domain(format!(
                "growth factor {} must be a finite number >= 1",
                self.growth
            )));
        }
        if self.grow_every < 1 {
            return Err(SquishError::Domain("grow_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquishConfig {
    pub mode: Mode,
    pub initial_set: InitialSet,
    pub grouping: Grouping,
    pub schedule: MSchedule,
    pub delta: f64,
    pub convergence: ConvergenceRef,
    /// Number of target states `J`.
    pub states: usize,
    pub max_iterations: usize,
    pub solver_tol: f64,
    /// Report the overlap with the exact ground state at every iteration.
    pub track_overlap: bool,
}

impl Default for SquishConfig {
    fn default() -> Self {
        SquishConfig {
            mode: Mode::default(),
            initial_set: InitialSet::default(),
            grouping: Grouping::default(),
            schedule: MSchedule::default(),
            delta: 1e-6,
            convergence: ConvergenceRef::default(),
            states: 1,
            max_iterations: 200,
            solver_tol: crate::eigensolver::DEFAULT_TOL,
            track_overlap: true,
        }
    }
}

impl SquishConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(self.delta > 0.0) {
            return Err(SquishError::Domain(format!("delta {} must be positive", self.delta)));
        }
        if self.states < 1 {
            return Err(SquishError::Domain("at least one target state is required".into()));
        }
        if !(self.solver_tol > 0.0) {
            return Err(SquishError::Domain("solver tolerance must be positive".into()));
        }
        Ok(())
    }

    fn needs_exact(&self) -> bool {
        self.convergence == ConvergenceRef::Exact
            || self.mode.ranking_source() == RankingSource::Exact
            || self.track_overlap
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// One- and two-body tuples in the truncated Hamiltonian.
    pub included_tuples: usize,
    pub vvvv_tuples: usize,
    /// Total energies (core energy included) of the lowest state.
    pub e_nv: f64,
    pub e_v: f64,
    /// Convergence energy minus the Hartree-Fock energy.
    pub e_corr: f64,
    /// Largest distance from the exact energies over the target states.
    pub err_exact: Option<f64>,
    /// Largest change since the previous iteration over the target states.
    pub err_self: Option<f64>,
    pub overlap: Option<f64>,
    pub one_norm: f64,
    pub s_squared: f64,
    pub states_nv: Vec<f64>,
    pub states_v: Vec<f64>,
    /// Classes inserted after this iteration.
    pub added_classes: usize,
    pub wall_ms: f64,
}

impl IterationRecord {
    /// The energy that drives convergence for `kind`, per target state.
    pub fn energies(&self, kind: EnergyKind) -> &[f64] {
        match kind {
            EnergyKind::NonVariational => &self.states_nv,
            EnergyKind::Variational => &self.states_v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    /// Every term was included.
    Exhausted,
    Timeout,
}

string_enum!(Termination {
    Converged => "converged",
    Exhausted => "exhausted",
    Timeout => "timeout",
});

#[derive(Clone, Debug, Serialize)]
pub struct SquishTrace {
    pub config: SquishConfig,
    pub hf_energy: f64,
    /// Exact total energies of the target states when they were computed.
    pub exact_energies: Option<Vec<f64>>,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    #[serde(skip)]
    pub final_terms: TermSet,
    #[serde(skip)]
    pub final_states: Vec<CiState>,
}

impl SquishTrace {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("a trace always has iteration 0")
    }

    pub fn final_vvvv_tuples(&self) -> usize {
        self.last().vvvv_tuples
    }
}

/// Full-space eigenpairs of the untruncated Hamiltonian.
pub struct ExactReference {
    pub basis: CiBasis,
    pub states: Vec<CiState>,
    pub rdms: Vec<RdmPair>,
}

impl ExactReference {
    pub fn total_energies(&self, core: f64) -> Vec<f64> {
        self.states.iter().map(|s| s.energy + core).collect()
    }
}

fn full_basis(table: &IntegralTable) -> Result<CiBasis> {
    let h = &table.header;
    enumerate_basis(h.norb, h.nelec, h.ms2)
}

/// Lowest `j` states of the full Hamiltonian.
pub fn exact_reference(table: &IntegralTable, j: usize, tol: f64) -> Result<ExactReference> {
    let basis = full_basis(table)?;
    let mat = build_matrix(&basis, &MaskedHamiltonian::new(table, None))?;
    let states = lowest_eigenpairs_with(&mat, j, &EigenOptions::with_tol(tol), None)?;
    let rdms = states.iter().map(|s| build_rdms(&s.amplitudes, &basis)).collect();
    Ok(ExactReference {
        basis,
        states,
        rdms,
    })
}

/// Walk the ranked lists in round-robin order, skipping classes already
/// taken, until `min(m, pool size)` distinct classes are chosen.
fn merge_round_robin(lists: &[RankedList], m: usize) -> Vec<ConjClass> {
    let pool = lists.iter().map(|l| l.len()).max().unwrap_or(0);
    let target = m.min(pool);
    let mut seen: HashSet<TermKey> = HashSet::new();
    let mut out = Vec::with_capacity(target);
    let mut pos = 0;
    while out.len() < target {
        let mut any = false;
        for l in lists {
            if let Some(e) = l.entries.get(pos) {
                any = true;
                if seen.insert(e.class.canonical) {
                    out.push(e.class.clone());
                    if out.len() == target {
                        break;
                    }
                }
            }
        }
        if !any {
            break;
        }
        pos += 1;
    }
    out
}

fn require_closed_shell(table: &IntegralTable) -> Result<OrbitalPartition> {
    let partition = classify_orbitals(&table.header)?;
    if !table.header.nelec.is_multiple_of(2) {
        return Err(SquishError::Unsupported("odd electron count".into()));
    }
    Ok(partition)
}

pub fn run_squish(table: &IntegralTable, config: &SquishConfig) -> Result<SquishTrace> {
    run_squish_observed(table, config, &mut |_, _| Ok(()))
}

/// Multi-state variant; identical to [`run_squish`] apart from the mode
/// check, and for `J = 1` it reproduces the single-state trace exactly.
pub fn run_multi_ref(table: &IntegralTable, config: &SquishConfig) -> Result<SquishTrace> {
    if config.mode != Mode::MultiRef {
        return Err(SquishError::Domain(format!(
            "run_multi_ref needs mode multi_ref, got {}",
            config.mode
        )));
    }
    run_squish(table, config)
}

/// Like [`run_squish`], calling `observer(k, terms)` with the included set
/// at the start of every iteration.
pub fn run_squish_observed(
    table: &IntegralTable,
    config: &SquishConfig,
    observer: &mut dyn FnMut(usize, &TermSet) -> Result<()>,
) -> Result<SquishTrace> {
    config.validate()?;
    if config.mode == Mode::OneShot {
        return Err(SquishError::Domain(
            "one_shot mode is run through run_one_shot".into(),
        ));
    }
    let partition = require_closed_shell(table)?;
    let virt = partition.virtual_mask();
    let basis = full_basis(table)?;
    let j = config.states;
    if j > basis.len() {
        return Err(SquishError::Domain(format!(
            "{j} target states requested in a {}-determinant space",
            basis.len()
        )));
    }
    let core = table.core_energy;
    let e_hf = hf_energy(table, &partition)?;
    let exact = if config.needs_exact() {
        Some(exact_reference(table, j, config.solver_tol)?)
    } else {
        None
    };
    let exact_energies = exact.as_ref().map(|e| e.total_energies(core));
    let kind = config.mode.energy_kind();
    let source = config.mode.ranking_source();
    let opts = EigenOptions::with_tol(config.solver_tol);

    let mut terms = initial_term_set(&partition, config.initial_set, config.grouping);
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut guess: Option<Vec<Vec<f64>>> = None;

    let finish = |records, termination, terms, states| SquishTrace {
        config: config.clone(),
        hf_energy: e_hf,
        exact_energies: exact_energies.clone(),
        records,
        termination,
        final_terms: terms,
        final_states: states,
    };

    for k in 0.. {
        if k >= config.max_iterations {
            let states = Vec::new();
            return Err(SquishError::Timeout(Box::new(finish(
                records,
                Termination::Timeout,
                terms,
                states,
            ))));
        }
        let start = Instant::now();
        observer(k, &terms)?;
        let ham = MaskedHamiltonian::new(table, Some(&terms));
        let mat = build_matrix(&basis, &ham).map_err(|e| e.at_iteration(k))?;
        let states = lowest_eigenpairs_with(&mat, j, &opts, guess.as_deref())
            .map_err(|e| e.at_iteration(k))?;
        let rdms: Vec<RdmPair> = states
            .iter()
            .map(|s| build_rdms(&s.amplitudes, &basis))
            .collect();
        let states_nv: Vec<f64> = states.iter().map(|s| s.energy + core).collect();
        let states_v: Vec<f64> = rdms
            .iter()
            .map(|r| energy_from_rdms(r, table, None))
            .collect();
        let current = match kind {
            EnergyKind::NonVariational => &states_nv,
            EnergyKind::Variational => &states_v,
        };
        let err_exact = exact_energies.as_ref().map(|ex| {
            ex.iter()
                .zip(current)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        });
        let err_self = records.last().map(|prev: &IterationRecord| {
            prev.energies(kind)
                .iter()
                .zip(current)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        });
        let ovl = match &exact {
            Some(ex) => Some(overlap(
                &ex.states[0].amplitudes,
                &states[0].amplitudes,
                &basis,
                &ex.basis,
            )?),
            None => None,
        };
        let mut record = IterationRecord {
            k,
            included_tuples: terms.tuple_count(),
            vvvv_tuples: terms.vvvv_tuples(&virt),
            e_nv: states_nv[0],
            e_v: states_v[0],
            e_corr: current[0] - e_hf,
            err_exact,
            err_self,
            overlap: ovl,
            one_norm: one_norm(&truncated_table(table, &terms)),
            s_squared: spin_squared(&states[0].amplitudes, &basis),
            states_nv: states_nv.clone(),
            states_v: states_v.clone(),
            added_classes: 0,
            wall_ms: 0.0,
        };
        let converged = match config.convergence {
            ConvergenceRef::Exact => err_exact.is_some_and(|e| e < config.delta),
            ConvergenceRef::SelfConsistent => err_self.is_some_and(|e| e < config.delta),
        };
        log::info!(
            "k={k} tuples={} vvvv={} E={:.10} err_exact={:?} err_self={:?}",
            record.included_tuples,
            record.vvvv_tuples,
            current[0],
            err_exact,
            err_self
        );
        let pool = terms.complement();
        let termination = if converged {
            Some(Termination::Converged)
        } else if pool.is_empty() {
            Some(Termination::Exhausted)
        } else {
            None
        };
        if let Some(t) = termination {
            record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
            records.push(record);
            return Ok(finish(records, t, terms, states));
        }

        let rankings: Vec<RankedList> = match source {
            RankingSource::Current => rdms
                .iter()
                .map(|r| rank_energetic(term_contributions(r, table, &pool)))
                .collect(),
            RankingSource::Exact => exact
                .as_ref()
                .expect("exact reference computed for benchmark modes")
                .rdms
                .iter()
                .map(|r| rank_energetic(term_contributions(r, table, &pool)))
                .collect(),
            RankingSource::Coefficient => vec![rank_coefficient(table, &pool)],
        };
        let chosen = merge_round_robin(&rankings, config.schedule.m_at(k));
        for c in &chosen {
            terms.insert_class(c);
        }
        record.added_classes = chosen.len();
        record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        records.push(record);
        guess = Some(states.into_iter().map(|s| s.amplitudes).collect());
    }
    unreachable!("the iteration loop only exits by returning")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Energetic,
    Coefficient,
}

string_enum!(Scheme {
    Energetic => "energetic",
    Coefficient => "coefficient",
});

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneShotConfig {
    pub scheme: Scheme,
    pub initial_set: InitialSet,
    pub grouping: Grouping,
    /// Class counts to evaluate; values above the pool size are clamped.
    pub budgets: Vec<usize>,
    pub solver_tol: f64,
}

impl Default for OneShotConfig {
    fn default() -> Self {
        OneShotConfig {
            scheme: Scheme::Energetic,
            initial_set: InitialSet::NoVvvv,
            grouping: Grouping::Conjugate,
            budgets: vec![1, 2, 5, 10, 20, 50, 100, 200, 500, 1000],
            solver_tol: crate::eigensolver::DEFAULT_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneShotPoint {
    pub m: usize,
    pub included_tuples: usize,
    pub vvvv_tuples: usize,
    /// `<Psi_0|H_T|Psi_0>` with the exact ground state, core included.
    pub e_eval: f64,
    pub err_exact: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneShotResult {
    pub exact_energy: f64,
    /// Full-Hamiltonian energy of the approximate state.
    pub approx_energy: f64,
    pub pool_classes: usize,
    /// Canonical keys in ranking order.
    pub order: Vec<TermKey>,
    pub points: Vec<OneShotPoint>,
}

impl OneShotResult {
    /// Smallest evaluated point within `tol` of the exact energy.
    pub fn first_within(&self, tol: f64) -> Option<&OneShotPoint> {
        self.points.iter().find(|p| p.err_exact < tol)
    }
}

/// Ground state of the initial truncated Hamiltonian, used as the
/// approximate state when none is supplied.
pub fn degraded_state(
    table: &IntegralTable,
    initial_set: InitialSet,
    grouping: Grouping,
    tol: f64,
) -> Result<Vec<f64>> {
    let partition = require_closed_shell(table)?;
    let basis = full_basis(table)?;
    let terms = initial_term_set(&partition, initial_set, grouping);
    let mat = build_matrix(&basis, &MaskedHamiltonian::new(table, Some(&terms)))?;
    let mut states = lowest_eigenpairs_with(&mat, 1, &EigenOptions::with_tol(tol), None)?;
    Ok(states.remove(0).amplitudes)
}

/// Rank the whole initial pool once with `approx` (amplitudes over the full
/// determinant basis in canonical order) and evaluate every budget with the
/// exact ground state.
pub fn run_one_shot(
    table: &IntegralTable,
    approx: &[f64],
    config: &OneShotConfig,
) -> Result<OneShotResult> {
    let partition = require_closed_shell(table)?;
    let virt = partition.virtual_mask();
    let exact = exact_reference(table, 1, config.solver_tol)?;
    if approx.len() != exact.basis.len() {
        return Err(SquishError::Domain(format!(
            "approximate state has {} amplitudes, the sector has {} determinants",
            approx.len(),
            exact.basis.len()
        )));
    }
    let norm = approx.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(SquishError::Domain("approximate state is zero".into()));
    }
    let approx: Vec<f64> = approx.iter().map(|c| c / norm).collect();
    let approx_rdms = build_rdms(&approx, &exact.basis);

    let start = initial_term_set(&partition, config.initial_set, config.grouping);
    let pool = start.complement();
    let ranked = match config.scheme {
        Scheme::Energetic => rank_energetic(term_contributions(&approx_rdms, table, &pool)),
        Scheme::Coefficient => rank_coefficient(table, &pool),
    };
    let exact_energy = exact.states[0].energy + table.core_energy;
    let mut budgets = config.budgets.clone();
    budgets.sort_unstable();
    budgets.dedup();
    let mut points = Vec::with_capacity(budgets.len());
    for &m in &budgets {
        let mut terms = start.clone();
        for c in ranked.classes().take(m) {
            terms.insert_class(c);
        }
        let e_eval = energy_from_rdms(&exact.rdms[0], table, Some(&terms));
        points.push(OneShotPoint {
            m: m.min(ranked.len()),
            included_tuples: terms.tuple_count(),
            vvvv_tuples: terms.vvvv_tuples(&virt),
            e_eval,
            err_exact: (e_eval - exact_energy).abs(),
        });
    }
    Ok(OneShotResult {
        exact_energy,
        approx_energy: energy_from_rdms(&approx_rdms, table, None),
        pool_classes: ranked.len(),
        order: ranked.classes().map(|c| c.canonical).collect(),
        points,
    })
}

pub const CSV_HEADER: &str =
    "k,included_tuples,vvvv_tuples,E_nv,E_v,E_corr,err_exact,err_self,overlap,wall_ms";

/// Twelve significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.11e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// Write the per-iteration CSV. With `timing = false` the `wall_ms` column
/// is left empty so output bytes depend only on the inputs.
pub fn write_trace_csv<W: Write>(trace: &SquishTrace, mut sink: W, timing: bool) -> Result<()> {
    writeln!(sink, "{CSV_HEADER}")?;
    for r in &trace.records {
        writeln!(
            sink,
            "{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.included_tuples,
            r.vvvv_tuples,
            format_float(r.e_nv),
            format_float(r.e_v),
            format_float(r.e_corr),
            opt(r.err_exact),
            opt(r.err_self),
            opt(r.overlap),
            if timing { format!("{:.3}", r.wall_ms) } else { String::new() },
        )?;
    }
    Ok(())
}
