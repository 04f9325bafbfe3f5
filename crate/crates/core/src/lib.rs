//! Iterative, wavefunction-informed truncation of second-quantized
//! electronic Hamiltonians, with an exact determinant CI backend.
//!
//! The typical flow: read integrals with [`fcidump::read_fcidump`], pick a
//! [`driver::SquishConfig`], and call [`driver::run_squish`]. The returned
//! [`driver::SquishTrace`] records term counts and energies per iteration.
// `!(x > 0.0)` is used on purpose so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asci;
pub mod cispace;
pub mod cli;
pub mod driver;
pub mod eigensolver;
pub mod error;
pub mod fcidump;
pub mod hamiltonian;
pub mod ranking;
pub mod rdm;
pub mod shadows;

pub use asci::{asci_rank, run_asci, AsciConfig, AsciTrace};
pub use cispace::{
    build_matrix, enumerate_basis, hf_energy, matrix_element, CiBasis, Determinant,
    MaskedHamiltonian, SparseSymMatrix,
};
pub use driver::{
    run_multi_ref, run_one_shot, run_squish, ConvergenceRef, MSchedule, Mode, SquishConfig,
    SquishTrace, CHEMICAL_ACCURACY,
};
pub use eigensolver::{lowest_eigenpairs, overlap, CiState};
pub use error::{Result, SquishError};
pub use fcidump::{classify_orbitals, read_fcidump, IntegralTable, OrbitalPartition};
pub use hamiltonian::{
    count_report, initial_term_set, one_norm, ConjClass, Grouping, InitialSet, TermKey, TermSet,
};
pub use ranking::{rank_coefficient, rank_energetic, take_top, RankedList};
pub use rdm::{build_rdms, energy_from_rdms, term_contributions, RdmPair};
pub use shadows::{budget_report, measurement_budget, BudgetQuery};
