//! Driver invariants on the molecular fixtures.

mod common;

use squish_core::driver::{
    degraded_state, run_multi_ref, run_one_shot, run_squish, run_squish_observed, write_trace_csv, ConvergenceRef, IterationRecord, MSchedule, Mode,
    OneShotConfig, Scheme, SquishConfig, Termination,
};
use squish_core::error::SquishError;
use squish_core::hamiltonian::{Grouping, InitialSet, TermSet};
use squish_core::{one_norm, IntegralTable};

fn fci(name: &str) -> f64 {
    common::sidecar(name).fci_energies[0]
}

fn check_invariants(name: &str, table: &IntegralTable, records: &[IterationRecord]) {
    let e_fci = fci(name);
    let full_norm = one_norm(table);
    for (i, r) in records.iter().enumerate() {
        assert!(r.e_v >= e_fci - 1e-9, "{name} k={}: E_v {} below FCI", r.k, r.e_v);
        assert!(r.one_norm <= full_norm + 1e-12, "{name} k={}", r.k);
        if i > 0 {
            let prev = &records[i - 1];
            assert!(r.one_norm >= prev.one_norm, "{name} k={}: one-norm decreased", r.k);
            assert!(r.included_tuples > prev.included_tuples, "{name} k={}", r.k);
            assert!(r.vvvv_tuples >= prev.vvvv_tuples);
        }
    }
}

#[test]
fn variational_bound_and_monotone_norms_on_all_modes() {
    for name in common::FIXTURES {
        let table = common::fixture(name);
        for mode in common::COUNT_MODES {
            let trace = run_squish(&table, &common::count_config(mode)).unwrap();
            assert_eq!(trace.termination, Termination::Converged, "{name} {mode}");
            check_invariants(name, &table, &trace.records);
            let default = SquishConfig {
                mode,
                ..Default::default()
            };
            let trace = run_squish(&table, &default).unwrap();
            check_invariants(name, &table, &trace.records);
        }
    }
}

#[test]
fn exhausting_the_pool_recovers_fci() {
    for name in common::FIXTURES {
        let table = common::fixture(name);
        for grouping in [Grouping::Conjugate, Grouping::Permutational] {
            let config = SquishConfig {
                grouping,
                schedule: MSchedule {
                    m0: 1_000_000,
                    ..Default::default()
                },
                delta: 1e-300,
                convergence: ConvergenceRef::Exact,
                ..Default::default()
            };
            let trace = run_squish(&table, &config).unwrap();
            assert_eq!(trace.termination, Termination::Exhausted);
            assert_eq!(trace.records.len(), 2);
            let last = trace.last();
            assert!((last.e_nv - fci(name)).abs() <= 1e-8, "{name}");
            assert!((last.e_v - fci(name)).abs() <= 1e-8, "{name}");
            assert!((last.overlap.unwrap() - 1.0).abs() <= 1e-8);
            assert!((last.one_norm - one_norm(&table)).abs() <= 1e-12);
        }
    }
}

#[test]
fn iteration_limit_reports_partial_trace() {
    let table = common::fixture("h2_ccpvdz_6orb");
    let config = SquishConfig {
        delta: 1e-300,
        max_iterations: 2,
        ..Default::default()
    };
    match run_squish(&table, &config) {
        Err(SquishError::Timeout(trace)) => {
            assert_eq!(trace.records.len(), 2);
            assert_eq!(trace.termination, Termination::Timeout);
        }
        other => panic!("expected a timeout, got {other:?}"),
    }
}

#[test]
fn included_sets_grow_and_stay_closed() {
    let table = common::fixture("lih_sto3g");
    let mut sets: Vec<TermSet> = Vec::new();
    run_squish_observed(&table, &common::count_config(Mode::SquishV), &mut |k, t| {
        assert_eq!(k, sets.len());
        sets.push(t.clone());
        Ok(())
    })
    .unwrap();
    for w in sets.windows(2) {
        assert!(w[0].is_subset_of(&w[1]));
        assert!(w[1].tuple_count() > w[0].tuple_count());
    }
    assert!(sets.iter().all(|s| s.is_closed()));
}

fn strip_timing(records: &[IterationRecord]) -> Vec<IterationRecord> {
    records
        .iter()
        .cloned()
        .map(|mut r| {
            r.wall_ms = 0.0;
            r
        })
        .collect()
}

#[test]
fn single_state_multi_ref_reproduces_squish() {
    for name in common::FIXTURES {
        let table = common::fixture(name);
        let single = run_squish(&table, &common::count_config(Mode::SquishV)).unwrap();
        let multi = run_multi_ref(&table, &common::count_config(Mode::MultiRef)).unwrap();
        assert_eq!(strip_timing(&single.records), strip_timing(&multi.records), "{name}");
        assert_eq!(single.final_terms, multi.final_terms);
    }
}

#[test]
fn two_state_multi_ref_reaches_both_fci_energies() {
    let name = "h2_ccpvdz_6orb";
    let table = common::fixture(name);
    let config = SquishConfig {
        mode: Mode::MultiRef,
        states: 2,
        delta: 1e-6,
        convergence: ConvergenceRef::Exact,
        ..Default::default()
    };
    let trace = run_multi_ref(&table, &config).unwrap();
    assert_eq!(trace.termination, Termination::Converged);
    let side = common::sidecar(name);
    for (got, want) in trace.last().states_v.iter().zip(&side.fci_energies) {
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
    assert!(run_multi_ref(&table, &common::count_config(Mode::SquishV)).is_err());
}

#[test]
fn csv_is_deterministic_across_runs_and_thread_counts() {
    let table = common::fixture("h3p_ccpvdz_6orb");
    let config = common::count_config(Mode::SquishV);
    let csv = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let trace = pool.install(|| run_squish(&table, &config)).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf, false).unwrap();
        buf
    };
    let a = csv(1);
    assert_eq!(a, csv(1));
    assert_eq!(a, csv(3));
}

#[test]
fn one_shot_full_budget_is_exact() {
    for name in common::FIXTURES {
        let table = common::fixture(name);
        let approx = degraded_state(&table, InitialSet::NoVvvv, Grouping::Conjugate, 1e-9).unwrap();
        for scheme in [Scheme::Energetic, Scheme::Coefficient] {
            let config = OneShotConfig {
                scheme,
                budgets: vec![0, 1, 10, usize::MAX],
                ..Default::default()
            };
            let res = run_one_shot(&table, &approx, &config).unwrap();
            let last = res.points.last().unwrap();
            assert_eq!(last.m, res.pool_classes);
            assert!(last.err_exact < 1e-10, "{name} {scheme}: {}", last.err_exact);
            assert!((res.exact_energy - fci(name)).abs() < 1e-8);
            assert!(res.approx_energy >= res.exact_energy - 1e-10);
        }
    }
}

#[test]
fn one_shot_energetic_ranking_beats_coefficients_on_h2() {
    let table = common::fixture("h2_ccpvdz_6orb");
    let approx = degraded_state(&table, InitialSet::NoVvvv, Grouping::Conjugate, 1e-9).unwrap();
    let first = |scheme| {
        let config = OneShotConfig {
            scheme,
            budgets: (0..=600).collect(),
            ..Default::default()
        };
        let res = run_one_shot(&table, &approx, &config).unwrap();
        res.first_within(squish_core::CHEMICAL_ACCURACY).unwrap().vvvv_tuples
    };
    let (e, c) = (first(Scheme::Energetic), first(Scheme::Coefficient));
    assert!(e < c, "energetic {e} vs coefficient {c}");
}

#[test]
fn invalid_requests_are_rejected() {
    let table = common::fixture("h2_ccpvdz_6orb");
    let one_shot = SquishConfig {
        mode: Mode::OneShot,
        ..Default::default()
    };
    assert!(matches!(run_squish(&table, &one_shot), Err(SquishError::Domain(_))));
    let bad = SquishConfig {
        delta: 0.0,
        ..Default::default()
    };
    assert!(matches!(run_squish(&table, &bad), Err(SquishError::Domain(_))));
    let mut rng = common::rng(5);
    let odd = common::random_table(&mut rng, 3, 3, 1);
    assert!(run_squish(&odd, &SquishConfig::default()).is_err());
    let approx = vec![1.0; 3];
    assert!(run_one_shot(&table, &approx, &OneShotConfig::default()).is_err());
}
