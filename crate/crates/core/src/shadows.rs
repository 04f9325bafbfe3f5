//! Fermionic classical-shadows measurement budget for all 2-RDM elements
//! at fixed particle number.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SquishError};
use crate::fcidump::FcidumpHeader;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetQuery {
    pub eta: usize,
    /// Spin-orbital count `N = 2M`.
    pub n_spin_orbitals: usize,
    pub epsilon: f64,
}

impl BudgetQuery {
    pub fn validate(&self) -> Result<()> {
        if self.eta < 2 {
            return Err(SquishError::Domain(format!(
                "need at least two electrons, got {}",
                self.eta
            )));
        }
        if self.n_spin_orbitals < 2 {
            return Err(SquishError::Domain(format!(
                "need at least two spin orbitals, got {}",
                self.n_spin_orbitals
            )));
        }
        if self.eta > self.n_spin_orbitals {
            return Err(SquishError::Domain(format!(
                "{} electrons do not fit in {} spin orbitals",
                self.eta, self.n_spin_orbitals
            )));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(SquishError::Domain(format!(
                "epsilon {} must be positive and finite",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// `C(eta,2) (1 - (eta-2)/N)^2 (N+1)/(N-1) / eps^2`.
pub fn measurement_budget(q: &BudgetQuery) -> Result<f64> {
    q.validate()?;
    let eta = q.eta as f64;
    let n = q.n_spin_orbitals as f64;
    let pairs = eta * (eta - 1.0) / 2.0;
    let fill = (n - (eta - 2.0)) / n;
    let rational = pairs * fill * fill * (n + 1.0) / (n - 1.0);
    Ok(rational / (q.epsilon * q.epsilon))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub eta: usize,
    pub n_spin_orbitals: usize,
    pub epsilon: f64,
    pub budget: f64,
    /// Number of spin-orbital 2-RDM entries, `N^4`.
    pub observable_count: u64,
}

pub fn budget_report(header: &FcidumpHeader, epsilon: f64) -> Result<BudgetReport> {
    let q = BudgetQuery {
        eta: header.nelec,
        n_spin_orbitals: header.n_spin_orbitals(),
        epsilon,
    };
    budget_for(&q)
}

pub fn budget_for(q: &BudgetQuery) -> Result<BudgetReport> {
    let budget = measurement_budget(q)?;
    Ok(BudgetReport {
        eta: q.eta,
        n_spin_orbitals: q.n_spin_orbitals,
        epsilon: q.epsilon,
        budget,
        observable_count: (q.n_spin_orbitals as u64).pow(4),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ulps(a: f64, b: f64) -> u64 {
        (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
    }

    fn q(eta: usize, n: usize, epsilon: f64) -> BudgetQuery {
        BudgetQuery {
            eta,
            n_spin_orbitals: n,
            epsilon,
        }
    }

    #[test]
    fn reference_values() {
        assert!(ulps(measurement_budget(&q(2, 12, 0.01)).unwrap(), 130000.0 / 11.0) <= 1);
        assert!(ulps(measurement_budget(&q(4, 12, 0.1)).unwrap(), 195000.0 / 396.0) <= 1);
    }

    #[test]
    fn halving_epsilon_quadruples() {
        for &(eta, n, eps) in &[(2, 12, 0.01), (4, 12, 0.1), (6, 20, 0.037), (3, 7, 1.3)] {
            let a = measurement_budget(&q(eta, n, eps)).unwrap();
            let b = measurement_budget(&q(eta, n, eps / 2.0)).unwrap();
            assert_eq!(b, 4.0 * a);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(measurement_budget(&q(1, 12, 0.1)).is_err());
        assert!(measurement_budget(&q(2, 1, 0.1)).is_err());
        assert!(measurement_budget(&q(2, 12, 0.0)).is_err());
        assert!(measurement_budget(&q(14, 12, 0.1)).is_err());
    }

    #[test]
    fn report_counts_observables() {
        let h = FcidumpHeader::new(6, 4, 0).unwrap();
        let r = budget_report(&h, 0.01).unwrap();
        assert_eq!(r.n_spin_orbitals, 12);
        assert_eq!(r.observable_count, 20736);
    }
}
