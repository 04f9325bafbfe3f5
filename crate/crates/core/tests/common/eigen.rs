//! Davidson against a dense diagonalization on random sparse matrices.

use rand::Rng;
use squish_core::cispace::SparseSymMatrix;
use squish_core::eigensolver::{lowest_eigenpairs_with, EigenOptions};

/// Spread diagonal plus a few random couplings per row, like a CI matrix.
pub fn random_sparse(seed: u64, n: usize) -> SparseSymMatrix {
    let mut rng = super::rng(seed);
    let diag: Vec<f64> = (0..n)
        .map(|i| i as f64 * 0.05 + rng.random_range(-1.0..1.0))
        .collect();
    let mut lower = Vec::new();
    for i in 1..n {
        for _ in 0..4 {
            let j = rng.random_range(0..i);
            lower.push((i, j, rng.random_range(-0.3..0.3)));
        }
    }
    lower.sort_by_key(|a| (a.0, a.1));
    lower.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));
    SparseSymMatrix::from_lower(n, diag, lower)
}

pub struct Comparison {
    pub energy_error: f64,
    /// `max ||H v - lambda_exact v||` with `lambda_exact` from the dense
    /// spectrum; for isolated roots this bounds the vector error by
    /// residual over gap.
    pub residual: f64,
    pub orthogonality_error: f64,
}

/// Instance sizes spread over `[50, 2000]`, denser at the small end.
pub fn instance_size(i: usize, count: usize) -> usize {
    let t = i as f64 / (count - 1).max(1) as f64;
    50 + (1950.0 * t * t * t).round() as usize
}

pub fn compare(seed: u64, n: usize, j: usize) -> Comparison {
    let mat = random_sparse(seed, n);
    let opts = EigenOptions {
        dense_threshold: 0,
        tol: 1e-9,
        ..Default::default()
    };
    let states = lowest_eigenpairs_with(&mat, j, &opts, None).expect("davidson converges");
    let mut exact: Vec<f64> = mat.to_dense().symmetric_eigenvalues().iter().copied().collect();
    exact.sort_by(f64::total_cmp);
    let mut energy_error: f64 = 0.0;
    let mut residual: f64 = 0.0;
    let mut orthogonality_error: f64 = 0.0;
    let mut hv = vec![0.0; n];
    for (i, s) in states.iter().enumerate() {
        energy_error = energy_error.max((s.energy - exact[i]).abs());
        mat.matvec(&s.amplitudes, &mut hv);
        let r = hv
            .iter()
            .zip(&s.amplitudes)
            .map(|(h, v)| (h - exact[i] * v).powi(2))
            .sum::<f64>()
            .sqrt();
        residual = residual.max(r);
        let norm: f64 = s.amplitudes.iter().map(|v| v * v).sum();
        orthogonality_error = orthogonality_error.max((norm - 1.0).abs());
        for t in &states[..i] {
            let ov: f64 = t.amplitudes.iter().zip(&s.amplitudes).map(|(a, b)| a * b).sum();
            orthogonality_error = orthogonality_error.max(ov.abs());
        }
    }
    Comparison {
        energy_error,
        residual,
        orthogonality_error,
    }
}
