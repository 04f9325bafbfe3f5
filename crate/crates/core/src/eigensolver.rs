//! Lowest eigenpairs of a sparse symmetric matrix.
//!
//! Small problems go through a dense symmetric eigendecomposition; larger
//! ones use block Davidson with a diagonal preconditioner.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cispace::{CiBasis, Determinant, SparseSymMatrix};
use crate::error::{Result, SquishError};

pub const DEFAULT_DENSE_THRESHOLD: usize = 1500;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEGENERACY_GAP: f64 = 1e-9;

/// Normalized eigenvector with its (electronic) eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiState {
    pub amplitudes: Vec<f64>,
    pub energy: f64,
    pub residual_norm: f64,
    /// Set when the next eigenvalue lies within the degeneracy gap.
    pub degenerate: bool,
}

impl CiState {
    /// Normalize `amplitudes` and attach its Rayleigh quotient on `mat`.
    pub fn from_amplitudes(mut amplitudes: Vec<f64>, mat: &SparseSymMatrix) -> Result<Self> {
        if amplitudes.len() != mat.dim() {
            return Err(SquishError::Domain(format!(
                "state has {} amplitudes, matrix dimension is {}",
                amplitudes.len(),
                mat.dim()
            )));
        }
        let norm = dot(&amplitudes, &amplitudes).sqrt();
        if norm == 0.0 {
            return Err(SquishError::Domain("zero state vector".into()));
        }
        amplitudes.iter_mut().for_each(|c| *c /= norm);
        let mut hv = vec![0.0; mat.dim()];
        mat.matvec(&amplitudes, &mut hv);
        let energy = dot(&amplitudes, &hv);
        let residual_norm = residual(&hv, &amplitudes, energy);
        Ok(CiState {
            amplitudes,
            energy,
            residual_norm,
            degenerate: false,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub dense_threshold: usize,
    /// Davidson subspace size that triggers a restart.
    pub max_subspace: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: DEFAULT_TOL,
            max_iterations: 500,
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
            max_subspace: 48,
        }
    }
}

impl EigenOptions {
    pub fn with_tol(tol: f64) -> Self {
        EigenOptions {
            tol,
            ..Default::default()
        }
    }
}

pub fn lowest_eigenpairs(mat: &SparseSymMatrix, j: usize, tol: f64) -> Result<Vec<CiState>> {
    lowest_eigenpairs_with(mat, j, &EigenOptions::with_tol(tol), None)
}

/// Lowest `j` eigenpairs in ascending order.
///
/// `guess` holds previous states used as Davidson starting vectors and as
/// the tie-break inside degenerate blocks: there the returned vector is the
/// one with maximal overlap with the matching guess.
pub fn lowest_eigenpairs_with(
    mat: &SparseSymMatrix,
    j: usize,
    opts: &EigenOptions,
    guess: Option<&[Vec<f64>]>,
) -> Result<Vec<CiState>> {
    let n = mat.dim();
    if j == 0 || j > n {
        return Err(SquishError::Domain(format!(
            "requested {j} eigenpairs of a {n}-dimensional matrix"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(SquishError::Domain(format!("tolerance {} must be positive", opts.tol)));
    }
    if let Some(g) = guess {
        if g.iter().any(|v| v.len() != n) {
            return Err(SquishError::Domain("guess vector has the wrong dimension".into()));
        }
    }
    // one extra root so degeneracy at the boundary is visible
    let nroots = (j + 1).min(n);
    let (values, vectors) = if n <= opts.dense_threshold {
        dense_lowest(mat, nroots)
    } else {
        davidson(mat, nroots, opts, guess)?
    };
    let (values, vectors) = resolve_degeneracy(values, vectors, guess);

    let mut out = Vec::with_capacity(j);
    let mut hv = vec![0.0; n];
    for i in 0..j {
        let mut v = vectors[i].clone();
        fix_sign(&mut v, guess.and_then(|g| g.get(i)).map(|g| g.as_slice()));
        mat.matvec(&v, &mut hv);
        let res = residual(&hv, &v, values[i]);
        if res > opts.tol {
            return Err(SquishError::Convergence {
                best_residual: res,
                iteration: None,
            });
        }
        let degenerate = (i > 0 && (values[i] - values[i - 1]).abs() < DEGENERACY_GAP)
            || (i + 1 < values.len() && (values[i + 1] - values[i]).abs() < DEGENERACY_GAP);
        out.push(CiState {
            amplitudes: v,
            energy: values[i],
            residual_norm: res,
            degenerate,
        });
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual(hv: &[f64], v: &[f64], e: f64) -> f64 {
    hv.iter()
        .zip(v)
        .map(|(h, x)| (h - e * x).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

fn dense_lowest(mat: &SparseSymMatrix, nroots: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (values, vecs) = sorted_eigen(mat.to_dense());
    let vectors = (0..nroots).map(|c| vecs.column(c).iter().copied().collect()).collect();
    (values[..nroots].to_vec(), vectors)
}

/// Orthogonalize `v` against `basis` (two passes) and normalize; `None` if
/// nothing independent is left.
fn orthonormalize_against(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let start = dot(&v, &v).sqrt();
    if start == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, &v);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    let norm = dot(&v, &v).sqrt();
    if norm <= 1e-10 * start {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

fn davidson(
    mat: &SparseSymMatrix,
    nroots: usize,
    opts: &EigenOptions,
    guess: Option<&[Vec<f64>]>,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = mat.dim();
    let diag = mat.diagonal();
    let max_sub = opts.max_subspace.max(3 * nroots + 2).min(n);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    if let Some(g) = guess {
        for v in g {
            if let Some(v) = orthonormalize_against(v.clone(), &basis) {
                basis.push(v);
            }
        }
    }
    let mut by_diag: Vec<usize> = (0..n).collect();
    by_diag.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let block = (nroots + 2).min(n);
    for &i in &by_diag {
        if basis.len() >= block {
            break;
        }
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        if let Some(v) = orthonormalize_against(e, &basis) {
            basis.push(v);
        }
    }

    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut best = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        while images.len() < basis.len() {
            let mut w = vec![0.0; n];
            mat.matvec(&basis[images.len()], &mut w);
            images.push(w);
        }
        let k = basis.len();
        let proj = DMatrix::from_fn(k, k, |a, b| dot(&basis[a], &images[b]));
        let proj = (&proj + proj.transpose()) * 0.5;
        let (theta, y) = sorted_eigen(proj);
        let take = nroots.min(k);

        let mut ritz = Vec::with_capacity(take);
        let mut corrections = Vec::new();
        let mut worst: f64 = 0.0;
        for r in 0..take {
            let mut x = vec![0.0; n];
            let mut hx = vec![0.0; n];
            for c in 0..k {
                let w = y[(c, r)];
                x.iter_mut().zip(&basis[c]).for_each(|(a, b)| *a += w * b);
                hx.iter_mut().zip(&images[c]).for_each(|(a, b)| *a += w * b);
            }
            let res: Vec<f64> = hx.iter().zip(&x).map(|(h, v)| h - theta[r] * v).collect();
            let rn = dot(&res, &res).sqrt();
            worst = worst.max(rn);
            if rn > 0.1 * opts.tol {
                let t = res
                    .iter()
                    .zip(diag)
                    .map(|(ri, di)| {
                        let den = theta[r] - di;
                        let den = if den.abs() < 1e-8 { 1e-8_f64.copysign(den) } else { den };
                        ri / den
                    })
                    .collect::<Vec<f64>>();
                corrections.push(t);
            }
            ritz.push(x);
        }
        best = best.min(worst);
        if take == nroots && worst <= 0.1 * opts.tol {
            return Ok((theta[..nroots].to_vec(), ritz));
        }
        if k == n {
            // the subspace spans everything; Ritz pairs are exact
            return Ok((theta[..nroots].to_vec(), ritz));
        }

        if k + corrections.len() > max_sub {
            // restart from the current Ritz vectors
            let mut fresh = Vec::new();
            for v in ritz {
                if let Some(v) = orthonormalize_against(v, &fresh) {
                    fresh.push(v);
                }
            }
            basis = fresh;
            images.clear();
        }
        let mut added = 0;
        for t in corrections {
            if basis.len() >= n {
                break;
            }
            if let Some(v) = orthonormalize_against(t, &basis) {
                basis.push(v);
                added += 1;
            }
        }
        if added == 0 {
            // stagnation: extend with the next unused unit vector
            let mut extended = false;
            for &i in &by_diag {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                if let Some(v) = orthonormalize_against(e, &basis) {
                    basis.push(v);
                    extended = true;
                    break;
                }
            }
            if !extended {
                break;
            }
        }
    }
    Err(SquishError::Convergence {
        best_residual: best,
        iteration: None,
    })
}

/// Within each block of eigenvalues closer than the degeneracy gap, rotate
/// so that the vector at position `i` is the normalized projection of
/// `guess[i]` onto the block, then re-orthonormalize the rest.
fn resolve_degeneracy(
    values: Vec<f64>,
    mut vectors: Vec<Vec<f64>>,
    guess: Option<&[Vec<f64>]>,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let Some(guess) = guess else {
        return (values, vectors);
    };
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end] - values[end - 1] < DEGENERACY_GAP {
            end += 1;
        }
        if end - start > 1 {
            let block: Vec<Vec<f64>> = vectors[start..end].to_vec();
            let mut rotated: Vec<Vec<f64>> = Vec::new();
            for i in start..end {
                let Some(g) = guess.get(i) else { break };
                let mut proj = vec![0.0; g.len()];
                for b in &block {
                    let c = dot(b, g);
                    proj.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
                }
                if let Some(v) = orthonormalize_against(proj, &rotated) {
                    rotated.push(v);
                }
            }
            for b in &block {
                if rotated.len() == block.len() {
                    break;
                }
                if let Some(v) = orthonormalize_against(b.clone(), &rotated) {
                    rotated.push(v);
                }
            }
            if rotated.len() == block.len() {
                vectors.splice(start..end, rotated);
            }
        }
        start = end;
    }
    (values, vectors)
}

/// Positive overlap with the guess if there is one, otherwise a positive
/// largest-magnitude component.
fn fix_sign(v: &mut [f64], guess: Option<&[f64]>) {
    let s = match guess.map(|g| dot(g, v)) {
        Some(o) if o.abs() > 1e-12 => o,
        _ => {
            let mut big = 0.0_f64;
            for &x in v.iter() {
                if x.abs() > big.abs() + 1e-14 {
                    big = x;
                }
            }
            big
        }
    };
    if s < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `|<a|b>|` with determinants matched by identity.
pub fn overlap(a: &[f64], b: &[f64], basis_a: &CiBasis, basis_b: &CiBasis) -> Result<f64> {
    if !basis_a.same_sector(basis_b) {
        return Err(SquishError::Domain("overlap between different sectors".into()));
    }
    let mut s = 0.0;
    for (det, &ca) in basis_a.dets().iter().zip(a) {
        if let Some(j) = basis_b.position(det) {
            s += ca * b[j];
        }
    }
    Ok(s.abs().min(1.0))
}

/// Write `alpha_hex beta_hex amplitude` lines, skipping exact zeros.
pub fn write_state<W: Write>(mut sink: W, amplitudes: &[f64], basis: &CiBasis) -> Result<()> {
    for (det, &c) in basis.dets().iter().zip(amplitudes) {
        if c != 0.0 {
            writeln!(sink, "{:x} {:x} {:.17e}", det.alpha, det.beta, c)?;
        }
    }
    Ok(())
}

/// Read a state file into amplitudes over `basis`, normalizing on the way.
pub fn read_state<R: BufRead>(reader: R, basis: &CiBasis) -> Result<Vec<f64>> {
    let mut amps = vec![0.0; basis.len()];
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(SquishError::parse(n + 1, "expected `alpha_hex beta_hex amplitude`"));
        }
        let hex = |s: &str| {
            u64::from_str_radix(s.trim_start_matches("0x"), 16)
                .map_err(|e| SquishError::parse(n + 1, format!("bad mask {s:?}: {e}")))
        };
        let det = Determinant::new(hex(fields[0])?, hex(fields[1])?);
        let c: f64 = fields[2]
            .parse()
            .map_err(|e| SquishError::parse(n + 1, format!("bad amplitude: {e}")))?;
        let i = basis.position(&det).ok_or_else(|| {
            SquishError::Domain(format!(
                "line {}: determinant {:x} {:x} is not in the ({}, {}) sector over {} orbitals",
                n + 1,
                det.alpha,
                det.beta,
                basis.electrons().0,
                basis.electrons().1,
                basis.norb()
            ))
        })?;
        amps[i] += c;
    }
    let norm = dot(&amps, &amps).sqrt();
    if norm == 0.0 {
        return Err(SquishError::Domain("state file has zero norm".into()));
    }
    if (norm - 1.0).abs() > 1e-6 {
        log::warn!("state norm {norm:.9} differs from 1; renormalizing");
    }
    amps.iter_mut().for_each(|c| *c /= norm);
    Ok(amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cispace::enumerate_basis;

    fn diag_matrix(d: &[f64]) -> SparseSymMatrix {
        SparseSymMatrix::from_lower(d.len(), d.to_vec(), Vec::new())
    }

    #[test]
    fn diagonal_example() {
        let m = diag_matrix(&[3.0, 1.0, 2.0]);
        let s = lowest_eigenpairs(&m, 2, 1e-10).unwrap();
        assert_eq!(s[0].energy, 1.0);
        assert_eq!(s[1].energy, 2.0);
        assert_eq!(s[0].amplitudes, vec![0.0, 1.0, 0.0]);
        assert_eq!(s[1].amplitudes, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn davidson_on_diagonal() {
        let d: Vec<f64> = (0..40).map(|i| ((i * 7) % 40) as f64).collect();
        let m = diag_matrix(&d);
        let opts = EigenOptions {
            dense_threshold: 0,
            ..EigenOptions::with_tol(1e-10)
        };
        let s = lowest_eigenpairs_with(&m, 3, &opts, None).unwrap();
        let e: Vec<f64> = s.iter().map(|x| x.energy).collect();
        assert_eq!(e, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn bad_requests() {
        let m = diag_matrix(&[1.0, 2.0]);
        assert!(matches!(lowest_eigenpairs(&m, 3, 1e-9), Err(SquishError::Domain(_))));
        assert!(matches!(lowest_eigenpairs(&m, 0, 1e-9), Err(SquishError::Domain(_))));
        assert!(matches!(lowest_eigenpairs(&m, 1, 0.0), Err(SquishError::Domain(_))));
    }

    #[test]
    fn degenerate_pick_follows_guess() {
        let m = diag_matrix(&[1.0, 1.0, 5.0]);
        let s = 0.6_f64;
        let c = 0.8_f64;
        let guess = vec![vec![s, c, 0.0]];
        let out =
            lowest_eigenpairs_with(&m, 1, &EigenOptions::default(), Some(&guess)).unwrap();
        assert!(out[0].degenerate);
        assert!((out[0].amplitudes[0] - s).abs() < 1e-12);
        assert!((out[0].amplitudes[1] - c).abs() < 1e-12);
    }

    #[test]
    fn overlap_and_state_file() {
        let b = enumerate_basis(3, 2, 0).unwrap();
        let mut v = vec![0.0; b.len()];
        v[0] = 0.6;
        v[4] = -0.8;
        assert!((overlap(&v, &v, &b, &b).unwrap() - 1.0).abs() < 1e-15);
        let mut buf = Vec::new();
        write_state(&mut buf, &v, &b).unwrap();
        let back = read_state(&buf[..], &b).unwrap();
        assert_eq!(back, v);

        let other = enumerate_basis(3, 2, 2).unwrap();
        assert!(overlap(&v, &v, &b, &other).is_err());
        assert!(read_state("7 0 1.0\n".as_bytes(), &b).is_err());
    }

    #[test]
    fn read_state_normalizes() {
        let b = enumerate_basis(2, 2, 0).unwrap();
        let v = read_state("1 1 2.0\n2 2 2.0\n".as_bytes(), &b).unwrap();
        let n: f64 = v.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-15);
    }
}
