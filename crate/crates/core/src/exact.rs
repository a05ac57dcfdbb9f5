//! Matrix-free exact diagonalization of the TFI chain.
//!
//! The ground state is found with Lanczos (full reorthogonalization,
//! explicit restart from the current Ritz vector) starting from the uniform
//! vector, so results are reproducible bit for bit. At `Gamma = 0` the
//! ground level is doubly degenerate and any normalized vector in that
//! subspace is a valid answer.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SpinConfig, TfiModel};
use crate::trial::{check_table_size, AmplitudeTable};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 500;

/// Krylov basis size per restart cycle.
const MAX_BASIS: usize = 80;

const ROW_CHUNK: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateResult {
    pub energy: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// `out = H v`, row by row.
pub fn apply_hamiltonian_into(model: &TfiModel, v: &[f64], out: &mut [f64]) {
    assert_eq!(v.len(), model.dim(), "vector length must be 2^L");
    assert_eq!(out.len(), v.len());
    let flip = model.flip_element();
    let sites = model.sites();
    out.par_chunks_mut(ROW_CHUNK)
        .enumerate()
        .for_each(|(chunk, rows)| {
            let base = chunk * ROW_CHUNK;
            for (offset, slot) in rows.iter_mut().enumerate() {
                let x = (base + offset) as u64;
                let mut acc = model.diagonal_energy(SpinConfig(x)) * v[x as usize];
                let mut off = 0.0;
                for k in 0..sites {
                    off += v[(x ^ (1u64 << k)) as usize];
                }
                acc += flip * off;
                *slot = acc;
            }
        });
}

pub fn apply_hamiltonian(model: &TfiModel, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    apply_hamiltonian_into(model, v, &mut out);
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Lowest eigenpair with default iteration cap.
pub fn ground_state(model: &TfiModel, tol: f64) -> Result<GroundStateResult> {
    ground_state_with(model, tol, DEFAULT_MAX_ITER)
}

pub fn ground_state_with(model: &TfiModel, tol: f64, max_iter: usize) -> Result<GroundStateResult> {
    check_table_size(model.sites())?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be > 0")));
    }
    let dim = model.dim();
    let mut start = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut iterations = 0;
    let mut hv = vec![0.0; dim];
    let mut last_residual = f64::INFINITY;

    while iterations < max_iter {
        let budget = MAX_BASIS.min(max_iter - iterations);
        let (energy, ritz, used) = lanczos_cycle(model, &start, budget, tol)?;
        iterations += used;

        apply_hamiltonian_into(model, &ritz, &mut hv);
        let residual = hv
            .iter()
            .zip(&ritz)
            .map(|(h, r)| (h - energy * r).powi(2))
            .sum::<f64>()
            .sqrt();
        last_residual = residual;
        if residual <= tol {
            return finish(energy, ritz, residual, iterations);
        }
        start = ritz;
    }
    Err(Error::NotConverged {
        iterations,
        residual: last_residual,
        tol,
    })
}

fn finish(energy: f64, mut vector: Vec<f64>, residual: f64, iterations: usize) -> Result<GroundStateResult> {
    let sum: f64 = vector.iter().sum();
    if sum < 0.0 {
        vector.iter_mut().for_each(|v| *v = -*v);
    }
    let n = norm(&vector);
    vector.iter_mut().for_each(|v| *v /= n);
    let scale = vector.iter().copied().fold(0.0, f64::max);
    // Perron-Frobenius: entries are positive up to rounding
    for v in vector.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-12 * scale {
                return Err(Error::InvalidTable(format!(
                    "ground-state vector has a negative entry {v:e} after sign fix"
                )));
            }
            *v = 0.0;
        }
    }
    Ok(GroundStateResult {
        energy,
        vector,
        residual,
        iterations,
    })
}

/// One Lanczos cycle from `start`. Returns the lowest Ritz pair and the
/// number of matrix-vector products spent.
fn lanczos_cycle(
    model: &TfiModel,
    start: &[f64],
    budget: usize,
    tol: f64,
) -> Result<(f64, Vec<f64>, usize)> {
    let dim = start.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(budget);
    let mut alphas: Vec<f64> = Vec::with_capacity(budget);
    let mut betas: Vec<f64> = Vec::with_capacity(budget);

    let n0 = norm(start);
    basis.push(start.iter().map(|v| v / n0).collect());
    let mut w = vec![0.0; dim];

    for j in 0..budget {
        apply_hamiltonian_into(model, &basis[j], &mut w);
        let alpha = dot(&w, &basis[j]);
        alphas.push(alpha);
        // full reorthogonalization, two passes
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                axpy(-c, q, &mut w);
            }
        }
        let beta = norm(&w);

        let (theta, coeffs) = lowest_ritz(&alphas, &betas);
        let estimate = (beta * coeffs[j]).abs();
        let steps = j + 1;
        if estimate <= 0.1 * tol || beta <= 1e-14 * alpha.abs().max(1.0) || steps == budget {
            let mut ritz = vec![0.0; dim];
            for (c, q) in coeffs.iter().zip(&basis) {
                axpy(*c, q, &mut ritz);
            }
            return Ok((theta, ritz, steps));
        }
        betas.push(beta);
        basis.push(w.iter().map(|v| v / beta).collect());
    }
    unreachable!("budget is at least one iteration")
}

fn lowest_ritz(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let k = alphas.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (idx, theta) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty tridiagonal matrix");
    (theta, eig.eigenvectors.column(idx).iter().copied().collect())
}

/// `<psi|H|psi>` for a normalized table.
pub fn variational_energy(table: &AmplitudeTable, model: &TfiModel) -> Result<f64> {
    table.matches(model)?;
    let hv = apply_hamiltonian(model, table.amps());
    Ok(dot(table.amps(), &hv))
}
