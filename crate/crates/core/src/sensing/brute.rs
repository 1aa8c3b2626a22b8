//! Lindblad evolution on the full `2^N` space, used to validate the block solver.
//!
//! Computational basis index bit `k` set means spin `k` is in `|1>`.

use nalgebra::{DVector, SymmetricEigen};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use super::integrate::{integrate, Integrator};
use super::pi::PIDensity;
use crate::protocol::FieldAxis;
use crate::{CMatrix, Error, RMatrix, Result, C64};

/// Largest spin count accepted by the full-space solver.
pub const MAX_BRUTE_FORCE_SPINS: usize = 8;

fn check_size(n_spins: usize) -> Result<()> {
    if n_spins == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    if n_spins > MAX_BRUTE_FORCE_SPINS {
        return Err(Error::DimensionTooLarge {
            n: n_spins,
            limit: MAX_BRUTE_FORCE_SPINS,
        });
    }
    Ok(())
}

fn from_triplets(dim: usize, entries: impl IntoIterator<Item = (usize, usize, C64)>) -> CsrMatrix<C64> {
    let mut coo = CooMatrix::new(dim, dim);
    for (r, c, v) in entries {
        coo.push(r, c, v);
    }
    CsrMatrix::from(&coo)
}

/// Collective operator `sum_k s_k / 2` for a single-spin matrix `s`
/// given as `[[s00, s01], [s10, s11]]`.
fn collective(n_spins: usize, s: [[C64; 2]; 2]) -> CsrMatrix<C64> {
    let dim = 1usize << n_spins;
    let mut entries = Vec::new();
    for x in 0..dim {
        for k in 0..n_spins {
            let bit = (x >> k) & 1;
            for out in 0..2 {
                let v = s[out][bit];
                if v != C64::new(0.0, 0.0) {
                    let y = (x & !(1 << k)) | (out << k);
                    entries.push((y, x, v * 0.5));
                }
            }
        }
    }
    from_triplets(dim, entries)
}

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// `(Jx, Jy, Jz)` on the full space.
pub fn collective_operators_full(n_spins: usize) -> Result<[CsrMatrix<C64>; 3]> {
    check_size(n_spins)?;
    Ok([
        collective(n_spins, [[ZERO, ONE], [ONE, ZERO]]),
        collective(n_spins, [[ZERO, I], [-I, ZERO]]),
        collective(n_spins, [[-ONE, ZERO], [ZERO, ONE]]),
    ])
}

/// `sigma_z` of spin `k`.
pub fn local_sigma_z(n_spins: usize, k: usize) -> Result<CsrMatrix<C64>> {
    check_size(n_spins)?;
    if k >= n_spins {
        return Err(Error::invalid(format!("spin index {k} out of range")));
    }
    let dim = 1usize << n_spins;
    Ok(from_triplets(
        dim,
        (0..dim).map(|x| (x, x, C64::new(if (x >> k) & 1 == 1 { 1.0 } else { -1.0 }, 0.0))),
    ))
}

/// `prod_k sigma_x^(k)`, which flips every bit.
pub fn parity_x_full(n_spins: usize) -> Result<CsrMatrix<C64>> {
    check_size(n_spins)?;
    let dim = 1usize << n_spins;
    Ok(from_triplets(dim, (0..dim).map(|x| (x ^ (dim - 1), x, ONE))))
}

/// Field `J J_axis` with jump operators `sqrt(gamma) sigma_z^(k) / 2`.
pub fn dephasing_model_full(
    n_spins: usize,
    axis: FieldAxis,
    field: f64,
    gamma: f64,
) -> Result<(CsrMatrix<C64>, Vec<CsrMatrix<C64>>)> {
    let [_, jy, jz] = collective_operators_full(n_spins)?;
    let h = match axis {
        FieldAxis::Z => jz,
        FieldAxis::Y => jy,
    } * C64::new(field, 0.0);
    let amp = C64::new(0.5 * gamma.sqrt(), 0.0);
    let jumps = (0..n_spins)
        .map(|k| local_sigma_z(n_spins, k).map(|s| s * amp))
        .collect::<Result<Vec<_>>>()?;
    Ok((h, jumps))
}

fn adjoint(m: &CsrMatrix<C64>) -> CsrMatrix<C64> {
    let mut t = m.transpose();
    for v in t.values_mut() {
        *v = v.conj();
    }
    t
}

/// Integrates `d rho/dt = -i[H, rho] + sum_a (A rho A^dag - {A^dag A, rho}/2)`
/// for Hermitian `rho0` and returns the state at every grid time.
pub fn brute_force_lindblad(
    n_spins: usize,
    hamiltonian: &CsrMatrix<C64>,
    jumps: &[CsrMatrix<C64>],
    rho0: &CMatrix,
    t_grid: &[f64],
    integrator: Integrator,
) -> Result<Vec<CMatrix>> {
    check_size(n_spins)?;
    let dim = 1usize << n_spins;
    let shapes_ok = std::iter::once(hamiltonian)
        .chain(jumps)
        .all(|m| m.nrows() == dim && m.ncols() == dim)
        && rho0.shape() == (dim, dim);
    if !shapes_ok {
        return Err(Error::invalid(format!("operators must be {dim}x{dim}")));
    }
    // H_eff = H - (i/2) sum A^dag A, so the deterministic part is
    // -i H_eff rho + h.c.
    let mut h_eff = hamiltonian.clone();
    for a in jumps {
        let k = &adjoint(a) * a;
        h_eff = &h_eff + &(k * C64::new(0.0, -0.5));
    }
    let rhs = |y: &[C64], dy: &mut [C64]| {
        let rho = nalgebra::DMatrixView::from_slice(y, dim, dim);
        let x = (&h_eff * rho) * C64::new(0.0, -1.0);
        let mut out = &x + x.adjoint();
        for a in jumps {
            let ar = (a * rho).adjoint();
            out += a * ar;
        }
        dy.copy_from_slice(out.as_slice());
    };
    let ys = integrate(rhs, rho0.as_slice().to_vec(), t_grid, integrator, |_| Ok(()))?;
    Ok(ys.into_iter().map(|y| CMatrix::from_column_slice(dim, dim, &y)).collect())
}

fn raise(n_spins: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (x, &a) in v.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for k in 0..n_spins {
            if (x >> k) & 1 == 0 {
                out[x | (1 << k)] += a;
            }
        }
    }
    out
}

fn lower(n_spins: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (x, &a) in v.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for k in 0..n_spins {
            if (x >> k) & 1 == 1 {
                out[x & !(1 << k)] += a;
            }
        }
    }
    out
}

/// Orthonormal states `|j, m, c>` of each irrep copy, indexed
/// `[block][copy][a]` with `m = a - j`, built from highest-weight vectors.
pub fn irrep_basis(n_spins: usize) -> Result<Vec<Vec<Vec<DVector<f64>>>>> {
    check_size(n_spins)?;
    let dim = 1usize << n_spins;
    let template = PIDensity::zeros(n_spins)?;
    let mut out = Vec::new();
    for tj in template.twice_j_values() {
        let weight = (n_spins + tj) / 2;
        let idx: Vec<usize> = (0..dim).filter(|x| x.count_ones() as usize == weight).collect();
        // Gram matrix of J+ restricted to the weight sector; its kernel
        // holds the highest-weight vectors.
        let cols: Vec<Vec<f64>> = idx
            .iter()
            .map(|&x| {
                let mut e = vec![0.0; dim];
                e[x] = 1.0;
                raise(n_spins, &e)
            })
            .collect();
        let gram = RMatrix::from_fn(idx.len(), idx.len(), |a, b| cols[a].iter().zip(&cols[b]).map(|(p, q)| p * q).sum());
        let eig = SymmetricEigen::new(gram);
        let mut copies = Vec::new();
        for (k, &ev) in eig.eigenvalues.iter().enumerate() {
            if ev.abs() > 1e-8 {
                continue;
            }
            let mut v = vec![0.0; dim];
            for (a, &x) in idx.iter().enumerate() {
                v[x] = eig.eigenvectors[(a, k)];
            }
            let mut ladder = vec![DVector::from_vec(v.clone())];
            for _ in 0..tj {
                v = lower(n_spins, &v);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= norm);
                ladder.push(DVector::from_vec(v.clone()));
            }
            // Stored from m = -j upward.
            ladder.reverse();
            copies.push(ladder);
        }
        out.push(copies);
    }
    Ok(out)
}

/// Full-space matrix `sum_j rho_j ⊗ 1_{d_j}` of a block state.
pub fn pi_to_full(state: &PIDensity) -> Result<CMatrix> {
    let n = state.n_spins();
    let basis = irrep_basis(n)?;
    let dim = 1usize << n;
    let mut out = CMatrix::zeros(dim, dim);
    for (block, copies) in state.blocks().iter().zip(&basis) {
        for copy in copies {
            let vecs = CMatrix::from_fn(dim, copy.len(), |r, a| C64::new(copy[a][r], 0.0));
            out += &vecs * block * vecs.transpose();
        }
    }
    Ok(out)
}

/// `||a - b||_1 / 2` for Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = a - b;
    let h = (&d + d.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.iter().map(|x| x.abs()).sum::<f64>() / 2.0
}
