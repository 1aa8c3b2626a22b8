//! Permutationally invariant states and the local dephasing generator.
//!
//! A permutationally invariant state of N spins is block diagonal in the
//! total spin `j`, and within each block it is `rho_j ⊗ 1_{d_j}` on the
//! `d_j` equivalent copies of the spin-`j` irrep. Only the blocks `rho_j`
//! are stored; block index `a` corresponds to `m = a - j`.

use std::sync::Arc;

use crate::dicke::{spin_algebra, CollectiveBasis, SpinAlgebra, SymmetricDensity, MAX_SPINS};
use crate::protocol::FieldAxis;
use crate::{CMatrix, Error, RMatrix, Result, C64};

/// Number of copies of the spin-`j` irrep in N spin-1/2, with `twice_j = 2j`.
///
/// With `k = N/2 - j` this is the Catalan-triangle entry
/// `C(N, k) (N - 2k + 1) / (N - k + 1)`.
pub fn degeneracy(n_spins: usize, twice_j: usize) -> f64 {
    assert!(twice_j <= n_spins && (n_spins - twice_j) % 2 == 0, "invalid spin sector");
    let k = (n_spins - twice_j) / 2;
    let mut binom = 1.0;
    for i in 0..k {
        binom = binom * (n_spins - i) as f64 / (i + 1) as f64;
    }
    binom * (n_spins - 2 * k + 1) as f64 / (n_spins - k + 1) as f64
}

fn smallest_twice_j(n_spins: usize) -> usize {
    n_spins % 2
}

/// Block-diagonal density matrix over the spin sectors `j_min..=N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PIDensity {
    n_spins: usize,
    /// Blocks in order of increasing `j`.
    blocks: Vec<CMatrix>,
    degeneracies: Vec<f64>,
}

impl PIDensity {
    pub fn zeros(n_spins: usize) -> Result<Self> {
        CollectiveBasis::new(n_spins)?;
        let j0 = smallest_twice_j(n_spins);
        let twice_js: Vec<usize> = (j0..=n_spins).step_by(2).collect();
        Ok(Self {
            n_spins,
            blocks: twice_js.iter().map(|&tj| CMatrix::zeros(tj + 1, tj + 1)).collect(),
            degeneracies: twice_js.iter().map(|&tj| degeneracy(n_spins, tj)).collect(),
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// Values of `2j`, in block order.
    pub fn twice_j_values(&self) -> impl Iterator<Item = usize> + '_ {
        (smallest_twice_j(self.n_spins)..=self.n_spins).step_by(2)
    }

    fn index(&self, twice_j: usize) -> Option<usize> {
        let j0 = smallest_twice_j(self.n_spins);
        (twice_j >= j0 && twice_j <= self.n_spins && (twice_j - j0) % 2 == 0).then(|| (twice_j - j0) / 2)
    }

    pub fn block(&self, twice_j: usize) -> Option<&CMatrix> {
        self.index(twice_j).map(|i| &self.blocks[i])
    }

    pub fn block_mut(&mut self, twice_j: usize) -> Option<&mut CMatrix> {
        self.index(twice_j).map(move |i| &mut self.blocks[i])
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    /// Multiplicity of each block, in block order.
    pub fn degeneracies(&self) -> &[f64] {
        &self.degeneracies
    }

    /// `sum_j (2j+1)`, the dimension of the collective space.
    pub fn collective_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    /// Full-space trace `sum_j d_j Tr rho_j`.
    pub fn trace(&self) -> f64 {
        self.weighted(|b| b.trace().re)
    }

    /// Full-space purity `sum_j d_j Tr rho_j^2`.
    pub fn purity(&self) -> f64 {
        self.weighted(|b| b.iter().zip(b.transpose().iter()).map(|(x, y)| (x * y).re).sum())
    }

    /// Full-space expectation of a collective operator given per block.
    pub fn expect<F: FnMut(usize, &CMatrix) -> f64>(&self, mut per_block: F) -> f64 {
        self.twice_j_values()
            .zip(&self.blocks)
            .zip(&self.degeneracies)
            .map(|((tj, b), d)| d * per_block(tj, b))
            .sum()
    }

    fn weighted<F: Fn(&CMatrix) -> f64>(&self, f: F) -> f64 {
        self.blocks.iter().zip(&self.degeneracies).map(|(b, d)| d * f(b)).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.blocks.iter().map(crate::dicke::hermiticity_error).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(crate::dicke::min_hermitian_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest entrywise difference to another state of the same N.
    pub fn max_abs_diff(&self, other: &PIDensity) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| (a - b).camax())
            .fold(0.0, f64::max)
    }

    pub(crate) fn to_flat(&self) -> Vec<C64> {
        self.blocks.iter().flat_map(|b| b.iter().copied()).collect()
    }

    pub(crate) fn from_flat(template: &PIDensity, flat: &[C64]) -> PIDensity {
        let mut out = template.clone();
        let mut off = 0;
        for b in &mut out.blocks {
            let len = b.len();
            b.copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        out
    }

    /// `sum_j d_j Tr(M_j rho_j)` for `M = parity_x`.
    pub(crate) fn parity_x(&self) -> f64 {
        let n = self.n_spins;
        self.expect(|tj, b| {
            let sign = if ((n - tj) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            sign * (0..=tj).map(|a| b[(tj - a, a)].re).sum::<f64>()
        })
    }
}

/// Places a symmetric state in the `j = N/2` block.
pub fn embed_symmetric(state: &SymmetricDensity) -> PIDensity {
    let n = state.basis().n_spins();
    let mut pi = PIDensity::zeros(n).expect("basis already validated");
    *pi.block_mut(n).expect("top block exists") = state.matrix().clone();
    pi
}

/// The `j = N/2` block as a symmetric state.
pub fn extract_symmetric(state: &PIDensity) -> Result<SymmetricDensity> {
    let n = state.n_spins();
    SymmetricDensity::from_matrix(CollectiveBasis::new(n)?, state.block(n).expect("top block exists").clone())
}

/// Spin-`j` algebra for `2j >= 1`; the `j = 0` block has no generators.
pub(crate) fn block_algebra(twice_j: usize) -> Option<Arc<SpinAlgebra>> {
    (twice_j > 0).then(|| spin_algebra(twice_j))
}

/// `exp(-i angle J_axis)` applied to every block.
pub fn rotate_blocks(state: &PIDensity, axis: FieldAxis, angle: f64) -> PIDensity {
    let mut out = state.clone();
    let tjs: Vec<usize> = state.twice_j_values().collect();
    for (tj, b) in tjs.into_iter().zip(out.blocks.iter_mut()) {
        if let Some(alg) = block_algebra(tj) {
            *b = match axis {
                FieldAxis::Z => alg.z_conjugate(b, angle),
                FieldAxis::Y => alg.y_conjugate(b, angle),
            };
        }
    }
    out
}

/// Generator `L = -i field [J_axis, .] + (gamma/4) (sum_k sz_k . sz_k - N)`
/// on the block representation.
///
/// The sum over local `sz_k . sz_k` keeps `m, m'` and couples block `j` to
/// itself and to `j +- 1`.
pub(crate) struct PiGenerator {
    n_spins: usize,
    twice_js: Vec<usize>,
    offsets: Vec<usize>,
    field: f64,
    axis: FieldAxis,
    algebras: Vec<Option<Arc<SpinAlgebra>>>,
    /// Same-block factor including the `-N` term, per block.
    same: Vec<RMatrix>,
    /// Factor on block `j+1` entries feeding block `j`, shaped like block `j`.
    from_above: Vec<Option<RMatrix>>,
    /// Factor on block `j-1` entries feeding block `j`, shaped like block `j-1`.
    from_below: Vec<Option<RMatrix>>,
}

impl PiGenerator {
    pub fn new(n_spins: usize, axis: FieldAxis, field: f64, gamma: f64) -> Result<Self> {
        if n_spins > MAX_SPINS {
            return Err(Error::DimensionTooLarge {
                n: n_spins,
                limit: MAX_SPINS,
            });
        }
        let template = PIDensity::zeros(n_spins)?;
        let twice_js: Vec<usize> = template.twice_j_values().collect();
        let nf = n_spins as f64;
        let half = nf / 2.0;
        let q = gamma / 4.0;
        let deg = |tj: usize| degeneracy(n_spins, tj);
        let mut offsets = Vec::with_capacity(twice_js.len());
        let mut off = 0;
        for &tj in &twice_js {
            offsets.push(off);
            off += (tj + 1) * (tj + 1);
        }
        let mut same = Vec::new();
        let mut from_above = Vec::new();
        let mut from_below = Vec::new();
        for &tj in &twice_js {
            let j = tj as f64 / 2.0;
            let dim = tj + 1;
            let m = |a: usize| a as f64 - j;
            same.push(RMatrix::from_fn(dim, dim, |a, b| {
                let phi = if tj == 0 {
                    0.0
                } else {
                    2.0 * m(a) * m(b) * (half + 1.0) / (j * (j + 1.0))
                };
                q * (phi - nf)
            }));
            // Source block s = j + 1, entries with |m| <= j.
            from_above.push((tj + 2 <= n_spins).then(|| {
                let s = j + 1.0;
                let ratio = deg(tj + 2) / deg(tj);
                RMatrix::from_fn(dim, dim, |a, b| {
                    let (ma, mb) = (m(a), m(b));
                    2.0 * ((s * s - ma * ma) * (s * s - mb * mb)).sqrt() * (half + s + 1.0) / (s * (2.0 * s + 1.0))
                        * ratio
                        * q
                })
            }));
            // Source block s = j - 1, shaped like that block.
            from_below.push((tj >= 2 && tj - 2 >= smallest_twice_j(n_spins)).then(|| {
                let s = j - 1.0;
                let sdim = tj - 1;
                let ratio = deg(tj - 2) / deg(tj);
                RMatrix::from_fn(sdim, sdim, |a, b| {
                    let (ma, mb) = (a as f64 - s, b as f64 - s);
                    let t = s + 1.0;
                    2.0 * ((t * t - ma * ma) * (t * t - mb * mb)).sqrt() * (half - s) / (t * (2.0 * s + 1.0)) * ratio * q
                })
            }));
        }
        let algebras = twice_js.iter().map(|&tj| block_algebra(tj)).collect();
        Ok(Self {
            n_spins,
            twice_js,
            offsets,
            field,
            axis,
            algebras,
            same,
            from_above,
            from_below,
        })
    }

    pub fn template(&self) -> PIDensity {
        PIDensity::zeros(self.n_spins).expect("validated on construction")
    }

    /// `dy = L y` on the flattened block representation.
    pub fn apply(&self, y: &[C64], dy: &mut [C64]) {
        let mi = C64::new(0.0, -self.field);
        for (bi, &tj) in self.twice_js.iter().enumerate() {
            let dim = tj + 1;
            let off = self.offsets[bi];
            let rho = &y[off..off + dim * dim];
            let out = &mut dy[off..off + dim * dim];
            let same = &self.same[bi];
            for c in 0..dim {
                for r in 0..dim {
                    out[r + dim * c] = rho[r + dim * c] * same[(r, c)];
                }
            }
            if let Some(w) = &self.from_above[bi] {
                let sdim = dim + 2;
                let src = &y[self.offsets[bi + 1]..];
                for c in 0..dim {
                    for r in 0..dim {
                        out[r + dim * c] += src[(r + 1) + sdim * (c + 1)] * w[(r, c)];
                    }
                }
            }
            if let Some(w) = &self.from_below[bi] {
                let sdim = dim - 2;
                let src = &y[self.offsets[bi - 1]..];
                for c in 0..sdim {
                    for r in 0..sdim {
                        out[(r + 1) + dim * (c + 1)] += src[r + sdim * c] * w[(r, c)];
                    }
                }
            }
            if self.field == 0.0 {
                continue;
            }
            let Some(alg) = &self.algebras[bi] else {
                continue;
            };
            match self.axis {
                FieldAxis::Z => {
                    let m = alg.m_values();
                    for c in 0..dim {
                        for r in 0..dim {
                            out[r + dim * c] += mi * (m[r] - m[c]) * rho[r + dim * c];
                        }
                    }
                }
                FieldAxis::Y => {
                    let rho = nalgebra::DMatrixView::from_slice(rho, dim, dim);
                    let h = alg.jy();
                    let comm = h * rho - rho * h;
                    for (o, x) in out.iter_mut().zip(comm.iter()) {
                        *o += mi * x;
                    }
                }
            }
        }
    }

    /// `L rho` as a block state.
    pub fn apply_state(&self, state: &PIDensity) -> PIDensity {
        let y = state.to_flat();
        let mut dy = vec![C64::new(0.0, 0.0); y.len()];
        self.apply(&y, &mut dy);
        PIDensity::from_flat(state, &dy)
    }
}
