//! Collective spin algebra on the symmetric (Dicke) subspace of N spin-1/2.
//!
//! Basis index `n` counts spins in `|1>`; the `Jz` eigenvalue of `|D_n>` is
//! `n - N/2`. All operators are dense `(N+1) x (N+1)` matrices.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DVector, SymmetricEigen};

use crate::{CMatrix, Error, RMatrix, Result, C64};

/// Largest supported spin count.
pub const MAX_SPINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CollectiveBasis {
    n_spins: usize,
}

impl CollectiveBasis {
    pub fn new(n_spins: usize) -> Result<Self> {
        if n_spins == 0 {
            return Err(Error::invalid("N must be at least 1"));
        }
        if n_spins > MAX_SPINS {
            return Err(Error::DimensionTooLarge {
                n: n_spins,
                limit: MAX_SPINS,
            });
        }
        Ok(Self { n_spins })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.n_spins + 1
    }

    /// Total spin J = N/2.
    pub fn total_spin(&self) -> f64 {
        self.n_spins as f64 / 2.0
    }

    /// `Jz` eigenvalue of `|D_n>`.
    pub fn m(&self, n: usize) -> f64 {
        n as f64 - self.total_spin()
    }

    pub fn algebra(&self) -> Arc<SpinAlgebra> {
        spin_algebra(self.n_spins)
    }

    pub(crate) fn check(&self, other: &CollectiveBasis) -> Result<()> {
        if self.n_spins != other.n_spins {
            return Err(Error::BasisMismatch {
                expected: self.n_spins,
                found: other.n_spins,
            });
        }
        Ok(())
    }
}

/// Spin state restricted to the symmetric subspace.
///
/// The trace is allowed to be below one: the lossy gate channel removes
/// population instead of redistributing it.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricDensity {
    basis: CollectiveBasis,
    mat: CMatrix,
}

impl SymmetricDensity {
    pub fn from_matrix(basis: CollectiveBasis, mat: CMatrix) -> Result<Self> {
        if mat.nrows() != basis.dim() || mat.ncols() != basis.dim() {
            return Err(Error::invalid(format!(
                "density matrix is {}x{}, expected {}x{}",
                mat.nrows(),
                mat.ncols(),
                basis.dim(),
                basis.dim()
            )));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("non-finite density matrix entry".into()));
        }
        Ok(Self { basis, mat })
    }

    pub(crate) fn from_matrix_unchecked(basis: CollectiveBasis, mat: CMatrix) -> Self {
        Self { basis, mat }
    }

    /// `|D_n><D_n|`.
    pub fn dicke(basis: CollectiveBasis, n: usize) -> Result<Self> {
        if n > basis.n_spins() {
            return Err(Error::invalid(format!("Dicke index {n} exceeds N")));
        }
        let mut mat = CMatrix::zeros(basis.dim(), basis.dim());
        mat[(n, n)] = C64::new(1.0, 0.0);
        Ok(Self { basis, mat })
    }

    /// Pure state from amplitudes; normalized on input.
    pub fn pure(basis: CollectiveBasis, amps: &[C64]) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::invalid("amplitude vector has wrong length"));
        }
        let v = DVector::from_column_slice(amps);
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::invalid("amplitude vector has zero or non-finite norm"));
        }
        let v = v / C64::new(norm, 0.0);
        Ok(Self {
            basis,
            mat: &v * v.adjoint(),
        })
    }

    /// `(|D_0> + |D_N>)/sqrt 2`.
    pub fn ghz(basis: CollectiveBasis) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
        amps[0] = C64::new(1.0, 0.0);
        amps[basis.n_spins()] = C64::new(1.0, 0.0);
        Self::pure(basis, &amps).expect("valid GHZ amplitudes")
    }

    /// Identity over the symmetric subspace divided by N+1.
    pub fn maximally_mixed(basis: CollectiveBasis) -> Self {
        let d = basis.dim();
        let mat = CMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0);
        Self { basis, mat }
    }

    pub fn basis(&self) -> CollectiveBasis {
        self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn purity(&self) -> f64 {
        // Tr(rho^2) = sum |rho_nm|^2 for Hermitian rho.
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn renormalized(&self) -> Result<Self> {
        let t = self.trace();
        if t <= 0.0 || !t.is_finite() {
            return Err(Error::Numerical(format!("cannot renormalize state of trace {t}")));
        }
        Ok(Self {
            basis: self.basis,
            mat: &self.mat / C64::new(t, 0.0),
        })
    }

    /// Real expectation value `Tr(O rho)`.
    pub fn expect(&self, op: &CMatrix) -> f64 {
        trace_product(op, &self.mat).re
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.mat)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.mat)
    }

    /// Checks Hermiticity, positivity and trace bounds.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::Numerical(format!("state not Hermitian (error {herm:e})")));
        }
        let min_ev = self.min_eigenvalue();
        if min_ev < -1e-10 {
            return Err(Error::Numerical(format!("state not positive (eigenvalue {min_ev:e})")));
        }
        let t = self.trace();
        if !(t > 0.0 && t <= 1.0 + 1e-12) {
            return Err(Error::Numerical(format!("state trace {t} outside (0, 1]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveOperator {
    pub basis: CollectiveBasis,
    pub mat: CMatrix,
    pub hermitian: bool,
}

impl CollectiveOperator {
    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }
}

/// Cached operator set and rotation data for one value of N.
#[derive(Debug)]
pub struct SpinAlgebra {
    basis: CollectiveBasis,
    m: Vec<f64>,
    jx: CMatrix,
    jy: CMatrix,
    jz: CMatrix,
    jx_real: RMatrix,
    // Jx = V diag(lambda) V^T with lambda the exact spectrum -J..J.
    jx_vecs: RMatrix,
    jx_vals: Vec<f64>,
}

static ALGEBRA_CACHE: OnceLock<Mutex<HashMap<usize, Arc<SpinAlgebra>>>> = OnceLock::new();

/// Shared, read-only algebra for N spins. Built once per N.
pub fn spin_algebra(n_spins: usize) -> Arc<SpinAlgebra> {
    let cache = ALGEBRA_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(a) = cache.lock().expect("algebra cache poisoned").get(&n_spins) {
        return a.clone();
    }
    let built = Arc::new(SpinAlgebra::build(n_spins));
    cache
        .lock()
        .expect("algebra cache poisoned")
        .entry(n_spins)
        .or_insert(built)
        .clone()
}

impl SpinAlgebra {
    fn build(n_spins: usize) -> Self {
        let basis = CollectiveBasis { n_spins };
        let d = basis.dim();
        let j = basis.total_spin();
        let m: Vec<f64> = (0..d).map(|n| basis.m(n)).collect();

        // J+ |m> = sqrt(J(J+1) - m(m+1)) |m+1>
        let mut jp = RMatrix::zeros(d, d);
        for n in 0..n_spins {
            jp[(n + 1, n)] = (j * (j + 1.0) - m[n] * (m[n] + 1.0)).max(0.0).sqrt();
        }
        let jx_real = (&jp + jp.transpose()) * 0.5;
        let jx = jx_real.map(|x| C64::new(x, 0.0));
        let jy_half = (&jp - jp.transpose()) * 0.5;
        // (J+ - J-)/(2i) = -i (J+ - J-)/2
        let jy = jy_half.map(|x| C64::new(0.0, -x));
        let jz = CMatrix::from_diagonal(&DVector::from_iterator(
            d,
            m.iter().map(|&x| C64::new(x, 0.0)),
        ));

        let eig = SymmetricEigen::new(jx_real.clone());
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut jx_vecs = RMatrix::zeros(d, d);
        for (k, &src) in order.iter().enumerate() {
            jx_vecs.set_column(k, &eig.eigenvectors.column(src));
        }
        // The spectrum of Jx is exactly {-J, ..., J}.
        let jx_vals = m.clone();

        Self {
            basis,
            m,
            jx,
            jy,
            jz,
            jx_real,
            jx_vecs,
            jx_vals,
        }
    }

    pub fn basis(&self) -> CollectiveBasis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `Jz` eigenvalues indexed by Dicke index.
    pub fn m_values(&self) -> &[f64] {
        &self.m
    }

    pub fn jx(&self) -> &CMatrix {
        &self.jx
    }

    pub fn jy(&self) -> &CMatrix {
        &self.jy
    }

    pub fn jz(&self) -> &CMatrix {
        &self.jz
    }

    pub fn jx_real(&self) -> &RMatrix {
        &self.jx_real
    }

    /// Wigner small-d matrix `d(beta) = exp(-i beta Jy)`, which is real.
    pub fn wigner_d(&self, beta: f64) -> RMatrix {
        // exp(-i b Jy) = Uz exp(-i b Jx) Uz^dag with Uz = diag(exp(-i pi/2 m)).
        let d = self.dim();
        let v = &self.jx_vecs;
        let mut vc = v.clone();
        let mut vs = v.clone();
        for k in 0..d {
            let (s, c) = (beta * self.jx_vals[k]).sin_cos();
            vc.column_mut(k).scale_mut(c);
            vs.column_mut(k).scale_mut(s);
        }
        let cm = &vc * v.transpose();
        let sm = &vs * v.transpose();
        RMatrix::from_fn(d, d, |n, m| {
            // (-i)^(n-m) (C - iS), real part.
            match (n as i64 - m as i64).rem_euclid(4) {
                0 => cm[(n, m)],
                1 => -sm[(n, m)],
                2 => -cm[(n, m)],
                _ => sm[(n, m)],
            }
        })
    }

    /// `U = exp(-i a Jz) exp(-i b Jy) exp(-i c Jz)`.
    pub fn rotation(&self, a: f64, b: f64, c: f64) -> CMatrix {
        let dm = self.wigner_d(b);
        let d = self.dim();
        CMatrix::from_fn(d, d, |n, k| {
            C64::from_polar(dm[(n, k)], -a * self.m[n] - c * self.m[k])
        })
    }

    /// `exp(-i a Jz) X exp(i a Jz)`, elementwise on the Dicke basis.
    pub fn z_conjugate(&self, x: &CMatrix, a: f64) -> CMatrix {
        let d = self.dim();
        CMatrix::from_fn(d, d, |n, k| {
            x[(n, k)] * C64::from_polar(1.0, -a * (self.m[n] - self.m[k]))
        })
    }

    /// `U X U^dag` for the Euler triple `(a, b, c)`.
    pub fn rotate(&self, x: &CMatrix, a: f64, b: f64, c: f64) -> CMatrix {
        let y = self.z_conjugate(x, c);
        let y = self.y_conjugate(&y, b);
        self.z_conjugate(&y, a)
    }

    /// `U^dag X U` for the Euler triple `(a, b, c)`.
    pub fn rotate_adjoint(&self, x: &CMatrix, a: f64, b: f64, c: f64) -> CMatrix {
        self.rotate(x, -c, -b, -a)
    }

    /// `d(b) X d(b)^T` with the real small-d matrix.
    pub fn y_conjugate(&self, x: &CMatrix, b: f64) -> CMatrix {
        if b == 0.0 {
            return x.clone();
        }
        let dm = self.wigner_d(b);
        conjugate_real(&dm, x)
    }
}

/// `R X R^T` for real `R` and complex `X`.
pub(crate) fn conjugate_real(r: &RMatrix, x: &CMatrix) -> CMatrix {
    let xr = x.map(|z| z.re);
    let xi = x.map(|z| z.im);
    let rt = r.transpose();
    let yr = r * xr * &rt;
    let yi = r * xi * &rt;
    CMatrix::from_fn(x.nrows(), x.ncols(), |i, j| C64::new(yr[(i, j)], yi[(i, j)]))
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let mut err: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..=i {
            err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    err
}

pub fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Returns `(Jx, Jy, Jz, J^2)`.
pub fn build_collective_operators(
    basis: CollectiveBasis,
) -> (
    CollectiveOperator,
    CollectiveOperator,
    CollectiveOperator,
    CollectiveOperator,
) {
    let alg = basis.algebra();
    let j2 = alg.jx() * alg.jx() + alg.jy() * alg.jy() + alg.jz() * alg.jz();
    let wrap = |mat: CMatrix| CollectiveOperator {
        basis,
        mat,
        hermitian: true,
    };
    (
        wrap(alg.jx().clone()),
        wrap(alg.jy().clone()),
        wrap(alg.jz().clone()),
        wrap(j2),
    )
}

pub fn euler_rotation(basis: CollectiveBasis, a: f64, b: f64, c: f64) -> CollectiveOperator {
    CollectiveOperator {
        basis,
        mat: basis.algebra().rotation(a, b, c),
        hermitian: false,
    }
}

/// `P = exp(i pi (Jx - N/2))`, the product of all single-spin `sigma_x`.
/// On the symmetric subspace it maps `|D_n>` to `|D_{N-n}>`.
pub fn parity_x(basis: CollectiveBasis) -> CollectiveOperator {
    let d = basis.dim();
    let n = basis.n_spins();
    let mat = CMatrix::from_fn(d, d, |i, j| {
        if i + j == n {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    CollectiveOperator {
        basis,
        mat,
        hermitian: true,
    }
}

/// Spin coherent state `exp(-i phi Jz) exp(-i theta Jy) |D_N>`.
pub fn coherent_state(basis: CollectiveBasis, theta: f64, phi: f64) -> DVector<C64> {
    let n_spins = basis.n_spins();
    let (s, c) = (theta / 2.0).sin_cos();
    let mut binom = 1.0_f64;
    DVector::from_iterator(
        basis.dim(),
        (0..=n_spins).map(|n| {
            if n > 0 {
                binom *= (n_spins + 1 - n) as f64 / n as f64;
            }
            let amp = binom.sqrt() * c.powi(n as i32) * s.powi((n_spins - n) as i32);
            C64::from_polar(amp, -phi * basis.m(n))
        }),
    )
}

/// Husimi function `Q(theta, phi) = <theta, phi| rho |theta, phi>`.
pub fn husimi_q(state: &SymmetricDensity, theta: f64, phi: f64) -> f64 {
    let v = coherent_state(state.basis(), theta, phi);
    let rv = state.matrix() * &v;
    v.dotc(&rv).re
}
