use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::params::{Observable, SensingTask};
use crate::dicke::{spin_algebra, trace_product, SymmetricDensity};
use crate::{CMatrix, Result, C64};

/// Variance reported when the signal slope vanishes or the variance blows up.
pub const DIVERGENT_VARIANCE: f64 = 1e6;

/// Slope magnitude below which the estimator is treated as divergent.
pub const MIN_SLOPE: f64 = 1e-14;

/// Estimation variance of a fixed probe at rotation angle `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeCost {
    /// `(Delta beta)^2`, or [`DIVERGENT_VARIANCE`] when `divergent`.
    pub variance: f64,
    /// `d (Delta beta)^2 / d beta`; zero when divergent.
    pub d_beta: f64,
    /// `<M(beta)>` of the (possibly unnormalized) probe.
    pub signal: f64,
    /// `d <M(beta)> / d beta`.
    pub slope: f64,
    pub trace: f64,
    pub divergent: bool,
}

impl ProbeCost {
    fn divergent(signal: f64, slope: f64, trace: f64) -> Self {
        Self {
            variance: DIVERGENT_VARIANCE,
            d_beta: 0.0,
            signal,
            slope,
            trace,
            divergent: true,
        }
    }
}

/// Static operators whose expectations determine `<Jz^2(beta)>`,
/// `<Jz^4(beta)>` and the slope under a `y` rotation:
/// `Jz^2, Jx^2, {Jz,Jx}, Jz^4, Jx^4, {Jz,Jx}^2 + {Jz^2,Jx^2}, {Jz^2,{Jz,Jx}}, {Jx^2,{Jz,Jx}}`.
pub(crate) struct Jz2Operators {
    pub ops: [CMatrix; 8],
}

static JZ2_CACHE: OnceLock<Mutex<HashMap<usize, Arc<Jz2Operators>>>> = OnceLock::new();

pub(crate) fn jz2_operators(n_spins: usize) -> Arc<Jz2Operators> {
    let cache = JZ2_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(a) = cache.lock().expect("operator cache poisoned").get(&n_spins) {
        return a.clone();
    }
    let alg = spin_algebra(n_spins);
    let z = alg.jz();
    let x = alg.jx();
    let z2 = z * z;
    let x2 = x * x;
    let zx = z * x + x * z;
    let ops = [
        z2.clone(),
        x2.clone(),
        zx.clone(),
        &z2 * &z2,
        &x2 * &x2,
        &zx * &zx + &z2 * &x2 + &x2 * &z2,
        &z2 * &zx + &zx * &z2,
        &x2 * &zx + &zx * &x2,
    ];
    let built = Arc::new(Jz2Operators { ops });
    cache
        .lock()
        .expect("operator cache poisoned")
        .entry(n_spins)
        .or_insert(built)
        .clone()
}

/// Static moments `Tr(O_k rho)` of the operators in [`Jz2Operators`].
pub fn jz2_static_moments(probe: &SymmetricDensity) -> [f64; 8] {
    let ops = jz2_operators(probe.basis().n_spins());
    let mut mu = [0.0; 8];
    for (k, op) in ops.ops.iter().enumerate() {
        mu[k] = trace_product(op, probe.matrix()).re;
    }
    mu
}

// Heisenberg picture under exp(-i b Jy): Jz -> cos b Jz - sin b Jx.
const Y_SIGN: f64 = -1.0;

/// Coefficient rows expressing `(e2, e4, slope)` in the static moments.
fn jz2_weights(beta: f64) -> [[f64; 8]; 3] {
    let (s, c) = beta.sin_cos();
    let sg = Y_SIGN;
    [
        [c * c, s * s, sg * s * c, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, c.powi(4), s.powi(4), c * c * s * s, sg * c.powi(3) * s, sg * c * s.powi(3)],
        [-2.0 * s * c, 2.0 * s * c, sg * (c * c - s * s), 0.0, 0.0, 0.0, 0.0, 0.0],
    ]
}

fn dot(w: &[f64; 8], mu: &[f64; 8]) -> f64 {
    w.iter().zip(mu).map(|(a, b)| a * b).sum()
}

/// `(<Jz^2>, <Jz^4>, d<Jz^2>/d beta)` of `exp(-i beta Jy) rho exp(i beta Jy)`
/// from the static moments.
pub fn jz2_moments_at(mu: &[f64; 8], beta: f64) -> (f64, f64, f64) {
    let w = jz2_weights(beta);
    (dot(&w[0], mu), dot(&w[1], mu), dot(&w[2], mu))
}

/// Derivatives in `beta` of `<Jz^4(beta)>` and of the slope.
fn jz2_beta_derivatives(mu: &[f64; 8], beta: f64) -> (f64, f64) {
    let (s, c) = beta.sin_cos();
    let sg = Y_SIGN;
    let d4 = -4.0 * mu[3] * c.powi(3) * s
        + 4.0 * mu[4] * s.powi(3) * c
        + mu[5] * 2.0 * c * s * (c * c - s * s)
        + sg * mu[6] * (c.powi(4) - 3.0 * c * c * s * s)
        + sg * mu[7] * (3.0 * c * c * s * s - s.powi(4));
    let dslope = 2.0 * (mu[1] - mu[0]) * (c * c - s * s) - 4.0 * sg * mu[2] * s * c;
    (d4, dslope)
}

/// Case I: parity measurement after a `z` rotation by `beta`.
pub fn variance_parity(probe: &SymmetricDensity, beta: f64, normalize: bool) -> ProbeCost {
    parity_cost(probe, beta, normalize, false).0
}

/// Case II: `Jz^2` measurement after a `y` rotation by `beta`.
pub fn variance_jz2(probe: &SymmetricDensity, beta: f64, normalize: bool) -> ProbeCost {
    jz2_cost(probe, beta, normalize, false).0
}

pub fn probe_cost(probe: &SymmetricDensity, beta: f64, task: &SensingTask) -> Result<ProbeCost> {
    task.validate()?;
    Ok(probe_cost_with_sensitivity(probe, beta, task, false).0)
}

/// Cost and, when requested, the sensitivity `G` with
/// `d variance = Re Tr(G d rho)` for variations of the unrotated probe.
pub(crate) fn probe_cost_with_sensitivity(
    probe: &SymmetricDensity,
    beta: f64,
    task: &SensingTask,
    with_sensitivity: bool,
) -> (ProbeCost, Option<CMatrix>) {
    let normalize = task.normalize_before_measure;
    match task.observable {
        Observable::ParityX => parity_cost(probe, beta, normalize, with_sensitivity),
        Observable::JzSquared => jz2_cost(probe, beta, normalize, with_sensitivity),
    }
}

/// Fractional size below which the variance numerator is rounding noise.
const NUMERATOR_FLOOR: f64 = 1e-12;

// The numerator `<M^2> - <M>^2` is non-negative; when it is lost to
// cancellation the ratio is undefined and reported as divergent.
pub(crate) fn is_divergent(slope: f64, num: f64, num_scale: f64, variance: f64) -> bool {
    !(slope.abs() >= MIN_SLOPE)
        || !(num > NUMERATOR_FLOOR * num_scale)
        || !variance.is_finite()
        || variance > DIVERGENT_VARIANCE
}

fn parity_cost(
    probe: &SymmetricDensity,
    beta: f64,
    normalize: bool,
    with_sensitivity: bool,
) -> (ProbeCost, Option<CMatrix>) {
    let basis = probe.basis();
    let n = basis.n_spins();
    let rho = probe.matrix();
    let trace = probe.trace();
    // P_x couples |D_k> and |D_{N-k}>; in the Heisenberg picture of the z
    // rotation the element (k, N-k) picks up exp(i beta (m_k - m_{N-k})).
    let mut signal = 0.0;
    let mut slope = 0.0;
    let mut curvature = 0.0;
    for k in 0..=n {
        let dm = 2.0 * basis.m(k);
        let w = C64::from_polar(1.0, beta * dm) * rho[(n - k, k)];
        signal += w.re;
        slope += (C64::new(0.0, dm) * w).re;
        curvature -= dm * dm * w.re;
    }
    let tau = if normalize { trace } else { 1.0 };
    let num = tau * trace - signal * signal;
    let variance = num / (slope * slope);
    if is_divergent(slope, num, tau * trace, variance) {
        return (ProbeCost::divergent(signal, slope, trace), None);
    }
    let dv_dp = -2.0 * signal / (slope * slope);
    let dv_dd = -2.0 * variance / slope;
    let dv_dt = if normalize { 2.0 * trace } else { 1.0 } / (slope * slope);
    let cost = ProbeCost {
        variance,
        d_beta: dv_dp * slope + dv_dd * curvature,
        signal,
        slope,
        trace,
        divergent: false,
    };
    let sens = with_sensitivity.then(|| {
        let d = basis.dim();
        let mut g = CMatrix::from_diagonal_element(d, d, C64::new(dv_dt, 0.0));
        for k in 0..=n {
            let dm = 2.0 * basis.m(k);
            let phase = C64::from_polar(1.0, beta * dm);
            // Tr(G rho) picks G[(k, N-k)] rho[(N-k, k)].
            g[(k, n - k)] += phase * C64::new(dv_dp, dv_dd * dm);
        }
        g
    });
    (cost, sens)
}

fn jz2_cost(
    probe: &SymmetricDensity,
    beta: f64,
    normalize: bool,
    with_sensitivity: bool,
) -> (ProbeCost, Option<CMatrix>) {
    let mu = jz2_static_moments(probe);
    let trace = probe.trace();
    let (e2, e4, slope) = jz2_moments_at(&mu, beta);
    let tau = if normalize { trace } else { 1.0 };
    let num = tau * e4 - e2 * e2;
    let variance = num / (slope * slope);
    if is_divergent(slope, num, tau * e4, variance) {
        return (ProbeCost::divergent(e2, slope, trace), None);
    }
    let dv_de2 = -2.0 * e2 / (slope * slope);
    let dv_de4 = tau / (slope * slope);
    let dv_dd = -2.0 * variance / slope;
    let dv_dt = if normalize { e4 / (slope * slope) } else { 0.0 };
    let (d4, dslope) = jz2_beta_derivatives(&mu, beta);
    let cost = ProbeCost {
        variance,
        d_beta: dv_de2 * slope + dv_de4 * d4 + dv_dd * dslope,
        signal: e2,
        slope,
        trace,
        divergent: false,
    };
    let sens = with_sensitivity.then(|| {
        let w = jz2_weights(beta);
        let ops = jz2_operators(probe.basis().n_spins());
        let d = probe.basis().dim();
        let mut g = CMatrix::from_diagonal_element(d, d, C64::new(dv_dt, 0.0));
        for k in 0..8 {
            let coef = dv_de2 * w[0][k] + dv_de4 * w[1][k] + dv_dd * w[2][k];
            if coef != 0.0 {
                g += &ops.ops[k] * C64::new(coef, 0.0);
            }
        }
        g
    });
    (cost, sens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::CollectiveBasis;
    use std::f64::consts::PI;

    fn basis(n: usize) -> CollectiveBasis {
        CollectiveBasis::new(n).unwrap()
    }

    fn random_probe(n: usize, seed: u64) -> SymmetricDensity {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = n + 1;
        let a = CMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let rho = &a * a.adjoint();
        let tr = rho.trace().re;
        // Scale below one to mimic a lossy channel.
        SymmetricDensity::from_matrix(basis(n), rho * C64::new(0.8 / tr, 0.0)).unwrap()
    }

    #[test]
    fn rotated_ghz_reaches_heisenberg_limit() {
        let n = 10;
        let ghz = SymmetricDensity::ghz(basis(n));
        let alg = spin_algebra(n);
        let rotated = SymmetricDensity::from_matrix(basis(n), alg.z_conjugate(ghz.matrix(), PI / (2.0 * n as f64))).unwrap();
        let c = variance_parity(&rotated, 0.0, false);
        assert!((c.variance - 0.01).abs() < 1e-12);
        assert!(c.signal.abs() < 1e-12);
    }

    #[test]
    fn ground_state_is_divergent() {
        for beta in [0.0, 0.3] {
            let c = variance_parity(&SymmetricDensity::dicke(basis(6), 0).unwrap(), beta, false);
            assert!(c.divergent);
            assert_eq!(c.variance, DIVERGENT_VARIANCE);
            assert_eq!(c.d_beta, 0.0);
        }
    }

    #[test]
    fn half_dicke_limit() {
        let n = 10;
        let probe = SymmetricDensity::dicke(basis(n), n / 2).unwrap();
        let mu = jz2_static_moments(&probe);
        assert!(mu[0].abs() < 1e-14 && mu[2].abs() < 1e-14 && mu[3].abs() < 1e-14);
        // The slope vanishes at beta = 0 exactly; the limit is approached.
        let c = variance_jz2(&probe, 1e-4, false);
        assert!((c.variance - 1.0 / 60.0).abs() < 1e-6, "{}", c.variance);
    }

    #[test]
    fn jz2_moments_match_direct_rotation() {
        for (n, seed) in [(4, 1), (9, 2), (16, 3)] {
            let probe = random_probe(n, seed);
            let alg = spin_algebra(n);
            let mu = jz2_static_moments(&probe);
            for beta in [-2.1, -0.4, 0.0, 0.37, 1.3, 2.9] {
                let rot = alg.rotate(probe.matrix(), 0.0, beta, 0.0);
                let z2 = alg.jz() * alg.jz();
                let direct2 = trace_product(&z2, &rot).re;
                let direct4 = trace_product(&(&z2 * &z2), &rot).re;
                let (e2, e4, _) = jz2_moments_at(&mu, beta);
                assert!((e2 - direct2).abs() < 1e-10);
                assert!((e4 - direct4).abs() < 1e-10 * direct4.abs().max(1.0));
            }
        }
    }

    #[test]
    fn beta_derivatives_match_differences() {
        let h = 1e-5;
        for normalize in [false, true] {
            let probe = random_probe(7, 11);
            for beta in [-0.9, 0.2, 1.4] {
                for cost in [variance_parity, variance_jz2] {
                    let c = cost(&probe, beta, normalize);
                    let fd = (cost(&probe, beta + h, normalize).variance - cost(&probe, beta - h, normalize).variance) / (2.0 * h);
                    assert!((c.d_beta - fd).abs() < 1e-6 * fd.abs().max(1.0), "{} vs {}", c.d_beta, fd);
                    let slope_fd = (cost(&probe, beta + h, normalize).signal - cost(&probe, beta - h, normalize).signal) / (2.0 * h);
                    assert!((c.slope - slope_fd).abs() < 1e-7 * slope_fd.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn parity_matches_explicit_operator() {
        let n = 6;
        let probe = random_probe(n, 5);
        let p = crate::dicke::parity_x(basis(n));
        let alg = spin_algebra(n);
        let beta = 0.77;
        let rot = alg.z_conjugate(probe.matrix(), beta);
        let c = variance_parity(&probe, beta, true);
        assert!((c.signal - trace_product(&p.mat, &rot).re).abs() < 1e-13);
    }

    #[test]
    fn normalization_irrelevant_for_unit_trace() {
        let n = 8;
        let probe = random_probe(n, 9).renormalized().unwrap();
        for beta in [0.1, 0.9] {
            let a = variance_jz2(&probe, beta, true).variance;
            let b = variance_jz2(&probe, beta, false).variance;
            assert!((a - b).abs() < 1e-10 * a);
        }
    }
}
