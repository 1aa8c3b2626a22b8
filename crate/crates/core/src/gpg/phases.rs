use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::pulse::{sin2_shape, PulseGrid};
use super::rates::NoiseRates;
use crate::dicke::{CollectiveBasis, SymmetricDensity};
use crate::{CMatrix, Error, Result, C64};

/// Default number of pulse samples for finite-duration gates.
pub const DEFAULT_SAMPLES: usize = 4001;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDuration {
    /// `T -> infinity`; phases depend only on `(phi, delta)`.
    Adiabatic,
    /// Pulse of duration `gt` in units of `1/g`, sampled on `samples` points.
    Finite {
        gt: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl GateDuration {
    pub fn finite(gt: f64) -> Self {
        GateDuration::Finite {
            gt,
            samples: DEFAULT_SAMPLES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let GateDuration::Finite { gt, samples } = *self {
            if !(gt > 0.0 && gt.is_finite()) {
                return Err(Error::invalid(format!("gate duration gT = {gt} must be positive")));
            }
            if samples < 5 || samples % 2 == 0 {
                return Err(Error::invalid(format!(
                    "sample count {samples} must be odd and at least 5"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpgParams {
    pub phi: f64,
    pub delta: f64,
    pub rates: NoiseRates,
    pub duration: GateDuration,
}

impl GpgParams {
    pub fn check_signs(&self) -> Result<()> {
        if self.phi != 0.0 && self.delta != 0.0 && self.phi.signum() != self.delta.signum() {
            return Err(Error::SignMismatch {
                phi: self.phi,
                delta: self.delta,
            });
        }
        Ok(())
    }
}

/// Open detuning interval `(2 pi / T, 3 g^2 T / (32 |phi|))` that keeps the
/// sin^2 drive below `g/2`.
pub fn detuning_band(phi: f64, gt: f64, g: f64) -> (f64, f64) {
    (2.0 * PI / gt, 3.0 * g * g * gt / (32.0 * phi.abs()))
}

/// Quadratic form of the gate phases:
/// `phi_nm = nn n^2 + mm m^2 + nm n m + lin (n + m)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseCoefficients {
    pub nn: C64,
    pub mm: C64,
    pub nm: C64,
    pub lin: C64,
}

impl PhaseCoefficients {
    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }

    pub fn value(&self, n: usize, m: usize) -> C64 {
        let (n, m) = (n as f64, m as f64);
        self.nn * (n * n) + self.mm * (m * m) + self.nm * (n * m) + self.lin * (n + m)
    }

    pub fn matrix(&self, dim: usize) -> CMatrix {
        CMatrix::from_fn(dim, dim, |n, m| self.value(n, m))
    }

    /// Elementwise channel factor `exp(i phi_nm)`.
    pub fn factor(&self, dim: usize) -> CMatrix {
        CMatrix::from_fn(dim, dim, |n, m| (I * self.value(n, m)).exp())
    }

    // Adiabatic structure: a (n^2 - m^2) + i b (m - n)^2 + i c (m + n).
    fn from_abc(a: f64, b: f64, c: f64) -> Self {
        Self {
            nn: C64::new(a, b),
            mm: C64::new(-a, b),
            nm: C64::new(0.0, -2.0 * b),
            lin: C64::new(0.0, c),
        }
    }

    // Finite-duration structure from I1 = int zeta b* dt and Gamma = int gamma_1 dt.
    fn from_integrals(i1: C64, gamma_int: f64) -> Self {
        let i2 = i1.conj();
        Self {
            nn: -i2,
            mm: i1,
            nm: i2 - i1,
            lin: C64::new(0.0, gamma_int / 2.0),
        }
    }
}

/// Adiabatic coefficients written with absolute values,
/// `(n^2-m^2) phi + (m-n)^2 (i kappa/2) |phi/delta| + (m+n) (i gamma/2g^2) |phi delta|`.
/// For sign-consistent `(phi, delta)` this is the adiabatic phase formula.
pub fn adiabatic_coefficients(phi: f64, delta: f64, rates: &NoiseRates) -> PhaseCoefficients {
    if phi == 0.0 {
        return PhaseCoefficients::default();
    }
    let b = rates.kappa / 2.0 * (phi / delta).abs();
    let c = rates.gamma / (2.0 * rates.g * rates.g) * (phi * delta).abs();
    PhaseCoefficients::from_abc(phi, b, c)
}

/// Derivatives of [`adiabatic_coefficients`] with respect to `phi` and `delta`.
pub fn adiabatic_coefficient_derivatives(
    phi: f64,
    delta: f64,
    rates: &NoiseRates,
) -> (PhaseCoefficients, PhaseCoefficients) {
    let (sp, sd) = (phi.signum(), delta.signum());
    let (ap, ad) = (phi.abs(), delta.abs());
    let kg = rates.gamma / (2.0 * rates.g * rates.g);
    let d_phi = PhaseCoefficients::from_abc(1.0, rates.kappa / 2.0 * sp / ad, kg * sp * ad);
    let d_delta = PhaseCoefficients::from_abc(0.0, -rates.kappa / 2.0 * ap * sd / (ad * ad), kg * ap * sd);
    (d_phi, d_delta)
}

/// Gate phases of one channel application.
#[derive(Debug, Clone, PartialEq)]
pub struct GpgPhaseMatrix {
    pub basis: CollectiveBasis,
    pub phases: CMatrix,
    /// `max_n |beta_n(T)|`, the cavity field left at the end of the pulse.
    /// Zero in the adiabatic limit.
    pub residual: f64,
}

impl GpgPhaseMatrix {
    pub fn from_coefficients(basis: CollectiveBasis, c: &PhaseCoefficients, residual: f64) -> Self {
        Self {
            basis,
            phases: c.matrix(basis.dim()),
            residual,
        }
    }

    pub fn factor(&self) -> CMatrix {
        self.phases.map(|p| (I * p).exp())
    }
}

pub fn adiabatic_phases(basis: CollectiveBasis, params: &GpgParams) -> Result<GpgPhaseMatrix> {
    if params.duration != GateDuration::Adiabatic {
        return Err(Error::invalid("adiabatic phases requested for a finite-duration gate"));
    }
    params.check_signs()?;
    if params.phi != 0.0 && params.delta == 0.0 {
        return Err(Error::invalid("detuning must be non-zero for a non-trivial gate"));
    }
    let c = adiabatic_coefficients(params.phi, params.delta, &params.rates);
    Ok(GpgPhaseMatrix::from_coefficients(basis, &c, 0.0))
}

/// Finite-duration phases for an arbitrary sampled drive.
pub fn finite_time_phases(
    basis: CollectiveBasis,
    params: &GpgParams,
    pulse: &PulseGrid,
) -> Result<GpgPhaseMatrix> {
    let GateDuration::Finite { gt, .. } = params.duration else {
        return Err(Error::invalid("finite-time phases requested for an adiabatic gate"));
    };
    params.check_signs()?;
    let t_end = *pulse.times.last().expect("pulse grids hold at least five samples");
    if (t_end - gt).abs() > 1e-9 * gt.max(1.0) {
        return Err(Error::invalid(format!(
            "pulse ends at t = {t_end}, gate duration is {gt}"
        )));
    }
    let h = pulse.step();
    let lambda = C64::new(params.rates.kappa / 2.0, params.delta);
    let forcing: Vec<C64> = pulse.zeta.iter().map(|z| -I * z).collect();
    let b = propagate_linear(lambda, h, &forcing);
    let (i1, gamma_int) = gate_integrals(&pulse.zeta, &b, &pulse.times, h, &params.rates)?;
    let c = PhaseCoefficients::from_integrals(i1, gamma_int);
    let residual = basis.n_spins() as f64 * b.last().map(|z| z.norm()).unwrap_or(0.0);
    Ok(GpgPhaseMatrix::from_coefficients(basis, &c, residual))
}

fn gamma_one(rates: &NoiseRates, x: f64) -> f64 {
    rates.gamma * (1.0 - (1.0 - 4.0 * x).max(0.0).sqrt()) / 2.0
}

fn gate_integrals(
    zeta: &[C64],
    b: &[C64],
    times: &[f64],
    h: f64,
    rates: &NoiseRates,
) -> Result<(C64, f64)> {
    let g2 = rates.g * rates.g;
    let mut gamma_vals = Vec::with_capacity(zeta.len());
    for (k, z) in zeta.iter().enumerate() {
        let x = z.norm_sqr() / g2;
        if x >= 0.25 {
            return Err(Error::DriveTooStrong {
                zeta_abs: z.norm(),
                t: times[k],
            });
        }
        gamma_vals.push(gamma_one(rates, x));
    }
    let prod: Vec<C64> = zeta.iter().zip(b).map(|(z, bk)| z * bk.conj()).collect();
    Ok((simpson(&prod, h), simpson(&gamma_vals, h)))
}

/// Finite-duration coefficients of the sin^2 drive, optionally with their
/// derivatives in `phi` and `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteCoefficients {
    pub coeffs: PhaseCoefficients,
    pub d_phi: Option<PhaseCoefficients>,
    pub d_delta: Option<PhaseCoefficients>,
    /// `|b(T)|`; the cavity amplitude of `|D_n>` at the end is `n |b(T)|`.
    pub residual: f64,
}

/// Gate coefficients for the sin^2 drive of duration `gt`.
///
/// `(phi, delta)` must share a sign and `|delta|` must lie inside
/// [`detuning_band`]. `phi = 0` is the identity gate.
pub fn sin2_coefficients(
    phi: f64,
    delta: f64,
    rates: &NoiseRates,
    gt: f64,
    samples: usize,
    with_derivatives: bool,
) -> Result<FiniteCoefficients> {
    if phi == 0.0 {
        let zero = PhaseCoefficients::default();
        let d = with_derivatives.then_some(zero);
        // The first-order response to phi at phi = 0 is the lossless term.
        let d_phi = with_derivatives.then_some(PhaseCoefficients::from_abc(1.0, 0.0, 0.0));
        return Ok(FiniteCoefficients {
            coeffs: zero,
            d_phi,
            d_delta: d,
            residual: 0.0,
        });
    }
    GpgParams {
        phi,
        delta,
        rates: *rates,
        duration: GateDuration::Finite { gt, samples },
    }
    .check_signs()?;
    GateDuration::Finite { gt, samples }.validate()?;
    let (lo, hi) = detuning_band(phi, gt, rates.g);
    if !(delta.abs() > lo && delta.abs() < hi) {
        return Err(Error::DetuningOutOfBand {
            delta,
            lo,
            hi,
            duration: gt,
        });
    }

    let (times, amp, s, sdot) = sin2_shape(phi, delta, gt, samples);
    let h = gt / (samples - 1) as f64;
    let zeta: Vec<C64> = s
        .iter()
        .zip(&sdot)
        .map(|(&sk, &dk)| C64::new(amp * sk, -amp * dk / delta))
        .collect();
    let lambda = C64::new(rates.kappa / 2.0, delta);
    let forcing: Vec<C64> = zeta.iter().map(|z| -I * z).collect();
    let b = propagate_linear(lambda, h, &forcing);
    let (i1, gamma_int) = gate_integrals(&zeta, &b, &times, h, rates)?;
    let coeffs = PhaseCoefficients::from_integrals(i1, gamma_int);
    let residual = b.last().map(|z| z.norm()).unwrap_or(0.0);

    if !with_derivatives {
        return Ok(FiniteCoefficients {
            coeffs,
            d_phi: None,
            d_delta: None,
            residual,
        });
    }

    // zeta scales as sqrt|phi|, so I1 scales as phi.
    let g2 = rates.g * rates.g;
    let dgamma_phi: Vec<f64> = zeta
        .iter()
        .map(|z| {
            let x = z.norm_sqr() / g2;
            rates.gamma * x / (phi * (1.0 - 4.0 * x).sqrt())
        })
        .collect();
    let d_phi = PhaseCoefficients::from_integrals(i1 / phi, simpson(&dgamma_phi, h));

    // d zeta / d delta = zeta/(2 delta) + i A sdot / delta^2, and
    // d b / d delta obeys b' = -lambda b' - i (b + d zeta / d delta).
    let dzeta: Vec<C64> = zeta
        .iter()
        .zip(&sdot)
        .map(|(z, &dk)| z / (2.0 * delta) + I * (amp * dk / (delta * delta)))
        .collect();
    let forcing_d: Vec<C64> = b.iter().zip(&dzeta).map(|(bk, dz)| -I * (bk + dz)).collect();
    let db = propagate_linear(lambda, h, &forcing_d);
    let di1_vals: Vec<C64> = (0..samples)
        .map(|k| dzeta[k] * b[k].conj() + zeta[k] * db[k].conj())
        .collect();
    let dgamma_delta: Vec<f64> = zeta
        .iter()
        .zip(&dzeta)
        .map(|(z, dz)| {
            let x = z.norm_sqr() / g2;
            rates.gamma * 2.0 * (z.conj() * dz).re / (g2 * (1.0 - 4.0 * x).sqrt())
        })
        .collect();
    let d_delta = PhaseCoefficients::from_integrals(simpson(&di1_vals, h), simpson(&dgamma_delta, h));

    Ok(FiniteCoefficients {
        coeffs,
        d_phi: Some(d_phi),
        d_delta: Some(d_delta),
        residual,
    })
}

/// `E(rho)_nm = exp(i phi_nm) rho_nm`.
pub fn apply_channel(phases: &GpgPhaseMatrix, rho: &SymmetricDensity) -> Result<SymmetricDensity> {
    phases.basis.check(&rho.basis())?;
    let out = phases.factor().component_mul(rho.matrix());
    Ok(SymmetricDensity::from_matrix_unchecked(rho.basis(), out))
}

/// Solves `y' = -lambda y + f(t)` with `y(0) = 0` on a uniform grid.
///
/// Each interval is advanced with the exact integrating factor applied to a
/// quadratic interpolant of `f`.
pub(crate) fn propagate_linear(lambda: C64, h: f64, forcing: &[C64]) -> Vec<C64> {
    let n = forcing.len();
    let mut y = vec![C64::new(0.0, 0.0); n];
    if n < 3 {
        return y;
    }
    let z = lambda * h;
    let decay = (-z).exp();
    let (e0, e1, e2) = exp_moments(z);
    // int_0^1 e^{-z(1-v)} v^p dv expressed through E_p(z) = int_0^1 w^p e^{-zw} dw.
    let w0 = e0;
    let w1 = e0 - e1;
    let w2 = e0 - 2.0 * e1 + e2;
    for k in 0..n - 1 {
        // Quadratic in v = u/h on [0, 1]: f = c0 + c1 v + c2 v^2.
        let (c0, c1, c2) = if k + 2 < n {
            let (f0, f1, f2) = (forcing[k], forcing[k + 1], forcing[k + 2]);
            (f0, (-3.0 * f0 + 4.0 * f1 - f2) * 0.5, (f0 - 2.0 * f1 + f2) * 0.5)
        } else {
            let (fm, f0, f1) = (forcing[k - 1], forcing[k], forcing[k + 1]);
            (f0, (f1 - fm) * 0.5, (f1 - 2.0 * f0 + fm) * 0.5)
        };
        y[k + 1] = decay * y[k] + (c0 * w0 + c1 * w1 + c2 * w2) * h;
    }
    y
}

/// `E_p(z) = int_0^1 w^p exp(-z w) dw` for p = 0, 1, 2.
fn exp_moments(z: C64) -> (C64, C64, C64) {
    if z.norm() <= 1.0 {
        // Series: E_p = sum_k (-z)^k / (k! (p + k + 1)).
        let mut e = [C64::new(0.0, 0.0); 3];
        let mut term = C64::new(1.0, 0.0);
        for k in 0..40 {
            for (p, ep) in e.iter_mut().enumerate() {
                *ep += term / (p + k + 1) as f64;
            }
            term *= -z / (k + 1) as f64;
            if term.norm() < 1e-18 {
                break;
            }
        }
        (e[0], e[1], e[2])
    } else {
        let ez = (-z).exp();
        let e0 = (1.0 - ez) / z;
        let e1 = (e0 - ez) / z;
        let e2 = (2.0 * e1 - ez) / z;
        (e0, e1, e2)
    }
}

/// Composite Simpson rule on an odd number of uniform samples.
pub(crate) fn simpson<T>(vals: &[T], h: f64) -> T
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
{
    let n = vals.len();
    debug_assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd sample count");
    let mut acc = vals[0] + vals[n - 1];
    for (k, v) in vals.iter().enumerate().take(n - 1).skip(1) {
        acc = acc + *v * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (h / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpg::{rates_from_cooperativity, sin2_pulse};

    fn basis(n: usize) -> CollectiveBasis {
        CollectiveBasis::new(n).unwrap()
    }

    fn adiabatic(phi: f64, delta: f64, rates: NoiseRates) -> GpgParams {
        GpgParams {
            phi,
            delta,
            rates,
            duration: GateDuration::Adiabatic,
        }
    }

    #[test]
    fn diagonal_is_pure_damping() {
        let rates = NoiseRates::new(1.0, 0.1, 0.1).unwrap();
        let p = adiabatic_phases(basis(6), &adiabatic(1.2, 0.5, rates)).unwrap();
        for n in 0..=6 {
            let expect = C64::new(0.0, n as f64 * 0.1 * 0.5 * 1.2);
            assert!((p.phases[(n, n)] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn lossless_phases_are_real_squares() {
        let p = adiabatic_phases(basis(5), &adiabatic(0.7, 1.3, NoiseRates::lossless())).unwrap();
        for n in 0..=5 {
            for m in 0..=5 {
                let expect = 0.7 * (n * n) as f64 - 0.7 * (m * m) as f64;
                assert!((p.phases[(n, m)] - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn single_excitation_element() {
        // phi_10 = phi (1 + i kappa/(2 delta) + i gamma delta/2)
        let rates = NoiseRates::new(1.0, 0.1, 0.1).unwrap();
        let p = adiabatic_phases(basis(3), &adiabatic(1.56, 0.48, rates)).unwrap();
        let expect = C64::new(1.56, 1.56 * (0.1 / 0.96 + 0.024));
        assert!((p.phases[(1, 0)] - expect).norm() < 1e-14);
        assert!((p.phases[(1, 0)].im - 0.200).abs() < 1e-3);
    }

    #[test]
    fn sign_mismatch_rejected() {
        let r = adiabatic_phases(basis(3), &adiabatic(1.0, -0.5, NoiseRates::lossless()));
        assert!(matches!(r, Err(Error::SignMismatch { .. })));
    }

    #[test]
    fn negative_pair_matches_abs_form() {
        let rates = NoiseRates::new(1.0, 0.03, 0.2).unwrap();
        let a = adiabatic_phases(basis(4), &adiabatic(-0.9, -1.7, rates)).unwrap();
        let n = 3.0_f64;
        let m = 1.0_f64;
        let expect = -0.9 * (n * n - m * m)
            + C64::new(0.0, (m - n).powi(2) * 0.03 / (2.0 * -1.7) * -0.9)
            + C64::new(0.0, (m + n) * 0.2 * -1.7 / 2.0 * -0.9);
        assert!((a.phases[(3, 1)] - expect).norm() < 1e-14);
    }

    #[test]
    fn exp_moments_branches_agree() {
        for z in [C64::new(0.999, 0.0), C64::new(0.3, 0.95), C64::new(0.0, 1.0)] {
            let series = exp_moments(z);
            let ez = (-z).exp();
            let e0 = (1.0 - ez) / z;
            let e1 = (e0 - ez) / z;
            let e2 = (2.0 * e1 - ez) / z;
            assert!((series.0 - e0).norm() < 1e-13);
            assert!((series.1 - e1).norm() < 1e-13);
            assert!((series.2 - e2).norm() < 1e-12);
        }
    }

    #[test]
    fn propagator_matches_closed_form() {
        // y' = -lambda y + cos(t), y(0) = 0.
        let lambda = C64::new(0.05, 2.0);
        let h = 0.01;
        let f: Vec<C64> = (0..2001).map(|k| C64::new((k as f64 * h).cos(), 0.0)).collect();
        let y = propagate_linear(lambda, h, &f);
        let t = 20.0_f64;
        let i = C64::new(0.0, 1.0);
        // Particular solution of y' + lambda y = (e^{it} + e^{-it})/2.
        let part = |t: f64| {
            0.5 * (i * t).exp() / (lambda + i) + 0.5 * (-i * t).exp() / (lambda - i)
        };
        let exact = part(t) - part(0.0) * (-lambda * t).exp();
        assert!((y[2000] - exact).norm() < 1e-7, "{} vs {}", y[2000], exact);
    }

    #[test]
    fn lossless_finite_gate_converges() {
        let coeffs = sin2_coefficients(1.57, 0.44, &NoiseRates::lossless(), 40.0, DEFAULT_SAMPLES, false)
            .unwrap();
        let m = coeffs.coeffs.matrix(11);
        for n in 0..=10 {
            for k in 0..=10 {
                let target = 1.57 * (n * n) as f64 - 1.57 * (k * k) as f64;
                assert!((m[(n, k)] - target).norm() <= 0.01 * target.abs().max(1.0));
            }
        }
        assert_eq!(m[(0, 0)], C64::new(0.0, 0.0));
    }

    #[test]
    fn finite_gate_from_pulse_grid_matches_sin2_path() {
        let rates = rates_from_cooperativity(1e2, 1.0).unwrap();
        let b = basis(6);
        let pulse = sin2_pulse(1.2, 0.9, 40.0, DEFAULT_SAMPLES).unwrap();
        let params = GpgParams {
            phi: 1.2,
            delta: 0.9,
            rates,
            duration: GateDuration::finite(40.0),
        };
        let p = finite_time_phases(b, &params, &pulse).unwrap();
        let c = sin2_coefficients(1.2, 0.9, &rates, 40.0, DEFAULT_SAMPLES, false).unwrap();
        assert!((p.phases.clone() - c.coeffs.matrix(7)).camax() < 1e-12);
        assert_eq!(p.phases[(0, 0)], C64::new(0.0, 0.0));
    }

    #[test]
    fn finite_close_to_adiabatic_at_high_cooperativity() {
        let rates = rates_from_cooperativity(1e4, 1.0).unwrap();
        let fin = sin2_coefficients(1.57, 0.44, &rates, 40.0, DEFAULT_SAMPLES, false).unwrap();
        let ad = adiabatic_coefficients(1.57, 0.44, &rates);
        let diff = fin.coeffs.matrix(11) - ad.matrix(11);
        let max = diff.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max < 0.05, "max deviation {max}");
    }

    #[test]
    fn quadrature_converged_at_default_grid() {
        let rates = rates_from_cooperativity(1e2, 0.01).unwrap();
        let a = sin2_coefficients(1.57, 2.03, &rates, 40.0, DEFAULT_SAMPLES, false).unwrap();
        let b = sin2_coefficients(1.57, 2.03, &rates, 40.0, 2 * DEFAULT_SAMPLES - 1, false).unwrap();
        let diff = a.coeffs.matrix(41) - b.coeffs.matrix(41);
        let max = diff.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max < 1e-8, "doubling changed phases by {max}");
    }

    #[test]
    fn finite_derivatives_match_differences() {
        let rates = rates_from_cooperativity(1e2, 1.0).unwrap();
        let (phi, delta, gt) = (0.9, 1.1, 30.0);
        let c = sin2_coefficients(phi, delta, &rates, gt, 2001, true).unwrap();
        let h = 1e-5;
        let f = |p: f64, d: f64| sin2_coefficients(p, d, &rates, gt, 2001, false).unwrap().coeffs;
        let fd = |a: PhaseCoefficients, b: PhaseCoefficients| {
            [(a.nn - b.nn) / (2.0 * h), (a.mm - b.mm) / (2.0 * h), (a.nm - b.nm) / (2.0 * h), (a.lin - b.lin) / (2.0 * h)]
        };
        let dp = fd(f(phi + h, delta), f(phi - h, delta));
        let dd = fd(f(phi, delta + h), f(phi, delta - h));
        let ap = c.d_phi.unwrap();
        let ad = c.d_delta.unwrap();
        for (x, y) in [ap.nn, ap.mm, ap.nm, ap.lin].iter().zip(dp) {
            assert!((x - y).norm() < 1e-7 * (1.0 + y.norm()), "{x} vs {y}");
        }
        for (x, y) in [ad.nn, ad.mm, ad.nm, ad.lin].iter().zip(dd) {
            assert!((x - y).norm() < 1e-7 * (1.0 + y.norm()), "{x} vs {y}");
        }
    }

    #[test]
    fn out_of_band_rejected() {
        let r = sin2_coefficients(1.57, 3.0, &NoiseRates::lossless(), 40.0, DEFAULT_SAMPLES, false);
        assert!(matches!(r, Err(Error::DetuningOutOfBand { .. })));
        let r = sin2_coefficients(1.57, 0.1, &NoiseRates::lossless(), 40.0, DEFAULT_SAMPLES, false);
        assert!(r.is_err());
    }

    #[test]
    fn band_values() {
        let (lo, hi) = detuning_band(1.57, 40.0, 1.0);
        assert!((lo - 0.15708).abs() < 1e-5);
        assert!((hi - 2.3885).abs() < 1e-4);
    }

    #[test]
    fn zero_phases_are_identity() {
        let b = basis(4);
        let p = GpgPhaseMatrix::from_coefficients(b, &PhaseCoefficients::default(), 0.0);
        let rho = SymmetricDensity::maximally_mixed(b);
        assert_eq!(apply_channel(&p, &rho).unwrap(), rho);
    }

    #[test]
    fn damping_reduces_trace() {
        let b = basis(4);
        let rates = NoiseRates::new(1.0, 0.0, 0.05).unwrap();
        let p = adiabatic_phases(b, &adiabatic(1.0, 1.0, rates)).unwrap();
        let rho = SymmetricDensity::maximally_mixed(b);
        assert!(apply_channel(&p, &rho).unwrap().trace() < rho.trace());
    }

    #[test]
    fn basis_mismatch_rejected() {
        let p = GpgPhaseMatrix::from_coefficients(basis(4), &PhaseCoefficients::default(), 0.0);
        let rho = SymmetricDensity::maximally_mixed(basis(5));
        assert!(matches!(apply_channel(&p, &rho), Err(Error::BasisMismatch { .. })));
    }
}
