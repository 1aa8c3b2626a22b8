//! Preparation channel, variance cost and its analytic gradient.

mod cost;
mod params;

pub use cost::{
    jz2_moments_at, jz2_static_moments, probe_cost, variance_jz2, variance_parity, ProbeCost,
    DIVERGENT_VARIANCE, MIN_SLOPE,
};
pub use params::{FieldAxis, GateStep, Observable, ProtocolParams, SensingTask};

pub(crate) use cost::is_divergent;
use cost::probe_cost_with_sensitivity;

use crate::dicke::{CollectiveBasis, SpinAlgebra, SymmetricDensity};
use crate::gpg::{
    adiabatic_coefficient_derivatives, adiabatic_coefficients, sin2_coefficients, GateDuration,
    NoiseRates, PhaseCoefficients,
};
use crate::{CMatrix, Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Variance of a protocol together with its gradient over the parameter vector.
#[derive(Debug, Clone)]
pub struct CostResult {
    pub variance: f64,
    /// Layout of [`ProtocolParams::to_vector`]; empty if not requested,
    /// all zeros when divergent.
    pub gradient: Vec<f64>,
    pub probe: SymmetricDensity,
    /// `1 - Tr(probe)`.
    pub trace_loss: f64,
    pub divergent: bool,
}

/// Everything except the protocol parameters that fixes the cost function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub basis: CollectiveBasis,
    pub rates: NoiseRates,
    pub duration: GateDuration,
    pub task: SensingTask,
}

/// Channel factor of one gate with its parameter derivatives.
struct StepGate {
    factor: CMatrix,
    d_phi: CMatrix,
    d_delta: CMatrix,
}

fn gate_coefficients(
    phi: f64,
    delta: f64,
    rates: &NoiseRates,
    duration: GateDuration,
    with_derivatives: bool,
) -> Result<(PhaseCoefficients, Option<(PhaseCoefficients, PhaseCoefficients)>)> {
    match duration {
        GateDuration::Adiabatic => {
            if phi != 0.0 && delta == 0.0 {
                return Err(Error::invalid("detuning must be non-zero for a non-trivial gate"));
            }
            let c = adiabatic_coefficients(phi, delta, rates);
            let d = if with_derivatives {
                if delta == 0.0 {
                    // Identity gate at delta = 0: only the lossless term responds to phi.
                    let d_phi = PhaseCoefficients {
                        nn: C64::new(1.0, 0.0),
                        mm: C64::new(-1.0, 0.0),
                        ..Default::default()
                    };
                    Some((d_phi, PhaseCoefficients::default()))
                } else {
                    Some(adiabatic_coefficient_derivatives(phi, delta, rates))
                }
            } else {
                None
            };
            Ok((c, d))
        }
        GateDuration::Finite { gt, samples } => {
            let f = sin2_coefficients(phi, delta, rates, gt, samples, with_derivatives)?;
            let d = f.d_phi.zip(f.d_delta);
            Ok((f.coeffs, d))
        }
    }
}

impl StepGate {
    fn new(dim: usize, step: &GateStep, rates: &NoiseRates, duration: GateDuration, grad: bool) -> Result<Self> {
        let (c, d) = gate_coefficients(step.phi, step.delta, rates, duration, grad)?;
        let (d_phi, d_delta) = match d {
            Some((a, b)) => (a.matrix(dim), b.matrix(dim)),
            None => (CMatrix::zeros(0, 0), CMatrix::zeros(0, 0)),
        };
        Ok(Self {
            factor: c.factor(dim),
            d_phi,
            d_delta,
        })
    }
}

/// `Tr(A (-i [Jz, B]))` for diagonal `Jz`.
fn trace_with_z_commutator(alg: &SpinAlgebra, a: &CMatrix, b: &CMatrix) -> C64 {
    let m = alg.m_values();
    let d = alg.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            acc += a[(i, k)] * b[(k, i)] * (m[k] - m[i]);
        }
    }
    -I * acc
}

/// `Re(-i Tr(J [rho, G]))`, the derivative of `Tr(G rho)` under `rho -> e^{-ixJ} rho e^{ixJ}`.
fn trace_with_commutator(j: &CMatrix, rho: &CMatrix, g: &CMatrix) -> f64 {
    let c = rho * g - g * rho;
    (-I * crate::dicke::trace_product(j, &c)).re
}

impl CostModel {
    pub fn new(basis: CollectiveBasis, rates: NoiseRates, duration: GateDuration, task: SensingTask) -> Result<Self> {
        duration.validate()?;
        task.validate()?;
        Ok(Self {
            basis,
            rates,
            duration,
            task,
        })
    }

    fn field_rotation(&self, alg: &SpinAlgebra, rho: &CMatrix, beta: f64) -> CMatrix {
        match self.task.field_axis {
            FieldAxis::Z => alg.z_conjugate(rho, beta),
            FieldAxis::Y => alg.y_conjugate(rho, beta),
        }
    }

    /// States after `U_0` and after each step; the last entry is the probe.
    pub fn trajectory(&self, params: &ProtocolParams) -> Result<Vec<SymmetricDensity>> {
        params.validate()?;
        let (states, _) = self.forward(params, false)?;
        Ok(states
            .into_iter()
            .map(|m| SymmetricDensity::from_matrix_unchecked(self.basis, m))
            .collect())
    }

    pub fn prepare_probe(&self, params: &ProtocolParams) -> Result<SymmetricDensity> {
        Ok(self.trajectory(params)?.pop().expect("trajectory holds the initial state"))
    }

    /// Probe after the field rotation by [`ProtocolParams::effective_beta`].
    pub fn rotated_probe(&self, params: &ProtocolParams) -> Result<SymmetricDensity> {
        let probe = self.prepare_probe(params)?;
        let alg = self.basis.algebra();
        let m = self.field_rotation(&alg, probe.matrix(), params.effective_beta());
        Ok(SymmetricDensity::from_matrix_unchecked(self.basis, m))
    }

    /// Returns `rho_0..rho_P` and, for each step, the gate with its
    /// derivatives and the post-gate state `sigma_j`.
    fn forward(&self, params: &ProtocolParams, grad: bool) -> Result<(Vec<CMatrix>, Vec<(StepGate, CMatrix)>)> {
        let alg = self.basis.algebra();
        let d = self.basis.dim();
        let mut rho = CMatrix::zeros(d, d);
        rho[(0, 0)] = C64::new(1.0, 0.0);
        let [a, b, c] = params.theta0;
        let mut states = vec![alg.rotate(&rho, a, b, c)];
        let mut gates = Vec::with_capacity(params.n_steps());
        for step in &params.steps {
            let gate = StepGate::new(d, step, &self.rates, self.duration, grad)?;
            let sigma = gate.factor.component_mul(states.last().expect("non-empty"));
            let [a, b, c] = step.theta;
            states.push(alg.rotate(&sigma, a, b, c));
            if grad {
                gates.push((gate, sigma));
            }
        }
        Ok((states, gates))
    }

    /// Variance only.
    pub fn cost(&self, params: &ProtocolParams) -> Result<CostResult> {
        params.validate()?;
        self.evaluate(params, false)
    }

    /// Variance and analytic gradient over the full parameter vector.
    pub fn cost_and_gradient(&self, params: &ProtocolParams) -> Result<CostResult> {
        params.validate()?;
        self.evaluate(params, true)
    }

    /// Evaluation without the sign rule on `(phi_j, delta_j)`. Used by the
    /// optimizer, which enforces signs through its parametrization.
    pub(crate) fn evaluate(&self, params: &ProtocolParams, grad: bool) -> Result<CostResult> {
        params.validate_finite()?;
        let (states, gates) = self.forward(params, grad)?;
        let probe = SymmetricDensity::from_matrix_unchecked(self.basis, states.last().expect("non-empty").clone());
        let beta = params.effective_beta();
        let (pc, sens) = probe_cost_with_sensitivity(&probe, beta, &self.task, grad);
        let trace_loss = 1.0 - pc.trace;
        let mut result = CostResult {
            variance: pc.variance,
            gradient: Vec::new(),
            probe,
            trace_loss,
            divergent: pc.divergent,
        };
        if !grad {
            return Ok(result);
        }
        let len = ProtocolParams::vector_len(params.n_steps());
        let Some(mut g) = sens else {
            result.gradient = vec![0.0; len];
            return Ok(result);
        };
        let alg = self.basis.algebra();
        let mut out = vec![0.0; len];
        out[len - 1] = pc.d_beta;

        // Walk back from the probe: dc = Re Tr(G_j d rho_j).
        for j in (1..=params.n_steps()).rev() {
            let step = &params.steps[j - 1];
            let [a, b, c] = step.theta;
            let rho_j = &states[j];
            let (gate, sigma) = &gates[j - 1];
            let base = 3 + 5 * (j - 1);
            let h = alg.rotate_adjoint(&g, a, b, c);
            out[base] = trace_with_z_commutator(&alg, &g, rho_j).re;
            let ja = alg.z_conjugate(alg.jy(), a);
            out[base + 1] = trace_with_commutator(&ja, rho_j, &g);
            out[base + 2] = trace_with_z_commutator(&alg, &h, sigma).re;
            // d sigma_nm = i d phi_nm sigma_nm; Tr(H d sigma) = sum H_mn d sigma_nm.
            let ht = h.transpose();
            let mut dp = C64::new(0.0, 0.0);
            let mut dd = C64::new(0.0, 0.0);
            for ((hk, sk), (pk, qk)) in ht.iter().zip(sigma.iter()).zip(gate.d_phi.iter().zip(gate.d_delta.iter())) {
                let w = hk * sk;
                dp += w * pk;
                dd += w * qk;
            }
            out[base + 3] = (I * dp).re;
            out[base + 4] = (I * dd).re;
            g = h.component_mul(&gate.factor.transpose());
        }
        let [a, b0, c0] = params.theta0;
        let rho0 = &states[0];
        let d = self.basis.dim();
        let mut init = CMatrix::zeros(d, d);
        init[(0, 0)] = C64::new(1.0, 0.0);
        let h0 = alg.rotate_adjoint(&g, a, b0, c0);
        out[0] = trace_with_z_commutator(&alg, &g, rho0).re;
        let ja = alg.z_conjugate(alg.jy(), a);
        out[1] = trace_with_commutator(&ja, rho0, &g);
        out[2] = trace_with_z_commutator(&alg, &h0, &init).re;
        result.gradient = out;
        Ok(result)
    }
}

/// Probe `U_P E_P ... U_1 E_1 U_0 |D_0><D_0| U_0^dag ...`.
pub fn prepare_probe(
    basis: CollectiveBasis,
    params: &ProtocolParams,
    rates: &NoiseRates,
    duration: GateDuration,
) -> Result<SymmetricDensity> {
    CostModel::new(basis, *rates, duration, SensingTask::parity())?.prepare_probe(params)
}

/// States after `U_0` and after each of the `P` steps.
pub fn trajectory(
    basis: CollectiveBasis,
    params: &ProtocolParams,
    rates: &NoiseRates,
    duration: GateDuration,
) -> Result<Vec<SymmetricDensity>> {
    CostModel::new(basis, *rates, duration, SensingTask::parity())?.trajectory(params)
}

/// Variance and its gradient over `[theta0, (theta_j, phi_j, delta_j), beta]`.
pub fn analytic_gradient(
    basis: CollectiveBasis,
    params: &ProtocolParams,
    rates: &NoiseRates,
    duration: GateDuration,
    task: &SensingTask,
) -> Result<CostResult> {
    CostModel::new(basis, *rates, duration, *task)?.cost_and_gradient(params)
}
