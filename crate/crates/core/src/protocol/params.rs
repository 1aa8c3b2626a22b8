use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One protocol step: a gate with phase `phi` at detuning `delta`, followed by
/// the Euler rotation `theta = (alpha, beta, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateStep {
    pub theta: [f64; 3],
    pub phi: f64,
    pub delta: f64,
}

impl GateStep {
    /// A zero phase leaves the state untouched; only the rotation acts.
    pub fn is_identity_gate(&self) -> bool {
        self.phi == 0.0
    }

    pub fn signs_consistent(&self) -> bool {
        self.phi == 0.0 || (self.delta != 0.0 && self.phi.signum() == self.delta.signum())
    }
}

/// Full parameter set of a preparation protocol.
///
/// The probe is `U_P E_P ... U_1 E_1 U_0 |D_0>`, rotated along the field axis
/// by `beta + extra_final_rotation` before measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    pub theta0: [f64; 3],
    pub steps: Vec<GateStep>,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_final_rotation: Option<f64>,
}

impl ProtocolParams {
    pub fn identity(n_steps: usize) -> Self {
        Self {
            theta0: [0.0; 3],
            steps: vec![
                GateStep {
                    theta: [0.0; 3],
                    phi: 0.0,
                    delta: 0.0,
                };
                n_steps
            ],
            beta: 0.0,
            extra_final_rotation: None,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    /// Length of the parameter vector, `3 + 5P + 1`.
    pub fn vector_len(n_steps: usize) -> usize {
        3 + 5 * n_steps + 1
    }

    /// Rotation angle actually applied before measurement.
    pub fn effective_beta(&self) -> f64 {
        self.beta + self.extra_final_rotation.unwrap_or(0.0)
    }

    /// Layout `[theta0; (theta, phi, delta) per step; beta]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::vector_len(self.n_steps()));
        v.extend_from_slice(&self.theta0);
        for s in &self.steps {
            v.extend_from_slice(&s.theta);
            v.push(s.phi);
            v.push(s.delta);
        }
        v.push(self.beta);
        v
    }

    pub fn from_vector(v: &[f64], extra_final_rotation: Option<f64>) -> Result<Self> {
        if v.len() < 4 || (v.len() - 4) % 5 != 0 {
            return Err(Error::invalid(format!(
                "parameter vector of length {} is not 3 + 5P + 1",
                v.len()
            )));
        }
        let steps = v[3..v.len() - 1]
            .chunks_exact(5)
            .map(|c| GateStep {
                theta: [c[0], c[1], c[2]],
                phi: c[3],
                delta: c[4],
            })
            .collect();
        Ok(Self {
            theta0: [v[0], v[1], v[2]],
            steps,
            beta: v[v.len() - 1],
            extra_final_rotation,
        })
    }

    /// Index of `phi_j` (1-based step `j`) in the parameter vector.
    pub fn phi_index(step: usize) -> usize {
        3 + 5 * (step - 1) + 3
    }

    /// Checks finiteness and the sign rule for `(phi_j, delta_j)`.
    pub fn validate(&self) -> Result<()> {
        self.validate_finite()?;
        for s in &self.steps {
            if !s.signs_consistent() {
                return Err(Error::SignMismatch {
                    phi: s.phi,
                    delta: s.delta,
                });
            }
        }
        Ok(())
    }

    pub(crate) fn validate_finite(&self) -> Result<()> {
        let extra = self.extra_final_rotation.unwrap_or(0.0);
        if self.to_vector().iter().all(|x| x.is_finite()) && extra.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("protocol parameters must be finite"))
        }
    }

    /// Indices of steps whose gate is the identity.
    pub fn identity_steps(&self) -> Vec<usize> {
        (0..self.steps.len())
            .filter(|&k| self.steps[k].is_identity_gate())
            .map(|k| k + 1)
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate_finite()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Measured observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// `P_x`, the product of all `sigma_x`.
    ParityX,
    /// `J_z^2`.
    JzSquared,
}

/// Axis of the sensed field Hamiltonian `beta J_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldAxis {
    Z,
    Y,
}

/// Observable and field direction. Parity pairs with a `z` field,
/// `J_z^2` with a `y` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingTask {
    pub observable: Observable,
    pub field_axis: FieldAxis,
    /// Divide moments by the probe trace before forming the variance.
    #[serde(default)]
    pub normalize_before_measure: bool,
}

impl SensingTask {
    pub fn parity() -> Self {
        Self {
            observable: Observable::ParityX,
            field_axis: FieldAxis::Z,
            normalize_before_measure: false,
        }
    }

    pub fn jz_squared() -> Self {
        Self {
            observable: Observable::JzSquared,
            field_axis: FieldAxis::Y,
            normalize_before_measure: false,
        }
    }

    pub fn normalized(mut self, on: bool) -> Self {
        self.normalize_before_measure = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (self.observable, self.field_axis) {
            (Observable::ParityX, FieldAxis::Z) | (Observable::JzSquared, FieldAxis::Y) => Ok(()),
            (o, a) => Err(Error::invalid(format!(
                "observable {o:?} is not paired with field axis {a:?}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ProtocolParams {
        ProtocolParams {
            theta0: [1.51, 1.54, 0.37],
            steps: vec![GateStep {
                theta: [0.08, 1.57, 1.58],
                phi: 1.57,
                delta: 2.03,
            }],
            beta: 0.1 + 0.2,
            extra_final_rotation: Some(std::f64::consts::PI / 7.0),
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let p = sample();
        let back = ProtocolParams::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.beta.to_bits(), p.beta.to_bits());
    }

    #[test]
    fn json_layout() {
        let text = r#"{"theta0":[0,0,0],"steps":[{"theta":[1,2,3],"phi":0.5,"delta":1.0}],"beta":0.25}"#;
        let p = ProtocolParams::from_json(text).unwrap();
        assert_eq!(p.steps[0].theta, [1.0, 2.0, 3.0]);
        assert_eq!(p.extra_final_rotation, None);
        assert!(ProtocolParams::from_json(r#"{"theta0":[0,0,0],"steps":[],"beta":0,"gamma":1}"#).is_err());
    }

    #[test]
    fn vector_round_trip() {
        let p = sample();
        let v = p.to_vector();
        assert_eq!(v.len(), ProtocolParams::vector_len(1));
        assert_eq!(v[ProtocolParams::phi_index(1)], 1.57);
        assert_eq!(ProtocolParams::from_vector(&v, p.extra_final_rotation).unwrap(), p);
        assert!(ProtocolParams::from_vector(&v[..7], None).is_err());
    }

    #[test]
    fn sign_rule() {
        let mut p = sample();
        p.validate().unwrap();
        p.steps[0].delta = -2.03;
        assert!(matches!(p.validate(), Err(Error::SignMismatch { .. })));
        p.steps[0].phi = 0.0;
        p.validate().unwrap();
        assert_eq!(p.identity_steps(), vec![1]);
    }

    #[test]
    fn task_pairing() {
        SensingTask::parity().validate().unwrap();
        SensingTask::jz_squared().validate().unwrap();
        let bad = SensingTask {
            observable: Observable::ParityX,
            field_axis: FieldAxis::Y,
            normalize_before_measure: true,
        };
        assert!(bad.validate().is_err());
        let t: SensingTask = serde_json::from_str(r#"{"observable":"jz_squared","field_axis":"y"}"#).unwrap();
        assert!(!t.normalize_before_measure);
    }
}
