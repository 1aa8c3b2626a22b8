//! Published optimal protocols used as regression fixtures.
//!
//! Each table lists, per `(N, C, gamma/kappa)`, the optimal parameters for
//! gates of duration `gT = 40` and the resulting `N (Delta beta)^2`.
//! Detunings `delta` and drive detunings are in units of `g`.

use serde::{Deserialize, Serialize};

use crate::dicke::CollectiveBasis;
use crate::gpg::{rates_from_cooperativity, GateDuration, NoiseRates};
use crate::protocol::{CostModel, FieldAxis, GateStep, Observable, ProtocolParams, SensingTask};
use crate::{Error, Result};

const GHZ_OPTIMA: &str = include_str!("../fixtures/ghz_optima.json");
const DICKE_OPTIMA: &str = include_str!("../fixtures/dicke_optima.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureStep {
    pub phi: f64,
    /// `None` where the table leaves the detuning blank (no gate).
    pub delta: Option<f64>,
    pub theta: [f64; 3],
    /// Detuning of the full-model drive obtained by pulse inversion.
    pub drive_detuning: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureRow {
    pub n_spins: usize,
    pub cooperativity: f64,
    pub gamma_over_kappa: f64,
    /// Tabulated `N (Delta beta)^2`.
    pub scaled_variance: f64,
    pub theta0: [f64; 3],
    pub steps: Vec<FixtureStep>,
    pub extra_final_rotation: Option<f64>,
}

impl FixtureRow {
    /// Protocol with `beta = 0`; a blank detuning becomes an identity gate.
    pub fn params(&self) -> ProtocolParams {
        ProtocolParams {
            theta0: self.theta0,
            steps: self
                .steps
                .iter()
                .map(|s| GateStep {
                    theta: s.theta,
                    phi: if s.delta.is_some() { s.phi } else { 0.0 },
                    delta: s.delta.unwrap_or(0.0),
                })
                .collect(),
            beta: 0.0,
            extra_final_rotation: self.extra_final_rotation,
        }
    }

    /// 1-based indices of steps without a gate.
    pub fn identity_steps(&self) -> Vec<usize> {
        self.params().identity_steps()
    }

    pub fn rates(&self) -> Result<NoiseRates> {
        rates_from_cooperativity(self.cooperativity, self.gamma_over_kappa)
    }

    pub fn label(&self) -> String {
        format!("N={} C={:e} g/k={}", self.n_spins, self.cooperativity, self.gamma_over_kappa)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureTable {
    pub name: String,
    pub observable: Observable,
    pub field_axis: FieldAxis,
    /// Gate duration in units of `1/g` used for the tabulated optima.
    pub gate_duration_gt: f64,
    pub rel_tolerance: f64,
    pub abs_tolerance: f64,
    pub rows: Vec<FixtureRow>,
}

impl FixtureTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        self.task(false).validate()?;
        if !(self.gate_duration_gt > 0.0 && self.gate_duration_gt.is_finite()) {
            return Err(Error::invalid("fixture gate duration must be positive"));
        }
        if !(self.rel_tolerance >= 0.0 && self.abs_tolerance >= 0.0) {
            return Err(Error::invalid("fixture tolerances must be non-negative"));
        }
        for row in &self.rows {
            CollectiveBasis::new(row.n_spins)?;
            row.rates()?;
            row.params().validate()?;
            if !(row.scaled_variance > 0.0 && row.scaled_variance.is_finite()) {
                return Err(Error::invalid(format!("{}: tabulated value must be positive", row.label())));
            }
            for s in &row.steps {
                if s.delta.is_none() && s.phi != 0.0 {
                    return Err(Error::invalid(format!("{}: blank detuning with nonzero phi", row.label())));
                }
            }
        }
        Ok(())
    }

    pub fn task(&self, normalize_before_measure: bool) -> SensingTask {
        SensingTask {
            observable: self.observable,
            field_axis: self.field_axis,
            normalize_before_measure,
        }
    }

    /// `|value - target| <= rel * target + abs`.
    pub fn within_tolerance(&self, value: f64, target: f64) -> bool {
        (value - target).abs() <= self.rel_tolerance * target + self.abs_tolerance
    }

    /// Evaluates every row under the given gate model.
    pub fn evaluate(&self, duration: GateDuration, normalize_before_measure: bool) -> Result<Vec<RowEvaluation>> {
        self.rows
            .iter()
            .map(|row| self.evaluate_row(row, duration, normalize_before_measure))
            .collect()
    }

    pub fn evaluate_row(&self, row: &FixtureRow, duration: GateDuration, normalize_before_measure: bool) -> Result<RowEvaluation> {
        let model = CostModel::new(
            CollectiveBasis::new(row.n_spins)?,
            row.rates()?,
            duration,
            self.task(normalize_before_measure),
        )?;
        let res = model.cost(&row.params())?;
        let scaled = res.variance * row.n_spins as f64;
        Ok(RowEvaluation {
            label: row.label(),
            n_spins: row.n_spins,
            target: row.scaled_variance,
            scaled_variance: scaled,
            trace_loss: res.trace_loss,
            divergent: res.divergent,
            identity_steps: row.identity_steps(),
            passed: !res.divergent && self.within_tolerance(scaled, row.scaled_variance),
        })
    }
}

/// Result of evaluating one fixture row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowEvaluation {
    pub label: String,
    pub n_spins: usize,
    pub target: f64,
    pub scaled_variance: f64,
    pub trace_loss: f64,
    pub divergent: bool,
    pub identity_steps: Vec<usize>,
    pub passed: bool,
}

/// Optimal single-step protocols for the parity measurement.
pub fn ghz_optima() -> FixtureTable {
    FixtureTable::from_json(GHZ_OPTIMA).expect("bundled fixture is valid")
}

/// Optimal three-step protocols for the `Jz^2` measurement.
pub fn dicke_optima() -> FixtureTable {
    FixtureTable::from_json(DICKE_OPTIMA).expect("bundled fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_tables_load() {
        let g = ghz_optima();
        assert_eq!(g.rows.len(), 11);
        assert!(g.rows.iter().all(|r| r.steps.len() == 1 && r.extra_final_rotation.is_none()));
        let d = dicke_optima();
        assert_eq!(d.rows.len(), 11);
        assert!(d.rows.iter().all(|r| r.steps.len() == 3 && r.extra_final_rotation.is_some()));
    }

    #[test]
    fn blank_detuning_is_flagged() {
        let d = dicke_optima();
        let flagged: Vec<_> = d.rows.iter().filter(|r| !r.identity_steps().is_empty()).collect();
        assert_eq!(flagged.len(), 1);
        assert_eq!(flagged[0].n_spins, 10);
        assert_eq!(flagged[0].identity_steps(), vec![1]);
        assert!(flagged[0].steps[0].drive_detuning.is_none());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_signs() {
        let mut v: serde_json::Value = serde_json::from_str(GHZ_OPTIMA).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(FixtureTable::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(GHZ_OPTIMA).unwrap();
        v["rows"][0]["steps"][0]["delta"] = serde_json::json!(-1.0);
        assert!(FixtureTable::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn tolerance_rule() {
        let d = dicke_optima();
        assert!(d.within_tolerance(0.165 * 1.1 + 0.0099, 0.165));
        assert!(!d.within_tolerance(0.165 * 1.1 + 0.0101, 0.165));
    }
}
