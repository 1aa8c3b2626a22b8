use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Speed of light in m/s.
const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Loss model of the gate in units of the coupling `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseRates {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
}

impl NoiseRates {
    pub fn new(g: f64, kappa: f64, gamma: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::invalid(format!("coupling g = {g} must be positive")));
        }
        if !(kappa >= 0.0 && gamma >= 0.0 && kappa.is_finite() && gamma.is_finite()) {
            return Err(Error::invalid(format!(
                "rates must be non-negative and finite (kappa = {kappa}, gamma = {gamma})"
            )));
        }
        Ok(Self { g, kappa, gamma })
    }

    pub fn lossless() -> Self {
        Self {
            g: 1.0,
            kappa: 0.0,
            gamma: 0.0,
        }
    }

    /// `C = g^2 / (kappa gamma)`; infinite when lossless.
    pub fn cooperativity(&self) -> f64 {
        self.g * self.g / (self.kappa * self.gamma)
    }

    pub fn gamma_over_kappa(&self) -> f64 {
        self.gamma / self.kappa
    }

    pub fn is_lossless(&self) -> bool {
        self.kappa == 0.0 && self.gamma == 0.0
    }
}

/// Rates with `g = 1` from cooperativity and linewidth ratio. An infinite
/// cooperativity gives the lossless gate.
pub fn rates_from_cooperativity(cooperativity: f64, gamma_over_kappa: f64) -> Result<NoiseRates> {
    if !(cooperativity > 0.0) || !(gamma_over_kappa > 0.0) || !gamma_over_kappa.is_finite() {
        return Err(Error::invalid(format!(
            "C = {cooperativity} and gamma/kappa = {gamma_over_kappa} must be positive"
        )));
    }
    if cooperativity.is_infinite() {
        return Ok(NoiseRates::lossless());
    }
    let kappa = 1.0 / (cooperativity * gamma_over_kappa).sqrt();
    NoiseRates::new(1.0, kappa, gamma_over_kappa * kappa)
}

/// Physical cavity parameters; rates are angular frequencies in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub cooperativity: f64,
    pub g: f64,
    pub kappa: f64,
}

impl CavityParams {
    /// Dimensionless rates for the gate model, given the emitter linewidth.
    pub fn noise_rates(&self, gamma: f64) -> NoiseRates {
        NoiseRates {
            g: 1.0,
            kappa: self.kappa / self.g,
            gamma: gamma / self.g,
        }
    }
}

/// Fabry-Perot cavity figures from geometry.
///
/// `C = 3 lambda^2 F / (2 pi^3 w^2)`, `kappa = pi c / (L F)` and
/// `g = sqrt(C kappa gamma)`. Lengths in metres, `gamma` in rad/s.
pub fn cavity_params_from_geometry(
    wavelength: f64,
    finesse: f64,
    waist: f64,
    length: f64,
    gamma: f64,
) -> Result<CavityParams> {
    for (name, v) in [
        ("wavelength", wavelength),
        ("finesse", finesse),
        ("waist", waist),
        ("length", length),
        ("gamma", gamma),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} = {v} must be positive")));
        }
    }
    let cooperativity = 3.0 * wavelength * wavelength * finesse / (2.0 * PI.powi(3) * waist * waist);
    let kappa = PI * SPEED_OF_LIGHT / (length * finesse);
    let g = (cooperativity * kappa * gamma).sqrt();
    Ok(CavityParams {
        cooperativity,
        g,
        kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_rates_from_cooperativity() {
        let r = rates_from_cooperativity(100.0, 1.0).unwrap();
        assert!((r.kappa - 0.1).abs() < 1e-15 && (r.gamma - 0.1).abs() < 1e-15);
        let r = rates_from_cooperativity(1e4, 1.0).unwrap();
        assert!((r.kappa - 0.01).abs() < 1e-15 && (r.gamma - 0.01).abs() < 1e-15);
    }

    #[test]
    fn infinite_cooperativity_is_lossless() {
        assert!(rates_from_cooperativity(f64::INFINITY, 1.0).unwrap().is_lossless());
        let r = rates_from_cooperativity(1e12, 1.0).unwrap();
        assert!(r.kappa < 1e-5 && r.gamma < 1e-5);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(rates_from_cooperativity(0.0, 1.0).is_err());
        assert!(rates_from_cooperativity(10.0, -1.0).is_err());
        assert!(rates_from_cooperativity(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn round_trip() {
        for (c, r) in [(25.0, 1.0), (100.0, 0.01), (1e4, 100.0), (1471.6, 0.32)] {
            let rates = rates_from_cooperativity(c, r).unwrap();
            assert!((rates.cooperativity() / c - 1.0).abs() < 1e-12);
            assert!((rates.gamma_over_kappa() / r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rubidium_cavity() {
        let two_pi = 2.0 * PI;
        let p = cavity_params_from_geometry(780e-9, 2e5, 2e-6, 40e-6, two_pi * 6e6).unwrap();
        assert!((p.cooperativity / 1500.0 - 1.0).abs() < 0.1, "C = {}", p.cooperativity);
        assert!((p.kappa / (two_pi * 20e6) - 1.0).abs() < 0.15);
        assert!((p.g / (two_pi * 400e6) - 1.0).abs() < 0.15);
    }

    #[test]
    fn coupling_from_cooperativity() {
        // g = sqrt(C kappa gamma) at C = 1500, kappa = 2pi 20 MHz, gamma = 2pi 6 MHz.
        let g = (1500.0_f64 * 20.0 * 6.0).sqrt();
        assert!((g - 424.26).abs() < 0.01);
    }
}
