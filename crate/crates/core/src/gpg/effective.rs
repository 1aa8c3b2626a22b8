use crate::{Error, Result};

fn drive_fraction(zeta_abs: f64, g: f64) -> Result<f64> {
    let x = (zeta_abs / g).powi(2);
    if !(zeta_abs >= 0.0) || !(x <= 0.25) {
        return Err(Error::DriveTooStrong { zeta_abs, t: f64::NAN });
    }
    Ok(x)
}

/// Dephasing of `|1>` and `|e>` seen in the dressed frame.
/// Returns `(gamma_phi', gamma')`.
pub fn effective_dephasing_rates(
    gamma_phi_1: f64,
    gamma_phi_e: f64,
    zeta_abs: f64,
    g: f64,
) -> Result<(f64, f64)> {
    let x = drive_fraction(zeta_abs, g)?;
    let root = (1.0 - 4.0 * x).max(0.0).sqrt();
    let dephasing = gamma_phi_1 * (1.0 + root).powi(2) / 4.0 + gamma_phi_e * (1.0 - root).powi(2) / 4.0;
    let decay = (gamma_phi_1 + gamma_phi_e) * x;
    Ok((dephasing, decay))
}

/// Spontaneous emission treated collectively in the dressed frame.
/// Returns `(gamma_phi', gamma')`.
pub fn effective_emission_rates(gamma: f64, zeta_abs: f64, g: f64) -> Result<(f64, f64)> {
    let x = drive_fraction(zeta_abs, g)?;
    let root = (1.0 - 4.0 * x).max(0.0).sqrt();
    Ok((gamma * x, gamma * (1.0 - root).powi(2) / 4.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undriven() {
        assert_eq!(effective_dephasing_rates(0.3, 0.7, 0.0, 1.0).unwrap(), (0.3, 0.0));
        assert_eq!(effective_emission_rates(0.4, 0.0, 1.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn edge_of_validity() {
        let (dp, _) = effective_dephasing_rates(0.3, 0.7, 0.5, 1.0).unwrap();
        assert!((dp - 0.25).abs() < 1e-15);
        let (a, b) = effective_emission_rates(0.4, 0.5, 1.0).unwrap();
        assert!((a - 0.1).abs() < 1e-15 && (b - 0.1).abs() < 1e-15);
    }

    #[test]
    fn dressed_decay_value() {
        let (_, decay) = effective_dephasing_rates(1.0, 1.0, 0.1_f64.sqrt(), 1.0).unwrap();
        assert!((decay - 0.2).abs() < 1e-15);
    }

    #[test]
    fn emission_is_fourth_order() {
        let z = 0.05;
        let (_, exact) = effective_emission_rates(1.0, z, 1.0).unwrap();
        let approx = z.powi(4);
        assert!((exact / approx - 1.0).abs() < 0.01, "{exact} vs {approx}");
    }

    #[test]
    fn too_strong_rejected() {
        assert!(effective_emission_rates(1.0, 0.51, 1.0).is_err());
        assert!(effective_dephasing_rates(1.0, 1.0, 0.6, 1.0).is_err());
    }
}
