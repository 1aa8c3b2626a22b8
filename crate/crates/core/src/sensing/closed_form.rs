//! Closed-form variances of ideal probes under local dephasing.

/// `(Delta beta)^2` of a GHZ state pre-rotated by `pi/(2N)` about `z`,
/// measured by parity after evolving for `t` under `J Jz` with local
/// dephasing rate `gamma_phi` (jump operators `sigma_z/2`).
pub fn ghz_variance_closed_form(n_spins: usize, gamma_phi: f64, j: f64, t: f64) -> f64 {
    let n = n_spins as f64;
    let theta = n * j * t + std::f64::consts::FRAC_PI_2;
    let (s, c) = theta.sin_cos();
    let decay = (n * gamma_phi * t).exp();
    let denom = (s + gamma_phi / (2.0 * j) * c).powi(2);
    decay / (n * n) * (1.0 - c * c / decay) / denom
}

/// `(Delta beta)^2` of `|D_{N/2}>` measured by `Jz^2` when the state first
/// dephases for `t` and is then rotated by `exp(-i Jt Jy)` without noise.
///
/// `gamma_phi` is the decay rate of single-spin coherences in this model,
/// `|rho_01(t)| = |rho_01(0)| e^{-gamma_phi t}`; the same state is reached
/// by the master equation with jump operators `sigma_z/2` at rate `2 gamma_phi`.
pub fn dicke_variance_closed_form(n_spins: usize, gamma_phi: f64, t: f64, jt: f64) -> f64 {
    let n = n_spins as f64;
    let e2 = (2.0 * gamma_phi * t).exp();
    let e4 = e2 * e2;
    let tan2 = jt.tan().powi(2);
    let num = 16.0 * e2 * (2.0 * e2 + n)
        + (16.0 * e4 * (n - 1.0) + 16.0 * e2 * n * (n - 2.0) + n * (12.0 - 12.0 * n + n * n)) * tan2;
    num / (8.0 * n * (2.0 * e2 + n).powi(2))
}

/// `<Jx^2>` of `|D_{N/2}>` after dephasing, with `gamma_phi` as in
/// [`dicke_variance_closed_form`].
pub fn dicke_jx2_closed_form(n_spins: usize, gamma_phi: f64, t: f64) -> f64 {
    let n = n_spins as f64;
    0.25 * ((-2.0 * gamma_phi * t).exp() * n * n / 2.0 + n)
}

/// `<Jx^4>` of `|D_{N/2}>` after dephasing, with `gamma_phi` as in
/// [`dicke_variance_closed_form`].
pub fn dicke_jx4_closed_form(n_spins: usize, gamma_phi: f64, t: f64) -> f64 {
    let n = n_spins as f64;
    let e2 = (-2.0 * gamma_phi * t).exp();
    let e4 = e2 * e2;
    ((3.0 * n * n - 2.0 * n) + e2 * (3.0 * n.powi(3) - 4.0 * n * n) + e4 * 3.0 * n * n * (n - 2.0).powi(2) / 8.0) / 16.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ghz_starts_at_heisenberg_limit() {
        for n in [1, 4, 10, 40] {
            let v = ghz_variance_closed_form(n, 0.3, 1.0, 0.0);
            assert!((v - 1.0 / (n * n) as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn ghz_lossless_is_constant() {
        for n in [2, 7, 10] {
            for k in 0..200 {
                let t = 0.0137 * k as f64;
                // Skip the isolated points where the ratio is 0/0.
                if (n as f64 * t + std::f64::consts::FRAC_PI_2).sin().abs() < 1e-3 {
                    continue;
                }
                let v = ghz_variance_closed_form(n, 0.0, 1.0, t);
                assert!((v - 1.0 / (n * n) as f64).abs() < 1e-9 / (n * n) as f64, "n {n} t {t}: {v}");
            }
        }
    }

    #[test]
    fn ghz_independent_expansion() {
        // Expanding cos(x + pi/2) = -sin x, sin(x + pi/2) = cos x.
        let (n, g, t) = (10.0, 0.1, 0.5);
        let x: f64 = n * t;
        let expected = (n * g * t).exp() / (n * n) * (1.0 - (-n * g * t).exp() * x.sin().powi(2))
            / (x.cos() - g / 2.0 * x.sin()).powi(2);
        let v = ghz_variance_closed_form(10, 0.1, 1.0, 0.5);
        assert!((v - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn dicke_start_value() {
        for n in [2, 10, 40] {
            let nf = n as f64;
            let v = dicke_variance_closed_form(n, 0.4, 0.0, 1e-9);
            assert!((v - 2.0 / (nf * (nf + 2.0))).abs() < 1e-12);
        }
    }

    #[test]
    fn dicke_even_and_growing() {
        let n = 10;
        let mut prev = dicke_variance_closed_form(n, 0.2, 1.0, 0.0);
        for k in 1..157 {
            let jt = 0.01 * k as f64;
            let v = dicke_variance_closed_form(n, 0.2, 1.0, jt);
            assert_eq!(v, dicke_variance_closed_form(n, 0.2, 1.0, -jt));
            assert!(v > prev);
            prev = v;
        }
        assert!(dicke_variance_closed_form(n, 0.2, 1.0, std::f64::consts::FRAC_PI_2 - 1e-6) > 1e9);
    }
}
