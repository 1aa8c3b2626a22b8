use std::f64::consts::PI;

use dicke_control::dicke::{euler_rotation, husimi_q, parity_x, spin_algebra, CollectiveBasis, SymmetricDensity};
use dicke_control::gpg::{
    adiabatic_phases, apply_channel, detuning_band, finite_time_phases, rates_from_cooperativity, sin2_pulse,
    GateDuration, GpgParams, NoiseRates,
};
use dicke_control::optimizer::apply_sign_and_bounds;
use dicke_control::protocol::{
    jz2_moments_at, jz2_static_moments, CostModel, FieldAxis, GateStep, ProtocolParams, SensingTask,
};
use dicke_control::sensing::{embed_symmetric, ghz_variance_closed_form, pi_propagate, DephasingConfig};
use dicke_control::{CMatrix, C64};
use proptest::prelude::*;

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn density(n: usize, entries: &[(f64, f64)]) -> SymmetricDensity {
    let d = n + 1;
    let a = CMatrix::from_fn(d, d, |i, j| {
        let (re, im) = entries[(i * d + j) % entries.len()];
        C64::new(re + 0.1 * (i as f64 - j as f64), im)
    });
    let rho = &a * a.adjoint();
    let tr = rho.trace().re;
    SymmetricDensity::from_matrix(CollectiveBasis::new(n).unwrap(), rho / C64::new(tr, 0.0)).unwrap()
}

fn entries() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 7..40)
}

fn gate_params(phi: f64, delta: f64, rates: NoiseRates, duration: GateDuration) -> GpgParams {
    GpgParams { phi, delta, rates, duration }
}

fn protocol(angles: &[f64], phi: f64, delta: f64, beta: f64) -> ProtocolParams {
    ProtocolParams {
        theta0: [angles[0], angles[1], angles[2]],
        steps: vec![GateStep {
            theta: [angles[3], angles[4], angles[5]],
            phi,
            delta: delta * phi.signum(),
        }],
        beta,
        extra_final_rotation: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn angular_momentum_algebra(n in 1usize..=64) {
        let alg = spin_algebra(n);
        let (x, y, z) = (alg.jx(), alg.jy(), alg.jz());
        let i = C64::new(0.0, 1.0);
        prop_assert!(max_abs(&(x * y - y * x - z * i)) < 1e-12 * n as f64);
        prop_assert!(max_abs(&(y * z - z * y - x * i)) < 1e-12 * n as f64);
        prop_assert!(max_abs(&(z * x - x * z - y * i)) < 1e-12 * n as f64);
        let j = n as f64 / 2.0;
        let casimir = x * x + y * y + z * z - CMatrix::identity(n + 1, n + 1) * C64::new(j * (j + 1.0), 0.0);
        prop_assert!(max_abs(&casimir) < 1e-12 * (j * j).max(1.0));
    }

    #[test]
    fn rotations_are_unitary(n in 1usize..=40, a in -PI..PI, b in -PI..PI, c in -PI..PI) {
        let basis = CollectiveBasis::new(n).unwrap();
        let u = euler_rotation(basis, a, b, c);
        let err = u.matrix().adjoint() * u.matrix() - CMatrix::identity(n + 1, n + 1);
        prop_assert!(max_abs(&err) < 1e-12);
    }

    #[test]
    fn parity_flips_jz(n in 1usize..=64) {
        let basis = CollectiveBasis::new(n).unwrap();
        let p = parity_x(basis);
        let z = spin_algebra(n).jz().clone();
        let err = p.matrix() * &z * p.matrix() + &z;
        prop_assert!(max_abs(&err) < 1e-12);
    }

    #[test]
    fn husimi_is_non_negative(n in 1usize..=12, e in entries(), theta in 0.0..PI, phi in -PI..PI) {
        let rho = density(n, &e);
        prop_assert!(husimi_q(&rho, theta, phi) >= -1e-12);
    }

    #[test]
    fn phases_pair_hermitian(
        n in 1usize..=20,
        phi in 0.05..1.6f64,
        frac in 0.05..0.95f64,
        log_c in 1.0..6.0f64,
        log_r in -2.0..2.0f64,
        negative in any::<bool>(),
    ) {
        let basis = CollectiveBasis::new(n).unwrap();
        let rates = rates_from_cooperativity(10f64.powf(log_c), 10f64.powf(log_r)).unwrap();
        let s = if negative { -1.0 } else { 1.0 };
        let (lo, hi) = detuning_band(phi, 40.0, 1.0);
        let delta = lo + frac * (hi - lo);
        let ad = adiabatic_phases(basis, &gate_params(s * phi, s * delta, rates, GateDuration::Adiabatic)).unwrap();
        let duration = GateDuration::Finite { gt: 40.0, samples: 801 };
        let pulse = sin2_pulse(s * phi, s * delta, 40.0, 801).unwrap();
        let fin = finite_time_phases(basis, &gate_params(s * phi, s * delta, rates, duration), &pulse).unwrap();
        for p in [&ad, &fin] {
            let pairing = &p.phases + p.phases.adjoint();
            prop_assert!(max_abs(&pairing) < 1e-10 * max_abs(&p.phases).max(1.0));
        }
    }

    #[test]
    fn channel_preserves_positivity(
        n in 1usize..=20,
        phi in 0.05..1.6f64,
        delta in 0.05..5.0f64,
        log_c in 0.0..6.0f64,
        log_r in -2.0..2.0f64,
        e in entries(),
    ) {
        let basis = CollectiveBasis::new(n).unwrap();
        let rates = rates_from_cooperativity(10f64.powf(log_c), 10f64.powf(log_r)).unwrap();
        let gate = adiabatic_phases(basis, &gate_params(phi, delta, rates, GateDuration::Adiabatic)).unwrap();
        let factor = gate.factor();
        prop_assert!(dicke_control::dicke::min_hermitian_eigenvalue(&factor) > -1e-10);
        let rho = density(n, &e);
        let out = apply_channel(&gate, &rho).unwrap();
        prop_assert!(out.min_eigenvalue() > -1e-10);
        prop_assert!(out.hermiticity_error() < 1e-12);
        prop_assert!(out.trace() <= rho.trace() + 1e-12);
    }

    #[test]
    fn rates_round_trip(log_c in -1.0..8.0f64, log_r in -3.0..3.0f64) {
        let (c, r) = (10f64.powf(log_c), 10f64.powf(log_r));
        let rates = rates_from_cooperativity(c, r).unwrap();
        prop_assert!((rates.cooperativity() / c - 1.0).abs() < 1e-12);
        prop_assert!((rates.gamma_over_kappa() / r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jz2_moments_match_direct_rotation(n in 1usize..=16, e in entries(), beta in -PI..PI) {
        let rho = density(n, &e);
        let mu = jz2_static_moments(&rho);
        let (e2, e4, _) = jz2_moments_at(&mu, beta);
        let alg = spin_algebra(n);
        let rotated = alg.y_conjugate(rho.matrix(), beta);
        let z2 = alg.jz() * alg.jz();
        let direct2 = (&z2 * &rotated).trace().re;
        let direct4 = (&z2 * &z2 * &rotated).trace().re;
        let scale = (n * n) as f64;
        prop_assert!((e2 - direct2).abs() < 1e-10 * scale);
        prop_assert!((e4 - direct4).abs() < 1e-10 * scale * scale);
    }

    #[test]
    fn full_turns_leave_variance_unchanged(
        angles in prop::collection::vec(-PI..PI, 6),
        phi in 0.2..1.5f64,
        delta in 0.3..4.0f64,
        k in 0usize..6,
        jz2 in any::<bool>(),
    ) {
        let task = if jz2 { SensingTask::jz_squared() } else { SensingTask::parity() };
        let rates = rates_from_cooperativity(100.0, 1.0).unwrap();
        let model = CostModel::new(CollectiveBasis::new(6).unwrap(), rates, GateDuration::Adiabatic, task).unwrap();
        let p = protocol(&angles, phi, delta, 0.1);
        let mut shifted = angles.clone();
        shifted[k] += 2.0 * PI;
        let q = protocol(&shifted, phi, delta, 0.1);
        let (a, b) = (model.cost(&p).unwrap(), model.cost(&q).unwrap());
        prop_assert_eq!(a.divergent, b.divergent);
        prop_assert!((a.variance - b.variance).abs() <= 1e-12 * a.variance.max(1.0));
    }

    #[test]
    fn extra_rotation_equals_beta_shift(
        angles in prop::collection::vec(-PI..PI, 6),
        phi in 0.2..1.5f64,
        delta in 0.3..4.0f64,
        beta in -0.5..0.5f64,
        jz2 in any::<bool>(),
    ) {
        let task = if jz2 { SensingTask::jz_squared() } else { SensingTask::parity() };
        let rates = rates_from_cooperativity(1e3, 0.1).unwrap();
        let model = CostModel::new(CollectiveBasis::new(5).unwrap(), rates, GateDuration::Adiabatic, task).unwrap();
        let with_beta = protocol(&angles, phi, delta, beta);
        let mut with_extra = protocol(&angles, phi, delta, 0.0);
        with_extra.extra_final_rotation = Some(beta);
        let (a, b) = (model.cost(&with_beta).unwrap(), model.cost(&with_extra).unwrap());
        prop_assert!((a.variance - b.variance).abs() <= 1e-12 * a.variance.max(1.0));
    }

    #[test]
    fn normalization_irrelevant_without_loss(
        angles in prop::collection::vec(-PI..PI, 6),
        phi in 0.2..1.5f64,
        delta in 0.3..4.0f64,
        beta in -0.5..0.5f64,
    ) {
        let basis = CollectiveBasis::new(6).unwrap();
        let p = protocol(&angles, phi, delta, beta);
        for task in [SensingTask::parity(), SensingTask::jz_squared()] {
            let a = CostModel::new(basis, NoiseRates::lossless(), GateDuration::Adiabatic, task.normalized(false)).unwrap();
            let b = CostModel::new(basis, NoiseRates::lossless(), GateDuration::Adiabatic, task.normalized(true)).unwrap();
            let (x, y) = (a.cost(&p).unwrap().variance, b.cost(&p).unwrap().variance);
            prop_assert!((x - y).abs() <= 1e-10 * x.max(1.0));
        }
    }

    #[test]
    fn finite_bounds_hold(
        phi in -1.6..1.6f64,
        delta in -50.0..50.0f64,
        gt in 10.0..100.0f64,
    ) {
        let raw = vec![0.0, 0.0, 0.0, 0.1, 0.2, 0.3, phi, delta, 0.0];
        let p = apply_sign_and_bounds(&raw, GateDuration::finite(gt), 1.0, None);
        let s = &p.steps[0];
        prop_assert!(s.signs_consistent());
        let (lo, hi) = detuning_band(phi, gt, 1.0);
        if phi != 0.0 && hi > lo {
            prop_assert!(s.delta.abs() >= lo && s.delta.abs() <= hi);
        }
    }

    #[test]
    fn lossless_ghz_curve_is_flat(n in 2usize..=40, t in 0.0..3.0f64) {
        let v = ghz_variance_closed_form(n, 0.0, 1.0, t);
        let exact = 1.0 / (n * n) as f64;
        // Points where the closed form is 0/0 are skipped.
        prop_assume!(((n as f64) * t + PI / 2.0).sin().abs() > 1e-3);
        prop_assert!((v - exact).abs() < 1e-9 * exact);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn dephasing_preserves_trace_and_hermiticity(
        n in 2usize..=8,
        e in entries(),
        gamma in 0.0..1.0f64,
        y_axis in any::<bool>(),
    ) {
        let axis = if y_axis { FieldAxis::Y } else { FieldAxis::Z };
        let probe = density(n, &e);
        let cfg = DephasingConfig::new(gamma, axis, (0..=6).map(|k| 0.25 * k as f64).collect());
        let states = pi_propagate(&embed_symmetric(&probe), &cfg).unwrap();
        let mut purity = f64::INFINITY;
        for s in &states {
            prop_assert!((s.trace() - 1.0).abs() < 1e-10);
            prop_assert!(s.hermiticity_error() < 1e-12);
            prop_assert!(s.purity() <= purity + 1e-12);
            purity = s.purity();
        }
    }
}
