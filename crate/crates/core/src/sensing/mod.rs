//! Signal acquisition under a field with local dephasing.
//!
//! States evolve under `J J_axis` plus local dephasing with jump operators
//! `sigma_z/2` at rate `gamma_phi`. Time is measured in units of `1/J`, so
//! the field coupling is one and rates are given as `gamma_phi / J`.

mod brute;
mod closed_form;
mod integrate;
mod pi;

pub use brute::{
    brute_force_lindblad, collective_operators_full, dephasing_model_full, irrep_basis, local_sigma_z,
    parity_x_full, pi_to_full, trace_distance, MAX_BRUTE_FORCE_SPINS,
};
pub use closed_form::{
    dicke_jx2_closed_form, dicke_jx4_closed_form, dicke_variance_closed_form, ghz_variance_closed_form,
};
pub use integrate::{validate_grid, Integrator};
pub use pi::{degeneracy, embed_symmetric, extract_symmetric, rotate_blocks, PIDensity};

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dicke::{spin_algebra, CollectiveBasis, SymmetricDensity};
use crate::protocol::{is_divergent, FieldAxis, Observable, SensingTask, DIVERGENT_VARIANCE};
use crate::{Error, Result};
use pi::PiGenerator;

/// Largest change of the trace tolerated during propagation.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-8;

/// Column names of exported time series.
pub const TIMESERIES_CSV_HEADER: [&str; 4] = ["Jt", "variance", "trace", "purity"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DephasingConfig {
    pub gamma_phi_over_j: f64,
    pub field_axis: FieldAxis,
    /// Times in units of `1/J`, starting at 0.
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub integrator: Integrator,
}

impl DephasingConfig {
    pub fn new(gamma_phi_over_j: f64, field_axis: FieldAxis, t_grid: Vec<f64>) -> Self {
        Self {
            gamma_phi_over_j,
            field_axis,
            t_grid,
            integrator: Integrator::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_phi_over_j >= 0.0 && self.gamma_phi_over_j.is_finite()) {
            return Err(Error::invalid(format!(
                "dephasing rate must be finite and non-negative, got {}",
                self.gamma_phi_over_j
            )));
        }
        validate_grid(&self.t_grid)?;
        self.integrator.validate()
    }
}

/// `n + 1` equally spaced times from 0 to `t_max`.
pub fn uniform_grid(t_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0 && t_max.is_finite()) || n == 0 {
        return Err(Error::invalid("grid needs a positive end time and at least one step"));
    }
    Ok((0..=n).map(|k| t_max * k as f64 / n as f64).collect())
}

fn propagate_with(gen: &PiGenerator, state: &PIDensity, t_grid: &[f64], integrator: Integrator) -> Result<Vec<PIDensity>> {
    if state.n_spins() != gen.template().n_spins() {
        return Err(Error::BasisMismatch {
            expected: gen.template().n_spins(),
            found: state.n_spins(),
        });
    }
    let tr0 = state.trace();
    let check = |y: &[crate::C64]| {
        let tr = PIDensity::from_flat(state, y).trace();
        if (tr - tr0).abs() > TRACE_DRIFT_LIMIT {
            return Err(Error::Numerical(format!("trace drifted from {tr0} to {tr}")));
        }
        Ok(())
    };
    let ys = integrate::integrate(|y, dy| gen.apply(y, dy), state.to_flat(), t_grid, integrator, check)?;
    Ok(ys.iter().map(|y| PIDensity::from_flat(state, y)).collect())
}

/// Evolves a block state under the field and local dephasing and returns it
/// at every grid time.
pub fn pi_propagate(state: &PIDensity, cfg: &DephasingConfig) -> Result<Vec<PIDensity>> {
    cfg.validate()?;
    let gen = PiGenerator::new(state.n_spins(), cfg.field_axis, 1.0, cfg.gamma_phi_over_j)?;
    propagate_with(&gen, state, &cfg.t_grid, cfg.integrator)
}

/// Dephasing for time `t` without field, followed by the noiseless rotation
/// `exp(-i angle J_axis)`.
pub fn dephase_then_rotate(
    state: &PIDensity,
    gamma_phi: f64,
    t: f64,
    axis: FieldAxis,
    angle: f64,
    integrator: Integrator,
) -> Result<PIDensity> {
    if !(gamma_phi >= 0.0 && gamma_phi.is_finite() && t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid("dephasing rate and time must be finite and non-negative"));
    }
    let dephased = if t > 0.0 {
        let gen = PiGenerator::new(state.n_spins(), axis, 0.0, gamma_phi)?;
        propagate_with(&gen, state, &[0.0, t], integrator)?.pop().expect("two grid points")
    } else {
        state.clone()
    };
    Ok(rotate_blocks(&dephased, axis, angle))
}

/// Estimation variance of a block state for a measurement task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiCost {
    pub variance: f64,
    pub signal: f64,
    pub slope: f64,
    pub trace: f64,
    pub divergent: bool,
}

/// Full-space expectation `Tr(M rho)` of a measurement observable.
pub fn pi_expectation(state: &PIDensity, obs: Observable) -> f64 {
    match obs {
        Observable::ParityX => state.parity_x(),
        Observable::JzSquared => state.expect(|tj, b| {
            let j = tj as f64 / 2.0;
            (0..=tj).map(|a| (a as f64 - j).powi(2) * b[(a, a)].re).sum()
        }),
    }
}

fn expect_observable_squared(state: &PIDensity, obs: Observable) -> f64 {
    match obs {
        Observable::ParityX => state.trace(),
        Observable::JzSquared => state.expect(|tj, b| {
            let j = tj as f64 / 2.0;
            (0..=tj).map(|a| (a as f64 - j).powi(4) * b[(a, a)].re).sum()
        }),
    }
}

/// `(tau <M^2> - <M>^2) / (d<M>)^2` with `d<M> = <M>` evaluated on `derivative`,
/// and `tau = Tr rho` when the task normalizes, else one.
fn variance_with_slope(state: &PIDensity, derivative: &PIDensity, task: &SensingTask) -> PiCost {
    let obs = task.observable;
    let signal = pi_expectation(state, obs);
    let second = expect_observable_squared(state, obs);
    let slope = pi_expectation(derivative, obs);
    let trace = state.trace();
    let tau = if task.normalize_before_measure { trace } else { 1.0 };
    let num = tau * second - signal * signal;
    let variance = num / (slope * slope);
    let divergent = is_divergent(slope, num, tau * second, variance);
    PiCost {
        variance: if divergent { DIVERGENT_VARIANCE } else { variance },
        signal,
        slope,
        trace,
        divergent,
    }
}

/// Variance for a further rotation about the field axis: the slope is taken
/// from `-i [J_axis, rho]` only.
pub fn pi_rotation_variance(state: &PIDensity, task: &SensingTask) -> Result<PiCost> {
    task.validate()?;
    let gen = PiGenerator::new(state.n_spins(), task.field_axis, 1.0, 0.0)?;
    Ok(variance_with_slope(state, &gen.apply_state(state), task))
}

/// One sample of an acquisition curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesPoint {
    pub jt: f64,
    pub variance: f64,
    pub trace: f64,
    pub purity: f64,
    pub signal: f64,
    /// `d<M>/d(Jt)` under the full generator.
    pub slope: f64,
    pub divergent: bool,
}

/// `(Delta beta)^2` over time for a probe evolving under the field and
/// dephasing. The slope is the total time derivative of `<M>`, so the
/// dephasing contribution to the signal change is included.
///
/// The probe is used as given; pass the output of
/// [`crate::protocol::CostModel::rotated_probe`] to start at the working point
/// of the preparation protocol.
pub fn variance_timeseries(probe: &SymmetricDensity, task: &SensingTask, cfg: &DephasingConfig) -> Result<Vec<TimeSeriesPoint>> {
    task.validate()?;
    cfg.validate()?;
    if task.field_axis != cfg.field_axis {
        return Err(Error::invalid(format!(
            "task field axis {:?} differs from the dephasing configuration {:?}",
            task.field_axis, cfg.field_axis
        )));
    }
    let gen = PiGenerator::new(probe.basis().n_spins(), cfg.field_axis, 1.0, cfg.gamma_phi_over_j)?;
    let states = propagate_with(&gen, &embed_symmetric(probe), &cfg.t_grid, cfg.integrator)?;
    Ok(cfg
        .t_grid
        .iter()
        .zip(&states)
        .map(|(&jt, st)| {
            let c = variance_with_slope(st, &gen.apply_state(st), task);
            TimeSeriesPoint {
                jt,
                variance: c.variance,
                trace: c.trace,
                purity: st.purity(),
                signal: c.signal,
                slope: c.slope,
                divergent: c.divergent,
            }
        })
        .collect())
}

/// GHZ state rotated by `pi/(2N)` about `z`, the parity working point.
pub fn ghz_sensing_probe(n_spins: usize) -> Result<SymmetricDensity> {
    let basis = CollectiveBasis::new(n_spins)?;
    let ghz = SymmetricDensity::ghz(basis);
    let m = spin_algebra(n_spins).z_conjugate(ghz.matrix(), std::f64::consts::PI / (2.0 * n_spins as f64));
    SymmetricDensity::from_matrix(basis, m)
}

/// Variance of `|D_{N/2}>` in the dephase-then-rotate model, simulated on the
/// block representation; `gamma_phi_master` is the master-equation rate.
pub fn dicke_sequential_variance(
    n_spins: usize,
    gamma_phi_master: f64,
    t: f64,
    jt: f64,
    integrator: Integrator,
) -> Result<PiCost> {
    if n_spins % 2 != 0 {
        return Err(Error::invalid("the balanced Dicke state needs even N"));
    }
    let basis = CollectiveBasis::new(n_spins)?;
    let dicke = embed_symmetric(&SymmetricDensity::dicke(basis, n_spins / 2)?);
    let state = dephase_then_rotate(&dicke, gamma_phi_master, t, FieldAxis::Y, jt, integrator)?;
    pi_rotation_variance(&state, &SensingTask::jz_squared())
}

/// A probe and the conditions of one acquisition curve.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub probe: SymmetricDensity,
    pub task: SensingTask,
    pub config: DephasingConfig,
}

/// Runs independent scenarios in parallel; results keep the input order.
pub fn run_scenarios(scenarios: &[Scenario]) -> Vec<Result<Vec<TimeSeriesPoint>>> {
    scenarios
        .par_iter()
        .map(|s| variance_timeseries(&s.probe, &s.task, &s.config))
        .collect()
}

/// Manifest entry describing one exported curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub name: String,
    pub n_spins: usize,
    pub gamma_phi_over_j: f64,
    pub field_axis: FieldAxis,
    pub observable: Observable,
    pub normalize_before_measure: bool,
    pub file: String,
    pub points: usize,
    pub divergent_points: usize,
    pub initial_variance: f64,
}

impl ScenarioRecord {
    pub fn new(scenario: &Scenario, points: &[TimeSeriesPoint], file: impl Into<String>) -> Self {
        Self {
            name: scenario.name.clone(),
            n_spins: scenario.probe.basis().n_spins(),
            gamma_phi_over_j: scenario.config.gamma_phi_over_j,
            field_axis: scenario.config.field_axis,
            observable: scenario.task.observable,
            normalize_before_measure: scenario.task.normalize_before_measure,
            file: file.into(),
            points: points.len(),
            divergent_points: points.iter().filter(|p| p.divergent).count(),
            initial_variance: points.first().map_or(f64::NAN, |p| p.variance),
        }
    }
}

/// Writes `Jt, variance, trace, purity` rows with a header line.
pub fn write_timeseries_csv<W: Write>(writer: W, points: &[TimeSeriesPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TIMESERIES_CSV_HEADER)?;
    for p in points {
        w.write_record([p.jt, p.variance, p.trace, p.purity].map(|x| format!("{x:e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn random_symmetric(n: usize, seed: u64) -> SymmetricDensity {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = n + 1;
        let a = crate::CMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let rho = &a * a.adjoint();
        let tr = rho.trace().re;
        SymmetricDensity::from_matrix(CollectiveBasis::new(n).unwrap(), rho / C64::new(tr, 0.0)).unwrap()
    }

    #[test]
    fn lossless_evolution_is_block_rotation() {
        let n = 6;
        let probe = random_symmetric(n, 4);
        let mut pi = embed_symmetric(&probe);
        // Populate a lower block too.
        *pi.block_mut(2).unwrap() = crate::CMatrix::from_fn(3, 3, |r, c| C64::new(if r == c { 0.01 } else { 0.0 }, 0.0));
        for axis in [FieldAxis::Z, FieldAxis::Y] {
            let grid = uniform_grid(2.0, 8).unwrap();
            let cfg = DephasingConfig::new(0.0, axis, grid.clone());
            let states = pi_propagate(&pi, &cfg).unwrap();
            for (t, st) in grid.iter().zip(&states) {
                let exact = rotate_blocks(&pi, axis, *t);
                assert!(st.max_abs_diff(&exact) < 1e-10, "axis {axis:?} t {t}: {}", st.max_abs_diff(&exact));
            }
        }
    }

    #[test]
    fn trace_and_hermiticity_are_kept() {
        let probe = random_symmetric(8, 9);
        let cfg = DephasingConfig::new(1.0, FieldAxis::Y, uniform_grid(2.0, 10).unwrap());
        let states = pi_propagate(&embed_symmetric(&probe), &cfg).unwrap();
        let mut purity = f64::INFINITY;
        for st in &states {
            assert!((st.trace() - 1.0).abs() < 1e-10);
            assert!(st.hermiticity_error() < 1e-12);
            assert!(st.purity() <= purity + 1e-12);
            purity = st.purity();
        }
        assert!(states.last().unwrap().purity() < 0.9 * states[0].purity());
    }

    #[test]
    fn ghz_series_matches_closed_form() {
        let n = 10;
        let cfg = DephasingConfig::new(0.1, FieldAxis::Z, uniform_grid(0.6, 30).unwrap());
        let series = variance_timeseries(&ghz_sensing_probe(n).unwrap(), &SensingTask::parity(), &cfg).unwrap();
        for p in &series {
            let exact = ghz_variance_closed_form(n, 0.1, 1.0, p.jt);
            if p.divergent {
                continue;
            }
            assert!((p.variance - exact).abs() < 1e-6 * exact, "Jt {}: {} vs {exact}", p.jt, p.variance);
        }
        assert!(!series[0].divergent);
    }

    #[test]
    fn task_axis_must_match() {
        let cfg = DephasingConfig::new(0.1, FieldAxis::Y, vec![0.0, 1.0]);
        assert!(variance_timeseries(&ghz_sensing_probe(4).unwrap(), &SensingTask::parity(), &cfg).is_err());
        let bad = DephasingConfig::new(-0.1, FieldAxis::Z, vec![0.0, 1.0]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn csv_layout() {
        let p = TimeSeriesPoint {
            jt: 0.5,
            variance: 0.01,
            trace: 1.0,
            purity: 0.9,
            signal: 0.0,
            slope: 1.0,
            divergent: false,
        };
        let mut buf = Vec::new();
        write_timeseries_csv(&mut buf, &[p]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "Jt,variance,trace,purity");
        assert_eq!(text.lines().count(), 2);
    }
}
