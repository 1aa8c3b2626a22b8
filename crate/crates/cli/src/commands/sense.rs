use dicke_control::dicke::{CollectiveBasis, SymmetricDensity};
use dicke_control::protocol::{CostModel, Observable, SensingTask};
use dicke_control::sensing::{
    brute_force_lindblad, collective_operators_full, dephasing_model_full, dicke_variance_closed_form,
    embed_symmetric, ghz_sensing_probe, ghz_variance_closed_form, parity_x_full, pi_to_full, run_scenarios,
    uniform_grid, DephasingConfig, Integrator, Scenario, ScenarioRecord, TIMESERIES_CSV_HEADER,
};
use dicke_control::{CMatrix, C64};
use serde_json::json;

use super::Context;
use crate::config::{ProbeSource, SenseConfig};
use crate::error::CliResult;
use crate::output::cell;

/// Reference column of ideal probes. The Dicke closed form describes
/// dephasing followed by the field rotation, and its rate is the coherence
/// decay rate, half the master-equation rate.
fn reference(probe: &ProbeSource, n: usize, gamma: f64, jt: f64) -> Option<f64> {
    match probe {
        ProbeSource::Ghz => Some(ghz_variance_closed_form(n, gamma, 1.0, jt)),
        ProbeSource::Dicke => Some(dicke_variance_closed_form(n, 0.5 * gamma, jt, jt)),
        ProbeSource::Protocol { .. } => None,
    }
}

fn reference_column(probe: &ProbeSource) -> Option<&'static str> {
    match probe {
        ProbeSource::Ghz => Some("closed_form"),
        ProbeSource::Dicke => Some("sequential_closed_form"),
        ProbeSource::Protocol { .. } => None,
    }
}

/// Variances from the master equation on the full `2^N` space, with the
/// slope `d<M>/d(Jt) = Tr(M L[rho])` taken from the full generator.
fn full_space_variances(
    probe: &SymmetricDensity,
    task: &SensingTask,
    gamma: f64,
    grid: &[f64],
    integrator: Integrator,
) -> CliResult<Vec<f64>> {
    let n = probe.basis().n_spins();
    let (h, jumps) = dephasing_model_full(n, task.field_axis, 1.0, gamma)?;
    let states = brute_force_lindblad(n, &h, &jumps, &pi_to_full(&embed_symmetric(probe))?, grid, integrator)?;
    let m = match task.observable {
        Observable::ParityX => CMatrix::from(&parity_x_full(n)?),
        Observable::JzSquared => {
            let [_, _, jz] = collective_operators_full(n)?;
            let jz = CMatrix::from(&jz);
            &jz * &jz
        }
    };
    let m2 = &m * &m;
    let h = CMatrix::from(&h);
    let jumps: Vec<CMatrix> = jumps.iter().map(CMatrix::from).collect();
    let minus_i = C64::new(0.0, -1.0);
    Ok(states
        .iter()
        .map(|rho| {
            let mut l = (&h * rho - rho * &h) * minus_i;
            for a in &jumps {
                let ada = a.adjoint() * a;
                l += a * rho * a.adjoint() - (&ada * rho + rho * &ada) * C64::new(0.5, 0.0);
            }
            let signal = (&m * rho).trace().re;
            let second = (&m2 * rho).trace().re;
            let slope = (&m * &l).trace().re;
            let tau = if task.normalize_before_measure { rho.trace().re } else { 1.0 };
            (tau * second - signal * signal) / (slope * slope)
        })
        .collect())
}

/// Writes one `timeseries_gphi<rate>.csv` per dephasing rate.
pub fn run(ctx: &Context) -> CliResult<()> {
    let (cfg, bytes) = ctx.load::<SenseConfig>("sense")?;
    ctx.execute("sense", Some(&bytes), ctx.seed.unwrap_or(0), |run, results| {
        let task = cfg.task.task(cfg.normalize_before_measure);
        let n = cfg.n_spins;
        let basis = CollectiveBasis::new(n)?;
        let probe = match &cfg.probe {
            ProbeSource::Protocol {
                protocol,
                cooperativity,
                gamma_over_kappa,
                gate_duration_gt,
            } => {
                let prep = crate::config::PreparationConfig {
                    n_spins: n,
                    cooperativity: *cooperativity,
                    gamma_over_kappa: *gamma_over_kappa,
                    gate_duration_gt: *gate_duration_gt,
                    task: cfg.task,
                    normalize_before_measure: cfg.normalize_before_measure,
                    allow_large_n: true,
                };
                let model = CostModel::new(basis, prep.rates()?, prep.duration()?, task)?;
                let params = protocol.resolve(ctx.base_dir())?;
                results["preparation_variance"] = json!(model.cost(&params)?.variance);
                model.rotated_probe(&params)?
            }
            ProbeSource::Ghz => ghz_sensing_probe(n)?,
            ProbeSource::Dicke => SymmetricDensity::dicke(basis, n / 2)?,
        };
        let grid = uniform_grid(cfg.t_max, cfg.t_steps)?;
        let scenarios: Vec<Scenario> = cfg
            .gamma_phi_over_j
            .iter()
            .map(|&g| Scenario {
                name: format!("gphi{g}"),
                probe: probe.clone(),
                task,
                config: DephasingConfig {
                    gamma_phi_over_j: g,
                    field_axis: task.field_axis,
                    t_grid: grid.clone(),
                    integrator: cfg.integrator,
                },
            })
            .collect();

        let mut header: Vec<&str> = TIMESERIES_CSV_HEADER.to_vec();
        header.extend(reference_column(&cfg.probe));
        if cfg.oracle {
            header.push("oracle_variance");
        }
        let mut records = Vec::new();
        for (scenario, series) in scenarios.iter().zip(run_scenarios(&scenarios)) {
            let points = series?;
            let gamma = scenario.config.gamma_phi_over_j;
            let oracle = match cfg.oracle {
                true => Some(full_space_variances(&probe, &task, gamma, &grid, cfg.integrator)?),
                false => None,
            };
            let file = format!("timeseries_{}.csv", scenario.name);
            let mut w = run.csv(&file, &header)?;
            for (k, p) in points.iter().enumerate() {
                let mut row = vec![cell(p.jt), cell(p.variance), cell(p.trace), cell(p.purity)];
                row.extend(reference(&cfg.probe, n, gamma, p.jt).map(cell));
                row.extend(oracle.as_ref().map(|o| cell(o[k])));
                w.write_record(&row)?;
            }
            w.flush()?;
            let mut record = json!(ScenarioRecord::new(scenario, &points, file));
            if let Some(o) = &oracle {
                let dev = points
                    .iter()
                    .zip(o)
                    .filter(|(p, _)| !p.divergent)
                    .map(|(p, v)| (p.variance - v).abs())
                    .fold(0.0, f64::max);
                record["oracle_max_abs_deviation"] = json!(dev);
            }
            records.push(record);
            results["scenarios"] = json!(records);
        }
        Ok(())
    })
}
