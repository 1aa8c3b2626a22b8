use std::f64::consts::PI;

use dicke_control::dicke::{husimi_q, CollectiveBasis, SymmetricDensity};
use dicke_control::protocol::{CostModel, SensingTask};
use rayon::prelude::*;
use serde_json::json;

use super::Context;
use crate::config::QfuncConfig;
use crate::error::CliResult;
use crate::output::{cell, QFUNC_HEADER};

/// `Q` on a `theta x phi` grid; `theta` includes both poles, `phi` is periodic.
pub fn husimi_grid(state: &SymmetricDensity, theta: &[f64], phi: &[f64]) -> Vec<Vec<f64>> {
    theta
        .par_iter()
        .map(|&t| phi.iter().map(|&p| husimi_q(state, t, p)).collect())
        .collect()
}

/// `(N + 1)/(4 pi) * integral of Q sin(theta)`: trapezoid in `theta`,
/// rectangle rule in the periodic `phi`. Equals the state trace.
pub fn husimi_integral(n_spins: usize, theta: &[f64], q: &[Vec<f64>]) -> f64 {
    let dt = theta[1] - theta[0];
    let mut sum = 0.0;
    for (k, (&t, row)) in theta.iter().zip(q).enumerate() {
        let w = if k == 0 || k == theta.len() - 1 { 0.5 } else { 1.0 };
        sum += w * t.sin() * row.iter().sum::<f64>() * 2.0 * PI / row.len() as f64;
    }
    (n_spins + 1) as f64 / (4.0 * PI) * sum * dt
}

/// Writes `qfunc_step<k>.csv` for the state after `U_0` (`k = 0`) and after
/// each protocol step.
pub fn run(ctx: &Context) -> CliResult<()> {
    let (cfg, bytes) = ctx.load::<QfuncConfig>("qfunc")?;
    ctx.execute("qfunc", Some(&bytes), ctx.seed.unwrap_or(0), |run, results| {
        let params = cfg.protocol.resolve(ctx.base_dir())?;
        let basis = CollectiveBasis::new(cfg.n_spins)?;
        // The trajectory does not depend on the readout.
        let model = CostModel::new(basis, cfg.rates()?, cfg.duration()?, SensingTask::parity())?;
        let theta: Vec<f64> = (0..cfg.theta_points)
            .map(|k| PI * k as f64 / (cfg.theta_points - 1) as f64)
            .collect();
        let phi: Vec<f64> = (0..cfg.phi_points)
            .map(|k| 2.0 * PI * k as f64 / cfg.phi_points as f64)
            .collect();
        let mut steps = Vec::new();
        for (k, state) in model.trajectory(&params)?.iter().enumerate() {
            let q = husimi_grid(state, &theta, &phi);
            let file = format!("qfunc_step{k}.csv");
            let mut w = run.csv(&file, &QFUNC_HEADER)?;
            for (&t, row) in theta.iter().zip(&q) {
                for (&p, &v) in phi.iter().zip(row) {
                    w.write_record([cell(t), cell(p), cell(v)])?;
                }
            }
            w.flush()?;
            let flat = q.iter().flatten();
            let q_max = flat.clone().copied().fold(f64::NEG_INFINITY, f64::max);
            let q_min = flat.copied().fold(f64::INFINITY, f64::min);
            steps.push(json!({
                "step": k,
                "file": file,
                "trace": state.trace(),
                "integral": husimi_integral(cfg.n_spins, &theta, &q),
                "q_max": q_max,
                "q_min": q_min,
            }));
            results["steps"] = json!(steps);
        }
        Ok(())
    })
}
