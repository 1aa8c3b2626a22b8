use dicke_control::gpg::{invert_zeta_to_eta, round_trip_residual, sin2_pulse};
use serde_json::json;

use super::Context;
use crate::config::{check_detuning_count, PulseConfig};
use crate::error::{CliError, CliResult};

/// Writes `pulse_step<j>.csv` with the effective drive `zeta(t)` and the
/// lab-frame drive `eta(t)` of every gate.
pub fn run(ctx: &Context) -> CliResult<()> {
    let (cfg, bytes) = ctx.load::<PulseConfig>("pulse")?;
    ctx.execute("pulse", Some(&bytes), ctx.seed.unwrap_or(0), |run, results| {
        let params = cfg.protocol.resolve(ctx.base_dir())?;
        check_detuning_count(&params, &cfg.drive_detuning)?;
        let kappa = cfg.kappa()?;
        let mut steps = Vec::new();
        for (j, (step, &detuning)) in params.steps.iter().zip(&cfg.drive_detuning).enumerate() {
            let at_step = |e: dicke_control::Error| CliError::from(e).context(format!("step {}", j + 1));
            let zeta = sin2_pulse(step.phi, step.delta, cfg.gate_duration_gt, cfg.samples).map_err(at_step)?;
            let pulse = invert_zeta_to_eta(&zeta, step.delta, kappa, detuning).map_err(at_step)?;
            let residual = round_trip_residual(&pulse, step.delta, kappa).map_err(at_step)?;
            let file = format!("pulse_step{}.csv", j + 1);
            pulse.write_csv(run.file(&file)?)?;
            let max_eta = pulse.eta.as_ref().map_or(0.0, |e| e.iter().map(|z| z.norm()).fold(0.0, f64::max));
            log::info!("step {}: max |zeta| = {:.4}, round-trip residual {residual:.2e}", j + 1, pulse.max_zeta());
            steps.push(json!({
                "step": j + 1,
                "phi": step.phi,
                "delta": step.delta,
                "drive_detuning": detuning,
                "max_zeta": pulse.max_zeta(),
                "max_eta": max_eta,
                "round_trip_residual": residual,
                "file": file,
            }));
            results["steps"] = json!(steps);
        }
        results["gate_duration_gt"] = json!(cfg.gate_duration_gt);
        results["kappa"] = json!(kappa);
        results["quoted_scaled_variance"] = json!(cfg.quoted_scaled_variance);
        Ok(())
    })
}
