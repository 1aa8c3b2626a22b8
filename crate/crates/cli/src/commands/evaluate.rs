use dicke_control::dicke::CollectiveBasis;
use dicke_control::protocol::CostModel;
use serde_json::json;

use super::Context;
use crate::config::EvaluateConfig;
use crate::error::CliResult;
use crate::output::{cell, STEPS_HEADER};

pub fn run(ctx: &Context) -> CliResult<()> {
    let (cfg, bytes) = ctx.load::<EvaluateConfig>("evaluate")?;
    ctx.execute("evaluate", Some(&bytes), ctx.seed.unwrap_or(0), |run, results| {
        let prep = cfg.preparation();
        let params = cfg.protocol.resolve(ctx.base_dir())?;
        let basis = CollectiveBasis::new(prep.n_spins)?;
        let model = CostModel::new(basis, prep.rates()?, prep.duration()?, prep.task())?;
        let res = model.cost(&params)?;
        let n = prep.n_spins as f64;
        let scaled = res.variance * n;
        let within = cfg
            .reference_scaled_variance
            .map(|r| !res.divergent && (scaled - r).abs() <= cfg.rel_tolerance * r + cfg.abs_tolerance);
        *results = json!({
            "n_spins": prep.n_spins,
            "variance": res.variance,
            "scaled_variance": scaled,
            "trace_loss": res.trace_loss,
            "divergent": res.divergent,
            "identity_steps": params.identity_steps(),
            "reference_scaled_variance": cfg.reference_scaled_variance,
            "within_tolerance": within,
        });
        run.write_json("evaluation.json", results)?;

        let alg = basis.algebra();
        let jz = alg.jz();
        let jz2 = jz * jz;
        let mut steps = run.csv("steps.csv", &STEPS_HEADER)?;
        for (k, state) in model.trajectory(&params)?.iter().enumerate() {
            let (phi, delta) = match k {
                0 => (String::new(), String::new()),
                _ => (cell(params.steps[k - 1].phi), cell(params.steps[k - 1].delta)),
            };
            steps.write_record([
                k.to_string(),
                phi,
                delta,
                cell(state.trace()),
                cell(state.purity()),
                cell(state.expect(jz)),
                cell(state.expect(&jz2)),
            ])?;
        }
        steps.flush()?;

        if res.divergent {
            println!("N = {}: divergent variance (vanishing signal slope)", prep.n_spins);
        } else {
            println!(
                "N = {}: N (dbeta)^2 = {scaled:.6}, (dbeta)^2 = {:.6e}, trace loss = {:.4}",
                prep.n_spins, res.variance, res.trace_loss
            );
        }
        let identity = params.identity_steps();
        if !identity.is_empty() {
            println!("steps without a gate: {identity:?}");
        }
        Ok(())
    })
}
