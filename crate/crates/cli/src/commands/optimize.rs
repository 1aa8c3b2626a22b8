use dicke_control::dicke::CollectiveBasis;
use dicke_control::optimizer::{continuation_scan, multi_start, RestartReport};
use dicke_control::protocol::CostModel;
use serde_json::json;

use super::Context;
use crate::config::OptimizeConfig;
use crate::error::{CliError, CliResult};
use crate::output::{cell, fit_scaling_exponent, SCALING_HEADER, SCAN_HEADER};

/// File-name label of a loss series.
fn series_label(c: f64, r: f64) -> String {
    if c.is_infinite() {
        "lossless".into()
    } else {
        format!("C{c}_gk{r}")
    }
}

pub fn run(ctx: &Context) -> CliResult<()> {
    let (cfg, bytes) = ctx.load::<OptimizeConfig>("optimize")?;
    let seed = ctx.seed.unwrap_or(cfg.optimizer.seed);
    ctx.execute("optimize", Some(&bytes), seed, |run, results| {
        let mut ocfg = cfg.optimizer.clone();
        ocfg.seed = seed;
        ocfg.threads = ctx.threads.or(ocfg.threads);
        let (duration, task, p) = (cfg.duration()?, cfg.task(), cfg.n_steps);
        let mut sizes = cfg.n_spins.clone();
        sizes.sort_unstable();

        let mut scan = run.csv("scan.csv", &SCAN_HEADER)?;
        let mut scaling = run.csv("scaling.csv", &SCALING_HEADER)?;
        let mut series_out = Vec::new();
        for (c, r, rates) in cfg.series()? {
            let label = series_label(c, r);
            log::info!("series {label}: N = {sizes:?}");
            let models = sizes
                .iter()
                .map(|&n| CostModel::new(CollectiveBasis::new(n)?, rates, duration, task))
                .collect::<dicke_control::Result<Vec<_>>>()?;
            let reports: Vec<RestartReport> = if cfg.continuation {
                continuation_scan(&models, p, &ocfg)?
            } else {
                models
                    .iter()
                    .map(|m| multi_start(m, p, &ocfg))
                    .collect::<dicke_control::Result<_>>()?
            };
            let mut points = Vec::new();
            for rep in &reports {
                let best = &rep.restarts[rep.best_index];
                let converged = rep.restarts.iter().filter(|s| s.converged).count();
                scan.write_record([
                    rep.n_spins.to_string(),
                    cell(c),
                    cell(r),
                    p.to_string(),
                    cell(rep.best_scaled_variance),
                    cell(rep.best_variance),
                    cell(best.trace_loss),
                    rep.restarts.len().to_string(),
                    converged.to_string(),
                ])?;
                let file = format!("best/N{}_{label}.json", rep.n_spins);
                run.write_json(&file, &rep.best)?;
                points.push(json!({
                    "n_spins": rep.n_spins,
                    "scaled_variance": rep.best_scaled_variance,
                    "trace_loss": best.trace_loss,
                    "all_divergent": rep.all_divergent,
                    "protocol": file,
                }));
            }
            scan.flush()?;
            let n: Vec<usize> = reports.iter().map(|r| r.n_spins).collect();
            let v: Vec<f64> = reports.iter().map(|r| r.best_variance).collect();
            let alpha = fit_scaling_exponent(&n, &v);
            if let Some(a) = alpha {
                let n_values = n.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" ");
                scaling.write_record([cell(c), cell(r), p.to_string(), cell(a), n.len().to_string(), n_values])?;
                scaling.flush()?;
                log::info!("series {label}: alpha = {a:.3}");
            }
            series_out.push(json!({
                "cooperativity": c,
                "gamma_over_kappa": r,
                "alpha": alpha,
                "points": points,
            }));
            results["series"] = json!(series_out);
            if let Some(rep) = reports.iter().find(|r| r.all_divergent) {
                return Err(CliError::Numerical(format!(
                    "series {label}, N = {}: every restart ended at a divergent variance",
                    rep.n_spins
                )));
            }
        }
        Ok(())
    })
}
