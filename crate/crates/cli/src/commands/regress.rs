use dicke_control::gpg::GateDuration;
use serde_json::json;

use super::Context;
use crate::config::{self, RegressConfig};
use crate::error::{CliError, CliResult};
use crate::output::{cell, REGRESSION_HEADER};

/// Evaluates every fixture row; exits with the tolerance code if any row
/// misses its tabulated value. Runs on the bundled tables without a config.
pub fn run(ctx: &Context) -> CliResult<()> {
    let (cfg, bytes) = match ctx.config.as_deref() {
        Some(path) => {
            let (c, b) = config::load::<RegressConfig>(path)?;
            (c, Some(b))
        }
        None => (RegressConfig::default(), None),
    };
    ctx.execute("regress", bytes.as_deref(), ctx.seed.unwrap_or(0), |run, results| {
        let mut out = run.csv("regression.csv", &REGRESSION_HEADER)?;
        let mut tables = Vec::new();
        let (mut total, mut failed) = (0, Vec::new());
        for table_ref in &cfg.tables {
            let table = table_ref.load(ctx.base_dir())?;
            let rows = table.evaluate(GateDuration::finite(table.gate_duration_gt), cfg.normalize_before_measure)?;
            for (row, ev) in table.rows.iter().zip(&rows) {
                out.write_record([
                    table.name.clone(),
                    row.n_spins.to_string(),
                    cell(row.cooperativity),
                    cell(row.gamma_over_kappa),
                    cell(row.scaled_variance),
                    cell(ev.scaled_variance),
                    cell(ev.trace_loss),
                    ev.divergent.to_string(),
                    ev.passed.to_string(),
                ])?;
                let verdict = if ev.passed { "ok" } else { "FAIL" };
                println!(
                    "{verdict:4} {} {}: {:.4} (tabulated {})",
                    table.name, ev.label, ev.scaled_variance, ev.target
                );
                if !ev.passed {
                    failed.push(format!("{} {}", table.name, ev.label));
                }
            }
            total += rows.len();
            tables.push(json!({
                "name": table.name,
                "rows": rows.len(),
                "passed": rows.iter().filter(|r| r.passed).count(),
                "rel_tolerance": table.rel_tolerance,
                "abs_tolerance": table.abs_tolerance,
            }));
        }
        out.flush()?;
        *results = json!({ "tables": tables, "rows": total, "failed": failed });
        println!("{} of {total} rows within tolerance", total - failed.len());
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::Tolerance(format!("{} of {total} rows outside tolerance", failed.len())))
        }
    })
}
