//! Multi-start BFGS over protocol parameters.

mod bfgs;
mod param;

pub use bfgs::{bfgs_minimize, BfgsOutcome, BfgsSettings, StopReason};
pub use param::{apply_sign_and_bounds, Parametrization};

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gpg::{detuning_band, GateDuration};
use crate::protocol::{CostModel, ProtocolParams, DIVERGENT_VARIANCE};
use crate::{Error, Result};

/// Initial draws per restart before accepting a divergent start.
const MAX_INITIAL_DRAWS: usize = 64;

/// Settings of a multi-start optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub bfgs: BfgsSettings,
    /// Number of random starts; `None` means `max(N, 20)`.
    pub n_restarts: Option<usize>,
    pub seed: u64,
    /// Optional interval per entry of the parameter vector.
    pub bounds: Option<Vec<Option<[f64; 2]>>>,
    /// Range of the log-uniform initial `|delta|` for adiabatic gates.
    pub delta_init: [f64; 2],
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Deterministic starts run after the random restarts.
    pub initial_guesses: Vec<ProtocolParams>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            bfgs: BfgsSettings::default(),
            n_restarts: None,
            seed: 0,
            bounds: None,
            delta_init: [0.1, 16.0],
            threads: None,
            initial_guesses: Vec::new(),
        }
    }
}

impl OptimizerConfig {
    pub fn restarts_for(&self, n_spins: usize) -> usize {
        self.n_restarts.unwrap_or(n_spins.max(20))
    }

    pub fn validate(&self) -> Result<()> {
        self.bfgs.validate()?;
        if self.n_restarts == Some(0) {
            return Err(Error::invalid("at least one restart is required"));
        }
        let [lo, hi] = self.delta_init;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::invalid(format!("invalid initial detuning range [{lo}, {hi}]")));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("thread count must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub index: usize,
    pub initial: ProtocolParams,
    /// Draws needed to find a start with a finite variance.
    pub initial_draws: usize,
    #[serde(rename = "final")]
    pub final_params: ProtocolParams,
    pub variance: f64,
    /// `N (Delta beta)^2`.
    pub scaled_variance: f64,
    pub trace_loss: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub divergent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartReport {
    pub n_spins: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub restarts: Vec<RestartSummary>,
    pub best_index: usize,
    pub best: ProtocolParams,
    pub best_variance: f64,
    pub best_scaled_variance: f64,
    /// Set when every restart ended on the divergent sentinel.
    pub all_divergent: bool,
}

fn objective(model: &CostModel, par: &Parametrization, u: &[f64]) -> (f64, Vec<f64>) {
    let sentinel = || (DIVERGENT_VARIANCE, vec![0.0; u.len()]);
    let Some(v) = par.decode(u) else {
        return sentinel();
    };
    let Ok(params) = ProtocolParams::from_vector(&v, None) else {
        return sentinel();
    };
    match model.evaluate(&params, true) {
        Ok(res) if !res.divergent => {
            let gu = par.pullback(u, &v, &res.gradient);
            (res.variance, gu)
        }
        _ => sentinel(),
    }
}

/// Random initial protocol vector: angles uniform in `[-pi, pi]`, `phi`
/// uniform in `[-pi/2, pi/2]`, `|delta|` log-uniform, `beta = 0`.
fn initial_vector(rng: &mut ChaCha8Rng, par: &Parametrization, cfg: &OptimizerConfig) -> Vec<f64> {
    let mut v = Vec::with_capacity(par.len());
    let angle = |rng: &mut ChaCha8Rng| rng.random_range(-PI..PI);
    for _ in 0..3 {
        v.push(angle(rng));
    }
    for _ in 0..par.n_steps {
        for _ in 0..3 {
            v.push(angle(rng));
        }
        let phi = rng.random_range(-PI / 2.0..PI / 2.0);
        let [mut lo, mut hi] = cfg.delta_init;
        if let GateDuration::Finite { gt, .. } = par.duration {
            (lo, hi) = detuning_band(phi, gt, par.g);
        }
        let mag = if hi > lo {
            (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
        } else {
            lo
        };
        v.push(phi);
        v.push(mag * phi.signum());
    }
    v.push(0.0);
    // Entries with explicit bounds start uniformly inside them.
    for (k, b) in par.bounds.iter().enumerate() {
        if let Some([lo, hi]) = b {
            v[k] = rng.random_range(*lo..*hi);
        }
    }
    v
}

/// Runs one BFGS from `initial` and reports the exported result.
pub fn optimize_from(
    model: &CostModel,
    initial: &ProtocolParams,
    cfg: &OptimizerConfig,
) -> Result<(ProtocolParams, BfgsOutcome)> {
    let par = Parametrization::new(initial.n_steps(), model.duration, model.rates.g, cfg.bounds.as_deref())?;
    let u0 = par.encode(&initial.to_vector());
    let out = bfgs_minimize(|u| objective(model, &par, u), &u0, &cfg.bfgs);
    let v = par.decode(&out.x).unwrap_or_else(|| initial.to_vector());
    Ok((par.export(&v, initial.extra_final_rotation), out))
}

fn random_start(model: &CostModel, par: &Parametrization, cfg: &OptimizerConfig, index: usize) -> Result<(Vec<f64>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    // Random states of many spins often have a vanishing slope, where the
    // cost is flat at the sentinel and BFGS cannot move; redraw those.
    let mut draws = 0;
    loop {
        draws += 1;
        let v = initial_vector(&mut rng, par, cfg);
        if draws == MAX_INITIAL_DRAWS {
            return Ok((v, draws));
        }
        let p = ProtocolParams::from_vector(&v, None)?;
        if matches!(model.evaluate(&p, false), Ok(r) if !r.divergent) {
            return Ok((v, draws));
        }
    }
}

fn run_restart(model: &CostModel, n_steps: usize, cfg: &OptimizerConfig, index: usize) -> Result<RestartSummary> {
    let par = Parametrization::new(n_steps, model.duration, model.rates.g, cfg.bounds.as_deref())?;
    let n_random = cfg.restarts_for(model.basis.n_spins());
    let (v0, initial_draws) = match index.checked_sub(n_random) {
        None => random_start(model, &par, cfg, index)?,
        Some(k) => (par.export(&cfg.initial_guesses[k].to_vector(), None).to_vector(), 0),
    };
    let initial = par.export(&v0, None);
    let u0 = par.encode(&v0);
    let out = bfgs_minimize(|u| objective(model, &par, u), &u0, &cfg.bfgs);
    let v = par.decode(&out.x).unwrap_or(v0);
    let final_params = par.export(&v, None);
    let (variance, trace_loss, divergent) = match model.cost(&final_params) {
        Ok(r) => (r.variance, r.trace_loss, r.divergent),
        Err(_) => (DIVERGENT_VARIANCE, f64::NAN, true),
    };
    log::debug!(
        "restart {index}: variance {variance:.6e} after {} iterations ({:?})",
        out.iterations,
        out.stop
    );
    Ok(RestartSummary {
        index,
        initial,
        initial_draws,
        final_params,
        variance,
        scaled_variance: variance * model.basis.n_spins() as f64,
        trace_loss,
        iterations: out.iterations,
        evaluations: out.evaluations,
        converged: out.converged(),
        stop: out.stop,
        divergent,
    })
}

/// Independent BFGS runs from seeded random starts; restart `i` draws from
/// stream `i` of a ChaCha8 generator seeded with `cfg.seed`, so the report
/// does not depend on the thread count. Entries of `cfg.initial_guesses`
/// follow as additional restarts.
pub fn multi_start(model: &CostModel, n_steps: usize, cfg: &OptimizerConfig) -> Result<RestartReport> {
    cfg.validate()?;
    if n_steps == 0 {
        return Err(Error::invalid("multi-start needs at least one gate step"));
    }
    for g in &cfg.initial_guesses {
        if g.n_steps() != n_steps {
            return Err(Error::invalid(format!(
                "initial guess has {} steps, expected {n_steps}",
                g.n_steps()
            )));
        }
        g.validate_finite()?;
    }
    let n = cfg.restarts_for(model.basis.n_spins()) + cfg.initial_guesses.len();
    let work = || {
        (0..n)
            .into_par_iter()
            .map(|i| run_restart(model, n_steps, cfg, i))
            .collect::<Result<Vec<_>>>()
    };
    let restarts = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let best_index = restarts
        .iter()
        .min_by(|a, b| a.variance.total_cmp(&b.variance).then(a.index.cmp(&b.index)))
        .map(|r| r.index)
        .expect("at least one restart");
    let best = &restarts[best_index];
    Ok(RestartReport {
        n_spins: model.basis.n_spins(),
        n_steps,
        seed: cfg.seed,
        best: best.final_params.clone(),
        best_variance: best.variance,
        best_scaled_variance: best.scaled_variance,
        best_index,
        all_divergent: restarts.iter().all(|r| r.divergent),
        restarts,
    })
}

/// Number of distinct minima handed from one system size to the next.
const CONTINUATION_CARRY: usize = 3;

/// Multi-start over a series of models (typically increasing `N`), where
/// the best few distinct minima of each model seed the next one.
pub fn continuation_scan(models: &[CostModel], n_steps: usize, cfg: &OptimizerConfig) -> Result<Vec<RestartReport>> {
    let mut reports: Vec<RestartReport> = Vec::with_capacity(models.len());
    for model in models {
        let mut local = cfg.clone();
        if let Some(prev) = reports.last() {
            local.initial_guesses.extend(distinct_minima(prev, CONTINUATION_CARRY));
        }
        reports.push(multi_start(model, n_steps, &local)?);
    }
    Ok(reports)
}

/// Final protocols of the lowest non-divergent restarts with pairwise
/// distinct variances.
fn distinct_minima(report: &RestartReport, count: usize) -> Vec<ProtocolParams> {
    let mut runs: Vec<&RestartSummary> = report.restarts.iter().filter(|r| !r.divergent).collect();
    runs.sort_by(|a, b| a.variance.total_cmp(&b.variance).then(a.index.cmp(&b.index)));
    let mut out: Vec<&RestartSummary> = Vec::new();
    for r in runs {
        if out.len() == count {
            break;
        }
        if out.iter().all(|o| (o.variance - r.variance).abs() > 1e-6 * o.variance) {
            out.push(r);
        }
    }
    out.into_iter().map(|r| r.final_params.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::CollectiveBasis;
    use crate::gpg::NoiseRates;
    use crate::protocol::SensingTask;

    fn model(n: usize, duration: GateDuration) -> CostModel {
        CostModel::new(CollectiveBasis::new(n).unwrap(), NoiseRates::lossless(), duration, SensingTask::parity()).unwrap()
    }

    #[test]
    fn lossless_ghz_optimum() {
        let m = model(4, GateDuration::Adiabatic);
        let cfg = OptimizerConfig {
            seed: 3,
            ..Default::default()
        };
        let report = multi_start(&m, 1, &cfg).unwrap();
        assert_eq!(report.restarts.len(), 20);
        assert!((report.best_variance - 1.0 / 16.0).abs() < 1e-8, "{}", report.best_variance);
        let best = report.restarts.iter().map(|r| r.variance).fold(f64::INFINITY, f64::min);
        assert_eq!(best, report.best_variance);
        for r in &report.restarts {
            assert!(r.variance <= m.cost(&r.initial).map(|c| c.variance).unwrap_or(f64::INFINITY));
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let m = model(4, GateDuration::Adiabatic);
        let mk = |threads| OptimizerConfig {
            n_restarts: Some(4),
            seed: 17,
            threads,
            ..Default::default()
        };
        let a = multi_start(&m, 1, &mk(Some(1))).unwrap();
        let b = multi_start(&m, 1, &mk(Some(3))).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn finite_mode_respects_band() {
        let m = CostModel::new(
            CollectiveBasis::new(4).unwrap(),
            crate::gpg::rates_from_cooperativity(1e3, 0.1).unwrap(),
            GateDuration::Finite { gt: 20.0, samples: 801 },
            SensingTask::parity(),
        )
        .unwrap();
        let cfg = OptimizerConfig {
            n_restarts: Some(3),
            seed: 1,
            ..Default::default()
        };
        let report = multi_start(&m, 1, &cfg).unwrap();
        for r in &report.restarts {
            for s in &r.final_params.steps {
                let (lo, hi) = detuning_band(s.phi, 20.0, 1.0);
                assert!(s.signs_consistent());
                assert!(s.phi == 0.0 || (s.delta.abs() > lo && s.delta.abs() < hi));
            }
        }
        assert!(!report.all_divergent);
    }

    #[test]
    fn guesses_run_after_random_restarts() {
        let m = model(4, GateDuration::Adiabatic);
        let first = multi_start(&m, 1, &OptimizerConfig { n_restarts: Some(20), seed: 3, ..Default::default() }).unwrap();
        let cfg = OptimizerConfig {
            n_restarts: Some(1),
            seed: 99,
            initial_guesses: vec![first.best.clone()],
            ..Default::default()
        };
        let report = multi_start(&m, 1, &cfg).unwrap();
        assert_eq!(report.restarts.len(), 2);
        assert_eq!(report.restarts[1].initial_draws, 0);
        assert!(report.restarts[1].variance <= first.best_variance * (1.0 + 1e-9));
        let bad = OptimizerConfig {
            initial_guesses: vec![ProtocolParams::identity(2)],
            ..cfg
        };
        assert!(multi_start(&m, 1, &bad).is_err());
    }

    #[test]
    fn continuation_carries_minima() {
        let models: Vec<CostModel> = [4, 6].iter().map(|&n| model(n, GateDuration::Adiabatic)).collect();
        let cfg = OptimizerConfig { n_restarts: Some(4), seed: 5, ..Default::default() };
        let reports = continuation_scan(&models, 1, &cfg).unwrap();
        assert_eq!(reports[0].restarts.len(), 4);
        assert!(reports[1].restarts.len() > 4 && reports[1].restarts.len() <= 4 + CONTINUATION_CARRY);
    }

    #[test]
    fn rejects_zero_restarts() {
        let cfg = OptimizerConfig {
            n_restarts: Some(0),
            ..Default::default()
        };
        assert!(multi_start(&model(4, GateDuration::Adiabatic), 1, &cfg).is_err());
    }

    #[test]
    fn default_restart_count() {
        assert_eq!(OptimizerConfig::default().restarts_for(10), 20);
        assert_eq!(OptimizerConfig::default().restarts_for(40), 40);
    }
}
