//! JSON configuration files, one schema per command.
//!
//! Every schema rejects unknown keys and is validated before any
//! computation starts. Gate durations are in units of `1/g`; a missing
//! `gate_duration_gt` selects the adiabatic gate model. A missing
//! `cooperativity`/`gamma_over_kappa` pair selects the lossless cavity.

use std::path::{Path, PathBuf};

use dicke_control::fixtures::FixtureTable;
use dicke_control::gpg::{rates_from_cooperativity, GateDuration, NoiseRates};
use dicke_control::optimizer::OptimizerConfig;
use dicke_control::protocol::{ProtocolParams, SensingTask};
use dicke_control::sensing::Integrator;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Largest `N` accepted unless `allow_large_n` is set.
pub const DEFAULT_MAX_SPINS: usize = 64;

/// Reads and validates a configuration file. Returns the parsed value and
/// the raw bytes, which the manifest hashes.
pub fn load<T: DeserializeOwned + Validate>(path: &Path) -> CliResult<(T, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = parse::<T>(&bytes).map_err(|e| e.context(path.display()))?;
    Ok((cfg, bytes))
}

/// Parses and validates configuration text.
pub fn parse<T: DeserializeOwned + Validate>(bytes: &[u8]) -> CliResult<T> {
    let cfg: T = serde_json::from_slice(bytes)?;
    cfg.validate()?;
    Ok(cfg)
}

type SchemaCheck = (&'static str, fn(&[u8]) -> bool);

/// Names of the command schemas that accept `bytes`.
pub fn accepted_schemas(bytes: &[u8]) -> Vec<&'static str> {
    let checks: [SchemaCheck; 6] = [
        ("optimize", |b| parse::<OptimizeConfig>(b).is_ok()),
        ("evaluate", |b| parse::<EvaluateConfig>(b).is_ok()),
        ("regress", |b| parse::<RegressConfig>(b).is_ok()),
        ("pulse", |b| parse::<PulseConfig>(b).is_ok()),
        ("sense", |b| parse::<SenseConfig>(b).is_ok()),
        ("qfunc", |b| parse::<QfuncConfig>(b).is_ok()),
    ];
    checks.iter().filter(|(_, ok)| ok(bytes)).map(|(name, _)| *name).collect()
}

pub trait Validate {
    fn validate(&self) -> CliResult<()>;
}

/// Protocol given inline or as a path to a protocol JSON file. Relative
/// paths are resolved against the directory of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProtocolSource {
    Inline(ProtocolParams),
    File(PathBuf),
}

impl ProtocolSource {
    pub fn resolve(&self, base: Option<&Path>) -> CliResult<ProtocolParams> {
        match self {
            ProtocolSource::Inline(p) => Ok(p.clone()),
            ProtocolSource::File(path) => {
                let full = match base {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| CliError::config(format!("cannot read protocol {}: {e}", full.display())))?;
                ProtocolParams::from_json(&text).map_err(|e| CliError::from(e).context(full.display()))
            }
        }
    }

    fn validate(&self) -> CliResult<()> {
        match self {
            ProtocolSource::Inline(p) => Ok(p.validate()?),
            ProtocolSource::File(path) if path.as_os_str().is_empty() => Err(CliError::config("empty protocol path")),
            ProtocolSource::File(_) => Ok(()),
        }
    }
}

/// Measurement and field axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Parity measurement, field along `z`.
    Parity,
    /// `Jz^2` measurement, field along `y`.
    JzSquared,
}

impl TaskKind {
    pub fn task(self, normalize_before_measure: bool) -> SensingTask {
        match self {
            TaskKind::Parity => SensingTask::parity(),
            TaskKind::JzSquared => SensingTask::jz_squared(),
        }
        .normalized(normalize_before_measure)
    }
}

fn check_positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn duration(gt: Option<f64>) -> CliResult<GateDuration> {
    match gt {
        None => Ok(GateDuration::Adiabatic),
        Some(gt) => {
            check_positive("gate_duration_gt", gt)?;
            Ok(GateDuration::finite(gt))
        }
    }
}

fn check_spins(n: usize, allow_large_n: bool) -> CliResult<()> {
    if n == 0 {
        return Err(CliError::config("n_spins must be at least 1"));
    }
    if n > DEFAULT_MAX_SPINS && !allow_large_n {
        return Err(CliError::config(format!(
            "n_spins = {n} exceeds {DEFAULT_MAX_SPINS}; set allow_large_n to run it"
        )));
    }
    Ok(())
}

/// Loss rates of one operating point.
fn loss(cooperativity: Option<f64>, gamma_over_kappa: Option<f64>) -> CliResult<NoiseRates> {
    match (cooperativity, gamma_over_kappa) {
        (None, None) => Ok(NoiseRates::lossless()),
        (Some(c), Some(r)) => {
            check_positive("cooperativity", c)?;
            check_positive("gamma_over_kappa", r)?;
            Ok(rates_from_cooperativity(c, r)?)
        }
        _ => Err(CliError::config("cooperativity and gamma_over_kappa must be given together")),
    }
}

/// One state-preparation setting: system size, losses, gate model and task.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparationConfig {
    pub n_spins: usize,
    pub cooperativity: Option<f64>,
    pub gamma_over_kappa: Option<f64>,
    pub gate_duration_gt: Option<f64>,
    pub task: TaskKind,
    pub normalize_before_measure: bool,
    pub allow_large_n: bool,
}

impl PreparationConfig {
    pub fn rates(&self) -> CliResult<NoiseRates> {
        loss(self.cooperativity, self.gamma_over_kappa)
    }

    pub fn duration(&self) -> CliResult<GateDuration> {
        duration(self.gate_duration_gt)
    }

    pub fn task(&self) -> SensingTask {
        self.task.task(self.normalize_before_measure)
    }

    pub fn validate(&self) -> CliResult<()> {
        check_spins(self.n_spins, self.allow_large_n)?;
        self.rates()?;
        self.duration()?;
        Ok(())
    }
}

/// `optimize`: multi-start optimization over a grid of operating points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub n_spins: Vec<usize>,
    #[serde(default)]
    pub cooperativity: Vec<f64>,
    #[serde(default)]
    pub gamma_over_kappa: Vec<f64>,
    /// Adds a `kappa = gamma = 0` series.
    #[serde(default)]
    pub lossless_control: bool,
    pub n_steps: usize,
    #[serde(default)]
    pub gate_duration_gt: Option<f64>,
    pub task: TaskKind,
    #[serde(default)]
    pub normalize_before_measure: bool,
    /// Seed each size of a series with the best optima of the previous size.
    #[serde(default = "default_true")]
    pub continuation: bool,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub allow_large_n: bool,
}

fn default_true() -> bool {
    true
}

impl OptimizeConfig {
    pub fn duration(&self) -> CliResult<GateDuration> {
        duration(self.gate_duration_gt)
    }

    pub fn task(&self) -> SensingTask {
        self.task.task(self.normalize_before_measure)
    }

    /// Loss settings of every series, as `(C, gamma/kappa, rates)`;
    /// the lossless control series has `C = inf`.
    pub fn series(&self) -> CliResult<Vec<(f64, f64, NoiseRates)>> {
        let mut out = Vec::new();
        for &c in &self.cooperativity {
            for &r in &self.gamma_over_kappa {
                out.push((c, r, loss(Some(c), Some(r))?));
            }
        }
        if self.lossless_control {
            out.push((f64::INFINITY, f64::NAN, NoiseRates::lossless()));
        }
        Ok(out)
    }
}

impl Validate for OptimizeConfig {
    fn validate(&self) -> CliResult<()> {
        if self.n_spins.is_empty() {
            return Err(CliError::config("n_spins must list at least one size"));
        }
        for &n in &self.n_spins {
            check_spins(n, self.allow_large_n)?;
        }
        let mut sorted = self.n_spins.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.n_spins.len() {
            return Err(CliError::config("n_spins contains duplicates"));
        }
        if self.cooperativity.is_empty() != self.gamma_over_kappa.is_empty() {
            return Err(CliError::config("cooperativity and gamma_over_kappa must both be empty or both non-empty"));
        }
        if self.series()?.is_empty() {
            return Err(CliError::config("no loss settings: give cooperativity/gamma_over_kappa or lossless_control"));
        }
        if self.n_steps == 0 {
            return Err(CliError::config("n_steps must be at least 1"));
        }
        self.duration()?;
        Ok(self.optimizer.validate()?)
    }
}

/// `evaluate`: cost of one protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    pub protocol: ProtocolSource,
    pub n_spins: usize,
    #[serde(default)]
    pub cooperativity: Option<f64>,
    #[serde(default)]
    pub gamma_over_kappa: Option<f64>,
    #[serde(default)]
    pub gate_duration_gt: Option<f64>,
    pub task: TaskKind,
    #[serde(default)]
    pub normalize_before_measure: bool,
    #[serde(default)]
    pub allow_large_n: bool,
    /// Reference `N (Delta beta)^2` to compare against.
    #[serde(default)]
    pub reference_scaled_variance: Option<f64>,
    #[serde(default = "default_rel_tolerance")]
    pub rel_tolerance: f64,
    #[serde(default = "default_abs_tolerance")]
    pub abs_tolerance: f64,
}

impl EvaluateConfig {
    pub fn preparation(&self) -> PreparationConfig {
        PreparationConfig {
            n_spins: self.n_spins,
            cooperativity: self.cooperativity,
            gamma_over_kappa: self.gamma_over_kappa,
            gate_duration_gt: self.gate_duration_gt,
            task: self.task,
            normalize_before_measure: self.normalize_before_measure,
            allow_large_n: self.allow_large_n,
        }
    }
}

fn default_rel_tolerance() -> f64 {
    0.1
}

fn default_abs_tolerance() -> f64 {
    0.005
}

impl Validate for EvaluateConfig {
    fn validate(&self) -> CliResult<()> {
        self.protocol.validate()?;
        self.preparation().validate()?;
        if let Some(r) = self.reference_scaled_variance {
            check_positive("reference_scaled_variance", r)?;
        }
        if !(self.rel_tolerance >= 0.0 && self.abs_tolerance >= 0.0) {
            return Err(CliError::config("tolerances must be non-negative"));
        }
        Ok(())
    }
}

/// A fixture table: one of the bundled ones or a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableRef {
    /// Bundled single-step parity optima.
    Ghz,
    /// Bundled three-step `Jz^2` optima.
    Dicke,
    File(PathBuf),
}

impl TableRef {
    pub fn load(&self, base: Option<&Path>) -> CliResult<FixtureTable> {
        match self {
            TableRef::Ghz => Ok(dicke_control::fixtures::ghz_optima()),
            TableRef::Dicke => Ok(dicke_control::fixtures::dicke_optima()),
            TableRef::File(path) => {
                let full = match base {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| CliError::config(format!("cannot read table {}: {e}", full.display())))?;
                FixtureTable::from_json(&text).map_err(|e| CliError::from(e).context(full.display()))
            }
        }
    }
}

/// `regress`: evaluates fixture tables against their tabulated values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressConfig {
    #[serde(default = "default_tables")]
    pub tables: Vec<TableRef>,
    #[serde(default)]
    pub normalize_before_measure: bool,
}

fn default_tables() -> Vec<TableRef> {
    vec![TableRef::Ghz, TableRef::Dicke]
}

impl Default for RegressConfig {
    fn default() -> Self {
        Self {
            tables: default_tables(),
            normalize_before_measure: false,
        }
    }
}

impl Validate for RegressConfig {
    fn validate(&self) -> CliResult<()> {
        if self.tables.is_empty() {
            return Err(CliError::config("tables must list at least one table"));
        }
        Ok(())
    }
}

/// `pulse`: drive waveforms of every gate of a protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub protocol: ProtocolSource,
    pub gate_duration_gt: f64,
    /// Odd number of time samples per gate.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub cooperativity: Option<f64>,
    #[serde(default)]
    pub gamma_over_kappa: Option<f64>,
    /// Detuning of the lab-frame drive for each step, in units of `g`.
    pub drive_detuning: Vec<f64>,
    /// Reference `N (Delta beta)^2` values copied into the manifest.
    #[serde(default)]
    pub quoted_scaled_variance: Vec<f64>,
}

fn default_samples() -> usize {
    dicke_control::gpg::DEFAULT_SAMPLES
}

impl PulseConfig {
    pub fn kappa(&self) -> CliResult<f64> {
        Ok(loss(self.cooperativity, self.gamma_over_kappa)?.kappa)
    }
}

impl Validate for PulseConfig {
    fn validate(&self) -> CliResult<()> {
        self.protocol.validate()?;
        check_positive("gate_duration_gt", self.gate_duration_gt)?;
        if self.samples < 5 || self.samples % 2 == 0 {
            return Err(CliError::config(format!("samples must be odd and at least 5, got {}", self.samples)));
        }
        self.kappa()?;
        for &d in &self.drive_detuning {
            check_positive("drive_detuning", d)?;
        }
        if let ProtocolSource::Inline(p) = &self.protocol {
            check_detuning_count(p, &self.drive_detuning)?;
        }
        Ok(())
    }
}

pub fn check_detuning_count(p: &ProtocolParams, detunings: &[f64]) -> CliResult<()> {
    if p.n_steps() != detunings.len() {
        return Err(CliError::config(format!(
            "{} drive detunings for {} protocol steps",
            detunings.len(),
            p.n_steps()
        )));
    }
    Ok(())
}

/// Probe used for the acquisition curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeSource {
    /// Output of a preparation protocol, rotated to its working point.
    Protocol {
        protocol: ProtocolSource,
        #[serde(default)]
        cooperativity: Option<f64>,
        #[serde(default)]
        gamma_over_kappa: Option<f64>,
        #[serde(default)]
        gate_duration_gt: Option<f64>,
    },
    /// Ideal GHZ state at the parity working point.
    Ghz,
    /// Ideal Dicke state `|D_{N/2}>`.
    Dicke,
}

/// `sense`: acquisition curves under local dephasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SenseConfig {
    pub n_spins: usize,
    pub task: TaskKind,
    #[serde(default)]
    pub normalize_before_measure: bool,
    pub probe: ProbeSource,
    /// Dephasing rates in units of `J`; one curve each.
    pub gamma_phi_over_j: Vec<f64>,
    /// Final `Jt` and number of intervals of the uniform grid.
    pub t_max: f64,
    pub t_steps: usize,
    #[serde(default)]
    pub integrator: Integrator,
    /// Adds a full-space master-equation column (`N <= 8`).
    #[serde(default)]
    pub oracle: bool,
    #[serde(default = "default_max_spins")]
    pub max_spins: usize,
}

fn default_max_spins() -> usize {
    DEFAULT_MAX_SPINS
}

impl Validate for SenseConfig {
    fn validate(&self) -> CliResult<()> {
        if self.n_spins == 0 {
            return Err(CliError::config("n_spins must be at least 1"));
        }
        if self.n_spins > self.max_spins {
            return Err(CliError::config(format!(
                "n_spins = {} exceeds the block-solver limit {}",
                self.n_spins, self.max_spins
            )));
        }
        if self.oracle && self.n_spins > dicke_control::sensing::MAX_BRUTE_FORCE_SPINS {
            return Err(CliError::config(format!(
                "the full-space column needs n_spins <= {}",
                dicke_control::sensing::MAX_BRUTE_FORCE_SPINS
            )));
        }
        match (&self.probe, self.task) {
            (ProbeSource::Ghz, TaskKind::JzSquared) => return Err(CliError::config("the GHZ probe is read out by parity")),
            (ProbeSource::Dicke, TaskKind::Parity) => return Err(CliError::config("the Dicke probe is read out by Jz^2")),
            (
                ProbeSource::Protocol {
                    protocol,
                    cooperativity,
                    gamma_over_kappa,
                    gate_duration_gt,
                },
                _,
            ) => {
                protocol.validate()?;
                loss(*cooperativity, *gamma_over_kappa)?;
                duration(*gate_duration_gt)?;
            }
            _ => {}
        }
        if self.gamma_phi_over_j.is_empty() {
            return Err(CliError::config("gamma_phi_over_j must list at least one rate"));
        }
        for &g in &self.gamma_phi_over_j {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(CliError::config(format!("dephasing rate must be non-negative, got {g}")));
            }
        }
        check_positive("t_max", self.t_max)?;
        if self.t_steps == 0 {
            return Err(CliError::config("t_steps must be at least 1"));
        }
        Ok(self.integrator.validate()?)
    }
}

/// `qfunc`: Husimi grids along a preparation trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QfuncConfig {
    pub protocol: ProtocolSource,
    pub n_spins: usize,
    #[serde(default)]
    pub cooperativity: Option<f64>,
    #[serde(default)]
    pub gamma_over_kappa: Option<f64>,
    #[serde(default)]
    pub gate_duration_gt: Option<f64>,
    /// Polar samples on `[0, pi]`, endpoints included.
    #[serde(default = "default_theta_points")]
    pub theta_points: usize,
    /// Azimuthal samples on `[0, 2 pi)`.
    #[serde(default = "default_phi_points")]
    pub phi_points: usize,
    #[serde(default)]
    pub allow_large_n: bool,
}

fn default_theta_points() -> usize {
    181
}

fn default_phi_points() -> usize {
    360
}

impl QfuncConfig {
    pub fn rates(&self) -> CliResult<NoiseRates> {
        loss(self.cooperativity, self.gamma_over_kappa)
    }

    pub fn duration(&self) -> CliResult<GateDuration> {
        duration(self.gate_duration_gt)
    }
}

impl Validate for QfuncConfig {
    fn validate(&self) -> CliResult<()> {
        self.protocol.validate()?;
        check_spins(self.n_spins, self.allow_large_n)?;
        self.rates()?;
        self.duration()?;
        if self.theta_points < 3 || self.phi_points < 3 {
            return Err(CliError::config("the Husimi grid needs at least 3 points per axis"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let text = br#"{"n_spins": [10], "n_steps": 1, "task": "parity", "lossless_control": true, "typo": 1}"#;
        assert!(matches!(parse::<OptimizeConfig>(text), Err(CliError::Config(_))));
        let text = br#"{"n_spins": [10], "n_steps": 1, "task": "parity", "lossless_control": true}"#;
        let cfg = parse::<OptimizeConfig>(text).unwrap();
        assert!(cfg.continuation);
        assert_eq!(cfg.duration().unwrap(), GateDuration::Adiabatic);
    }

    #[test]
    fn loss_pair_must_be_complete() {
        let text = br#"{"protocol": "p.json", "n_spins": 4, "task": "parity", "cooperativity": 100}"#;
        assert!(parse::<EvaluateConfig>(text).is_err());
        let text = br#"{"protocol": "p.json", "n_spins": 4, "task": "parity", "cooperativity": 100, "gamma_over_kappa": 1}"#;
        let cfg = parse::<EvaluateConfig>(text).unwrap();
        assert!((cfg.preparation().rates().unwrap().cooperativity() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn large_systems_need_the_flag() {
        let text = br#"{"n_spins": [100], "n_steps": 1, "task": "parity", "lossless_control": true}"#;
        assert!(parse::<OptimizeConfig>(text).is_err());
        let text = br#"{"n_spins": [100], "n_steps": 1, "task": "parity", "lossless_control": true, "allow_large_n": true}"#;
        assert!(parse::<OptimizeConfig>(text).is_ok());
    }

    #[test]
    fn inline_protocols_are_checked() {
        let text = br#"{"protocol": {"theta0": [0,0,0], "steps": [{"theta": [0,0,0], "phi": 1.0, "delta": -1.0}], "beta": 0},
            "gate_duration_gt": 40, "drive_detuning": [12]}"#;
        assert!(parse::<PulseConfig>(text).is_err());
        let text = br#"{"protocol": {"theta0": [0,0,0], "steps": [{"theta": [0,0,0], "phi": 1.0, "delta": 1.0}], "beta": 0},
            "gate_duration_gt": 40, "drive_detuning": [12, 3]}"#;
        assert!(parse::<PulseConfig>(text).is_err());
    }

    #[test]
    fn probe_and_task_must_match() {
        let text = br#"{"n_spins": 6, "task": "jz_squared", "probe": {"kind": "ghz"}, "gamma_phi_over_j": [0], "t_max": 1, "t_steps": 4}"#;
        assert!(parse::<SenseConfig>(text).is_err());
        let text = br#"{"n_spins": 10, "task": "parity", "probe": {"kind": "ghz"}, "gamma_phi_over_j": [0], "t_max": 1, "t_steps": 4, "oracle": true}"#;
        assert!(parse::<SenseConfig>(text).is_err());
    }

    #[test]
    fn regress_defaults_to_bundled_tables() {
        let cfg = parse::<RegressConfig>(b"{}").unwrap();
        assert_eq!(cfg.tables, vec![TableRef::Ghz, TableRef::Dicke]);
        assert!(parse::<RegressConfig>(br#"{"tables": []}"#).is_err());
    }
}
