//! One module per command. Each command loads its configuration, writes
//! its files into the run directory and always finishes with a manifest.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::config::{self, Validate};
use crate::error::{CliError, CliResult};
use crate::output::Run;

pub mod evaluate;
pub mod optimize;
pub mod pulse;
pub mod qfunc;
pub mod regress;
pub mod sense;

/// Global flags shared by all commands.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl Context {
    /// Loads the configuration, which this command requires.
    fn load<T: DeserializeOwned + Validate>(&self, command: &str) -> CliResult<(T, Vec<u8>)> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| CliError::config(format!("{command} needs --config <file>")))?;
        config::load(path)
    }

    /// Directory against which relative paths in the configuration resolve.
    fn base_dir(&self) -> Option<&Path> {
        self.config.as_deref().and_then(Path::parent)
    }

    /// Runs `body` in a fresh run directory and writes the manifest with
    /// whatever results were collected, also when `body` fails.
    fn execute<F>(&self, command: &str, config: Option<&[u8]>, seed: u64, body: F) -> CliResult<()>
    where
        F: FnOnce(&mut Run, &mut serde_json::Value) -> CliResult<()>,
    {
        let mut run = Run::create(&self.out, command, config, seed, self.threads)?;
        let mut results = serde_json::Value::Object(Default::default());
        let outcome = body(&mut run, &mut results);
        run.finish(results, &outcome)?;
        outcome
    }
}
