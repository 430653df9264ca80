pub mod bench_cmd;
pub mod curate;
pub mod generate;
pub mod inspect;

use std::path::Path;

use avatar_core::config::Config;

use crate::errors::CliError;

/// Load `--config` or fall back to built-in defaults.
pub fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    match path {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::default()),
    }
}
