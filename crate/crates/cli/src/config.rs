use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing configuration; nothing was simulated or written.
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("I/O error: {e}"))
    }
}

impl From<yule_core::YuleError> for CliError {
    fn from(e: yule_core::YuleError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Converts a domain error found while validating inputs into a config error.
pub fn invalid<T>(r: yule_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Config(e.to_string()))
}

pub fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| config_err(format!("missing required option --{flag}")))
}

/// Loads a JSON config file; the document must be a single object.
pub fn load_config_file(path: &Path) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(config_err("config file must contain a JSON object")),
        Err(e) => Err(config_err(format!(
            "invalid JSON in {}: {e}",
            path.display()
        ))),
    }
}

/// Overlays the flags given on the command line onto the config file values.
/// Flags left unset are skipped during serialization, so file values survive
/// unless overridden. Unknown keys in the file are rejected by `T`.
pub fn merge<T: Serialize + DeserializeOwned>(
    flags: &T,
    file: Option<Map<String, Value>>,
) -> CliResult<T> {
    let Some(mut base) = file else {
        return Ok(
            serde_json::from_value(serde_json::to_value(flags).expect("serializable"))
                .expect("round trip"),
        );
    };
    if let Value::Object(given) = serde_json::to_value(flags).expect("serializable") {
        for (k, v) in given {
            base.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| config_err(format!("config file: {e}")))
}
