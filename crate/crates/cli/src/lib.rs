//! Command-line front end: configuration parsing, command dispatch, canonical output and the
//! bundled verification suite.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use serde_json::{json, Value};
use twisted_flux::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

pub const COMMANDS: [&str; 10] =
    ["betti", "signature", "eta", "rho", "spectral-flow", "aps-index", "interval-cohomology", "heat-trace", "alpha0", "verify"];

#[derive(Clone, Debug, thiserror::Error)]
#[error("{kind}: {message}")]
pub struct CliError {
    pub kind: String,
    pub message: String,
    pub pointer: Option<String>,
    pub module: Option<String>,
    pub operation: Option<String>,
    pub exit_code: i32,
}

impl CliError {
    pub fn config(pointer: String, message: String) -> Self {
        CliError { kind: "ConfigInvalid".into(), message, pointer: Some(pointer), module: None, operation: None, exit_code: EXIT_INVALID }
    }

    pub fn io(message: String) -> Self {
        CliError { kind: "Io".into(), message, pointer: None, module: None, operation: None, exit_code: EXIT_INVALID }
    }

    /// A failed assertion of the verification suite.
    pub fn assertion(message: String) -> Self {
        CliError { kind: "VerificationFailed".into(), message, pointer: None, module: Some("cli".into()), operation: Some("verify".into()), exit_code: EXIT_NUMERICAL }
    }

    pub fn from_core(e: Error, module: &str, operation: &str) -> Self {
        let numerical = matches!(
            e,
            Error::IdentityViolated(_)
                | Error::ConstancyViolated(_)
                | Error::AdjointMismatch(_)
                | Error::AmbiguousKernel { .. }
                | Error::TrackingAmbiguity { .. }
                | Error::DegenerateForm(_)
                | Error::NotHermitian(_)
                | Error::TauNotPreserving(_)
                | Error::TailTooLarge { .. }
                | Error::IllConditionedFit(_)
                | Error::SymmetryNotDetected(_)
                | Error::UnbalancedSymbol(_)
        );
        let debug = format!("{e:?}");
        let kind = debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string();
        CliError {
            kind,
            message: e.to_string(),
            pointer: None,
            module: Some(module.into()),
            operation: Some(operation.into()),
            exit_code: if numerical { EXIT_NUMERICAL } else { EXIT_INVALID },
        }
    }

    pub fn to_json(&self) -> Value {
        let mut err = json!({"kind": self.kind, "message": self.message, "exit_code": self.exit_code});
        for (key, v) in [("pointer", &self.pointer), ("module", &self.module), ("operation", &self.operation)] {
            if let Some(s) = v {
                err[key] = json!(s);
            }
        }
        json!({ "error": err })
    }
}

/// Adapter for `map_err` on core results.
pub fn core(module: &'static str, operation: &'static str) -> impl Fn(Error) -> CliError {
    move |e| CliError::from_core(e, module, operation)
}

/// What a command produced.
#[derive(Clone, Debug)]
pub enum Output {
    Json(Value),
    Csv(String),
}

impl Output {
    pub fn render(&self) -> String {
        match self {
            Output::Json(v) => output::canonical(v),
            Output::Csv(s) => s.clone(),
        }
    }
}

/// Runs one command. The output is returned even when the command reports a failed check,
/// together with the error that determines the exit code.
pub fn execute(command: &str, config_text: Option<&str>, seed: u64) -> (Option<Output>, Option<CliError>) {
    if command == "verify" {
        let report = verify::run_all(seed);
        let failed: Vec<String> = report.criteria.iter().filter(|c| !c.pass).map(|c| c.id.to_string()).collect();
        let err = (!failed.is_empty()).then(|| CliError::assertion(format!("criteria failed: {}", failed.join(", "))));
        return (Some(Output::Json(output::to_value(&report))), err);
    }
    let text = match config_text {
        Some(t) => t,
        None => return (None, Some(CliError::config(String::new(), format!("command {command} needs --config")))),
    };
    let cfg = match config::RunConfig::from_json(text) {
        Ok(c) => c,
        Err(e) => return (None, Some(e)),
    };
    match commands::dispatch(command, &cfg) {
        Ok(out) => (Some(out), None),
        Err(e) => (None, Some(e)),
    }
}
