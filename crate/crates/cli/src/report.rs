//! JSON residual records and error objects with their exit codes.

use std::process::ExitCode;

use distham::Error;
use serde::Serialize;
use serde_json::json;

/// Maximum of one residual over the sampled points.
#[derive(Debug, Serialize)]
pub struct Check {
    pub check: &'static str,
    /// `null` when no sample produced a finite residual.
    pub max_residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub samples: usize,
    /// Samples where the residual could not be evaluated (failed hypothesis etc.).
    pub errors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_error: Option<String>,
}

impl Check {
    pub fn new(check: &'static str, tolerance: f64) -> Self {
        Check {
            check,
            max_residual: None,
            tolerance,
            pass: true,
            samples: 0,
            errors: 0,
            first_error: None,
        }
    }

    pub fn record(&mut self, r: Result<f64, Error>) {
        self.samples += 1;
        match r {
            Ok(v) => {
                let worst = self.max_residual.map_or(v, |m| m.max(v));
                self.max_residual = Some(worst);
                if !(v <= self.tolerance) {
                    self.pass = false;
                }
            }
            Err(e) => {
                self.errors += 1;
                self.pass = false;
                self.first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
}

/// Error reported on stderr as JSON, with the matching exit code.
#[derive(Debug)]
pub struct Failure {
    kind: &'static str,
    code: u8,
    message: String,
    offset: Option<usize>,
}

impl Failure {
    fn new(kind: &'static str, code: u8, message: impl Into<String>) -> Self {
        Failure {
            kind,
            code,
            message: message.into(),
            offset: None,
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("usage", 1, message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config", 2, message)
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self::new("numerical", 3, message)
    }

    /// Write failures (stdout, files, CSV, JSON).
    pub fn io(e: impl std::fmt::Display) -> Self {
        Self::new("io", 1, e.to_string())
    }

    /// Anything that goes wrong while loading a config is a config error.
    pub fn loading(e: Error) -> Self {
        let offset = match &e {
            Error::Parse { offset, .. } => Some(*offset),
            _ => None,
        };
        let kind = if offset.is_some() { "parse" } else { "config" };
        Failure {
            offset,
            ..Self::new(kind, 2, e.to_string())
        }
    }

    pub fn from_error(e: Error) -> Self {
        match &e {
            Error::Parse { offset, .. } => Failure {
                offset: Some(*offset),
                ..Self::new("parse", 2, e.to_string())
            },
            Error::Config(_) => Self::config(e.to_string()),
            _ if e.is_numerical() => Self::numerical(e.to_string()),
            _ => Self::usage(e.to_string()),
        }
    }

    pub fn emit(self) -> ExitCode {
        let mut err = json!({ "kind": self.kind, "message": self.message, "exit_code": self.code });
        if let Some(o) = self.offset {
            err["offset"] = json!(o);
        }
        eprintln!("{}", json!({ "error": err }));
        ExitCode::from(self.code)
    }
}
