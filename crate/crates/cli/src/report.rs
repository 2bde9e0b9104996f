//! JSON reports with a fixed layout: struct field order, floats as
//! `{:.11e}` literals (12 significant digits), two-space indentation.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::ser::Error as _;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::CliError;

/// A float written with 12 significant digits. Non-finite values refuse to
/// serialize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(S::Error::custom(format!("non-finite value {}", self.0)));
        }
        let raw = RawValue::from_string(format!("{:.11e}", self.0)).map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}

pub fn nums(xs: &[f64]) -> Vec<Num> {
    xs.iter().copied().map(Num).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    AcceptanceViolation,
    SolverFailure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::SolverFailure => 2,
            Status::AcceptanceViolation => 3,
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    command: &'a str,
    status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a T>,
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Writes `{command, status, message?, result?}` to `path`. A result holding
/// NaN or infinity is dropped and the status becomes `solver_failure`.
pub fn emit_report<T: Serialize>(
    path: &Path,
    command: &str,
    status: Status,
    message: Option<&str>,
    result: Option<&T>,
) -> Result<Status, CliError> {
    let (status, mut text) = match serde_json::to_string_pretty(&Envelope { command, status, message, result }) {
        Ok(text) => (status, text),
        Err(e) => {
            let msg = format!("report rejected: {e}");
            let env = Envelope::<T> { command, status: Status::SolverFailure, message: Some(&msg), result: None };
            (Status::SolverFailure, serde_json::to_string_pretty(&env).map_err(|e| CliError::Solver(e.to_string()))?)
        }
    };
    text.push('\n');
    write_text(path, &text)?;
    Ok(status)
}

/// An output directory held for the duration of one run.
#[derive(Debug)]
pub struct OutputDir {
    pub path: PathBuf,
    lock: PathBuf,
}

impl OutputDir {
    pub const LOCK_NAME: &'static str = ".mgdeform.lock";

    pub fn acquire(path: &Path) -> Result<OutputDir, CliError> {
        std::fs::create_dir_all(path)?;
        let lock = path.join(Self::LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(OutputDir { path: path.to_path_buf(), lock })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Validation(format!(
                "output directory {} is in use (remove {} if no run is active)",
                path.display(),
                lock.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.lock);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        dimension: usize,
        residual: Num,
        values: Vec<Num>,
    }

    #[test]
    fn floats_use_twelve_significant_digits() {
        let v = serde_json::to_string(&Sample { dimension: 3, residual: Num(1.0 / 3.0), values: nums(&[0.0, -2.5e-7]) })
            .unwrap();
        assert_eq!(
            v,
            r#"{"dimension":3,"residual":3.33333333333e-1,"values":[0.00000000000e0,-2.50000000000e-7]}"#
        );
    }

    #[test]
    fn nan_turns_into_solver_failure() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        let s = Sample { dimension: 0, residual: Num(f64::NAN), values: vec![] };
        let status = emit_report(&p, "glue", Status::Ok, None, Some(&s)).unwrap();
        assert_eq!(status, Status::SolverFailure);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"status\": \"solver_failure\""));
        assert!(!text.contains("result"));
    }

    #[test]
    fn empty_result_is_a_minimal_report() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        emit_report::<Sample>(&p, "deform", Status::Ok, None, None).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "{\n  \"command\": \"deform\",\n  \"status\": \"ok\"\n}\n");
    }

    #[test]
    fn a_second_lock_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let a = OutputDir::acquire(dir.path()).unwrap();
        assert!(matches!(OutputDir::acquire(dir.path()), Err(CliError::Validation(_))));
        drop(a);
        assert!(OutputDir::acquire(dir.path()).is_ok());
    }
}
