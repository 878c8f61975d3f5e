//! Request/response protocol for evaluators running in a child process.
//!
//! One process per request. The request is a single JSON document on the
//! child's standard input:
//!
//! ```json
//! {"mode":"train_eval","config":{...},"train_path":"...","valid_path":"...","model_path":"..."}
//! ```
//!
//! and the child answers with a single JSON document on standard output:
//!
//! ```json
//! {"status":"ok","validation_accuracy":0.93,"message":""}
//! ```
//!
//! `status: "error"` is a failed trial. Anything else (a crash, a non-zero
//! exit, unparsable or missing output, an accuracy outside `[0, 1]`) is a
//! protocol violation.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::space::Config;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestMode {
    TrainEval,
    Correct,
    Echo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterRequest {
    pub mode: RequestMode,
    pub config: Config,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterResponse {
    pub status: ResponseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_accuracy: Option<f64>,
    #[serde(default)]
    pub message: String,
}

/// Parses a child's standard output as exactly one response document.
pub fn parse_response(stdout: &str) -> Result<AdapterResponse> {
    let mut docs = serde_json::Deserializer::from_str(stdout).into_iter::<AdapterResponse>();
    let first = match docs.next() {
        Some(Ok(r)) => r,
        Some(Err(e)) => return Err(Error::protocol(format!("unparsable response: {e}"))),
        None => return Err(Error::protocol("empty response")),
    };
    if docs.next().is_some() {
        return Err(Error::protocol("more than one response document"));
    }
    if let Some(acc) = first.validation_accuracy {
        if !(0.0..=1.0).contains(&acc) {
            return Err(Error::protocol(format!("validation_accuracy {acc} outside [0, 1]")));
        }
    }
    Ok(first)
}

/// Runs `program args..` once with `request` on its standard input.
pub fn call(program: &str, args: &[String], request: &AdapterRequest) -> Result<AdapterResponse> {
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| Error::protocol(format!("cannot start evaluator '{program}': {e}")))?;
    let body = serde_json::to_vec(request).expect("requests always serialize");
    {
        let mut stdin = child.stdin.take().expect("stdin is piped");
        // a child that exits without reading is reported through its output
        let _ = stdin.write_all(&body);
    }
    let output = child
        .wait_with_output()
        .map_err(|e| Error::protocol(format!("evaluator '{program}': {e}")))?;
    if !output.status.success() {
        return Err(Error::protocol(format!(
            "evaluator '{program}' exited with {}",
            output.status
        )));
    }
    let stdout = String::from_utf8(output.stdout).map_err(|_| Error::protocol("response is not UTF-8"))?;
    parse_response(&stdout)
}

/// Evaluates configurations by training in an external process.
#[derive(Debug, Clone)]
pub struct ExternalEvaluator {
    pub program: String,
    pub args: Vec<String>,
    pub train_path: PathBuf,
    pub valid_path: PathBuf,
    /// Each configuration gets its own model directory below this one.
    pub model_root: PathBuf,
}

impl ExternalEvaluator {
    /// `command` is split on whitespace into a program and its arguments.
    pub fn new(command: &str, train_path: &Path, valid_path: &Path, model_root: &Path) -> Result<Self> {
        let mut words = command.split_whitespace().map(str::to_string);
        let program = words.next().ok_or_else(|| Error::argument("empty evaluator command"))?;
        Ok(ExternalEvaluator {
            program,
            args: words.collect(),
            train_path: train_path.to_path_buf(),
            valid_path: valid_path.to_path_buf(),
            model_root: model_root.to_path_buf(),
        })
    }

    pub fn request(&self, config: &Config) -> AdapterRequest {
        AdapterRequest {
            mode: RequestMode::TrainEval,
            config: config.clone(),
            train_path: Some(self.train_path.clone()),
            valid_path: Some(self.valid_path.clone()),
            model_path: Some(
                self.model_root
                    .join(format!("{:016x}", fnv1a(config.fingerprint().as_bytes()))),
            ),
            input_path: None,
            output_path: None,
        }
    }

    pub fn evaluate(&self, config: &Config) -> Result<f64> {
        let response = call(&self.program, &self.args, &self.request(config))?;
        match response.status {
            ResponseStatus::Error => Err(Error::Evaluation(response.message)),
            ResponseStatus::Ok => response
                .validation_accuracy
                .ok_or_else(|| Error::protocol("status ok without validation_accuracy")),
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_shape() {
        let ev = ExternalEvaluator::new("python3 adapter.py", Path::new("t"), Path::new("v"), Path::new("m")).unwrap();
        assert_eq!(ev.program, "python3");
        assert_eq!(ev.args, ["adapter.py"]);
        let req = ev.request(&Config::new().with("units", 64i64));
        let json = serde_json::to_string(&req).unwrap();
        assert!(
            json.starts_with(
                r#"{"mode":"train_eval","config":{"units":64},"train_path":"t","valid_path":"v","model_path":"m/"#
            ),
            "{json}"
        );
        let back: AdapterRequest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, req);
        assert!(ExternalEvaluator::new("  ", Path::new("t"), Path::new("v"), Path::new("m")).is_err());
    }

    #[test]
    fn responses() {
        let ok = parse_response(r#"{"status":"ok","validation_accuracy":0.5,"message":""}"#).unwrap();
        assert_eq!(ok.validation_accuracy, Some(0.5));
        let err = parse_response("{\"status\":\"error\",\"message\":\"bad units\"}\n").unwrap();
        assert_eq!(err.status, ResponseStatus::Error);
        for bad in [
            "",
            "not json",
            r#"{"status":"maybe"}"#,
            r#"{"status":"ok","validation_accuracy":1.5}"#,
            r#"{"status":"ok"} {"status":"ok"}"#,
        ] {
            assert!(matches!(parse_response(bad), Err(Error::Protocol(_))), "{bad}");
        }
    }

    #[cfg(unix)]
    #[test]
    fn subprocess_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("eval.sh");
        std::fs::write(
            &script,
            "cat > /dev/null\necho '{\"status\":\"ok\",\"validation_accuracy\":0.25}'\n",
        )
        .unwrap();
        let cmd = format!("sh {}", script.display());
        let ev = ExternalEvaluator::new(&cmd, Path::new("t"), Path::new("v"), dir.path()).unwrap();
        assert_eq!(ev.evaluate(&Config::new()).unwrap(), 0.25);

        std::fs::write(&script, "cat > /dev/null\necho garbage\n").unwrap();
        assert!(matches!(ev.evaluate(&Config::new()), Err(Error::Protocol(_))));
        std::fs::write(
            &script,
            "cat > /dev/null\necho '{\"status\":\"error\",\"message\":\"oom\"}'\n",
        )
        .unwrap();
        assert!(matches!(ev.evaluate(&Config::new()), Err(Error::Evaluation(m)) if m == "oom"));
        std::fs::write(&script, "exit 3\n").unwrap();
        assert!(matches!(ev.evaluate(&Config::new()), Err(Error::Protocol(_))));
        let missing =
            ExternalEvaluator::new("/nonexistent/evaluator", Path::new("t"), Path::new("v"), dir.path()).unwrap();
        assert!(matches!(missing.evaluate(&Config::new()), Err(Error::Protocol(_))));
    }
}
