//! Run reports: command echo, input digests, verdict and the module output.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Files read during a run, keyed by the path as given on the command line.
#[derive(Default)]
pub struct Inputs {
    digests: BTreeMap<String, String>,
}

impl Inputs {
    pub fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.digests.insert(path.display().to_string(), format!("sha256:{:x}", Sha256::digest(&bytes)));
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn json<T: serde::de::DeserializeOwned>(&mut self, path: &Path) -> Result<T> {
        let text = self.read(path)?;
        serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// Informational command without a yes/no answer.
    Info,
    Pass(String),
    Fail(String),
}

impl Verdict {
    pub fn from_bool(pass: bool, yes: &str, no: &str) -> Verdict {
        if pass {
            Verdict::Pass(yes.into())
        } else {
            Verdict::Fail(no.into())
        }
    }
}

/// What a command produces before the run metadata is attached.
pub struct Outcome {
    pub output: Value,
    pub verdict: Verdict,
    /// Human-readable summary lines.
    pub text: Vec<String>,
}

impl Outcome {
    pub fn new(output: Value, verdict: Verdict, text: Vec<String>) -> Self {
        Outcome { output, verdict, text }
    }
}

pub struct Report {
    pub command: Vec<String>,
    pub inputs: Inputs,
    pub outcome: Outcome,
}

impl Report {
    pub fn to_json(&self) -> Value {
        let (verdict, pass) = match &self.outcome.verdict {
            Verdict::Info => ("info".to_string(), Value::Null),
            Verdict::Pass(s) => (s.clone(), Value::Bool(true)),
            Verdict::Fail(s) => (s.clone(), Value::Bool(false)),
        };
        json!({
            "command": self.command,
            "inputs": self.inputs.digests,
            "verdict": verdict,
            "pass": pass,
            "output": self.outcome.output,
        })
    }

    pub fn text(&self) -> String {
        let mut out = self.outcome.text.join("\n");
        let tail = match &self.outcome.verdict {
            Verdict::Info => None,
            Verdict::Pass(s) => Some(format!("verdict: PASS ({s})")),
            Verdict::Fail(s) => Some(format!("verdict: FAIL ({s})")),
        };
        if let Some(t) = tail {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&t);
        }
        out
    }
}

/// Structural check of a parsed report.
pub fn validate(v: &Value) -> Result<()> {
    let Some(obj) = v.as_object() else { bail!("report is not an object") };
    let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    if keys != ["command", "inputs", "output", "pass", "verdict"] {
        bail!("unexpected report keys {keys:?}");
    }
    if !v["command"].as_array().is_some_and(|a| a.iter().all(Value::is_string)) {
        bail!("command must be an array of strings");
    }
    let digests_ok = v["inputs"]
        .as_object()
        .is_some_and(|m| m.values().all(|d| d.as_str().is_some_and(|s| s.starts_with("sha256:") && s.len() == 71)));
    if !digests_ok {
        bail!("inputs must map paths to sha256 digests");
    }
    if !v["verdict"].is_string() || !(v["pass"].is_boolean() || v["pass"].is_null()) {
        bail!("verdict must be a string and pass a boolean or null");
    }
    if !v["output"].is_object() {
        bail!("output must be an object");
    }
    Ok(())
}
