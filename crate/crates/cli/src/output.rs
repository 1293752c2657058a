//! Serialized artifacts: JSON documents and CSV tables carrying the config digest.

use std::io::Write;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to 12 significant digits, except that a non-integer is never
/// rounded onto an integer (so probabilities never collapse to 0 or 1).
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses");
    if rounded.fract() == 0.0 && x.fract() != 0.0 {
        x
    } else {
        rounded
    }
}

fn round_value(value: &mut Value) {
    match value {
        Value::Number(num) => {
            if let Some(x) = num.as_f64().filter(|_| num.is_f64()) {
                if let Some(rounded) = serde_json::Number::from_f64(round_sig(x)) {
                    *num = rounded;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Formats one CSV number cell.
pub fn number(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else {
        serde_json::to_string(&round_sig(x)).expect("finite floats serialize")
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    version: &'a str,
    command: &'a str,
    config_sha256: String,
    config: &'a ExperimentConfig,
    result: T,
}

/// The config as embedded in artifacts. The output path is left out so that a
/// rerun written elsewhere produces the same bytes.
fn embedded(config: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig { output: None, ..config.clone() }
}

pub fn json_document<T: Serialize>(command: &str, config: &ExperimentConfig, result: T) -> anyhow::Result<String> {
    let config = &embedded(config);
    let doc = Document { version: VERSION, command, config_sha256: config.digest(), config, result };
    let mut value = serde_json::to_value(doc)?;
    round_value(&mut value);
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

pub fn csv_document(
    command: &str,
    config: &ExperimentConfig,
    header: &[&str],
    rows: &[Vec<String>],
) -> anyhow::Result<String> {
    let digest = embedded(config).digest();
    let mut out = format!("# inexact {VERSION} {command} config_sha256={digest}\n").into_bytes();
    {
        let mut writer = csv::Writer::from_writer(&mut out);
        writer.write_record(header)?;
        for row in rows {
            writer.write_record(row)?;
        }
        writer.flush()?;
    }
    Ok(String::from_utf8(out)?)
}

/// Writes to the configured output file, or stdout when none is set.
pub fn emit(config: &ExperimentConfig, text: &str) -> anyhow::Result<()> {
    match &config.output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}
