//! Report assembly and JSON/CSV writers.

use crate::config::{ExperimentConfig, Format};
use serde_json::{json, Map, Value};
use std::io::Write;

pub fn report(cfg: &ExperimentConfig, passed: bool, body: Value, timestamp: bool) -> Value {
    let mut r = json!({
        "version": vna_entropy::VERSION,
        "command": cfg.command.name(),
        "config": cfg,
        "passed": passed,
        "result": body,
    });
    if timestamp {
        let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        r["timestamp"] = json!(secs);
    }
    r
}

/// Scalar leaves keyed by dotted path; arrays and nulls are dropped.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, x)| flatten(&key(k), x, out)),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Number(n) => out.push((prefix.to_string(), n.to_string())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Array(_) | Value::Null => {}
    }
}

fn row_of(v: &Value) -> Vec<(String, String)> {
    let mut out = Vec::new();
    flatten("", v, &mut out);
    out
}

/// One CSV row for the run, or one per check for selftest reports.
fn write_csv(report: &Value, w: impl Write) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let rows: Vec<Vec<(String, String)>> = match report["result"]["checks"].as_array() {
        Some(checks) => checks.iter().map(row_of).collect(),
        None => {
            let mut top = Map::new();
            for k in ["version", "command", "passed", "timestamp"] {
                if let Some(x) = report.get(k) {
                    top.insert(k.to_string(), x.clone());
                }
            }
            let mut row = row_of(&Value::Object(top));
            row.extend(row_of(&report["result"]));
            vec![row]
        }
    };
    if let Some(first) = rows.first() {
        wtr.write_record(first.iter().map(|(k, _)| k))?;
    }
    for r in &rows {
        wtr.write_record(r.iter().map(|(_, v)| v))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write(report: &Value, format: Format, mut w: impl Write) -> std::io::Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, report)?;
            writeln!(w)
        }
        Format::Csv => write_csv(report, w).map_err(std::io::Error::other),
    }
}
