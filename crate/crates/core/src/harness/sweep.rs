//! One-parameter sweeps over a base configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::config::RunConfig;
use super::run::{run_experiment, RunRecord};
use crate::metrics::{fmt_float, rounds_to_tolerance, Metric};
use crate::{Error, Result};

/// Short names accepted in place of dotted config paths.
const ALIASES: &[(&str, &str)] = &[
    ("M", "algorithm.M"),
    ("lambda", "algorithm.lambda"),
    ("gamma", "algorithm.gamma"),
    ("eta", "algorithm.eta"),
    ("kind", "algorithm.kind"),
    ("algorithm", "algorithm.kind"),
    ("alpha", "problem.alpha"),
    ("target_delta", "problem.target_delta"),
    ("mu", "problem.mu"),
    ("n", "topology.n"),
    ("topology", "topology.kind"),
    ("rounds", "run.rounds"),
    ("seed", "run.seed"),
];

fn resolve_axis(axis: &str) -> &str {
    ALIASES.iter().find(|(k, _)| *k == axis).map_or(axis, |(_, v)| v)
}

fn parse_value(raw: &str) -> toml::Value {
    if let Ok(i) = raw.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = raw.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = raw.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(raw.to_string())
    }
}

/// Copy of `base` with `axis` (an alias or `section.key`) set to `value`.
pub fn apply_override(base: &RunConfig, axis: &str, value: &str) -> Result<RunConfig> {
    let path = resolve_axis(axis);
    let (section, key) =
        path.split_once('.').ok_or_else(|| Error::Config(format!("invalid sweep axis `{axis}`")))?;
    if section == "sweep" {
        return Err(Error::Config(format!("invalid sweep axis `{axis}`")));
    }
    let mut table: toml::Table =
        toml::Table::try_from(base).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    let sec = table
        .entry(section)
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("invalid sweep axis `{axis}`")))?;
    sec.insert(key.to_string(), parse_value(value));
    let cfg: RunConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("sweep axis `{axis}` = {value}: {}", e.message())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `base` once per value of `axis`. Records are independent and run in
/// parallel; results keep the order of `values`.
pub fn run_sweep(base: &RunConfig, axis: &str, values: &[String]) -> Result<Vec<(String, RunRecord)>> {
    let configs: Vec<RunConfig> = values.iter().map(|v| apply_override(base, axis, v)).collect::<Result<_>>()?;
    let records: Vec<Result<RunRecord>> = configs.par_iter().map(run_experiment).collect();
    values.iter().cloned().zip(records).map(|(v, r)| r.map(|r| (v, r))).collect()
}

/// `value,rounds_to_tolerance,final_grad_norm,delta`; the tolerance is each
/// record's `run.eps`, and an empty field means it was never reached.
pub fn sweep_summary_csv(results: &[(String, RunRecord)]) -> String {
    let mut out = String::from("value,rounds_to_tolerance,final_grad_norm,delta\n");
    for (value, rec) in results {
        let rounds = rounds_to_tolerance(&rec.telemetry, Metric::GradNorm, rec.config.run.eps)
            .map(|r| r.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{value},{rounds},{},{}",
            fmt_float(rec.final_grad_norm()),
            fmt_float(rec.resolved.delta)
        );
    }
    out
}

/// Writes `summary.csv` plus one subdirectory per value.
pub fn write_sweep(dir: impl AsRef<Path>, axis: &str, results: &[(String, RunRecord)]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.csv"), sweep_summary_csv(results))?;
    for (value, rec) in results {
        let name: String = format!("{axis}={value}")
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || "=._-".contains(c) { c } else { '_' })
            .collect();
        rec.write(dir.join(name))?;
    }
    Ok(())
}
