//! Parameter sweeps: one summary row per value of a declared sweepable
//! scalar, merged into a table sorted by the parameter.

use std::path::Path;

use serde_json::{json, Value};

use super::artifacts::{write_outputs, RunPaths};
use super::config::{Scenario, ScenarioConfig};
use super::run::{execute, CsvTable, ScenarioOutput};
use crate::error::{Error, Result};
use crate::fabric::Core;
use crate::perfmodel::{efficiency, operand_speedup, WorkloadProfile};
use crate::timespace::SpatialPoint;

/// Sweepable scalar parameters per scenario kind.
pub fn sweepable_params(kind: &str) -> &'static [&'static str] {
    match kind {
        "lightcone" => &[
            "source_processing_time",
            "observer_processing_time",
            "interaction_speed",
        ],
        "cache" => &["operate_time", "interaction_speed"],
        "bus" => &["L", "arbitration_time", "delivery_time"],
        "hidden-layer" => &["L"],
        "shallow-deep" => &["processing_time"],
        "perf-fit" => &["fp0"],
        "efficiency-sweep" => &["transfer_fraction"],
        "assembly-sync" => &["eta"],
        "feedback-staleness" => &["busy_cycles_drop_threshold"],
        _ => &[],
    }
}

/// The `steps` evenly spaced values from `from` to `to` inclusive.
pub fn sweep_values(from: f64, to: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::config("sweep needs at least one step"));
    }
    if !from.is_finite() || !to.is_finite() {
        return Err(Error::config("sweep bounds must be finite"));
    }
    if steps == 1 {
        return Ok(vec![from]);
    }
    let span = to - from;
    Ok((0..steps)
        .map(|i| from + span * i as f64 / (steps - 1) as f64)
        .collect())
}

fn unknown_param(kind: &str, param: &str) -> Error {
    Error::config(format!(
        "parameter '{param}' is not sweepable for scenario '{kind}'; sweepable: {}",
        sweepable_params(kind).join(", ")
    ))
}

/// Synthetic sender layer for width sweeps: evenly spaced along x, ids in
/// grant order.
fn synthesized_senders(width: u32) -> Vec<Core> {
    (0..width)
        .map(|k| Core {
            id: format!("n{k:03}"),
            position: SpatialPoint {
                x: 0.1 * (k as f64 + 1.0),
                y: 0.0,
                z: 0.0,
            },
            processing_time: 0.0,
        })
        .collect()
}

fn round_width(value: f64) -> Result<u32> {
    let rounded = value.round();
    if !(1.0..=1e6).contains(&rounded) {
        return Err(Error::config(format!(
            "layer width {value} out of range [1, 1e6]"
        )));
    }
    Ok(rounded as u32)
}

/// Applies one swept value to a copy of the config. Integer-valued
/// parameters are rounded; the returned config is re-validated.
fn apply_param(config: &ScenarioConfig, param: &str, value: f64) -> Result<ScenarioConfig> {
    let mut modified = config.clone();
    let kind = config.kind();
    match (&mut modified.scenario, param) {
        (Scenario::Lightcone(p), "source_processing_time") => p.source_processing_time = value,
        (Scenario::Lightcone(p), "observer_processing_time") => p.observer_processing_time = value,
        (Scenario::Lightcone(p), "interaction_speed") => p.interaction_speed = value,
        (Scenario::Cache(p), "operate_time") => {
            for cache in &mut p.caches {
                cache.operate_time = value;
            }
        }
        (Scenario::Cache(p), "interaction_speed") => p.interaction_speed = value,
        (Scenario::Bus(p), "L") => p.senders = synthesized_senders(round_width(value)?),
        (Scenario::Bus(p), "arbitration_time") => p.bus.arbitration_time = value,
        (Scenario::Bus(p), "delivery_time") => p.bus.delivery_time = value,
        (Scenario::HiddenLayer(p), "L") => p.layer_widths = vec![round_width(value)?],
        (Scenario::ShallowDeep(p), "processing_time") => p.processing_time = value,
        (Scenario::EfficiencySweep(p), "transfer_fraction") => {
            let mut profile = p.profiles[0].clone();
            profile.transfer_fraction = value;
            p.profiles = vec![profile];
        }
        (Scenario::AssemblySync(p), "eta") => p.eta = value,
        (Scenario::FeedbackStaleness(p), "busy_cycles_drop_threshold") => {
            let rounded = value.round();
            if !(0.0..=1e6).contains(&rounded) {
                return Err(Error::config(format!(
                    "drop threshold {value} out of range [0, 1e6]"
                )));
            }
            p.busy_cycles_drop_threshold = rounded as u32;
        }
        _ => return Err(unknown_param(kind, param)),
    }
    modified.validate()?;
    Ok(modified)
}

/// Column names of one sweep row, without the leading parameter column.
fn row_fields(kind: &str) -> &'static [&'static str] {
    match kind {
        "lightcone" => &["transmission_time", "observer_cone_start", "apparent_time"],
        "cache" => &["apparent_access_time", "apparent_speed"],
        "bus" => &["receiver_transmission_time"],
        "hidden-layer" => &["transmission_time"],
        "shallow-deep" => &[
            "wide_max_layer_transmission",
            "arranged_max_layer_transmission",
            "wide_total_apparent",
            "arranged_total_apparent",
        ],
        "perf-fit" => &["speedup"],
        "efficiency-sweep" => &["efficiency", "ratio_vs_baseline"],
        "assembly-sync" => &["iterations", "final_spread_deg", "converged"],
        "feedback-staleness" => &["delivered", "dropped", "mean_staleness"],
        _ => &[],
    }
}

fn field(summary: &Value, pointer: &str) -> Result<Value> {
    summary
        .pointer(pointer)
        .cloned()
        .ok_or_else(|| Error::domain(format!("summary missing field {pointer}")))
}

fn value_string(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn sweep_point(config: &ScenarioConfig, param: &str, value: f64) -> Result<(f64, Vec<Value>)> {
    let kind = config.kind();
    // perf-fit sweeps the model input itself rather than a config field.
    if kind == "perf-fit" {
        if param != "fp0" {
            return Err(unknown_param(kind, param));
        }
        let shrink = match &config.scenario {
            Scenario::PerfFit(p) => p.observations[0].operand_shrink,
            _ => unreachable!(),
        };
        if !value.is_finite() || value < 0.0 {
            return Err(Error::config(format!(
                "fp0 must be finite and >= 0, got {value}"
            )));
        }
        let speedup = operand_speedup(value, shrink)?;
        return Ok((value, vec![json!(speedup)]));
    }

    let modified = apply_param(config, param, value)?;
    let applied = match (&modified.scenario, param) {
        (Scenario::Bus(p), "L") => p.senders.len() as f64,
        (Scenario::HiddenLayer(p), "L") => p.layer_widths[0] as f64,
        (Scenario::FeedbackStaleness(p), "busy_cycles_drop_threshold") => {
            p.busy_cycles_drop_threshold as f64
        }
        _ => value,
    };
    let output = execute(&modified)?;
    let s = &output.summary;
    let row = match kind {
        "lightcone" => vec![
            field(s, "/transmission_time")?,
            field(s, "/observer_cone_start")?,
            field(s, "/apparent_time")?,
        ],
        "cache" => vec![
            field(s, "/accesses/0/apparent_access_time")?,
            field(s, "/accesses/0/apparent_speed")?,
        ],
        "bus" => vec![field(s, "/receiver_transmission_time")?],
        "hidden-layer" => vec![field(s, "/rows/0/transmission_time")?],
        "shallow-deep" => vec![
            field(s, "/wide/max_layer_transmission_time")?,
            field(s, "/arranged/max_layer_transmission_time")?,
            field(s, "/wide/total_apparent_time")?,
            field(s, "/arranged/total_apparent_time")?,
        ],
        "efficiency-sweep" => {
            let e = field(s, "/profiles/0/efficiency")?
                .as_f64()
                .ok_or_else(|| Error::domain("efficiency not a number"))?;
            let baseline_profile = match &modified.scenario {
                Scenario::EfficiencySweep(p) => WorkloadProfile {
                    label: "baseline".to_string(),
                    housekeeping_fraction: p.profiles[0].housekeeping_fraction,
                    transfer_fraction: 0.0,
                },
                _ => unreachable!(),
            };
            let processing_time = match &modified.scenario {
                Scenario::EfficiencySweep(p) => p.processing_time,
                _ => unreachable!(),
            };
            let baseline = efficiency(&baseline_profile, processing_time)?;
            vec![json!(e), json!(baseline / e)]
        }
        "assembly-sync" => vec![
            field(s, "/iterations")?,
            s.pointer("/spread_history_deg")
                .and_then(|h| h.as_array())
                .and_then(|h| h.last())
                .cloned()
                .unwrap_or(Value::Null),
            field(s, "/converged")?,
        ],
        "feedback-staleness" => vec![
            json!(s
                .pointer("/delivered")
                .and_then(Value::as_array)
                .map(Vec::len)
                .unwrap_or(0)),
            json!(s
                .pointer("/dropped")
                .and_then(Value::as_array)
                .map(Vec::len)
                .unwrap_or(0)),
            field(s, "/mean_staleness")?,
        ],
        other => return Err(unknown_param(other, param)),
    };
    Ok((applied, row))
}

/// Runs the sweep and writes `sweep.csv`, `summary.json` and
/// `manifest.json` under `out_dir`. Rows are sorted by the parameter.
pub fn run_sweep(
    config: &ScenarioConfig,
    param: &str,
    values: &[f64],
    out_dir: &Path,
) -> Result<RunPaths> {
    let kind = config.kind();
    if !sweepable_params(kind).contains(&param) {
        return Err(unknown_param(kind, param));
    }
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }

    let mut points: Vec<(f64, Vec<Value>)> = values
        .iter()
        .map(|&v| sweep_point(config, param, v))
        .collect::<Result<_>>()?;
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    let fields = row_fields(kind);
    let mut header = vec![param.to_string()];
    header.extend(fields.iter().map(|f| f.to_string()));
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|(v, row)| {
            let mut r = vec![v.to_string()];
            r.extend(row.iter().map(value_string));
            r
        })
        .collect();

    let mut summary = json!({
        "param": param,
        "values": points.iter().map(|(v, _)| *v).collect::<Vec<f64>>(),
        "rows": points
            .iter()
            .map(|(v, row)| {
                let mut obj = serde_json::Map::new();
                obj.insert(param.to_string(), json!(v));
                for (name, val) in fields.iter().zip(row) {
                    obj.insert(name.to_string(), val.clone());
                }
                Value::Object(obj)
            })
            .collect::<Vec<Value>>(),
    });

    // The efficiency sweep reports where the degradation landmarks are
    // first crossed.
    if kind == "efficiency-sweep" {
        let mut thresholds = serde_json::Map::new();
        for target in [10.0, 100.0, 1000.0] {
            let hit = points.iter().find(|(_, row)| {
                row.get(1).and_then(Value::as_f64).is_some_and(|r| r >= target)
            });
            thresholds.insert(
                format!("ratio_ge_{target}_at"),
                hit.map(|(v, _)| json!(v)).unwrap_or(Value::Null),
            );
        }
        summary
            .as_object_mut()
            .expect("object")
            .insert("thresholds".to_string(), Value::Object(thresholds));
    }

    let output = ScenarioOutput {
        trace: Vec::new(),
        summary,
        tables: vec![CsvTable {
            file_name: "sweep.csv".to_string(),
            header,
            rows,
        }],
    };
    let extra = json!({
        "sweep": { "param": param, "values": values }
    });
    write_outputs(config, &output, out_dir, Some(extra))
}
