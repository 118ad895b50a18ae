//! Scenario configuration: JSON parsing and validation.
//!
//! A config file is one JSON object with a `scenario` tag naming the kind,
//! the scenario-global fields (`length_unit`, `seed`, `output_dir`) and the
//! kind-specific parameters alongside. Parsing is two-step — tag first,
//! then the matching parameter struct — so an unknown kind produces an
//! error that names every valid kind.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fabric::{BusChannel, CacheMemory, Core, ParallelLink};
use crate::neuro::{BASE_FREQUENCY_BAND, DEFAULT_SPREAD_TOLERANCE_DEG, MYELINATION_FACTOR_MAX};
use crate::perfmodel::{BenchmarkObservation, WorkloadProfile};
use crate::timespace::SpatialPoint;

/// Every scenario kind the runner knows, in CLI spelling.
pub const SCENARIO_KINDS: [&str; 9] = [
    "lightcone",
    "cache",
    "bus",
    "hidden-layer",
    "shallow-deep",
    "perf-fit",
    "efficiency-sweep",
    "assembly-sync",
    "feedback-staleness",
];

fn default_length_unit() -> String {
    "au".to_string()
}

fn one() -> f64 {
    1.0
}

/// A parsed and validated scenario configuration.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub length_unit: String,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub scenario: Scenario,
}

#[derive(Debug, Clone)]
pub enum Scenario {
    Lightcone(LightconeParams),
    Cache(CacheParams),
    Bus(BusParams),
    HiddenLayer(HiddenLayerParams),
    ShallowDeep(ShallowDeepParams),
    PerfFit(PerfFitParams),
    EfficiencySweep(EfficiencySweepParams),
    AssemblySync(AssemblySyncParams),
    FeedbackStaleness(FeedbackStalenessParams),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Lightcone(_) => "lightcone",
            Scenario::Cache(_) => "cache",
            Scenario::Bus(_) => "bus",
            Scenario::HiddenLayer(_) => "hidden-layer",
            Scenario::ShallowDeep(_) => "shallow-deep",
            Scenario::PerfFit(_) => "perf-fit",
            Scenario::EfficiencySweep(_) => "efficiency-sweep",
            Scenario::AssemblySync(_) => "assembly-sync",
            Scenario::FeedbackStaleness(_) => "feedback-staleness",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LightconeParams {
    #[serde(default = "one")]
    pub interaction_speed: f64,
    pub source_processing_time: f64,
    pub observer_processing_time: f64,
    pub observer_position: SpatialPoint,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheParams {
    #[serde(default = "one")]
    pub interaction_speed: f64,
    pub cores: Vec<Core>,
    pub caches: Vec<CacheMemory>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BusParams {
    #[serde(default = "one")]
    pub interaction_speed: f64,
    pub senders: Vec<Core>,
    pub receiver: Core,
    pub bus: BusChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Shared,
    Parallel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HiddenLayerParams {
    pub topology: Topology,
    pub layer_widths: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bus: Option<BusChannel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<ParallelLink>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShallowDeepParams {
    pub total_neurons: u32,
    pub widths: Vec<u32>,
    pub bus: BusChannel,
    #[serde(default)]
    pub processing_time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerfFitParams {
    pub observations: Vec<BenchmarkObservation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EfficiencySweepParams {
    #[serde(default = "one")]
    pub processing_time: f64,
    pub profiles: Vec<WorkloadProfile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxonSpec {
    pub length: f64,
    pub base_velocity: f64,
    #[serde(default = "one")]
    pub myelination_factor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssemblyMemberSpec {
    pub id: String,
    #[serde(default)]
    pub position: SpatialPoint,
    /// Conduction path of the time-base tick to this member.
    pub base_axon: AxonSpec,
    /// Conduction path from this member to the target.
    pub target_axon: AxonSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetSpec {
    pub id: String,
    #[serde(default)]
    pub position: SpatialPoint,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssemblySyncParams {
    pub base_frequency: f64,
    #[serde(default = "one")]
    pub tick_amplitude: f64,
    #[serde(default)]
    pub base_position: SpatialPoint,
    pub target: TargetSpec,
    pub members: Vec<AssemblyMemberSpec>,
    /// Shared membrane time constant; assembly members are anatomically
    /// identical.
    pub rc: f64,
    #[serde(default = "one")]
    pub voltage_threshold: f64,
    #[serde(default = "one")]
    pub current_threshold: f64,
    pub eta: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance_deg")]
    pub tolerance_deg: f64,
}

fn default_max_iterations() -> usize {
    100
}

fn default_tolerance_deg() -> f64 {
    DEFAULT_SPREAD_TOLERANCE_DEG
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackItemSpec {
    pub source: String,
    pub arrival_time: f64,
    pub biological_timestamp: f64,
    #[serde(default = "one")]
    pub charge: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackStalenessParams {
    #[serde(default = "one")]
    pub cycle: f64,
    pub busy_cycles_drop_threshold: u32,
    /// Half-open busy intervals `[start, end)` of the receiver.
    #[serde(default)]
    pub busy: Vec<(f64, f64)>,
    pub items: Vec<FeedbackItemSpec>,
    #[serde(default = "default_receiver_id")]
    pub receiver_id: String,
}

fn default_receiver_id() -> String {
    "receiver".to_string()
}

#[derive(Deserialize)]
struct CommonFields {
    #[serde(default = "default_length_unit")]
    length_unit: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

fn bad_json(e: serde_json::Error) -> Error {
    Error::config(format!("invalid JSON: {e}"))
}

/// Parses and validates a scenario config from JSON text.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let value: Value = serde_json::from_str(text).map_err(bad_json)?;
    let kind = value
        .get("scenario")
        .and_then(Value::as_str)
        .ok_or_else(|| {
            Error::config(format!(
                "missing 'scenario' field; valid kinds: {}",
                SCENARIO_KINDS.join(", ")
            ))
        })?
        .to_string();
    let common: CommonFields = serde_json::from_value(value.clone()).map_err(bad_json)?;
    let scenario = match kind.as_str() {
        "lightcone" => Scenario::Lightcone(serde_json::from_value(value).map_err(bad_json)?),
        "cache" => Scenario::Cache(serde_json::from_value(value).map_err(bad_json)?),
        "bus" => Scenario::Bus(serde_json::from_value(value).map_err(bad_json)?),
        "hidden-layer" => Scenario::HiddenLayer(serde_json::from_value(value).map_err(bad_json)?),
        "shallow-deep" => Scenario::ShallowDeep(serde_json::from_value(value).map_err(bad_json)?),
        "perf-fit" => Scenario::PerfFit(serde_json::from_value(value).map_err(bad_json)?),
        "efficiency-sweep" => {
            Scenario::EfficiencySweep(serde_json::from_value(value).map_err(bad_json)?)
        }
        "assembly-sync" => {
            Scenario::AssemblySync(serde_json::from_value(value).map_err(bad_json)?)
        }
        "feedback-staleness" => {
            Scenario::FeedbackStaleness(serde_json::from_value(value).map_err(bad_json)?)
        }
        other => {
            return Err(Error::config(format!(
                "unknown scenario kind '{other}'; valid kinds: {}",
                SCENARIO_KINDS.join(", ")
            )))
        }
    };
    let config = ScenarioConfig {
        length_unit: common.length_unit,
        seed: common.seed,
        output_dir: common.output_dir,
        scenario,
    };
    config.validate()?;
    Ok(config)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "{name} must be finite and >= 0, got {v}"
        )))
    }
}

fn unique_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if id.is_empty() {
            return Err(Error::config("component ids must not be empty"));
        }
        if !seen.insert(id) {
            return Err(Error::config(format!("duplicate component id '{id}'")));
        }
    }
    Ok(())
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    }
}

impl ScenarioConfig {
    pub fn kind(&self) -> &'static str {
        self.scenario.kind()
    }

    pub fn validate(&self) -> Result<()> {
        if self.length_unit.is_empty() {
            return Err(Error::config("length_unit must not be empty"));
        }
        match &self.scenario {
            Scenario::Lightcone(p) => {
                positive("interaction_speed", p.interaction_speed)?;
                non_negative("source_processing_time", p.source_processing_time)?;
                non_negative("observer_processing_time", p.observer_processing_time)?;
            }
            Scenario::Cache(p) => {
                positive("interaction_speed", p.interaction_speed)?;
                if p.cores.is_empty() || p.caches.is_empty() {
                    return Err(Error::config(
                        "cache scenario needs at least one core and one cache",
                    ));
                }
                for c in &p.cores {
                    c.validate().map_err(as_config)?;
                }
                for c in &p.caches {
                    positive(&format!("cache '{}' operate_time", c.id), c.operate_time)?;
                }
                unique_ids(
                    p.cores
                        .iter()
                        .map(|c| c.id.as_str())
                        .chain(p.caches.iter().map(|c| c.id.as_str())),
                )?;
            }
            Scenario::Bus(p) => {
                positive("interaction_speed", p.interaction_speed)?;
                if p.senders.is_empty() {
                    return Err(Error::config("bus scenario needs at least one sender"));
                }
                for s in &p.senders {
                    s.validate().map_err(as_config)?;
                }
                p.receiver.validate().map_err(as_config)?;
                p.bus.validate().map_err(as_config)?;
                unique_ids(
                    p.senders
                        .iter()
                        .map(|s| s.id.as_str())
                        .chain([p.receiver.id.as_str(), p.bus.id.as_str()]),
                )?;
            }
            Scenario::HiddenLayer(p) => {
                if p.layer_widths.is_empty() {
                    return Err(Error::config("layer_widths must not be empty"));
                }
                if p.layer_widths.iter().any(|&w| w < 1) {
                    return Err(Error::config("layer widths must be >= 1"));
                }
                match p.topology {
                    Topology::Shared => {
                        let bus = p.bus.as_ref().ok_or_else(|| {
                            Error::config("shared topology requires a 'bus' section")
                        })?;
                        bus.validate().map_err(as_config)?;
                    }
                    Topology::Parallel => {
                        let link = p.link.as_ref().ok_or_else(|| {
                            Error::config("parallel topology requires a 'link' section")
                        })?;
                        link.validate().map_err(as_config)?;
                    }
                }
            }
            Scenario::ShallowDeep(p) => {
                if p.widths.is_empty() {
                    return Err(Error::config("widths must not be empty"));
                }
                if p.widths.iter().any(|&w| w < 1) {
                    return Err(Error::config("layer widths must be >= 1"));
                }
                let sum: u64 = p.widths.iter().map(|&w| w as u64).sum();
                if sum != p.total_neurons as u64 {
                    return Err(Error::config(format!(
                        "widths {:?} sum to {sum}, expected total of {}",
                        p.widths, p.total_neurons
                    )));
                }
                p.bus.validate().map_err(as_config)?;
                non_negative("processing_time", p.processing_time)?;
            }
            Scenario::PerfFit(p) => {
                if p.observations.is_empty() {
                    return Err(Error::config("perf-fit needs at least one observation"));
                }
                unique_ids(p.observations.iter().map(|o| o.machine.as_str()))?;
                for o in &p.observations {
                    if !o.operand_shrink.is_finite() || o.operand_shrink <= 1.0 {
                        return Err(Error::config(format!(
                            "observation '{}': operand_shrink must be > 1",
                            o.machine
                        )));
                    }
                    if !o.speedup.is_finite() || o.speedup <= 1.0 || o.speedup >= o.operand_shrink
                    {
                        return Err(Error::config(format!(
                            "observation '{}': speedup must lie in (1, operand_shrink)",
                            o.machine
                        )));
                    }
                }
            }
            Scenario::EfficiencySweep(p) => {
                positive("processing_time", p.processing_time)?;
                if p.profiles.is_empty() {
                    return Err(Error::config(
                        "efficiency-sweep needs at least one profile",
                    ));
                }
                unique_ids(p.profiles.iter().map(|pr| pr.label.as_str()))?;
                for pr in &p.profiles {
                    pr.validate().map_err(as_config)?;
                }
            }
            Scenario::AssemblySync(p) => {
                let (lo, hi) = BASE_FREQUENCY_BAND;
                if !p.base_frequency.is_finite() || p.base_frequency < lo || p.base_frequency > hi
                {
                    return Err(Error::config(format!(
                        "base_frequency {} Hz outside the [{lo}, {hi}] Hz band",
                        p.base_frequency
                    )));
                }
                positive("tick_amplitude", p.tick_amplitude)?;
                positive("rc", p.rc)?;
                if p.members.is_empty() {
                    return Err(Error::config("assembly-sync needs at least one member"));
                }
                unique_ids(
                    p.members
                        .iter()
                        .map(|m| m.id.as_str())
                        .chain([p.target.id.as_str(), "base"]),
                )?;
                if !(p.eta > 0.0 && p.eta <= 1.0) {
                    return Err(Error::config(format!(
                        "eta must lie in (0, 1], got {}",
                        p.eta
                    )));
                }
                positive("tolerance_deg", p.tolerance_deg)?;
                for m in &p.members {
                    for (name, a) in [("base_axon", &m.base_axon), ("target_axon", &m.target_axon)]
                    {
                        non_negative(&format!("member '{}' {name} length", m.id), a.length)?;
                        positive(
                            &format!("member '{}' {name} base_velocity", m.id),
                            a.base_velocity,
                        )?;
                        if !(1.0..=MYELINATION_FACTOR_MAX).contains(&a.myelination_factor) {
                            return Err(Error::config(format!(
                                "member '{}' {name} myelination_factor must lie in [1, {MYELINATION_FACTOR_MAX}]",
                                m.id
                            )));
                        }
                    }
                }
            }
            Scenario::FeedbackStaleness(p) => {
                positive("cycle", p.cycle)?;
                if p.items.is_empty() {
                    return Err(Error::config(
                        "feedback-staleness needs at least one item",
                    ));
                }
                for (i, item) in p.items.iter().enumerate() {
                    non_negative(&format!("items[{i}].arrival_time"), item.arrival_time)?;
                    if !item.biological_timestamp.is_finite() {
                        return Err(Error::config(format!(
                            "items[{i}].biological_timestamp must be finite"
                        )));
                    }
                    if item.biological_timestamp > item.arrival_time {
                        return Err(Error::config(format!(
                            "items[{i}]: carried timestamp {} is later than physical arrival {}",
                            item.biological_timestamp, item.arrival_time
                        )));
                    }
                    non_negative(&format!("items[{i}].charge"), item.charge)?;
                    if item.source.is_empty() {
                        return Err(Error::config(format!("items[{i}].source must not be empty")));
                    }
                    if item.source == p.receiver_id {
                        return Err(Error::config(format!(
                            "items[{i}].source collides with the receiver id '{}'",
                            p.receiver_id
                        )));
                    }
                }
                for (i, &(start, end)) in p.busy.iter().enumerate() {
                    if !(start.is_finite() && end.is_finite() && start < end && start >= 0.0) {
                        return Err(Error::config(format!(
                            "busy[{i}] must be a finite interval [start, end) with 0 <= start < end"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The full effective config as one JSON object — exactly what
    /// `parse_config` accepts, so a manifest can reproduce the run.
    pub fn to_value(&self) -> Value {
        let mut object = match &self.scenario {
            Scenario::Lightcone(p) => serde_json::to_value(p),
            Scenario::Cache(p) => serde_json::to_value(p),
            Scenario::Bus(p) => serde_json::to_value(p),
            Scenario::HiddenLayer(p) => serde_json::to_value(p),
            Scenario::ShallowDeep(p) => serde_json::to_value(p),
            Scenario::PerfFit(p) => serde_json::to_value(p),
            Scenario::EfficiencySweep(p) => serde_json::to_value(p),
            Scenario::AssemblySync(p) => serde_json::to_value(p),
            Scenario::FeedbackStaleness(p) => serde_json::to_value(p),
        }
        .expect("parameter structs serialize to objects");
        let map = object.as_object_mut().expect("object");
        map.insert("scenario".to_string(), Value::from(self.kind()));
        map.insert("length_unit".to_string(), Value::from(self.length_unit.clone()));
        map.insert("seed".to_string(), Value::from(self.seed));
        if let Some(dir) = &self.output_dir {
            map.insert(
                "output_dir".to_string(),
                Value::from(dir.to_string_lossy().into_owned()),
            );
        }
        object
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_scenario_kind_names_the_valid_ones() {
        let err = parse_config(r#"{"scenario": "warp"}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown scenario kind 'warp'"));
        for kind in SCENARIO_KINDS {
            assert!(msg.contains(kind), "missing {kind} in {msg}");
        }
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_tag_is_a_config_error() {
        let err = parse_config(r#"{"seed": 1}"#).unwrap_err();
        assert!(err.to_string().contains("missing 'scenario'"));
    }

    #[test]
    fn invalid_json_is_a_config_error() {
        let err = parse_config("{not json").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn lightcone_config_round_trips_through_its_value() {
        let text = r#"{
            "scenario": "lightcone",
            "seed": 7,
            "length_unit": "au",
            "interaction_speed": 1.0,
            "source_processing_time": 1.0,
            "observer_processing_time": 1.0,
            "observer_position": [1.0, 0.0, 0.0]
        }"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.kind(), "lightcone");
        let round = parse_config(&cfg.to_value().to_string()).unwrap();
        assert_eq!(round.to_value(), cfg.to_value());
    }

    #[test]
    fn semantic_validation_rejects_bad_values() {
        let err = parse_config(
            r#"{"scenario": "lightcone", "interaction_speed": 0.0,
                "source_processing_time": 1.0, "observer_processing_time": 1.0,
                "observer_position": [1, 0, 0]}"#,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);

        let err = parse_config(
            r#"{"scenario": "shallow-deep", "total_neurons": 9, "widths": [7, 1],
                "bus": {"id": "b", "position": [0, 0.5, 0], "arbitration_time": 1.0,
                        "delivery_time": 0.0}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("sum to 8"));
    }

    #[test]
    fn perf_fit_validation_enforces_feasible_speedups() {
        let bad = r#"{"scenario": "perf-fit", "observations":
            [{"machine": "m", "speedup": 4.0, "operand_shrink": 4.0}]}"#;
        assert!(parse_config(bad).is_err());
        let good = r#"{"scenario": "perf-fit", "observations":
            [{"machine": "m", "speedup": 3.01, "operand_shrink": 4.0}]}"#;
        assert!(parse_config(good).is_ok());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = parse_config(
            r#"{"scenario": "cache", "interaction_speed": 1.0,
                "cores": [{"id": "a", "position": [0,0,0]}],
                "caches": [{"id": "a", "position": [0,1,0], "operate_time": 1.0}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate component id 'a'"));
    }

    #[test]
    fn feedback_staleness_rejects_future_stamps() {
        let err = parse_config(
            r#"{"scenario": "feedback-staleness", "busy_cycles_drop_threshold": 2,
                "items": [{"source": "n0", "arrival_time": 1.0, "biological_timestamp": 2.0}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("later than physical arrival"));
    }
}
