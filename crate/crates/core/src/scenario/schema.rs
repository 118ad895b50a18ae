//! The published JSON schema of scenario config files.

use serde_json::{json, Value};

/// JSON Schema (draft-07) describing every accepted config shape.
pub fn schema_value() -> Value {
    let position = json!({
        "type": "array",
        "items": { "type": "number" },
        "minItems": 3,
        "maxItems": 3,
        "description": "Position [x, y, z] in scenario length units."
    });
    let core = json!({
        "type": "object",
        "required": ["id", "position"],
        "properties": {
            "id": { "type": "string" },
            "position": position,
            "processing_time": { "type": "number", "minimum": 0.0, "default": 0.0 }
        }
    });
    let bus = json!({
        "type": "object",
        "required": ["id", "position", "arbitration_time", "delivery_time"],
        "properties": {
            "id": { "type": "string" },
            "position": position,
            "arbitration_time": {
                "type": "number", "minimum": 0.0,
                "description": "Lumped per-access arbitration-and-reach time, paid twice."
            },
            "delivery_time": { "type": "number", "minimum": 0.0 },
            "foreign_load": {
                "oneOf": [
                    {
                        "type": "object",
                        "required": ["kind", "value"],
                        "properties": {
                            "kind": { "const": "constant" },
                            "value": { "type": "number", "minimum": 0.0 }
                        }
                    },
                    {
                        "type": "object",
                        "required": ["kind", "mean"],
                        "properties": {
                            "kind": { "const": "exponential" },
                            "mean": { "type": "number", "minimum": 0.0 }
                        }
                    }
                ],
                "default": { "kind": "constant", "value": 0.0 }
            }
        }
    });
    let axon = json!({
        "type": "object",
        "required": ["length", "base_velocity"],
        "properties": {
            "length": { "type": "number", "minimum": 0.0 },
            "base_velocity": { "type": "number", "exclusiveMinimum": 0.0 },
            "myelination_factor": {
                "type": "number", "minimum": 1.0, "maximum": 60.0, "default": 1.0
            }
        }
    });

    let common = json!({
        "length_unit": {
            "type": "string", "default": "au",
            "description": "Name of the scenario-global length unit, recorded in every output."
        },
        "seed": { "type": "integer", "minimum": 0, "default": 0 },
        "output_dir": { "type": "string" }
    });

    let kind = |name: &str, extra_required: Value, extra_props: Value| -> Value {
        let mut props = common.as_object().unwrap().clone();
        props.insert("scenario".to_string(), json!({ "const": name }));
        for (k, v) in extra_props.as_object().unwrap() {
            props.insert(k.clone(), v.clone());
        }
        let mut required = vec![json!("scenario")];
        required.extend(extra_required.as_array().unwrap().clone());
        json!({
            "type": "object",
            "properties": props,
            "required": required
        })
    };

    json!({
        "$schema": "http://json-schema.org/draft-07/schema#",
        "title": "tempologic scenario config",
        "oneOf": [
            kind("lightcone",
                json!(["source_processing_time", "observer_processing_time", "observer_position"]),
                json!({
                    "interaction_speed": { "type": "number", "exclusiveMinimum": 0.0, "default": 1.0 },
                    "source_processing_time": { "type": "number", "minimum": 0.0 },
                    "observer_processing_time": { "type": "number", "minimum": 0.0 },
                    "observer_position": position
                })),
            kind("cache",
                json!(["cores", "caches"]),
                json!({
                    "interaction_speed": { "type": "number", "exclusiveMinimum": 0.0, "default": 1.0 },
                    "cores": { "type": "array", "items": core, "minItems": 1 },
                    "caches": {
                        "type": "array", "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["id", "position", "operate_time"],
                            "properties": {
                                "id": { "type": "string" },
                                "position": position,
                                "operate_time": { "type": "number", "exclusiveMinimum": 0.0 }
                            }
                        }
                    }
                })),
            kind("bus",
                json!(["senders", "receiver", "bus"]),
                json!({
                    "interaction_speed": { "type": "number", "exclusiveMinimum": 0.0, "default": 1.0 },
                    "senders": { "type": "array", "items": core, "minItems": 1 },
                    "receiver": core,
                    "bus": bus
                })),
            kind("hidden-layer",
                json!(["topology", "layer_widths"]),
                json!({
                    "topology": { "enum": ["shared", "parallel"] },
                    "layer_widths": {
                        "type": "array", "items": { "type": "integer", "minimum": 1 }, "minItems": 1
                    },
                    "bus": bus,
                    "link": {
                        "type": "object",
                        "required": ["from", "to", "delay"],
                        "properties": {
                            "from": { "type": "string" },
                            "to": { "type": "string" },
                            "delay": { "type": "number", "minimum": 0.0 }
                        }
                    }
                })),
            kind("shallow-deep",
                json!(["total_neurons", "widths", "bus"]),
                json!({
                    "total_neurons": { "type": "integer", "minimum": 1 },
                    "widths": {
                        "type": "array", "items": { "type": "integer", "minimum": 1 }, "minItems": 1,
                        "description": "Layer widths; must sum to total_neurons."
                    },
                    "bus": bus,
                    "processing_time": { "type": "number", "minimum": 0.0, "default": 0.0 }
                })),
            kind("perf-fit",
                json!(["observations"]),
                json!({
                    "observations": {
                        "type": "array", "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["machine", "speedup", "operand_shrink"],
                            "properties": {
                                "machine": { "type": "string" },
                                "speedup": { "type": "number", "exclusiveMinimum": 1.0 },
                                "operand_shrink": { "type": "number", "exclusiveMinimum": 1.0 }
                            }
                        }
                    }
                })),
            kind("efficiency-sweep",
                json!(["profiles"]),
                json!({
                    "processing_time": { "type": "number", "exclusiveMinimum": 0.0, "default": 1.0 },
                    "profiles": {
                        "type": "array", "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["label"],
                            "properties": {
                                "label": { "type": "string" },
                                "housekeeping_fraction": { "type": "number", "minimum": 0.0, "default": 0.0 },
                                "transfer_fraction": { "type": "number", "minimum": 0.0, "default": 0.0 }
                            }
                        }
                    }
                })),
            kind("assembly-sync",
                json!(["base_frequency", "target", "members", "rc", "eta"]),
                json!({
                    "base_frequency": { "type": "number", "minimum": 0.02, "maximum": 600.0 },
                    "tick_amplitude": { "type": "number", "exclusiveMinimum": 0.0, "default": 1.0 },
                    "base_position": position,
                    "target": {
                        "type": "object",
                        "required": ["id"],
                        "properties": { "id": { "type": "string" }, "position": position }
                    },
                    "members": {
                        "type": "array", "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["id", "base_axon", "target_axon"],
                            "properties": {
                                "id": { "type": "string" },
                                "position": position,
                                "base_axon": axon,
                                "target_axon": axon
                            }
                        }
                    },
                    "rc": { "type": "number", "exclusiveMinimum": 0.0 },
                    "voltage_threshold": { "type": "number", "default": 1.0 },
                    "current_threshold": { "type": "number", "default": 1.0 },
                    "eta": { "type": "number", "exclusiveMinimum": 0.0, "maximum": 1.0 },
                    "max_iterations": { "type": "integer", "minimum": 0, "default": 100 },
                    "tolerance_deg": { "type": "number", "exclusiveMinimum": 0.0, "default": 1e-9 }
                })),
            kind("feedback-staleness",
                json!(["busy_cycles_drop_threshold", "items"]),
                json!({
                    "cycle": { "type": "number", "exclusiveMinimum": 0.0, "default": 1.0 },
                    "busy_cycles_drop_threshold": { "type": "integer", "minimum": 0 },
                    "busy": {
                        "type": "array",
                        "items": {
                            "type": "array",
                            "items": { "type": "number" },
                            "minItems": 2, "maxItems": 2
                        },
                        "default": [],
                        "description": "Half-open busy intervals [start, end) of the receiver."
                    },
                    "items": {
                        "type": "array", "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["source", "arrival_time", "biological_timestamp"],
                            "properties": {
                                "source": { "type": "string" },
                                "arrival_time": { "type": "number", "minimum": 0.0 },
                                "biological_timestamp": { "type": "number" },
                                "charge": { "type": "number", "minimum": 0.0, "default": 1.0 }
                            }
                        }
                    },
                    "receiver_id": { "type": "string", "default": "receiver" }
                }))
        ]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_lists_every_scenario_kind() {
        let schema = schema_value();
        let kinds: Vec<&str> = schema["oneOf"]
            .as_array()
            .unwrap()
            .iter()
            .map(|k| k["properties"]["scenario"]["const"].as_str().unwrap())
            .collect();
        assert_eq!(kinds, super::super::config::SCENARIO_KINDS);
    }
}
