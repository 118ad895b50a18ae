//! Config-driven scenario runner behind the `tempologic` CLI.
//!
//! A scenario is one JSON config naming its kind plus the parameters for
//! that kind. Running it produces a trace CSV, a summary (JSON and CSV), a
//! run manifest embedding the effective config, and for some kinds extra
//! plot-ready tables. Sweeps rerun one scenario across a range of a
//! declared scalar parameter and merge the rows into a single table.

mod artifacts;
mod config;
mod run;
mod schema;
mod sweep;

pub use artifacts::{run_scenario, RunPaths};
pub use config::{
    parse_config, AssemblyMemberSpec, AssemblySyncParams, AxonSpec, BusParams, CacheParams,
    EfficiencySweepParams, FeedbackItemSpec, FeedbackStalenessParams, HiddenLayerParams,
    LightconeParams, PerfFitParams, Scenario, ScenarioConfig, ShallowDeepParams, TargetSpec,
    Topology, SCENARIO_KINDS,
};
pub use run::{execute, feedback_queue_of, CsvTable, ScenarioOutput};
pub use schema::schema_value;
pub use sweep::{run_sweep, sweep_values, sweepable_params};
