//! Scenario execution: wiring components, running the engine, collecting
//! traces, summaries and plot-ready tables.

use std::cell::RefCell;
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::engine::{Component, ComponentId, Engine, EngineCtx, EventKind, Payload, SimEvent};
use crate::error::{Error, Result};
use crate::fabric::{
    cache_access_scenario_at, hidden_layer_scaling, least_squares_slope, parallel_link_scaling,
    shallow_vs_deep, shared_bus_transfer, LayerBreakdown, ScalingRow,
};
use crate::neuro::{
    arrival_phase_update, busy_at, circular_spread_deg, phase_lock, phase_shift,
    superposed_charge, Axon, BaseOscillator, DeliveredItem, DeliveryCycles, DroppedItem,
    FeedbackItem, FeedbackQueue, LockOutcome, OscillatorNeuron, Spike, SpikeDecision,
};
use crate::perfmodel::{efficiency, fit_housekeeping, operand_speedup};
use crate::timespace::{light_cone_trace, propagation_delay, InteractionSpeed, SpatialPoint};
use crate::trace::TraceRecord;

use super::config::{
    AssemblySyncParams, BusParams, CacheParams, EfficiencySweepParams, FeedbackStalenessParams,
    HiddenLayerParams, LightconeParams, PerfFitParams, Scenario, ScenarioConfig,
    ShallowDeepParams, Topology,
};

/// One CSV artifact of a run.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub file_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Everything a scenario run produces, before any file is written.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub trace: Vec<TraceRecord>,
    pub summary: Value,
    pub tables: Vec<CsvTable>,
}

fn fmt(v: f64) -> String {
    v.to_string()
}

/// Runs the configured scenario in memory.
pub fn execute(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    match &config.scenario {
        Scenario::Lightcone(p) => run_lightcone(p),
        Scenario::Cache(p) => run_cache(p),
        Scenario::Bus(p) => run_bus(p, config.seed),
        Scenario::HiddenLayer(p) => run_hidden_layer(p, config.seed),
        Scenario::ShallowDeep(p) => run_shallow_deep(p, config.seed),
        Scenario::PerfFit(p) => run_perf_fit(p),
        Scenario::EfficiencySweep(p) => run_efficiency(p),
        Scenario::AssemblySync(p) => run_assembly_sync(p, config.seed),
        Scenario::FeedbackStaleness(p) => run_feedback_staleness(p, config.seed),
    }
}

// ---------------------------------------------------------------------------
// Shared payload for engine-backed scenarios
// ---------------------------------------------------------------------------

#[derive(Clone)]
enum RunPayload {
    /// The source finished processing and switches its light on.
    SourceLight,
    /// The source's light reaches the observer.
    Notice,
    /// The observer finished processing; its own cone starts.
    ObserverLight,
    /// Time-base tick at its source.
    Tick,
    /// Time-base tick arriving at an assembly member.
    MemberTick,
    /// A member's spike arriving at the target.
    SpikeArrival {
        member: usize,
        emit_time: f64,
        charge: f64,
    },
    /// A feedback message arriving at the receiver queue.
    FeedbackMsg {
        biological_timestamp: f64,
        charge: f64,
    },
    /// Delivery-cycle boundary of the feedback receiver.
    Cycle,
}

impl Payload for RunPayload {
    fn detail(&self) -> String {
        match self {
            RunPayload::SourceLight => "processing done, light on".to_string(),
            RunPayload::Notice => "source light noticed".to_string(),
            RunPayload::ObserverLight => "light-cone start".to_string(),
            RunPayload::Tick => "base tick emitted".to_string(),
            RunPayload::MemberTick => "base tick arrival".to_string(),
            RunPayload::SpikeArrival {
                emit_time, charge, ..
            } => format!("spike arrival, emitted at {emit_time}, charge {charge}"),
            RunPayload::FeedbackMsg {
                biological_timestamp,
                charge,
            } => format!("feedback, carried stamp {biological_timestamp}, charge {charge}"),
            RunPayload::Cycle => "delivery cycle".to_string(),
        }
    }
}

// ---------------------------------------------------------------------------
// lightcone
// ---------------------------------------------------------------------------

struct LightSource {
    observer: ComponentId,
    transmission: f64,
}

impl Component<RunPayload> for LightSource {
    fn on_event(
        &mut self,
        event: &SimEvent<RunPayload>,
        ctx: &mut EngineCtx<'_, RunPayload>,
    ) -> Result<()> {
        if let RunPayload::SourceLight = event.payload {
            ctx.note(
                event.target,
                "note",
                format!("processing [0, {}) finished", ctx.now()),
            );
            ctx.schedule(
                event.target,
                self.observer,
                ctx.now() + self.transmission,
                EventKind::SignalArrival,
                RunPayload::Notice,
            )?;
        }
        Ok(())
    }
}

struct LightObserver {
    processing_time: f64,
}

impl Component<RunPayload> for LightObserver {
    fn on_event(
        &mut self,
        event: &SimEvent<RunPayload>,
        ctx: &mut EngineCtx<'_, RunPayload>,
    ) -> Result<()> {
        match event.payload {
            RunPayload::Notice => {
                let now = ctx.now();
                ctx.note(
                    event.target,
                    "note",
                    format!("processing [{now}, {})", now + self.processing_time),
                );
                ctx.schedule(
                    event.target,
                    event.target,
                    now + self.processing_time,
                    EventKind::SignalArrival,
                    RunPayload::ObserverLight,
                )?;
            }
            RunPayload::ObserverLight => {}
            _ => {}
        }
        Ok(())
    }
}

fn run_lightcone(p: &LightconeParams) -> Result<ScenarioOutput> {
    let speed = InteractionSpeed::new(p.interaction_speed)?;
    let cone = light_cone_trace(
        p.source_processing_time,
        p.observer_processing_time,
        p.observer_position,
        speed,
    )?;

    let mut engine: Engine<RunPayload> = Engine::new(0);
    let observer = engine.add_component(
        "observer",
        p.observer_position,
        Box::new(LightObserver {
            processing_time: p.observer_processing_time,
        }),
    );
    let source = engine.add_component(
        "source",
        SpatialPoint::ORIGIN,
        Box::new(LightSource {
            observer,
            transmission: cone.transmission,
        }),
    );
    engine.schedule(
        source,
        source,
        p.source_processing_time,
        EventKind::SignalArrival,
        RunPayload::SourceLight,
    )?;
    engine.run_until(cone.observer_cone_start)?;
    let trace = engine.into_trace();

    let traced_end_time = trace.last().map(|r| r.time).unwrap_or(0.0);
    let traced_apparent_time =
        (cone.transmission * cone.transmission + traced_end_time * traced_end_time).sqrt();
    let summary = json!({
        "source_processing_time": p.source_processing_time,
        "observer_processing_time": p.observer_processing_time,
        "transmission_time": cone.transmission,
        "notice_time": cone.notice_time,
        "observer_cone_start": cone.observer_cone_start,
        "apparent_time": cone.apparent_time,
        "traced_end_time": traced_end_time,
        "traced_apparent_time": traced_apparent_time,
    });
    let table = CsvTable {
        file_name: "summary.csv".to_string(),
        header: ["transmission_time", "notice_time", "observer_cone_start", "apparent_time", "traced_end_time", "traced_apparent_time"]
            .map(String::from)
            .to_vec(),
        rows: vec![vec![
            fmt(cone.transmission),
            fmt(cone.notice_time),
            fmt(cone.observer_cone_start),
            fmt(cone.apparent_time),
            fmt(traced_end_time),
            fmt(traced_apparent_time),
        ]],
    };
    Ok(ScenarioOutput {
        trace,
        summary,
        tables: vec![table],
    })
}

// ---------------------------------------------------------------------------
// cache
// ---------------------------------------------------------------------------

fn run_cache(p: &CacheParams) -> Result<ScenarioOutput> {
    let speed = InteractionSpeed::new(p.interaction_speed)?;
    // Accesses share one timeline, staggered so each starts on a quiet
    // fabric.
    let mut window = 0.0f64;
    for core in &p.cores {
        for cache in &p.caches {
            let one_way = propagation_delay(core.position, cache.position, speed, 0.0)?;
            window = window.max(2.0 * one_way + cache.operate_time);
        }
    }
    let window = window.ceil() + 1.0;

    let mut trace = Vec::new();
    let mut rows = Vec::new();
    let mut accesses = Vec::new();
    let mut index = 0usize;
    for core in &p.cores {
        for cache in &p.caches {
            let start = index as f64 * window;
            let report = cache_access_scenario_at(core, cache, speed, start)?;
            rows.push(vec![
                report.core.clone(),
                report.cache.clone(),
                fmt(cache.operate_time),
                fmt(report.one_way),
                fmt(report.apparent_access_time),
                fmt(report.apparent_speed),
            ]);
            accesses.push(json!({
                "core": report.core,
                "cache": report.cache,
                "operate_time": cache.operate_time,
                "one_way": report.one_way,
                "apparent_access_time": report.apparent_access_time,
                "apparent_speed": report.apparent_speed,
            }));
            for mut record in report.trace {
                record.seq = trace.len() as u64;
                trace.push(record);
            }
            index += 1;
        }
    }

    Ok(ScenarioOutput {
        trace,
        summary: json!({ "accesses": accesses }),
        tables: vec![CsvTable {
            file_name: "summary.csv".to_string(),
            header: ["core", "cache", "operate_time", "one_way", "apparent_access_time", "apparent_speed"]
                .map(String::from)
                .to_vec(),
            rows,
        }],
    })
}

// ---------------------------------------------------------------------------
// bus
// ---------------------------------------------------------------------------

fn run_bus(p: &BusParams, seed: u64) -> Result<ScenarioOutput> {
    let speed = InteractionSpeed::new(p.interaction_speed)?;
    let report = shared_bus_transfer(&p.senders, &p.bus, &p.receiver, speed, seed)?;
    let rows = report
        .completions
        .iter()
        .map(|c| {
            vec![
                c.sender.clone(),
                c.round.to_string(),
                fmt(c.foreign_load),
                fmt(c.completed_at),
            ]
        })
        .collect();
    let summary = json!({
        "layer_width": p.senders.len(),
        "grant_order": report.grant_order,
        "completions": report.completions,
        "receiver_transmission_time": report.receiver_transmission_time,
        "invalid_output_window": report.invalid_output_window,
    });
    Ok(ScenarioOutput {
        trace: report.trace,
        summary,
        tables: vec![CsvTable {
            file_name: "summary.csv".to_string(),
            header: ["sender", "round", "foreign_load", "completed_at"]
                .map(String::from)
                .to_vec(),
            rows,
        }],
    })
}

// ---------------------------------------------------------------------------
// hidden-layer
// ---------------------------------------------------------------------------

fn scaling_table(rows: &[ScalingRow]) -> CsvTable {
    CsvTable {
        file_name: "summary.csv".to_string(),
        header: ["layer_width", "transmission_time"].map(String::from).to_vec(),
        rows: rows
            .iter()
            .map(|r| vec![r.layer_width.to_string(), fmt(r.transmission_time)])
            .collect(),
    }
}

fn run_hidden_layer(p: &HiddenLayerParams, seed: u64) -> Result<ScenarioOutput> {
    let rows = match p.topology {
        Topology::Shared => {
            let bus = p.bus.as_ref().expect("validated");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            hidden_layer_scaling(&p.layer_widths, bus, &mut rng)?
        }
        Topology::Parallel => {
            let link = p.link.as_ref().expect("validated");
            parallel_link_scaling(&p.layer_widths, link)?
        }
    };
    let slope = least_squares_slope(&rows);
    let summary = json!({
        "topology": match p.topology { Topology::Shared => "shared", Topology::Parallel => "parallel" },
        "rows": rows,
        "slope": slope,
    });
    Ok(ScenarioOutput {
        trace: Vec::new(),
        summary,
        tables: vec![scaling_table(&rows)],
    })
}

// ---------------------------------------------------------------------------
// shallow-deep
// ---------------------------------------------------------------------------

fn breakdown_rows(label: &str, b: &LayerBreakdown, rows: &mut Vec<Vec<String>>) {
    for (i, w) in b.widths.iter().enumerate() {
        rows.push(vec![
            label.to_string(),
            i.to_string(),
            w.to_string(),
            fmt(b.layer_transmission_times[i]),
            fmt(b.layer_apparent_times[i]),
        ]);
    }
}

fn run_shallow_deep(p: &ShallowDeepParams, seed: u64) -> Result<ScenarioOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cmp = shallow_vs_deep(p.total_neurons, &p.widths, &p.bus, p.processing_time, &mut rng)?;
    let mut rows = Vec::new();
    breakdown_rows("wide", &cmp.wide, &mut rows);
    breakdown_rows("arranged", &cmp.arranged, &mut rows);
    let summary = json!({
        "total_neurons": p.total_neurons,
        "processing_time": p.processing_time,
        "wide": cmp.wide,
        "arranged": cmp.arranged,
        "arranged_wins_on_max_layer_transmission":
            cmp.arranged.max_layer_transmission_time < cmp.wide.max_layer_transmission_time,
    });
    Ok(ScenarioOutput {
        trace: Vec::new(),
        summary,
        tables: vec![CsvTable {
            file_name: "summary.csv".to_string(),
            header: ["arrangement", "layer", "width", "transmission_time", "apparent_time"]
                .map(String::from)
                .to_vec(),
            rows,
        }],
    })
}

// ---------------------------------------------------------------------------
// perf-fit
// ---------------------------------------------------------------------------

fn run_perf_fit(p: &PerfFitParams) -> Result<ScenarioOutput> {
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for obs in &p.observations {
        let fp0 = fit_housekeeping(obs)?;
        let reproduced = operand_speedup(fp0, obs.operand_shrink)?;
        rows.push(vec![
            obs.machine.clone(),
            fmt(obs.operand_shrink),
            fmt(obs.speedup),
            fmt(fp0),
        ]);
        fits.push(json!({
            "machine": obs.machine,
            "operand_shrink": obs.operand_shrink,
            "speedup": obs.speedup,
            "housekeeping_fraction": fp0,
            "reproduced_speedup": reproduced,
        }));
    }
    Ok(ScenarioOutput {
        trace: Vec::new(),
        summary: json!({ "fits": fits }),
        tables: vec![CsvTable {
            file_name: "summary.csv".to_string(),
            header: ["machine", "k", "speedup", "fp0"].map(String::from).to_vec(),
            rows,
        }],
    })
}

// ---------------------------------------------------------------------------
// efficiency-sweep
// ---------------------------------------------------------------------------

fn run_efficiency(p: &EfficiencySweepParams) -> Result<ScenarioOutput> {
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut baseline = None;
    for profile in &p.profiles {
        let e = efficiency(profile, p.processing_time)?;
        let baseline = *baseline.get_or_insert(e);
        rows.push(vec![
            profile.label.clone(),
            fmt(profile.transfer_fraction),
            fmt(e),
        ]);
        entries.push(json!({
            "profile": profile.label,
            "housekeeping_fraction": profile.housekeeping_fraction,
            "transfer_fraction": profile.transfer_fraction,
            "efficiency": e,
            "ratio_vs_first": baseline / e,
        }));
    }
    Ok(ScenarioOutput {
        trace: Vec::new(),
        summary: json!({
            "processing_time": p.processing_time,
            "profiles": entries,
        }),
        tables: vec![CsvTable {
            file_name: "summary.csv".to_string(),
            header: ["profile", "transfer_fraction", "efficiency"]
                .map(String::from)
                .to_vec(),
            rows,
        }],
    })
}

// ---------------------------------------------------------------------------
// assembly-sync
// ---------------------------------------------------------------------------

struct SyncState {
    episode_start: f64,
    offsets: Vec<f64>,
    /// Per-member arrival of the current episode: the spike plus its
    /// physical arrival time and arrival phase in degrees.
    arrivals: Vec<Option<(Spike, f64, f64)>>,
}

struct BaseSource {
    members: Vec<(ComponentId, f64)>,
}

impl Component<RunPayload> for BaseSource {
    fn on_event(
        &mut self,
        event: &SimEvent<RunPayload>,
        ctx: &mut EngineCtx<'_, RunPayload>,
    ) -> Result<()> {
        if let RunPayload::Tick = event.payload {
            for (member, delay) in &self.members {
                ctx.schedule(
                    event.target,
                    *member,
                    ctx.now() + delay,
                    EventKind::BaseTick,
                    RunPayload::MemberTick,
                )?;
            }
        }
        Ok(())
    }
}

struct MemberNeuron {
    index: usize,
    neuron: OscillatorNeuron,
    target: ComponentId,
    target_delay: f64,
    tick_amplitude: f64,
    period: f64,
    charge: f64,
    state: Rc<RefCell<SyncState>>,
}

impl Component<RunPayload> for MemberNeuron {
    fn on_event(
        &mut self,
        event: &SimEvent<RunPayload>,
        ctx: &mut EngineCtx<'_, RunPayload>,
    ) -> Result<()> {
        if let RunPayload::MemberTick = event.payload {
            let now = ctx.now();
            // The tick charge lands within a fraction of the base period.
            let decision = self.neuron.integrate_step(self.period * 1e-3, self.tick_amplitude)?;
            if decision != SpikeDecision::Saltatoric {
                ctx.note(
                    event.target,
                    "note",
                    "subthreshold base tick, no phase lock",
                );
                return Ok(());
            }
            let offset = self.state.borrow().offsets[self.index];
            let mut emit = now + offset;
            // A negative offset means firing earlier in the cycle; in a
            // periodic train that is the same phase one period later.
            while emit < now {
                emit += self.period;
            }
            ctx.schedule(
                event.target,
                self.target,
                emit + self.target_delay,
                EventKind::Spike,
                RunPayload::SpikeArrival {
                    member: self.index,
                    emit_time: emit,
                    charge: self.charge,
                },
            )?;
        }
        Ok(())
    }
}

struct TargetCollector {
    frequency: f64,
    state: Rc<RefCell<SyncState>>,
}

impl Component<RunPayload> for TargetCollector {
    fn on_event(
        &mut self,
        event: &SimEvent<RunPayload>,
        ctx: &mut EngineCtx<'_, RunPayload>,
    ) -> Result<()> {
        if let RunPayload::SpikeArrival {
            member,
            emit_time,
            charge,
        } = event.payload
        {
            let mut state = self.state.borrow_mut();
            let phase = phase_shift(event.fire_time - state.episode_start, self.frequency);
            let spike = Spike {
                source_id: ctx.name(event.source).to_string(),
                emit_time,
                biological_timestamp: emit_time,
                charge,
            };
            state.arrivals[member] = Some((spike, event.fire_time, phase));
        }
        Ok(())
    }
}

fn run_assembly_sync(p: &AssemblySyncParams, seed: u64) -> Result<ScenarioOutput> {
    let base = BaseOscillator {
        frequency: p.base_frequency,
        tick_amplitude: p.tick_amplitude,
    };
    base.validate()?;
    let period = base.period();

    let mut neurons = Vec::new();
    let mut base_axons = Vec::new();
    let mut target_axons = Vec::new();
    for m in &p.members {
        let neuron = OscillatorNeuron::new(
            m.id.clone(),
            m.position,
            p.rc,
            p.voltage_threshold,
            p.current_threshold,
        )?;
        neurons.push(neuron);
        base_axons.push(Axon {
            from_id: "base".to_string(),
            to_id: m.id.clone(),
            length: m.base_axon.length,
            base_velocity: m.base_axon.base_velocity,
            myelination_factor: m.base_axon.myelination_factor,
        });
        target_axons.push(Axon {
            from_id: m.id.clone(),
            to_id: p.target.id.clone(),
            length: m.target_axon.length,
            base_velocity: m.target_axon.base_velocity,
            myelination_factor: m.target_axon.myelination_factor,
        });
    }
    for a in base_axons.iter().chain(&target_axons) {
        a.validate()?;
    }

    // Lock check first: a subthreshold tick means no lock and no learning,
    // reported rather than raised.
    let mut locks = Vec::new();
    for (neuron, axon) in neurons.iter().zip(&base_axons) {
        match phase_lock(neuron, &base, axon)? {
            LockOutcome::Locked(report) => locks.push(json!({
                "member": neuron.id,
                "locked": true,
                "delay": report.delay,
                "locked_offset_deg": report.locked_offset_deg,
            })),
            LockOutcome::Subthreshold {
                tick_amplitude,
                current_threshold,
            } => {
                return Ok(ScenarioOutput {
                    trace: Vec::new(),
                    summary: json!({
                        "locked": false,
                        "member": neuron.id,
                        "tick_amplitude": tick_amplitude,
                        "current_threshold": current_threshold,
                        "converged": false,
                    }),
                    tables: Vec::new(),
                });
            }
        }
    }

    let member_count = p.members.len();
    let base_delays: Vec<f64> = base_axons.iter().map(Axon::conduction_delay).collect();
    let target_delays: Vec<f64> = target_axons.iter().map(Axon::conduction_delay).collect();
    let max_path = base_delays
        .iter()
        .zip(&target_delays)
        .map(|(b, t)| b + t)
        .fold(0.0f64, f64::max);
    let episode_periods = (max_path / period).ceil() as u64 + 3;
    let episode_len = episode_periods as f64 * period;

    let state = Rc::new(RefCell::new(SyncState {
        episode_start: 0.0,
        offsets: vec![0.0; member_count],
        arrivals: vec![None; member_count],
    }));

    let mut engine: Engine<RunPayload> = Engine::new(seed);
    let target_id = engine.add_component(
        p.target.id.clone(),
        p.target.position,
        Box::new(TargetCollector {
            frequency: base.frequency,
            state: Rc::clone(&state),
        }),
    );
    let mut member_ids = Vec::new();
    for (index, m) in p.members.iter().enumerate() {
        let id = engine.add_component(
            m.id.clone(),
            m.position,
            Box::new(MemberNeuron {
                index,
                neuron: neurons[index].clone(),
                target: target_id,
                target_delay: target_delays[index],
                tick_amplitude: base.tick_amplitude,
                period,
                charge: 1.0,
                state: Rc::clone(&state),
            }),
        );
        member_ids.push(id);
    }
    let base_id = engine.add_component(
        "base",
        p.base_position,
        Box::new(BaseSource {
            members: member_ids
                .iter()
                .copied()
                .zip(base_delays.iter().copied())
                .collect(),
        }),
    );

    let mut spread_history = Vec::new();
    let mut charge_history = Vec::new();
    let mut raster_rows = Vec::new();
    let mut converged = false;
    let mut iterations = 0usize;
    let mut final_phases = vec![0.0; member_count];

    let mut episode = 0usize;
    // Accumulated the same way the engine clock advances, so consecutive
    // episode starts are bit-equal to the time run_until stopped at.
    let mut episode_start = 0.0f64;
    loop {
        {
            let mut s = state.borrow_mut();
            s.episode_start = episode_start;
            s.arrivals = vec![None; member_count];
        }
        engine.schedule(base_id, base_id, episode_start, EventKind::BaseTick, RunPayload::Tick)?;
        engine.run_until(episode_start + episode_len)?;

        let (phases, charges) = {
            let s = state.borrow();
            let mut phases = Vec::with_capacity(member_count);
            let mut charges = Vec::with_capacity(member_count);
            for (index, arrival) in s.arrivals.iter().enumerate() {
                let (spike, arrive, phase) = arrival.as_ref().ok_or_else(|| {
                    Error::domain(format!(
                        "member '{}' produced no spike in episode {episode}",
                        p.members[index].id
                    ))
                })?;
                phases.push(*phase);
                charges.push(spike.charge);
                raster_rows.push(vec![
                    spike.source_id.clone(),
                    fmt(spike.emit_time),
                    fmt(*arrive),
                    p.target.id.clone(),
                    fmt(*phase),
                    fmt(spike.biological_timestamp),
                ]);
            }
            (phases, charges)
        };
        final_phases = phases.clone();
        let spread = circular_spread_deg(&phases);
        spread_history.push(spread);
        charge_history.push(superposed_charge(&phases, &charges));
        if spread < p.tolerance_deg {
            converged = true;
            break;
        }
        if iterations >= p.max_iterations {
            break;
        }
        {
            let mut s = state.borrow_mut();
            let mut offsets = std::mem::take(&mut s.offsets);
            arrival_phase_update(&phases, &mut offsets, p.eta, base.frequency);
            s.offsets = offsets;
        }
        iterations += 1;
        episode += 1;
        episode_start += episode_len;
    }

    let offsets = state.borrow().offsets.clone();
    let members: Vec<Value> = p
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            json!({
                "id": m.id,
                "fire_offset": offsets[i],
                "arrival_phase_deg": final_phases[i],
                "base_delay": base_delays[i],
                "target_delay": target_delays[i],
            })
        })
        .collect();

    let summary = json!({
        "locked": true,
        "locks": locks,
        "base_frequency": base.frequency,
        "eta": p.eta,
        "converged": converged,
        "iterations": iterations,
        "tolerance_deg": p.tolerance_deg,
        "spread_history_deg": spread_history,
        "charge_history": charge_history,
        "members": members,
    });

    let iteration_table = CsvTable {
        file_name: "summary.csv".to_string(),
        header: ["iteration", "spread_deg", "superposed_charge"]
            .map(String::from)
            .to_vec(),
        rows: spread_history
            .iter()
            .zip(&charge_history)
            .enumerate()
            .map(|(i, (s, c))| vec![i.to_string(), fmt(*s), fmt(*c)])
            .collect(),
    };
    let raster = CsvTable {
        file_name: "raster.csv".to_string(),
        header: ["neuron", "emit_time", "arrival_time", "target", "phase_deg", "biological_timestamp"]
            .map(String::from)
            .to_vec(),
        rows: raster_rows,
    };

    Ok(ScenarioOutput {
        trace: engine.into_trace(),
        summary,
        tables: vec![iteration_table, raster],
    })
}

// ---------------------------------------------------------------------------
// feedback-staleness
// ---------------------------------------------------------------------------

#[derive(Default)]
struct FeedbackLedger {
    delivered: Vec<DeliveredItem>,
    dropped: Vec<DroppedItem>,
}

struct FeedbackReceiver {
    machine: DeliveryCycles,
    busy: Vec<(f64, f64)>,
    ledger: Rc<RefCell<FeedbackLedger>>,
}

impl Component<RunPayload> for FeedbackReceiver {
    fn on_event(
        &mut self,
        event: &SimEvent<RunPayload>,
        ctx: &mut EngineCtx<'_, RunPayload>,
    ) -> Result<()> {
        match &event.payload {
            RunPayload::FeedbackMsg {
                biological_timestamp,
                charge,
            } => {
                self.machine.on_arrival(FeedbackItem {
                    seq: event.seq,
                    source: ctx.name(event.source).to_string(),
                    arrival_time: event.fire_time,
                    biological_timestamp: *biological_timestamp,
                    charge: *charge,
                });
            }
            RunPayload::Cycle => {
                let now = ctx.now();
                let busy = busy_at(&self.busy, now);
                let outcome = self.machine.on_cycle(now, busy);
                for d in &outcome.dropped {
                    ctx.note(
                        event.target,
                        "note",
                        format!(
                            "dropped feedback from {} after {} busy cycles (carried stamp {})",
                            d.item.source, d.busy_cycles_waited, d.item.biological_timestamp
                        ),
                    );
                }
                if let Some(d) = &outcome.delivered {
                    ctx.note(
                        event.target,
                        "note",
                        format!(
                            "delivered feedback from {}, staleness {}",
                            d.item.source, d.staleness
                        ),
                    );
                }
                let mut ledger = self.ledger.borrow_mut();
                ledger.dropped.extend(outcome.dropped);
                ledger.delivered.extend(outcome.delivered);
            }
            _ => {}
        }
        Ok(())
    }
}

struct Quiet;

impl Component<RunPayload> for Quiet {
    fn on_event(
        &mut self,
        _event: &SimEvent<RunPayload>,
        _ctx: &mut EngineCtx<'_, RunPayload>,
    ) -> Result<()> {
        Ok(())
    }
}

fn run_feedback_staleness(p: &FeedbackStalenessParams, seed: u64) -> Result<ScenarioOutput> {
    let ledger = Rc::new(RefCell::new(FeedbackLedger::default()));
    let mut engine: Engine<RunPayload> = Engine::new(seed);
    let receiver = engine.add_component(
        p.receiver_id.clone(),
        SpatialPoint::ORIGIN,
        Box::new(FeedbackReceiver {
            machine: DeliveryCycles::new(p.busy_cycles_drop_threshold),
            busy: p.busy.clone(),
            ledger: Rc::clone(&ledger),
        }),
    );

    let mut sources: Vec<(String, ComponentId)> = Vec::new();
    let mut source_id = |engine: &mut Engine<RunPayload>, name: &str| -> ComponentId {
        if let Some((_, id)) = sources.iter().find(|(n, _)| n == name) {
            return *id;
        }
        let id = engine.add_component(name, SpatialPoint::ORIGIN, Box::new(Quiet));
        sources.push((name.to_string(), id));
        id
    };

    // Arrivals are scheduled before the cycle train so that an arrival
    // sharing a cycle instant is queued before that cycle fires.
    for item in &p.items {
        let src = source_id(&mut engine, &item.source);
        engine.schedule(
            src,
            receiver,
            item.arrival_time,
            EventKind::Feedback,
            RunPayload::FeedbackMsg {
                biological_timestamp: item.biological_timestamp,
                charge: item.charge,
            },
        )?;
    }
    let last_arrival = p
        .items
        .iter()
        .map(|i| i.arrival_time)
        .fold(0.0f64, f64::max);
    let last_busy = p.busy.iter().map(|&(_, e)| e).fold(0.0f64, f64::max);
    let horizon_cycles = ((last_arrival.max(last_busy) / p.cycle).ceil() as u64)
        + p.items.len() as u64
        + p.busy_cycles_drop_threshold as u64
        + 2;
    for j in 0..=horizon_cycles {
        engine.schedule(receiver, receiver, j as f64 * p.cycle, EventKind::BaseTick, RunPayload::Cycle)?;
    }
    engine.run_until(horizon_cycles as f64 * p.cycle)?;
    let trace = engine.into_trace();

    let ledger = Rc::try_unwrap(ledger)
        .map_err(|_| Error::domain("feedback ledger still shared after run"))?
        .into_inner();

    let stalenesses: Vec<f64> = ledger.delivered.iter().map(|d| d.staleness).collect();
    let mean_staleness = if stalenesses.is_empty() {
        None
    } else {
        Some(stalenesses.iter().sum::<f64>() / stalenesses.len() as f64)
    };
    let max_staleness = stalenesses
        .iter()
        .copied()
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))));

    let mut rows = Vec::new();
    for d in &ledger.delivered {
        rows.push(vec![
            d.item.seq.to_string(),
            d.item.source.clone(),
            fmt(d.item.arrival_time),
            fmt(d.item.biological_timestamp),
            "delivered".to_string(),
            fmt(d.delivery_time),
            fmt(d.staleness),
            d.busy_cycles_waited.to_string(),
        ]);
    }
    for d in &ledger.dropped {
        rows.push(vec![
            d.item.seq.to_string(),
            d.item.source.clone(),
            fmt(d.item.arrival_time),
            fmt(d.item.biological_timestamp),
            "dropped".to_string(),
            fmt(d.drop_time),
            String::new(),
            d.busy_cycles_waited.to_string(),
        ]);
    }
    rows.sort_by(|a, b| a[0].parse::<u64>().unwrap().cmp(&b[0].parse::<u64>().unwrap()));

    let summary = json!({
        "cycle": p.cycle,
        "busy_cycles_drop_threshold": p.busy_cycles_drop_threshold,
        "delivered": ledger.delivered,
        "dropped": ledger.dropped,
        "mean_staleness": mean_staleness,
        "max_staleness": max_staleness,
    });

    Ok(ScenarioOutput {
        trace,
        summary,
        tables: vec![CsvTable {
            file_name: "summary.csv".to_string(),
            header: ["seq", "source", "arrival_time", "biological_timestamp", "outcome", "event_time", "staleness", "busy_cycles_waited"]
                .map(String::from)
                .to_vec(),
            rows,
        }],
    })
}

/// Builds the pure-queue view of a feedback-staleness scenario, for
/// cross-checking the engine-hosted run against [`feedback_round`].
pub fn feedback_queue_of(p: &FeedbackStalenessParams) -> Result<FeedbackQueue> {
    let mut queue = FeedbackQueue::new(p.cycle, p.busy_cycles_drop_threshold)?;
    for (seq, item) in p.items.iter().enumerate() {
        queue.push(FeedbackItem {
            seq: seq as u64,
            source: item.source.clone(),
            arrival_time: item.arrival_time,
            biological_timestamp: item.biological_timestamp,
            charge: item.charge,
        });
    }
    Ok(queue)
}
