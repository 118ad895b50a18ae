//! Deterministic discrete-event kernel.
//!
//! Components register with a name and a position; events are ordered by
//! `(fire_time, seq)` where `seq` is assigned at scheduling time, so two
//! runs with the same components, initial events and seed produce
//! byte-identical traces. There is a single global clock: components only
//! ever see simulated time. The only source of randomness is a seeded
//! generator owned by the engine.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timespace::SpatialPoint;
use crate::trace::TraceRecord;

/// Index of a registered component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ComponentId(pub usize);

/// Tag of a scheduled event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    SignalArrival,
    BusRequest,
    BusGrant,
    BusDelivery,
    Spike,
    BaseTick,
    Feedback,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::SignalArrival => "signal-arrival",
            EventKind::BusRequest => "bus-request",
            EventKind::BusGrant => "bus-grant",
            EventKind::BusDelivery => "bus-delivery",
            EventKind::Spike => "spike",
            EventKind::BaseTick => "base-tick",
            EventKind::Feedback => "feedback",
        }
    }
}

/// Scenario-defined event payload. The engine only asks it for a one-line
/// trace description.
pub trait Payload: Clone {
    fn detail(&self) -> String {
        String::new()
    }
}

impl Payload for () {}

/// A timestamped, ordered message between two components.
#[derive(Debug, Clone)]
pub struct SimEvent<P> {
    pub fire_time: f64,
    pub seq: u64,
    pub source: ComponentId,
    pub target: ComponentId,
    pub kind: EventKind,
    pub payload: P,
}

struct QueuedEvent<P>(SimEvent<P>);

impl<P> PartialEq for QueuedEvent<P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<P> Eq for QueuedEvent<P> {}

impl<P> Ord for QueuedEvent<P> {
    // Reversed (fire_time, seq) order so the BinaryHeap pops the earliest
    // event first; seq breaks ties in scheduling order. fire_time is
    // validated finite, so total_cmp gives a true total order.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .fire_time
            .total_cmp(&self.0.fire_time)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

impl<P> PartialOrd for QueuedEvent<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A simulated element that reacts to events addressed to it.
pub trait Component<P: Payload> {
    fn on_event(&mut self, event: &SimEvent<P>, ctx: &mut EngineCtx<'_, P>) -> Result<()>;
}

struct Registered {
    name: String,
    position: SpatialPoint,
}

/// What a component may touch while handling an event: the clock, the
/// queue, the trace and the run's random generator.
pub struct EngineCtx<'a, P: Payload> {
    now: f64,
    next_seq: &'a mut u64,
    queue: &'a mut BinaryHeap<QueuedEvent<P>>,
    registry: &'a [Registered],
    trace: &'a mut Vec<TraceRecord>,
    rng: &'a mut ChaCha8Rng,
}

impl<'a, P: Payload> EngineCtx<'a, P> {
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn name(&self, id: ComponentId) -> &str {
        &self.registry[id.0].name
    }

    pub fn position(&self, id: ComponentId) -> SpatialPoint {
        self.registry[id.0].position
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        self.rng
    }

    /// Schedules a follow-up event. Scheduling into the past is a
    /// causality error.
    pub fn schedule(
        &mut self,
        source: ComponentId,
        target: ComponentId,
        fire_time: f64,
        kind: EventKind,
        payload: P,
    ) -> Result<u64> {
        push_event(
            self.queue,
            self.next_seq,
            self.now,
            self.registry.len(),
            source,
            target,
            fire_time,
            kind,
            payload,
        )
    }

    /// Appends an annotation record at the current time.
    pub fn note(&mut self, component: ComponentId, kind: &str, detail: impl Into<String>) {
        let r = &self.registry[component.0];
        let seq = self.trace.len() as u64;
        self.trace.push(TraceRecord {
            seq,
            time: self.now,
            component: r.name.clone(),
            kind: kind.to_string(),
            position: r.position,
            detail: detail.into(),
        });
    }
}

#[allow(clippy::too_many_arguments)]
fn push_event<P: Payload>(
    queue: &mut BinaryHeap<QueuedEvent<P>>,
    next_seq: &mut u64,
    now: f64,
    component_count: usize,
    source: ComponentId,
    target: ComponentId,
    fire_time: f64,
    kind: EventKind,
    payload: P,
) -> Result<u64> {
    if !fire_time.is_finite() {
        return Err(Error::domain(format!(
            "event fire time must be finite, got {fire_time}"
        )));
    }
    if fire_time < now {
        return Err(Error::Causality { fire_time, now });
    }
    if target.0 >= component_count || source.0 >= component_count {
        return Err(Error::domain(format!(
            "event references unregistered component (source {}, target {})",
            source.0, target.0
        )));
    }
    let seq = *next_seq;
    *next_seq += 1;
    queue.push(QueuedEvent(SimEvent {
        fire_time,
        seq,
        source,
        target,
        kind,
        payload,
    }));
    Ok(seq)
}

/// Single-threaded event engine. One engine drives one run; independent
/// runs use independent engines.
pub struct Engine<P: Payload> {
    now: f64,
    next_seq: u64,
    queue: BinaryHeap<QueuedEvent<P>>,
    registry: Vec<Registered>,
    slots: Vec<Option<Box<dyn Component<P>>>>,
    trace: Vec<TraceRecord>,
    rng: ChaCha8Rng,
}

impl<P: Payload> Engine<P> {
    pub fn new(seed: u64) -> Self {
        Engine {
            now: 0.0,
            next_seq: 0,
            queue: BinaryHeap::new(),
            registry: Vec::new(),
            slots: Vec::new(),
            trace: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn add_component(
        &mut self,
        name: impl Into<String>,
        position: SpatialPoint,
        component: Box<dyn Component<P>>,
    ) -> ComponentId {
        let id = ComponentId(self.registry.len());
        self.registry.push(Registered {
            name: name.into(),
            position,
        });
        self.slots.push(Some(component));
        id
    }

    /// Schedules an event from outside any handler (initial conditions).
    pub fn schedule(
        &mut self,
        source: ComponentId,
        target: ComponentId,
        fire_time: f64,
        kind: EventKind,
        payload: P,
    ) -> Result<u64> {
        push_event(
            &mut self.queue,
            &mut self.next_seq,
            self.now,
            self.registry.len(),
            source,
            target,
            fire_time,
            kind,
            payload,
        )
    }

    /// Dispatches every pending event with `fire_time <= t_end` in
    /// `(fire_time, seq)` order, then advances the clock to `t_end`.
    /// Returns the trace accumulated so far. If a handler fails, the run
    /// aborts: the partial trace keeps an `error` record and the handler
    /// error is returned.
    pub fn run_until(&mut self, t_end: f64) -> Result<&[TraceRecord]> {
        if !t_end.is_finite() || t_end < self.now {
            return Err(Error::domain(format!(
                "run_until target {t_end} must be finite and >= current time {}",
                self.now
            )));
        }
        while let Some(head) = self.queue.peek() {
            if head.0.fire_time > t_end {
                break;
            }
            let event = self.queue.pop().expect("peeked event").0;
            self.now = event.fire_time;
            let target = &self.registry[event.target.0];
            let seq = self.trace.len() as u64;
            self.trace.push(TraceRecord {
                seq,
                time: event.fire_time,
                component: target.name.clone(),
                kind: event.kind.as_str().to_string(),
                position: target.position,
                detail: event.payload.detail(),
            });
            let mut component = self.slots[event.target.0]
                .take()
                .expect("component re-entered its own handler");
            let mut ctx = EngineCtx {
                now: self.now,
                next_seq: &mut self.next_seq,
                queue: &mut self.queue,
                registry: &self.registry,
                trace: &mut self.trace,
                rng: &mut self.rng,
            };
            let outcome = component.on_event(&event, &mut ctx);
            self.slots[event.target.0] = Some(component);
            if let Err(e) = outcome {
                let name = self.registry[event.target.0].name.clone();
                let position = self.registry[event.target.0].position;
                let seq = self.trace.len() as u64;
                self.trace.push(TraceRecord {
                    seq,
                    time: self.now,
                    component: name.clone(),
                    kind: "error".to_string(),
                    position,
                    detail: e.to_string(),
                });
                return Err(Error::Handler {
                    component: name,
                    time: self.now,
                    message: e.to_string(),
                });
            }
        }
        self.now = t_end;
        Ok(&self.trace)
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<TraceRecord> {
        self.trace
    }

    /// True when no event with `fire_time <= t` is pending.
    pub fn drained_until(&self, t: f64) -> bool {
        self.queue.peek().is_none_or(|e| e.0.fire_time > t)
    }
}
