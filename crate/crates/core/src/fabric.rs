//! Technical computing elements: cores, caches, dedicated point-to-point
//! links and a shared serial bus with arbitration.
//!
//! The bus model is the lumped one: an access pays the arbitration-and-reach
//! time `T_B` twice (request and grant), then the physical delivery `T_d`,
//! plus whatever foreign traffic `X` adds. With `L` simultaneous requesters
//! the k-th grant completes at `k*2*T_B + T_d + X_k`, so the receiver of a
//! whole layer waits `L*2*T_B + T_d + X_L` for its last input — affine in
//! `L` with slope `2*T_B`.

use std::cell::RefCell;
use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{Component, ComponentId, Engine, EngineCtx, EventKind, Payload, SimEvent};
use crate::error::{Error, Result};
use crate::timespace::{
    apparent_processing_time, propagation_delay, EventTiming, InteractionSpeed, SpatialPoint,
};
use crate::trace::TraceRecord;

/// A processing core (or technical neuron) at a fixed position.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Core {
    pub id: String,
    pub position: SpatialPoint,
    /// Processing time per operation, seconds.
    #[serde(default)]
    pub processing_time: f64,
}

impl Core {
    pub fn validate(&self) -> Result<()> {
        if !self.processing_time.is_finite() || self.processing_time < 0.0 {
            return Err(Error::domain(format!(
                "core '{}': processing time must be finite and >= 0",
                self.id
            )));
        }
        Ok(())
    }
}

/// An on-chip cache at a fixed position. `operate_time` is the reciprocal
/// of its physical access speed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheMemory {
    pub id: String,
    pub position: SpatialPoint,
    pub operate_time: f64,
}

impl CacheMemory {
    pub fn validate(&self) -> Result<()> {
        if !self.operate_time.is_finite() || self.operate_time <= 0.0 {
            return Err(Error::domain(format!(
                "cache '{}': operate time must be finite and > 0",
                self.id
            )));
        }
        Ok(())
    }
}

/// Foreign contribution policy for the shared bus: traffic from outside
/// the modeled layer that also loads the bus.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ForeignLoad {
    Constant { value: f64 },
    /// Exponentially distributed per-access load, drawn from the seeded
    /// run generator.
    Exponential { mean: f64 },
}

impl Default for ForeignLoad {
    fn default() -> Self {
        ForeignLoad::Constant { value: 0.0 }
    }
}

impl ForeignLoad {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ForeignLoad::Constant { value } => value.is_finite() && *value >= 0.0,
            ForeignLoad::Exponential { mean } => mean.is_finite() && *mean >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain("foreign load must be finite and >= 0"))
        }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ForeignLoad::Constant { value } => *value,
            ForeignLoad::Exponential { mean } => {
                let u: f64 = rng.random();
                -mean * (1.0 - u).ln()
            }
        }
    }
}

/// Shared serial medium: one delivery at a time, every access arbitrated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BusChannel {
    pub id: String,
    /// Arbiter location.
    pub position: SpatialPoint,
    /// Lumped per-access arbitration-and-reach time `T_B`, paid twice.
    pub arbitration_time: f64,
    /// Physical delivery time through the bus, `T_d`.
    pub delivery_time: f64,
    #[serde(default)]
    pub foreign_load: ForeignLoad,
}

impl BusChannel {
    pub fn validate(&self) -> Result<()> {
        if !self.arbitration_time.is_finite() || self.arbitration_time < 0.0 {
            return Err(Error::domain(format!(
                "bus '{}': arbitration time must be finite and >= 0",
                self.id
            )));
        }
        if !self.delivery_time.is_finite() || self.delivery_time < 0.0 {
            return Err(Error::domain(format!(
                "bus '{}': delivery time must be finite and >= 0",
                self.id
            )));
        }
        self.foreign_load.validate()
    }

    /// Completion time of the k-th granted access (1-based) under the
    /// lumped model.
    fn completion(&self, round: usize, foreign: f64) -> f64 {
        round as f64 * 2.0 * self.arbitration_time + self.delivery_time + foreign
    }
}

/// Dedicated point-to-point connection; never blocks, never arbitrates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParallelLink {
    pub from: String,
    pub to: String,
    /// One-way delay, seconds.
    pub delay: f64,
}

impl ParallelLink {
    pub fn validate(&self) -> Result<()> {
        if !self.delay.is_finite() || self.delay < 0.0 {
            return Err(Error::domain("link delay must be finite and >= 0"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Cache access scenario
// ---------------------------------------------------------------------------

/// Outcome of one core accessing one cache.
#[derive(Debug, Clone, Serialize)]
pub struct CacheAccessReport {
    pub core: String,
    pub cache: String,
    /// One-way signal time between core and cache.
    pub one_way: f64,
    /// Round trip plus cache operation: `2*one_way + operate_time`.
    pub apparent_access_time: f64,
    pub apparent_speed: f64,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
}

#[derive(Clone)]
enum CachePayload {
    Request,
    Response,
}

impl Payload for CachePayload {
    fn detail(&self) -> String {
        match self {
            CachePayload::Request => "access request".to_string(),
            CachePayload::Response => "fetched value".to_string(),
        }
    }
}

struct CacheEndpoint {
    core: ComponentId,
    operate_time: f64,
    return_delay: f64,
    start: f64,
}

impl Component<CachePayload> for CacheEndpoint {
    fn on_event(
        &mut self,
        event: &SimEvent<CachePayload>,
        ctx: &mut EngineCtx<'_, CachePayload>,
    ) -> Result<()> {
        let now = ctx.now();
        ctx.note(
            event.target,
            "note",
            format!("idle-wait [{}, {now}) until request arrival", self.start),
        );
        let done = now + self.operate_time;
        ctx.note(event.target, "note", format!("operating [{now}, {done})"));
        ctx.schedule(
            event.target,
            self.core,
            done + self.return_delay,
            EventKind::SignalArrival,
            CachePayload::Response,
        )?;
        Ok(())
    }
}

struct CoreEndpoint {
    request_sent_at: f64,
}

impl Component<CachePayload> for CoreEndpoint {
    fn on_event(
        &mut self,
        event: &SimEvent<CachePayload>,
        ctx: &mut EngineCtx<'_, CachePayload>,
    ) -> Result<()> {
        let now = ctx.now();
        ctx.note(
            event.target,
            "note",
            format!(
                "idle-wait [{}, {now}) during cache operation and return leg",
                self.request_sent_at
            ),
        );
        Ok(())
    }
}

/// Runs the single-access cache scenario: the request travels to the
/// cache, the cache operates, the value travels back. Both idle intervals
/// (cache before the request arrives, core until the value returns) show
/// up in the trace.
pub fn cache_access_scenario(
    core: &Core,
    cache: &CacheMemory,
    speed: InteractionSpeed,
) -> Result<CacheAccessReport> {
    cache_access_scenario_at(core, cache, speed, 0.0)
}

/// [`cache_access_scenario`] with the request issued at `start` instead of
/// zero, so several accesses can share one trace timeline.
pub fn cache_access_scenario_at(
    core: &Core,
    cache: &CacheMemory,
    speed: InteractionSpeed,
    start: f64,
) -> Result<CacheAccessReport> {
    core.validate()?;
    cache.validate()?;
    if !start.is_finite() || start < 0.0 {
        return Err(Error::domain("scenario start must be finite and >= 0"));
    }
    let one_way = propagation_delay(core.position, cache.position, speed, 0.0)?;
    let apparent_access_time = 2.0 * one_way + cache.operate_time;

    let mut engine: Engine<CachePayload> = Engine::new(0);
    let core_id = engine.add_component(
        core.id.clone(),
        core.position,
        Box::new(CoreEndpoint {
            request_sent_at: start,
        }),
    );
    let cache_id = engine.add_component(
        cache.id.clone(),
        cache.position,
        Box::new(CacheEndpoint {
            core: core_id,
            operate_time: cache.operate_time,
            return_delay: one_way,
            start,
        }),
    );
    engine.schedule(
        core_id,
        cache_id,
        start + one_way,
        EventKind::SignalArrival,
        CachePayload::Request,
    )?;
    engine.run_until(start + apparent_access_time)?;

    Ok(CacheAccessReport {
        core: core.id.clone(),
        cache: cache.id.clone(),
        one_way,
        apparent_access_time,
        apparent_speed: 1.0 / apparent_access_time,
        trace: engine.into_trace(),
    })
}

// ---------------------------------------------------------------------------
// Shared serial bus scenario
// ---------------------------------------------------------------------------

/// Completion record of one granted sender.
#[derive(Debug, Clone, Serialize)]
pub struct SenderCompletion {
    pub sender: String,
    /// 1-based grant round.
    pub round: usize,
    pub foreign_load: f64,
    /// Lumped-model completion: `round*2*T_B + T_d + X`.
    pub completed_at: f64,
}

/// Outcome of one layer of senders pushing through the shared bus to one
/// receiver.
#[derive(Debug, Clone, Serialize)]
pub struct BusReport {
    /// Sender ids in grant order: nearest to the arbiter first, ties by id.
    pub grant_order: Vec<String>,
    pub completions: Vec<SenderCompletion>,
    /// Time until the receiver's last input arrives:
    /// `L*2*T_B + T_d + X_L`.
    pub receiver_transmission_time: f64,
    /// Interval during which a level-based receiver's output would be
    /// invalid because inputs are still dribbling in (absent for a single
    /// sender).
    pub invalid_output_window: Option<(f64, f64)>,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
}

#[derive(Clone)]
enum BusPayload {
    Request { sender: String },
    Grant { round: usize },
    Delivery { sender: String, round: usize, foreign_load: f64 },
}

impl Payload for BusPayload {
    fn detail(&self) -> String {
        match self {
            BusPayload::Request { sender } => format!("bus access request from {sender}"),
            BusPayload::Grant { round } => format!("granted in round {round}"),
            BusPayload::Delivery {
                sender,
                round,
                foreign_load,
            } => format!("payload of {sender}, round {round}, foreign load {foreign_load}"),
        }
    }
}

#[derive(Default)]
struct BusLedger {
    grant_order: Vec<String>,
    completions: Vec<SenderCompletion>,
    arrivals: Vec<f64>,
}

struct BusArbiter {
    expected: usize,
    speed: InteractionSpeed,
    arbitration_time: f64,
    delivery_time: f64,
    foreign_load: ForeignLoad,
    receiver: ComponentId,
    requests: Vec<(f64, String, ComponentId)>,
    ledger: Rc<RefCell<BusLedger>>,
}

impl Component<BusPayload> for BusArbiter {
    fn on_event(
        &mut self,
        event: &SimEvent<BusPayload>,
        ctx: &mut EngineCtx<'_, BusPayload>,
    ) -> Result<()> {
        let delay = propagation_delay(
            ctx.position(event.source),
            ctx.position(event.target),
            self.speed,
            0.0,
        )?;
        self.requests
            .push((delay, ctx.name(event.source).to_string(), event.source));
        if self.requests.len() < self.expected {
            return Ok(());
        }

        // All simultaneous requests are in: grant nearest-arbiter-first,
        // ties by id.
        self.requests
            .sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let t_b = self.arbitration_time;
        let mut wire_free_at = 0.0f64;
        for (k, (_, name, sender)) in self.requests.iter().enumerate() {
            let round = k + 1;
            let granted_at = (round - 1) as f64 * 2.0 * t_b + t_b;
            ctx.schedule(
                event.target,
                *sender,
                granted_at,
                EventKind::BusGrant,
                BusPayload::Grant { round },
            )?;
            let foreign = self.foreign_load.draw(ctx.rng());
            // Nominal wire occupancy starts once the grant round is over
            // and the foreign traffic ahead of us has passed; the wire
            // serves one delivery at a time, so it never starts before the
            // previous delivery ended.
            let nominal_start = round as f64 * 2.0 * t_b + foreign;
            let start = nominal_start.max(wire_free_at);
            let end = start + self.delivery_time;
            wire_free_at = end;
            ctx.note(
                event.target,
                "note",
                format!("wire busy [{start}, {end}) delivering {name}"),
            );
            ctx.schedule(
                event.target,
                self.receiver,
                end,
                EventKind::BusDelivery,
                BusPayload::Delivery {
                    sender: name.clone(),
                    round,
                    foreign_load: foreign,
                },
            )?;
            let mut ledger = self.ledger.borrow_mut();
            ledger.grant_order.push(name.clone());
            ledger.completions.push(SenderCompletion {
                sender: name.clone(),
                round,
                foreign_load: foreign,
                completed_at: round as f64 * 2.0 * t_b + self.delivery_time + foreign,
            });
        }
        Ok(())
    }
}

struct BusSender;

impl Component<BusPayload> for BusSender {
    fn on_event(
        &mut self,
        event: &SimEvent<BusPayload>,
        ctx: &mut EngineCtx<'_, BusPayload>,
    ) -> Result<()> {
        if let BusPayload::Grant { round } = &event.payload {
            ctx.note(
                event.target,
                "note",
                format!("grant received, moving payload to the bus (round {round})"),
            );
        }
        Ok(())
    }
}

struct BusReceiver {
    expected: usize,
    processing_time: f64,
    ledger: Rc<RefCell<BusLedger>>,
}

impl Component<BusPayload> for BusReceiver {
    fn on_event(
        &mut self,
        event: &SimEvent<BusPayload>,
        ctx: &mut EngineCtx<'_, BusPayload>,
    ) -> Result<()> {
        let now = ctx.now();
        let mut ledger = self.ledger.borrow_mut();
        ledger.arrivals.push(now);
        let count = ledger.arrivals.len();
        if count == self.expected {
            let first = ledger.arrivals[0];
            drop(ledger);
            if self.expected > 1 {
                ctx.note(
                    event.target,
                    "note",
                    format!("output-invalid [{first}, {now}) while inputs dribble in"),
                );
            }
            ctx.note(
                event.target,
                "note",
                format!(
                    "all {} inputs arrived; processing [{now}, {})",
                    self.expected,
                    now + self.processing_time
                ),
            );
        }
        Ok(())
    }
}

/// Pushes one message from every sender through the shared bus to the
/// receiver, all requests raised at `t = 0`.
pub fn shared_bus_transfer(
    senders: &[Core],
    bus: &BusChannel,
    receiver: &Core,
    speed: InteractionSpeed,
    seed: u64,
) -> Result<BusReport> {
    if senders.is_empty() {
        return Err(Error::domain("shared bus transfer needs at least one sender"));
    }
    for s in senders {
        s.validate()?;
    }
    bus.validate()?;
    receiver.validate()?;

    let ledger = Rc::new(RefCell::new(BusLedger::default()));
    let mut engine: Engine<BusPayload> = Engine::new(seed);
    let receiver_id = engine.add_component(
        receiver.id.clone(),
        receiver.position,
        Box::new(BusReceiver {
            expected: senders.len(),
            processing_time: receiver.processing_time,
            ledger: Rc::clone(&ledger),
        }),
    );
    let bus_id = engine.add_component(
        bus.id.clone(),
        bus.position,
        Box::new(BusArbiter {
            expected: senders.len(),
            speed,
            arbitration_time: bus.arbitration_time,
            delivery_time: bus.delivery_time,
            foreign_load: bus.foreign_load.clone(),
            receiver: receiver_id,
            requests: Vec::new(),
            ledger: Rc::clone(&ledger),
        }),
    );
    for sender in senders {
        let sender_id = engine.add_component(sender.id.clone(), sender.position, Box::new(BusSender));
        engine.schedule(
            sender_id,
            bus_id,
            0.0,
            EventKind::BusRequest,
            BusPayload::Request {
                sender: sender.id.clone(),
            },
        )?;
    }
    // Generous horizon: every grant round plus deliveries and foreign load.
    let horizon = (senders.len() as f64 + 1.0)
        * (2.0 * bus.arbitration_time + bus.delivery_time + 1.0)
        + 1.0;
    let mut t_end = horizon;
    loop {
        engine.run_until(t_end)?;
        if engine.drained_until(f64::MAX) {
            break;
        }
        t_end *= 2.0;
    }

    let trace = engine.into_trace();
    let ledger = Rc::try_unwrap(ledger)
        .map_err(|_| Error::domain("bus ledger still shared after run"))?
        .into_inner();
    let receiver_transmission_time = ledger
        .completions
        .last()
        .map(|c| c.completed_at)
        .unwrap_or(0.0);
    let invalid_output_window = if ledger.arrivals.len() > 1 {
        Some((
            ledger.arrivals[0],
            *ledger.arrivals.last().expect("nonempty arrivals"),
        ))
    } else {
        None
    };
    Ok(BusReport {
        grant_order: ledger.grant_order,
        completions: ledger.completions,
        receiver_transmission_time,
        invalid_output_window,
        trace,
    })
}

// ---------------------------------------------------------------------------
// Scaling tables
// ---------------------------------------------------------------------------

/// One row of a layer-width scaling table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub layer_width: u32,
    /// Receiver transmission time: when its last input arrives.
    pub transmission_time: f64,
}

/// Receiver transmission time as a function of hidden-layer width on the
/// shared bus. Affine in the width with slope `2*T_B` when the foreign
/// load is constant.
pub fn hidden_layer_scaling(
    layer_widths: &[u32],
    bus: &BusChannel,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ScalingRow>> {
    bus.validate()?;
    let mut rows = Vec::with_capacity(layer_widths.len());
    for &width in layer_widths {
        if width < 1 {
            return Err(Error::domain("layer width must be >= 1"));
        }
        let foreign = bus.foreign_load.draw(rng);
        rows.push(ScalingRow {
            layer_width: width,
            transmission_time: bus.completion(width as usize, foreign),
        });
    }
    Ok(rows)
}

/// The same table on dedicated links: the receiver's wait does not grow
/// with peer count, every input travels its own wire.
pub fn parallel_link_scaling(layer_widths: &[u32], link: &ParallelLink) -> Result<Vec<ScalingRow>> {
    link.validate()?;
    layer_widths
        .iter()
        .map(|&width| {
            if width < 1 {
                return Err(Error::domain("layer width must be >= 1"));
            }
            Ok(ScalingRow {
                layer_width: width,
                transmission_time: link.delay,
            })
        })
        .collect()
}

/// Least-squares slope of transmission time over layer width. `None` when
/// fewer than two distinct widths are present.
pub fn least_squares_slope(rows: &[ScalingRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let n = rows.len() as f64;
    let mean_x = rows.iter().map(|r| r.layer_width as f64).sum::<f64>() / n;
    let mean_y = rows.iter().map(|r| r.transmission_time).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for r in rows {
        let dx = r.layer_width as f64 - mean_x;
        sxx += dx * dx;
        sxy += dx * (r.transmission_time - mean_y);
    }
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

// ---------------------------------------------------------------------------
// Shallow vs deep arrangement
// ---------------------------------------------------------------------------

/// Per-layer timing of one arrangement of neurons into layers.
#[derive(Debug, Clone, Serialize)]
pub struct LayerBreakdown {
    pub widths: Vec<u32>,
    pub layer_transmission_times: Vec<f64>,
    pub layer_apparent_times: Vec<f64>,
    /// The comparison metric: the worst per-layer transmission time.
    pub max_layer_transmission_time: f64,
    /// Sum of per-layer apparent times (stage-by-stage composition).
    pub total_apparent_time: f64,
}

/// A layered arrangement against the single-wide-layer baseline with the
/// same total neuron count.
#[derive(Debug, Clone, Serialize)]
pub struct ShallowDeepComparison {
    pub wide: LayerBreakdown,
    pub arranged: LayerBreakdown,
}

fn layer_breakdown(
    widths: &[u32],
    bus: &BusChannel,
    processing_time: f64,
    rng: &mut ChaCha8Rng,
) -> Result<LayerBreakdown> {
    let rows = hidden_layer_scaling(widths, bus, rng)?;
    let layer_transmission_times: Vec<f64> = rows.iter().map(|r| r.transmission_time).collect();
    let layer_apparent_times: Vec<f64> = layer_transmission_times
        .iter()
        .map(|&tt| {
            EventTiming::new(processing_time, tt).map(apparent_processing_time)
        })
        .collect::<Result<_>>()?;
    let max_layer_transmission_time = layer_transmission_times
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    let total_apparent_time = layer_apparent_times.iter().sum();
    Ok(LayerBreakdown {
        widths: widths.to_vec(),
        layer_transmission_times,
        layer_apparent_times,
        max_layer_transmission_time,
        total_apparent_time,
    })
}

/// Compares an arrangement of `total_neurons` into `widths` layers against
/// the single-wide-layer baseline. The decisive metric is the worst
/// per-layer transmission time: with any arbitration cost at all, one wide
/// layer always loses to a deeper arrangement with a smaller maximum
/// width. The summed apparent time is reported too, but it is not ordered
/// the same way (a deeper net pays the `2*Tp` floor once per stage).
pub fn shallow_vs_deep(
    total_neurons: u32,
    widths: &[u32],
    bus: &BusChannel,
    processing_time: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ShallowDeepComparison> {
    if widths.is_empty() {
        return Err(Error::domain("widths must not be empty"));
    }
    let sum: u64 = widths.iter().map(|&w| w as u64).sum();
    if sum != total_neurons as u64 {
        return Err(Error::domain(format!(
            "widths {widths:?} sum to {sum}, expected total of {total_neurons}"
        )));
    }
    let wide = layer_breakdown(&[total_neurons], bus, processing_time, rng)?;
    let arranged = layer_breakdown(widths, bus, processing_time, rng)?;
    Ok(ShallowDeepComparison { wide, arranged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn speed(v: f64) -> InteractionSpeed {
        InteractionSpeed::new(v).unwrap()
    }

    fn core(id: &str, x: f64, y: f64) -> Core {
        Core {
            id: id.to_string(),
            position: SpatialPoint::new(x, y, 0.0).unwrap(),
            processing_time: 0.0,
        }
    }

    fn bus(t_b: f64, t_d: f64) -> BusChannel {
        BusChannel {
            id: "bus".to_string(),
            position: SpatialPoint::new(0.0, 0.5, 0.0).unwrap(),
            arbitration_time: t_b,
            delivery_time: t_d,
            foreign_load: ForeignLoad::default(),
        }
    }

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "expected {expected}, got {actual}"
        );
    }

    #[test]
    fn cache_access_matches_hand_geometry() {
        // Oracle: hand geometry on core (-0.5,0), cache (0,0.5):
        // one way sqrt(0.5), apparent 2*sqrt(0.5) + operate time.
        let c = core("core-left", -0.5, 0.0);
        let near_slow = CacheMemory {
            id: "cache-near".to_string(),
            position: SpatialPoint::new(0.0, 0.5, 0.0).unwrap(),
            operate_time: 1.0,
        };
        let report = cache_access_scenario(&c, &near_slow, speed(1.0)).unwrap();
        let half_diagonal = std::f64::consts::FRAC_1_SQRT_2;
        assert_close(report.one_way, half_diagonal, 1e-12);
        assert_close(report.apparent_access_time, 2.0 * half_diagonal + 1.0, 1e-12);

        let near_fast = CacheMemory {
            operate_time: 0.1,
            ..near_slow.clone()
        };
        let fast = cache_access_scenario(&c, &near_fast, speed(1.0)).unwrap();
        assert_close(fast.apparent_access_time, 2.0 * half_diagonal + 0.1, 1e-12);
        // A 10x faster cache buys far less than 10x, and under 2x here.
        let gain = report.apparent_access_time / fast.apparent_access_time;
        assert!(gain < 2.0, "gain {gain}");
        assert_close(gain, 1.594, 1e-3);
    }

    #[test]
    fn colocated_cache_access_is_pure_operate_time() {
        let c = core("core", 0.25, 0.25);
        let cache = CacheMemory {
            id: "cache".to_string(),
            position: c.position,
            operate_time: 1.0,
        };
        let report = cache_access_scenario(&c, &cache, speed(1.0)).unwrap();
        assert_eq!(report.apparent_access_time, 1.0);
    }

    #[test]
    fn cache_trace_shows_both_idle_intervals_and_ends_at_apparent_time() {
        let c = core("core-left", -0.5, 0.0);
        let cache = CacheMemory {
            id: "cache-near".to_string(),
            position: SpatialPoint::new(0.0, 0.5, 0.0).unwrap(),
            operate_time: 1.0,
        };
        let report = cache_access_scenario(&c, &cache, speed(1.0)).unwrap();
        let idles: Vec<&TraceRecord> = report
            .trace
            .iter()
            .filter(|r| r.detail.starts_with("idle-wait"))
            .collect();
        assert_eq!(idles.len(), 2);
        assert_eq!(idles[0].component, "cache-near");
        assert_eq!(idles[1].component, "core-left");
        let last = report.trace.last().unwrap();
        assert_close(last.time, report.apparent_access_time, 1e-12);
    }

    #[test]
    fn single_sender_bus_transfer_pays_double_arbitration() {
        let senders = vec![core("n0", -0.3, 0.0)];
        let receiver = core("out", 0.0, -0.5);
        let report =
            shared_bus_transfer(&senders, &bus(1.0, 0.1), &receiver, speed(1.0), 0).unwrap();
        assert_close(report.receiver_transmission_time, 2.1, 1e-12);
        assert!(report.invalid_output_window.is_none());
    }

    #[test]
    fn five_senders_serialize_their_grants() {
        let senders: Vec<Core> = (0..5).map(|i| core(&format!("n{i}"), i as f64 * 0.1, 0.0)).collect();
        let receiver = core("out", 0.0, -0.5);
        let report =
            shared_bus_transfer(&senders, &bus(1.0, 0.1), &receiver, speed(1.0), 0).unwrap();
        assert_close(report.receiver_transmission_time, 10.1, 1e-12);
        assert_eq!(report.completions.len(), 5);
        for (i, c) in report.completions.iter().enumerate() {
            assert_close(c.completed_at, (i + 1) as f64 * 2.0 + 0.1, 1e-12);
        }
    }

    #[test]
    fn nearest_sender_is_granted_first() {
        // (-0.3, 0) is closer to the arbiter at (0, 0.5) than (0.6, 0).
        let senders = vec![core("n-far", 0.6, 0.0), core("n-near", -0.3, 0.0)];
        let receiver = core("out", 0.0, -0.5);
        let report =
            shared_bus_transfer(&senders, &bus(1.0, 0.1), &receiver, speed(1.0), 0).unwrap();
        assert_eq!(report.grant_order, vec!["n-near", "n-far"]);
        // The grant order is visible in the trace.
        let grants: Vec<&TraceRecord> = report
            .trace
            .iter()
            .filter(|r| r.kind == "bus-grant")
            .collect();
        assert_eq!(grants[0].component, "n-near");
        assert_eq!(grants[1].component, "n-far");
    }

    #[test]
    fn grant_ties_break_by_id() {
        let senders = vec![core("b", 0.5, 0.0), core("a", -0.5, 0.0)];
        let receiver = core("out", 0.0, -0.5);
        let report =
            shared_bus_transfer(&senders, &bus(1.0, 0.0), &receiver, speed(1.0), 0).unwrap();
        assert_eq!(report.grant_order, vec!["a", "b"]);
    }

    #[test]
    fn wire_intervals_never_overlap_even_with_random_foreign_load() {
        let senders: Vec<Core> = (0..8).map(|i| core(&format!("n{i}"), i as f64 * 0.2, 0.0)).collect();
        let receiver = core("out", 0.0, -0.5);
        let mut b = bus(0.5, 2.0); // deliberately slow wire
        b.foreign_load = ForeignLoad::Exponential { mean: 0.7 };
        let report = shared_bus_transfer(&senders, &b, &receiver, speed(1.0), 99).unwrap();
        let mut intervals: Vec<(f64, f64)> = report
            .trace
            .iter()
            .filter(|r| r.detail.starts_with("wire busy"))
            .map(|r| {
                let inner = r
                    .detail
                    .trim_start_matches("wire busy [")
                    .split(')')
                    .next()
                    .unwrap();
                let mut parts = inner.split(", ");
                (
                    parts.next().unwrap().parse::<f64>().unwrap(),
                    parts.next().unwrap().parse::<f64>().unwrap(),
                )
            })
            .collect();
        assert_eq!(intervals.len(), 8);
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for pair in intervals.windows(2) {
            assert!(
                pair[0].1 <= pair[1].0 + 1e-12,
                "deliveries overlap: {pair:?}"
            );
        }
    }

    #[test]
    fn receiver_starts_processing_only_after_its_last_input() {
        let senders: Vec<Core> = (0..3).map(|i| core(&format!("n{i}"), i as f64 * 0.3, 0.0)).collect();
        let receiver = core("out", 0.0, -0.5);
        let report =
            shared_bus_transfer(&senders, &bus(1.0, 0.1), &receiver, speed(1.0), 0).unwrap();
        let deliveries: Vec<f64> = report
            .trace
            .iter()
            .filter(|r| r.kind == "bus-delivery")
            .map(|r| r.time)
            .collect();
        let last_arrival = deliveries.iter().copied().fold(0.0f64, f64::max);
        let start = report
            .trace
            .iter()
            .find(|r| r.detail.contains("processing ["))
            .unwrap();
        assert!(start.time >= last_arrival);
        let (w0, w1) = report.invalid_output_window.unwrap();
        assert!(w0 < w1);
        assert_close(w1, last_arrival, 1e-12);
    }

    #[test]
    fn hidden_layer_table_is_affine_with_slope_twice_arbitration() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rows = hidden_layer_scaling(&[1, 2, 4, 8], &bus(1.0, 0.0), &mut rng).unwrap();
        let tts: Vec<f64> = rows.iter().map(|r| r.transmission_time).collect();
        assert_eq!(tts, vec![2.0, 4.0, 8.0, 16.0]);
        let widths: Vec<u32> = (1..=64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rows = hidden_layer_scaling(&widths, &bus(1.0, 0.1), &mut rng).unwrap();
        let slope = least_squares_slope(&rows).unwrap();
        assert_close(slope, 2.0, 1e-9 * 2.0);
    }

    #[test]
    fn parallel_links_keep_transmission_constant() {
        let link = ParallelLink {
            from: "layer".to_string(),
            to: "out".to_string(),
            delay: 0.4,
        };
        let rows = parallel_link_scaling(&[1, 2, 4, 8, 64], &link).unwrap();
        assert!(rows.iter().all(|r| r.transmission_time == 0.4));
        assert_eq!(least_squares_slope(&rows).unwrap(), 0.0);
    }

    #[test]
    fn shallow_arrangement_has_worse_max_layer_transmission() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cmp = shallow_vs_deep(8, &[4, 4], &bus(1.0, 0.0), 0.0, &mut rng).unwrap();
        assert_eq!(cmp.wide.max_layer_transmission_time, 16.0);
        assert_eq!(cmp.arranged.max_layer_transmission_time, 8.0);
        // Degenerate Tp = 0 case: both compositions sum to 16*sqrt(2).
        assert_close(cmp.wide.total_apparent_time, 16.0 * 2f64.sqrt(), 1e-12);
        assert_close(cmp.arranged.total_apparent_time, 16.0 * 2f64.sqrt(), 1e-12);

        // With Tp = 1 the summed apparent times are NOT ordered the same
        // way; the max-layer metric stays decisive.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cmp = shallow_vs_deep(8, &[4, 4], &bus(1.0, 0.0), 1.0, &mut rng).unwrap();
        assert_close(cmp.wide.total_apparent_time, (256.0f64 + 324.0).sqrt(), 1e-12);
        assert_close(
            cmp.arranged.total_apparent_time,
            2.0 * (64.0f64 + 100.0).sqrt(),
            1e-12,
        );
        assert!(cmp.arranged.total_apparent_time > cmp.wide.total_apparent_time);
        assert!(cmp.arranged.max_layer_transmission_time < cmp.wide.max_layer_transmission_time);
    }

    #[test]
    fn widths_must_partition_the_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = shallow_vs_deep(9, &[7, 1], &bus(1.0, 0.0), 0.0, &mut rng).unwrap_err();
        assert!(err.to_string().contains("sum to 8"));
        assert!(shallow_vs_deep(2, &[1, 1], &bus(1.0, 0.0), 0.0, &mut rng).is_ok());
    }

    #[test]
    fn identical_single_layer_arrangements_are_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cmp = shallow_vs_deep(1, &[1], &bus(1.0, 0.2), 0.5, &mut rng).unwrap();
        assert_eq!(
            cmp.wide.layer_transmission_times,
            cmp.arranged.layer_transmission_times
        );
        assert_eq!(cmp.wide.total_apparent_time, cmp.arranged.total_apparent_time);
    }

    #[test]
    fn empty_sender_list_is_a_domain_error() {
        let receiver = core("out", 0.0, -0.5);
        let err = shared_bus_transfer(&[], &bus(1.0, 0.1), &receiver, speed(1.0), 0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }
}
