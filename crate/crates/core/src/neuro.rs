//! Oscillator neurons and their temporal coordination.
//!
//! A neuron here is a leaky RC integrator with two triggers: the usual
//! voltage threshold on the accumulated potential, and a current threshold
//! on the synaptic input itself. A suprathreshold current fires the neuron
//! immediately and resets its phase to zero regardless of any prior state
//! (the fast, myelin-style delivery path used for time-base ticks); there
//! is no refractory delay on this path. Conduction speed is the axon's
//! base velocity scaled by its myelination factor, so a distant but
//! well-myelinated source can beat a nearby slow one.
//!
//! On top of this sit the coordination pieces: phase locking to a base
//! oscillator, assemblies of identical neurons learning firing-time
//! offsets so their spikes land on a target at a common phase, and a
//! feedback queue that drops items once the receiver has been busy for
//! too many delivery cycles.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timespace::SpatialPoint;

/// Myelination speeds conduction up by at most this factor.
pub const MYELINATION_FACTOR_MAX: f64 = 60.0;

/// Base oscillations live in this frequency band, Hz.
pub const BASE_FREQUENCY_BAND: (f64, f64) = (0.02, 600.0);

/// Default convergence tolerance on the arrival-phase spread, degrees.
pub const DEFAULT_SPREAD_TOLERANCE_DEG: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Circular statistics
// ---------------------------------------------------------------------------

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_signed_deg(angle: f64) -> f64 {
    let a = angle.rem_euclid(360.0);
    if a > 180.0 {
        a - 360.0
    } else {
        a
    }
}

/// Circular mean of angles in degrees, in `[0, 360)`. Zero for an empty
/// input.
pub fn circular_mean_deg(angles: &[f64]) -> f64 {
    if angles.is_empty() {
        return 0.0;
    }
    let (s, c) = angles.iter().fold((0.0, 0.0), |(s, c), a| {
        let r = a.to_radians();
        (s + r.sin(), c + r.cos())
    });
    let mean = s.atan2(c).to_degrees().rem_euclid(360.0);
    // rem_euclid of a tiny negative rounds up to 360.0 itself.
    if mean >= 360.0 {
        0.0
    } else {
        mean
    }
}

/// Deviations from the circular mean, each wrapped into `(-180, 180]`.
pub fn circular_deviations_deg(angles: &[f64]) -> Vec<f64> {
    let mean = circular_mean_deg(angles);
    angles.iter().map(|a| wrap_signed_deg(a - mean)).collect()
}

/// Circular spread: the angular width of the deviations around the
/// circular mean, degrees. Zero when all angles coincide.
pub fn circular_spread_deg(angles: &[f64]) -> f64 {
    let dev = circular_deviations_deg(angles);
    match dev.len() {
        0 | 1 => 0.0,
        _ => {
            let max = dev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = dev.iter().copied().fold(f64::INFINITY, f64::min);
            max - min
        }
    }
}

/// Charge superposed at a target: per-spike charge weighted by the cosine
/// of each arrival phase's deviation from the circular mean. Maximal when
/// every spike lands at the same phase.
pub fn superposed_charge(arrival_phases_deg: &[f64], charges: &[f64]) -> f64 {
    circular_deviations_deg(arrival_phases_deg)
        .iter()
        .zip(charges)
        .map(|(dev, q)| q * dev.to_radians().cos())
        .sum()
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Leaky RC integrator with a voltage threshold and a synaptic-current
/// threshold, carrying a phase.
#[derive(Debug, Clone)]
pub struct OscillatorNeuron {
    pub id: String,
    pub position: SpatialPoint,
    /// Membrane time constant, seconds.
    rc: f64,
    /// Voltage threshold for the ordinary spiking path.
    voltage_threshold: f64,
    /// Current threshold for the immediate (saltatoric) path. The default
    /// of 1 makes a unit-amplitude base tick always trigger.
    current_threshold: f64,
    potential: f64,
    /// Phase in radians, `[0, 2*pi)`.
    phase: f64,
    /// Learned firing-time adjustment, seconds.
    pub fire_offset: f64,
}

impl OscillatorNeuron {
    pub fn new(
        id: impl Into<String>,
        position: SpatialPoint,
        rc: f64,
        voltage_threshold: f64,
        current_threshold: f64,
    ) -> Result<Self> {
        if !rc.is_finite() || rc <= 0.0 {
            return Err(Error::domain(format!(
                "membrane time constant must be finite and > 0, got {rc}"
            )));
        }
        if !voltage_threshold.is_finite() || !current_threshold.is_finite() {
            return Err(Error::domain("thresholds must be finite"));
        }
        Ok(OscillatorNeuron {
            id: id.into(),
            position,
            rc,
            voltage_threshold,
            current_threshold,
            potential: 0.0,
            phase: 0.0,
            fire_offset: 0.0,
        })
    }

    pub fn rc(&self) -> f64 {
        self.rc
    }

    pub fn potential(&self) -> f64 {
        self.potential
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn current_threshold(&self) -> f64 {
        self.current_threshold
    }

    /// Puts the membrane back to rest without touching the learned offset.
    pub fn reset_state(&mut self) {
        self.potential = 0.0;
        self.phase = 0.0;
    }

    /// Advances the neuron by `dt` under synaptic current `i_syn`.
    ///
    /// Leak-and-integrate first: `V <- V*exp(-dt/rc) + i_syn*dt`, phase
    /// advancing at the RC rate. Then the two triggers, in order:
    ///
    /// - `i_syn >= current threshold`: immediate spike, potential and
    ///   phase both reset to zero, whatever they were (no refractory
    ///   delay on this path);
    /// - `V >= voltage threshold`: ordinary spike, potential reset, phase
    ///   untouched.
    pub fn integrate_step(&mut self, dt: f64, synaptic_current: f64) -> Result<SpikeDecision> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::domain(format!(
                "integration step must be finite and > 0, got {dt}"
            )));
        }
        if !synaptic_current.is_finite() {
            return Err(Error::domain("synaptic current must be finite"));
        }
        self.potential = self.potential * (-dt / self.rc).exp() + synaptic_current * dt;
        self.phase = (self.phase + TAU * dt / self.rc).rem_euclid(TAU);
        if synaptic_current >= self.current_threshold {
            self.potential = 0.0;
            self.phase = 0.0;
            return Ok(SpikeDecision::Saltatoric);
        }
        if self.potential >= self.voltage_threshold {
            self.potential = 0.0;
            return Ok(SpikeDecision::Voltage);
        }
        Ok(SpikeDecision::None)
    }
}

/// Outcome of one integration step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeDecision {
    None,
    /// Ordinary spike through the voltage threshold.
    Voltage,
    /// Immediate spike through the current threshold; phase reset to zero.
    Saltatoric,
}

impl SpikeDecision {
    pub fn fired(&self) -> bool {
        !matches!(self, SpikeDecision::None)
    }
}

/// A conduction path. Myelination multiplies the base velocity, up to the
/// saltatoric factor of 60.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Axon {
    pub from_id: String,
    pub to_id: String,
    /// Path length, meters (or scenario length units).
    pub length: f64,
    /// Conduction velocity of the unmyelinated path, length units per
    /// second.
    pub base_velocity: f64,
    /// Velocity multiplier in `[1, 60]`.
    #[serde(default = "one")]
    pub myelination_factor: f64,
}

fn one() -> f64 {
    1.0
}

impl Axon {
    pub fn validate(&self) -> Result<()> {
        if !self.length.is_finite() || self.length < 0.0 {
            return Err(Error::domain(format!(
                "axon {} -> {}: length must be finite and >= 0",
                self.from_id, self.to_id
            )));
        }
        if !self.base_velocity.is_finite() || self.base_velocity <= 0.0 {
            return Err(Error::domain(format!(
                "axon {} -> {}: base velocity must be finite and > 0",
                self.from_id, self.to_id
            )));
        }
        if !(1.0..=MYELINATION_FACTOR_MAX).contains(&self.myelination_factor) {
            return Err(Error::domain(format!(
                "axon {} -> {}: myelination factor must lie in [1, {MYELINATION_FACTOR_MAX}]",
                self.from_id, self.to_id
            )));
        }
        Ok(())
    }

    /// Signal travel time along this axon:
    /// `length / (base_velocity * myelination_factor)`.
    pub fn conduction_delay(&self) -> f64 {
        self.length / (self.base_velocity * self.myelination_factor)
    }
}

/// The brain-wide time base: a periodic tick train neurons can lock to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseOscillator {
    /// Tick frequency, Hz, within the physiological band.
    pub frequency: f64,
    /// Synaptic current carried by one tick. Unit by default, which
    /// crosses the default current threshold.
    #[serde(default = "one")]
    pub tick_amplitude: f64,
}

impl BaseOscillator {
    pub fn new(frequency: f64) -> Result<Self> {
        let b = BaseOscillator {
            frequency,
            tick_amplitude: 1.0,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = BASE_FREQUENCY_BAND;
        if !self.frequency.is_finite() || self.frequency < lo || self.frequency > hi {
            return Err(Error::domain(format!(
                "base frequency {} Hz outside the [{lo}, {hi}] Hz band",
                self.frequency
            )));
        }
        if !self.tick_amplitude.is_finite() || self.tick_amplitude <= 0.0 {
            return Err(Error::domain("tick amplitude must be finite and > 0"));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }
}

/// An emitted spike. The carried biological timestamp is the stamp the
/// sender put on it; the physical arrival time can be much later.
#[derive(Debug, Clone, Serialize)]
pub struct Spike {
    pub source_id: String,
    pub emit_time: f64,
    pub biological_timestamp: f64,
    pub charge: f64,
}

/// A group of anatomically identical neurons (equal RC constant) feeding
/// one target, synchronized by a common base oscillator.
#[derive(Debug, Clone, Serialize)]
pub struct Assembly {
    pub member_ids: Vec<String>,
    pub target_id: String,
    pub base: BaseOscillator,
}

impl Assembly {
    /// Builds an assembly, enforcing that the members share their RC
    /// constant.
    pub fn from_neurons(
        members: &[&OscillatorNeuron],
        target_id: impl Into<String>,
        base: BaseOscillator,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::domain("an assembly needs at least one member"));
        }
        base.validate()?;
        let rc = members[0].rc();
        for m in members {
            if m.rc() != rc {
                return Err(Error::domain(format!(
                    "assembly members must share their RC constant: '{}' has {} while '{}' has {rc}",
                    m.id,
                    m.rc(),
                    members[0].id
                )));
            }
        }
        Ok(Assembly {
            member_ids: members.iter().map(|m| m.id.clone()).collect(),
            target_id: target_id.into(),
            base,
        })
    }
}

// ---------------------------------------------------------------------------
// Phase arithmetic
// ---------------------------------------------------------------------------

/// Phase angle a conduction delay amounts to at frequency `f`:
/// `360 * delay * f`, reduced mod 360. A 5 ms delay at 100 Hz is half a
/// cycle — constructive interference turned destructive.
pub fn phase_shift(delay: f64, frequency: f64) -> f64 {
    (360.0 * delay * frequency).rem_euclid(360.0)
}

/// Result of locking a neuron to the base oscillator over an axon.
#[derive(Debug, Clone, Serialize)]
pub enum LockOutcome {
    Locked(LockReport),
    /// The base tick's current stayed below the neuron's current
    /// threshold, so the immediate path never fired: no lock.
    Subthreshold {
        tick_amplitude: f64,
        current_threshold: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct LockReport {
    /// Conduction delay of the tick, seconds.
    pub delay: f64,
    /// Steady-state firing phase relative to the base, degrees: the
    /// neuron's phase zero sits at tick arrival, not tick emission.
    pub locked_offset_deg: f64,
}

/// Phase-locks a neuron to the base oscillator: each tick arrives
/// `conduction_delay` after emission and, being suprathreshold, resets the
/// neuron's phase there. Neurons at different positions therefore lock to
/// different absolute times; "at the same time" differs per neuron.
pub fn phase_lock(
    neuron: &OscillatorNeuron,
    base: &BaseOscillator,
    axon: &Axon,
) -> Result<LockOutcome> {
    base.validate()?;
    axon.validate()?;
    if base.tick_amplitude < neuron.current_threshold() {
        return Ok(LockOutcome::Subthreshold {
            tick_amplitude: base.tick_amplitude,
            current_threshold: neuron.current_threshold(),
        });
    }
    let delay = axon.conduction_delay();
    Ok(LockOutcome::Locked(LockReport {
        delay,
        locked_offset_deg: phase_shift(delay, base.frequency),
    }))
}

// ---------------------------------------------------------------------------
// Arrival-phase learning
// ---------------------------------------------------------------------------

/// Per-member outcome of arrival-phase learning.
#[derive(Debug, Clone, Serialize)]
pub struct MemberOffset {
    pub id: String,
    /// Learned firing-time adjustment, seconds.
    pub fire_offset: f64,
    /// Arrival phase at the target after the last iteration, degrees.
    pub arrival_phase_deg: f64,
}

/// Convergence report of arrival-phase learning.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    /// Updates applied before the spread fell below tolerance.
    pub iterations: usize,
    pub tolerance_deg: f64,
    /// Arrival-phase spread before each update; the last entry is the
    /// final spread.
    pub spread_history_deg: Vec<f64>,
    /// Superposed unit charge at the target per iteration.
    pub charge_history: Vec<f64>,
    pub members: Vec<MemberOffset>,
}

/// One feedback update: every member's arrival phase is compared against
/// the circular mean of the round, and its firing offset moves against its
/// own deviation, converted from degrees to seconds through the base
/// period. Returns the per-member feedback, degrees.
pub fn arrival_phase_update(
    arrival_phases_deg: &[f64],
    fire_offsets: &mut [f64],
    eta: f64,
    frequency: f64,
) -> Vec<f64> {
    let deviations = circular_deviations_deg(arrival_phases_deg);
    for (offset, dev) in fire_offsets.iter_mut().zip(&deviations) {
        *offset -= eta * dev / (360.0 * frequency);
    }
    deviations
}

/// Learns per-member firing-time offsets so the members' spikes arrive at
/// the target at a common phase.
///
/// Each iteration fires every member once at its locked time plus its
/// current offset, measures the arrival phases over the given axons, and
/// applies [`arrival_phase_update`] with gain `eta`. The loop stops when
/// the circular spread of the arrival phases falls below `tolerance_deg`
/// or after `max_iterations` updates — running out of iterations is
/// reported, not raised.
pub fn learn_arrival_phase(
    assembly: &Assembly,
    axons: &[Axon],
    base: &BaseOscillator,
    eta: f64,
    max_iterations: usize,
    tolerance_deg: f64,
) -> Result<ConvergenceReport> {
    base.validate()?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!(
            "learning gain must lie in (0, 1], got {eta}"
        )));
    }
    if !(tolerance_deg.is_finite() && tolerance_deg > 0.0) {
        return Err(Error::domain("spread tolerance must be finite and > 0"));
    }
    if axons.len() != assembly.member_ids.len() {
        return Err(Error::domain(format!(
            "need exactly one axon per member: {} members, {} axons",
            assembly.member_ids.len(),
            axons.len()
        )));
    }
    for (axon, member) in axons.iter().zip(&assembly.member_ids) {
        axon.validate()?;
        if &axon.from_id != member || axon.to_id != assembly.target_id {
            return Err(Error::domain(format!(
                "axon {} -> {} does not connect member '{member}' to target '{}'",
                axon.from_id, axon.to_id, assembly.target_id
            )));
        }
    }

    let delays: Vec<f64> = axons.iter().map(Axon::conduction_delay).collect();
    let charges = vec![1.0; delays.len()];
    let mut offsets = vec![0.0f64; delays.len()];
    let mut spread_history = Vec::new();
    let mut charge_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let measure = |offsets: &[f64]| -> Vec<f64> {
        delays
            .iter()
            .zip(offsets)
            .map(|(d, o)| phase_shift(d + o, base.frequency))
            .collect()
    };
    let mut phases = measure(&offsets);
    loop {
        let spread = circular_spread_deg(&phases);
        spread_history.push(spread);
        charge_history.push(superposed_charge(&phases, &charges));
        if spread < tolerance_deg {
            converged = true;
            break;
        }
        if iterations >= max_iterations {
            break;
        }
        arrival_phase_update(&phases, &mut offsets, eta, base.frequency);
        iterations += 1;
        phases = measure(&offsets);
    }

    let members = assembly
        .member_ids
        .iter()
        .zip(&offsets)
        .zip(&phases)
        .map(|((id, offset), phase)| MemberOffset {
            id: id.clone(),
            fire_offset: *offset,
            arrival_phase_deg: *phase,
        })
        .collect();

    Ok(ConvergenceReport {
        converged,
        iterations,
        tolerance_deg,
        spread_history_deg: spread_history,
        charge_history,
        members,
    })
}

// ---------------------------------------------------------------------------
// Feedback queue with drop policy
// ---------------------------------------------------------------------------

/// One queued feedback message.
#[derive(Debug, Clone, Serialize)]
pub struct FeedbackItem {
    /// Engine sequence number; ties on arrival time resolve FIFO by seq.
    pub seq: u64,
    pub source: String,
    /// Physical arrival time at the receiver's queue, seconds.
    pub arrival_time: f64,
    /// The stamp carried inside the message envelope.
    pub biological_timestamp: f64,
    pub charge: f64,
}

/// Inbound feedback queue of one neuron. Items wait for a free delivery
/// cycle; an item that has sat through more than
/// `busy_cycles_drop_threshold` busy cycles is dropped.
#[derive(Debug, Clone)]
pub struct FeedbackQueue {
    items: Vec<FeedbackItem>,
    /// Delivery cycle length, seconds.
    pub cycle: f64,
    pub busy_cycles_drop_threshold: u32,
}

impl FeedbackQueue {
    pub fn new(cycle: f64, busy_cycles_drop_threshold: u32) -> Result<Self> {
        if !cycle.is_finite() || cycle <= 0.0 {
            return Err(Error::domain("delivery cycle must be finite and > 0"));
        }
        Ok(FeedbackQueue {
            items: Vec::new(),
            cycle,
            busy_cycles_drop_threshold,
        })
    }

    /// Enqueues an item, keeping FIFO order by `(arrival_time, seq)`.
    pub fn push(&mut self, item: FeedbackItem) {
        self.items.push(item);
        self.items
            .sort_by(|a, b| a.arrival_time.total_cmp(&b.arrival_time).then(a.seq.cmp(&b.seq)));
    }

    pub fn items(&self) -> &[FeedbackItem] {
        &self.items
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DeliveredItem {
    pub item: FeedbackItem,
    pub delivery_time: f64,
    /// Physical delivery time minus the carried biological timestamp.
    pub staleness: f64,
    pub busy_cycles_waited: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct DroppedItem {
    pub item: FeedbackItem,
    pub drop_time: f64,
    pub busy_cycles_waited: u32,
}

/// Outcome of draining a feedback queue against a busy schedule.
#[derive(Debug, Clone, Serialize)]
pub struct FeedbackRoundReport {
    pub delivered: Vec<DeliveredItem>,
    pub dropped: Vec<DroppedItem>,
    pub mean_staleness: Option<f64>,
    pub max_staleness: Option<f64>,
}

struct Waiting {
    item: FeedbackItem,
    busy_cycles: u32,
}

/// Shared delivery-cycle state machine: one instant per cycle; while the
/// receiver is busy, every waiting item ages one cycle and over-age items
/// drop; on a free cycle the head of the queue is delivered.
pub(crate) struct DeliveryCycles {
    threshold: u32,
    pending: VecDeque<Waiting>,
}

pub(crate) struct CycleOutcome {
    pub delivered: Option<DeliveredItem>,
    pub dropped: Vec<DroppedItem>,
}

impl DeliveryCycles {
    pub fn new(threshold: u32) -> Self {
        DeliveryCycles {
            threshold,
            pending: VecDeque::new(),
        }
    }

    pub fn on_arrival(&mut self, item: FeedbackItem) {
        self.pending.push_back(Waiting {
            item,
            busy_cycles: 0,
        });
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn on_cycle(&mut self, time: f64, busy: bool) -> CycleOutcome {
        let mut dropped = Vec::new();
        if busy {
            // Aging is uniform, so over-age items behind the head drop on
            // the same cycle; FIFO order of the drops is preserved.
            let threshold = self.threshold;
            let mut kept = VecDeque::new();
            for mut w in self.pending.drain(..) {
                w.busy_cycles += 1;
                if w.busy_cycles > threshold {
                    dropped.push(DroppedItem {
                        item: w.item,
                        drop_time: time,
                        busy_cycles_waited: w.busy_cycles,
                    });
                } else {
                    kept.push_back(w);
                }
            }
            self.pending = kept;
            return CycleOutcome {
                delivered: None,
                dropped,
            };
        }
        let delivered = self.pending.pop_front().map(|w| DeliveredItem {
            staleness: time - w.item.biological_timestamp,
            delivery_time: time,
            busy_cycles_waited: w.busy_cycles,
            item: w.item,
        });
        CycleOutcome { delivered, dropped }
    }
}

pub(crate) fn busy_at(busy: &[(f64, f64)], t: f64) -> bool {
    busy.iter().any(|&(start, end)| start <= t && t < end)
}

/// Drains the queue against the receiver's busy schedule (half-open
/// `[start, end)` intervals). Delivery cycles tick at multiples of the
/// queue's cycle length starting at zero; one item is delivered per free
/// cycle. Every item ends up either delivered (with its staleness) or
/// dropped.
pub fn feedback_round(queue: &FeedbackQueue, busy: &[(f64, f64)]) -> FeedbackRoundReport {
    let mut machine = DeliveryCycles::new(queue.busy_cycles_drop_threshold);
    let mut delivered = Vec::new();
    let mut dropped = Vec::new();

    let last_arrival = queue
        .items
        .last()
        .map(|i| i.arrival_time)
        .unwrap_or(0.0);
    let last_busy = busy.iter().map(|&(_, e)| e).fold(0.0f64, f64::max);
    let horizon_cycles = ((last_arrival.max(last_busy) / queue.cycle).ceil() as u64)
        + queue.items.len() as u64
        + queue.busy_cycles_drop_threshold as u64
        + 2;

    let mut next_item = 0usize;
    for j in 0..=horizon_cycles {
        let t = j as f64 * queue.cycle;
        while next_item < queue.items.len() && queue.items[next_item].arrival_time <= t {
            machine.on_arrival(queue.items[next_item].clone());
            next_item += 1;
        }
        let outcome = machine.on_cycle(t, busy_at(busy, t));
        delivered.extend(outcome.delivered);
        dropped.extend(outcome.dropped);
        if machine.pending() == 0 && next_item == queue.items.len() {
            break;
        }
    }

    let stalenesses: Vec<f64> = delivered.iter().map(|d| d.staleness).collect();
    let mean_staleness = if stalenesses.is_empty() {
        None
    } else {
        Some(stalenesses.iter().sum::<f64>() / stalenesses.len() as f64)
    };
    let max_staleness = stalenesses.iter().copied().fold(None, |acc: Option<f64>, s| {
        Some(acc.map_or(s, |a| a.max(s)))
    });
    FeedbackRoundReport {
        delivered,
        dropped,
        mean_staleness,
        max_staleness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn neuron(id: &str) -> OscillatorNeuron {
        OscillatorNeuron::new(id, SpatialPoint::ORIGIN, 0.05, 1.0, 1.0).unwrap()
    }

    fn axon(from: &str, to: &str, length: f64, velocity: f64, factor: f64) -> Axon {
        Axon {
            from_id: from.to_string(),
            to_id: to.to_string(),
            length,
            base_velocity: velocity,
            myelination_factor: factor,
        }
    }

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "expected {expected}, got {actual}"
        );
    }

    #[test]
    fn conduction_delay_examples() {
        assert_close(axon("a", "b", 0.01, 1.0, 1.0).conduction_delay(), 0.010, 1e-15);
        // Saltatoric path: the 60x factor brings 100 ms down to ~1.667 ms.
        assert_close(
            axon("a", "b", 0.1, 1.0, 60.0).conduction_delay(),
            0.0016666666666666666,
            1e-18,
        );
        assert_eq!(axon("a", "b", 0.0, 1.0, 1.0).conduction_delay(), 0.0);
    }

    #[test]
    fn conduction_delay_decreases_with_myelination() {
        let mut last = f64::INFINITY;
        for factor in [1.0, 2.0, 10.0, 30.0, 60.0] {
            let d = axon("a", "b", 0.1, 1.0, factor).conduction_delay();
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn axon_validation_bounds_the_myelination_factor() {
        assert!(axon("a", "b", 0.1, 1.0, 0.5).validate().is_err());
        assert!(axon("a", "b", 0.1, 1.0, 61.0).validate().is_err());
        assert!(axon("a", "b", -0.1, 1.0, 1.0).validate().is_err());
        assert!(axon("a", "b", 0.1, 0.0, 1.0).validate().is_err());
        assert!(axon("a", "b", 0.1, 1.0, 60.0).validate().is_ok());
    }

    #[test]
    fn phase_shift_examples() {
        // 5 ms at 100 Hz: constructive turned destructive.
        assert_close(phase_shift(0.005, 100.0), 180.0, 1e-9);
        // The sub-millisecond delay that already shifts 30 degrees.
        assert_close(phase_shift(0.0008333333333333333, 100.0), 30.0, 1e-9);
        assert_eq!(phase_shift(0.0, 40.0), 0.0);
        // Linear in the delay before the mod reduction.
        for i in 1..20 {
            let d = i as f64 * 1e-4;
            assert_close(phase_shift(d, 100.0), 360.0 * d * 100.0, 1e-9);
        }
        // Wraps at full cycles.
        assert_close(phase_shift(0.010, 100.0), 0.0, 1e-9);
    }

    #[test]
    fn base_oscillator_band_is_enforced() {
        assert!(BaseOscillator::new(0.02).is_ok());
        assert!(BaseOscillator::new(600.0).is_ok());
        assert!(BaseOscillator::new(0.01).is_err());
        assert!(BaseOscillator::new(601.0).is_err());
    }

    #[test]
    fn saltatoric_path_fires_and_zeroes_phase_from_any_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let mut n = OscillatorNeuron::new(
                "n",
                SpatialPoint::ORIGIN,
                0.001 + rng.random::<f64>() * 0.2,
                rng.random::<f64>() * 5.0,
                rng.random::<f64>() * 2.0,
            )
            .unwrap();
            // Random prior state.
            let _ = n.integrate_step(rng.random::<f64>() * 0.01 + 1e-6, rng.random::<f64>() * 0.3);
            let dt = rng.random::<f64>() * 0.01 + 1e-6;
            let current = n.current_threshold() + rng.random::<f64>();
            let decision = n.integrate_step(dt, current).unwrap();
            assert_eq!(decision, SpikeDecision::Saltatoric);
            assert_eq!(n.phase(), 0.0);
            assert_eq!(n.potential(), 0.0);
        }
    }

    #[test]
    fn leak_only_steps_decay_without_spiking() {
        let mut n = neuron("n");
        let _ = n.integrate_step(0.001, 0.5).unwrap();
        let before = n.potential();
        assert!(before > 0.0);
        for _ in 0..100 {
            let decision = n.integrate_step(0.001, 0.0).unwrap();
            assert_eq!(decision, SpikeDecision::None);
        }
        assert!(n.potential() < before);
        assert!(n.potential() > 0.0);
    }

    /// Reference: the same leaky update run at dt/1000 resolution. The
    /// coarse path must cross the voltage threshold within one coarse step
    /// of the fine path.
    #[test]
    fn voltage_path_crossing_matches_fine_step_reference() {
        let rc = 1.0f64;
        let v_th = 0.5f64;
        let i_syn = 1.0f64; // below the current threshold of 10
        let dt = 0.01f64;

        let fine_crossing = {
            let h = dt / 1000.0;
            let mut v = 0.0f64;
            let mut t = 0.0f64;
            loop {
                v = v * (-h / rc).exp() + i_syn * h;
                t += h;
                if v >= v_th {
                    break t;
                }
            }
        };

        let mut n = OscillatorNeuron::new("n", SpatialPoint::ORIGIN, rc, v_th, 10.0).unwrap();
        let mut t = 0.0;
        let coarse_crossing = loop {
            let decision = n.integrate_step(dt, i_syn).unwrap();
            t += dt;
            if decision == SpikeDecision::Voltage {
                break t;
            }
            assert!(t < 10.0, "no spike before t=10");
        };
        // Continuous-limit crossing of V(t) = rc*i*(1 - exp(-t/rc)) at
        // v_th = 0.5 is ln(2) = 0.693...
        assert_close(fine_crossing, std::f64::consts::LN_2, 2e-4);
        assert!((coarse_crossing - fine_crossing).abs() <= dt);
        assert_eq!(n.potential(), 0.0);
    }

    #[test]
    fn integrate_step_rejects_bad_steps() {
        let mut n = neuron("n");
        assert!(n.integrate_step(0.0, 0.0).is_err());
        assert!(n.integrate_step(-0.1, 0.0).is_err());
        assert!(n.integrate_step(0.1, f64::NAN).is_err());
    }

    #[test]
    fn phase_lock_offsets_follow_the_delay() {
        let base = BaseOscillator::new(100.0).unwrap();
        let n = neuron("n");
        let zero = axon("base", "n", 0.0, 1.0, 1.0);
        match phase_lock(&n, &base, &zero).unwrap() {
            LockOutcome::Locked(r) => assert_eq!(r.locked_offset_deg, 0.0),
            other => panic!("expected lock, got {other:?}"),
        }
        // 2.5 ms at 100 Hz: a quarter cycle.
        let quarter = axon("base", "n", 0.0025, 1.0, 1.0);
        match phase_lock(&n, &base, &quarter).unwrap() {
            LockOutcome::Locked(r) => assert_close(r.locked_offset_deg, 90.0, 1e-9),
            other => panic!("expected lock, got {other:?}"),
        }
        // Two members, 1 ms and 2 ms at 40 Hz: 14.4 and 28.8 degrees.
        let base = BaseOscillator::new(40.0).unwrap();
        for (length, expected) in [(0.001, 14.4), (0.002, 28.8)] {
            let a = axon("base", "n", length, 1.0, 1.0);
            match phase_lock(&n, &base, &a).unwrap() {
                LockOutcome::Locked(r) => assert_close(r.locked_offset_deg, expected, 1e-9),
                other => panic!("expected lock, got {other:?}"),
            }
        }
    }

    #[test]
    fn subthreshold_tick_reports_no_lock() {
        let base = BaseOscillator {
            frequency: 40.0,
            tick_amplitude: 0.25,
        };
        let n = neuron("n"); // current threshold 1.0
        match phase_lock(&n, &base, &axon("base", "n", 0.01, 1.0, 1.0)).unwrap() {
            LockOutcome::Subthreshold {
                tick_amplitude,
                current_threshold,
            } => {
                assert_eq!(tick_amplitude, 0.25);
                assert_eq!(current_threshold, 1.0);
            }
            other => panic!("expected subthreshold report, got {other:?}"),
        }
    }

    fn assembly_of(n: usize, base_hz: f64) -> (Assembly, Vec<OscillatorNeuron>) {
        let members: Vec<OscillatorNeuron> =
            (0..n).map(|i| neuron(&format!("m{i}"))).collect();
        let refs: Vec<&OscillatorNeuron> = members.iter().collect();
        let asm = Assembly::from_neurons(&refs, "target", BaseOscillator::new(base_hz).unwrap())
            .unwrap();
        (asm, members)
    }

    fn target_axons(asm: &Assembly, delays_ms: &[f64]) -> Vec<Axon> {
        asm.member_ids
            .iter()
            .zip(delays_ms)
            .map(|(id, &ms)| axon(id, "target", ms * 1e-3, 1.0, 1.0))
            .collect()
    }

    #[test]
    fn assembly_requires_identical_rc() {
        let a = neuron("a");
        let mut b = neuron("b");
        b = OscillatorNeuron::new("b", b.position, 0.07, 1.0, 1.0).unwrap();
        let base = BaseOscillator::new(40.0).unwrap();
        assert!(Assembly::from_neurons(&[&a, &b], "t", base).is_err());
    }

    #[test]
    fn equal_delays_converge_immediately() {
        let (asm, _) = assembly_of(3, 40.0);
        let axons = target_axons(&asm, &[1.5, 1.5, 1.5]);
        let report =
            learn_arrival_phase(&asm, &axons, &asm.base, 1.0, 10, 1e-9).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 0);
        assert_eq!(report.spread_history_deg, vec![0.0]);
    }

    #[test]
    fn full_gain_converges_in_one_update_to_the_closed_form() {
        // Oracle: offsets = mean(delay) - delay, i.e. {0.5, 0, -0.5} ms.
        let (asm, _) = assembly_of(3, 40.0);
        let axons = target_axons(&asm, &[1.0, 1.5, 2.0]);
        let report =
            learn_arrival_phase(&asm, &axons, &asm.base, 1.0, 10, 1e-9).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 1);
        assert!(report.spread_history_deg[1] < 1e-9);
        let expected = [0.0005, 0.0, -0.0005];
        for (m, e) in report.members.iter().zip(expected) {
            assert_close(m.fire_offset, e, 1e-15);
        }
        // Emission times differ by exactly the delay spread; with these
        // near-equal delays the members fire within a millisecond of each
        // other — "fire together".
        let emissions: Vec<f64> = report.members.iter().map(|m| m.fire_offset).collect();
        let spread = emissions.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - emissions.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_close(spread, 0.001, 1e-15);
    }

    #[test]
    fn partial_gain_decays_geometrically() {
        // Oracle: spread_{k+1} = (1 - eta) * spread_k for the linear
        // regime.
        let (asm, _) = assembly_of(3, 40.0);
        let axons = target_axons(&asm, &[1.0, 1.5, 2.0]);
        let eta = 0.5;
        let report =
            learn_arrival_phase(&asm, &axons, &asm.base, eta, 40, 1e-9).unwrap();
        assert!(report.converged);
        // The decay factor is measurable while the spread sits clearly
        // above float resolution of the ~20-degree phases involved.
        for pair in report.spread_history_deg.windows(2) {
            if pair[0] > 1e-6 {
                let ratio = pair[1] / pair[0];
                assert_close(ratio, 1.0 - eta, 1e-6);
            }
        }
    }

    #[test]
    fn superposed_charge_never_decreases_while_learning() {
        let (asm, _) = assembly_of(4, 40.0);
        let axons = target_axons(&asm, &[1.0, 2.0, 3.5, 5.0]);
        let report =
            learn_arrival_phase(&asm, &axons, &asm.base, 0.3, 120, 1e-9).unwrap();
        assert!(report.converged);
        for pair in report.charge_history.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12, "charge dropped: {pair:?}");
        }
        let final_charge = *report.charge_history.last().unwrap();
        assert_close(final_charge, 4.0, 1e-9);
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let (asm, _) = assembly_of(3, 40.0);
        let axons = target_axons(&asm, &[1.0, 1.5, 2.0]);
        let report =
            learn_arrival_phase(&asm, &axons, &asm.base, 0.1, 2, 1e-9).unwrap();
        assert!(!report.converged);
        assert_eq!(report.iterations, 2);
    }

    #[test]
    fn learning_rejects_mismatched_axons() {
        let (asm, _) = assembly_of(2, 40.0);
        let axons = target_axons(&asm, &[1.0]);
        assert!(learn_arrival_phase(&asm, &axons, &asm.base, 1.0, 5, 1e-9).is_err());
        let wrong = vec![
            axon("m0", "elsewhere", 0.001, 1.0, 1.0),
            axon("m1", "target", 0.001, 1.0, 1.0),
        ];
        assert!(learn_arrival_phase(&asm, &wrong, &asm.base, 1.0, 5, 1e-9).is_err());
    }

    #[test]
    fn circular_statistics_handle_the_wrap() {
        // Angles straddling 0/360: ordinary averaging would say ~180.
        let angles = [350.0, 10.0];
        assert_close(wrap_signed_deg(circular_mean_deg(&angles)), 0.0, 1e-9);
        assert!(circular_mean_deg(&angles) < 360.0);
        assert_close(circular_spread_deg(&angles), 20.0, 1e-9);
        assert_eq!(circular_spread_deg(&[42.0]), 0.0);
        assert_eq!(circular_spread_deg(&[]), 0.0);
        assert_close(wrap_signed_deg(350.0), -10.0, 1e-12);
        assert_close(wrap_signed_deg(-190.0), 170.0, 1e-12);
        assert_eq!(wrap_signed_deg(180.0), 180.0);
    }

    fn item(seq: u64, arrival: f64, bio: f64) -> FeedbackItem {
        FeedbackItem {
            seq,
            source: format!("n{seq}"),
            arrival_time: arrival,
            biological_timestamp: bio,
            charge: 1.0,
        }
    }

    #[test]
    fn idle_receiver_drops_nothing_and_staleness_is_transport_delay() {
        let mut q = FeedbackQueue::new(1.0, 3).unwrap();
        q.push(item(0, 1.0, 0.25));
        q.push(item(1, 2.0, 1.5));
        let report = feedback_round(&q, &[]);
        assert!(report.dropped.is_empty());
        assert_eq!(report.delivered.len(), 2);
        assert_close(report.delivered[0].staleness, 0.75, 1e-12);
        assert_close(report.delivered[1].staleness, 0.5, 1e-12);
        assert_eq!(report.delivered[0].delivery_time, 1.0);
    }

    #[test]
    fn busy_receiver_drops_the_head_after_threshold_cycles() {
        // Threshold 3: the head survives 3 busy cycles and drops on the
        // 4th (N+1).
        let mut q = FeedbackQueue::new(1.0, 3).unwrap();
        q.push(item(0, 0.0, -1.0));
        let report = feedback_round(&q, &[(0.0, 4.5)]);
        assert_eq!(report.delivered.len(), 0);
        assert_eq!(report.dropped.len(), 1);
        assert_eq!(report.dropped[0].busy_cycles_waited, 4);
        assert_eq!(report.dropped[0].drop_time, 3.0);
    }

    #[test]
    fn shorter_busy_spell_delivers_late_but_keeps_the_item() {
        let mut q = FeedbackQueue::new(1.0, 3).unwrap();
        q.push(item(0, 0.0, -1.0));
        // Busy for cycles 0..=2 (3 busy cycles), free at t=3.
        let report = feedback_round(&q, &[(0.0, 2.5)]);
        assert_eq!(report.dropped.len(), 0);
        assert_eq!(report.delivered.len(), 1);
        assert_eq!(report.delivered[0].delivery_time, 3.0);
        assert_eq!(report.delivered[0].busy_cycles_waited, 3);
        assert_close(report.delivered[0].staleness, 4.0, 1e-12);
    }

    #[test]
    fn simultaneous_arrivals_deliver_fifo_by_seq() {
        let mut q = FeedbackQueue::new(1.0, 3).unwrap();
        q.push(item(7, 1.0, 0.0));
        q.push(item(3, 1.0, 0.0));
        let report = feedback_round(&q, &[]);
        assert_eq!(report.delivered.len(), 2);
        assert_eq!(report.delivered[0].item.seq, 3);
        assert_eq!(report.delivered[1].item.seq, 7);
        assert!(report.delivered[0].delivery_time < report.delivered[1].delivery_time);
    }

    #[test]
    fn aggregate_staleness_statistics() {
        let mut q = FeedbackQueue::new(1.0, 2).unwrap();
        q.push(item(0, 1.0, 0.0));
        q.push(item(1, 2.0, 0.5));
        let report = feedback_round(&q, &[]);
        assert_close(report.mean_staleness.unwrap(), 1.25, 1e-12);
        assert_close(report.max_staleness.unwrap(), 1.5, 1e-12);
        let empty = feedback_round(&FeedbackQueue::new(1.0, 2).unwrap(), &[]);
        assert!(empty.mean_staleness.is_none());
        assert!(empty.max_staleness.is_none());
    }
}
