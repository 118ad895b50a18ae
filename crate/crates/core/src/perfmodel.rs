//! Closed-form payload-efficiency models.
//!
//! Execution time splits into payload (arithmetic) and non-payload
//! (housekeeping, transfer) parts. With arithmetic time normalized to 1 at
//! full operand length and housekeeping pinned at a fraction `fp0` of it,
//! shrinking operands by a factor `k` only shrinks the arithmetic term:
//!
//! ```text
//! speedup(fp0, k) = (fp0 + 1) / (fp0 + 1/k)
//! ```
//!
//! so the ideal gain `k` is reached only when housekeeping vanishes, and
//! heavy housekeeping pushes the gain toward 1 no matter how short the
//! operands get. Inverting the model recovers `fp0` from a measured
//! speedup. Transfer-style blocking degrades efficiency through the
//! apparent-time law; a context switch spends the equivalent of many
//! payload instructions and enters the same law as a transmission-to-
//! processing ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timespace::{apparent_processing_time, EventTiming};

/// Decomposition of a workload into blocking fractions, both relative to
/// its full-precision arithmetic time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkloadProfile {
    pub label: String,
    /// Housekeeping time fraction (addressing, cache misses, branching).
    #[serde(default)]
    pub housekeeping_fraction: f64,
    /// Data transfer time fraction.
    #[serde(default)]
    pub transfer_fraction: f64,
}

impl WorkloadProfile {
    pub fn validate(&self) -> Result<()> {
        if !self.housekeeping_fraction.is_finite() || self.housekeeping_fraction < 0.0 {
            return Err(Error::domain(format!(
                "profile '{}': housekeeping fraction must be finite and >= 0",
                self.label
            )));
        }
        if !self.transfer_fraction.is_finite() || self.transfer_fraction < 0.0 {
            return Err(Error::domain(format!(
                "profile '{}': transfer fraction must be finite and >= 0",
                self.label
            )));
        }
        Ok(())
    }
}

/// A measured operand-shrink speedup on one machine.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkObservation {
    pub machine: String,
    /// Measured speedup, dimensionless, in (1, k).
    pub speedup: f64,
    /// Operand shrink factor `k` (4 for 64-bit to 16-bit operands).
    pub operand_shrink: f64,
}

/// Speedup from shrinking operands by `k` with housekeeping fraction
/// `fp0`: `(fp0 + 1) / (fp0 + 1/k)`. Always within `[1, k]`.
pub fn operand_speedup(housekeeping_fraction: f64, shrink: f64) -> Result<f64> {
    if !housekeeping_fraction.is_finite() || housekeeping_fraction < 0.0 {
        return Err(Error::domain(format!(
            "housekeeping fraction must be finite and >= 0, got {housekeeping_fraction}"
        )));
    }
    if !shrink.is_finite() || shrink < 1.0 {
        return Err(Error::domain(format!(
            "operand shrink factor must be finite and >= 1, got {shrink}"
        )));
    }
    Ok((housekeeping_fraction + 1.0) / (housekeeping_fraction + 1.0 / shrink))
}

/// Inverts the speedup model: the housekeeping fraction that produces the
/// observed speedup, `fp0 = (1 - s/k) / (s - 1)`.
pub fn fit_housekeeping(obs: &BenchmarkObservation) -> Result<f64> {
    let s = obs.speedup;
    let k = obs.operand_shrink;
    if !k.is_finite() || k < 1.0 {
        return Err(Error::domain(format!(
            "operand shrink factor must be finite and >= 1, got {k}"
        )));
    }
    if !s.is_finite() || s <= 1.0 {
        return Err(Error::domain(format!(
            "speedup {s} infeasible: a shrink speedup must exceed 1"
        )));
    }
    if s >= k {
        return Err(Error::domain(format!(
            "speedup {s} infeasible for shrink factor {k}: would need negative housekeeping"
        )));
    }
    Ok((1.0 - s / k) / (s - 1.0))
}

/// Payload efficiency of a profile: the processing time over the apparent
/// time once every blocking contribution (transfer and housekeeping alike)
/// is charged as transmission. Capped at 0.5 by the apparent-time floor
/// `T_A >= 2*Tp`.
pub fn efficiency(profile: &WorkloadProfile, processing_time: f64) -> Result<f64> {
    profile.validate()?;
    if !processing_time.is_finite() || processing_time <= 0.0 {
        return Err(Error::domain(format!(
            "processing time must be finite and > 0, got {processing_time}"
        )));
    }
    let blocking =
        (profile.transfer_fraction + profile.housekeeping_fraction) * processing_time;
    let timing = EventTiming::new(processing_time, blocking)?;
    Ok(processing_time / apparent_processing_time(timing))
}

/// Non-payload to payload ratio of periodic context switching: the switch
/// cost in instructions over the payload instructions executed between
/// switches. Feeds the apparent-time law as a transmission-to-processing
/// ratio.
pub fn context_switch_penalty(
    instructions_per_switch: u64,
    switch_cost_instructions: u64,
) -> Result<f64> {
    if instructions_per_switch == 0 {
        return Err(Error::domain(
            "payload instruction count per switch must be > 0",
        ));
    }
    if switch_cost_instructions == 0 {
        return Err(Error::domain("switch cost must be > 0 instructions"));
    }
    Ok(switch_cost_instructions as f64 / instructions_per_switch as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn obs(speedup: f64, k: f64) -> BenchmarkObservation {
        BenchmarkObservation {
            machine: "m".to_string(),
            speedup,
            operand_shrink: k,
        }
    }

    fn profile(fp0: f64, tf: f64) -> WorkloadProfile {
        WorkloadProfile {
            label: "p".to_string(),
            housekeeping_fraction: fp0,
            transfer_fraction: tf,
        }
    }

    fn assert_rel(actual: f64, expected: f64, rel: f64) {
        let err = if expected == 0.0 {
            actual.abs()
        } else {
            ((actual - expected) / expected).abs()
        };
        assert!(err <= rel, "expected {expected}, got {actual}");
    }

    #[test]
    fn no_housekeeping_gives_ideal_speedup() {
        assert_eq!(operand_speedup(0.0, 4.0).unwrap(), 4.0);
    }

    #[test]
    fn fitted_housekeeping_reproduces_measured_speedups() {
        // Oracle: algebraic inversion, fp0 = (1 - s/k)/(s - 1).
        // 3.01 at k=4: (1 - 0.7525)/2.01 = 0.12313432835820895.
        let fp0 = fit_housekeeping(&obs(3.01, 4.0)).unwrap();
        assert_rel(fp0, 0.12313432835820895, 1e-12);
        assert_rel(operand_speedup(fp0, 4.0).unwrap(), 3.01, 1e-12);
        // 3.42 at k=4: 0.145/2.42 = 0.05991735537190083.
        let fp0 = fit_housekeeping(&obs(3.42, 4.0)).unwrap();
        assert_rel(fp0, 0.05991735537190083, 1e-12);
        assert_rel(operand_speedup(fp0, 4.0).unwrap(), 3.42, 1e-12);
    }

    #[test]
    fn housekeeping_dominated_speedup_approaches_one() {
        let s = operand_speedup(1e9, 4.0).unwrap();
        assert!(s > 1.0 && s < 1.0 + 1e-8, "s = {s}");
    }

    #[test]
    fn near_ideal_speedup_fits_near_zero_housekeeping() {
        let fp0 = fit_housekeeping(&obs(4.0 - 1e-9, 4.0)).unwrap();
        assert!(fp0 > 0.0 && fp0 < 1e-9);
    }

    #[test]
    fn infeasible_speedups_are_rejected() {
        assert!(fit_housekeeping(&obs(4.0, 4.0)).is_err());
        assert!(fit_housekeeping(&obs(4.5, 4.0)).is_err());
        assert!(fit_housekeeping(&obs(1.0, 4.0)).is_err());
        assert!(fit_housekeeping(&obs(0.5, 4.0)).is_err());
    }

    #[test]
    fn fit_and_speedup_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..2000 {
            let fp0 = rng.random::<f64>() * 100.0;
            let k = 1.0 + rng.random::<f64>() * 15.0;
            let s = operand_speedup(fp0, k).unwrap();
            if s <= 1.0 || s >= k {
                continue; // k == 1 or fp0 == 0 edge draws
            }
            let back = fit_housekeeping(&obs(s, k)).unwrap();
            assert_rel(back, fp0, 1e-10);
        }
    }

    #[test]
    fn speedup_is_monotone_in_both_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..2000 {
            let fp0 = rng.random::<f64>() * 10.0;
            let k = 1.0 + rng.random::<f64>() * 10.0;
            let s = operand_speedup(fp0, k).unwrap();
            assert!(operand_speedup(fp0 + 0.1, k).unwrap() < s);
            assert!(operand_speedup(fp0, k + 0.1).unwrap() > s);
            assert!((1.0..=k).contains(&s));
        }
    }

    #[test]
    fn efficiency_peaks_at_half() {
        assert_eq!(efficiency(&profile(0.0, 0.0), 1.0).unwrap(), 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let e = efficiency(
                &profile(rng.random::<f64>() * 5.0, rng.random::<f64>() * 5.0),
                0.5 + rng.random::<f64>(),
            )
            .unwrap();
            assert!(e > 0.0 && e <= 0.5);
        }
    }

    #[test]
    fn efficiency_degrades_with_transfer_fraction() {
        let mut last = f64::INFINITY;
        for tf in [0.0, 0.5, 1.0, 5.0, 20.0, 100.0] {
            let e = efficiency(&profile(0.1, tf), 1.0).unwrap();
            assert!(e < last);
            last = e;
        }
    }

    #[test]
    fn efficiency_is_scale_free_in_processing_time() {
        let p = profile(0.2, 3.0);
        let a = efficiency(&p, 1.0).unwrap();
        let b = efficiency(&p, 123.0).unwrap();
        assert_rel(a, b, 1e-12);
    }

    #[test]
    fn workload_ratio_landmarks_are_attainable() {
        // Transfer fractions that produce efficiency ratios of 10, within
        // 100..250, and beyond 1000 against the zero-blocking baseline.
        let baseline = efficiency(&profile(0.0, 0.0), 1.0).unwrap();
        let ratio = |tf: f64| baseline / efficiency(&profile(0.0, tf), 1.0).unwrap();
        // Oracle: ratio r needs sqrt(R^2 + (2+R)^2) = 2r, i.e.
        // R = sqrt(2r^2 - 1) - 1.
        let r10 = (2.0 * 100.0f64 - 1.0).sqrt() - 1.0;
        assert_rel(ratio(r10), 10.0, 1e-12);
        assert!((100.0..=250.0).contains(&ratio(200.0)));
        assert!(ratio(1500.0) > 1000.0);
    }

    #[test]
    fn context_switch_ratio_examples() {
        assert_eq!(context_switch_penalty(1, 10_000).unwrap(), 1e4);
        assert_eq!(context_switch_penalty(10_000, 10_000).unwrap(), 1.0);
        assert!(context_switch_penalty(0, 10_000).is_err());
        assert!(context_switch_penalty(10_000, 0).is_err());
    }

    #[test]
    fn context_switch_ratio_feeds_the_apparent_time_law() {
        let r = context_switch_penalty(1, 10_000).unwrap();
        let timing = EventTiming::new(1.0, r).unwrap();
        let ta = apparent_processing_time(timing);
        // Switch-dominated: the apparent time is governed by the switch
        // cost, not the payload instruction.
        assert!(ta > r);
        assert_rel(ta, (r * r + (2.0 + r) * (2.0 + r)).sqrt(), 1e-15);
    }
}
