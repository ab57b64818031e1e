//! Piecewise-linear CC-CV charging curve and its tabulated discrete inverse.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::Instance;

/// One linear segment of the charging curve: constant power up to `soc_upper_pct`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeSegment {
    pub soc_upper_pct: u32,
    pub rate_kwh_per_min: f64,
}

/// Charger power as a step function of the state of charge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargerProfile {
    pub segments: Vec<ChargeSegment>,
}

impl Default for ChargerProfile {
    /// 450 kW fast charger: 7.5 kWh/min below 80 %, 6 kWh/min to 90 %, 3.75 kWh/min above.
    fn default() -> Self {
        Self {
            segments: vec![
                ChargeSegment { soc_upper_pct: 80, rate_kwh_per_min: 7.5 },
                ChargeSegment { soc_upper_pct: 90, rate_kwh_per_min: 6.0 },
                ChargeSegment { soc_upper_pct: 100, rate_kwh_per_min: 3.75 },
            ],
        }
    }
}

impl ChargerProfile {
    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Validation("charger profile has no segments".into()));
        }
        let mut prev_upper = 0;
        let mut prev_rate = f64::INFINITY;
        for (k, seg) in self.segments.iter().enumerate() {
            if seg.soc_upper_pct <= prev_upper && !(k == 0 && seg.soc_upper_pct > 0) {
                return Err(Error::Validation(
                    "charger thresholds must be strictly increasing".into(),
                ));
            }
            if !(seg.rate_kwh_per_min > 0.0) {
                return Err(Error::Validation("charger rates must be positive".into()));
            }
            if seg.rate_kwh_per_min > prev_rate {
                return Err(Error::Validation("charger rates must be non-increasing".into()));
            }
            prev_upper = seg.soc_upper_pct;
            prev_rate = seg.rate_kwh_per_min;
        }
        if prev_upper != 100 {
            return Err(Error::Validation("last charger threshold must be 100".into()));
        }
        Ok(())
    }
}

/// The charging function for a given battery and SoC cap.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargingFunction {
    profile: ChargerProfile,
    capacity_kwh: f64,
    cap_pct: u32,
}

impl ChargingFunction {
    pub fn new(profile: ChargerProfile, capacity_kwh: f64, cap_pct: u32) -> Result<Self> {
        profile.validate()?;
        if !(capacity_kwh > 0.0) || cap_pct > 100 {
            return Err(Error::Validation("invalid battery capacity or cap".into()));
        }
        Ok(Self {
            profile,
            capacity_kwh,
            cap_pct,
        })
    }

    pub fn cap_pct(&self) -> u32 {
        self.cap_pct
    }

    /// Exact SoC (in %, not rounded, not capped) after charging `minutes` from `soc_pct`.
    pub fn charge_exact(&self, soc_pct: f64, minutes: f64) -> f64 {
        let mut soc = soc_pct;
        let mut left = minutes;
        let mut lower = 0.0;
        for seg in &self.profile.segments {
            let upper = seg.soc_upper_pct as f64;
            if soc >= upper || left <= 0.0 {
                lower = upper;
                continue;
            }
            let start = soc.max(lower);
            let pct_per_min = seg.rate_kwh_per_min / self.capacity_kwh * 100.0;
            let needed = (upper - start) / pct_per_min;
            if needed <= left {
                soc = upper;
                left -= needed;
            } else {
                soc = start + pct_per_min * left;
                left = 0.0;
            }
            lower = upper;
        }
        soc.min(100.0)
    }

    /// SoC after charging `minutes` in one evaluation, rounded to the integer grid and
    /// capped at the configured upper bound.
    pub fn lambda(&self, soc_pct: u32, minutes: u32) -> Result<u32> {
        if soc_pct > self.cap_pct {
            return Err(Error::Domain(format!(
                "charging from {soc_pct}% above the cap {}%",
                self.cap_pct
            )));
        }
        let exact = self.charge_exact(soc_pct as f64, minutes as f64);
        Ok((exact.round() as u32).min(self.cap_pct))
    }
}

/// Precomputed λ(x, m·ρ) for every grid SoC `x <= cap` and `m` up to a maximum.
#[derive(Debug, Clone)]
pub struct ChargingTable {
    interval_min: u32,
    cap_pct: u32,
    /// `values[m][x]`.
    values: Vec<Vec<u32>>,
}

impl ChargingTable {
    pub fn new(function: &ChargingFunction, interval_min: u32, max_intervals: usize) -> Self {
        let cap = function.cap_pct();
        let values = (0..=max_intervals)
            .map(|m| {
                (0..=cap)
                    .map(|x| {
                        function
                            .lambda(x, m as u32 * interval_min)
                            .expect("x within cap")
                    })
                    .collect()
            })
            .collect();
        Self {
            interval_min,
            cap_pct: cap,
            values,
        }
    }

    /// Table for an instance's charger, battery, SoC cap and interval length.
    pub fn for_instance(instance: &Instance) -> Result<Self> {
        let f = ChargingFunction::new(
            instance.charger.clone(),
            instance.battery_capacity_kwh,
            instance.soc_policy.sigma_up_pct,
        )?;
        Ok(Self::new(&f, instance.soc_policy.interval_min, instance.num_intervals()))
    }

    pub fn interval_min(&self) -> u32 {
        self.interval_min
    }

    pub fn cap_pct(&self) -> u32 {
        self.cap_pct
    }

    pub fn max_intervals(&self) -> usize {
        self.values.len() - 1
    }

    /// λ(x, m·ρ). Panics if `x` exceeds the cap or `m` the table size.
    #[inline]
    pub fn apply(&self, soc_pct: u32, intervals: usize) -> u32 {
        self.values[intervals][soc_pct as usize]
    }

    /// Checked variant of [`ChargingTable::apply`].
    pub fn lambda(&self, soc_pct: u32, intervals: usize) -> Result<u32> {
        if soc_pct > self.cap_pct {
            return Err(Error::Domain(format!(
                "charging from {soc_pct}% above the cap {}%",
                self.cap_pct
            )));
        }
        if intervals > self.max_intervals() {
            return Err(Error::Domain(format!(
                "{intervals} intervals exceed the table size {}",
                self.max_intervals()
            )));
        }
        Ok(self.apply(soc_pct, intervals))
    }

    /// All grid SoCs that charge to exactly `target` in `intervals` intervals. The set is a
    /// contiguous range because λ is monotone; it is empty when `target` is unreachable.
    pub fn preimage(&self, target: u32, intervals: usize) -> RangeInclusive<u32> {
        let row = &self.values[intervals];
        let first = row.iter().position(|&y| y == target);
        match first {
            #[allow(clippy::reversed_empty_ranges)]
            None => 1..=0,
            Some(lo) => {
                let hi = row.iter().rposition(|&y| y == target).expect("found above");
                lo as u32..=hi as u32
            }
        }
    }

    /// Largest grid SoC `x` in `[floor, cap]` with λ(x) <= `target`, or `None`.
    pub fn last_not_above(&self, target: u32, intervals: usize, floor: u32) -> Option<u32> {
        let row = &self.values[intervals];
        (floor..=self.cap_pct).rev().find(|&x| row[x as usize] <= target)
    }
}
