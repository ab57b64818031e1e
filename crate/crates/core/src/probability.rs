//! Propagation of the state-of-charge distribution conditioned on the battery never having
//! dropped below the recommended lower bound.
//!
//! A [`SocDistribution`] stores the cumulative masses `F(x)` for `x` in
//! `[sigma_low, sigma_up]`. Mass that falls below `sigma_low` is removed and never
//! renormalised, so `F(sigma_up)` is the probability that the battery has stayed in range.

use crate::charging::ChargingTable;
use crate::error::{Error, Result};
use crate::instances::{EnergyPmf, SocPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct SocDistribution {
    low: u32,
    up: u32,
    cdf: Vec<f64>,
}

impl SocDistribution {
    /// Point mass at `sigma_init`.
    pub fn initial(policy: &SocPolicy) -> Self {
        Self::point_mass(policy.sigma_low_pct, policy.sigma_up_pct, policy.sigma_init_pct)
    }

    pub fn point_mass(low: u32, up: u32, at: u32) -> Self {
        assert!(low <= at && at <= up, "point mass outside [low, up]");
        let cdf = (low..=up).map(|x| if x >= at { 1.0 } else { 0.0 }).collect();
        Self { low, up, cdf }
    }

    /// Builds a distribution from a mass vector indexed from `low`.
    pub fn from_pmf(low: u32, up: u32, pmf: &[f64]) -> Self {
        assert_eq!(pmf.len(), (up - low) as usize + 1);
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { low, up, cdf }
    }

    pub fn low(&self) -> u32 {
        self.low
    }

    pub fn up(&self) -> u32 {
        self.up
    }

    /// `F(x)`; zero below `low` and `F(up)` above `up`.
    #[inline]
    pub fn cdf_at(&self, x: i64) -> f64 {
        if x < self.low as i64 {
            0.0
        } else if x >= self.up as i64 {
            *self.cdf.last().expect("non-empty")
        } else {
            self.cdf[(x - self.low as i64) as usize]
        }
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Probability of never having been overused, `F(sigma_up)`.
    #[inline]
    pub fn survival(&self) -> f64 {
        *self.cdf.last().expect("non-empty")
    }

    /// Mass of `{X >= x}` jointly with "not overused", i.e. `F(up) - F(x - 1)`.
    #[inline]
    pub fn mass_at_least(&self, x: u32) -> f64 {
        self.survival() - self.cdf_at(x as i64 - 1)
    }

    pub fn pmf(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cdf
            .iter()
            .map(|&c| {
                let p = c - prev;
                prev = c;
                p
            })
            .collect()
    }

    /// Smallest SoC with positive mass, if any mass survives.
    pub fn min_support(&self) -> Option<u32> {
        self.pmf()
            .iter()
            .position(|&p| p > 0.0)
            .map(|k| self.low + k as u32)
    }

    /// Runs a stochastic trip preceded by a deterministic deadhead.
    pub fn after_trip(&self, energy: &EnergyPmf, deadhead_pct: u32) -> Result<Self> {
        let pmf = self.pmf();
        let mut out = vec![0.0; pmf.len()];
        for (consumption, prob) in energy.iter() {
            if consumption > 100 {
                return Err(Error::Domain(format!(
                    "trip consumption {consumption}% exceeds the battery"
                )));
            }
            if prob == 0.0 {
                continue;
            }
            let drop = (consumption + deadhead_pct) as usize;
            for (k, &p) in pmf.iter().enumerate().skip(drop) {
                if p != 0.0 {
                    out[k - drop] += prob * p;
                }
            }
        }
        Ok(Self::from_pmf(self.low, self.up, &out))
    }

    /// Deterministic move consuming `deadhead_pct`.
    pub fn after_move(&self, deadhead_pct: u32) -> Self {
        if deadhead_pct == 0 {
            return self.clone();
        }
        let drop = deadhead_pct as usize;
        let pmf = self.pmf();
        let mut out = vec![0.0; pmf.len()];
        for (k, &p) in pmf.iter().enumerate().skip(drop) {
            out[k - drop] = p;
        }
        Self::from_pmf(self.low, self.up, &out)
    }

    /// Relabels every SoC through the charging function over `intervals` intervals.
    pub fn charged(&self, table: &ChargingTable, intervals: usize) -> Self {
        if intervals == 0 {
            return self.clone();
        }
        let pmf = self.pmf();
        let mut out = vec![0.0; pmf.len()];
        for (k, &p) in pmf.iter().enumerate() {
            if p != 0.0 {
                let y = table.apply(self.low + k as u32, intervals).min(self.up);
                out[(y - self.low) as usize] += p;
            }
        }
        Self::from_pmf(self.low, self.up, &out)
    }
}

/// One elementary move along a schedule as seen by the SoC process.
#[derive(Debug, Clone, Copy)]
pub enum SocStep<'a> {
    /// Deadhead of `deadhead_pct` followed by a stochastic trip.
    Trip {
        energy: &'a EnergyPmf,
        deadhead_pct: u32,
    },
    /// One more interval on a charger. Consecutive charging steps form one activity.
    Charge,
    /// Deterministic move (to a waiting node, the sink, or between station nodes).
    Move { deadhead_pct: u32 },
}

/// Folds [`SocStep`]s into a distribution, evaluating each charging run in one go from the
/// distribution held before the run started.
#[derive(Debug, Clone)]
pub struct SocTracker<'t> {
    table: &'t ChargingTable,
    current: SocDistribution,
    run: Option<(SocDistribution, usize)>,
}

impl<'t> SocTracker<'t> {
    pub fn new(policy: &SocPolicy, table: &'t ChargingTable) -> Self {
        Self {
            table,
            current: SocDistribution::initial(policy),
            run: None,
        }
    }

    pub fn distribution(&self) -> &SocDistribution {
        &self.current
    }

    pub fn step(&mut self, step: SocStep<'_>) -> Result<()> {
        match step {
            SocStep::Charge => {
                let (pre, m) = self
                    .run
                    .take()
                    .unwrap_or_else(|| (self.current.clone(), 0));
                self.current = pre.charged(self.table, m + 1);
                self.run = Some((pre, m + 1));
            }
            SocStep::Trip {
                energy,
                deadhead_pct,
            } => {
                self.run = None;
                self.current = self.current.after_trip(energy, deadhead_pct)?;
            }
            SocStep::Move { deadhead_pct } => {
                self.run = None;
                self.current = self.current.after_move(deadhead_pct);
            }
        }
        Ok(())
    }
}

/// Probability that a schedule never drops below `sigma_low`.
pub fn schedule_probability<'a>(
    steps: impl IntoIterator<Item = SocStep<'a>>,
    policy: &SocPolicy,
    table: &ChargingTable,
) -> Result<f64> {
    let mut tracker = SocTracker::new(policy, table);
    for step in steps {
        tracker.step(step)?;
    }
    Ok(tracker.distribution().survival())
}
