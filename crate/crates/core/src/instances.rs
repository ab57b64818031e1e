//! Instance data model, the single-line random generator and the JSON file format.
//!
//! All state-of-charge quantities are integer percentages of battery capacity and all
//! times are integer minutes from midnight. Field names in the JSON schema carry their
//! unit as a suffix (`_min`, `_pct`, `_kwh`).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Uniform};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::charging::ChargerProfile;
use crate::error::{Error, Result};

/// Tolerance on the total mass of a probability mass function.
pub const PMF_SUM_TOLERANCE: f64 = 1e-9;

/// One support point of an energy-consumption distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmfEntry {
    pub consumption_pct: u32,
    pub probability: f64,
}

/// Finite-support distribution of the energy a trip consumes, in % of capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyPmf {
    pub support: Vec<PmfEntry>,
}

impl EnergyPmf {
    /// Builds a distribution from `(consumption, probability)` pairs. Entries are sorted by
    /// consumption; no validation is done here.
    pub fn new(points: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut support: Vec<PmfEntry> = points
            .into_iter()
            .map(|(consumption_pct, probability)| PmfEntry {
                consumption_pct,
                probability,
            })
            .collect();
        support.sort_by_key(|e| e.consumption_pct);
        Self { support }
    }

    pub fn point_mass(consumption_pct: u32) -> Self {
        Self::new([(consumption_pct, 1.0)])
    }

    /// Largest consumption carrying positive probability.
    pub fn max_consumption(&self) -> u32 {
        self.support
            .iter()
            .filter(|e| e.probability > 0.0)
            .map(|e| e.consumption_pct)
            .max()
            .unwrap_or(0)
    }

    pub fn total_mass(&self) -> f64 {
        self.support.iter().map(|e| e.probability).sum()
    }

    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .map(|e| e.consumption_pct as f64 * e.probability)
            .sum()
    }

    pub fn is_point_mass(&self) -> bool {
        self.support.iter().filter(|e| e.probability > 0.0).count() == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.support
            .iter()
            .map(|e| (e.consumption_pct, e.probability))
    }

    fn validate(&self, context: &str) -> Result<()> {
        if self.support.is_empty() {
            return Err(Error::Validation(format!("{context}: empty energy distribution")));
        }
        for pair in self.support.windows(2) {
            if pair[0].consumption_pct >= pair[1].consumption_pct {
                return Err(Error::Validation(format!(
                    "{context}: energy support values must be distinct and sorted"
                )));
            }
        }
        for e in &self.support {
            if e.consumption_pct > 100 {
                return Err(Error::Validation(format!(
                    "{context}: consumption {}% outside 0..100",
                    e.consumption_pct
                )));
            }
            if !(0.0..=1.0).contains(&e.probability) || !e.probability.is_finite() {
                return Err(Error::Validation(format!(
                    "{context}: probability {} outside [0, 1]",
                    e.probability
                )));
            }
        }
        let total = self.total_mass();
        if (total - 1.0).abs() > PMF_SUM_TOLERANCE {
            return Err(Error::Validation(format!(
                "{context}: probabilities sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub id: usize,
    pub origin: usize,
    pub destination: usize,
    pub departure_min: u32,
    pub travel_time_min: u32,
    pub energy_pmf: EnergyPmf,
}

impl Trip {
    pub fn arrival_min(&self) -> u32 {
        self.departure_min + self.travel_time_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Depot {
    pub id: usize,
    pub location: usize,
    pub capacity_vehicles: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingStation {
    pub id: usize,
    pub location: usize,
    pub chargers: u32,
}

/// Deadhead time and deterministic deadhead energy for every ordered location pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelMatrix {
    pub time_min: Vec<Vec<u32>>,
    pub energy_pct: Vec<Vec<u32>>,
}

impl TravelMatrix {
    pub fn time(&self, from: usize, to: usize) -> u32 {
        self.time_min[from][to]
    }

    pub fn energy(&self, from: usize, to: usize) -> u32 {
        self.energy_pct[from][to]
    }

    pub fn len(&self) -> usize {
        self.time_min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_min.is_empty()
    }
}

/// State-of-charge limits and timing rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocPolicy {
    pub sigma_min_pct: u32,
    pub sigma_low_pct: u32,
    pub sigma_up_pct: u32,
    pub sigma_max_pct: u32,
    pub sigma_init_pct: u32,
    pub epsilon: f64,
    pub interval_min: u32,
    pub min_layover_min: u32,
    pub max_terminal_wait_min: u32,
}

impl SocPolicy {
    /// Policy for a recommended range `[low, up]` with the default timing rules.
    pub fn range(low: u32, up: u32) -> Self {
        Self {
            sigma_min_pct: 0,
            sigma_low_pct: low,
            sigma_up_pct: up,
            sigma_max_pct: 100,
            sigma_init_pct: up,
            epsilon: 0.0,
            interval_min: 15,
            min_layover_min: 5,
            max_terminal_wait_min: 45,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// `ln(1 - epsilon)`, the right-hand side of the linearised chance row.
    pub fn log_survival_bound(&self) -> f64 {
        (1.0 - self.epsilon).ln()
    }

    /// Width of the conditioned distribution array, `sigma_up - sigma_low + 1`.
    pub fn soc_span(&self) -> usize {
        (self.sigma_up_pct - self.sigma_low_pct) as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        let p = self;
        if !(p.sigma_min_pct <= p.sigma_low_pct
            && p.sigma_low_pct <= p.sigma_up_pct
            && p.sigma_up_pct <= p.sigma_max_pct
            && p.sigma_max_pct <= 100)
        {
            return Err(Error::Validation(format!(
                "soc policy requires sigma_min <= sigma_low <= sigma_up <= sigma_max <= 100, got {}/{}/{}/{}",
                p.sigma_min_pct, p.sigma_low_pct, p.sigma_up_pct, p.sigma_max_pct
            )));
        }
        if p.sigma_init_pct != p.sigma_up_pct {
            return Err(Error::Validation(format!(
                "sigma_init ({}) must equal sigma_up ({})",
                p.sigma_init_pct, p.sigma_up_pct
            )));
        }
        if !(0.0..1.0).contains(&p.epsilon) {
            return Err(Error::Validation(format!(
                "epsilon {} outside [0, 1)",
                p.epsilon
            )));
        }
        if p.interval_min == 0 {
            return Err(Error::Validation("interval_min must be positive".into()));
        }
        Ok(())
    }
}

/// Arc cost coefficients and the coverage perturbation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub vehicle: f64,
    pub deadhead_per_min: f64,
    pub waiting_per_min: f64,
    pub charging_activity: f64,
    pub under_cover_penalty: f64,
    pub over_cover_penalty: f64,
    /// Per-trip cap on under-coverage, indexed by trip id.
    pub under_cover_caps: Vec<f64>,
    /// Per-trip cap on over-coverage, indexed by trip id.
    pub over_cover_caps: Vec<f64>,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            vehicle: 1000.0,
            deadhead_per_min: 0.4,
            waiting_per_min: 0.2,
            charging_activity: 10.0,
            under_cover_penalty: 1.0,
            over_cover_penalty: 1.0,
            under_cover_caps: Vec::new(),
            over_cover_caps: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub battery_capacity_kwh: f64,
    pub horizon_start_min: u32,
    pub horizon_end_min: u32,
    pub locations: Vec<String>,
    pub travel: TravelMatrix,
    pub trips: Vec<Trip>,
    pub depots: Vec<Depot>,
    pub stations: Vec<ChargingStation>,
    pub soc_policy: SocPolicy,
    pub costs: CostParams,
    pub charger: ChargerProfile,
}

impl Instance {
    pub fn policy(&self) -> &SocPolicy {
        &self.soc_policy
    }

    /// Number of charging intervals covering the horizon.
    pub fn num_intervals(&self) -> usize {
        ((self.horizon_end_min - self.horizon_start_min) / self.soc_policy.interval_min) as usize
    }

    /// Returns a copy with a different epsilon.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut out = self.clone();
        out.soc_policy.epsilon = epsilon;
        out
    }

    /// Returns a copy with a different recommended SoC range (and matching initial SoC).
    pub fn with_range(&self, low: u32, up: u32) -> Self {
        let mut out = self.clone();
        out.soc_policy.sigma_low_pct = low;
        out.soc_policy.sigma_up_pct = up;
        out.soc_policy.sigma_init_pct = up;
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.soc_policy.validate()?;
        let policy = &self.soc_policy;
        if !(self.battery_capacity_kwh > 0.0) {
            return Err(Error::Validation("battery_capacity_kwh must be positive".into()));
        }
        if self.horizon_end_min <= self.horizon_start_min {
            return Err(Error::Validation("empty planning horizon".into()));
        }
        if !(self.horizon_end_min - self.horizon_start_min).is_multiple_of(policy.interval_min) {
            return Err(Error::Validation(format!(
                "horizon length {} is not a multiple of interval_min {}",
                self.horizon_end_min - self.horizon_start_min,
                policy.interval_min
            )));
        }
        let n_loc = self.locations.len();
        let tm = &self.travel;
        if tm.time_min.len() != n_loc || tm.energy_pct.len() != n_loc {
            return Err(Error::Validation(format!(
                "travel matrix must be {n_loc}x{n_loc}"
            )));
        }
        for a in 0..n_loc {
            if tm.time_min[a].len() != n_loc || tm.energy_pct[a].len() != n_loc {
                return Err(Error::Validation(format!(
                    "travel matrix row {a} must have {n_loc} entries"
                )));
            }
            if tm.time_min[a][a] != 0 || tm.energy_pct[a][a] != 0 {
                return Err(Error::Validation(format!(
                    "travel matrix diagonal entry {a} must be zero"
                )));
            }
        }
        if self.depots.is_empty() {
            return Err(Error::Validation("at least one depot is required".into()));
        }
        for (i, d) in self.depots.iter().enumerate() {
            if d.id != i || d.location >= n_loc {
                return Err(Error::Validation(format!("depot {i}: bad id or location")));
            }
            if d.capacity_vehicles < 1 {
                return Err(Error::Validation(format!("depot {i}: capacity must be >= 1")));
            }
        }
        for (i, h) in self.stations.iter().enumerate() {
            if h.id != i || h.location >= n_loc {
                return Err(Error::Validation(format!("station {i}: bad id or location")));
            }
            if h.chargers < 1 {
                return Err(Error::Validation(format!("station {i}: needs >= 1 charger")));
            }
        }
        let allowed = policy.sigma_up_pct - policy.sigma_min_pct;
        for (i, t) in self.trips.iter().enumerate() {
            let ctx = format!("trip {i}");
            if t.id != i {
                return Err(Error::Validation(format!("{ctx}: id must equal its position")));
            }
            if t.origin >= n_loc || t.destination >= n_loc {
                return Err(Error::Validation(format!("{ctx}: unknown location")));
            }
            if t.travel_time_min == 0 {
                return Err(Error::Validation(format!("{ctx}: travel time must be positive")));
            }
            if t.departure_min < self.horizon_start_min || t.arrival_min() > self.horizon_end_min {
                return Err(Error::Validation(format!("{ctx}: outside the planning horizon")));
            }
            t.energy_pmf.validate(&ctx)?;
            let worst = t.energy_pmf.max_consumption();
            if worst > allowed {
                return Err(Error::Validation(format!(
                    "{ctx}: worst-case consumption {worst}% exceeds sigma_up - sigma_min = {allowed}%"
                )));
            }
        }
        let c = &self.costs;
        let scalars = [
            c.vehicle,
            c.deadhead_per_min,
            c.waiting_per_min,
            c.charging_activity,
            c.under_cover_penalty,
            c.over_cover_penalty,
        ];
        if scalars.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Validation("cost parameters must be non-negative".into()));
        }
        for caps in [&c.under_cover_caps, &c.over_cover_caps] {
            if caps.len() != self.trips.len() {
                return Err(Error::Validation(format!(
                    "perturbation caps must have one entry per trip ({} != {})",
                    caps.len(),
                    self.trips.len()
                )));
            }
            if caps.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Validation("perturbation caps must be non-negative".into()));
            }
        }
        self.charger.validate()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Parses and validates an instance from JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }

    /// Short content hash used in report headers.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).unwrap_or_default();
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Instance::from_json(&text)
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = instance.to_json()?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Replaces every energy distribution by a point mass at its largest support value and
/// sets epsilon to zero. The result is the deterministic worst-case baseline.
pub fn worst_case_projection(instance: &Instance) -> Instance {
    let mut out = instance.clone();
    for trip in &mut out.trips {
        trip.energy_pmf = EnergyPmf::point_mass(trip.energy_pmf.max_consumption());
    }
    out.soc_policy.epsilon = 0.0;
    out
}

// Generator geometry and energy model.
pub const LINE_LENGTH_KM: f64 = 8.5;
pub const SPEED_KMH: f64 = 20.0;
pub const RATE_LOCATION_KWH_PER_KM: f64 = 1.57;
pub const RATE_SCALE_KWH_PER_KM: f64 = 0.26;
pub const RATE_VARIANCE_RANGE: (f64, f64) = (0.35, 0.5);
pub const DEADHEAD_RATE_KWH_PER_KM: f64 = 1.83;
pub const BATTERY_CAPACITY_KWH: f64 = 300.0;
pub const HORIZON_START_MIN: u32 = 5 * 60;
pub const HORIZON_END_MIN: u32 = 24 * 60;
/// Minimum spacing between consecutive departures in one direction.
pub const MIN_HEADWAY_MIN: f64 = 5.0;
const MAX_JITTER_MIN: i64 = 3;
const PERTURBATION_CAP_MAX: f64 = 0.1;

/// Location indices used by [`generate_instance`].
pub mod layout {
    pub const TERMINAL_A: usize = 0;
    pub const TERMINAL_B: usize = 1;
    pub const DEPOT: usize = 2;
    pub const STATION: usize = 3;
}

/// Draws one mean energy rate (kWh/km) from the shifted exponential used by the generator.
pub fn sample_mean_rate<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let exp = Exp::new(1.0 / RATE_SCALE_KWH_PER_KM).expect("positive rate");
    RATE_LOCATION_KWH_PER_KM + exp.sample(rng)
}

/// Discretises a normal distribution (in % of capacity) onto the integer grid.
///
/// Bucket `k` receives the normal mass of `[k - 0.5, k + 0.5)`. Mass below 0.5 goes to
/// bucket 0 and everything above the bucket holding `mean + 4 sd` goes to that bucket.
pub fn discretize_normal(mean_pct: f64, sd_pct: f64) -> EnergyPmf {
    let top = (mean_pct + 4.0 * sd_pct).round().max(0.0) as u32;
    if top == 0 || sd_pct <= 0.0 {
        return EnergyPmf::point_mass(mean_pct.round().max(0.0) as u32);
    }
    let normal = Normal::new(mean_pct, sd_pct).expect("valid normal");
    let mut masses = Vec::with_capacity(top as usize + 1);
    for k in 0..=top {
        let lower = if k == 0 { 0.0 } else { normal.cdf(k as f64 - 0.5) };
        let upper = if k == top { 1.0 } else { normal.cdf(k as f64 + 0.5) };
        masses.push((k, (upper - lower).max(0.0)));
    }
    let total: f64 = masses.iter().map(|(_, p)| p).sum();
    EnergyPmf::new(
        masses
            .into_iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(k, p)| (k, p / total)),
    )
}

fn pct_of_capacity(kwh: f64, capacity_kwh: f64) -> f64 {
    kwh / capacity_kwh * 100.0
}

/// Chargers per station by instance size.
fn default_chargers(n_trips: usize) -> u32 {
    match n_trips {
        0..=100 => 1,
        101..=200 => 2,
        _ => 3,
    }
}

/// Generates a random single-line instance.
///
/// Trips alternate between the two termini of an 8.5 km line and are spread evenly over
/// 05:00-24:00 with a small random shift per seed. The depot and the charging station sit
/// at terminal A. The perturbation caps in `costs` are resampled from the seed.
pub fn generate_instance(
    n_trips: usize,
    seed: u64,
    policy: SocPolicy,
    costs: CostParams,
) -> Result<Instance> {
    if n_trips == 0 {
        return Err(Error::Validation("n_trips must be at least 1".into()));
    }
    policy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let travel_time = (LINE_LENGTH_KM / SPEED_KMH * 60.0).round() as u32;
    let line_energy =
        pct_of_capacity(DEADHEAD_RATE_KWH_PER_KM * LINE_LENGTH_KM, BATTERY_CAPACITY_KWH).round() as u32;
    // Terminal A, terminal B, depot (at A), station (at A).
    let at_a = [true, false, true, true];
    let n_loc = at_a.len();
    let mut time_min = vec![vec![0u32; n_loc]; n_loc];
    let mut energy_pct = vec![vec![0u32; n_loc]; n_loc];
    for a in 0..n_loc {
        for b in 0..n_loc {
            if at_a[a] != at_a[b] {
                time_min[a][b] = travel_time;
                energy_pct[a][b] = line_energy;
            }
        }
    }

    let latest_departure = HORIZON_END_MIN - travel_time;
    let span = (latest_departure - HORIZON_START_MIN) as f64;
    let per_direction = [n_trips.div_ceil(2), n_trips / 2];
    let phases = [0.25, 0.75];
    let jitter_dist = |spacing: f64| -> i64 {
        (((spacing - MIN_HEADWAY_MIN) / 2.0).floor() as i64).clamp(0, MAX_JITTER_MIN)
    };
    let mut raw: Vec<(u32, usize, EnergyPmf)> = Vec::with_capacity(n_trips);
    let var_dist = Uniform::new(RATE_VARIANCE_RANGE.0, RATE_VARIANCE_RANGE.1).expect("range");
    for (direction, &count) in per_direction.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let spacing = span / count as f64;
        if spacing < MIN_HEADWAY_MIN {
            return Err(Error::Validation(format!(
                "{n_trips} trips cannot fit the horizon with a {MIN_HEADWAY_MIN} min headway"
            )));
        }
        let amplitude = jitter_dist(spacing);
        for k in 0..count {
            let base = HORIZON_START_MIN as f64 + (k as f64 + phases[direction]) * spacing;
            let shift = if amplitude > 0 {
                rng.random_range(-amplitude..=amplitude)
            } else {
                0
            };
            let departure = (base.round() as i64 + shift)
                .clamp(HORIZON_START_MIN as i64, latest_departure as i64) as u32;
            let rate = sample_mean_rate(&mut rng);
            let variance = var_dist.sample(&mut rng);
            let mean_pct = pct_of_capacity(rate * LINE_LENGTH_KM, BATTERY_CAPACITY_KWH);
            let sd_pct = pct_of_capacity(variance.sqrt() * LINE_LENGTH_KM, BATTERY_CAPACITY_KWH);
            raw.push((departure, direction, discretize_normal(mean_pct, sd_pct)));
        }
    }
    raw.sort_by_key(|(dep, dir, _)| (*dep, *dir));
    let trips: Vec<Trip> = raw
        .into_iter()
        .enumerate()
        .map(|(id, (departure_min, direction, energy_pmf))| {
            let (origin, destination) = if direction == 0 {
                (layout::TERMINAL_A, layout::TERMINAL_B)
            } else {
                (layout::TERMINAL_B, layout::TERMINAL_A)
            };
            Trip {
                id,
                origin,
                destination,
                departure_min,
                travel_time_min: travel_time,
                energy_pmf,
            }
        })
        .collect();

    let cap_dist = Uniform::new(0.0, PERTURBATION_CAP_MAX).expect("range");
    let mut costs = costs;
    costs.under_cover_caps = (0..n_trips).map(|_| cap_dist.sample(&mut rng)).collect();
    costs.over_cover_caps = (0..n_trips).map(|_| cap_dist.sample(&mut rng)).collect();

    let instance = Instance {
        name: format!("line-{n_trips}-s{seed}"),
        seed: Some(seed),
        battery_capacity_kwh: BATTERY_CAPACITY_KWH,
        horizon_start_min: HORIZON_START_MIN,
        horizon_end_min: HORIZON_END_MIN,
        locations: vec![
            "terminal_a".into(),
            "terminal_b".into(),
            "depot".into(),
            "charging_station".into(),
        ],
        travel: TravelMatrix {
            time_min,
            energy_pct,
        },
        trips,
        depots: vec![Depot {
            id: 0,
            location: layout::DEPOT,
            capacity_vehicles: n_trips as u32,
        }],
        stations: vec![ChargingStation {
            id: 0,
            location: layout::STATION,
            chargers: default_chargers(n_trips),
        }],
        soc_policy: policy,
        costs,
        charger: ChargerProfile::default(),
    };
    instance.validate()?;
    Ok(instance)
}

/// Generates a compact instance for exhaustive checks: a 3.4 km line, a 30 kWh battery,
/// a 90-minute horizon split into three 30-minute charging intervals, and energy
/// distributions with at most three support points.
pub fn generate_tiny_instance(n_trips: usize, seed: u64, policy: SocPolicy) -> Result<Instance> {
    const LINE_KM: f64 = 3.4;
    const CAPACITY_KWH: f64 = 30.0;
    const INTERVAL_MIN: u32 = 30;
    if n_trips == 0 || n_trips > 8 {
        return Err(Error::Validation("tiny instances hold 1 to 8 trips".into()));
    }
    let mut policy = policy;
    policy.interval_min = INTERVAL_MIN;
    policy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let travel_time = (LINE_KM / SPEED_KMH * 60.0).round() as u32;
    let line_energy = pct_of_capacity(DEADHEAD_RATE_KWH_PER_KM * LINE_KM, CAPACITY_KWH).round() as u32;
    let at_a = [true, false, true, true];
    let mut time_min = vec![vec![0u32; 4]; 4];
    let mut energy_pct = vec![vec![0u32; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            if at_a[a] != at_a[b] {
                time_min[a][b] = travel_time;
                energy_pct[a][b] = line_energy;
            }
        }
    }
    let start = HORIZON_START_MIN;
    let end = start + 3 * INTERVAL_MIN;
    let mut raw: Vec<(u32, bool, EnergyPmf)> = (0..n_trips)
        .map(|_| {
            let departure = rng.random_range(start..=end - travel_time);
            let from_a = rng.random_bool(0.5);
            let mean = pct_of_capacity(sample_mean_rate(&mut rng) * LINE_KM, CAPACITY_KWH).round() as u32;
            let points = rng.random_range(1..=3u32);
            let weights: Vec<f64> = (0..points).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let pmf = EnergyPmf::new(
                weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| (mean + 2 * k as u32, w / total)),
            );
            (departure, from_a, pmf)
        })
        .collect();
    raw.sort_by_key(|(dep, from_a, _)| (*dep, !*from_a));
    let trips = raw
        .into_iter()
        .enumerate()
        .map(|(id, (departure_min, from_a, energy_pmf))| {
            let (origin, destination) = if from_a {
                (layout::TERMINAL_A, layout::TERMINAL_B)
            } else {
                (layout::TERMINAL_B, layout::TERMINAL_A)
            };
            Trip {
                id,
                origin,
                destination,
                departure_min,
                travel_time_min: travel_time,
                energy_pmf,
            }
        })
        .collect();
    let cap_dist = Uniform::new(0.0, PERTURBATION_CAP_MAX).expect("range");
    let mut costs = CostParams::default();
    costs.under_cover_caps = (0..n_trips).map(|_| cap_dist.sample(&mut rng)).collect();
    costs.over_cover_caps = (0..n_trips).map(|_| cap_dist.sample(&mut rng)).collect();
    let instance = Instance {
        name: format!("tiny-{n_trips}-s{seed}"),
        seed: Some(seed),
        battery_capacity_kwh: CAPACITY_KWH,
        horizon_start_min: start,
        horizon_end_min: end,
        locations: vec![
            "terminal_a".into(),
            "terminal_b".into(),
            "depot".into(),
            "charging_station".into(),
        ],
        travel: TravelMatrix { time_min, energy_pct },
        trips,
        depots: vec![Depot {
            id: 0,
            location: layout::DEPOT,
            capacity_vehicles: n_trips as u32,
        }],
        stations: vec![ChargingStation {
            id: 0,
            location: layout::STATION,
            chargers: 1,
        }],
        soc_policy: policy,
        costs,
        charger: ChargerProfile::default(),
    };
    instance.validate()?;
    Ok(instance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i1(seed: u64) -> Instance {
        generate_instance(60, seed, SocPolicy::range(20, 80), CostParams::default()).unwrap()
    }

    #[test]
    fn generated_i1_shape() {
        let inst = i1(7);
        assert_eq!(inst.trips.len(), 60);
        assert_eq!(inst.depots.len(), 1);
        assert_eq!(inst.stations.len(), 1);
        assert_eq!(inst.stations[0].chargers, 1);
        assert_eq!(inst.num_intervals(), 76);
        for t in &inst.trips {
            assert!((t.energy_pmf.total_mass() - 1.0).abs() < PMF_SUM_TOLERANCE);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(i1(3).to_json().unwrap(), i1(3).to_json().unwrap());
        assert_ne!(i1(3).to_json().unwrap(), i1(4).to_json().unwrap());
    }

    #[test]
    fn mean_rate_distribution_matches_location_plus_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let mean = (0..n).map(|_| sample_mean_rate(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.83).abs() / 1.83 < 0.02, "mean {mean}");
    }

    #[test]
    fn discretization_folds_tails() {
        let pmf = discretize_normal(5.0, 2.0);
        assert!((pmf.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(pmf.max_consumption(), 13);
        assert_eq!(pmf.support[0].consumption_pct, 0);
        let near_zero = discretize_normal(0.2, 1.0);
        assert!(near_zero.support[0].probability > 0.5);
    }

    #[test]
    fn worst_case_projection_examples() {
        let mut inst = i1(1);
        inst.trips[0].energy_pmf = EnergyPmf::new([(30, 0.5), (45, 0.5)]);
        inst.soc_policy.epsilon = 0.1;
        let proj = worst_case_projection(&inst);
        assert_eq!(proj.trips[0].energy_pmf, EnergyPmf::point_mass(45));
        assert_eq!(proj.soc_policy.epsilon, 0.0);
        assert_eq!(worst_case_projection(&proj), proj);
    }

    #[test]
    fn bad_probability_sum_rejected() {
        let mut inst = i1(1);
        inst.trips[2].energy_pmf = EnergyPmf::new([(3, 0.45), (5, 0.45)]);
        let err = Instance::from_json(&inst.to_json().unwrap()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn missing_sigma_low_names_field() {
        let inst = i1(1);
        let mut value: serde_json::Value = serde_json::from_str(&inst.to_json().unwrap()).unwrap();
        value["soc_policy"]
            .as_object_mut()
            .unwrap()
            .remove("sigma_low_pct");
        let text = serde_json::to_string_pretty(&value).unwrap();
        let err = Instance::from_json(&text).unwrap_err();
        match err {
            Error::Parse(msg) => {
                assert!(msg.contains("sigma_low"), "{msg}");
                assert!(msg.contains("line"), "{msg}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn excessive_support_rejected_with_trip_id() {
        let mut inst = i1(1);
        inst.trips[5].energy_pmf = EnergyPmf::new([(30, 0.5), (85, 0.5)]);
        let err = inst.validate().unwrap_err().to_string();
        assert!(err.contains("trip 5"), "{err}");
    }

    #[test]
    fn too_many_trips_rejected() {
        let r = generate_instance(1000, 0, SocPolicy::range(20, 80), CostParams::default());
        assert!(r.is_err());
    }
}
