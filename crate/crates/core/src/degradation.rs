//! Cycle-based capacity fading of vehicle schedules and its Monte Carlo estimate.

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charging::ChargingTable;
use crate::error::{Error, Result};
use crate::instances::Instance;
use crate::master::Column;
use crate::network::{build_graph, ArcId, DepotGraph, NodeId, NodeKind, SOURCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
    pub capacity_kwh: f64,
    /// Fraction of the nominal capacity at which the battery is retired.
    pub end_of_life_threshold: f64,
}

impl Default for FadingParams {
    fn default() -> Self {
        Self {
            gamma1: -4.092e-4,
            gamma2: -2.167,
            gamma3: 1.408e-5,
            gamma4: 6.130,
            capacity_kwh: 300.0,
            end_of_life_threshold: 0.8,
        }
    }
}

impl FadingParams {
    pub fn with_capacity(mut self, capacity_kwh: f64) -> Self {
        self.capacity_kwh = capacity_kwh;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.end_of_life_threshold > 0.0 && self.end_of_life_threshold < 1.0) {
            return Err(Error::Validation("end-of-life threshold must lie in (0, 1)".into()));
        }
        if !(self.capacity_kwh > 0.0) {
            return Err(Error::Validation("capacity must be positive".into()));
        }
        Ok(())
    }
}

/// SoC at the beginning, the bottom and the end of a cycle, as fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleAnchors {
    pub begin: f64,
    pub middle: f64,
    pub end: f64,
}

impl CycleAnchors {
    pub fn new(begin: f64, middle: f64, end: f64) -> Self {
        Self { begin, middle, end }
    }

    pub fn average(&self) -> f64 {
        (self.begin + self.middle + self.end) / 3.0
    }

    /// `average - middle`, written so that flat cycles give exactly zero.
    pub fn deviation(&self) -> f64 {
        ((self.begin - self.middle) + (self.end - self.middle)) / 3.0
    }
}

/// A discharging and charging cycle of a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Cycle {
    pub nodes: Vec<NodeId>,
    /// Arc entering each node; `None` for the source.
    pub entering: Vec<Option<ArcId>>,
}

/// Splits a schedule into cycles. A cycle runs up to the end of a station visit that
/// contained a charge; the last cycle ends at the sink.
pub fn split_cycles(graph: &DepotGraph, arcs: &[ArcId]) -> Vec<Cycle> {
    let mut cycles = Vec::new();
    let mut current = Cycle {
        nodes: vec![SOURCE],
        entering: vec![None],
    };
    let mut charged = false;
    for &a in arcs {
        let head = graph.arc(a).head;
        let kind = graph.node(head);
        let leaves_station = !kind.is_waiting() && !kind.is_charging();
        if charged && leaves_station {
            cycles.push(std::mem::replace(
                &mut current,
                Cycle {
                    nodes: Vec::new(),
                    entering: Vec::new(),
                },
            ));
            charged = false;
        }
        if kind.is_charging() {
            charged = true;
        }
        current.nodes.push(head);
        current.entering.push(Some(a));
    }
    cycles.push(current);
    cycles
}

/// Fading rate in kWh lost per kWh processed.
pub fn fade_rate(anchors: CycleAnchors, params: &FadingParams) -> Result<f64> {
    for v in [anchors.begin, anchors.middle, anchors.end] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("SoC anchor {v} outside [0, 1]")));
        }
    }
    let avg = anchors.average();
    let dev = anchors.deviation();
    Ok(params.gamma1 * dev * (params.gamma2 * avg).exp() + params.gamma3 * (params.gamma4 * dev).exp())
}

/// `(rate, fade in kWh)` of one cycle.
pub fn cycle_fade(anchors: CycleAnchors, params: &FadingParams) -> Result<(f64, f64)> {
    let rate = fade_rate(anchors, params)?;
    let processed = ((anchors.begin - anchors.middle) + (anchors.end - anchors.middle)) * params.capacity_kwh;
    Ok((rate, processed * rate))
}

/// Years until the capacity reaches the end-of-life threshold.
pub fn lifetime_years(params: &FadingParams, yearly_fade_kwh: f64) -> f64 {
    params.capacity_kwh * (1.0 - params.end_of_life_threshold) / yearly_fade_kwh
}

/// One simulated day of a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayOutcome {
    pub fade_kwh: f64,
    /// SoC stayed within the recommended range after every move.
    pub within_range: bool,
    /// SoC dropped below the absolute minimum.
    pub below_minimum: bool,
}

/// Simulates one day with the given trip consumptions (integer % of capacity).
pub fn simulate_day(
    instance: &Instance,
    graph: &DepotGraph,
    table: &ChargingTable,
    cycles: &[Cycle],
    params: &FadingParams,
    consumption: &mut dyn FnMut(usize) -> u32,
) -> Result<DayOutcome> {
    let policy = &instance.soc_policy;
    let low = policy.sigma_low_pct as i64;
    let up = policy.sigma_up_pct as i64;
    let mut within = true;
    let mut below_min = false;
    let mut check = |soc: i64| {
        within &= soc >= low && soc <= up;
        below_min |= soc < policy.sigma_min_pct as i64;
    };
    let frac = |soc: i64| (soc as f64 / 100.0).clamp(0.0, 1.0);
    let mut begin = policy.sigma_init_pct as i64;
    let mut fade = 0.0;
    let last = cycles.len() - 1;
    for (t, cycle) in cycles.iter().enumerate() {
        let mut middle = begin;
        let mut end = begin;
        let mut run: Option<(i64, usize)> = None;
        let mut discharging = true;
        for (&node, entering) in cycle.nodes.iter().zip(&cycle.entering) {
            let Some(a) = *entering else { continue };
            let arc = graph.arc(a);
            let iota = arc.energy_pct as i64;
            match graph.node(node) {
                NodeKind::Trip(i) => {
                    run = None;
                    middle -= consumption(i) as i64 + iota;
                    end = middle;
                    check(middle);
                }
                NodeKind::Charging { .. } => {
                    discharging = false;
                    let (pre, m) = run.map_or((end, 1), |(p, m)| (p, m + 1));
                    run = Some((pre, m));
                    let pre = pre.clamp(0, table.cap_pct() as i64) as u32;
                    end = (table.apply(pre, m) as i64).min(up);
                    check(end);
                }
                _ => {
                    run = None;
                    if discharging {
                        middle -= iota;
                        end = middle;
                        check(middle);
                    } else {
                        end -= iota;
                        check(end);
                    }
                }
            }
        }
        if t == last {
            end = policy.sigma_init_pct as i64;
        }
        let anchors = CycleAnchors::new(frac(begin), frac(middle), frac(end));
        fade += cycle_fade(anchors, params)?.1;
        begin = end;
    }
    Ok(DayOutcome {
        fade_kwh: fade,
        within_range: within,
        below_minimum: below_min,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleFade {
    pub schedule: usize,
    pub daily_fade_kwh: f64,
    pub daily_fade_sd: f64,
    pub yearly_fade_kwh: f64,
    pub within_range_frequency: f64,
    pub below_minimum_events: usize,
    pub reported_probability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FadeReport {
    pub iterations: usize,
    pub seed: u64,
    pub schedules: Vec<ScheduleFade>,
    pub daily_fade_per_vehicle: f64,
    pub yearly_fade_per_vehicle: f64,
    pub lifetime_years: f64,
}

impl FadeReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "schedule,daily_fade_kwh,daily_fade_sd,yearly_fade_kwh,within_range_frequency,below_minimum_events,reported_probability\n",
        );
        for r in &self.schedules {
            let _ = writeln!(
                s,
                "{},{:.9},{:.9},{:.6},{:.6},{},{:.12}",
                r.schedule,
                r.daily_fade_kwh,
                r.daily_fade_sd,
                r.yearly_fade_kwh,
                r.within_range_frequency,
                r.below_minimum_events,
                r.reported_probability
            );
        }
        s
    }
}

/// Trip samplers for every trip of an instance.
fn samplers(instance: &Instance) -> Result<Vec<(Vec<u32>, WeightedIndex<f64>)>> {
    instance
        .trips
        .iter()
        .map(|t| {
            let (values, weights): (Vec<u32>, Vec<f64>) = t.energy_pmf.iter().unzip();
            let dist = WeightedIndex::new(weights)
                .map_err(|e| Error::Validation(format!("trip {}: {e}", t.id)))?;
            Ok((values, dist))
        })
        .collect()
}

/// Estimates the average daily capacity fade per vehicle of a solution by simulating `k`
/// days per schedule. Iteration `j` of schedule `s` draws from its own ChaCha stream, so
/// the result does not depend on the thread count.
pub fn monte_carlo_fade(
    instance: &Instance,
    schedules: &[Column],
    k: usize,
    seed: u64,
    params: &FadingParams,
) -> Result<FadeReport> {
    if k == 0 {
        return Err(Error::Validation("at least one iteration is required".into()));
    }
    if schedules.is_empty() {
        return Err(Error::Validation("solution has no schedules".into()));
    }
    params.validate()?;
    let graphs: Vec<DepotGraph> = (0..instance.depots.len()).map(|d| build_graph(instance, d)).collect();
    let table = ChargingTable::for_instance(instance)?;
    let samplers = samplers(instance)?;
    let mut rows = Vec::with_capacity(schedules.len());
    for (s, col) in schedules.iter().enumerate() {
        let g = graphs
            .get(col.depot)
            .ok_or_else(|| Error::Validation(format!("schedule {s}: unknown depot {}", col.depot)))?;
        let cycles = split_cycles(g, &col.arcs);
        let days: Vec<DayOutcome> = (0..k)
            .into_par_iter()
            .map(|j| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((s * k + j) as u64);
                let mut draw = |trip: usize| {
                    let (values, dist) = &samplers[trip];
                    values[dist.sample(&mut rng)]
                };
                simulate_day(instance, g, &table, &cycles, params, &mut draw)
            })
            .collect::<Result<_>>()?;
        let mean = days.iter().map(|d| d.fade_kwh).sum::<f64>() / k as f64;
        let var = if k > 1 {
            days.iter().map(|d| (d.fade_kwh - mean).powi(2)).sum::<f64>() / (k - 1) as f64
        } else {
            0.0
        };
        rows.push(ScheduleFade {
            schedule: s,
            daily_fade_kwh: mean,
            daily_fade_sd: var.sqrt(),
            yearly_fade_kwh: 365.0 * mean,
            within_range_frequency: days.iter().filter(|d| d.within_range).count() as f64 / k as f64,
            below_minimum_events: days.iter().filter(|d| d.below_minimum).count(),
            reported_probability: col.probability(),
        });
    }
    let daily = rows.iter().map(|r| r.daily_fade_kwh).sum::<f64>() / rows.len() as f64;
    let yearly = 365.0 * daily;
    Ok(FadeReport {
        iterations: k,
        seed,
        schedules: rows,
        daily_fade_per_vehicle: daily,
        yearly_fade_per_vehicle: yearly,
        lifetime_years: lifetime_years(params, yearly),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{ArcKind, SINK};

    #[test]
    fn flat_cycle_rate_is_gamma3() {
        let p = FadingParams::default();
        for x in [0.0, 0.35, 0.8, 1.0] {
            let r = fade_rate(CycleAnchors::new(x, x, x), &p).unwrap();
            assert_eq!(r, p.gamma3);
        }
    }

    #[test]
    fn reference_cycle() {
        let p = FadingParams::default();
        let a = CycleAnchors::new(0.8, 0.4, 0.8);
        assert!((a.average() - 2.0 / 3.0).abs() < 1e-12);
        assert!((a.deviation() - 0.8 / 3.0).abs() < 1e-12);
        let (rate, fade) = cycle_fade(a, &p).unwrap();
        assert!((rate - 4.65e-5).abs() < 0.01e-5, "{rate}");
        assert!((fade - 240.0 * rate).abs() < 1e-15);
        assert!((fade - 1.12e-2).abs() < 0.01e-2, "{fade}");
        let (_, double) = cycle_fade(a, &p.clone().with_capacity(600.0)).unwrap();
        assert!((double - 2.0 * fade).abs() < 1e-15);
    }

    #[test]
    fn anchors_outside_unit_interval() {
        let p = FadingParams::default();
        assert!(matches!(fade_rate(CycleAnchors::new(1.1, 0.5, 0.8), &p), Err(Error::Domain(_))));
        assert!(fade_rate(CycleAnchors::new(0.8, -0.1, 0.8), &p).is_err());
    }

    #[test]
    fn lifetimes() {
        let p = FadingParams::default();
        assert!((lifetime_years(&p, 10.0) - 6.0).abs() < 1e-12);
        assert!((lifetime_years(&p, 14.0) - 4.2857).abs() < 1e-4);
    }

    #[test]
    fn cycles_partition_the_path() {
        let inst = crate::instances::generate_instance(
            20,
            2,
            crate::instances::SocPolicy::range(20, 80),
            crate::instances::CostParams::default(),
        )
        .unwrap();
        let g = build_graph(&inst, 0);
        // Trip 0, a charge at the station, then trip k back at terminal A's side.
        let t0 = g.trip_node(0);
        let to_wait = g
            .out_arcs(t0)
            .iter()
            .copied()
            .find(|&a| g.node(g.arc(a).head).is_waiting())
            .expect("trip reaches the station");
        let w = g.arc(to_wait).head;
        let to_charge = g
            .out_arcs(w)
            .iter()
            .copied()
            .find(|&a| g.node(g.arc(a).head).is_charging())
            .unwrap();
        let c = g.arc(to_charge).head;
        let back = g
            .out_arcs(c)
            .iter()
            .copied()
            .find(|&a| g.node(g.arc(a).head).is_waiting())
            .unwrap();
        let w2 = g.arc(back).head;
        let mut path = vec![g.find_arc(SOURCE, t0).unwrap(), to_wait, to_charge, back];
        let mut cur = w2;
        // Follow waiting chains until a trip is reachable.
        loop {
            if let Some(&a) = g.out_arcs(cur).iter().find(|&&a| g.node(g.arc(a).head).is_trip()) {
                path.push(a);
                cur = g.arc(a).head;
                break;
            }
            let a = *g
                .out_arcs(cur)
                .iter()
                .find(|&&a| g.node(g.arc(a).head).is_waiting())
                .unwrap();
            path.push(a);
            cur = g.arc(a).head;
        }
        path.push(g.find_arc(cur, SINK).unwrap());
        assert_eq!(g.arc(*path.last().unwrap()).kind, ArcKind::PullIn);
        let cycles = split_cycles(&g, &path);
        assert_eq!(cycles.len(), 2);
        let joined: Vec<NodeId> = cycles.iter().flat_map(|c| c.nodes.clone()).collect();
        assert_eq!(joined, g.path_nodes(&path));
        assert!(g.node(*cycles[0].nodes.last().unwrap()).is_waiting());
        assert!(g.node(cycles[1].nodes[0]).is_trip());

        let direct = g.path_arcs(&[SOURCE, t0, SINK]).unwrap();
        assert_eq!(split_cycles(&g, &direct).len(), 1);
    }

    #[test]
    fn deterministic_days_repeat() {
        let inst = crate::instances::worst_case_projection(
            &crate::instances::generate_instance(
                6,
                1,
                crate::instances::SocPolicy::range(20, 80),
                crate::instances::CostParams::default(),
            )
            .unwrap(),
        );
        let g = build_graph(&inst, 0);
        let table = ChargingTable::for_instance(&inst).unwrap();
        let arcs = g.path_arcs(&[SOURCE, g.trip_node(0), SINK]).unwrap();
        let col = Column::from_arcs(&g, &inst, &table, arcs).unwrap();
        let r = monte_carlo_fade(&inst, &[col], 50, 3, &FadingParams::default()).unwrap();
        assert!(r.schedules[0].daily_fade_sd < 1e-12);
        assert_eq!(r.schedules[0].within_range_frequency, 1.0);
        assert!(r.daily_fade_per_vehicle > 0.0);
    }
}
