//! Command-line front end: instance generation, solving, epsilon sweeps and fade evaluation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bnp::{self, Limits, SolveOptions, SolveOutcome, SolveStatus, SolverStats};
use crate::charging::ChargingTable;
use crate::degradation::{monte_carlo_fade, FadingParams};
use crate::error::{Error, Result};
use crate::instances::{
    generate_instance, read_instance, worst_case_projection, write_instance, CostParams, Instance, SocPolicy,
};
use crate::master::Column;
use crate::network::{build_graph, NodeKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_LIMIT_WITH_SOLUTION: i32 = 4;

/// Epsilon values of the default sweep, besides the deterministic baseline.
pub const SWEEP_EPSILONS: [f64; 11] = [0.001, 0.005, 0.01, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.40, 0.50];

#[derive(Debug, Parser)]
#[command(name = "evsp", version, about = "Chance-constrained electric bus scheduling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random single-line instance.
    Generate(GenerateArgs),
    /// Solve one instance.
    Solve(SolveArgs),
    /// Solve for a list of epsilon values and both SoC ranges.
    Sweep(SweepArgs),
    /// Estimate the capacity fade of a solution by simulation.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Worst-case energy consumption, epsilon forced to zero.
    Deterministic,
    Stochastic,
}

/// Recommended SoC range given as `LOW-UP`, e.g. `20-80`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocRange {
    pub low: u32,
    pub up: u32,
}

impl std::str::FromStr for SocRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once('-').ok_or_else(|| format!("expected LOW-UP, got {s:?}"))?;
        let a: u32 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
        let b: u32 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
        let (low, up) = (a.min(b), a.max(b));
        if up > 100 || low == up {
            return Err(format!("invalid range {s:?}"));
        }
        Ok(Self { low, up })
    }
}

impl std::fmt::Display for SocRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.low, self.up)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 60)]
    pub trips: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "20-80")]
    #[serde(serialize_with = "display")]
    pub range: SocRange,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Output instance file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Overrides the instance's epsilon.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Overrides the instance's recommended SoC range.
    #[arg(long)]
    #[serde(serialize_with = "display_opt")]
    pub range: Option<SocRange>,
    #[arg(long, value_enum, default_value_t = Mode::Stochastic)]
    pub mode: Mode,
    /// Seed recorded in the outputs and used by any simulation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 7200.0)]
    pub time_limit: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the depot networks as text.
    #[arg(long)]
    pub dump_graph: bool,
    /// Also write the final restricted master in LP format.
    #[arg(long)]
    pub dump_lp: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Comma-separated epsilon list; the deterministic baseline is always added.
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Option<Vec<f64>>,
    /// Restricts the sweep to one range; both 20-80 and 30-80 by default.
    #[arg(long)]
    #[serde(serialize_with = "display_opt")]
    pub range: Option<SocRange>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Wall-clock limit per solve in seconds.
    #[arg(long, default_value_t = 7200.0)]
    pub time_limit: f64,
    /// Monte Carlo days per schedule for the fade estimate; 0 skips it.
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    /// Solve the ranges in parallel.
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Solution file written by `solve`.
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn display<S: serde::Serializer, T: std::fmt::Display>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn display_opt<S: serde::Serializer, T: std::fmt::Display>(
    v: &Option<T>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.collect_str(v),
        None => s.serialize_none(),
    }
}

/// A schedule as stored in a solution file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub depot: usize,
    pub nodes: Vec<String>,
    pub trips: Vec<usize>,
    pub cost: f64,
    pub probability: f64,
    pub log_probability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub instance: String,
    pub instance_hash: String,
    pub seed: u64,
    pub epsilon: f64,
    pub range: String,
    pub mode: Mode,
    pub status: SolveStatus,
    pub cost: Option<f64>,
    pub fleet_size: Option<usize>,
    pub joint_probability: Option<f64>,
    pub schedules: Vec<ScheduleRecord>,
    pub stats: SolverStats,
}

impl SolutionFile {
    pub fn new(instance: &Instance, seed: u64, mode: Mode, outcome: &SolveOutcome) -> Self {
        let graphs = bnp::build_graphs(instance);
        let schedules = outcome
            .solution
            .iter()
            .flat_map(|s| &s.schedules)
            .map(|c| ScheduleRecord {
                depot: c.depot,
                nodes: c.node_labels(&graphs[c.depot]),
                trips: c.trips.clone(),
                cost: c.cost,
                probability: c.probability(),
                log_probability: c.log_probability,
            })
            .collect();
        let p = &instance.soc_policy;
        Self {
            instance: instance.name.clone(),
            instance_hash: instance.content_hash(),
            seed,
            epsilon: p.epsilon,
            range: format!("{}-{}", p.sigma_low_pct, p.sigma_up_pct),
            mode,
            status: outcome.status,
            cost: outcome.solution.as_ref().map(|s| s.cost),
            fleet_size: outcome.solution.as_ref().map(|s| s.fleet_size()),
            joint_probability: outcome.solution.as_ref().map(|s| s.joint_probability()),
            schedules,
            stats: outcome.stats.clone(),
        }
    }

    /// Rebuilds the schedules as columns of `instance`, recomputing costs and probabilities.
    pub fn columns(&self, instance: &Instance) -> Result<Vec<Column>> {
        let table = ChargingTable::for_instance(instance)?;
        self.schedules
            .iter()
            .enumerate()
            .map(|(k, s)| {
                if s.depot >= instance.depots.len() {
                    return Err(Error::Validation(format!("schedule {k}: unknown depot {}", s.depot)));
                }
                let g = build_graph(instance, s.depot);
                let nodes = s
                    .nodes
                    .iter()
                    .map(|l| {
                        NodeKind::parse_label(l)
                            .and_then(|kind| g.node_by_kind(kind))
                            .ok_or_else(|| Error::Validation(format!("schedule {k}: unknown node {l:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let arcs = g
                    .path_arcs(&nodes)
                    .ok_or_else(|| Error::Validation(format!("schedule {k}: nodes are not a path")))?;
                Column::from_arcs(&g, instance, &table, arcs)
            })
            .collect()
    }
}

/// Reproducibility header for CSV outputs.
pub fn csv_header(seed: u64, instance: &Instance, config: &impl Serialize) -> String {
    let config = serde_json::to_string(config).unwrap_or_default();
    format!(
        "# seed={seed}\n# instance={} hash={}\n# config={config}\n",
        instance.name,
        instance.content_hash()
    )
}

/// Applies the mode and optional overrides to an instance.
pub fn prepare_instance(base: &Instance, mode: Mode, epsilon: Option<f64>, range: Option<SocRange>) -> Result<Instance> {
    let mut inst = base.clone();
    if let Some(r) = range {
        inst = inst.with_range(r.low, r.up);
    }
    match mode {
        Mode::Deterministic => {
            if epsilon.is_some_and(|e| e != 0.0) {
                warn!("deterministic mode ignores epsilon");
            }
            inst = worst_case_projection(&inst);
        }
        Mode::Stochastic => {
            if let Some(e) = epsilon {
                inst = inst.with_epsilon(e);
            }
        }
    }
    inst.validate()?;
    Ok(inst)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn limits(seconds: f64) -> Result<Limits> {
    if !(seconds > 0.0) {
        return Err(Error::Validation("time limit must be positive".into()));
    }
    Ok(Limits {
        time_limit: Duration::from_secs_f64(seconds),
        ..Limits::default()
    })
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<i32> {
    let policy = SocPolicy::range(args.range.low, args.range.up).with_epsilon(args.epsilon);
    let inst = generate_instance(args.trips, args.seed, policy, CostParams::default())?;
    write_instance(&inst, &args.out)?;
    info!("wrote {} ({} trips)", args.out.display(), inst.trips.len());
    Ok(EXIT_OK)
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    let base = read_instance(&args.instance)?;
    let inst = prepare_instance(&base, args.mode, args.epsilon, args.range)?;
    create_dir(&args.out)?;
    if args.dump_graph {
        for g in bnp::build_graphs(&inst) {
            write_file(&args.out.join(format!("graph_depot{}.txt", g.depot())), &g.dump())?;
        }
    }
    let options = SolveOptions {
        limits: limits(args.time_limit)?,
        ..SolveOptions::default()
    };
    let outcome = bnp::solve(&inst, options)?;
    if let Some(s) = &outcome.solution {
        bnp::validate_solution(&inst, s)?;
    }
    if args.dump_lp {
        if let Some(s) = &outcome.solution {
            // Restricted master over the final schedules.
            let mut m = crate::master::MasterState::new(&inst);
            m.add_columns(s.schedules.iter().cloned());
            write_file(&args.out.join("master.lp"), &m.to_lp_text())?;
        }
    }
    let file = SolutionFile::new(&inst, args.seed, args.mode, &outcome);
    let json = serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))?;
    write_file(&args.out.join("solution.json"), &json)?;
    let mut summary = csv_header(args.seed, &inst, args);
    summary.push_str("status,cost,vehicles,joint_probability,gap_pct,tree_gap_pct,bb_nodes,total_secs,root_secs,pricing_secs\n");
    let st = &outcome.stats;
    let _ = writeln!(
        summary,
        "{:?},{},{},{},{:.4},{:.4},{},{:.3},{:.3},{:.3}",
        outcome.status,
        file.cost.map_or(String::new(), |c| format!("{c:.4}")),
        file.fleet_size.map_or(String::new(), |v| v.to_string()),
        file.joint_probability.map_or(String::new(), |p| format!("{p:.12}")),
        st.gap_pct,
        st.tree_gap_pct,
        st.bb_nodes,
        st.total_secs,
        st.root_secs,
        st.pricing_secs
    );
    write_file(&args.out.join("summary.csv"), &summary)?;
    let code = solve_exit_code(outcome.status, outcome.solution.is_some());
    match code {
        EXIT_VALIDATION => eprintln!("instance is infeasible"),
        EXIT_FAILURE => eprintln!("limit reached without a solution"),
        _ => {}
    }
    Ok(code)
}

/// Exit code of a finished solve.
pub fn solve_exit_code(status: SolveStatus, has_solution: bool) -> i32 {
    match (status, has_solution) {
        (SolveStatus::Infeasible, _) => EXIT_VALIDATION,
        (SolveStatus::LimitReached, true) => EXIT_LIMIT_WITH_SOLUTION,
        (SolveStatus::LimitReached, false) => EXIT_FAILURE,
        (SolveStatus::Completed, _) => EXIT_OK,
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub range: String,
    pub epsilon: f64,
    pub mode: Mode,
    pub status: Option<SolveStatus>,
    pub cost: Option<f64>,
    pub improvement_pct: Option<f64>,
    pub vehicles: Option<usize>,
    pub joint_probability: Option<f64>,
    pub yearly_fade_kwh: Option<f64>,
    pub lifetime_years: Option<f64>,
    pub gap_pct: Option<f64>,
    pub total_secs: Option<f64>,
    pub error: Option<String>,
}

/// Solves one range for the baseline and every epsilon in increasing order, warm-starting
/// each solve with the previous solution.
pub fn sweep_range(
    base: &Instance,
    range: SocRange,
    epsilons: &[f64],
    time_limit: f64,
    iterations: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut eps: Vec<f64> = epsilons.iter().copied().filter(|&e| e > 0.0).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let runs = std::iter::once((Mode::Deterministic, 0.0)).chain(eps.into_iter().map(|e| (Mode::Stochastic, e)));
    let mut rows = Vec::new();
    let mut incumbent: Option<Vec<Column>> = None;
    let mut baseline: Option<f64> = None;
    let params = FadingParams::default().with_capacity(base.battery_capacity_kwh);
    for (mode, e) in runs {
        let mut row = SweepRow {
            range: range.to_string(),
            epsilon: e,
            mode,
            status: None,
            cost: None,
            improvement_pct: None,
            vehicles: None,
            joint_probability: None,
            yearly_fade_kwh: None,
            lifetime_years: None,
            gap_pct: None,
            total_secs: None,
            error: None,
        };
        let result = (|| -> Result<()> {
            let inst = prepare_instance(base, mode, Some(e), Some(range))?;
            let options = SolveOptions {
                limits: limits(time_limit)?,
                incumbent: incumbent.clone(),
                ..SolveOptions::default()
            };
            let out = bnp::solve(&inst, options)?;
            row.status = Some(out.status);
            row.gap_pct = Some(out.stats.gap_pct);
            row.total_secs = Some(out.stats.total_secs);
            if let Some(s) = &out.solution {
                bnp::validate_solution(&inst, s)?;
                row.cost = Some(s.cost);
                row.vehicles = Some(s.fleet_size());
                row.joint_probability = Some(s.joint_probability());
                if mode == Mode::Deterministic {
                    baseline = Some(s.cost);
                }
                row.improvement_pct = baseline.map(|b| (b - s.cost) / b * 100.0);
                if iterations > 0 {
                    // Fade is simulated with the stochastic consumption of the range.
                    let sim = prepare_instance(base, Mode::Stochastic, Some(e), Some(range))?;
                    let cols = SolutionFile::new(&inst, seed, mode, &out).columns(&sim)?;
                    let fade = monte_carlo_fade(&sim, &cols, iterations, seed, &params)?;
                    row.yearly_fade_kwh = Some(fade.yearly_fade_per_vehicle);
                    row.lifetime_years = Some(fade.lifetime_years);
                }
                incumbent = Some(s.schedules.clone());
            }
            Ok(())
        })();
        if let Err(err) = result {
            warn!("range {range} epsilon {e}: {err}");
            row.error = Some(err.to_string());
        }
        info!("range {range} epsilon {e}: cost {:?} vehicles {:?}", row.cost, row.vehicles);
        rows.push(row);
    }
    Ok(rows)
}

/// Sweep rows as CSV, without the header comment lines.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(
        "range,epsilon,mode,status,cost,improvement_pct,vehicles,joint_probability,yearly_fade_kwh,lifetime_years,gap_pct,total_secs,error\n",
    );
    let opt = |v: Option<f64>, digits: usize| v.map_or(String::new(), |x| format!("{x:.digits$}"));
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.range,
            r.epsilon,
            serde_json::to_value(r.mode).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            r.status.map_or(String::new(), |st| format!("{st:?}")),
            opt(r.cost, 4),
            opt(r.improvement_pct, 4),
            r.vehicles.map_or(String::new(), |v| v.to_string()),
            opt(r.joint_probability, 12),
            opt(r.yearly_fade_kwh, 6),
            opt(r.lifetime_years, 4),
            opt(r.gap_pct, 4),
            opt(r.total_secs, 3),
            r.error.as_deref().unwrap_or("").replace(',', ";"),
        );
    }
    s
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let base = read_instance(&args.instance)?;
    base.validate()?;
    let eps = args.epsilon.clone().unwrap_or_else(|| SWEEP_EPSILONS.to_vec());
    if let Some(bad) = eps.iter().find(|e| !(0.0..1.0).contains(*e)) {
        return Err(Error::Validation(format!("epsilon {bad} outside [0, 1)")));
    }
    let ranges = match args.range {
        Some(r) => vec![r],
        None => vec![SocRange { low: 20, up: 80 }, SocRange { low: 30, up: 80 }],
    };
    create_dir(&args.out)?;
    let run = |r: &SocRange| sweep_range(&base, *r, &eps, args.time_limit, args.iterations, args.seed);
    let per_range: Vec<Vec<SweepRow>> = if args.parallel {
        ranges.par_iter().map(run).collect::<Result<_>>()?
    } else {
        ranges.iter().map(run).collect::<Result<_>>()?
    };
    let rows: Vec<SweepRow> = per_range.into_iter().flatten().collect();
    let mut csv = csv_header(args.seed, &base, args);
    csv.push_str(&sweep_csv(&rows));
    write_file(&args.out.join("sweep.csv"), &csv)?;
    let failed = rows.iter().filter(|r| r.error.is_some() || r.cost.is_none()).count();
    if failed > 0 {
        warn!("{failed} sweep entries without a solution");
    }
    let limited = rows.iter().any(|r| r.status == Some(SolveStatus::LimitReached));
    Ok(if limited { EXIT_LIMIT_WITH_SOLUTION } else { EXIT_OK })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<i32> {
    let inst = read_instance(&args.instance)?;
    inst.validate()?;
    let text = std::fs::read_to_string(&args.solution).map_err(|e| Error::Io {
        path: args.solution.display().to_string(),
        source: e,
    })?;
    let file: SolutionFile = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    // Simulate under the stochastic consumption of the range the solution was built for.
    let range: SocRange = file.range.parse().map_err(Error::Validation)?;
    let sim = prepare_instance(&inst, Mode::Stochastic, Some(file.epsilon), Some(range))?;
    let cols = file.columns(&sim)?;
    let params = FadingParams::default().with_capacity(sim.battery_capacity_kwh);
    let report = monte_carlo_fade(&sim, &cols, args.iterations, args.seed, &params)?;
    create_dir(&args.out)?;
    let mut csv = csv_header(args.seed, &sim, args);
    let _ = writeln!(
        csv,
        "# daily_fade_per_vehicle={:.9} yearly_fade_per_vehicle={:.6} lifetime_years={:.4}",
        report.daily_fade_per_vehicle, report.yearly_fade_per_vehicle, report.lifetime_years
    );
    csv.push_str(&report.to_csv());
    write_file(&args.out.join("fade.csv"), &csv)?;
    Ok(EXIT_OK)
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::Parse(_) | Error::Validation(_) | Error::Domain(_) => EXIT_VALIDATION,
        Error::LpInfeasible | Error::LpUnbounded | Error::LpNumerical(_) => EXIT_FAILURE,
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
