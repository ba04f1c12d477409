//! Command-line front end wiring documents to the planner, tiler,
//! exhaustive oracle, simulator, and latency estimator.
//!
//! Exit codes: 0 success; 2 config error (missing, malformed, or
//! inconsistent inputs, including usage errors); 3 guard violation (instance
//! too large for exhaustive search, grid too fine for the stack); 4
//! verification failure (tiled execution diverged from the whole-input
//! run). Machine-readable outputs are versioned JSON documents rendered
//! deterministically: identical inputs and seeds produce byte-identical
//! files.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use thiserror::Error;

use crate::doc::{
    self, AssignmentEntry, BandwidthDoc, DocError, GapReportDoc, GraphDoc, ModelDoc,
    OracleReportDoc, PerturbationDoc, PlanDoc, ProfileDoc, ProfileEntry, SamplesDoc, SimReportDoc,
    StackDoc, SweepDoc, ThresholdsDoc, TilePlanDoc, VerifyReportDoc,
};
use crate::graph::{DnnGraph, GraphError, Rounding, VertexId, SOURCE};
use crate::latency::{
    fit, BandwidthConfig, CoeffSource, LatencyError, ProfileTable, RegressionModel, Tier,
    WeightedGraph,
};
use crate::planner::{
    brute_force_optimal, incremental_update, plan, plan_traced, Decision, IncrementalOutcome,
    PartitionPlan, PlanError, PlanOptions, Provenance,
};
use crate::sim::{simulate, EdgeParallelSpec, Scenario, SimError};
use crate::synth;
use crate::tensor::{run_stack, run_tiled, stack_configs, TensorError};
use crate::tiler::{overlap_stats, plan_tiles, TileError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GUARD: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Doc(#[from] DocError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Latency(#[from] LatencyError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Tile(#[from] TileError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{0}")]
    Config(String),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Verify(_) => EXIT_VERIFY,
        CliError::Plan(PlanError::TooLarge { .. }) => EXIT_GUARD,
        CliError::Tile(TileError::GridTooFine { .. } | TileError::DegenerateTile { .. }) => {
            EXIT_GUARD
        }
        _ => EXIT_CONFIG,
    }
}

// ── Argument surface ─────────────────────────────────────────────────────────

#[derive(Parser)]
#[command(
    name = "tiercut",
    version,
    about = "Plan, tile, and price layer-wise DNN inference across device, edge, and cloud"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assign every layer to a tier and report the end-to-end latency.
    Plan(PlanCmd),
    /// Split a spatial stack into grid tiles and the input crops they need.
    Tile(TileCmd),
    /// Price a plan: latency breakdown, traffic, baselines, speedups.
    Simulate(SimulateCmd),
    /// Compare the planner against exhaustive search.
    Oracle(OracleCmd),
    /// Check tiled execution against the whole-input run on random stacks.
    VerifyTiles(VerifyTilesCmd),
    /// Fit or apply a per-layer latency model.
    #[command(subcommand)]
    Estimate(EstimateCmd),
}

/// Inputs that weight a graph for planning or pricing.
#[derive(Args)]
struct WeightArgs {
    /// Per-vertex processing-time document (profile/v1).
    #[arg(long, value_name = "FILE")]
    profile: Option<PathBuf>,
    /// Fitted latency-model document (model/v1); profiled entries win.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Link-bandwidth document (bandwidth/v1).
    #[arg(long, value_name = "FILE")]
    bandwidth: PathBuf,
}

struct WeightParts {
    profile: Option<ProfileTable>,
    model: Option<RegressionModel>,
    bandwidth: BandwidthConfig,
}

impl WeightArgs {
    fn load(&self) -> Result<WeightParts, CliError> {
        if self.profile.is_none() && self.model.is_none() {
            return Err(CliError::Config(
                "pass --profile and/or --model to weight the graph".to_string(),
            ));
        }
        let profile = match &self.profile {
            Some(p) => Some(doc::load::<ProfileDoc>(p)?.to_table()?),
            None => None,
        };
        let model = match &self.model {
            Some(p) => Some(doc::load::<ModelDoc>(p)?.to_model()?),
            None => None,
        };
        let bandwidth = doc::load::<BandwidthDoc>(&self.bandwidth)?.to_config()?;
        Ok(WeightParts {
            profile,
            model,
            bandwidth,
        })
    }
}

impl WeightParts {
    fn weighted(&self, g: DnnGraph) -> Result<WeightedGraph, CliError> {
        Ok(WeightedGraph::build(
            g,
            self.profile.as_ref(),
            self.model.as_ref(),
            self.bandwidth,
        )?)
    }
}

#[derive(Args)]
struct PlanCmd {
    /// Layer-graph document (graph/v1).
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,
    #[command(flatten)]
    weights: WeightArgs,
    /// Truncate non-exact spatial divisions instead of rejecting them.
    #[arg(long)]
    floor_mode: bool,
    /// Admit tiers no earlier than the latest predecessor tier instead of
    /// the earliest.
    #[arg(long)]
    strict_order: bool,
    /// Print each vertex's selection rule and every sibling adoption.
    #[arg(long)]
    trace: bool,
    /// Previous plan (plan/v1) to update incrementally.
    #[arg(long, value_name = "FILE", requires = "perturb", requires = "thresholds")]
    previous: Option<PathBuf>,
    /// What changed since the previous plan (perturbation/v1).
    #[arg(long, value_name = "FILE", requires = "previous")]
    perturb: Option<PathBuf>,
    /// Deviation bands under which the previous assignment is kept
    /// (thresholds/v1).
    #[arg(long, value_name = "FILE", requires = "previous")]
    thresholds: Option<PathBuf>,
    /// Fall back to a full re-plan when the incremental result exceeds the
    /// fresh optimum by more than this ratio.
    #[arg(long, value_name = "RATIO", requires = "previous")]
    escalate_on_gap: Option<f64>,
    /// Write the chosen plan here (plan/v1).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TileCmd {
    /// Spatial-stack document (stack/v1).
    #[arg(long, value_name = "FILE", conflicts_with = "graph")]
    stack: Option<PathBuf>,
    /// Layer-graph document (graph/v1); use with --chain.
    #[arg(long, value_name = "FILE", requires = "chain")]
    graph: Option<PathBuf>,
    /// Comma-separated vertex chain to tile, e.g. 2,3,4.
    #[arg(long, value_name = "IDS", requires = "graph", value_delimiter = ',')]
    chain: Vec<VertexId>,
    /// Output grid, columns x rows (e.g. 2x2).
    #[arg(long, value_name = "AxB", value_parser = parse_grid)]
    grid: (u32, u32),
    /// Truncate non-exact spatial divisions instead of rejecting them.
    #[arg(long)]
    floor_mode: bool,
    /// Write the tile plan here (tile-plan/v1).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateCmd {
    /// Layer-graph document (graph/v1).
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,
    #[command(flatten)]
    weights: WeightArgs,
    /// Partition plan to price (plan/v1).
    #[arg(long, value_name = "FILE")]
    plan: PathBuf,
    /// Truncate non-exact spatial divisions instead of rejecting them.
    #[arg(long)]
    floor_mode: bool,
    /// Tile plan for parallel edge execution (tile-plan/v1).
    #[arg(long, value_name = "FILE", requires = "chain", requires = "edge_nodes")]
    tile_plan: Option<PathBuf>,
    /// Comma-separated edge-resident chain the tile plan covers.
    #[arg(long, value_name = "IDS", requires = "tile_plan", value_delimiter = ',')]
    chain: Vec<VertexId>,
    /// Edge nodes sharing the tiled chain (one grid cell each).
    #[arg(long, value_name = "N", requires = "tile_plan")]
    edge_nodes: Option<u32>,
    /// Bandwidth sweep manifest (sweep/v1).
    #[arg(long, value_name = "FILE", requires = "sweep_out")]
    sweep: Option<PathBuf>,
    /// CSV output for the sweep table.
    #[arg(long, value_name = "FILE", requires = "sweep")]
    sweep_out: Option<PathBuf>,
    /// Write the report here (sim-report/v1).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleCmd {
    /// Layer-graph document (graph/v1); single-instance mode.
    #[arg(long, value_name = "FILE", conflicts_with = "batch")]
    graph: Option<PathBuf>,
    /// Per-vertex processing-time document (profile/v1).
    #[arg(long, value_name = "FILE", requires = "graph")]
    profile: Option<PathBuf>,
    /// Fitted latency-model document (model/v1).
    #[arg(long, value_name = "FILE", requires = "graph")]
    model: Option<PathBuf>,
    /// Link-bandwidth document (bandwidth/v1).
    #[arg(long, value_name = "FILE", requires = "graph")]
    bandwidth: Option<PathBuf>,
    /// Truncate non-exact spatial divisions instead of rejecting them.
    #[arg(long)]
    floor_mode: bool,
    /// Admit tiers no earlier than the latest predecessor tier.
    #[arg(long)]
    strict_order: bool,
    /// Randomized batch mode: number of instances to compare.
    #[arg(long, value_name = "N")]
    batch: Option<u32>,
    /// Largest instance size (vertices, including the virtual input) in
    /// batch mode.
    #[arg(long, value_name = "K", default_value_t = 10)]
    vertices: usize,
    /// Batch-mode seed.
    #[arg(long, default_value_t = 11)]
    seed: u64,
    /// Draw monotone per-tier times (device >= edge >= cloud) in batch mode.
    #[arg(long)]
    monotone: bool,
    /// Write the comparison here (oracle-report/v1 or gap-report/v1).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyTilesCmd {
    /// Randomized stacks to check.
    #[arg(long, default_value_t = 200)]
    trials: u32,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Deepest random stack to draw; 0 means the empty stack, which is
    /// vacuously lossless.
    #[arg(long, default_value_t = 6)]
    max_layers: usize,
    /// Largest input width/height to draw.
    #[arg(long, default_value_t = 32)]
    max_dim: u32,
    /// Largest grid rows/columns to draw.
    #[arg(long, default_value_t = 4)]
    grid_limit: u32,
    /// Zero cross-tile reads instead of fetching the real neighboring
    /// values, reproducing the boundary corruption this check exists to
    /// catch. Expected to fail.
    #[arg(long)]
    fault_injection: bool,
    /// Write the outcome here (verify-report/v1).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EstimateCmd {
    /// Fit per-(kind, tier) latency coefficients from measured samples.
    Fit {
        /// Measured observations (samples/v1).
        #[arg(long, value_name = "FILE")]
        samples: PathBuf,
        /// Write the fitted model here (model/v1).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Predict per-vertex tier times for a graph with a fitted model.
    Predict {
        /// Fitted latency-model document (model/v1).
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Layer-graph document (graph/v1).
        #[arg(long, value_name = "FILE")]
        graph: PathBuf,
        /// Truncate non-exact spatial divisions instead of rejecting them.
        #[arg(long)]
        floor_mode: bool,
        /// Write the predicted times here (profile/v1).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

// ── Entry points ─────────────────────────────────────────────────────────────

pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Testable entry point: parses `args` and executes, returning the exit
/// code instead of exiting.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version displays go to stdout and succeed; genuine
            // usage errors go to stderr and count as config errors.
            let is_error = e.use_stderr();
            let _ = e.print();
            return if is_error { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Tile(a) => cmd_tile(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::VerifyTiles(a) => cmd_verify_tiles(a),
        Command::Estimate(a) => cmd_estimate(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

// ── Shared helpers ───────────────────────────────────────────────────────────

fn rounding(floor: bool) -> Rounding {
    if floor {
        Rounding::Floor
    } else {
        Rounding::Exact
    }
}

fn load_graph(path: &Path, floor: bool) -> Result<DnnGraph, CliError> {
    let doc: GraphDoc = doc::load(path)?;
    Ok(doc.to_graph()?.infer_shapes(rounding(floor))?)
}

fn parse_grid(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected AxB, got {s:?}"))?;
    let a = a.trim().parse::<u32>().map_err(|e| format!("bad column count: {e}"))?;
    let b = b.trim().parse::<u32>().map_err(|e| format!("bad row count: {e}"))?;
    Ok((a, b))
}

/// `numerator / denominator`, read as a comparison: 1.0 when both are zero.
fn ratio(numerator: f64, denominator: f64) -> f64 {
    if denominator == 0.0 {
        if numerator == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        numerator / denominator
    }
}

fn id_list<I: IntoIterator<Item = VertexId>>(ids: I) -> String {
    let parts: Vec<String> = ids.into_iter().map(|v| v.to_string()).collect();
    if parts.is_empty() {
        "-".to_string()
    } else {
        parts.join(" ")
    }
}

fn print_plan(p: &PartitionPlan) {
    for tier in Tier::ALL {
        let ids = p
            .assignment
            .iter()
            .filter(|&(_, &t)| t == tier)
            .map(|(&v, _)| v);
        println!("{tier}: {}", id_list(ids));
    }
    println!("theta_seconds: {}", p.theta_seconds);
    let provenance = match p.provenance {
        Provenance::Full => "full",
        Provenance::Incremental => "incremental",
    };
    println!("provenance: {provenance}");
}

// ── plan ─────────────────────────────────────────────────────────────────────

fn cmd_plan(a: PlanCmd) -> Result<(), CliError> {
    let g = load_graph(&a.graph, a.floor_mode)?;
    let parts = a.weights.load()?;
    let wg = parts.weighted(g)?;
    let opts = PlanOptions {
        strict_order: a.strict_order,
    };

    let chosen = if let Some(prev_path) = &a.previous {
        let previous = doc::load::<PlanDoc>(prev_path)?.to_plan()?;
        let pert: PerturbationDoc = doc::load(a.perturb.as_ref().expect("clap requires"))?;
        let thresholds =
            doc::load::<ThresholdsDoc>(a.thresholds.as_ref().expect("clap requires"))?
                .to_thresholds()?;
        let wg_new = wg.perturbed(&pert.vertex_times()?, pert.bandwidth()?);
        let (incremental, outcome) =
            incremental_update(&previous, &wg, &wg_new, &thresholds, opts)?;
        match &outcome {
            IncrementalOutcome::WithinThreshold => {
                println!("outcome: within-threshold (assignment kept, latency re-priced)");
            }
            IncrementalOutcome::Replanned {
                recomputed,
                repaired,
            } => {
                println!(
                    "outcome: replanned (recomputed {}; repaired {})",
                    id_list(recomputed.iter().copied()),
                    id_list(repaired.iter().copied()),
                );
            }
        }
        let full = plan(&wg_new, opts)?;
        let gap = ratio(incremental.theta_seconds, full.theta_seconds);
        println!("gap_vs_full_replan: {gap}");
        match a.escalate_on_gap {
            Some(limit) if gap > limit => {
                println!("escalated: gap exceeds {limit}, using the full re-plan");
                full
            }
            _ => incremental,
        }
    } else if a.trace {
        let (p, trace) = plan_traced(&wg, opts)?;
        for s in &trace.selections {
            let rule = match s.selection.decision {
                Decision::Forced => "forced".to_string(),
                Decision::DirectCost => "direct-cost".to_string(),
                Decision::Lookahead { successor } => format!("lookahead via {successor}"),
            };
            println!(
                "select vertex {} -> {} ({rule}, cost {})",
                s.vertex, s.selection.tier, s.selection.cost
            );
        }
        for m in &trace.sibling_moves {
            println!(
                "sibling update: vertex {} {} -> {} (toward {})",
                m.vertex, m.from, m.to, m.toward
            );
        }
        p
    } else {
        plan(&wg, opts)?
    };

    print_plan(&chosen);
    if let Some(out) = &a.out {
        doc::save(out, &PlanDoc::from_plan(&chosen))?;
        println!("plan written to {}", out.display());
    }
    Ok(())
}

// ── tile ─────────────────────────────────────────────────────────────────────

fn cmd_tile(a: TileCmd) -> Result<(), CliError> {
    let rounding = rounding(a.floor_mode);
    let (input, configs) = if let Some(stack_path) = &a.stack {
        let doc: StackDoc = doc::load(stack_path)?;
        let configs = stack_configs(doc.input, &doc.layers, rounding)?;
        (doc.input, configs)
    } else {
        let graph_path = a.graph.as_ref().ok_or_else(|| {
            CliError::Config("pass --stack, or --graph with --chain".to_string())
        })?;
        let g = load_graph(graph_path, a.floor_mode)?;
        if a.chain.is_empty() {
            return Err(CliError::Config(
                "--chain needs at least one vertex".to_string(),
            ));
        }
        for w in a.chain.windows(2) {
            if !g.direct_successors(w[0]).contains(&w[1]) {
                return Err(CliError::Config(format!(
                    "chain break: the graph has no link {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        let mut configs = Vec::with_capacity(a.chain.len());
        for &v in &a.chain {
            let cfg = g.configs().get(&v).ok_or_else(|| {
                CliError::Config(format!("unknown vertex {v} in --chain"))
            })?;
            configs.push(cfg.clone());
        }
        let input = configs[0].input_dims.ok_or_else(|| {
            CliError::Config(format!(
                "chain head {} has no input dims; start the chain at a spatial layer",
                a.chain[0]
            ))
        })?;
        (input, configs)
    };

    let plan = plan_tiles(input, &configs, a.grid, rounding)?;
    let stats = overlap_stats(&plan);
    println!("grid: {}x{}", plan.grid.0, plan.grid.1);
    let levels: Vec<String> = plan
        .levels
        .iter()
        .map(|d| format!("{}x{}x{}", d.w, d.h, d.d))
        .collect();
    println!("levels: {}", levels.join(" -> "));
    println!("cells: {}", plan.cells.len());
    let factors: Vec<String> = stats
        .per_layer_factor
        .iter()
        .map(|f| f.to_string())
        .collect();
    println!("redundancy_per_layer: {}", factors.join(" "));
    println!("redundant_elements: {}", stats.redundant_elements);
    if let Some(out) = &a.out {
        doc::save(out, &TilePlanDoc::from_plan(&plan, Some(&stats)))?;
        println!("tile plan written to {}", out.display());
    }
    Ok(())
}

// ── simulate ─────────────────────────────────────────────────────────────────

fn cmd_simulate(a: SimulateCmd) -> Result<(), CliError> {
    let g = load_graph(&a.graph, a.floor_mode)?;
    let parts = a.weights.load()?;
    let wg = parts.weighted(g.clone())?;
    let plan = doc::load::<PlanDoc>(&a.plan)?.to_plan()?;

    let spec = match (&a.tile_plan, a.edge_nodes) {
        (Some(tp), Some(node_count)) => Some(EdgeParallelSpec {
            tile_plan: doc::load::<TilePlanDoc>(tp)?.to_plan()?,
            chain: a.chain.clone(),
            node_count,
        }),
        _ => None,
    };

    let report = simulate(&Scenario {
        wg: &wg,
        plan: &plan,
        edge_parallel: spec.as_ref(),
    })?;
    print!("{}", report.render());
    if let Some(out) = &a.out {
        doc::save(
            out,
            &SimReportDoc {
                report: report.clone(),
            },
        )?;
        println!("report written to {}", out.display());
    }

    if let Some(sweep_path) = &a.sweep {
        let sweep: SweepDoc = doc::load(sweep_path)?;
        let out_path = a.sweep_out.as_ref().expect("clap requires");
        let mut csv = String::from(
            "mbps,theta_seconds,device_only_seconds,edge_only_seconds,cloud_only_seconds,backbone_bytes\n",
        );
        for &mbps in &sweep.mbps {
            let bw = sweep.boundary.apply(&parts.bandwidth, mbps)?;
            let wg_i = WeightedGraph::build(
                g.clone(),
                parts.profile.as_ref(),
                parts.model.as_ref(),
                bw,
            )?;
            let plan_i = if sweep.replan {
                plan_fresh(&wg_i)?
            } else {
                plan.clone()
            };
            let r = simulate(&Scenario {
                wg: &wg_i,
                plan: &plan_i,
                edge_parallel: spec.as_ref(),
            })?;
            writeln!(
                csv,
                "{mbps},{},{},{},{},{}",
                r.theta_seconds,
                r.baselines.device_only,
                r.baselines.edge_only,
                r.baselines.cloud_only,
                r.backbone_bytes
            )
            .expect("writing to a String cannot fail");
        }
        fs::write(out_path, &csv).map_err(|source| CliError::Io {
            path: out_path.display().to_string(),
            source,
        })?;
        println!(
            "sweep: {} rows written to {}",
            sweep.mbps.len(),
            out_path.display()
        );
    }
    Ok(())
}

fn plan_fresh(wg: &WeightedGraph) -> Result<PartitionPlan, CliError> {
    Ok(plan(wg, PlanOptions::default())?)
}

// ── oracle ───────────────────────────────────────────────────────────────────

fn cmd_oracle(a: OracleCmd) -> Result<(), CliError> {
    let opts = PlanOptions {
        strict_order: a.strict_order,
    };
    if let Some(n) = a.batch {
        return oracle_batch(&a, n, opts);
    }
    let graph_path = a.graph.as_ref().ok_or_else(|| {
        CliError::Config("pass --graph for a single comparison, or --batch N".to_string())
    })?;
    let bandwidth_path = a.bandwidth.as_ref().ok_or_else(|| {
        CliError::Config("single-instance mode needs --bandwidth".to_string())
    })?;
    let weights = WeightArgs {
        profile: a.profile.clone(),
        model: a.model.clone(),
        bandwidth: bandwidth_path.clone(),
    };
    let g = load_graph(graph_path, a.floor_mode)?;
    let wg = weights.load()?.weighted(g)?;

    let greedy = plan(&wg, opts)?;
    let optimal = brute_force_optimal(&wg, opts)?;
    let r = ratio(greedy.theta_seconds, optimal.theta_seconds);
    println!("greedy_theta_seconds: {}", greedy.theta_seconds);
    println!("optimal_theta_seconds: {}", optimal.theta_seconds);
    println!("ratio: {r}");
    let matches = greedy.assignment == optimal.assignment;
    println!("assignments_match: {matches}");
    if !matches {
        for (v, t) in &greedy.assignment {
            let o = optimal.assignment[v];
            if *t != o {
                println!("vertex {v}: greedy {t}, optimal {o}");
            }
        }
    }
    if let Some(out) = &a.out {
        let to_entries = |p: &PartitionPlan| {
            p.assignment
                .iter()
                .map(|(&vertex, &tier)| AssignmentEntry { vertex, tier })
                .collect()
        };
        doc::save(
            out,
            &OracleReportDoc {
                greedy_theta_seconds: greedy.theta_seconds,
                optimal_theta_seconds: optimal.theta_seconds,
                ratio: r,
                assignments_match: matches,
                greedy: to_entries(&greedy),
                optimal: to_entries(&optimal),
            },
        )?;
        println!("comparison written to {}", out.display());
    }
    Ok(())
}

fn oracle_batch(a: &OracleCmd, trials: u32, opts: PlanOptions) -> Result<(), CliError> {
    if a.vertices < 2 {
        return Err(CliError::Config(
            "--vertices must be at least 2 (the virtual input plus one layer)".to_string(),
        ));
    }
    if a.vertices > crate::planner::EXHAUSTIVE_LIMIT {
        return Err(CliError::Plan(PlanError::TooLarge {
            vertices: a.vertices,
            limit: crate::planner::EXHAUSTIVE_LIMIT,
        }));
    }
    let mut rng = synth::rng(a.seed);
    let mut exact_matches = 0u32;
    let mut sum_ratio = 0.0;
    let mut max_ratio = 1.0f64;
    for _ in 0..trials {
        let size = rng.gen_range(2..=a.vertices);
        let wg = synth::random_weighted(&mut rng, size, a.monotone);
        let greedy = plan(&wg, opts)?;
        let optimal = brute_force_optimal(&wg, opts)?;
        let r = ratio(greedy.theta_seconds, optimal.theta_seconds);
        if greedy.theta_seconds == optimal.theta_seconds {
            exact_matches += 1;
        }
        sum_ratio += r;
        max_ratio = max_ratio.max(r);
    }
    let mean_ratio = if trials == 0 {
        1.0
    } else {
        sum_ratio / trials as f64
    };
    println!("trials: {trials}");
    println!("max_vertices: {}", a.vertices);
    println!("seed: {}", a.seed);
    println!("exact_matches: {exact_matches}");
    println!("mean_ratio: {mean_ratio}");
    println!("max_ratio: {max_ratio}");
    if let Some(out) = &a.out {
        doc::save(
            out,
            &GapReportDoc {
                trials,
                seed: a.seed,
                max_vertices: a.vertices,
                exact_matches,
                mean_ratio,
                max_ratio,
            },
        )?;
        println!("gap report written to {}", out.display());
    }
    Ok(())
}

// ── verify-tiles ─────────────────────────────────────────────────────────────

fn cmd_verify_tiles(a: VerifyTilesCmd) -> Result<(), CliError> {
    if a.max_layers > 0 && a.max_dim < 3 {
        return Err(CliError::Config(
            "--max-dim must be at least 3".to_string(),
        ));
    }
    if a.grid_limit == 0 {
        return Err(CliError::Config(
            "--grid-limit must be at least 1".to_string(),
        ));
    }
    let mut rng = synth::rng(a.seed);
    let mut mismatches = 0u32;
    let mut compared = 0u32;
    if a.max_layers == 0 {
        println!("vacuous pass: an empty stack leaves its input untouched, so tiled and whole runs coincide by definition");
    } else {
        for _ in 0..a.trials {
            let (input_dims, layers, plan) =
                synth::random_tiling_scenario(&mut rng, a.max_layers, a.max_dim, a.grid_limit);
            let tensor = synth::random_tensor_i64(&mut rng, input_dims);
            let whole = run_stack(&tensor, &layers)?;
            let tiled = run_tiled(&tensor, &layers, &plan, a.fault_injection)?;
            compared += 1;
            if whole != tiled {
                mismatches += 1;
            }
        }
    }
    println!("trials: {}", a.trials);
    println!("compared: {compared}");
    println!("mismatches: {mismatches}");
    if let Some(out) = &a.out {
        doc::save(
            out,
            &VerifyReportDoc {
                trials: a.trials,
                seed: a.seed,
                fault_injection: a.fault_injection,
                mismatches,
            },
        )?;
        println!("verify report written to {}", out.display());
    }
    if mismatches > 0 {
        return Err(CliError::Verify(format!(
            "{mismatches} of {compared} tiled runs diverged from the whole-input run"
        )));
    }
    println!("all tiled runs matched the whole-input run exactly");
    Ok(())
}

// ── estimate ─────────────────────────────────────────────────────────────────

fn cmd_estimate(cmd: EstimateCmd) -> Result<(), CliError> {
    match cmd {
        EstimateCmd::Fit { samples, out } => {
            let doc: SamplesDoc = doc::load(&samples)?;
            let (model, report) = fit(&doc.samples)?;
            for b in &report.buckets {
                let source = match b.source {
                    CoeffSource::Bucket => "own fit",
                    CoeffSource::Kind => "kind pool",
                    CoeffSource::Global => "all samples",
                };
                println!(
                    "bucket ({}, {}): {} samples, coefficients from {source}",
                    b.kind.name(),
                    b.tier,
                    b.samples
                );
            }
            for w in &report.warnings {
                println!("warning: {w}");
            }
            if let Some(out) = &out {
                doc::save(out, &ModelDoc::from_model(&model, &report.warnings))?;
                println!("model written to {}", out.display());
            }
            Ok(())
        }
        EstimateCmd::Predict {
            model,
            graph,
            floor_mode,
            out,
        } => {
            let model = doc::load::<ModelDoc>(&model)?.to_model()?;
            let g = load_graph(&graph, floor_mode)?;
            let mut entries = Vec::new();
            for v in g.vertices() {
                let seconds = if v == SOURCE {
                    [0.0; 3]
                } else {
                    let cfg = g.config(v);
                    [
                        model.predict(cfg, Tier::Device),
                        model.predict(cfg, Tier::Edge),
                        model.predict(cfg, Tier::Cloud),
                    ]
                };
                println!(
                    "vertex {v}: device {} edge {} cloud {}",
                    seconds[0], seconds[1], seconds[2]
                );
                entries.push(ProfileEntry { vertex: v, seconds });
            }
            if let Some(out) = &out {
                doc::save(out, &ProfileDoc { entries })?;
                println!("predicted profile written to {}", out.display());
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_strings_parse() {
        assert_eq!(parse_grid("2x2").unwrap(), (2, 2));
        assert_eq!(parse_grid("13X7").unwrap(), (13, 7));
        assert!(parse_grid("2").is_err());
        assert!(parse_grid("axb").is_err());
    }

    #[test]
    fn ratios_handle_zero_denominators() {
        assert_eq!(ratio(0.0, 0.0), 1.0);
        assert_eq!(ratio(1.0, 0.0), f64::INFINITY);
        assert_eq!(ratio(3.0, 2.0), 1.5);
    }

    #[test]
    fn argument_surface_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_subcommands_exit_with_config_code() {
        assert_eq!(run_from(["tiercut", "no-such-command"]), EXIT_CONFIG);
    }

    #[test]
    fn help_exits_cleanly() {
        assert_eq!(run_from(["tiercut", "--help"]), EXIT_OK);
    }
}
