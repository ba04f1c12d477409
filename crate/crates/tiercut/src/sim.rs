//! Deterministic evaluation of a finished plan: end-to-end latency, where
//! the time goes, what crosses each link boundary, and how the plan
//! compares against running everything on a single tier.
//!
//! The simulator is a pure function of its inputs. It prices a single
//! image through a sequential pipeline: per-tier processing plus the
//! deduplicated transfers of the plan, the same accounting the planner
//! optimizes, so without edge parallelism the reported latency equals the
//! plan's total exactly. With edge parallelism, the edge-resident spatial
//! chain is re-priced as the slowest of its grid cells, each cell costing
//! the per-layer edge time scaled by its crop's share of the layer input
//! area. Overlapping crops make those shares sum to more than one, which
//! is precisely why an n-way split speeds the chain up by less than n.
//!
//! All numbers are model-level estimates from profiled stage times and
//! link bandwidths; the report header says so.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{LayerConfig, VertexId, SOURCE};
use crate::latency::{link_delay, Tier, WeightedGraph};
use crate::planner::{total_latency, validate_assignment, PartitionPlan, PlanError};
use crate::tiler::TilePlan;

/// Scope statement carried in every report.
pub const REPORT_SCOPE: &str = "model-level estimate from profiled stage times and link \
     bandwidths; framework, serialization, and hardware contention effects are out of scope";

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("the parallel chain is empty")]
    EmptyChain,
    #[error("chain has {chain} vertices but the tile plan covers {plan} layers")]
    ChainLengthMismatch { chain: usize, plan: usize },
    #[error("chain vertices {a} and {b} are not linked; the chain must be consecutive")]
    ChainBroken { a: VertexId, b: VertexId },
    #[error("chain vertex {0} is not assigned to the edge")]
    ChainNotOnEdge(VertexId),
    #[error("chain vertex {vertex} does not match tile-plan layer {layer}")]
    ChainConfigMismatch { vertex: VertexId, layer: usize },
    #[error("the parallel chain needs at least one convolution or pooling layer")]
    NoSpatialLayer,
    #[error("{nodes} nodes cannot run a {cells}-cell grid one cell each")]
    NodeCountMismatch { nodes: u32, cells: u32 },
    #[error(
        "cell crops at layer {layer} sum below the full feature map; a stride that outruns \
         its window skips entries, so crop areas no longer measure the parallel work"
    )]
    UncoveredInput { layer: usize },
}

/// Edge-parallel execution of one spatial chain: the tile grid, the
/// edge-resident vertices it covers (in chain order), and how many edge
/// nodes share the work (one grid cell each).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeParallelSpec {
    pub tile_plan: TilePlan,
    pub chain: Vec<VertexId>,
    pub node_count: u32,
}

/// Everything a simulation run needs.
#[derive(Debug, Clone, Copy)]
pub struct Scenario<'a> {
    pub wg: &'a WeightedGraph,
    pub plan: &'a PartitionPlan,
    pub edge_parallel: Option<&'a EdgeParallelSpec>,
}

/// Bytes and seconds crossing one tier boundary (both directions).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairTraffic {
    pub bytes: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub device_only: f64,
    pub edge_only: f64,
    pub cloud_only: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeParallelReport {
    pub node_count: u32,
    /// Chain time on one edge node.
    pub sequential_seconds: f64,
    /// Slowest grid cell under the crop-area cost model.
    pub parallel_seconds: f64,
    /// sequential / parallel.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// What these numbers do and do not cover.
    pub header: String,
    /// End-to-end per-image latency, with the edge chain re-priced when
    /// edge parallelism is active.
    pub theta_seconds: f64,
    pub processing_seconds: BTreeMap<Tier, f64>,
    pub device_edge: PairTraffic,
    pub edge_cloud: PairTraffic,
    pub device_cloud: PairTraffic,
    /// Deduplicated bytes crossing into the cloud per image.
    pub backbone_bytes: u64,
    pub input_bytes: u64,
    pub baselines: Baselines,
    /// baseline / theta; absent when theta is zero.
    pub speedup_vs_device: Option<f64>,
    pub speedup_vs_edge: Option<f64>,
    pub speedup_vs_cloud: Option<f64>,
    pub edge_parallel: Option<EdgeParallelReport>,
}

// ── Core pricing ─────────────────────────────────────────────────────────────

/// Single-tier reference latencies: run everything on one tier, shipping
/// the raw input there first if that tier is not the device.
pub fn baselines(wg: &WeightedGraph, input_bytes: u64) -> Baselines {
    let bw = wg.bandwidth();
    let mut device_only = 0.0;
    let mut edge_only = link_delay(input_bytes, bw.sigma(Tier::Device, Tier::Edge));
    let mut cloud_only = link_delay(input_bytes, bw.sigma(Tier::Device, Tier::Cloud));
    for v in wg.graph().vertices() {
        device_only += wg.time(v, Tier::Device);
        edge_only += wg.time(v, Tier::Edge);
        cloud_only += wg.time(v, Tier::Cloud);
    }
    Baselines {
        device_only,
        edge_only,
        cloud_only,
    }
}

/// Deduplicated bytes the plan sends into the cloud per image. A
/// cloud-only plan pays exactly the raw input; a plan with no
/// cloud-resident vertex pays nothing.
pub fn comm_overhead(wg: &WeightedGraph, plan: &PartitionPlan) -> Result<u64, SimError> {
    validate_assignment(wg.graph(), &plan.assignment)?;
    let mut backbone = 0u64;
    for_each_shipment(wg, plan, |_h, _from, to, bytes, _secs| {
        if to == Tier::Cloud {
            backbone += bytes;
        }
    });
    Ok(backbone)
}

/// Visits every deduplicated shipment of the plan: vertex output, source
/// tier, destination tier, bytes, seconds. Ascending vertex order, then
/// tier order.
fn for_each_shipment<F: FnMut(VertexId, Tier, Tier, u64, f64)>(
    wg: &WeightedGraph,
    plan: &PartitionPlan,
    mut f: F,
) {
    let g = wg.graph();
    for (&h, &from) in &plan.assignment {
        for &to in &Tier::ALL {
            if to == from {
                continue;
            }
            let shipped = g
                .direct_successors(h)
                .iter()
                .any(|j| plan.assignment.get(j) == Some(&to));
            if shipped {
                f(h, from, to, g.config(h).output_bytes(), wg.transfer(h, from, to));
            }
        }
    }
}

fn edge_parallel_report(
    wg: &WeightedGraph,
    plan: &PartitionPlan,
    spec: &EdgeParallelSpec,
) -> Result<EdgeParallelReport, SimError> {
    let g = wg.graph();
    let tp = &spec.tile_plan;
    if spec.chain.is_empty() {
        return Err(SimError::EmptyChain);
    }
    if spec.chain.len() != tp.stack_len() {
        return Err(SimError::ChainLengthMismatch {
            chain: spec.chain.len(),
            plan: tp.stack_len(),
        });
    }
    let cells = tp.grid.0 * tp.grid.1;
    if spec.node_count != cells {
        return Err(SimError::NodeCountMismatch {
            nodes: spec.node_count,
            cells,
        });
    }
    for pair in spec.chain.windows(2) {
        if !g.direct_successors(pair[0]).contains(&pair[1]) {
            return Err(SimError::ChainBroken {
                a: pair[0],
                b: pair[1],
            });
        }
    }
    for (i, &v) in spec.chain.iter().enumerate() {
        if plan.assignment.get(&v) != Some(&Tier::Edge) {
            return Err(SimError::ChainNotOnEdge(v));
        }
        if !spatially_equal(g.config(v), &tp.configs[i]) {
            return Err(SimError::ChainConfigMismatch {
                vertex: v,
                layer: i + 1,
            });
        }
    }
    if !tp.configs.iter().any(|c| c.kind.is_spatial()) {
        return Err(SimError::NoSpatialLayer);
    }
    // The crop-area cost model divides each layer's time by the fraction of
    // its input each cell fetches, so it presumes the crops jointly cover
    // the map (sum of fractions >= 1, > 1 exactly where halos overlap). A
    // layer whose stride outruns its window reads only a sieve of its
    // input; its crops sum below the map, the tiled run genuinely skips
    // work the whole run performs, and "speedup" would stop measuring
    // parallelization. Refuse instead of reporting a misleading number.
    for level in 0..tp.stack_len() {
        let full = tp.levels[level];
        let covered: u64 = tp.cells.values().map(|t| t[level].area()).sum();
        if covered < full.w as u64 * full.h as u64 {
            return Err(SimError::UncoveredInput { layer: level + 1 });
        }
    }

    let mut sequential = 0.0;
    for &v in &spec.chain {
        sequential += wg.time(v, Tier::Edge);
    }
    let mut parallel = 0.0f64;
    for tiles in tp.cells.values() {
        let mut cell = 0.0;
        for (i, &v) in spec.chain.iter().enumerate() {
            let full = tp.levels[i];
            let share = tiles[i].area() as f64 / (full.w as f64 * full.h as f64);
            cell += wg.time(v, Tier::Edge) * share;
        }
        if cell > parallel {
            parallel = cell;
        }
    }
    let speedup = if parallel > 0.0 {
        sequential / parallel
    } else {
        1.0
    };
    Ok(EdgeParallelReport {
        node_count: spec.node_count,
        sequential_seconds: sequential,
        parallel_seconds: parallel,
        speedup,
    })
}

fn spatially_equal(a: &LayerConfig, b: &LayerConfig) -> bool {
    a.kind == b.kind
        && a.input_dims == b.input_dims
        && a.window == b.window
        && a.stride == b.stride
        && a.padding == b.padding
        && a.filters == b.filters
        && a.pool == b.pool
}

/// Prices the scenario into a report.
pub fn simulate(s: &Scenario<'_>) -> Result<SimReport, SimError> {
    let (wg, plan) = (s.wg, s.plan);
    validate_assignment(wg.graph(), &plan.assignment)?;
    let base_theta = total_latency(wg, &plan.assignment)?;

    let mut processing: BTreeMap<Tier, f64> =
        Tier::ALL.iter().map(|&t| (t, 0.0)).collect();
    for (&v, &t) in &plan.assignment {
        *processing.get_mut(&t).unwrap() += wg.time(v, t);
    }

    let (mut de, mut ec, mut dc) = (
        PairTraffic::default(),
        PairTraffic::default(),
        PairTraffic::default(),
    );
    let mut backbone = 0u64;
    for_each_shipment(wg, plan, |_h, from, to, bytes, secs| {
        let pair = match (from.rank().min(to.rank()), from.rank().max(to.rank())) {
            (0, 1) => &mut de,
            (1, 2) => &mut ec,
            _ => &mut dc,
        };
        pair.bytes += bytes;
        pair.seconds += secs;
        if to == Tier::Cloud {
            backbone += bytes;
        }
    });

    let edge_parallel = s
        .edge_parallel
        .map(|spec| edge_parallel_report(wg, plan, spec))
        .transpose()?;
    // Replace the chain term only when the cell model actually changes
    // it, so a degenerate 1x1 grid reproduces the plain simulation bit
    // for bit.
    let theta_seconds = match &edge_parallel {
        Some(r) if r.parallel_seconds != r.sequential_seconds => {
            base_theta - r.sequential_seconds + r.parallel_seconds
        }
        _ => base_theta,
    };

    let input_bytes = wg.graph().config(SOURCE).output_bytes();
    let baselines = baselines(wg, input_bytes);
    let ratio = |b: f64| {
        let r = b / theta_seconds;
        r.is_finite().then_some(r)
    };

    Ok(SimReport {
        header: REPORT_SCOPE.to_string(),
        theta_seconds,
        processing_seconds: processing,
        device_edge: de,
        edge_cloud: ec,
        device_cloud: dc,
        backbone_bytes: backbone,
        input_bytes,
        baselines,
        speedup_vs_device: ratio(baselines.device_only),
        speedup_vs_edge: ratio(baselines.edge_only),
        speedup_vs_cloud: ratio(baselines.cloud_only),
        edge_parallel,
    })
}

impl SimReport {
    /// Plain-text rendering for terminal output.
    pub fn render(&self) -> String {
        let ms = |s: f64| format!("{:.6} ms", s * 1e3);
        let ratio = |r: Option<f64>| match r {
            Some(v) => format!("{v:.3}x"),
            None => "n/a".to_string(),
        };
        let mut out = String::new();
        out.push_str(&format!("scope: {}\n", self.header));
        out.push_str(&format!("end-to-end latency: {}\n", ms(self.theta_seconds)));
        out.push_str(&format!(
            "processing: device {} | edge {} | cloud {}\n",
            ms(self.processing_seconds[&Tier::Device]),
            ms(self.processing_seconds[&Tier::Edge]),
            ms(self.processing_seconds[&Tier::Cloud]),
        ));
        out.push_str(&format!(
            "transfers: device-edge {} B / {} | edge-cloud {} B / {} | device-cloud {} B / {}\n",
            self.device_edge.bytes,
            ms(self.device_edge.seconds),
            self.edge_cloud.bytes,
            ms(self.edge_cloud.seconds),
            self.device_cloud.bytes,
            ms(self.device_cloud.seconds),
        ));
        out.push_str(&format!(
            "backbone to cloud: {} B of {} B raw input\n",
            self.backbone_bytes, self.input_bytes
        ));
        out.push_str(&format!(
            "baselines: device-only {} ({}) | edge-only {} ({}) | cloud-only {} ({})\n",
            ms(self.baselines.device_only),
            ratio(self.speedup_vs_device),
            ms(self.baselines.edge_only),
            ratio(self.speedup_vs_edge),
            ms(self.baselines.cloud_only),
            ratio(self.speedup_vs_cloud),
        ));
        if let Some(ep) = &self.edge_parallel {
            out.push_str(&format!(
                "edge-parallel: {} nodes, chain {} -> {} (speedup {:.3}x)\n",
                ep.node_count,
                ms(ep.sequential_seconds),
                ms(ep.parallel_seconds),
                ep.speedup,
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Dims, DnnGraph, LayerKind, PoolMode, Rounding};
    use crate::latency::{BandwidthConfig, ProfileTable};
    use crate::planner::Provenance;
    use crate::synth;
    use crate::tiler::plan_tiles;
    use std::collections::BTreeMap;

    /// Three-stage chain with zero-byte intermediate outputs, so tier
    /// boundaries cost no transfer time at all.
    fn stage_fixture(bw: BandwidthConfig) -> WeightedGraph {
        let mut configs: BTreeMap<VertexId, LayerConfig> = BTreeMap::new();
        configs.insert(SOURCE, LayerConfig::input(150_528));
        for v in 1..=3u32 {
            let mut c = LayerConfig::counts(LayerKind::Other("stage".into()), 1, 0);
            c.element_size = 1;
            configs.insert(v, c);
        }
        let g = DnnGraph::new(configs, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let profile: ProfileTable = [
            (1, [0.0022; 3]),
            (2, [0.0036; 3]),
            (3, [0.0014; 3]),
        ]
        .into_iter()
        .collect();
        WeightedGraph::build(g, Some(&profile), None, bw).unwrap()
    }

    fn staged_plan() -> PartitionPlan {
        PartitionPlan {
            assignment: [
                (0, Tier::Device),
                (1, Tier::Device),
                (2, Tier::Edge),
                (3, Tier::Cloud),
            ]
            .into_iter()
            .collect(),
            theta_seconds: 0.0,
            provenance: Provenance::Full,
        }
    }

    fn wifi() -> BandwidthConfig {
        BandwidthConfig::new(84.95e6, 31.53e6, 18.75e6).unwrap()
    }

    #[test]
    fn staged_chain_with_free_transfers_sums_exactly() {
        let wg = stage_fixture(wifi());
        let plan = staged_plan();
        let report = simulate(&Scenario {
            wg: &wg,
            plan: &plan,
            edge_parallel: None,
        })
        .unwrap();
        assert_eq!(report.theta_seconds, 0.0072);
        assert_eq!(report.processing_seconds[&Tier::Device], 0.0022);
        assert_eq!(report.processing_seconds[&Tier::Edge], 0.0036);
        assert_eq!(report.processing_seconds[&Tier::Cloud], 0.0014);
        assert_eq!(report.device_edge.bytes, 0);
        assert_eq!(report.edge_cloud.bytes, 0);
        assert_eq!(report.device_edge.seconds, 0.0);
        assert_eq!(report.backbone_bytes, 0);
        assert!(report.header.contains("model-level"));
    }

    #[test]
    fn baselines_price_the_input_shipment_by_closed_form() {
        let wg = stage_fixture(wifi());
        let b = baselines(&wg, 150_528);
        let stages = 0.0022 + 0.0036 + 0.0014;
        assert!((b.device_only - stages).abs() < 1e-15);
        assert!((b.edge_only - (150_528.0 * 8.0 / 84.95e6 + stages)).abs() < 1e-12);
        assert!((b.cloud_only - (150_528.0 * 8.0 / 18.75e6 + stages)).abs() < 1e-12);

        // Slower backhaul, same arithmetic.
        let wg = stage_fixture(BandwidthConfig::new(84.95e6, 13.79e6, 6.12e6).unwrap());
        let b = baselines(&wg, 150_528);
        assert!((b.cloud_only - (150_528.0 * 8.0 / 6.12e6 + stages)).abs() < 1e-12);
    }

    #[test]
    fn speedup_times_theta_recovers_the_baseline() {
        let wg = stage_fixture(wifi());
        let plan = staged_plan();
        let report = simulate(&Scenario {
            wg: &wg,
            plan: &plan,
            edge_parallel: None,
        })
        .unwrap();
        let s = report.speedup_vs_cloud.unwrap();
        let b = report.baselines.cloud_only;
        assert!(((s * report.theta_seconds - b) / b).abs() < 1e-14);
    }

    #[test]
    fn cloud_only_backbone_is_exactly_the_raw_input() {
        let wg = stage_fixture(wifi());
        let all_cloud = PartitionPlan {
            assignment: [
                (0, Tier::Device),
                (1, Tier::Cloud),
                (2, Tier::Cloud),
                (3, Tier::Cloud),
            ]
            .into_iter()
            .collect(),
            theta_seconds: 0.0,
            provenance: Provenance::Full,
        };
        assert_eq!(comm_overhead(&wg, &all_cloud).unwrap(), 150_528);

        let no_cloud = staged_plan_with(&[Tier::Device, Tier::Edge, Tier::Edge]);
        assert_eq!(comm_overhead(&wg, &no_cloud).unwrap(), 0);
    }

    fn staged_plan_with(tiers: &[Tier; 3]) -> PartitionPlan {
        let mut assignment: BTreeMap<VertexId, Tier> = BTreeMap::new();
        assignment.insert(0, Tier::Device);
        for (i, &t) in tiers.iter().enumerate() {
            assignment.insert(i as VertexId + 1, t);
        }
        PartitionPlan {
            assignment,
            theta_seconds: 0.0,
            provenance: Provenance::Full,
        }
    }

    #[test]
    fn pooled_cut_ships_a_quarter_of_the_raw_input() {
        // 224x224x3 one-byte input, a 2x2 stride-2 pooling on the device,
        // then everything else in the cloud: the backbone carries exactly
        // a quarter of the raw bytes.
        let mut configs: BTreeMap<VertexId, LayerConfig> = BTreeMap::new();
        configs.insert(SOURCE, LayerConfig::input(150_528));
        let mut pool = LayerConfig::pool(
            Dims::new(224, 224, 3),
            PoolMode::Max,
            (2, 2),
            (2, 2),
            (0, 0),
        );
        pool.element_size = 1;
        configs.insert(1, pool);
        let mut rest = LayerConfig::counts(LayerKind::Other("rest".into()), 37_632, 1_000);
        rest.element_size = 1;
        configs.insert(2, rest);
        let g = DnnGraph::new(configs, vec![(0, 1), (1, 2)])
            .unwrap()
            .infer_shapes(Rounding::Exact)
            .unwrap();
        let profile: ProfileTable =
            [(1, [0.001; 3]), (2, [0.001; 3])].into_iter().collect();
        let wg = WeightedGraph::build(g, Some(&profile), None, wifi()).unwrap();
        let plan = PartitionPlan {
            assignment: [(0, Tier::Device), (1, Tier::Device), (2, Tier::Cloud)]
                .into_iter()
                .collect(),
            theta_seconds: 0.0,
            provenance: Provenance::Full,
        };
        let bytes = comm_overhead(&wg, &plan).unwrap();
        assert_eq!(bytes, 37_632);
        assert!((bytes as f64 / 150_528.0 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn later_cuts_in_a_shrinking_chain_never_ship_more() {
        let mut configs: BTreeMap<VertexId, LayerConfig> = BTreeMap::new();
        configs.insert(SOURCE, LayerConfig::input(1_000));
        let outs = [800u64, 600, 400];
        for (i, &out) in outs.iter().enumerate() {
            let inp = if i == 0 { 1_000 } else { outs[i - 1] };
            let mut c = LayerConfig::counts(LayerKind::Other("op".into()), inp, out);
            c.element_size = 1;
            configs.insert(i as VertexId + 1, c);
        }
        let g = DnnGraph::new(configs, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let profile: ProfileTable = (1..=3).map(|v| (v, [0.001; 3])).collect();
        let wg = WeightedGraph::build(g, Some(&profile), None, wifi()).unwrap();

        use Tier::*;
        let cuts = [
            [Cloud, Cloud, Cloud],
            [Edge, Cloud, Cloud],
            [Edge, Edge, Cloud],
            [Edge, Edge, Edge],
        ];
        let mut previous = u64::MAX;
        for tiers in &cuts {
            let plan = staged_plan_with(tiers);
            let bytes = comm_overhead(&wg, &plan).unwrap();
            assert!(bytes <= previous);
            previous = bytes;
        }
        assert_eq!(previous, 0);
    }

    /// Conv on a 6x6 map at the edge, split into two columns whose crops
    /// cover two thirds of the input each.
    fn parallel_fixture() -> (WeightedGraph, PartitionPlan, EdgeParallelSpec) {
        let conv = LayerConfig::conv(Dims::new(6, 6, 1), (3, 3), 1, (1, 1), (1, 1));
        let mut configs: BTreeMap<VertexId, LayerConfig> = BTreeMap::new();
        configs.insert(SOURCE, LayerConfig::input(36));
        configs.insert(1, conv.clone());
        configs.insert(2, LayerConfig::counts(LayerKind::Other("head".into()), 36, 10));
        let g = DnnGraph::new(configs, vec![(0, 1), (1, 2)])
            .unwrap()
            .infer_shapes(Rounding::Exact)
            .unwrap();
        let profile: ProfileTable =
            [(1, [0.020, 0.009, 0.004]), (2, [0.010, 0.002, 0.001])]
                .into_iter()
                .collect();
        let bw = BandwidthConfig::new(10e6, 10e6, 10e6).unwrap();
        let tile_plan =
            plan_tiles(Dims::new(6, 6, 1), &[conv], (2, 1), Rounding::Exact).unwrap();
        let wg = WeightedGraph::build(g, Some(&profile), None, bw).unwrap();
        let plan = PartitionPlan {
            assignment: [(0, Tier::Device), (1, Tier::Edge), (2, Tier::Edge)]
                .into_iter()
                .collect(),
            theta_seconds: 0.0,
            provenance: Provenance::Full,
        };
        let spec = EdgeParallelSpec {
            tile_plan,
            chain: vec![1],
            node_count: 2,
        };
        (wg, plan, spec)
    }

    #[test]
    fn sieve_reading_chains_are_refused() {
        // 1x1 window at stride 2: outputs read every other input entry, so
        // the cell crops cannot cover the map and crop areas stop measuring
        // the parallel work. The pricing must refuse, not mislead.
        let conv = LayerConfig::conv(Dims::new(5, 5, 1), (1, 1), 1, (2, 2), (0, 0));
        let mut configs: BTreeMap<VertexId, LayerConfig> = BTreeMap::new();
        configs.insert(SOURCE, LayerConfig::input(25));
        configs.insert(1, conv.clone());
        let g = DnnGraph::new(configs, vec![(0, 1)])
            .unwrap()
            .infer_shapes(Rounding::Exact)
            .unwrap();
        let profile: ProfileTable = [(1, [0.020, 0.009, 0.004])].into_iter().collect();
        let bw = BandwidthConfig::new(10e6, 10e6, 10e6).unwrap();
        let tile_plan = plan_tiles(Dims::new(5, 5, 1), &[conv], (3, 1), Rounding::Exact).unwrap();
        let wg = WeightedGraph::build(g, Some(&profile), None, bw).unwrap();
        let plan = PartitionPlan {
            assignment: [(0, Tier::Device), (1, Tier::Edge)].into_iter().collect(),
            theta_seconds: 0.0,
            provenance: Provenance::Full,
        };
        let spec = EdgeParallelSpec {
            tile_plan,
            chain: vec![1],
            node_count: 3,
        };
        let err = simulate(&Scenario {
            wg: &wg,
            plan: &plan,
            edge_parallel: Some(&spec),
        })
        .unwrap_err();
        assert!(matches!(err, SimError::UncoveredInput { layer: 1 }), "{err}");
    }

    #[test]
    fn two_way_split_with_overlap_speeds_up_by_1_5() {
        let (wg, plan, spec) = parallel_fixture();
        let report = simulate(&Scenario {
            wg: &wg,
            plan: &plan,
            edge_parallel: Some(&spec),
        })
        .unwrap();
        let ep = report.edge_parallel.unwrap();
        // Each crop is 4x6 of a 6x6 map: 2/3 of the work per cell.
        assert!((ep.parallel_seconds - 0.009 * (24.0 / 36.0)).abs() < 1e-15);
        assert!((ep.speedup - 1.5).abs() < 1e-12);
        assert!(ep.speedup > 1.0 && ep.speedup < 2.0);
        let plain = simulate(&Scenario {
            wg: &wg,
            plan: &plan,
            edge_parallel: None,
        })
        .unwrap();
        let expected = plain.theta_seconds - ep.sequential_seconds + ep.parallel_seconds;
        assert_eq!(report.theta_seconds, expected);
    }

    #[test]
    fn degenerate_single_cell_grid_changes_nothing() {
        let (wg, plan, _) = parallel_fixture();
        let conv = wg.graph().config(1).clone();
        let tile_plan =
            plan_tiles(Dims::new(6, 6, 1), &[conv], (1, 1), Rounding::Exact).unwrap();
        let spec = EdgeParallelSpec {
            tile_plan,
            chain: vec![1],
            node_count: 1,
        };
        let with = simulate(&Scenario {
            wg: &wg,
            plan: &plan,
            edge_parallel: Some(&spec),
        })
        .unwrap();
        let without = simulate(&Scenario {
            wg: &wg,
            plan: &plan,
            edge_parallel: None,
        })
        .unwrap();
        assert_eq!(with.theta_seconds, without.theta_seconds);
        assert_eq!(with.edge_parallel.unwrap().speedup, 1.0);
    }

    #[test]
    fn full_overlap_grid_cancels_the_split_entirely() {
        // 2x2 map, 3x3 window, padding 1: every cell of a 2x2 grid needs
        // the whole input, so four-way parallelism buys nothing.
        let conv = LayerConfig::conv(Dims::new(2, 2, 1), (3, 3), 1, (1, 1), (1, 1));
        let mut configs: BTreeMap<VertexId, LayerConfig> = BTreeMap::new();
        configs.insert(SOURCE, LayerConfig::input(4));
        configs.insert(1, conv.clone());
        let g = DnnGraph::new(configs, vec![(0, 1)])
            .unwrap()
            .infer_shapes(Rounding::Exact)
            .unwrap();
        let profile: ProfileTable = [(1, [0.02, 0.008, 0.004])].into_iter().collect();
        let wg = WeightedGraph::build(
            g,
            Some(&profile),
            None,
            BandwidthConfig::new(10e6, 10e6, 10e6).unwrap(),
        )
        .unwrap();
        let plan = PartitionPlan {
            assignment: [(0, Tier::Device), (1, Tier::Edge)].into_iter().collect(),
            theta_seconds: 0.0,
            provenance: Provenance::Full,
        };
        let tile_plan =
            plan_tiles(Dims::new(2, 2, 1), &[conv], (2, 2), Rounding::Exact).unwrap();
        let spec = EdgeParallelSpec {
            tile_plan,
            chain: vec![1],
            node_count: 4,
        };
        let report = simulate(&Scenario {
            wg: &wg,
            plan: &plan,
            edge_parallel: Some(&spec),
        })
        .unwrap();
        let ep = report.edge_parallel.unwrap();
        assert_eq!(ep.speedup, 1.0);
        assert_eq!(ep.parallel_seconds, ep.sequential_seconds);
    }

    #[test]
    fn parallel_spec_is_validated() {
        let (wg, plan, spec) = parallel_fixture();
        let run = |spec: &EdgeParallelSpec, plan: &PartitionPlan| {
            simulate(&Scenario {
                wg: &wg,
                plan,
                edge_parallel: Some(spec),
            })
        };
        let mut bad = spec.clone();
        bad.node_count = 3;
        assert!(matches!(
            run(&bad, &plan),
            Err(SimError::NodeCountMismatch { nodes: 3, cells: 2 })
        ));
        let mut bad = spec.clone();
        bad.chain = vec![2];
        assert!(matches!(
            run(&bad, &plan),
            Err(SimError::ChainConfigMismatch { vertex: 2, .. })
        ));
        let mut bad = spec.clone();
        bad.chain = vec![];
        assert!(matches!(run(&bad, &plan), Err(SimError::EmptyChain)));
        let mut moved = plan.clone();
        moved.assignment.insert(1, Tier::Cloud);
        moved.assignment.insert(2, Tier::Cloud);
        assert!(matches!(
            run(&spec, &moved),
            Err(SimError::ChainNotOnEdge(1))
        ));
    }

    #[test]
    fn simulation_matches_planner_accounting_on_random_instances() {
        let mut rng = synth::rng(17);
        for _ in 0..20 {
            let wg = synth::random_weighted(&mut rng, 15, false);
            let plan = crate::planner::plan(&wg, Default::default()).unwrap();
            let report = simulate(&Scenario {
                wg: &wg,
                plan: &plan,
                edge_parallel: None,
            })
            .unwrap();
            assert_eq!(report.theta_seconds, plan.theta_seconds);
            let transfer_total = report.device_edge.seconds
                + report.edge_cloud.seconds
                + report.device_cloud.seconds;
            let processing_total: f64 = report.processing_seconds.values().sum();
            assert!(
                (report.theta_seconds - (processing_total + transfer_total)).abs()
                    < 1e-9 * report.theta_seconds.max(1.0)
            );
        }
    }
}
