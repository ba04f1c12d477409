//! Seeded synthetic instances for the verification harnesses and the CLI's
//! randomized commands: layered random DAGs with weights, convolution
//! stacks, tensors, and a few fixed graphs the tests reason about by hand.
//!
//! Everything is driven by an explicit [`rng`] seed so every harness run is
//! reproducible bit for bit.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Dims, DnnGraph, LayerConfig, LayerKind, PoolMode, Rounding, VertexId, SOURCE};
use crate::latency::{BandwidthConfig, ProfileTable, WeightedGraph};
use crate::tensor::{stack_configs, StackLayer, Tensor3};
use crate::tiler::{plan_tiles, TileError, TilePlan};

/// The deterministic generator behind every randomized harness.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ── Fixed graphs ─────────────────────────────────────────────────────────────

/// Stylized inception-style grid module: 14 vertices in 7 longest-distance
/// layers (1, 1, 4, 4, 1, 2, 1). Four parallel branches fan out of v1, merge
/// in the concat v10, and split once more before the final concat v13.
/// Feature maps are 17x17, four-byte elements.
pub fn grid_module_graph() -> DnnGraph {
    let d = |depth: u32| Dims::new(17, 17, depth);
    let conv1 = |din: u32, f: u32| LayerConfig::conv(d(din), (1, 1), f, (1, 1), (0, 0));
    let conv3 = |din: u32, f: u32| LayerConfig::conv(d(din), (3, 3), f, (1, 1), (1, 1));
    let area = 17u64 * 17;

    let mut configs: BTreeMap<VertexId, LayerConfig> = BTreeMap::new();
    configs.insert(SOURCE, LayerConfig::input(area * 96 * 4));
    configs.insert(1, conv1(96, 96));
    configs.insert(2, conv1(96, 32));
    configs.insert(3, conv1(96, 48));
    configs.insert(
        4,
        LayerConfig::pool(d(96), PoolMode::Average, (3, 3), (1, 1), (1, 1)),
    );
    configs.insert(5, conv1(96, 64));
    configs.insert(6, conv3(32, 48));
    configs.insert(7, conv3(48, 64));
    configs.insert(8, conv1(96, 32));
    configs.insert(9, conv3(64, 96));
    configs.insert(
        10,
        LayerConfig::counts(LayerKind::Concat, area * 240, area * 240),
    );
    let mut v11 = conv1(240, 128);
    v11.input_dims = Some(d(240));
    configs.insert(11, v11);
    let mut v12 = conv3(240, 64);
    v12.input_dims = Some(d(240));
    configs.insert(12, v12);
    configs.insert(
        13,
        LayerConfig::counts(LayerKind::Concat, area * 192, area * 192),
    );

    let links = vec![
        (0, 1),
        (1, 2),
        (1, 3),
        (1, 4),
        (1, 5),
        (2, 6),
        (3, 7),
        (4, 8),
        (5, 9),
        (6, 10),
        (7, 10),
        (8, 10),
        (9, 10),
        (10, 11),
        (10, 12),
        (11, 13),
        (12, 13),
    ];
    DnnGraph::new(configs, links)
        .unwrap()
        .infer_shapes(Rounding::Exact)
        .unwrap()
}

/// Shared-fan-in graph for subset-sibling reasoning: v5 reads all of
/// v1..v4, v6 reads the subset {v2, v3}, and v7 reads {v0, v4} which is
/// not contained in v5's inputs. v5, v6, v7 share a layer.
pub fn subset_sibling_graph() -> DnnGraph {
    let mut configs: BTreeMap<VertexId, LayerConfig> = BTreeMap::new();
    configs.insert(SOURCE, LayerConfig::input(4_000));
    for v in 1..=4 {
        configs.insert(
            v,
            LayerConfig::counts(LayerKind::Other("branch".into()), 1_000, 1_000),
        );
    }
    configs.insert(5, LayerConfig::counts(LayerKind::Concat, 4_000, 4_000));
    configs.insert(6, LayerConfig::counts(LayerKind::Add, 2_000, 1_000));
    configs.insert(7, LayerConfig::counts(LayerKind::Concat, 5_000, 2_000));
    let links = vec![
        (0, 1),
        (0, 2),
        (0, 3),
        (0, 4),
        (1, 5),
        (2, 5),
        (3, 5),
        (4, 5),
        (2, 6),
        (3, 6),
        (0, 7),
        (4, 7),
    ];
    DnnGraph::new(configs, links).unwrap()
}

/// Minimal chain: virtual input with `raw_bytes` feeding one worker vertex
/// whose output payload is `out_bytes`.
pub fn two_vertex_chain(raw_bytes: u64, out_bytes: u64) -> DnnGraph {
    let mut worker = LayerConfig::counts(LayerKind::Other("op".into()), raw_bytes, out_bytes);
    worker.element_size = 1;
    let configs: BTreeMap<VertexId, LayerConfig> = [
        (SOURCE, LayerConfig::input(raw_bytes)),
        (1, worker),
    ]
    .into_iter()
    .collect();
    DnnGraph::new(configs, vec![(0, 1)]).unwrap()
}

// ── Random DAGs and weights ──────────────────────────────────────────────────

/// Layered random DAG with `n_vertices` total vertices (including the
/// virtual input). Vertices pick one to three predecessors from earlier
/// structural layers, with a bias toward small shared pools so nested
/// predecessor sets (subset siblings) occur regularly.
pub fn random_dag<R: Rng>(rng: &mut R, n_vertices: usize) -> DnnGraph {
    assert!(n_vertices >= 2);
    let mut configs: BTreeMap<VertexId, LayerConfig> = BTreeMap::new();
    configs.insert(SOURCE, LayerConfig::input(rng.gen_range(1_000..100_000)));
    let mut links: Vec<(VertexId, VertexId)> = Vec::new();

    // Partition 1..n into contiguous structural layers.
    let mut layer_of: Vec<Vec<VertexId>> = vec![vec![SOURCE]];
    let mut current: Vec<VertexId> = Vec::new();
    for v in 1..n_vertices as VertexId {
        current.push(v);
        let close = current.len() >= 4 || rng.gen_bool(0.45) || v == n_vertices as VertexId - 1;
        if close {
            layer_of.push(std::mem::take(&mut current));
        }
    }

    for li in 1..layer_of.len() {
        // Predecessor pool: mostly the previous layer, sometimes deeper.
        let pool: Vec<VertexId> = if rng.gen_bool(0.7) || li == 1 {
            layer_of[li - 1].clone()
        } else {
            layer_of[..li].iter().flatten().copied().collect()
        };
        for &v in &layer_of[li] {
            let k = rng.gen_range(1..=pool.len().min(3));
            let mut picks: Vec<VertexId> = Vec::new();
            while picks.len() < k {
                let p = pool[rng.gen_range(0..pool.len())];
                if !picks.contains(&p) {
                    picks.push(p);
                }
            }
            picks.sort_unstable();
            for p in picks {
                links.push((p, v));
            }
            let input: u64 = rng.gen_range(100..50_000);
            let output: u64 = rng.gen_range(100..50_000);
            let mut cfg = LayerConfig::counts(LayerKind::Other("op".into()), input, output);
            cfg.element_size = 1;
            configs.insert(v, cfg);
        }
    }
    DnnGraph::new(configs, links).unwrap()
}

pub fn random_bandwidth<R: Rng>(rng: &mut R) -> BandwidthConfig {
    BandwidthConfig::new(
        rng.gen_range(5.0..100.0) * 1e6,
        rng.gen_range(5.0..100.0) * 1e6,
        rng.gen_range(2.0..50.0) * 1e6,
    )
    .unwrap()
}

/// Random per-tier time table. With `monotone`, every vertex satisfies
/// device >= edge >= cloud, the regime where later tiers are never slower.
pub fn random_profile<R: Rng>(rng: &mut R, g: &DnnGraph, monotone: bool) -> ProfileTable {
    let mut table = ProfileTable::new();
    for v in g.vertices() {
        if v == SOURCE {
            continue;
        }
        let mut t = [
            rng.gen_range(0.0005..0.05),
            rng.gen_range(0.0005..0.05),
            rng.gen_range(0.0005..0.05),
        ];
        if monotone {
            t.sort_by(|a, b| b.partial_cmp(a).unwrap());
        }
        table.insert(v, t);
    }
    table
}

pub fn random_weighted<R: Rng>(rng: &mut R, n_vertices: usize, monotone: bool) -> WeightedGraph {
    let g = random_dag(rng, n_vertices);
    let profile = random_profile(rng, &g, monotone);
    let bw = random_bandwidth(rng);
    WeightedGraph::build(g, Some(&profile), None, bw).unwrap()
}

// ── Convolution stacks and tensors ───────────────────────────────────────────

/// Random spatial stack: `k` layers of convolutions, poolings, and (when
/// allowed) transparent activation/batch-norm layers, with hyper-parameters
/// drawn so the spatial law divides exactly at every step and no dimension
/// collapses below one. Returns the input dims and the layers.
pub fn random_stack<R: Rng>(
    rng: &mut R,
    max_layers: usize,
    max_dim: u32,
    allow_transparent: bool,
) -> (Dims, Vec<StackLayer<i64>>) {
    let input = Dims::new(
        rng.gen_range(3..=max_dim),
        rng.gen_range(3..=max_dim),
        rng.gen_range(1..=3),
    );
    let k = rng.gen_range(1..=max_layers);
    let mut layers = Vec::new();
    let mut dims = input;
    for _ in 0..k {
        let roll = rng.gen_range(0..10);
        if allow_transparent && roll < 2 {
            layers.push(StackLayer::Activation);
            continue;
        }
        if allow_transparent && roll == 2 {
            let scale = (0..dims.d).map(|_| rng.gen_range(1..=2) as i64).collect();
            let shift = (0..dims.d).map(|_| rng.gen_range(-2..=2) as i64).collect();
            layers.push(StackLayer::BatchNorm { scale, shift });
            continue;
        }
        let pooling = roll >= 7;
        let Some((window, stride, padding)) = spatial_params(rng, dims, pooling) else {
            layers.push(StackLayer::Activation);
            continue;
        };
        if pooling {
            let mode = if rng.gen_bool(0.5) {
                PoolMode::Max
            } else {
                PoolMode::Average
            };
            layers.push(StackLayer::Pool {
                mode,
                window,
                stride,
                padding,
            });
            dims = Dims::new(
                axis_out(dims.w, window.0, padding.0, stride.0),
                axis_out(dims.h, window.1, padding.1, stride.1),
                dims.d,
            );
        } else {
            let filters = rng.gen_range(1..=3);
            let taps = (window.0 * window.1 * dims.d * filters) as usize;
            let weights = (0..taps).map(|_| rng.gen_range(-3..=3) as i64).collect();
            let bias = (0..filters).map(|_| rng.gen_range(-2..=2) as i64).collect();
            layers.push(StackLayer::Conv {
                window,
                stride,
                padding,
                filters,
                weights,
                bias,
            });
            dims = Dims::new(
                axis_out(dims.w, window.0, padding.0, stride.0),
                axis_out(dims.h, window.1, padding.1, stride.1),
                filters,
            );
        }
    }
    (input, layers)
}

fn axis_out(input: u32, window: u32, padding: u32, stride: u32) -> u32 {
    (input + 2 * padding - window) / stride + 1
}

/// `(window, stride, padding)`, each a per-axis pair.
type SpatialParams = ((u32, u32), (u32, u32), (u32, u32));

/// Draws window/stride/padding with exact divisibility on both axes, or
/// `None` when nothing small fits. Pooling keeps padding below the window.
fn spatial_params<R: Rng>(rng: &mut R, dims: Dims, pooling: bool) -> Option<SpatialParams> {
    for _ in 0..40 {
        let f = rng.gen_range(1..=3.min(dims.w.min(dims.h)));
        let s = rng.gen_range(1..=2u32);
        let p = rng.gen_range(0..=1u32);
        if pooling && p >= f {
            continue;
        }
        let fits = |axis: u32| {
            axis + 2 * p >= f && (axis + 2 * p - f).is_multiple_of(s) && axis_out(axis, f, p, s) >= 1
        };
        if fits(dims.w) && fits(dims.h) {
            return Some(((f, f), (s, s), (p, p)));
        }
    }
    None
}

pub fn random_tensor_i64<R: Rng>(rng: &mut R, dims: Dims) -> Tensor3<i64> {
    let data = (0..dims.elements())
        .map(|_| rng.gen_range(-4..=4) as i64)
        .collect();
    Tensor3::new(dims, data).unwrap()
}

/// Draws random stacks and grids until the tiler accepts the pair.
///
/// A draw can be infeasible: under heavy padding a tile's receptive field
/// may sit entirely in the padded ring at some level, and the tiler rejects
/// such grids as too fine. Rejections are redrawn — they are the planner
/// doing its job, not verification failures. Every other planner error
/// would be a bug in the generator, so it panics.
pub fn random_tiling_scenario<R: Rng>(
    rng: &mut R,
    max_layers: usize,
    max_dim: u32,
    grid_limit: u32,
) -> (Dims, Vec<StackLayer<i64>>, TilePlan) {
    loop {
        let (input, layers) = random_stack(rng, max_layers, max_dim, true);
        let configs = stack_configs(input, &layers, Rounding::Exact)
            .expect("random stacks divide exactly by construction");
        let out = configs.iter().fold(input, |dims, cfg| {
            if cfg.kind.is_spatial() {
                cfg.output_dims(0, Rounding::Exact).unwrap()
            } else {
                dims
            }
        });
        let grid = (
            rng.gen_range(1..=grid_limit.min(out.w)),
            rng.gen_range(1..=grid_limit.min(out.h)),
        );
        match plan_tiles(input, &configs, grid, Rounding::Exact) {
            Ok(plan) => return (input, layers, plan),
            Err(TileError::DegenerateTile { .. }) => continue,
            Err(e) => panic!("random stack produced an unplannable tiling: {e}"),
        }
    }
}

/// Float twin of an integer stack: every weight is a small integer, so
/// float arithmetic differences come only from evaluation order.
pub fn stack_to_f64(layers: &[StackLayer<i64>]) -> Vec<StackLayer<f64>> {
    layers
        .iter()
        .map(|l| match l {
            StackLayer::Conv {
                window,
                stride,
                padding,
                filters,
                weights,
                bias,
            } => StackLayer::Conv {
                window: *window,
                stride: *stride,
                padding: *padding,
                filters: *filters,
                weights: weights.iter().map(|&w| w as f64).collect(),
                bias: bias.iter().map(|&b| b as f64).collect(),
            },
            StackLayer::Pool {
                mode,
                window,
                stride,
                padding,
            } => StackLayer::Pool {
                mode: *mode,
                window: *window,
                stride: *stride,
                padding: *padding,
            },
            StackLayer::Activation => StackLayer::Activation,
            StackLayer::BatchNorm { scale, shift } => StackLayer::BatchNorm {
                scale: scale.iter().map(|&s| s as f64).collect(),
                shift: shift.iter().map(|&s| s as f64).collect(),
            },
        })
        .collect()
}

// ── Test oracles ─────────────────────────────────────────────────────────────

/// Longest source-to-target distance by enumerating every source-rooted
/// path. Exponential; only for small oracle graphs.
pub fn longest_path_by_enumeration(g: &DnnGraph, target: VertexId) -> u32 {
    fn dfs(g: &DnnGraph, v: VertexId, len: u32, target: VertexId, best: &mut u32) {
        if v == target {
            *best = (*best).max(len);
        }
        for &s in g.direct_successors(v) {
            dfs(g, s, len + 1, target, best);
        }
    }
    let mut best = 0;
    dfs(g, SOURCE, 0, target, &mut best);
    best
}
