//! One-off generator for the committed fixture documents under
//! `crates/tiercut/fixtures/`. Run from the workspace root:
//!
//! ```text
//! cargo run -p tiercut --example gen_fixtures
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use tiercut::doc::{
    self, BandwidthDoc, Boundary, GraphDoc, PerturbationDoc, PlanDoc, ProfileDoc, ProfileEntry,
    SamplesDoc, StackDoc, SweepDoc, ThresholdsDoc, TilePlanDoc,
};
use tiercut::graph::{Dims, DnnGraph, LayerConfig, LayerKind, PoolMode, Rounding};
use tiercut::latency::{features, FitSample, ProfileTable, Tier, WeightedGraph};
use tiercut::planner::{plan, Bounds, PlanOptions, Thresholds};
use tiercut::synth;
use tiercut::tensor::StackLayer;
use tiercut::tiler::{overlap_stats, plan_tiles};

const WIFI: BandwidthDoc = BandwidthDoc {
    device_edge_mbps: 84.95,
    edge_cloud_mbps: 31.53,
    device_cloud_mbps: 18.75,
};

fn stage_pipeline() -> DnnGraph {
    let mut configs = BTreeMap::new();
    configs.insert(0, LayerConfig::input(150_528));
    for v in 1..=3u32 {
        configs.insert(v, LayerConfig::counts(LayerKind::Other("stage".into()), 0, 0));
    }
    DnnGraph::new(configs, vec![(0, 1), (1, 2), (2, 3)]).unwrap()
}

fn stage_profile() -> ProfileTable {
    let mut t = ProfileTable::new();
    t.insert(1, [0.0022; 3]);
    t.insert(2, [0.0036; 3]);
    t.insert(3, [0.0014; 3]);
    t
}

fn main() {
    let dir = Path::new("crates/tiercut/fixtures");
    std::fs::create_dir_all(dir).unwrap();
    let at = |name: &str| dir.join(name);

    // Bandwidth tables (Mbps), one per backhaul technology; the
    // device-edge hop is Wi-Fi throughout.
    doc::save(&at("bandwidth-wifi.json"), &WIFI).unwrap();
    doc::save(
        &at("bandwidth-4g.json"),
        &BandwidthDoc {
            device_edge_mbps: 84.95,
            edge_cloud_mbps: 13.79,
            device_cloud_mbps: 6.12,
        },
    )
    .unwrap();
    doc::save(
        &at("bandwidth-5g.json"),
        &BandwidthDoc {
            device_edge_mbps: 84.95,
            edge_cloud_mbps: 22.75,
            device_cloud_mbps: 11.64,
        },
    )
    .unwrap();

    // The 14-vertex grid-module graph with a seeded monotone profile, plus
    // the plan the greedy pass produces on it under Wi-Fi bandwidths.
    let g = synth::grid_module_graph();
    doc::save(&at("grid-module.graph.json"), &GraphDoc::from_graph(&g)).unwrap();
    let profile = synth::random_profile(&mut synth::rng(7), &g, true);
    doc::save(
        &at("grid-module.profile.json"),
        &ProfileDoc::from_table(&profile),
    )
    .unwrap();
    let wg = WeightedGraph::build(g, Some(&profile), None, WIFI.to_config().unwrap()).unwrap();
    let p = plan(&wg, PlanOptions::default()).unwrap();
    doc::save(&at("grid-module.plan.json"), &PlanDoc::from_plan(&p)).unwrap();

    // A three-stage pipeline whose stages move no data between vertices:
    // its end-to-end latency is exactly the sum of the stage times.
    let g = stage_pipeline();
    doc::save(&at("stage-pipeline.graph.json"), &GraphDoc::from_graph(&g)).unwrap();
    let profile = stage_profile();
    doc::save(
        &at("stage-pipeline.profile.json"),
        &ProfileDoc::from_table(&profile),
    )
    .unwrap();
    let wg = WeightedGraph::build(g, Some(&profile), None, WIFI.to_config().unwrap()).unwrap();
    let p = plan(&wg, PlanOptions::default()).unwrap();
    doc::save(&at("stage-pipeline.plan.json"), &PlanDoc::from_plan(&p)).unwrap();

    // A drift document that stays inside the default thresholds.
    doc::save(
        &at("stage-pipeline.perturb.json"),
        &PerturbationDoc {
            vertex_times: vec![ProfileEntry {
                vertex: 2,
                seconds: [0.0036 * 1.1; 3],
            }],
            bandwidth: None,
        },
    )
    .unwrap();

    doc::save(
        &at("thresholds.json"),
        &ThresholdsDoc {
            thresholds: Thresholds {
                vertex_time: Bounds::new(0.8, 1.25).unwrap(),
                bandwidth: Bounds::new(0.8, 1.25).unwrap(),
            },
        },
    )
    .unwrap();

    // One-layer 2x2x3 stack: a 3x3 stride-1 pad-1 convolution whose 2x2
    // output splits into a 2x2 grid; every tile's crop is the whole input.
    let input = Dims::new(2, 2, 3);
    let layers = vec![StackLayer::Conv {
        window: (3, 3),
        stride: (1, 1),
        padding: (1, 1),
        filters: 1,
        weights: vec![1.0f64; 27],
        bias: vec![0.0],
    }];
    doc::save(
        &at("boundary-stack.json"),
        &StackDoc {
            input,
            layers: layers.clone(),
        },
    )
    .unwrap();
    let configs: Vec<LayerConfig> = {
        let mut dims = input;
        layers
            .iter()
            .map(|l| {
                let cfg = l.config(dims);
                if cfg.kind.is_spatial() {
                    dims = cfg.output_dims(1, Rounding::Exact).unwrap();
                }
                cfg
            })
            .collect()
    };
    let tp = plan_tiles(input, &configs, (2, 2), Rounding::Exact).unwrap();
    let stats = overlap_stats(&tp);
    doc::save(
        &at("boundary-stack.tile-plan.json"),
        &TilePlanDoc::from_plan(&tp, Some(&stats)),
    )
    .unwrap();

    // Sweep the edge-cloud bandwidth across the measured backhaul rates.
    doc::save(
        &at("sweep-edge-cloud.json"),
        &SweepDoc {
            boundary: Boundary::EdgeCloud,
            mbps: vec![13.79, 22.75, 31.53, 50.23],
            replan: false,
        },
    )
    .unwrap();

    // Noiseless samples drawn from one known linear model, for
    // `estimate fit`. Six distinct convolutions give each convolution
    // bucket a full-rank design; pooling and fully-connected features are
    // inherently collinear (their operation counts repeat other columns),
    // so those buckets demonstrate the fallback hierarchy instead.
    let coef: [f64; 5] = [2e-4, 3e-9, 1.5e-9, 2.5e-9, 4e-9];
    let spatial = |mut cfg: LayerConfig| -> LayerConfig {
        cfg.output_elements = cfg.output_dims(1, Rounding::Exact).unwrap().elements();
        cfg
    };
    let sample_configs = vec![
        spatial(LayerConfig::conv(
            Dims::new(32, 32, 3),
            (3, 3),
            16,
            (1, 1),
            (1, 1),
        )),
        spatial(LayerConfig::conv(
            Dims::new(16, 16, 16),
            (2, 2),
            32,
            (2, 2),
            (0, 0),
        )),
        spatial(LayerConfig::conv(
            Dims::new(8, 8, 32),
            (5, 5),
            64,
            (1, 1),
            (2, 2),
        )),
        spatial(LayerConfig::conv(
            Dims::new(28, 28, 8),
            (1, 1),
            8,
            (1, 1),
            (0, 0),
        )),
        spatial(LayerConfig::conv(
            Dims::new(14, 14, 24),
            (3, 3),
            48,
            (1, 1),
            (0, 0),
        )),
        spatial(LayerConfig::conv(
            Dims::new(56, 56, 4),
            (7, 7),
            12,
            (7, 7),
            (0, 0),
        )),
        spatial(LayerConfig::pool(
            Dims::new(16, 16, 32),
            PoolMode::Max,
            (2, 2),
            (2, 2),
            (0, 0),
        )),
        spatial(LayerConfig::pool(
            Dims::new(8, 8, 64),
            PoolMode::Average,
            (3, 3),
            (1, 1),
            (1, 1),
        )),
        LayerConfig::counts(LayerKind::FullyConnected, 4096, 1000),
        LayerConfig::counts(LayerKind::FullyConnected, 9216, 4096),
    ];
    let mut samples = Vec::new();
    for tier in Tier::ALL {
        for cfg in &sample_configs {
            let x = features(cfg);
            let measured: f64 = x.iter().zip(coef.iter()).map(|(a, b)| a * b).sum();
            samples.push(FitSample {
                tier,
                config: cfg.clone(),
                measured_seconds: measured,
            });
        }
    }
    doc::save(&at("layer-samples.json"), &SamplesDoc { samples }).unwrap();

    println!("fixtures written to {}", dir.display());
}
