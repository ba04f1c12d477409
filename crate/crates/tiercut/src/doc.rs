//! Versioned JSON documents for everything the command-line tools read and
//! write.
//!
//! Every document is a JSON object carrying a `format` tag (`"graph/v1"`,
//! `"plan/v1"`, ...) that is injected on save and checked on load, so a file
//! handed to the wrong flag fails with a clear message instead of a puzzling
//! parse error deep inside deserialization. Structures whose in-memory form
//! uses map keys JSON cannot express (grid-cell tuples, (kind, tier) pairs)
//! are stored as arrays of records and converted on the way in and out.
//!
//! Rendering is deterministic: objects are emitted with sorted keys and
//! floats in shortest round-trip form, so identical inputs produce
//! byte-identical documents.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Dims, DnnGraph, GraphError, LayerConfig, LayerKind, VertexId};
use crate::latency::{
    BandwidthConfig, FitSample, LatencyError, ProfileTable, RegressionModel, Tier, FEATURE_COUNT,
};
use crate::planner::{PartitionPlan, PlanError, Provenance, Thresholds};
use crate::sim::SimReport;
use crate::tensor::StackLayer;
use crate::tiler::{OverlapStats, Tile, TilePlan};

#[derive(Debug, Error)]
pub enum DocError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: expected a \"{expected}\" document, found \"{found}\"")]
    Format {
        path: String,
        expected: &'static str,
        found: String,
    },
    #[error("cannot render document: {0}")]
    Render(#[from] serde_json::Error),
    #[error("duplicate entry for {what} {key}")]
    Duplicate { what: &'static str, key: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Latency(#[from] LatencyError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// A JSON document type with a fixed `format` tag.
pub trait Document: Serialize + DeserializeOwned {
    const FORMAT: &'static str;
}

macro_rules! document {
    ($ty:ty, $fmt:literal) => {
        impl Document for $ty {
            const FORMAT: &'static str = $fmt;
        }
    };
}

// ── IO helpers ───────────────────────────────────────────────────────────────

/// Serializes `doc` with its `format` tag, pretty-printed, trailing newline.
pub fn render<T: Document>(doc: &T) -> Result<String, DocError> {
    let mut value = serde_json::to_value(doc)?;
    let obj = value
        .as_object_mut()
        .expect("documents serialize to JSON objects");
    obj.insert(
        "format".to_string(),
        serde_json::Value::String(T::FORMAT.to_string()),
    );
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

/// Parses a document from `text`, checking its `format` tag. `origin` names
/// the source (a path, or something like "stdin") in error messages.
pub fn parse<T: Document>(text: &str, origin: &str) -> Result<T, DocError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|source| DocError::Json {
            path: origin.to_string(),
            source,
        })?;
    let found = value
        .get("format")
        .and_then(serde_json::Value::as_str)
        .unwrap_or("<none>");
    if found != T::FORMAT {
        return Err(DocError::Format {
            path: origin.to_string(),
            expected: T::FORMAT,
            found: found.to_string(),
        });
    }
    serde_json::from_value(value).map_err(|source| DocError::Json {
        path: origin.to_string(),
        source,
    })
}

pub fn load<T: Document>(path: &Path) -> Result<T, DocError> {
    let origin = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| DocError::Io {
        path: origin.clone(),
        source,
    })?;
    parse(&text, &origin)
}

pub fn save<T: Document>(path: &Path, doc: &T) -> Result<(), DocError> {
    let text = render(doc)?;
    fs::write(path, text).map_err(|source| DocError::Io {
        path: path.display().to_string(),
        source,
    })
}

// ── Graph ────────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexDoc {
    pub id: VertexId,
    #[serde(flatten)]
    pub config: LayerConfig,
}

/// A layer DAG: every vertex (including the virtual input, id 0, kind
/// `"input"`) plus the directed links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub vertices: Vec<VertexDoc>,
    pub links: Vec<(VertexId, VertexId)>,
}
document!(GraphDoc, "graph/v1");

impl GraphDoc {
    pub fn from_graph(g: &DnnGraph) -> Self {
        GraphDoc {
            vertices: g
                .configs()
                .iter()
                .map(|(&id, config)| VertexDoc {
                    id,
                    config: config.clone(),
                })
                .collect(),
            links: g.links().to_vec(),
        }
    }

    pub fn to_graph(&self) -> Result<DnnGraph, DocError> {
        let mut configs = BTreeMap::new();
        for v in &self.vertices {
            if configs.insert(v.id, v.config.clone()).is_some() {
                return Err(DocError::Duplicate {
                    what: "vertex",
                    key: v.id.to_string(),
                });
            }
        }
        Ok(DnnGraph::new(configs, self.links.clone())?)
    }
}

// ── Profiled times ───────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub vertex: VertexId,
    /// `[device, edge, cloud]` seconds.
    pub seconds: [f64; 3],
}

/// Measured (or predicted) per-vertex processing times on each tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDoc {
    pub entries: Vec<ProfileEntry>,
}
document!(ProfileDoc, "profile/v1");

impl ProfileDoc {
    pub fn from_table(table: &ProfileTable) -> Self {
        ProfileDoc {
            entries: table
                .iter()
                .map(|(&vertex, &seconds)| ProfileEntry { vertex, seconds })
                .collect(),
        }
    }

    pub fn to_table(&self) -> Result<ProfileTable, DocError> {
        let mut table = ProfileTable::new();
        for e in &self.entries {
            if table.insert(e.vertex, e.seconds).is_some() {
                return Err(DocError::Duplicate {
                    what: "vertex",
                    key: e.vertex.to_string(),
                });
            }
        }
        Ok(table)
    }
}

// ── Bandwidths ───────────────────────────────────────────────────────────────

/// Link bandwidths in megabits per second (the unit measurement tables are
/// usually quoted in); converted to bits per second on load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthDoc {
    pub device_edge_mbps: f64,
    pub edge_cloud_mbps: f64,
    pub device_cloud_mbps: f64,
}
document!(BandwidthDoc, "bandwidth/v1");

impl BandwidthDoc {
    pub fn from_config(cfg: &BandwidthConfig) -> Self {
        BandwidthDoc {
            device_edge_mbps: cfg.sigma_de_bps / 1e6,
            edge_cloud_mbps: cfg.sigma_ec_bps / 1e6,
            device_cloud_mbps: cfg.sigma_dc_bps / 1e6,
        }
    }

    pub fn to_config(&self) -> Result<BandwidthConfig, DocError> {
        Ok(BandwidthConfig::new(
            self.device_edge_mbps * 1e6,
            self.edge_cloud_mbps * 1e6,
            self.device_cloud_mbps * 1e6,
        )?)
    }
}

// ── Re-planning thresholds ───────────────────────────────────────────────────

/// Multiplicative deviation bands that decide whether a perturbed instance
/// keeps its previous assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdsDoc {
    #[serde(flatten)]
    pub thresholds: Thresholds,
}
document!(ThresholdsDoc, "thresholds/v1");

impl ThresholdsDoc {
    pub fn to_thresholds(&self) -> Result<Thresholds, DocError> {
        self.thresholds.validate()?;
        Ok(self.thresholds)
    }
}

// ── Partition plan ───────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentEntry {
    pub vertex: VertexId,
    pub tier: Tier,
}

/// A complete vertex-to-tier assignment with its end-to-end latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDoc {
    pub assignment: Vec<AssignmentEntry>,
    pub theta_seconds: f64,
    pub provenance: Provenance,
}
document!(PlanDoc, "plan/v1");

impl PlanDoc {
    pub fn from_plan(plan: &PartitionPlan) -> Self {
        PlanDoc {
            assignment: plan
                .assignment
                .iter()
                .map(|(&vertex, &tier)| AssignmentEntry { vertex, tier })
                .collect(),
            theta_seconds: plan.theta_seconds,
            provenance: plan.provenance,
        }
    }

    pub fn to_plan(&self) -> Result<PartitionPlan, DocError> {
        let mut assignment = BTreeMap::new();
        for e in &self.assignment {
            if assignment.insert(e.vertex, e.tier).is_some() {
                return Err(DocError::Duplicate {
                    what: "vertex",
                    key: e.vertex.to_string(),
                });
            }
        }
        Ok(PartitionPlan {
            assignment,
            theta_seconds: self.theta_seconds,
            provenance: self.provenance,
        })
    }
}

// ── Perturbation ─────────────────────────────────────────────────────────────

/// A change to a planned instance: replacement per-tier times for some
/// vertices and/or a replacement bandwidth table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PerturbationDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vertex_times: Vec<ProfileEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<BandwidthDoc>,
}
document!(PerturbationDoc, "perturbation/v1");

impl PerturbationDoc {
    pub fn vertex_times(&self) -> Result<ProfileTable, DocError> {
        ProfileDoc {
            entries: self.vertex_times.clone(),
        }
        .to_table()
    }

    pub fn bandwidth(&self) -> Result<Option<BandwidthConfig>, DocError> {
        self.bandwidth.as_ref().map(|b| b.to_config()).transpose()
    }
}

// ── Tile plan ────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDoc {
    /// Grid cell (column, row).
    pub cell: (u32, u32),
    /// One tile per level, innermost (the stack input crop) first.
    pub tiles: Vec<Tile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropSizeDoc {
    pub cell: (u32, u32),
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapDoc {
    pub per_layer_factor: Vec<f64>,
    pub redundant_elements: u64,
    pub crop_sizes: Vec<CropSizeDoc>,
}

impl OverlapDoc {
    pub fn from_stats(stats: &OverlapStats) -> Self {
        OverlapDoc {
            per_layer_factor: stats.per_layer_factor.clone(),
            redundant_elements: stats.redundant_elements,
            crop_sizes: stats
                .crop_sizes
                .iter()
                .map(|(&cell, &(width, height))| CropSizeDoc {
                    cell,
                    width,
                    height,
                })
                .collect(),
        }
    }

    pub fn to_stats(&self) -> Result<OverlapStats, DocError> {
        let mut crop_sizes = BTreeMap::new();
        for c in &self.crop_sizes {
            if crop_sizes.insert(c.cell, (c.width, c.height)).is_some() {
                return Err(DocError::Duplicate {
                    what: "cell",
                    key: format!("{:?}", c.cell),
                });
            }
        }
        Ok(OverlapStats {
            per_layer_factor: self.per_layer_factor.clone(),
            redundant_elements: self.redundant_elements,
            crop_sizes,
        })
    }
}

/// A fused tiling of a spatial stack: per grid cell, the chain of tiles from
/// the stack's input crop to its slice of the output partition, plus
/// optional redundancy statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilePlanDoc {
    pub grid: (u32, u32),
    pub configs: Vec<LayerConfig>,
    /// Feature-map dims per level: `levels[0]` is the stack input, the last
    /// entry the stack output.
    pub levels: Vec<Dims>,
    pub cells: Vec<CellDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<OverlapDoc>,
}
document!(TilePlanDoc, "tile-plan/v1");

impl TilePlanDoc {
    pub fn from_plan(plan: &TilePlan, stats: Option<&OverlapStats>) -> Self {
        TilePlanDoc {
            grid: plan.grid,
            configs: plan.configs.clone(),
            levels: plan.levels.clone(),
            cells: plan
                .cells
                .iter()
                .map(|(&cell, tiles)| CellDoc {
                    cell,
                    tiles: tiles.clone(),
                })
                .collect(),
            stats: stats.map(OverlapDoc::from_stats),
        }
    }

    pub fn to_plan(&self) -> Result<TilePlan, DocError> {
        let mut cells = BTreeMap::new();
        for c in &self.cells {
            if cells.insert(c.cell, c.tiles.clone()).is_some() {
                return Err(DocError::Duplicate {
                    what: "cell",
                    key: format!("{:?}", c.cell),
                });
            }
        }
        Ok(TilePlan {
            grid: self.grid,
            configs: self.configs.clone(),
            levels: self.levels.clone(),
            cells,
        })
    }
}

// ── Simulation report ────────────────────────────────────────────────────────

/// A latency/traffic report for one planned instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReportDoc {
    #[serde(flatten)]
    pub report: SimReport,
}
document!(SimReportDoc, "sim-report/v1");

// ── Regression samples and model ─────────────────────────────────────────────

/// Measured (tier, layer, seconds) observations for model fitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplesDoc {
    pub samples: Vec<FitSample>,
}
document!(SamplesDoc, "samples/v1");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketCoeffsDoc {
    pub kind: LayerKind,
    pub tier: Tier,
    pub coefficients: [f64; FEATURE_COUNT],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindCoeffsDoc {
    pub kind: LayerKind,
    pub coefficients: [f64; FEATURE_COUNT],
}

/// A fitted per-(kind, tier) linear latency model with its fallback tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub buckets: Vec<BucketCoeffsDoc>,
    pub kinds: Vec<KindCoeffsDoc>,
    pub global: [f64; FEATURE_COUNT],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}
document!(ModelDoc, "model/v1");

impl ModelDoc {
    pub fn from_model(model: &RegressionModel, warnings: &[String]) -> Self {
        ModelDoc {
            buckets: model
                .buckets
                .iter()
                .map(|((kind, tier), &coefficients)| BucketCoeffsDoc {
                    kind: kind.clone(),
                    tier: *tier,
                    coefficients,
                })
                .collect(),
            kinds: model
                .kinds
                .iter()
                .map(|(kind, &coefficients)| KindCoeffsDoc {
                    kind: kind.clone(),
                    coefficients,
                })
                .collect(),
            global: model.global,
            warnings: warnings.to_vec(),
        }
    }

    pub fn to_model(&self) -> Result<RegressionModel, DocError> {
        let mut buckets = BTreeMap::new();
        for b in &self.buckets {
            if buckets
                .insert((b.kind.clone(), b.tier), b.coefficients)
                .is_some()
            {
                return Err(DocError::Duplicate {
                    what: "bucket",
                    key: format!("({}, {})", b.kind.name(), b.tier),
                });
            }
        }
        let mut kinds = BTreeMap::new();
        for k in &self.kinds {
            if kinds.insert(k.kind.clone(), k.coefficients).is_some() {
                return Err(DocError::Duplicate {
                    what: "kind",
                    key: k.kind.name(),
                });
            }
        }
        Ok(RegressionModel {
            buckets,
            kinds,
            global: self.global,
        })
    }
}

// ── Spatial stacks ───────────────────────────────────────────────────────────

/// A linear spatial stack (convolution/pooling chain with elementwise
/// layers) plus the dims of the tensor it consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackDoc {
    pub input: Dims,
    pub layers: Vec<StackLayer<f64>>,
}
document!(StackDoc, "stack/v1");

// ── Bandwidth sweep ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    DeviceEdge,
    EdgeCloud,
    DeviceCloud,
}

impl Boundary {
    /// `base` with this boundary's bandwidth replaced by `mbps`.
    pub fn apply(&self, base: &BandwidthConfig, mbps: f64) -> Result<BandwidthConfig, DocError> {
        let bps = mbps * 1e6;
        let (de, ec, dc) = match self {
            Boundary::DeviceEdge => (bps, base.sigma_ec_bps, base.sigma_dc_bps),
            Boundary::EdgeCloud => (base.sigma_de_bps, bps, base.sigma_dc_bps),
            Boundary::DeviceCloud => (base.sigma_de_bps, base.sigma_ec_bps, bps),
        };
        Ok(BandwidthConfig::new(de, ec, dc)?)
    }
}

/// Re-simulate one scenario across a list of bandwidths on one boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDoc {
    pub boundary: Boundary,
    pub mbps: Vec<f64>,
    /// Re-plan at each point instead of keeping the input plan.
    #[serde(default)]
    pub replan: bool,
}
document!(SweepDoc, "sweep/v1");

// ── Tool reports ─────────────────────────────────────────────────────────────

/// Planner-vs-exhaustive comparison on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReportDoc {
    pub greedy_theta_seconds: f64,
    pub optimal_theta_seconds: f64,
    /// greedy / optimal; 1.0 when both are zero.
    pub ratio: f64,
    pub assignments_match: bool,
    pub greedy: Vec<AssignmentEntry>,
    pub optimal: Vec<AssignmentEntry>,
}
document!(OracleReportDoc, "oracle-report/v1");

/// Planner-vs-exhaustive gap distribution over randomized instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReportDoc {
    pub trials: u32,
    pub seed: u64,
    pub max_vertices: usize,
    /// Trials where the planner's latency equalled the optimum exactly.
    pub exact_matches: u32,
    pub mean_ratio: f64,
    pub max_ratio: f64,
}
document!(GapReportDoc, "gap-report/v1");

/// Tiled-vs-whole equivalence check over randomized stacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReportDoc {
    pub trials: u32,
    pub seed: u64,
    pub fault_injection: bool,
    /// Trials whose stitched tiled output differed from the whole-input run.
    pub mismatches: u32,
}
document!(VerifyReportDoc, "verify-report/v1");

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Rounding;
    use crate::planner::Bounds;
    use crate::synth;
    use crate::tiler::{overlap_stats, plan_tiles};

    #[test]
    fn graph_doc_round_trips_through_text() {
        let g = synth::grid_module_graph();
        let doc = GraphDoc::from_graph(&g);
        let text = render(&doc).unwrap();
        assert!(text.contains("\"format\": \"graph/v1\""));
        let parsed: GraphDoc = parse(&text, "memory").unwrap();
        assert_eq!(parsed, doc);
        assert_eq!(parsed.to_graph().unwrap(), g);
    }

    #[test]
    fn format_tag_mismatch_is_rejected() {
        let g = synth::grid_module_graph();
        let text = render(&GraphDoc::from_graph(&g)).unwrap();
        let err = parse::<PlanDoc>(&text, "memory").unwrap_err();
        match err {
            DocError::Format {
                expected, found, ..
            } => {
                assert_eq!(expected, "plan/v1");
                assert_eq!(found, "graph/v1");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn missing_format_tag_reads_as_none() {
        let err = parse::<GraphDoc>("{\"vertices\": []}", "memory").unwrap_err();
        match err {
            DocError::Format { found, .. } => assert_eq!(found, "<none>"),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn malformed_json_reports_the_origin() {
        let err = parse::<GraphDoc>("not json", "some/file.json").unwrap_err();
        assert!(err.to_string().contains("some/file.json"));
    }

    #[test]
    fn duplicate_vertices_are_rejected() {
        let g = synth::grid_module_graph();
        let mut doc = GraphDoc::from_graph(&g);
        doc.vertices.push(doc.vertices[1].clone());
        assert!(matches!(
            doc.to_graph(),
            Err(DocError::Duplicate { what: "vertex", .. })
        ));
    }

    #[test]
    fn profile_doc_round_trips() {
        let mut table = ProfileTable::new();
        table.insert(1, [0.003, 0.002, 0.001]);
        table.insert(2, [0.03, 0.02, 0.01]);
        let doc = ProfileDoc::from_table(&table);
        let text = render(&doc).unwrap();
        let parsed: ProfileDoc = parse(&text, "memory").unwrap();
        assert_eq!(parsed.to_table().unwrap(), table);
    }

    #[test]
    fn bandwidth_doc_converts_megabits() {
        let doc = BandwidthDoc {
            device_edge_mbps: 84.95,
            edge_cloud_mbps: 31.53,
            device_cloud_mbps: 18.75,
        };
        let cfg = doc.to_config().unwrap();
        assert_eq!(cfg.sigma_de_bps, 84.95 * 1e6);
        assert_eq!(cfg.sigma_ec_bps, 31.53 * 1e6);
        assert_eq!(cfg.sigma_dc_bps, 18.75 * 1e6);
        let back = BandwidthDoc::from_config(&cfg);
        assert_eq!(back.device_cloud_mbps, 18.75);
    }

    #[test]
    fn nonpositive_bandwidth_fails_conversion() {
        let doc = BandwidthDoc {
            device_edge_mbps: 0.0,
            edge_cloud_mbps: 1.0,
            device_cloud_mbps: 1.0,
        };
        assert!(matches!(doc.to_config(), Err(DocError::Latency(_))));
    }

    #[test]
    fn plan_doc_round_trips() {
        let mut assignment = BTreeMap::new();
        assignment.insert(0, Tier::Device);
        assignment.insert(1, Tier::Edge);
        assignment.insert(2, Tier::Cloud);
        let plan = PartitionPlan {
            assignment,
            theta_seconds: 0.0072,
            provenance: Provenance::Full,
        };
        let doc = PlanDoc::from_plan(&plan);
        let text = render(&doc).unwrap();
        let parsed: PlanDoc = parse(&text, "memory").unwrap();
        assert_eq!(parsed.to_plan().unwrap(), plan);
    }

    #[test]
    fn thresholds_doc_validates_bounds() {
        let doc = ThresholdsDoc {
            thresholds: Thresholds {
                vertex_time: Bounds {
                    lower: 0.8,
                    upper: 1.25,
                },
                bandwidth: Bounds {
                    lower: 2.0, // > 1: invalid
                    upper: 3.0,
                },
            },
        };
        assert!(matches!(doc.to_thresholds(), Err(DocError::Plan(_))));
        let text = render(&doc).unwrap();
        // Flattened: bands appear at the top level.
        assert!(text.contains("\"vertex_time\""));
        let parsed: ThresholdsDoc = parse(&text, "memory").unwrap();
        assert_eq!(parsed, doc);
    }

    #[test]
    fn perturbation_doc_fields_are_optional() {
        let parsed: PerturbationDoc =
            parse("{\"format\": \"perturbation/v1\"}", "memory").unwrap();
        assert!(parsed.vertex_times.is_empty());
        assert!(parsed.bandwidth.is_none());
        assert_eq!(parsed, PerturbationDoc::default());
    }

    #[test]
    fn tile_plan_doc_round_trips() {
        let conv = LayerConfig::conv(Dims::new(13, 11, 3), (3, 3), 8, (1, 1), (1, 1));
        let plan = plan_tiles(
            Dims::new(13, 11, 3),
            std::slice::from_ref(&conv),
            (3, 2),
            Rounding::Exact,
        )
        .unwrap();
        let stats = overlap_stats(&plan);
        let doc = TilePlanDoc::from_plan(&plan, Some(&stats));
        let text = render(&doc).unwrap();
        let parsed: TilePlanDoc = parse(&text, "memory").unwrap();
        assert_eq!(parsed.to_plan().unwrap(), plan);
        assert_eq!(parsed.stats.unwrap().to_stats().unwrap(), stats);
    }

    #[test]
    fn model_doc_round_trips() {
        let mut buckets = BTreeMap::new();
        buckets.insert(
            (LayerKind::Convolution, Tier::Edge),
            [0.001, 2e-12, 0.0, 3e-9, 0.0],
        );
        let mut kinds = BTreeMap::new();
        kinds.insert(LayerKind::Convolution, [0.002, 1e-12, 0.0, 0.0, 0.0]);
        kinds.insert(
            LayerKind::Other("custom".into()),
            [0.004, 0.0, 1e-9, 0.0, 0.0],
        );
        let model = RegressionModel {
            buckets,
            kinds,
            global: [0.005, 0.0, 0.0, 0.0, 0.0],
        };
        let doc = ModelDoc::from_model(&model, &["bucket (pooling, cloud): thin".to_string()]);
        let text = render(&doc).unwrap();
        let parsed: ModelDoc = parse(&text, "memory").unwrap();
        assert_eq!(parsed.to_model().unwrap(), model);
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn boundary_apply_replaces_one_link() {
        let base = BandwidthConfig::new(1e6, 2e6, 3e6).unwrap();
        let swapped = Boundary::EdgeCloud.apply(&base, 50.23).unwrap();
        assert_eq!(swapped.sigma_de_bps, 1e6);
        assert_eq!(swapped.sigma_ec_bps, 50.23 * 1e6);
        assert_eq!(swapped.sigma_dc_bps, 3e6);
        assert!(Boundary::DeviceEdge.apply(&base, -1.0).is_err());
    }

    #[test]
    fn save_and_load_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.json");
        let doc = GraphDoc::from_graph(&synth::grid_module_graph());
        save(&path, &doc).unwrap();
        let loaded: GraphDoc = load(&path).unwrap();
        assert_eq!(loaded, doc);
        let err = load::<GraphDoc>(&dir.path().join("absent.json")).unwrap_err();
        assert!(matches!(err, DocError::Io { .. }));
    }

    #[test]
    fn rendering_is_deterministic() {
        let doc = GraphDoc::from_graph(&synth::grid_module_graph());
        assert_eq!(render(&doc).unwrap(), render(&doc).unwrap());
    }

    #[test]
    fn stack_doc_round_trips() {
        let doc = StackDoc {
            input: Dims::new(2, 2, 3),
            layers: vec![
                StackLayer::Conv {
                    window: (3, 3),
                    stride: (1, 1),
                    padding: (1, 1),
                    filters: 1,
                    weights: vec![0.25; 27],
                    bias: vec![0.5],
                },
                StackLayer::Activation,
            ],
        };
        let text = render(&doc).unwrap();
        assert!(text.contains("\"layer\": \"conv\""));
        let parsed: StackDoc = parse(&text, "memory").unwrap();
        assert_eq!(parsed, doc);
    }
}
