//! Per-layer latency estimation and the weighted graph the planner consumes.
//!
//! Vertex weights are per-tier processing times, taken from a profiled time
//! table when one is supplied and otherwise predicted by a least-squares
//! model fitted per (layer kind, tier). Link weights are transfer delays:
//! the producing vertex's output payload over the bandwidth between the two
//! tiers involved. Two vertices on the same tier exchange data for free.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DnnGraph, LayerConfig, LayerKind, Rounding, VertexId, SOURCE};

#[derive(Debug, Error)]
pub enum LatencyError {
    #[error("bandwidth {what} must be positive and finite, got {value}")]
    BadBandwidth { what: &'static str, value: f64 },
    #[error("no samples to fit")]
    NoSamples,
    #[error("sample {index}: measured time {value} is not finite and non-negative")]
    BadSample { index: usize, value: f64 },
    #[error("vertex {0}: no profiled time and no regression model supplied")]
    MissingTime(VertexId),
    #[error("vertex {vertex}: profiled time {value} at {tier} is not finite and non-negative")]
    BadProfiledTime {
        vertex: VertexId,
        tier: Tier,
        value: f64,
    },
}

// ── Tiers ────────────────────────────────────────────────────────────────────

/// Execution tier, in pipeline order: the device feeds the edge feeds the
/// cloud. `rank` is the position in that order; a tier with smaller rank is
/// "earlier" (closer to the data source).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Device,
    Edge,
    Cloud,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Device, Tier::Edge, Tier::Cloud];

    pub fn rank(self) -> usize {
        match self {
            Tier::Device => 0,
            Tier::Edge => 1,
            Tier::Cloud => 2,
        }
    }

    pub fn from_rank(rank: usize) -> Tier {
        Tier::ALL[rank]
    }

    pub fn name(self) -> &'static str {
        match self {
            Tier::Device => "device",
            Tier::Edge => "edge",
            Tier::Cloud => "cloud",
        }
    }
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Descriptive capability record for one tier. The regression buckets by
/// tier identity; these numbers document what the tier was when profiled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierCapability {
    pub cpu_score: f64,
    pub gpu_score: f64,
    pub memory_bytes: u64,
}

// ── Bandwidths and link delays ───────────────────────────────────────────────

/// Uplink bandwidths (bits per second) between the three tier pairs.
/// Delays are symmetric: the same figure covers either direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthConfig {
    pub sigma_de_bps: f64,
    pub sigma_ec_bps: f64,
    pub sigma_dc_bps: f64,
}

impl BandwidthConfig {
    pub fn new(sigma_de_bps: f64, sigma_ec_bps: f64, sigma_dc_bps: f64) -> Result<Self, LatencyError> {
        for (what, value) in [
            ("sigma_de_bps", sigma_de_bps),
            ("sigma_ec_bps", sigma_ec_bps),
            ("sigma_dc_bps", sigma_dc_bps),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(LatencyError::BadBandwidth { what, value });
            }
        }
        Ok(BandwidthConfig {
            sigma_de_bps,
            sigma_ec_bps,
            sigma_dc_bps,
        })
    }

    /// Bandwidth between two distinct tiers.
    pub fn sigma(&self, a: Tier, b: Tier) -> f64 {
        debug_assert_ne!(a, b);
        match (a.rank().min(b.rank()), a.rank().max(b.rank())) {
            (0, 1) => self.sigma_de_bps,
            (1, 2) => self.sigma_ec_bps,
            _ => self.sigma_dc_bps,
        }
    }
}

/// Transfer delay in seconds for a payload over one link.
pub fn link_delay(output_bytes: u64, sigma_bps: f64) -> f64 {
    debug_assert!(sigma_bps > 0.0);
    output_bytes as f64 * 8.0 / sigma_bps
}

// ── Regression model ─────────────────────────────────────────────────────────

pub const FEATURE_COUNT: usize = 5;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] =
    ["intercept", "flops", "input_elements", "output_elements", "parameters"];

/// Closed-form operation count for one layer.
///
/// Convolutions count `2 * Fw * Fh * D * Wout * Hout * filters` (multiply
/// plus add per tap), fully-connected layers `2 * in * out`, the virtual
/// input 0, and everything else its output element count. Spatial
/// arithmetic uses floor rounding here; exactness is enforced where shapes
/// are validated, not in feature extraction.
pub fn flop_count(cfg: &LayerConfig) -> f64 {
    match cfg.kind {
        LayerKind::Input => 0.0,
        LayerKind::Convolution => match (cfg.input_dims, cfg.window, cfg.filters) {
            (Some(dims), Some((fw, fh)), Some(filters)) => {
                match cfg.output_dims(SOURCE, Rounding::Floor) {
                    Ok(out) => {
                        2.0 * fw as f64
                            * fh as f64
                            * dims.d as f64
                            * out.w as f64
                            * out.h as f64
                            * filters as f64
                    }
                    Err(_) => cfg.output_elements as f64,
                }
            }
            _ => cfg.output_elements as f64,
        },
        LayerKind::FullyConnected => 2.0 * cfg.input_elements as f64 * cfg.output_elements as f64,
        _ => cfg.output_elements as f64,
    }
}

/// Trainable parameter count: weights plus biases for convolution and
/// fully-connected layers, zero for everything else.
pub fn parameter_count(cfg: &LayerConfig) -> f64 {
    match cfg.kind {
        LayerKind::Convolution => match (cfg.input_dims, cfg.window, cfg.filters) {
            (Some(dims), Some((fw, fh)), Some(filters)) => {
                (fw as f64 * fh as f64 * dims.d as f64 + 1.0) * filters as f64
            }
            _ => 0.0,
        },
        LayerKind::FullyConnected => {
            cfg.input_elements as f64 * cfg.output_elements as f64 + cfg.output_elements as f64
        }
        _ => 0.0,
    }
}

pub fn features(cfg: &LayerConfig) -> [f64; FEATURE_COUNT] {
    [
        1.0,
        flop_count(cfg),
        cfg.input_elements as f64,
        cfg.output_elements as f64,
        parameter_count(cfg),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSample {
    pub tier: Tier,
    pub config: LayerConfig,
    pub measured_seconds: f64,
}

/// Where a bucket's coefficients came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoeffSource {
    /// Fitted on the bucket's own (kind, tier) samples.
    Bucket,
    /// Bucket was short or rank-deficient; fell back to the kind pooled
    /// across tiers.
    Kind,
    /// Even the kind pool was unusable; fell back to all samples.
    Global,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BucketReport {
    pub kind: LayerKind,
    pub tier: Tier,
    pub samples: usize,
    pub source: CoeffSource,
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FitReport {
    pub buckets: Vec<BucketReport>,
    pub warnings: Vec<String>,
}

/// Per-(kind, tier) linear model over [`features`], with fallbacks for
/// buckets that were too small or rank-deficient to fit on their own.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    pub buckets: BTreeMap<(LayerKind, Tier), [f64; FEATURE_COUNT]>,
    pub kinds: BTreeMap<LayerKind, [f64; FEATURE_COUNT]>,
    pub global: [f64; FEATURE_COUNT],
}

struct Solve {
    coeffs: [f64; FEATURE_COUNT],
    full_rank: bool,
}

/// Minimal-norm least squares with max-abs column normalization for
/// conditioning. Rank-deficient systems get the pseudo-inverse solution,
/// which for an intercept-only design is exactly the target mean.
fn least_squares(rows: &[[f64; FEATURE_COUNT]], targets: &[f64]) -> Solve {
    let n = rows.len();
    // When only the intercept column carries information the system
    // collapses to the plain mean; computing it directly keeps that
    // degenerate case exact instead of round-tripping it through a
    // factorization.
    if rows.iter().all(|r| r[1..] == [0.0; FEATURE_COUNT - 1]) {
        let mut coeffs = [0.0; FEATURE_COUNT];
        coeffs[0] = targets.iter().sum::<f64>() / n as f64;
        return Solve {
            coeffs,
            full_rank: false,
        };
    }
    let mut scale = [1.0f64; FEATURE_COUNT];
    for j in 0..FEATURE_COUNT {
        let m = rows.iter().map(|r| r[j].abs()).fold(0.0f64, f64::max);
        if m > 0.0 {
            scale[j] = m;
        }
    }
    let mut design = DMatrix::zeros(n, FEATURE_COUNT);
    for (i, r) in rows.iter().enumerate() {
        for j in 0..FEATURE_COUNT {
            design[(i, j)] = r[j] / scale[j];
        }
    }
    let b = DVector::from_column_slice(targets);
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let eps = max_sv * (n.max(FEATURE_COUNT) as f64) * f64::EPSILON;
    let rank = svd.rank(eps.max(f64::MIN_POSITIVE));
    let solution = svd
        .solve(&b, eps.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DVector::zeros(FEATURE_COUNT));
    let mut coeffs = [0.0; FEATURE_COUNT];
    for j in 0..FEATURE_COUNT {
        coeffs[j] = solution[j] / scale[j];
    }
    Solve {
        coeffs,
        full_rank: rank == FEATURE_COUNT,
    }
}

/// Accumulated design-matrix rows and their measured targets.
type DesignRows = (Vec<[f64; FEATURE_COUNT]>, Vec<f64>);

/// Fits the per-bucket models. A (kind, tier) bucket keeps its own fit when
/// it has at least [`FEATURE_COUNT`] samples and a full-rank design matrix;
/// otherwise it is assigned the kind-pooled fit (or, failing that, the
/// all-sample fit) and a warning lands in the report. Deterministic for a
/// given sample order.
pub fn fit(samples: &[FitSample]) -> Result<(RegressionModel, FitReport), LatencyError> {
    if samples.is_empty() {
        return Err(LatencyError::NoSamples);
    }
    for (index, s) in samples.iter().enumerate() {
        if !(s.measured_seconds.is_finite() && s.measured_seconds >= 0.0) {
            return Err(LatencyError::BadSample {
                index,
                value: s.measured_seconds,
            });
        }
    }

    let mut by_bucket: BTreeMap<(LayerKind, Tier), DesignRows> = BTreeMap::new();
    let mut by_kind: BTreeMap<LayerKind, DesignRows> = BTreeMap::new();
    let mut all: DesignRows = (Vec::new(), Vec::new());
    for s in samples {
        let row = features(&s.config);
        let t = s.measured_seconds;
        let b = by_bucket
            .entry((s.config.kind.clone(), s.tier))
            .or_default();
        b.0.push(row);
        b.1.push(t);
        let k = by_kind.entry(s.config.kind.clone()).or_default();
        k.0.push(row);
        k.1.push(t);
        all.0.push(row);
        all.1.push(t);
    }

    let global = least_squares(&all.0, &all.1);
    let mut report = FitReport::default();
    let mut kinds = BTreeMap::new();
    let mut kind_ok = BTreeMap::new();
    for (kind, (rows, ts)) in &by_kind {
        let s = least_squares(rows, ts);
        let ok = s.full_rank && rows.len() >= FEATURE_COUNT;
        kinds.insert(kind.clone(), s.coeffs);
        kind_ok.insert(kind.clone(), ok);
    }

    let mut buckets = BTreeMap::new();
    for ((kind, tier), (rows, ts)) in &by_bucket {
        let s = least_squares(rows, ts);
        let enough = rows.len() >= FEATURE_COUNT;
        let own_ok = s.full_rank && enough;
        let (coeffs, source) = if own_ok {
            (s.coeffs, CoeffSource::Bucket)
        } else if kind_ok[kind] {
            (kinds[kind], CoeffSource::Kind)
        } else if global.full_rank {
            (global.coeffs, CoeffSource::Global)
        } else {
            // Everything is deficient; the kind pool's minimal-norm solution
            // is still the best-behaved estimate (mean for intercept-only).
            (kinds[kind], CoeffSource::Kind)
        };
        if !own_ok {
            report.warnings.push(format!(
                "bucket ({}, {}): {} ({} samples); using {} coefficients",
                kind.name(),
                tier,
                if enough { "rank-deficient design" } else { "too few samples" },
                rows.len(),
                match source {
                    CoeffSource::Bucket => "bucket",
                    CoeffSource::Kind => "kind-pooled",
                    CoeffSource::Global => "all-sample",
                },
            ));
        }
        report.buckets.push(BucketReport {
            kind: kind.clone(),
            tier: *tier,
            samples: rows.len(),
            source,
            rank_deficient: enough && !s.full_rank,
        });
        buckets.insert((kind.clone(), *tier), coeffs);
    }

    Ok((
        RegressionModel {
            buckets,
            kinds,
            global: global.coeffs,
        },
        report,
    ))
}

impl RegressionModel {
    /// Predicted processing seconds for one layer on one tier, clamped at
    /// zero. The virtual input always predicts 0: it performs no work.
    pub fn predict(&self, cfg: &LayerConfig, tier: Tier) -> f64 {
        if cfg.kind == LayerKind::Input {
            return 0.0;
        }
        let row = features(cfg);
        let coeffs = self
            .buckets
            .get(&(cfg.kind.clone(), tier))
            .or_else(|| self.kinds.get(&cfg.kind))
            .unwrap_or(&self.global);
        let mut y = 0.0;
        for j in 0..FEATURE_COUNT {
            y += coeffs[j] * row[j];
        }
        y.max(0.0)
    }
}

// ── Weighted graph ───────────────────────────────────────────────────────────

/// Explicit per-vertex time table: `[device, edge, cloud]` seconds.
pub type ProfileTable = BTreeMap<VertexId, [f64; 3]>;

/// A graph annotated with per-tier vertex times and everything needed to
/// price a transfer between any two tiers.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    graph: DnnGraph,
    vertex_times: BTreeMap<VertexId, [f64; 3]>,
    bw: BandwidthConfig,
}

impl WeightedGraph {
    /// Annotates `graph` with processing times. Profiled entries win over
    /// model predictions vertex by vertex; a vertex covered by neither is an
    /// error. The virtual input costs 0 at every tier regardless of input.
    pub fn build(
        graph: DnnGraph,
        profile: Option<&ProfileTable>,
        model: Option<&RegressionModel>,
        bw: BandwidthConfig,
    ) -> Result<Self, LatencyError> {
        let mut vertex_times = BTreeMap::new();
        for v in graph.vertices() {
            if v == SOURCE {
                vertex_times.insert(v, [0.0; 3]);
                continue;
            }
            let times = if let Some(times) = profile.and_then(|p| p.get(&v)) {
                for (i, &t) in times.iter().enumerate() {
                    if !(t.is_finite() && t >= 0.0) {
                        return Err(LatencyError::BadProfiledTime {
                            vertex: v,
                            tier: Tier::from_rank(i),
                            value: t,
                        });
                    }
                }
                *times
            } else if let Some(m) = model {
                let cfg = graph.config(v);
                [
                    m.predict(cfg, Tier::Device),
                    m.predict(cfg, Tier::Edge),
                    m.predict(cfg, Tier::Cloud),
                ]
            } else {
                return Err(LatencyError::MissingTime(v));
            };
            vertex_times.insert(v, times);
        }
        Ok(WeightedGraph {
            graph,
            vertex_times,
            bw,
        })
    }

    pub fn graph(&self) -> &DnnGraph {
        &self.graph
    }

    pub fn bandwidth(&self) -> &BandwidthConfig {
        &self.bw
    }

    /// Processing seconds of `v` on `tier`.
    pub fn time(&self, v: VertexId, tier: Tier) -> f64 {
        self.vertex_times[&v][tier.rank()]
    }

    pub fn times(&self, v: VertexId) -> [f64; 3] {
        self.vertex_times[&v]
    }

    /// Delay for shipping `v`'s output from one tier to another; free when
    /// they are the same tier.
    pub fn transfer(&self, v: VertexId, from: Tier, to: Tier) -> f64 {
        if from == to {
            0.0
        } else {
            link_delay(self.graph.config(v).output_bytes(), self.bw.sigma(from, to))
        }
    }

    /// Replaces the per-vertex times for `changed` vertices and/or the
    /// bandwidths, returning the perturbed graph.
    pub fn perturbed(
        &self,
        new_times: &BTreeMap<VertexId, [f64; 3]>,
        new_bw: Option<BandwidthConfig>,
    ) -> Self {
        let mut wg = self.clone();
        for (&v, &t) in new_times {
            if wg.vertex_times.contains_key(&v) && v != SOURCE {
                wg.vertex_times.insert(v, t);
            }
        }
        if let Some(bw) = new_bw {
            wg.bw = bw;
        }
        wg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Dims;
    use crate::synth;

    #[test]
    fn link_delay_closed_forms() {
        // 1 MB over 8 Mbps is exactly one second.
        assert_eq!(link_delay(1_000_000, 8e6), 1.0);
        // Raw 3x224x224 byte input over the device-to-cloud Wi-Fi uplink.
        assert_eq!(link_delay(150_528, 18.75e6), 150_528.0 * 8.0 / 18.75e6);
        // Zero payload is free.
        assert_eq!(link_delay(0, 31.53e6), 0.0);
    }

    #[test]
    fn bandwidth_must_be_positive() {
        assert!(BandwidthConfig::new(1e6, 0.0, 1e6).is_err());
        assert!(BandwidthConfig::new(1e6, 1e6, -3.0).is_err());
        assert!(BandwidthConfig::new(f64::NAN, 1e6, 1e6).is_err());
        let bw = BandwidthConfig::new(84.95e6, 31.53e6, 18.75e6).unwrap();
        assert_eq!(bw.sigma(Tier::Device, Tier::Edge), 84.95e6);
        assert_eq!(bw.sigma(Tier::Cloud, Tier::Edge), 31.53e6);
        assert_eq!(bw.sigma(Tier::Device, Tier::Cloud), 18.75e6);
    }

    fn conv_sample(w: u32, d: u32, filters: u32, tier: Tier, coeffs: [f64; 5]) -> FitSample {
        let mut cfg = LayerConfig::conv(Dims::new(w, w, d), (3, 3), filters, (1, 1), (1, 1));
        cfg.output_elements = (w as u64) * (w as u64) * filters as u64;
        let row = features(&cfg);
        let measured = (0..5).map(|j| coeffs[j] * row[j]).sum();
        FitSample {
            tier,
            config: cfg,
            measured_seconds: measured,
        }
    }

    #[test]
    fn fit_recovers_noiseless_generator() {
        let truth = [0.001, 2e-12, 0.0, 0.0, 0.0];
        let mut samples = Vec::new();
        for (i, w) in [4u32, 6, 8, 10, 12, 14, 16, 20, 24, 28].iter().enumerate() {
            samples.push(conv_sample(*w, 1 + (i as u32 % 4), 1 + (i as u32 % 5), Tier::Edge, truth));
        }
        let (model, report) = fit(&samples).unwrap();
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);
        for s in &samples {
            let p = model.predict(&s.config, Tier::Edge);
            assert!(
                (p - s.measured_seconds).abs() <= 1e-9,
                "prediction {p} vs generator {}",
                s.measured_seconds
            );
        }
    }

    #[test]
    fn intercept_only_bucket_predicts_mean() {
        // All features zero except the intercept: activation with zero
        // elements. The rank-deficient design must resolve to exactly the
        // target mean — the degenerate case is computed directly, not
        // through the factorization, so this holds bitwise.
        let cfg = LayerConfig::counts(LayerKind::Activation, 0, 0);
        let ts = [0.002, 0.004, 0.009];
        let samples: Vec<FitSample> = ts
            .iter()
            .map(|&t| FitSample {
                tier: Tier::Device,
                config: cfg.clone(),
                measured_seconds: t,
            })
            .collect();
        let (model, report) = fit(&samples).unwrap();
        assert!(!report.warnings.is_empty());
        let mean = ts.iter().sum::<f64>() / 3.0;
        assert_eq!(model.predict(&cfg, Tier::Device), mean);
    }

    #[test]
    fn short_bucket_falls_back_to_kind_pool() {
        let truth = [0.0005, 1e-12, 0.0, 0.0, 0.0];
        let mut samples = Vec::new();
        for (i, w) in [4u32, 6, 8, 10, 12, 14, 16, 20].iter().enumerate() {
            samples.push(conv_sample(*w, 1 + (i as u32 % 3), 1 + (i as u32 % 4), Tier::Edge, truth));
        }
        // One lonely cloud sample: bucket too small, kind pool takes over.
        samples.push(conv_sample(18, 2, 3, Tier::Cloud, truth));
        let (model, report) = fit(&samples).unwrap();
        let cloud = report
            .buckets
            .iter()
            .find(|b| b.tier == Tier::Cloud)
            .unwrap();
        assert_eq!(cloud.source, CoeffSource::Kind);
        assert!(report.warnings.iter().any(|w| w.contains("too few samples")));
        let probe = conv_sample(22, 2, 2, Tier::Cloud, truth);
        assert!((model.predict(&probe.config, Tier::Cloud) - probe.measured_seconds).abs() < 1e-9);
    }

    #[test]
    fn virtual_input_predicts_zero() {
        let truth = [0.01, 0.0, 0.0, 0.0, 0.0];
        let samples = vec![conv_sample(4, 1, 1, Tier::Device, truth)];
        let (model, _) = fit(&samples).unwrap();
        let v0 = LayerConfig::input(150_528);
        for tier in Tier::ALL {
            assert_eq!(model.predict(&v0, tier), 0.0);
        }
    }

    #[test]
    fn predictions_clamp_at_zero() {
        let cfg = LayerConfig::counts(LayerKind::Activation, 10, 10);
        let model = RegressionModel {
            buckets: BTreeMap::new(),
            kinds: BTreeMap::new(),
            global: [-5.0, 0.0, 0.0, 0.0, 0.0],
        };
        assert_eq!(model.predict(&cfg, Tier::Edge), 0.0);
    }

    #[test]
    fn prediction_is_linear_in_flops() {
        let coeffs = [0.002, 3e-12, 0.0, 0.0, 0.0];
        let model = RegressionModel {
            buckets: BTreeMap::new(),
            kinds: BTreeMap::new(),
            global: coeffs,
        };
        let mut a = LayerConfig::counts(LayerKind::Other("custom".into()), 0, 1_000);
        let mut b = a.clone();
        b.output_elements = 2_000;
        a.element_size = 4;
        b.element_size = 4;
        let pa = model.predict(&a, Tier::Edge);
        let pb = model.predict(&b, Tier::Edge);
        assert!((pb - pa - coeffs[1] * 1_000.0).abs() < 1e-15);
    }

    #[test]
    fn profile_wins_over_model() {
        let g = synth::two_vertex_chain(1_000_000, 500_000);
        let mut profile = ProfileTable::new();
        profile.insert(1, [0.5, 0.25, 0.125]);
        let model = RegressionModel {
            buckets: BTreeMap::new(),
            kinds: BTreeMap::new(),
            global: [9.0, 0.0, 0.0, 0.0, 0.0],
        };
        let bw = BandwidthConfig::new(8e6, 8e6, 8e6).unwrap();
        let wg = WeightedGraph::build(g, Some(&profile), Some(&model), bw).unwrap();
        assert_eq!(wg.time(1, Tier::Edge), 0.25);
        assert_eq!(wg.time(SOURCE, Tier::Device), 0.0);
    }

    #[test]
    fn missing_time_is_an_error() {
        let g = synth::two_vertex_chain(1_000_000, 500_000);
        let bw = BandwidthConfig::new(8e6, 8e6, 8e6).unwrap();
        let err = WeightedGraph::build(g, None, None, bw);
        assert!(matches!(err, Err(LatencyError::MissingTime(1))));
    }

    #[test]
    fn transfer_prices_source_output_over_link() {
        // Two-vertex chain with a 1 MB boundary tensor: the edge-to-cloud
        // hand-off at 31.53 Mbps costs exactly bytes*8/sigma.
        let g = synth::two_vertex_chain(1_000_000, 1_000_000);
        let mut profile = ProfileTable::new();
        profile.insert(1, [0.0, 0.0, 0.0]);
        let bw = BandwidthConfig::new(84.95e6, 31.53e6, 18.75e6).unwrap();
        let wg = WeightedGraph::build(g, Some(&profile), None, bw).unwrap();
        assert_eq!(
            wg.transfer(1, Tier::Edge, Tier::Cloud),
            1_000_000.0 * 8.0 / 31.53e6
        );
        assert_eq!(wg.transfer(1, Tier::Cloud, Tier::Edge), wg.transfer(1, Tier::Edge, Tier::Cloud));
        assert_eq!(wg.transfer(1, Tier::Edge, Tier::Edge), 0.0);
        // Source output (1 MB) to cloud prices over sigma_dc.
        assert_eq!(
            wg.transfer(SOURCE, Tier::Device, Tier::Cloud),
            1_000_000.0 * 8.0 / 18.75e6
        );
    }
}
