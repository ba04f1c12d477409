//! DAG model of a DNN and its structural queries.
//!
//! A network is a directed acyclic graph whose vertices are layers and whose
//! links are tensor hand-offs. Vertex 0 is always a virtual input source: it
//! performs no computation and only owns the raw input payload. Everything
//! downstream must be reachable from it.
//!
//! The queries here feed the tier planner: [`DnnGraph::layering`] groups
//! vertices by longest distance from the source (so a layer's members have
//! all predecessors in strictly earlier layers), and
//! [`DnnGraph::subset_input_siblings`] finds same-layer vertices whose input
//! set is strictly contained in another's, which the planner may relocate
//! for free because their inputs already travelled to the later tier.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type VertexId = u32;

/// The id of the virtual input source every graph is rooted at.
pub const SOURCE: VertexId = 0;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph has no vertices")]
    Empty,
    #[error("vertex {SOURCE} (virtual input) is missing")]
    MissingSource,
    #[error("source vertex must have kind \"input\", got {0}")]
    SourceKind(String),
    #[error("vertex {0} has kind \"input\" but only vertex {SOURCE} may")]
    StrayInput(VertexId),
    #[error("link ({0}, {1}) references an unknown vertex")]
    UnknownVertex(VertexId, VertexId),
    #[error("self-loop on vertex {0}")]
    SelfLoop(VertexId),
    #[error("duplicate link ({0}, {1})")]
    DuplicateLink(VertexId, VertexId),
    #[error("link ({0}, {1}) points into the virtual input")]
    LinkIntoSource(VertexId, VertexId),
    #[error("graph contains a cycle through vertex {0}")]
    Cycle(VertexId),
    #[error("vertex {0} is not reachable from the virtual input")]
    Unreachable(VertexId),
    #[error("vertex {vertex}: missing {what} for kind {kind}")]
    MissingHyperParam {
        vertex: VertexId,
        kind: String,
        what: &'static str,
    },
    #[error("vertex {vertex}: {what} must be strictly positive")]
    ZeroDim { vertex: VertexId, what: &'static str },
    #[error(
        "vertex {vertex}: ({input} - {window} + 2*{padding}) is not divisible by stride {stride} \
         on the {axis} axis (floor mode off)"
    )]
    NonIntegralDims {
        vertex: VertexId,
        axis: &'static str,
        input: u32,
        window: u32,
        padding: u32,
        stride: u32,
    },
    #[error("vertex {vertex}: window exceeds padded input on the {axis} axis")]
    WindowTooLarge { vertex: VertexId, axis: &'static str },
    #[error(
        "vertex {downstream}: declared input dims {declared:?} contradict dims {derived:?} \
         derived from vertex {upstream}"
    )]
    ShapeContradiction {
        upstream: VertexId,
        downstream: VertexId,
        declared: (u32, u32, u32),
        derived: (u32, u32, u32),
    },
    #[error("vertex {vertex}: {field} = {actual} but dims imply {expected}")]
    ElementCountMismatch {
        vertex: VertexId,
        field: &'static str,
        expected: u64,
        actual: u64,
    },
    #[error("vertex {vertex}: pooling padding must be smaller than the window on the {axis} axis")]
    PoolPaddingTooLarge { vertex: VertexId, axis: &'static str },
}

// ── Layer configuration ─────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    /// Virtual input source; carries only the raw input payload.
    Input,
    Convolution,
    Pooling,
    FullyConnected,
    Activation,
    BatchNorm,
    Concat,
    Add,
    Other(String),
}

impl LayerKind {
    /// Kinds that carry spatial hyper-parameters and participate in
    /// receptive-field arithmetic.
    pub fn is_spatial(&self) -> bool {
        matches!(self, LayerKind::Convolution | LayerKind::Pooling)
    }

    pub fn name(&self) -> String {
        match self {
            LayerKind::Other(s) => s.clone(),
            k => serde_json::to_value(k)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_else(|| format!("{k:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolMode {
    Max,
    Average,
}

/// Spatial extent of a feature map: width, height, depth (channels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub w: u32,
    pub h: u32,
    pub d: u32,
}

impl Dims {
    pub fn new(w: u32, h: u32, d: u32) -> Self {
        Dims { w, h, d }
    }

    pub fn elements(&self) -> u64 {
        self.w as u64 * self.h as u64 * self.d as u64
    }

    pub fn tuple(&self) -> (u32, u32, u32) {
        (self.w, self.h, self.d)
    }
}

/// How Eq.-style spatial arithmetic treats non-exact divisions.
///
/// `Exact` rejects configurations where the stride does not evenly divide
/// the padded extent; `Floor` truncates, which real architectures
/// occasionally rely on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rounding {
    #[default]
    Exact,
    Floor,
}

/// Per-vertex layer description.
///
/// Spatial kinds (convolution, pooling) carry window/stride/padding and,
/// once shapes are settled, concrete input dims. Every other kind carries
/// only element counts. Byte sizes are always `elements * element_size`, so
/// they cannot drift out of sync with the declared counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub kind: LayerKind,
    /// Input feature-map dims; mandatory for spatial kinds (possibly via
    /// shape inference), meaningless otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_dims: Option<Dims>,
    /// Filter window (width, height) for convolution and pooling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(u32, u32)>,
    /// Output channel count; convolution only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filters: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding: Option<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<PoolMode>,
    /// Element counts may be omitted in documents for spatial kinds; shape
    /// inference fills them from the chain.
    #[serde(default)]
    pub input_elements: u64,
    #[serde(default)]
    pub output_elements: u64,
    /// Bytes per element of this vertex's tensors.
    pub element_size: u32,
}

impl LayerConfig {
    /// Config for the virtual input source: no computation, one payload.
    pub fn input(raw_input_bytes: u64) -> Self {
        LayerConfig {
            kind: LayerKind::Input,
            input_dims: None,
            window: None,
            filters: None,
            stride: None,
            padding: None,
            pool: None,
            input_elements: 0,
            output_elements: raw_input_bytes,
            element_size: 1,
        }
    }

    /// Non-spatial layer carrying only element counts.
    pub fn counts(kind: LayerKind, input_elements: u64, output_elements: u64) -> Self {
        LayerConfig {
            kind,
            input_dims: None,
            window: None,
            filters: None,
            stride: None,
            padding: None,
            pool: None,
            input_elements,
            output_elements,
            element_size: 4,
        }
    }

    pub fn conv(
        input_dims: Dims,
        window: (u32, u32),
        filters: u32,
        stride: (u32, u32),
        padding: (u32, u32),
    ) -> Self {
        LayerConfig {
            kind: LayerKind::Convolution,
            input_dims: Some(input_dims),
            window: Some(window),
            filters: Some(filters),
            stride: Some(stride),
            padding: Some(padding),
            pool: None,
            input_elements: input_dims.elements(),
            output_elements: 0,
            element_size: 4,
        }
    }

    pub fn pool(
        input_dims: Dims,
        mode: PoolMode,
        window: (u32, u32),
        stride: (u32, u32),
        padding: (u32, u32),
    ) -> Self {
        LayerConfig {
            kind: LayerKind::Pooling,
            input_dims: Some(input_dims),
            window: Some(window),
            filters: None,
            stride: Some(stride),
            padding: Some(padding),
            pool: Some(mode),
            input_elements: input_dims.elements(),
            output_elements: 0,
            element_size: 4,
        }
    }

    pub fn input_bytes(&self) -> u64 {
        self.input_elements * self.element_size as u64
    }

    pub fn output_bytes(&self) -> u64 {
        self.output_elements * self.element_size as u64
    }

    /// Output feature-map dims of a spatial layer: each axis follows
    /// `out = (in - window + 2*padding) / stride + 1`, with depth becoming
    /// the filter count for convolutions and passing through for pooling.
    pub fn output_dims(&self, vertex: VertexId, rounding: Rounding) -> Result<Dims, GraphError> {
        let dims = self.input_dims.ok_or(GraphError::MissingHyperParam {
            vertex,
            kind: self.kind.name(),
            what: "input_dims",
        })?;
        let (fw, fh) = self.require(vertex, self.window, "window")?;
        let (sw, sh) = self.require(vertex, self.stride, "stride")?;
        let (pw, ph) = self.require(vertex, self.padding, "padding")?;
        let w = spatial_axis(vertex, "width", dims.w, fw, pw, sw, rounding)?;
        let h = spatial_axis(vertex, "height", dims.h, fh, ph, sh, rounding)?;
        let d = match self.kind {
            LayerKind::Convolution => self.require(vertex, self.filters, "filters")?,
            _ => dims.d,
        };
        Ok(Dims::new(w, h, d))
    }

    fn require<T: Copy>(
        &self,
        vertex: VertexId,
        field: Option<T>,
        what: &'static str,
    ) -> Result<T, GraphError> {
        field.ok_or(GraphError::MissingHyperParam {
            vertex,
            kind: self.kind.name(),
            what,
        })
    }

    fn validate(&self, vertex: VertexId) -> Result<(), GraphError> {
        if !self.kind.is_spatial() {
            return Ok(());
        }
        let (fw, fh) = self.require(vertex, self.window, "window")?;
        let (sw, sh) = self.require(vertex, self.stride, "stride")?;
        let (pw, ph) = self.require(vertex, self.padding, "padding")?;
        for (v, what) in [(fw, "window width"), (fh, "window height")] {
            if v == 0 {
                return Err(GraphError::ZeroDim { vertex, what });
            }
        }
        if sw == 0 || sh == 0 {
            return Err(GraphError::ZeroDim {
                vertex,
                what: "stride",
            });
        }
        match self.kind {
            LayerKind::Convolution => {
                let f = self.require(vertex, self.filters, "filters")?;
                if f == 0 {
                    return Err(GraphError::ZeroDim {
                        vertex,
                        what: "filter count",
                    });
                }
            }
            LayerKind::Pooling => {
                self.require(vertex, self.pool, "pool mode")?;
                // A pooling window must see at least one real entry at every
                // placement; padding as wide as the window would leave
                // all-padding windows with no defined max.
                if pw >= fw {
                    return Err(GraphError::PoolPaddingTooLarge {
                        vertex,
                        axis: "width",
                    });
                }
                if ph >= fh {
                    return Err(GraphError::PoolPaddingTooLarge {
                        vertex,
                        axis: "height",
                    });
                }
            }
            _ => {}
        }
        if let Some(d) = self.input_dims {
            if d.w == 0 || d.h == 0 || d.d == 0 {
                return Err(GraphError::ZeroDim {
                    vertex,
                    what: "input dims",
                });
            }
        }
        Ok(())
    }
}

fn spatial_axis(
    vertex: VertexId,
    axis: &'static str,
    input: u32,
    window: u32,
    padding: u32,
    stride: u32,
    rounding: Rounding,
) -> Result<u32, GraphError> {
    let padded = input as i64 + 2 * padding as i64;
    if (window as i64) > padded {
        return Err(GraphError::WindowTooLarge { vertex, axis });
    }
    let span = padded - window as i64;
    if rounding == Rounding::Exact && span % stride as i64 != 0 {
        return Err(GraphError::NonIntegralDims {
            vertex,
            axis,
            input,
            window,
            padding,
            stride,
        });
    }
    Ok((span / stride as i64 + 1) as u32)
}

// ── Graph structure ──────────────────────────────────────────────────────────

/// Validated DAG of layer vertices rooted at the virtual input.
#[derive(Debug, Clone, PartialEq)]
pub struct DnnGraph {
    configs: BTreeMap<VertexId, LayerConfig>,
    links: Vec<(VertexId, VertexId)>,
    preds: BTreeMap<VertexId, Vec<VertexId>>,
    succs: BTreeMap<VertexId, Vec<VertexId>>,
}

/// Longest-distance layering of a graph.
///
/// `delta[v]` is the longest path length from the source to `v`; layer `q`
/// holds exactly the vertices with `delta == q`, sorted by id. Every
/// predecessor of a vertex sits in a strictly earlier layer, so processing
/// layers in order sees fully-assigned inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layering {
    pub layers: Vec<Vec<VertexId>>,
    pub delta: BTreeMap<VertexId, u32>,
}

impl DnnGraph {
    /// Builds and validates a graph. Requirements: vertex 0 exists, has kind
    /// `input` and no incoming links; no other vertex has kind `input`; links
    /// reference known vertices, contain no duplicates or self-loops; the
    /// graph is acyclic and every vertex is reachable from the source.
    pub fn new(
        configs: BTreeMap<VertexId, LayerConfig>,
        mut links: Vec<(VertexId, VertexId)>,
    ) -> Result<Self, GraphError> {
        if configs.is_empty() {
            return Err(GraphError::Empty);
        }
        let source_cfg = configs.get(&SOURCE).ok_or(GraphError::MissingSource)?;
        if source_cfg.kind != LayerKind::Input {
            return Err(GraphError::SourceKind(source_cfg.kind.name()));
        }
        for (&v, cfg) in &configs {
            if v != SOURCE && cfg.kind == LayerKind::Input {
                return Err(GraphError::StrayInput(v));
            }
            cfg.validate(v)?;
        }

        links.sort_unstable();
        let mut seen = BTreeSet::new();
        for &(a, b) in &links {
            if !configs.contains_key(&a) || !configs.contains_key(&b) {
                return Err(GraphError::UnknownVertex(a, b));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if b == SOURCE {
                return Err(GraphError::LinkIntoSource(a, b));
            }
            if !seen.insert((a, b)) {
                return Err(GraphError::DuplicateLink(a, b));
            }
        }

        let mut preds: BTreeMap<VertexId, Vec<VertexId>> =
            configs.keys().map(|&v| (v, Vec::new())).collect();
        let mut succs = preds.clone();
        for &(a, b) in &links {
            succs.get_mut(&a).unwrap().push(b);
            preds.get_mut(&b).unwrap().push(a);
        }

        let g = DnnGraph {
            configs,
            links,
            preds,
            succs,
        };
        // Cycle + reachability checks double as the longest-distance pass.
        g.longest_distances()?;
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.configs.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.configs.keys().copied()
    }

    pub fn links(&self) -> &[(VertexId, VertexId)] {
        &self.links
    }

    pub fn config(&self, v: VertexId) -> &LayerConfig {
        &self.configs[&v]
    }

    pub fn configs(&self) -> &BTreeMap<VertexId, LayerConfig> {
        &self.configs
    }

    /// Direct predecessors of `v`, ascending by id. The source has none.
    pub fn direct_predecessors(&self, v: VertexId) -> &[VertexId] {
        &self.preds[&v]
    }

    /// Direct successors of `v`, ascending by id.
    pub fn direct_successors(&self, v: VertexId) -> &[VertexId] {
        &self.succs[&v]
    }

    /// Longest distance from the source to every vertex, in one
    /// indegree-queue pass over the links (O(|V| + |L|)).
    pub fn longest_distances(&self) -> Result<BTreeMap<VertexId, u32>, GraphError> {
        let mut indegree: BTreeMap<VertexId, usize> = self
            .preds
            .iter()
            .map(|(&v, p)| (v, p.len()))
            .collect();
        let mut delta: BTreeMap<VertexId, u32> = BTreeMap::new();
        let mut queue: VecDeque<VertexId> = VecDeque::new();
        for (&v, &deg) in &indegree {
            if deg == 0 {
                if v != SOURCE {
                    return Err(GraphError::Unreachable(v));
                }
                queue.push_back(v);
                delta.insert(v, 0);
            }
        }
        if queue.is_empty() {
            // Source exists but has incoming links removed elsewhere; the
            // constructor already rejects links into the source, so an empty
            // queue means a cycle swallowed everything.
            return Err(GraphError::Cycle(SOURCE));
        }
        while let Some(v) = queue.pop_front() {
            let dv = delta[&v];
            for &s in &self.succs[&v] {
                let ds = delta.entry(s).or_insert(0);
                *ds = (*ds).max(dv + 1);
                let deg = indegree.get_mut(&s).unwrap();
                *deg -= 1;
                if *deg == 0 {
                    queue.push_back(s);
                }
            }
        }
        if delta.len() != self.configs.len() {
            let stuck = self
                .configs
                .keys()
                .find(|v| !delta.contains_key(v) || indegree[v] > 0)
                .copied()
                .unwrap_or(SOURCE);
            return Err(GraphError::Cycle(stuck));
        }
        if let Some((&v, _)) = indegree.iter().find(|&(_, &d)| d > 0) {
            return Err(GraphError::Cycle(v));
        }
        Ok(delta)
    }

    /// Groups vertices into layers by longest distance. Layer count is
    /// `max delta + 1`; layer 0 is always the singleton source.
    pub fn layering(&self) -> Result<Layering, GraphError> {
        let delta = self.longest_distances()?;
        let depth = *delta.values().max().unwrap() as usize;
        let mut layers = vec![Vec::new(); depth + 1];
        for (&v, &d) in &delta {
            layers[d as usize].push(v);
        }
        // BTreeMap iteration is ascending, so each layer is already sorted.
        Ok(Layering { layers, delta })
    }

    /// Same-layer vertices whose (non-empty) predecessor set is a strict
    /// subset of `v`'s. `scope` must be one layer of a layering; the result
    /// is ascending by id and never contains `v` itself.
    pub fn subset_input_siblings(&self, v: VertexId, scope: &[VertexId]) -> Vec<VertexId> {
        let vp: BTreeSet<VertexId> = self.preds[&v].iter().copied().collect();
        scope
            .iter()
            .copied()
            .filter(|&u| u != v)
            .filter(|&u| {
                let up = &self.preds[&u];
                !up.is_empty()
                    && up.len() < vp.len()
                    && up.iter().all(|p| vp.contains(p))
            })
            .collect()
    }

    /// Checks spatial consistency along every convolution/pooling link and
    /// fills input dims that are derivable from the producing layer.
    ///
    /// For a link `u -> v` where both configs are spatial, `v`'s input dims
    /// must equal `u`'s output dims; missing dims are filled in, declared
    /// ones are checked. Element counts are re-derived from settled dims
    /// (checked when already declared non-zero). Idempotent.
    pub fn infer_shapes(mut self, rounding: Rounding) -> Result<Self, GraphError> {
        let delta = self.longest_distances()?;
        let mut order: Vec<VertexId> = self.configs.keys().copied().collect();
        order.sort_by_key(|v| (delta[v], *v));

        for &v in &order {
            if !self.configs[&v].kind.is_spatial() {
                continue;
            }
            for &u in &self.preds[&v].clone() {
                if !self.configs[&u].kind.is_spatial() {
                    continue;
                }
                let derived = self.configs[&u].output_dims(u, rounding)?;
                let cfg = self.configs.get_mut(&v).unwrap();
                match cfg.input_dims {
                    None => cfg.input_dims = Some(derived),
                    Some(declared) if declared != derived => {
                        return Err(GraphError::ShapeContradiction {
                            upstream: u,
                            downstream: v,
                            declared: declared.tuple(),
                            derived: derived.tuple(),
                        });
                    }
                    Some(_) => {}
                }
            }
            let cfg = &self.configs[&v];
            let dims = cfg.input_dims.ok_or(GraphError::MissingHyperParam {
                vertex: v,
                kind: cfg.kind.name(),
                what: "input_dims",
            })?;
            let out = cfg.output_dims(v, rounding)?;
            for (field, expected, actual) in [
                ("input_elements", dims.elements(), cfg.input_elements),
                ("output_elements", out.elements(), cfg.output_elements),
            ] {
                if actual == 0 {
                    let cfg = self.configs.get_mut(&v).unwrap();
                    match field {
                        "input_elements" => cfg.input_elements = expected,
                        _ => cfg.output_elements = expected,
                    }
                } else if actual != expected {
                    return Err(GraphError::ElementCountMismatch {
                        vertex: v,
                        field,
                        expected,
                        actual,
                    });
                }
            }
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn graph(specs: &[(VertexId, LayerConfig)], links: &[(VertexId, VertexId)]) -> DnnGraph {
        DnnGraph::new(specs.iter().cloned().collect(), links.to_vec()).unwrap()
    }

    fn counts_cfg() -> LayerConfig {
        LayerConfig::counts(LayerKind::Activation, 16, 16)
    }

    fn chain(n: u32) -> DnnGraph {
        let mut specs = vec![(SOURCE, LayerConfig::input(64))];
        let mut links = Vec::new();
        for v in 1..=n {
            specs.push((v, counts_cfg()));
            links.push((v - 1, v));
        }
        graph(&specs, &links)
    }

    #[test]
    fn chain_distances_count_up() {
        let g = chain(4);
        let d = g.longest_distances().unwrap();
        for v in 0..=4 {
            assert_eq!(d[&v], v);
        }
    }

    #[test]
    fn skip_link_takes_longest_route() {
        // 0 -> 1 -> 2 -> 3 with a shortcut 1 -> 3: delta(3) must be 3.
        let mut specs = vec![(SOURCE, LayerConfig::input(64))];
        for v in 1..=3 {
            specs.push((v, counts_cfg()));
        }
        let g = graph(&specs, &[(0, 1), (1, 2), (2, 3), (1, 3)]);
        let d = g.longest_distances().unwrap();
        assert_eq!(d[&3], 3);
        assert_eq!(d[&2], 2);
    }

    #[test]
    fn grid_module_layering_matches_figure() {
        let g = synth::grid_module_graph();
        let l = g.layering().unwrap();
        let expect: Vec<Vec<VertexId>> = vec![
            vec![0],
            vec![1],
            vec![2, 3, 4, 5],
            vec![6, 7, 8, 9],
            vec![10],
            vec![11, 12],
            vec![13],
        ];
        assert_eq!(l.layers, expect);
        assert_eq!(l.layers.len(), 7);
        assert_eq!(l.delta[&10], 4);
    }

    #[test]
    fn single_vertex_graph_layering() {
        let g = graph(&[(SOURCE, LayerConfig::input(8))], &[]);
        let l = g.layering().unwrap();
        assert_eq!(l.layers, vec![vec![SOURCE]]);
    }

    #[test]
    fn cycle_is_rejected() {
        let specs: BTreeMap<_, _> = [
            (SOURCE, LayerConfig::input(8)),
            (1, counts_cfg()),
            (2, counts_cfg()),
        ]
        .into_iter()
        .collect();
        let err = DnnGraph::new(specs, vec![(0, 1), (1, 2), (2, 1)]);
        assert!(matches!(err, Err(GraphError::DuplicateLink(..)) | Err(GraphError::Cycle(_))));
        let specs: BTreeMap<_, _> = [
            (SOURCE, LayerConfig::input(8)),
            (1, counts_cfg()),
            (2, counts_cfg()),
            (3, counts_cfg()),
        ]
        .into_iter()
        .collect();
        let err = DnnGraph::new(specs, vec![(0, 1), (1, 2), (2, 3), (3, 2)]);
        assert!(matches!(err, Err(GraphError::Cycle(_))));
    }

    #[test]
    fn unreachable_vertex_is_rejected() {
        let specs: BTreeMap<_, _> = [
            (SOURCE, LayerConfig::input(8)),
            (1, counts_cfg()),
            (2, counts_cfg()),
        ]
        .into_iter()
        .collect();
        let err = DnnGraph::new(specs, vec![(0, 1)]);
        assert!(matches!(err, Err(GraphError::Unreachable(2))));
    }

    #[test]
    fn source_has_no_predecessors() {
        let g = synth::grid_module_graph();
        assert!(g.direct_predecessors(SOURCE).is_empty());
        let err = DnnGraph::new(
            [(SOURCE, LayerConfig::input(8)), (1, counts_cfg())]
                .into_iter()
                .collect(),
            vec![(0, 1), (1, 0)],
        );
        assert!(matches!(err, Err(GraphError::LinkIntoSource(1, 0))));
    }

    #[test]
    fn fan_in_predecessors_sorted() {
        let g = synth::subset_sibling_graph();
        assert_eq!(g.direct_predecessors(5), &[1, 2, 3, 4]);
    }

    #[test]
    fn subset_siblings_on_shared_fan_in() {
        // v6's inputs {2,3} sit strictly inside v5's {1,2,3,4}; v7 pulls from
        // the source directly, which v5 does not, so it is not a sibling.
        let g = synth::subset_sibling_graph();
        let layers = g.layering().unwrap().layers;
        let scope = &layers[2];
        assert_eq!(scope, &[5, 6, 7]);
        assert_eq!(g.subset_input_siblings(5, scope), vec![6]);
        assert!(g.subset_input_siblings(6, scope).is_empty());
        assert!(g.subset_input_siblings(7, scope).is_empty());
    }

    #[test]
    fn equal_predecessor_sets_are_not_subsets() {
        let mut specs = vec![(SOURCE, LayerConfig::input(8))];
        for v in 1..=4 {
            specs.push((v, counts_cfg()));
        }
        let g = graph(&specs, &[(0, 1), (0, 2), (1, 3), (2, 3), (1, 4), (2, 4)]);
        let layers = g.layering().unwrap().layers;
        assert_eq!(layers[2], vec![3, 4]);
        assert!(g.subset_input_siblings(3, &layers[2]).is_empty());
        assert!(g.subset_input_siblings(4, &layers[2]).is_empty());
    }

    #[test]
    fn singleton_layer_has_no_siblings() {
        let g = chain(2);
        let layers = g.layering().unwrap().layers;
        assert!(g.subset_input_siblings(1, &layers[1]).is_empty());
    }

    #[test]
    fn output_dims_follow_spatial_law() {
        let c = LayerConfig::conv(Dims::new(2, 2, 3), (3, 3), 4, (1, 1), (1, 1));
        assert_eq!(c.output_dims(1, Rounding::Exact).unwrap(), Dims::new(2, 2, 4));
        let c = LayerConfig::conv(Dims::new(6, 6, 2), (3, 3), 2, (1, 1), (1, 1));
        assert_eq!(c.output_dims(1, Rounding::Exact).unwrap(), Dims::new(6, 6, 2));
        let p = LayerConfig::pool(Dims::new(4, 4, 5), PoolMode::Max, (2, 2), (2, 2), (0, 0));
        assert_eq!(p.output_dims(1, Rounding::Exact).unwrap(), Dims::new(2, 2, 5));
    }

    #[test]
    fn non_integral_dims_need_floor_mode() {
        // 224x224 input, 11x11 window, stride 4, padding 2: (224-11+4)/4 is
        // not integral; floor mode truncates to 54+1.
        let c = LayerConfig::conv(Dims::new(224, 224, 3), (11, 11), 64, (4, 4), (2, 2));
        assert!(matches!(
            c.output_dims(1, Rounding::Exact),
            Err(GraphError::NonIntegralDims { axis: "width", .. })
        ));
        assert_eq!(
            c.output_dims(1, Rounding::Floor).unwrap(),
            Dims::new(55, 55, 64)
        );
    }

    #[test]
    fn shape_inference_fills_chain_dims() {
        let mut conv2 = LayerConfig::conv(Dims::new(0, 0, 0), (3, 3), 2, (1, 1), (1, 1));
        conv2.input_dims = None;
        conv2.input_elements = 0;
        let specs: BTreeMap<_, _> = [
            (SOURCE, LayerConfig::input(64)),
            (
                1,
                LayerConfig::conv(Dims::new(6, 6, 3), (3, 3), 5, (1, 1), (1, 1)),
            ),
            (2, conv2),
        ]
        .into_iter()
        .collect();
        let g = DnnGraph::new(specs, vec![(0, 1), (1, 2)]).unwrap();
        let g = g.infer_shapes(Rounding::Exact).unwrap();
        assert_eq!(g.config(2).input_dims, Some(Dims::new(6, 6, 5)));
        assert_eq!(g.config(2).input_elements, 6 * 6 * 5);
        assert_eq!(g.config(1).output_elements, 6 * 6 * 5);
    }

    #[test]
    fn shape_inference_rejects_contradiction() {
        let specs: BTreeMap<_, _> = [
            (SOURCE, LayerConfig::input(64)),
            (
                1,
                LayerConfig::conv(Dims::new(6, 6, 3), (3, 3), 5, (1, 1), (1, 1)),
            ),
            (
                2,
                LayerConfig::conv(Dims::new(4, 4, 5), (3, 3), 2, (1, 1), (1, 1)),
            ),
        ]
        .into_iter()
        .collect();
        let g = DnnGraph::new(specs, vec![(0, 1), (1, 2)]).unwrap();
        assert!(matches!(
            g.infer_shapes(Rounding::Exact),
            Err(GraphError::ShapeContradiction {
                upstream: 1,
                downstream: 2,
                ..
            })
        ));
    }

    #[test]
    fn shape_inference_is_idempotent() {
        let g = synth::grid_module_graph();
        let once = g.clone().infer_shapes(Rounding::Exact).unwrap();
        let twice = once.clone().infer_shapes(Rounding::Exact).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn layering_matches_exhaustive_path_oracle() {
        let mut rng = synth::rng(11);
        for _ in 0..50 {
            let g = synth::random_dag(&mut rng, 10);
            let delta = g.longest_distances().unwrap();
            for v in g.vertices() {
                assert_eq!(delta[&v], synth::longest_path_by_enumeration(&g, v));
            }
        }
    }
}
