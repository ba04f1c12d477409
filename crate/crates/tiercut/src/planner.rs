//! Tier assignment: which vertex of a weighted graph runs on which tier.
//!
//! The planner walks the graph layer by layer (longest-distance order) and
//! greedily picks a tier per vertex. A valid assignment never moves work
//! back toward the device: a vertex may run no earlier than the earliest
//! tier among its direct predecessors, and the virtual input is pinned to
//! the device. Within that envelope, a vertex that shrinks its data or has
//! no successors takes the cheapest tier outright; a vertex that grows its
//! data looks one hop ahead, pricing itself together with its heaviest
//! direct successor, because the larger payload it emits makes the next
//! transfer the dominant term.
//!
//! Cost accounting is latency with transfer deduplication: shipping a
//! vertex's output to a tier is billed once per destination tier no matter
//! how many consumers read it there. All selection rules, the end-to-end
//! total, the exhaustive oracle, and the incremental re-planner share that
//! one accounting, so their numbers are directly comparable.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DnnGraph, GraphError, VertexId, SOURCE};
use crate::latency::{Tier, WeightedGraph};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("vertex {0} has no tier assigned")]
    Incomplete(VertexId),
    #[error("assignment names vertex {0}, which is not in the graph")]
    UnknownVertex(VertexId),
    #[error("the virtual input must stay on the device, found it on {0}")]
    SourceMoved(Tier),
    #[error("vertex {vertex} runs on {tier}, earlier than its earliest predecessor tier {bound}")]
    OrderViolation {
        vertex: VertexId,
        tier: Tier,
        bound: Tier,
    },
    #[error("exhaustive search is capped at {limit} vertices, graph has {vertices}")]
    TooLarge { vertices: usize, limit: usize },
    #[error("threshold band [{lower}, {upper}] must be finite, positive, and surround 1")]
    BadThreshold { lower: f64, upper: f64 },
    #[error("the two weighted graphs describe different topologies")]
    GraphMismatch,
}

// ── Plans ────────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    /// Restrict a vertex to tiers no earlier than its *latest* predecessor
    /// tier instead of its earliest. Narrower search, same validity rule.
    pub strict_order: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Planned from scratch.
    Full,
    /// Produced by re-deciding a subset of an existing plan.
    Incremental,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub assignment: BTreeMap<VertexId, Tier>,
    pub theta_seconds: f64,
    pub provenance: Provenance,
}

impl PartitionPlan {
    pub fn tier(&self, v: VertexId) -> Tier {
        self.assignment[&v]
    }
}

/// How a vertex's tier was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum Decision {
    /// Only one tier was admissible.
    Forced,
    /// Cheapest own-stage latency among admissible tiers.
    DirectCost,
    /// Joint cost with the heaviest direct successor.
    Lookahead { successor: VertexId },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub tier: Tier,
    pub decision: Decision,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub vertex: VertexId,
    #[serde(flatten)]
    pub selection: Selection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiblingMove {
    pub vertex: VertexId,
    pub from: Tier,
    pub to: Tier,
    /// The sibling whose tier `vertex` adopted.
    pub toward: VertexId,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanTrace {
    pub selections: Vec<SelectionRecord>,
    pub sibling_moves: Vec<SiblingMove>,
}

// ── Selection rules ──────────────────────────────────────────────────────────

/// Tiers a vertex may run on given its predecessors' tiers: everything at
/// or after the earliest predecessor tier (the latest, under `strict`).
/// A vertex with no predecessors is the virtual input and stays on the
/// device.
pub fn potential_tiers(pred_tiers: &[Tier], strict: bool) -> Vec<Tier> {
    let Some(bound) = pred_tiers
        .iter()
        .map(|t| t.rank())
        .reduce(|a, b| if strict { a.max(b) } else { a.min(b) })
    else {
        return vec![Tier::Device];
    };
    Tier::ALL
        .iter()
        .copied()
        .filter(|t| t.rank() >= bound)
        .collect()
}

/// True if some already-assigned consumer of `h` other than `excluding`
/// runs on `to`, meaning `h`'s output has already been billed for that
/// destination.
fn transfer_paid(
    g: &DnnGraph,
    assignment: &BTreeMap<VertexId, Tier>,
    h: VertexId,
    to: Tier,
    excluding: VertexId,
) -> bool {
    g.direct_successors(h)
        .iter()
        .any(|&j| j != excluding && assignment.get(&j) == Some(&to))
}

/// Latency `v` adds to a partial plan by running on `tier`: its own
/// processing time plus the transfers of whichever predecessor outputs
/// have not yet been shipped to `tier`.
///
/// Every predecessor of `v` must already be assigned.
pub fn candidate_latency(
    wg: &WeightedGraph,
    v: VertexId,
    tier: Tier,
    assignment: &BTreeMap<VertexId, Tier>,
) -> f64 {
    let g = wg.graph();
    let mut total = wg.time(v, tier);
    for &h in g.direct_predecessors(v) {
        let lh = *assignment
            .get(&h)
            .unwrap_or_else(|| panic!("predecessor {h} of {v} is unassigned"));
        if lh == tier || transfer_paid(g, assignment, h, tier, v) {
            continue;
        }
        total += wg.transfer(h, lh, tier);
    }
    total
}

/// Joint selection for a vertex whose output outweighs its input: price
/// every admissible pair of (own tier, successor tier at or after it) and
/// keep the own-tier of the cheapest pair. Ties go to the earliest tier
/// because replacement requires a strict improvement.
fn lookahead_select(
    wg: &WeightedGraph,
    v: VertexId,
    succ: VertexId,
    assignment: &BTreeMap<VertexId, Tier>,
    tiers: &[Tier],
) -> (Tier, f64) {
    let mut best: Option<(f64, Tier)> = None;
    for &vt in tiers {
        let own = candidate_latency(wg, v, vt, assignment);
        for st in Tier::ALL.iter().filter(|s| s.rank() >= vt.rank()) {
            let total = own + wg.time(succ, *st) + wg.transfer(v, vt, *st);
            if best.is_none_or(|(b, _)| total < b) {
                best = Some((total, vt));
            }
        }
    }
    let (cost, tier) = best.expect("at least one admissible tier");
    (tier, cost)
}

/// Decides one vertex against a partial plan covering all its
/// predecessors.
///
/// A vertex whose input outweighs its output, or that has no successors,
/// takes the cheapest admissible tier by its own added latency. Otherwise
/// its output is the bigger payload, so the choice is made jointly with
/// its heaviest direct successor (largest edge-tier time, ties to the
/// lower id).
pub fn select_optimal_tier(
    wg: &WeightedGraph,
    v: VertexId,
    assignment: &BTreeMap<VertexId, Tier>,
    opts: PlanOptions,
) -> Selection {
    let g = wg.graph();
    let pred_tiers: Vec<Tier> = g
        .direct_predecessors(v)
        .iter()
        .map(|h| assignment[h])
        .collect();
    let tiers = potential_tiers(&pred_tiers, opts.strict_order);
    if tiers.len() == 1 {
        return Selection {
            tier: tiers[0],
            decision: Decision::Forced,
            cost: candidate_latency(wg, v, tiers[0], assignment),
        };
    }

    let cfg = g.config(v);
    let succs = g.direct_successors(v);
    if cfg.input_bytes() > cfg.output_bytes() || succs.is_empty() {
        let mut best = (f64::INFINITY, tiers[0]);
        for &t in &tiers {
            let c = candidate_latency(wg, v, t, assignment);
            if c < best.0 {
                best = (c, t);
            }
        }
        return Selection {
            tier: best.1,
            decision: Decision::DirectCost,
            cost: best.0,
        };
    }

    let mut succ = succs[0];
    for &s in &succs[1..] {
        if wg.time(s, Tier::Edge) > wg.time(succ, Tier::Edge) {
            succ = s;
        }
    }
    let (tier, cost) = lookahead_select(wg, v, succ, assignment, &tiers);
    Selection {
        tier,
        decision: Decision::Lookahead { successor: succ },
        cost,
    }
}

/// Drags subset-input siblings along within one layer: if `u`'s inputs are
/// a strict subset of sibling `v`'s and `u` sits on an earlier tier, `u`
/// adopts `v`'s tier (its inputs are already being shipped there for `v`,
/// so the move costs no new transfers mid-plan). Repeats until stable.
pub fn sibling_update(
    layer: &[VertexId],
    assignment: &mut BTreeMap<VertexId, Tier>,
    g: &DnnGraph,
) -> Vec<SiblingMove> {
    let mut moves = Vec::new();
    loop {
        let mut changed = false;
        for &v in layer {
            let lv = assignment[&v];
            for u in g.subset_input_siblings(v, layer) {
                let lu = assignment[&u];
                if lu.rank() < lv.rank() {
                    assignment.insert(u, lv);
                    moves.push(SiblingMove {
                        vertex: u,
                        from: lu,
                        to: lv,
                        toward: v,
                    });
                    changed = true;
                }
            }
        }
        if !changed {
            return moves;
        }
    }
}

// ── Whole-graph planning ─────────────────────────────────────────────────────

pub fn plan(wg: &WeightedGraph, opts: PlanOptions) -> Result<PartitionPlan, PlanError> {
    Ok(plan_traced(wg, opts)?.0)
}

/// Plans layer by layer and reports every decision made along the way.
pub fn plan_traced(
    wg: &WeightedGraph,
    opts: PlanOptions,
) -> Result<(PartitionPlan, PlanTrace), PlanError> {
    let layering = wg.graph().layering()?;
    let mut assignment: BTreeMap<VertexId, Tier> = BTreeMap::new();
    let mut trace = PlanTrace::default();
    for layer in &layering.layers {
        for &v in layer {
            let selection = select_optimal_tier(wg, v, &assignment, opts);
            assignment.insert(v, selection.tier);
            trace.selections.push(SelectionRecord { vertex: v, selection });
        }
        trace
            .sibling_moves
            .extend(sibling_update(layer, &mut assignment, wg.graph()));
    }
    let theta_seconds = total_latency(wg, &assignment)?;
    Ok((
        PartitionPlan {
            assignment,
            theta_seconds,
            provenance: Provenance::Full,
        },
        trace,
    ))
}

/// Latency of the assigned portion of the graph: processing times plus
/// deduplicated transfers (one billing per vertex output per destination
/// tier with at least one assigned consumer there). Terms accumulate in
/// ascending vertex order, so equal inputs give bit-equal totals.
pub fn prefix_latency(wg: &WeightedGraph, assignment: &BTreeMap<VertexId, Tier>) -> f64 {
    let g = wg.graph();
    let mut total = 0.0;
    for (&v, &t) in assignment {
        total += wg.time(v, t);
    }
    for (&h, &lh) in assignment {
        for &to in &Tier::ALL {
            if to == lh {
                continue;
            }
            let shipped = g
                .direct_successors(h)
                .iter()
                .any(|j| assignment.get(j) == Some(&to));
            if shipped {
                total += wg.transfer(h, lh, to);
            }
        }
    }
    total
}

/// End-to-end latency of a complete assignment.
pub fn total_latency(
    wg: &WeightedGraph,
    assignment: &BTreeMap<VertexId, Tier>,
) -> Result<f64, PlanError> {
    let g = wg.graph();
    for v in g.vertices() {
        if !assignment.contains_key(&v) {
            return Err(PlanError::Incomplete(v));
        }
    }
    for &v in assignment.keys() {
        if !g.configs().contains_key(&v) {
            return Err(PlanError::UnknownVertex(v));
        }
    }
    Ok(prefix_latency(wg, assignment))
}

/// Checks the ordering invariant: the input on the device, and every
/// vertex no earlier than its earliest predecessor tier.
pub fn validate_assignment(
    g: &DnnGraph,
    assignment: &BTreeMap<VertexId, Tier>,
) -> Result<(), PlanError> {
    for v in g.vertices() {
        if !assignment.contains_key(&v) {
            return Err(PlanError::Incomplete(v));
        }
    }
    for &v in assignment.keys() {
        if !g.configs().contains_key(&v) {
            return Err(PlanError::UnknownVertex(v));
        }
    }
    if assignment[&SOURCE] != Tier::Device {
        return Err(PlanError::SourceMoved(assignment[&SOURCE]));
    }
    for v in g.vertices() {
        let preds = g.direct_predecessors(v);
        if preds.is_empty() {
            continue;
        }
        let bound = preds.iter().map(|h| assignment[h].rank()).min().unwrap();
        if assignment[&v].rank() < bound {
            return Err(PlanError::OrderViolation {
                vertex: v,
                tier: assignment[&v],
                bound: Tier::from_rank(bound),
            });
        }
    }
    Ok(())
}

// ── Exhaustive oracle ────────────────────────────────────────────────────────

/// Largest graph [`brute_force_optimal`] will search.
pub const EXHAUSTIVE_LIMIT: usize = 16;

/// The true optimum over every valid assignment, by branch-and-bound
/// enumeration in layer order. Among equally cheap optima it returns the
/// one that places vertices earliest (device before edge before cloud,
/// in vertex order). The reported total is priced by [`total_latency`]'s
/// accumulation order and is less than or equal to the canonical total of
/// every valid assignment — including any other planner's output — with no
/// rounding slack. Exponential; guarded by [`EXHAUSTIVE_LIMIT`].
pub fn brute_force_optimal(
    wg: &WeightedGraph,
    opts: PlanOptions,
) -> Result<PartitionPlan, PlanError> {
    let g = wg.graph();
    let n = g.vertex_count();
    if n > EXHAUSTIVE_LIMIT {
        return Err(PlanError::TooLarge {
            vertices: n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let layering = g.layering()?;
    let order: Vec<VertexId> = layering.layers.iter().flatten().copied().collect();

    struct Search<'a> {
        wg: &'a WeightedGraph,
        order: &'a [VertexId],
        opts: PlanOptions,
        assignment: BTreeMap<VertexId, Tier>,
        // Prefix cost per depth; kept as a stack rather than one running
        // float so backtracking cannot accumulate rounding drift.
        cost: Vec<f64>,
        // Best total so far, measured by the same accumulation order
        // [`total_latency`] uses — so comparisons against totals computed
        // elsewhere need no tolerance.
        best_cost: f64,
        best: Option<BTreeMap<VertexId, Tier>>,
    }

    impl Search<'_> {
        fn dfs(&mut self, depth: usize) {
            if depth == self.order.len() {
                // Leaves are priced canonically. The running stack cost sums
                // the same addends in a different order, so it can disagree
                // with the canonical total by a few ulps; judging leaves by
                // the canonical number removes that discrepancy from the
                // result. Strict improvement only: the first-found optimum,
                // which is the earliest-tier one, survives ties.
                let total = total_latency(self.wg, &self.assignment)
                    .expect("search assignments are complete by construction");
                if total < self.best_cost {
                    self.best_cost = total;
                    self.best = Some(self.assignment.clone());
                }
                return;
            }
            let v = self.order[depth];
            let g = self.wg.graph();
            let pred_tiers: Vec<Tier> = g
                .direct_predecessors(v)
                .iter()
                .map(|h| self.assignment[h])
                .collect();
            for t in potential_tiers(&pred_tiers, self.opts.strict_order) {
                let added = candidate_latency(self.wg, v, t, &self.assignment);
                let cost = self.cost[depth] + added;
                // Prune on the stack cost, padded by a guard band that
                // dominates the worst-case rounding gap between the two
                // accumulation orders (~1e-14 relative for these sizes). A
                // pruned subtree therefore contains no leaf whose canonical
                // total beats the canonical best, so the returned optimum is
                // a true lower bound on every valid assignment's canonical
                // total — exactly, not just up to rounding.
                if cost >= self.best_cost + 1e-12 * (1.0 + self.best_cost) {
                    continue;
                }
                self.assignment.insert(v, t);
                self.cost[depth + 1] = cost;
                self.dfs(depth + 1);
                self.assignment.remove(&v);
            }
        }
    }

    let mut search = Search {
        wg,
        order: &order,
        opts,
        assignment: BTreeMap::new(),
        cost: vec![0.0; n + 1],
        best_cost: f64::INFINITY,
        best: None,
    };
    search.dfs(0);
    let assignment = search.best.expect("the all-device assignment is always valid");
    Ok(PartitionPlan {
        assignment,
        theta_seconds: search.best_cost,
        provenance: Provenance::Full,
    })
}

// ── Incremental re-planning ──────────────────────────────────────────────────

/// Multiplicative band around 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self, PlanError> {
        let b = Bounds { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let ok = self.lower.is_finite()
            && self.upper.is_finite()
            && self.lower > 0.0
            && self.lower <= 1.0
            && self.upper >= 1.0;
        if ok {
            Ok(())
        } else {
            Err(PlanError::BadThreshold {
                lower: self.lower,
                upper: self.upper,
            })
        }
    }

    /// Whether `new` amounts to a within-band drift of `old`. A value that
    /// appears or disappears (zero on one side only) is out of band.
    pub fn within(&self, old: f64, new: f64) -> bool {
        if old == new {
            return true;
        }
        if old == 0.0 {
            return false;
        }
        let r = new / old;
        r >= self.lower && r <= self.upper
    }
}

/// Deviation bands below which a measurement change does not trigger
/// re-planning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub vertex_time: Bounds,
    pub bandwidth: Bounds,
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), PlanError> {
        self.vertex_time.validate()?;
        self.bandwidth.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "outcome")]
pub enum IncrementalOutcome {
    /// Every drift stayed inside its band; the assignment was kept.
    WithinThreshold,
    /// The listed vertices were re-decided; `repaired` were then bumped
    /// to later tiers to restore the ordering invariant.
    Replanned {
        recomputed: BTreeSet<VertexId>,
        repaired: Vec<VertexId>,
    },
}

/// Vertices whose pricing changed between two weightings of the same
/// graph. A bandwidth change touches every priced link, so it marks every
/// vertex incident to one.
pub fn changed_vertices(wg_old: &WeightedGraph, wg_new: &WeightedGraph) -> BTreeSet<VertexId> {
    let g = wg_old.graph();
    let mut out = BTreeSet::new();
    for v in g.vertices() {
        if wg_old.times(v) != wg_new.times(v) {
            out.insert(v);
        }
    }
    if wg_old.bandwidth() != wg_new.bandwidth() {
        for v in g.vertices() {
            if !g.direct_predecessors(v).is_empty() || !g.direct_successors(v).is_empty() {
                out.insert(v);
            }
        }
    }
    out
}

/// The vertices worth re-deciding when `changed` vertices moved: the
/// changed vertices themselves, their subset-input siblings (who may want
/// to follow them), their direct successors (whose transfer-in prices
/// changed), and those successors' subset-input siblings. The virtual
/// input is never re-decided.
pub fn incremental_recompute_set(
    g: &DnnGraph,
    changed: &BTreeSet<VertexId>,
) -> Result<BTreeSet<VertexId>, PlanError> {
    let layering = g.layering()?;
    let scope = |v: VertexId| &layering.layers[layering.delta[&v] as usize];
    let mut set = BTreeSet::new();
    let add_with_siblings = |v: VertexId, set: &mut BTreeSet<VertexId>| {
        set.insert(v);
        for u in g.subset_input_siblings(v, scope(v)) {
            set.insert(u);
        }
    };
    for &c in changed {
        add_with_siblings(c, &mut set);
        for &s in g.direct_successors(c) {
            add_with_siblings(s, &mut set);
        }
    }
    set.remove(&SOURCE);
    Ok(set)
}

fn all_within_thresholds(
    wg_old: &WeightedGraph,
    wg_new: &WeightedGraph,
    th: &Thresholds,
) -> bool {
    for v in wg_old.graph().vertices() {
        let old = wg_old.times(v);
        let new = wg_new.times(v);
        for i in 0..3 {
            if !th.vertex_time.within(old[i], new[i]) {
                return false;
            }
        }
    }
    let (a, b) = (wg_old.bandwidth(), wg_new.bandwidth());
    th.bandwidth.within(a.sigma_de_bps, b.sigma_de_bps)
        && th.bandwidth.within(a.sigma_ec_bps, b.sigma_ec_bps)
        && th.bandwidth.within(a.sigma_dc_bps, b.sigma_dc_bps)
}

/// Adjusts an existing plan to re-measured weights without planning from
/// scratch.
///
/// If every change sits inside the threshold bands the assignment is kept
/// as is (its latency is re-priced under the new weights). Otherwise the
/// affected vertices are re-decided one by one in layer order against the
/// current assignment, and a final sweep bumps any vertex left earlier
/// than its earliest predecessor to that predecessor's tier, which keeps
/// the result valid even where the re-decided region borders untouched
/// vertices.
pub fn incremental_update(
    previous: &PartitionPlan,
    wg_old: &WeightedGraph,
    wg_new: &WeightedGraph,
    thresholds: &Thresholds,
    opts: PlanOptions,
) -> Result<(PartitionPlan, IncrementalOutcome), PlanError> {
    thresholds.validate()?;
    if wg_old.graph().links() != wg_new.graph().links()
        || wg_old.graph().vertex_count() != wg_new.graph().vertex_count()
    {
        return Err(PlanError::GraphMismatch);
    }
    let g = wg_new.graph();
    validate_assignment(g, &previous.assignment)?;

    if all_within_thresholds(wg_old, wg_new, thresholds) {
        let theta_seconds = total_latency(wg_new, &previous.assignment)?;
        return Ok((
            PartitionPlan {
                assignment: previous.assignment.clone(),
                theta_seconds,
                provenance: Provenance::Incremental,
            },
            IncrementalOutcome::WithinThreshold,
        ));
    }

    let changed = changed_vertices(wg_old, wg_new);
    let recomputed = incremental_recompute_set(g, &changed)?;
    let layering = g.layering()?;
    let mut assignment = previous.assignment.clone();
    for layer in &layering.layers {
        for &v in layer {
            if recomputed.contains(&v) {
                let selection = select_optimal_tier(wg_new, v, &assignment, opts);
                assignment.insert(v, selection.tier);
            }
        }
    }

    // Validity repair: untouched vertices may now sit earlier than a
    // re-decided predecessor. One pass in layer order settles every
    // vertex after its predecessors.
    let mut repaired = Vec::new();
    for layer in &layering.layers {
        for &v in layer {
            let preds = g.direct_predecessors(v);
            if preds.is_empty() {
                continue;
            }
            let bound = preds.iter().map(|h| assignment[h].rank()).min().unwrap();
            if assignment[&v].rank() < bound {
                assignment.insert(v, Tier::from_rank(bound));
                repaired.push(v);
            }
        }
    }

    let theta_seconds = total_latency(wg_new, &assignment)?;
    Ok((
        PartitionPlan {
            assignment,
            theta_seconds,
            provenance: Provenance::Incremental,
        },
        IncrementalOutcome::Replanned {
            recomputed,
            repaired,
        },
    ))
}
