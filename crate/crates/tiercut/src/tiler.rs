//! Spatial tiling of a convolution stack.
//!
//! To run a stack of spatial layers on several edge nodes in parallel, the
//! stack's final output is split into a grid of non-overlapping tiles, and
//! each tile's required input region is walked backwards through the stack
//! one layer at a time: a tile at a layer's output maps to the union of the
//! receptive fields of its entries at that layer's input. The result is one
//! fused crop per grid cell per layer; crops of neighbouring cells overlap
//! wherever receptive fields do, which is exactly what makes the tiled run
//! reproduce the whole-input run without any synthetic zero padding at
//! interior edges.
//!
//! Coordinates are half-open intervals. Walking a tile backwards first maps
//! it into padded input coordinates (`x̂0 = S·x0`, `x̂1 = S·(x1-1) + F`),
//! then strips the padding; a padded coordinate that covers the whole
//! padded extent snaps to the input width, and everything clamps into
//! `[0, W]` so the result is the exact union of the real (in-bounds)
//! receptive fields. A crop can come out empty when a tile's receptive
//! field lies wholly inside the padding; planning rejects such grids.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Dims, GraphError, LayerConfig, Rounding};

#[derive(Debug, Error)]
pub enum TileError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("stack has no layers")]
    EmptyStack,
    #[error("layer {layer}: kind {kind} is not spatial and not transparent")]
    NotTileable { layer: usize, kind: String },
    #[error("layer {layer}: config declares input dims {declared:?} but the chain produces {expected:?}")]
    ChainMismatch {
        layer: usize,
        declared: (u32, u32, u32),
        expected: (u32, u32, u32),
    },
    #[error("tile {tile:?} exceeds the {w}x{h} output of the layer")]
    TileOutOfBounds { tile: Tile, w: u32, h: u32 },
    #[error("reverse walk needs a non-empty tile, got {0:?}")]
    DegenerateInput(Tile),
    #[error("grid {a}x{b} is finer than the {w}x{h} stack output")]
    GridTooFine { a: u32, b: u32, w: u32, h: u32 },
    #[error("cell ({a},{b}): crop at layer {layer} is empty on the {axis} axis")]
    DegenerateTile {
        a: u32,
        b: u32,
        layer: usize,
        axis: &'static str,
    },
}

/// Half-open spatial region `[x0, x1) x [y0, y1)` of one feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Tile {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        debug_assert!(x0 <= x1 && y0 <= y1);
        Tile { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    /// Empty on at least one axis. Only reverse walks produce these.
    pub fn is_empty(&self) -> bool {
        self.x0 == self.x1 || self.y0 == self.y1
    }

    pub fn contains(&self, other: &Tile) -> bool {
        other.is_empty()
            || (self.x0 <= other.x0
                && self.y0 <= other.y0
                && other.x1 <= self.x1
                && other.y1 <= self.y1)
    }

    fn within(&self, dims: Dims) -> bool {
        self.x1 <= dims.w && self.y1 <= dims.h
    }
}

/// Whether a layer participates in receptive-field arithmetic or just
/// passes coordinates through (elementwise layers).
pub fn is_transparent(cfg: &LayerConfig) -> bool {
    use crate::graph::LayerKind::*;
    matches!(cfg.kind, Activation | BatchNorm)
}

/// Output dims of one spatial layer under the spatial law.
pub fn output_dims(cfg: &LayerConfig, rounding: Rounding) -> Result<Dims, TileError> {
    Ok(cfg.output_dims(0, rounding)?)
}

/// Maps a tile in a spatial layer's output back to the minimal input
/// region that determines it.
///
/// `tile` must be non-empty and inside the layer's output. The result is
/// the in-bounds part of the hull of the tile's windows. Whenever padding
/// is smaller than the window — always true for pooling, and for any
/// convolution whose border outputs see at least one real entry — this is
/// the exact union of the tile entries' real receptive fields. A
/// convolution padded to the window size or beyond can keep boundary
/// entries that no output in the tile actually reads; the result is still
/// a superset of every receptive field, and may be empty when the tile's
/// windows fall entirely into padding.
pub fn reverse_tile(cfg: &LayerConfig, tile: &Tile, rounding: Rounding) -> Result<Tile, TileError> {
    let out = output_dims(cfg, rounding)?;
    if tile.is_empty() {
        return Err(TileError::DegenerateInput(*tile));
    }
    if !tile.within(out) {
        return Err(TileError::TileOutOfBounds {
            tile: *tile,
            w: out.w,
            h: out.h,
        });
    }
    let dims = cfg.input_dims.expect("spatial config validated by output_dims");
    let (fw, fh) = cfg.window.expect("validated");
    let (sw, sh) = cfg.stride.expect("validated");
    let (pw, ph) = cfg.padding.expect("validated");

    let (x0, x1) = reverse_axis(tile.x0, tile.x1, fw, sw, pw, dims.w);
    let (y0, y1) = reverse_axis(tile.y0, tile.y1, fh, sh, ph, dims.h);
    Ok(Tile { x0, y0, x1, y1 })
}

fn reverse_axis(t0: u32, t1: u32, f: u32, s: u32, p: u32, input: u32) -> (u32, u32) {
    let (f, s, p, w) = (f as i64, s as i64, p as i64, input as i64);
    // Padded coordinates of the union of windows for outputs [t0, t1).
    let padded0 = s * t0 as i64;
    let padded1 = s * (t1 as i64 - 1) + f;
    // Strip padding. A window flush against the far padded edge snaps to
    // the input width; everything clamps into [0, W] so the result is the
    // in-bounds part of the union.
    let a = (padded0 - p).clamp(0, w);
    let b = if padded1 == w + 2 * p {
        w
    } else {
        (padded1 - p).clamp(0, w)
    };
    (a as u32, a.max(b).min(w) as u32)
}

/// Fused tile plan: per grid cell, one tile per level.
///
/// Level `i` (1-based, `i <= k`) is the input feature map of stack layer
/// `i`; level `k+1` is the stack output, where the grid cells partition the
/// map exactly. `cells[(a, b)][i - 1]` is the cell's tile at level `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilePlan {
    pub grid: (u32, u32),
    pub configs: Vec<LayerConfig>,
    /// Feature-map dims per level, `levels[i - 1]` for level `i`.
    pub levels: Vec<Dims>,
    pub cells: BTreeMap<(u32, u32), Vec<Tile>>,
}

impl TilePlan {
    pub fn stack_len(&self) -> usize {
        self.configs.len()
    }

    /// Tile of `cell` at `level` (1-based, up to `stack_len() + 1`).
    pub fn tile(&self, cell: (u32, u32), level: usize) -> &Tile {
        &self.cells[&cell][level - 1]
    }

    pub fn output_dims(&self) -> Dims {
        *self.levels.last().unwrap()
    }

    /// The level-1 crop each cell feeds the stack with.
    pub fn crop(&self, cell: (u32, u32)) -> &Tile {
        self.tile(cell, 1)
    }
}

/// Splits `extent` into `parts` contiguous near-equal blocks; the division
/// remainder goes to the highest-index block. Returns half-open bounds.
/// Also used by the tiled executor's fault mode to reconstruct the
/// no-overlap blocks a halo-skipping tiler would hand each cell.
pub(crate) fn split_axis(extent: u32, parts: u32) -> Vec<(u32, u32)> {
    let base = extent / parts;
    let rem = extent % parts;
    let mut out = Vec::with_capacity(parts as usize);
    let mut at = 0;
    for i in 0..parts {
        let len = base + if i == parts - 1 { rem } else { 0 };
        out.push((at, at + len));
        at += len;
    }
    out
}

/// Plans an `a x b` fused tiling of a spatial stack.
///
/// The stack's final output is split into contiguous near-equal tiles
/// (remainder to the highest-index row/column), then each tile is walked
/// backwards through every layer. Transparent layers pass tiles through
/// unchanged. Fails if the grid outnumbers output rows/columns or any
/// walked crop comes out empty, both signs the grid is too fine for the
/// stack's geometry.
pub fn plan_tiles(
    input: Dims,
    configs: &[LayerConfig],
    grid: (u32, u32),
    rounding: Rounding,
) -> Result<TilePlan, TileError> {
    if configs.is_empty() {
        return Err(TileError::EmptyStack);
    }
    let mut levels = vec![input];
    for (idx, cfg) in configs.iter().enumerate() {
        let layer = idx + 1;
        let current = *levels.last().unwrap();
        if is_transparent(cfg) {
            levels.push(current);
            continue;
        }
        if !cfg.kind.is_spatial() {
            return Err(TileError::NotTileable {
                layer,
                kind: cfg.kind.name(),
            });
        }
        match cfg.input_dims {
            Some(d) if d != current => {
                return Err(TileError::ChainMismatch {
                    layer,
                    declared: d.tuple(),
                    expected: current.tuple(),
                });
            }
            _ => {}
        }
        levels.push(output_dims(cfg, rounding)?);
    }

    let out = *levels.last().unwrap();
    let (a, b) = grid;
    if a == 0 || b == 0 || a > out.w || b > out.h {
        return Err(TileError::GridTooFine {
            a,
            b,
            w: out.w,
            h: out.h,
        });
    }

    let cols = split_axis(out.w, a);
    let rows = split_axis(out.h, b);
    let k = configs.len();
    let mut cells = BTreeMap::new();
    for (ai, &(x0, x1)) in cols.iter().enumerate() {
        for (bi, &(y0, y1)) in rows.iter().enumerate() {
            let mut tiles = vec![Tile::new(0, 0, 0, 0); k + 1];
            tiles[k] = Tile::new(x0, y0, x1, y1);
            for i in (0..k).rev() {
                let above = tiles[i + 1];
                tiles[i] = if is_transparent(&configs[i]) {
                    above
                } else {
                    reverse_tile(&configs[i], &above, rounding)?
                };
                if tiles[i].is_empty() {
                    return Err(TileError::DegenerateTile {
                        a: ai as u32,
                        b: bi as u32,
                        layer: i + 1,
                        axis: if tiles[i].x0 == tiles[i].x1 {
                            "width"
                        } else {
                            "height"
                        },
                    });
                }
            }
            cells.insert((ai as u32, bi as u32), tiles);
        }
    }
    Ok(TilePlan {
        grid,
        configs: configs.to_vec(),
        levels,
        cells,
    })
}

/// Redundancy bookkeeping for a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapStats {
    /// Per stack layer `i` (1-based): sum of cell tile areas at level `i`
    /// over the level's feature-map area. 1.0 means no overlap.
    pub per_layer_factor: Vec<f64>,
    /// Elements fetched or computed beyond one visit each, summed over
    /// stack layers (overlap area times depth).
    pub redundant_elements: u64,
    /// Level-1 crop size (width, height) per cell.
    pub crop_sizes: BTreeMap<(u32, u32), (u32, u32)>,
}

pub fn overlap_stats(plan: &TilePlan) -> OverlapStats {
    let k = plan.stack_len();
    let mut per_layer_factor = Vec::with_capacity(k);
    let mut redundant_elements = 0u64;
    for level in 1..=k {
        let dims = plan.levels[level - 1];
        let area = dims.w as u64 * dims.h as u64;
        let sum: u64 = plan.cells.values().map(|t| t[level - 1].area()).sum();
        per_layer_factor.push(sum as f64 / area as f64);
        redundant_elements += sum.saturating_sub(area) * dims.d as u64;
    }
    let crop_sizes = plan
        .cells
        .iter()
        .map(|(&cell, tiles)| (cell, (tiles[0].width(), tiles[0].height())))
        .collect();
    OverlapStats {
        per_layer_factor,
        redundant_elements,
        crop_sizes,
    }
}
