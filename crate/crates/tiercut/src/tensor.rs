//! Reference execution of small convolution stacks, whole or tiled.
//!
//! This is a checking kernel, not a performance kernel: it exists so a
//! tiled run can be compared entry by entry against the whole-input run.
//! Both paths funnel through one region executor that walks every output
//! entry's window in a fixed order (depth, then window row, then window
//! column), so two runs that see the same input values produce identical
//! results down to the last bit, for floats as well as integers.
//!
//! The executor distinguishes three kinds of reads. Coordinates outside the
//! feature map are padding: convolution and pooling skip them (average
//! pooling divides by the count of real entries). Coordinates inside the
//! feature map and inside the cell's crop read normally. Coordinates inside
//! the feature map but outside the crop mean the plan under-fetched; a
//! sound plan never produces them, so they abort debug runs unless the
//! executor was told a lossy run is intentional.
//!
//! The tiled runner's fault mode reproduces the classic tiling mistake on
//! purpose: it skips the halo exchange, handing each cell only its
//! no-overlap block of the input and zero-filling the surrounding context
//! its crop should have carried — as if interior tile edges were padding.
//! The equivalence check exists to catch exactly that corruption.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Dims, GraphError, LayerConfig, LayerKind, PoolMode, Rounding};
use crate::tiler::{split_axis, Tile, TilePlan};

#[derive(Debug, Error)]
pub enum TensorError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("tensor dims {dims:?} need {expected} values, got {got}")]
    DataLength {
        dims: (u32, u32, u32),
        expected: u64,
        got: usize,
    },
    #[error("tensor dims {0:?} contain a zero axis")]
    ZeroAxis((u32, u32, u32)),
    #[error("layer {layer}: expected {what} of length {expected}, got {got}")]
    ParamLength {
        layer: usize,
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("input dims {input:?} do not match the plan's first level {plan:?}")]
    PlanInputMismatch {
        input: (u32, u32, u32),
        plan: (u32, u32, u32),
    },
    #[error("plan covers {plan} layers but the stack has {stack}")]
    PlanDepthMismatch { plan: usize, stack: usize },
}

// ── Elements ─────────────────────────────────────────────────────────────────

/// Scalar types the kernel runs on. Integer runs are order-independent and
/// serve as ground truth; float runs exercise the bit-exactness argument.
pub trait Element: Copy + PartialEq + std::fmt::Debug {
    const ZERO: Self;
    fn add(self, rhs: Self) -> Self;
    fn mul(self, rhs: Self) -> Self;
    /// Division by a window count, for average pooling.
    fn div_count(self, count: u32) -> Self;
    fn max(self, rhs: Self) -> Self;
    fn relu(self) -> Self;
}

impl Element for i64 {
    const ZERO: i64 = 0;
    fn add(self, rhs: i64) -> i64 {
        self + rhs
    }
    fn mul(self, rhs: i64) -> i64 {
        self * rhs
    }
    fn div_count(self, count: u32) -> i64 {
        self / count as i64
    }
    fn max(self, rhs: i64) -> i64 {
        Ord::max(self, rhs)
    }
    fn relu(self) -> i64 {
        Ord::max(self, 0)
    }
}

impl Element for f64 {
    const ZERO: f64 = 0.0;
    fn add(self, rhs: f64) -> f64 {
        self + rhs
    }
    fn mul(self, rhs: f64) -> f64 {
        self * rhs
    }
    fn div_count(self, count: u32) -> f64 {
        self / count as f64
    }
    fn max(self, rhs: f64) -> f64 {
        if rhs > self {
            rhs
        } else {
            self
        }
    }
    fn relu(self) -> f64 {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
}

// ── Tensors ──────────────────────────────────────────────────────────────────

/// Dense W x H x D feature map. Storage is depth-major, then rows, so the
/// x coordinate varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3<T> {
    dims: Dims,
    data: Vec<T>,
}

impl<T: Element> Tensor3<T> {
    pub fn new(dims: Dims, data: Vec<T>) -> Result<Self, TensorError> {
        if dims.w == 0 || dims.h == 0 || dims.d == 0 {
            return Err(TensorError::ZeroAxis(dims.tuple()));
        }
        if data.len() as u64 != dims.elements() {
            return Err(TensorError::DataLength {
                dims: dims.tuple(),
                expected: dims.elements(),
                got: data.len(),
            });
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        Tensor3 {
            dims,
            data: vec![T::ZERO; dims.elements() as usize],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    fn idx(&self, x: u32, y: u32, d: u32) -> usize {
        debug_assert!(x < self.dims.w && y < self.dims.h && d < self.dims.d);
        ((d * self.dims.h + y) * self.dims.w + x) as usize
    }

    pub fn get(&self, x: u32, y: u32, d: u32) -> T {
        self.data[self.idx(x, y, d)]
    }

    pub fn set(&mut self, x: u32, y: u32, d: u32, value: T) {
        let i = self.idx(x, y, d);
        self.data[i] = value;
    }
}

// ── Stack layers ─────────────────────────────────────────────────────────────

/// One layer of an executable stack. Convolution weights are laid out
/// filter-major: `weights[((f * D + d) * Fh + ky) * Fw + kx]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "layer")]
pub enum StackLayer<T> {
    Conv {
        window: (u32, u32),
        stride: (u32, u32),
        padding: (u32, u32),
        filters: u32,
        weights: Vec<T>,
        bias: Vec<T>,
    },
    Pool {
        mode: PoolMode,
        window: (u32, u32),
        stride: (u32, u32),
        padding: (u32, u32),
    },
    Activation,
    BatchNorm { scale: Vec<T>, shift: Vec<T> },
}

impl<T: Element> StackLayer<T> {
    /// The planning-side description of this layer for a given input map.
    pub fn config(&self, input: Dims) -> LayerConfig {
        match self {
            StackLayer::Conv {
                window,
                stride,
                padding,
                filters,
                ..
            } => LayerConfig::conv(input, *window, *filters, *stride, *padding),
            StackLayer::Pool {
                mode,
                window,
                stride,
                padding,
            } => LayerConfig::pool(input, *mode, *window, *stride, *padding),
            StackLayer::Activation => {
                LayerConfig::counts(LayerKind::Activation, input.elements(), input.elements())
            }
            StackLayer::BatchNorm { .. } => {
                LayerConfig::counts(LayerKind::BatchNorm, input.elements(), input.elements())
            }
        }
    }

    fn out_depth(&self, in_depth: u32) -> u32 {
        match self {
            StackLayer::Conv { filters, .. } => *filters,
            _ => in_depth,
        }
    }

    fn check_params(&self, layer: usize, in_depth: u32) -> Result<(), TensorError> {
        let bad = |what, expected: usize, got: usize| TensorError::ParamLength {
            layer,
            what,
            expected,
            got,
        };
        match self {
            StackLayer::Conv {
                window,
                filters,
                weights,
                bias,
                ..
            } => {
                let taps = (window.0 * window.1 * in_depth * filters) as usize;
                if weights.len() != taps {
                    return Err(bad("weights", taps, weights.len()));
                }
                if bias.len() != *filters as usize {
                    return Err(bad("bias", *filters as usize, bias.len()));
                }
            }
            StackLayer::BatchNorm { scale, shift } => {
                if scale.len() != in_depth as usize {
                    return Err(bad("scale", in_depth as usize, scale.len()));
                }
                if shift.len() != in_depth as usize {
                    return Err(bad("shift", in_depth as usize, shift.len()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Planning configs for a stack, with feature-map dims propagated layer to
/// layer. `configs[i]` describes stack layer `i+1`.
pub fn stack_configs<T: Element>(
    input: Dims,
    layers: &[StackLayer<T>],
    rounding: Rounding,
) -> Result<Vec<LayerConfig>, TensorError> {
    let mut dims = input;
    let mut out = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        let cfg = layer.config(dims);
        if cfg.kind.is_spatial() {
            dims = cfg.output_dims(i as u32 + 1, rounding)?;
        }
        out.push(cfg);
    }
    Ok(out)
}

// ── The region executor ──────────────────────────────────────────────────────

/// A stored rectangle of one feature map: `tensor` holds the region of the
/// `true_dims` map starting at `(off_x, off_y)`.
struct Region<'a, T> {
    tensor: &'a Tensor3<T>,
    off_x: u32,
    off_y: u32,
    true_dims: Dims,
    fault: bool,
}

impl<T: Element> Region<'_, T> {
    /// `None` for padding (outside the feature map). Inside the map, reads
    /// the stored region; a read beyond the stored region means the tile
    /// plan under-fetched, which only fault mode permits (as a zero).
    fn fetch(&self, gx: i64, gy: i64, d: u32) -> Option<T> {
        if gx < 0 || gy < 0 || gx >= self.true_dims.w as i64 || gy >= self.true_dims.h as i64 {
            return None;
        }
        let lx = gx - self.off_x as i64;
        let ly = gy - self.off_y as i64;
        if lx >= 0
            && ly >= 0
            && (lx as u32) < self.tensor.dims().w
            && (ly as u32) < self.tensor.dims().h
        {
            return Some(self.tensor.get(lx as u32, ly as u32, d));
        }
        debug_assert!(
            self.fault,
            "read outside the stored region at ({gx},{gy}) without fault mode"
        );
        Some(T::ZERO)
    }
}

/// Computes the `out_tile` portion of a layer's output from a stored input
/// region. Every output entry's window is walked in the same fixed order
/// regardless of how the input is stored, which is what makes whole and
/// tiled runs agree bit for bit.
fn apply_layer<T: Element>(
    region: &Region<'_, T>,
    layer: &StackLayer<T>,
    layer_no: usize,
    out_tile: Tile,
) -> Result<Tensor3<T>, TensorError> {
    let in_depth = region.true_dims.d;
    layer.check_params(layer_no, in_depth)?;
    let out_dims = Dims::new(out_tile.width(), out_tile.height(), layer.out_depth(in_depth));
    let mut out = Tensor3::zeros(out_dims);

    match layer {
        StackLayer::Conv {
            window: (fw, fh),
            stride: (sx, sy),
            padding: (px, py),
            filters,
            weights,
            bias,
        } => {
            for f in 0..*filters {
                for oy in out_tile.y0..out_tile.y1 {
                    for ox in out_tile.x0..out_tile.x1 {
                        let mut acc = bias[f as usize];
                        for d in 0..in_depth {
                            for ky in 0..*fh {
                                for kx in 0..*fw {
                                    let gx = (*sx * ox + kx) as i64 - *px as i64;
                                    let gy = (*sy * oy + ky) as i64 - *py as i64;
                                    if let Some(v) = region.fetch(gx, gy, d) {
                                        let w = weights
                                            [(((f * in_depth + d) * fh + ky) * fw + kx) as usize];
                                        acc = acc.add(v.mul(w));
                                    }
                                }
                            }
                        }
                        out.set(ox - out_tile.x0, oy - out_tile.y0, f, acc);
                    }
                }
            }
        }
        StackLayer::Pool {
            mode,
            window: (fw, fh),
            stride: (sx, sy),
            padding: (px, py),
        } => {
            for d in 0..in_depth {
                for oy in out_tile.y0..out_tile.y1 {
                    for ox in out_tile.x0..out_tile.x1 {
                        let mut best: Option<T> = None;
                        let mut sum = T::ZERO;
                        let mut count = 0u32;
                        for ky in 0..*fh {
                            for kx in 0..*fw {
                                let gx = (*sx * ox + kx) as i64 - *px as i64;
                                let gy = (*sy * oy + ky) as i64 - *py as i64;
                                if let Some(v) = region.fetch(gx, gy, d) {
                                    best = Some(match best {
                                        Some(b) => b.max(v),
                                        None => v,
                                    });
                                    sum = sum.add(v);
                                    count += 1;
                                }
                            }
                        }
                        // Pool validation keeps padding below the window,
                        // so every window sees at least one real entry.
                        let value = match mode {
                            PoolMode::Max => best.expect("window fully in padding"),
                            PoolMode::Average => sum.div_count(count),
                        };
                        out.set(ox - out_tile.x0, oy - out_tile.y0, d, value);
                    }
                }
            }
        }
        StackLayer::Activation => {
            for d in 0..in_depth {
                for oy in out_tile.y0..out_tile.y1 {
                    for ox in out_tile.x0..out_tile.x1 {
                        let v = region.fetch(ox as i64, oy as i64, d).expect("tile in map");
                        out.set(ox - out_tile.x0, oy - out_tile.y0, d, v.relu());
                    }
                }
            }
        }
        StackLayer::BatchNorm { scale, shift } => {
            for d in 0..in_depth {
                for oy in out_tile.y0..out_tile.y1 {
                    for ox in out_tile.x0..out_tile.x1 {
                        let v = region.fetch(ox as i64, oy as i64, d).expect("tile in map");
                        let t = v.mul(scale[d as usize]).add(shift[d as usize]);
                        out.set(ox - out_tile.x0, oy - out_tile.y0, d, t);
                    }
                }
            }
        }
    }
    Ok(out)
}

// ── Whole and tiled runs ─────────────────────────────────────────────────────

/// Runs the stack on the whole input.
pub fn run_stack<T: Element>(
    input: &Tensor3<T>,
    layers: &[StackLayer<T>],
) -> Result<Tensor3<T>, TensorError> {
    let mut current = input.clone();
    for (i, layer) in layers.iter().enumerate() {
        let dims = current.dims();
        let cfg = layer.config(dims);
        let out_dims = if cfg.kind.is_spatial() {
            cfg.output_dims(i as u32 + 1, Rounding::Exact)?
        } else {
            dims
        };
        let region = Region {
            tensor: &current,
            off_x: 0,
            off_y: 0,
            true_dims: dims,
            fault: false,
        };
        let full = Tile::new(0, 0, out_dims.w, out_dims.h);
        current = apply_layer(&region, layer, i + 1, full)?;
    }
    Ok(current)
}

/// Runs the stack tiled according to `plan` and stitches the cell outputs
/// back into one tensor.
///
/// Each cell crops its level-1 region from the input, applies every layer
/// to its own tiles, and writes its output tile into the result; output
/// tiles partition the map, so stitching is a plain copy.
///
/// With `fault` set, the halo exchange is deliberately skipped: each cell
/// keeps only its no-overlap block of the input, and the surrounding
/// context its crop would have fetched from neighboring cells is
/// zero-filled, the way a tiler that pads interior tile edges behaves.
/// Output shapes match the sound run but boundary values generally do not,
/// which is exactly what the equivalence check must be able to detect.
pub fn run_tiled<T: Element>(
    input: &Tensor3<T>,
    layers: &[StackLayer<T>],
    plan: &TilePlan,
    fault: bool,
) -> Result<Tensor3<T>, TensorError> {
    if plan.stack_len() != layers.len() {
        return Err(TensorError::PlanDepthMismatch {
            plan: plan.stack_len(),
            stack: layers.len(),
        });
    }
    if plan.levels[0] != input.dims() {
        return Err(TensorError::PlanInputMismatch {
            input: input.dims().tuple(),
            plan: plan.levels[0].tuple(),
        });
    }

    let out_map = plan.output_dims();
    let depth_out = layers
        .iter()
        .fold(input.dims().d, |d, l| l.out_depth(d));
    let mut stitched = Tensor3::zeros(Dims::new(out_map.w, out_map.h, depth_out));

    // The no-overlap blocks a halo-skipping tiler would hand each cell:
    // the input map split on the plan's grid, with no surrounding context.
    let fault_cols = split_axis(input.dims().w, plan.grid.0);
    let fault_rows = split_axis(input.dims().h, plan.grid.1);

    for (&(col, row), tiles) in plan.cells.iter() {
        // Crop the cell's level-1 region out of the input.
        let crop = tiles[0];
        let mut current = Tensor3::zeros(Dims::new(
            crop.width(),
            crop.height(),
            input.dims().d,
        ));
        let block = (
            fault_cols[col as usize],
            fault_rows[row as usize],
        );
        for d in 0..input.dims().d {
            for y in crop.y0..crop.y1 {
                for x in crop.x0..crop.x1 {
                    let exchanged = x >= block.0 .0
                        && x < block.0 .1
                        && y >= block.1 .0
                        && y < block.1 .1;
                    let v = if fault && !exchanged {
                        T::ZERO
                    } else {
                        input.get(x, y, d)
                    };
                    current.set(x - crop.x0, y - crop.y0, d, v);
                }
            }
        }

        let mut at = crop;
        for (i, layer) in layers.iter().enumerate() {
            let region = Region {
                tensor: &current,
                off_x: at.x0,
                off_y: at.y0,
                true_dims: plan.levels[i],
                fault,
            };
            let next = tiles[i + 1];
            current = apply_layer(&region, layer, i + 1, next)?;
            at = next;
        }

        for d in 0..depth_out {
            for y in at.y0..at.y1 {
                for x in at.x0..at.x1 {
                    stitched.set(x, y, d, current.get(x - at.x0, y - at.y0, d));
                }
            }
        }
    }
    Ok(stitched)
}
