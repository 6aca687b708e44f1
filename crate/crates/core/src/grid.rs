//! Truncated tensor grid, value surfaces and piecewise-linear interpolation.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{GmxbError, Result};
use crate::model::ContractState;

/// Nodes of the truncated domain `[0, x1_max] × [0, x2_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    x1: Vec<f64>,
    x2: Vec<f64>,
}

fn check_axis(name: &str, nodes: &[f64]) -> Result<()> {
    if nodes.len() < 3 {
        return Err(GmxbError::InvalidInput(format!(
            "{name} axis needs at least 3 nodes"
        )));
    }
    if nodes[0] != 0.0 {
        return Err(GmxbError::InvalidInput(format!(
            "{name} axis must start at 0"
        )));
    }
    if !nodes.iter().all(|v| v.is_finite()) || !nodes.windows(2).all(|w| w[0] < w[1]) {
        return Err(GmxbError::InvalidInput(format!(
            "{name} nodes must be finite and strictly increasing"
        )));
    }
    Ok(())
}

impl GridSpec {
    pub fn new(x1: Vec<f64>, x2: Vec<f64>) -> Result<Self> {
        check_axis("x1", &x1)?;
        check_axis("x2", &x2)?;
        Ok(Self { x1, x2 })
    }

    pub fn x1(&self) -> &[f64] {
        &self.x1
    }

    pub fn x2(&self) -> &[f64] {
        &self.x2
    }

    pub fn n1(&self) -> usize {
        self.x1.len()
    }

    pub fn n2(&self) -> usize {
        self.x2.len()
    }

    pub fn x1_max(&self) -> f64 {
        *self.x1.last().unwrap()
    }

    pub fn x2_max(&self) -> f64 {
        *self.x2.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.n1() * self.n2()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of node `(i, j)`; lines of constant `x2` are contiguous.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.x1.len() + i
    }

    pub fn node(&self, i: usize, j: usize) -> ContractState {
        ContractState {
            x1: self.x1[i],
            x2: self.x2[j],
        }
    }

    /// Node nearest to `x` in each axis.
    pub fn nearest(&self, x: ContractState) -> (usize, usize) {
        (nearest_node(&self.x1, x.x1), nearest_node(&self.x2, x.x2))
    }

    /// Exact node index of `value` on the `x1` axis, if any.
    pub fn x1_index_of(&self, value: f64) -> Option<usize> {
        self.x1.iter().position(|&v| v == value)
    }

    pub fn x2_index_of(&self, value: f64) -> Option<usize> {
        self.x2.iter().position(|&v| v == value)
    }

    /// Clamps a state into the truncated domain.
    pub fn clamp(&self, x: ContractState) -> ContractState {
        ContractState {
            x1: x.x1.clamp(0.0, self.x1_max()),
            x2: x.x2.clamp(0.0, self.x2_max()),
        }
    }
}

fn nearest_node(nodes: &[f64], v: f64) -> usize {
    let k = nodes.partition_point(|&n| n < v);
    if k == 0 {
        0
    } else if k == nodes.len() {
        nodes.len() - 1
    } else if v - nodes[k - 1] <= nodes[k] - v {
        k - 1
    } else {
        k
    }
}

/// Cell `[nodes[k], nodes[k+1]]` containing `v` and the weight of the right
/// node. `v` must lie within the axis.
#[inline]
fn locate(nodes: &[f64], v: f64) -> (usize, f64) {
    let last = nodes.len() - 1;
    let k = nodes.partition_point(|&n| n <= v).clamp(1, last) - 1;
    let w = (v - nodes[k]) / (nodes[k + 1] - nodes[k]);
    (k, w)
}

/// Default grid: `4·16 + 1 = 65` nodes per axis at level 0, on
/// `[0, 20·w0]`.
///
/// The level-0 axis is uniform with spacing `w0/25` on `[0, w0]` and grows
/// geometrically from that spacing over `[w0, 20·w0]`. Each refinement level
/// inserts the midpoint of every cell, so coarse nodes are kept.
pub fn default_grid(w0: f64, refinement_level: usize) -> GridSpec {
    assert!(w0 > 0.0 && w0.is_finite(), "w0 must be positive");
    let axis = refine(default_axis(w0), refinement_level);
    GridSpec {
        x1: axis.clone(),
        x2: axis,
    }
}

const UNIFORM_CELLS: usize = 25;
const GEOMETRIC_CELLS: usize = 39;
const DOMAIN_FACTOR: f64 = 20.0;

fn default_axis(w0: f64) -> Vec<f64> {
    let h = w0 / UNIFORM_CELLS as f64;
    let span = (DOMAIN_FACTOR - 1.0) * w0;
    // growth factor q with h·(q^m − 1)/(q − 1) = span
    let reach = |q: f64| h * (q.powi(GEOMETRIC_CELLS as i32) - 1.0) / (q - 1.0);
    let (mut lo, mut hi) = (1.0 + 1e-9, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if reach(mid) < span {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);

    let mut nodes: Vec<f64> = (0..=UNIFORM_CELLS)
        .map(|k| w0 * k as f64 / UNIFORM_CELLS as f64)
        .collect();
    let mut step = h;
    let mut x = w0;
    for _ in 1..GEOMETRIC_CELLS {
        x += step;
        nodes.push(x);
        step *= q;
    }
    nodes.push(DOMAIN_FACTOR * w0);
    nodes
}

fn refine(mut nodes: Vec<f64>, levels: usize) -> Vec<f64> {
    for _ in 0..levels {
        let mut fine = Vec::with_capacity(2 * nodes.len() - 1);
        for w in nodes.windows(2) {
            fine.push(w[0]);
            fine.push(0.5 * (w[0] + w[1]));
        }
        fine.push(*nodes.last().unwrap());
        nodes = fine;
    }
    nodes
}

/// Side of an exercise time a surface belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Immediately before the exercise decision.
    Minus,
    /// Immediately after it.
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeTag {
    Anniversary { n: usize, side: Side },
    Interior(f64),
}

impl std::fmt::Display for TimeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimeTag::Anniversary {
                n,
                side: Side::Minus,
            } => write!(f, "{n}-"),
            TimeTag::Anniversary {
                n,
                side: Side::Plus,
            } => write!(f, "{n}+"),
            TimeTag::Interior(t) => write!(f, "t={t}"),
        }
    }
}

/// Grid-sampled value `V` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    grid: Arc<GridSpec>,
    values: Vec<f64>,
    pub tag: TimeTag,
}

impl ValueSurface {
    pub fn new(grid: Arc<GridSpec>, values: Vec<f64>, tag: TimeTag) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(GmxbError::InvalidInput(format!(
                "surface has {} values for a {}x{} grid",
                values.len(),
                grid.n1(),
                grid.n2()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(GmxbError::Numerical(format!(
                "non-finite value at node ({}, {})",
                k % grid.n1(),
                k / grid.n1()
            )));
        }
        Ok(Self { grid, values, tag })
    }

    /// Samples `f` at every node.
    pub fn from_fn(
        grid: Arc<GridSpec>,
        tag: TimeTag,
        f: impl Fn(ContractState) -> f64,
    ) -> Result<Self> {
        let mut values = vec![0.0; grid.len()];
        for j in 0..grid.n2() {
            for i in 0..grid.n1() {
                values[grid.index(i, j)] = f(grid.node(i, j));
            }
        }
        Self::new(grid, values, tag)
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    /// Values with lines of constant `x2` contiguous (see [`GridSpec::index`]).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Piecewise-linear interpolation (see [`Self::interpolate_unchecked`]);
    /// errors outside the truncated domain.
    pub fn interpolate(&self, x: ContractState) -> Result<f64> {
        let g = &self.grid;
        let inside = |v: f64, max: f64| v >= 0.0 && v <= max;
        if !(inside(x.x1, g.x1_max()) && inside(x.x2, g.x2_max())) {
            return Err(GmxbError::Domain(format!(
                "({}, {}) outside [0, {}] x [0, {}]",
                x.x1,
                x.x2,
                g.x1_max(),
                g.x2_max()
            )));
        }
        Ok(self.interpolate_unchecked(x))
    }

    /// Interpolation of a state already inside the domain.
    ///
    /// Each cell is split into two triangles along whichever diagonal gives
    /// the smaller value, i.e. the minimum of the two linear
    /// triangulations. The result is exact at nodes, reproduces affine
    /// functions, is monotone in the data and stays within the corner
    /// values. Unlike bilinear interpolation it never introduces a twist
    /// term, so convex nodal data stays convex along any segment inside
    /// a cell.
    #[inline]
    pub fn interpolate_unchecked(&self, x: ContractState) -> f64 {
        let g = &self.grid;
        let (i, a) = locate(&g.x1, x.x1);
        let (j, b) = locate(&g.x2, x.x2);
        let n1 = g.n1();
        let k = j * n1 + i;
        let v00 = self.values[k];
        let v10 = self.values[k + 1];
        let v01 = self.values[k + n1];
        let v11 = self.values[k + n1 + 1];
        let main = if a >= b {
            v00 + a * (v10 - v00) + b * (v11 - v10)
        } else {
            v00 + b * (v01 - v00) + a * (v11 - v01)
        };
        let anti = if a + b <= 1.0 {
            v00 + a * (v10 - v00) + b * (v01 - v00)
        } else {
            v11 + (1.0 - a) * (v01 - v11) + (1.0 - b) * (v10 - v11)
        };
        main.min(anti)
    }

    /// CSV with header `x1,x2,value`, rows ordered by `x1` then `x2`.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut out = String::from("x1,x2,value\n");
        for i in 0..g.n1() {
            for j in 0..g.n2() {
                let _ = writeln!(out, "{},{},{}", g.x1[i], g.x2[j], self.at(i, j));
            }
        }
        out
    }
}
