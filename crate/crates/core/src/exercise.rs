//! Exercise-time supremum: builds `Vₙ⁻` from `Vₙ⁺`.
//!
//! At every node `x` the holder's action maximizes
//! `v(λ) = Vₙ⁺(f_{x,n}(λ)) + f_{x,n}(λ)`, with `Vₙ⁺` interpolated at the
//! (clamped) post-event state. For contracts whose value is homogeneous of
//! degree one the post-event state is first scaled onto the segment
//! `x₁ + x₂ = w0`, so `Vₙ⁺(y) = (s/w0)·Vₙ⁺(w0·y/s)` with `s = y₁ + y₂`. The
//! search
//! either scans a uniform partition of the admissible interval or only the
//! contract's finite candidate set.

use std::sync::Arc;

use rayon::prelude::*;

use crate::contracts::Contract;
use crate::error::{GmxbError, Result};
use crate::grid::{GridSpec, Side, TimeTag, ValueSurface};
use crate::model::ContractState;

/// Relative tolerance within which the smallest maximizing action wins.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Default size of the dense partition.
pub const DEFAULT_PARTITION: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Linear search over `partition` equally spaced actions plus the
    /// certified candidate points.
    Dense { partition: usize },
    /// Only the candidate set. Uncertified anniversaries are refused unless
    /// `override_certification` is set.
    ExtremePoints { override_certification: bool },
}

impl Default for SearchMode {
    fn default() -> Self {
        SearchMode::Dense {
            partition: DEFAULT_PARTITION,
        }
    }
}

impl std::fmt::Display for SearchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SearchMode::Dense { partition } => write!(f, "dense(p={partition})"),
            SearchMode::ExtremePoints {
                override_certification: false,
            } => f.write_str("extreme-points"),
            SearchMode::ExtremePoints {
                override_certification: true,
            } => f.write_str("extreme-points(override)"),
        }
    }
}

/// Optimal action and achieved value at every node of one anniversary.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlMap {
    pub grid: Arc<GridSpec>,
    pub anniversary: usize,
    /// Indexed like [`ValueSurface::values`].
    pub lambda_star: Vec<f64>,
    pub value: Vec<f64>,
}

impl ControlMap {
    pub fn lambda_at(&self, i: usize, j: usize) -> f64 {
        self.lambda_star[self.grid.index(i, j)]
    }

    /// Action stored at the node nearest to `x`, with that node.
    pub fn nearest(&self, x: ContractState) -> (ContractState, f64) {
        let (i, j) = self.grid.nearest(x);
        (self.grid.node(i, j), self.lambda_at(i, j))
    }

    /// CSV `x1,x2,lambda_star,scaled_withdrawal,value`.
    ///
    /// `label` renders the fourth column from the node state and action.
    pub fn to_csv(&self, label: impl Fn(ContractState, f64) -> String) -> String {
        use std::fmt::Write as _;
        let g = &self.grid;
        let mut out = String::from("x1,x2,lambda_star,scaled_withdrawal,value\n");
        for i in 0..g.n1() {
            for j in 0..g.n2() {
                let k = g.index(i, j);
                let x = g.node(i, j);
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    x.x1,
                    x.x2,
                    self.lambda_star[k],
                    label(x, self.lambda_star[k]),
                    self.value[k]
                );
            }
        }
        out
    }
}

/// Evaluates `v(λ)` at one node.
#[inline]
fn action_value(
    v_plus: &ValueSurface,
    contract: &dyn Contract,
    x: ContractState,
    n: usize,
    lambda: f64,
) -> Result<f64> {
    let out = contract.event(x, n, lambda)?;
    let y = out.new_state;
    if contract.homogeneous() {
        let s = y.x1 + y.x2;
        if s == 0.0 {
            return Ok(v_plus.at(0, 0) + out.cash);
        }
        let rho = contract.w0();
        let on_ring = ContractState {
            x1: rho * y.x1 / s,
            x2: rho * y.x2 / s,
        };
        return Ok(s / rho * v_plus.interpolate_unchecked(on_ring) + out.cash);
    }
    let landing = v_plus.grid().clamp(y);
    Ok(v_plus.interpolate_unchecked(landing) + out.cash)
}

/// Best of the given actions, ties going to the smallest action.
fn maximize(
    v_plus: &ValueSurface,
    contract: &dyn Contract,
    x: ContractState,
    n: usize,
    actions: &[f64],
) -> Result<(f64, f64)> {
    let mut scored = Vec::with_capacity(actions.len());
    let mut best = f64::NEG_INFINITY;
    for &lambda in actions {
        let v = action_value(v_plus, contract, x, n, lambda)?;
        best = best.max(v);
        scored.push((lambda, v));
    }
    let floor = best - TIE_TOLERANCE * best.abs().max(f64::MIN_POSITIVE);
    let lambda = scored
        .iter()
        .filter(|(_, v)| *v >= floor)
        .map(|(l, _)| *l)
        .fold(f64::INFINITY, f64::min);
    Ok((lambda, best))
}

fn merge_actions(mut base: Vec<f64>, extra: &[f64]) -> Vec<f64> {
    base.extend_from_slice(extra);
    base.sort_by(f64::total_cmp);
    base.dedup();
    base
}

fn check_tag(v_plus: &ValueSurface, n: usize) -> Result<()> {
    match v_plus.tag {
        TimeTag::Anniversary {
            n: m,
            side: Side::Plus,
        } if m == n => Ok(()),
        other => Err(GmxbError::InvalidInput(format!(
            "exercise at anniversary {n} needs a surface tagged {n}+, got {other}"
        ))),
    }
}

fn check_mode(contract: &dyn Contract, n: usize, mode: SearchMode) -> Result<()> {
    match mode {
        SearchMode::Dense { partition } if partition < 2 => Err(GmxbError::InvalidInput(format!(
            "dense partition size {partition} < 2"
        ))),
        SearchMode::ExtremePoints { override_certification: false }
            if !contract.bang_bang_certified(n) =>
        {
            Err(GmxbError::NotCertified {
                anniversary: n,
                reason: "the cash flow is not convex in the state (penalty and free withdrawal both positive)".into(),
            })
        }
        _ => Ok(()),
    }
}

/// Actions scanned at node `x` by `mode`.
fn actions_for(
    contract: &dyn Contract,
    x: ContractState,
    n: usize,
    mode: SearchMode,
    partition: &[f64],
) -> Vec<f64> {
    let candidates = contract.candidate_set(x, n);
    match mode {
        SearchMode::Dense { .. } if candidates.certified => {
            merge_actions(partition.to_vec(), &candidates.actions)
        }
        SearchMode::Dense { .. } => partition.to_vec(),
        SearchMode::ExtremePoints { .. } => candidates.actions,
    }
}

/// Applies the exercise decision at anniversary `n` to `v_plus`.
pub fn apply_exercise(
    v_plus: &ValueSurface,
    contract: &dyn Contract,
    n: usize,
    mode: SearchMode,
) -> Result<(ValueSurface, ControlMap)> {
    check_tag(v_plus, n)?;
    check_mode(contract, n, mode)?;
    let grid = v_plus.grid().clone();
    let partition = match mode {
        SearchMode::Dense { partition } => contract.admissible().partition(partition),
        SearchMode::ExtremePoints { .. } => Vec::new(),
    };

    let best: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.node(k % grid.n1(), k / grid.n1());
            let actions = actions_for(contract, x, n, mode, &partition);
            maximize(v_plus, contract, x, n, &actions)
        })
        .collect::<Result<_>>()?;

    let (lambda_star, value): (Vec<f64>, Vec<f64>) = best.into_iter().unzip();
    let v_minus = ValueSurface::new(
        grid.clone(),
        value.clone(),
        TimeTag::Anniversary {
            n,
            side: Side::Minus,
        },
    )?;
    Ok((
        v_minus,
        ControlMap {
            grid,
            anniversary: n,
            lambda_star,
            value,
        },
    ))
}

/// Per-node difference between dense search and extreme-point search.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub anniversary: usize,
    pub gap: Vec<f64>,
    pub dense: ControlMap,
    pub extreme: ControlMap,
}

impl GapReport {
    /// Largest gap relative to `1 + |value|`, with the node where it occurs.
    pub fn max_relative_gap(&self) -> (f64, usize) {
        let mut worst = (f64::NEG_INFINITY, 0);
        for (k, (g, v)) in self.gap.iter().zip(&self.dense.value).enumerate() {
            let rel = g / (1.0 + v.abs());
            if rel > worst.0 {
                worst = (rel, k);
            }
        }
        worst
    }

    pub fn max_gap(&self) -> f64 {
        self.gap.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Dense value minus extreme-point value at every node.
///
/// The dense scan here always includes the candidate points, certified or
/// not, so the gap is nonnegative by construction.
pub fn bang_bang_gap(
    v_plus: &ValueSurface,
    contract: &dyn Contract,
    n: usize,
    p: usize,
) -> Result<GapReport> {
    check_tag(v_plus, n)?;
    check_mode(contract, n, SearchMode::Dense { partition: p })?;
    let grid = v_plus.grid().clone();
    let partition = contract.admissible().partition(p);

    let rows: Vec<((f64, f64), (f64, f64))> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.node(k % grid.n1(), k / grid.n1());
            let candidates = contract.candidate_set(x, n).actions;
            let dense = maximize(
                v_plus,
                contract,
                x,
                n,
                &merge_actions(partition.clone(), &candidates),
            )?;
            let extreme = maximize(v_plus, contract, x, n, &candidates)?;
            Ok((dense, extreme))
        })
        .collect::<Result<_>>()?;

    let map = |pick: fn(&((f64, f64), (f64, f64))) -> (f64, f64)| {
        let (lambda_star, value): (Vec<f64>, Vec<f64>) = rows.iter().map(pick).unzip();
        ControlMap {
            grid: grid.clone(),
            anniversary: n,
            lambda_star,
            value,
        }
    };
    let dense = map(|r| r.0);
    let extreme = map(|r| r.1);
    let gap = dense
        .value
        .iter()
        .zip(&extreme.value)
        .map(|(d, e)| d - e)
        .collect();
    Ok(GapReport {
        anniversary: n,
        gap,
        dense,
        extreme,
    })
}
