//! Numerical verification: discrete convexity/monotonicity, homogeneity,
//! and a Monte Carlo evaluation of a fixed policy.

mod mc;

pub use mc::{mc_policy_value, McConfig, McEstimate};

use std::fmt::Write as _;

use crate::grid::{TimeTag, ValueSurface};
use crate::model::ContractState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    ConvexityX1,
    ConvexityX2,
    ConvexityDiagonal,
    MonotonicityX1,
    MonotonicityX2,
}

impl std::fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ViolationKind::ConvexityX1 => "convexity_x1",
            ViolationKind::ConvexityX2 => "convexity_x2",
            ViolationKind::ConvexityDiagonal => "convexity_diagonal",
            ViolationKind::MonotonicityX1 => "monotonicity_x1",
            ViolationKind::MonotonicityX2 => "monotonicity_x2",
        })
    }
}

/// A node where a discrete convexity or monotonicity test fails.
///
/// `defect` is in the units of the surface: the amount by which a node
/// lies above the chord of its neighbours, or the drop between consecutive
/// nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub i: usize,
    pub j: usize,
    pub x: ContractState,
    pub defect: f64,
}

/// Discrete convexity/monotonicity of one surface.
#[derive(Debug, Clone, PartialEq)]
pub struct CmReport {
    pub tag: TimeTag,
    pub tolerance: f64,
    /// Smallest divided second difference along `x1`.
    pub min_d2_x1: f64,
    pub min_d2_x2: f64,
    /// Smallest second derivative estimate along the grid diagonal.
    pub min_d2_diagonal: f64,
    /// Smallest divided forward difference along each axis.
    pub min_d1_x1: f64,
    pub min_d1_x2: f64,
    pub convex: bool,
    pub monotone: bool,
    pub violations: Vec<Violation>,
}

impl CmReport {
    pub fn is_cm(&self) -> bool {
        self.convex && self.monotone
    }

    /// Violations of the given kind on the line `x1 = x1[i]`.
    pub fn on_x1_line(&self, i: usize, kind: ViolationKind) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(move |v| v.i == i && v.kind == kind)
    }

    pub fn worst(&self) -> Option<&Violation> {
        self.violations
            .iter()
            .max_by(|a, b| a.defect.total_cmp(&b.defect))
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tag: {}", self.tag);
        let _ = writeln!(out, "tolerance: {:e}", self.tolerance);
        let _ = writeln!(out, "convex: {}", self.convex);
        let _ = writeln!(out, "monotone: {}", self.monotone);
        let _ = writeln!(out, "min_d2_x1: {:e}", self.min_d2_x1);
        let _ = writeln!(out, "min_d2_x2: {:e}", self.min_d2_x2);
        let _ = writeln!(out, "min_d2_diagonal: {:e}", self.min_d2_diagonal);
        let _ = writeln!(out, "min_d1_x1: {:e}", self.min_d1_x1);
        let _ = writeln!(out, "min_d1_x2: {:e}", self.min_d1_x2);
        let _ = writeln!(out, "violations: {}", self.violations.len());
        if let Some(w) = self.worst() {
            let _ = writeln!(
                out,
                "worst: {} at ({}, {}) defect {:e}",
                w.kind, w.x.x1, w.x.x2, w.defect
            );
        }
        out
    }

    /// CSV `tag,kind,x1,x2,defect`, one row per violation.
    pub fn violations_csv_rows(&self, out: &mut String) {
        for v in &self.violations {
            let _ = writeln!(
                out,
                "{},{},{},{},{:e}",
                self.tag, v.kind, v.x.x1, v.x.x2, v.defect
            );
        }
    }
}

/// Checks discrete convexity and monotonicity of `s`.
///
/// Along each axis a node is convex when it lies on or below the chord
/// through its two neighbours (nonuniform divided differences). Along the
/// diagonal the neighbours are the points in direction `(1, 1)` on the
/// nearest grid lines, read by interpolation along those lines. Monotone
/// means no forward difference falls below `−tol`. Defects are compared
/// with `tol` in the units of the surface.
pub fn cm_check(s: &ValueSurface, tol: f64) -> CmReport {
    let g = s.grid();
    let (x1, x2) = (g.x1(), g.x2());
    let (n1, n2) = (g.n1(), g.n2());
    let mut violations = Vec::new();
    let mut min_d2 = [f64::INFINITY; 3];
    let mut min_d1 = [f64::INFINITY; 2];
    let mut flag = |kind, i, j, defect: f64| {
        if defect > tol {
            violations.push(Violation {
                kind,
                i,
                j,
                x: g.node(i, j),
                defect,
            });
        }
    };

    // convexity defect of the middle of three points and the divided
    // second difference
    let chord = |lo: f64, mid: f64, hi: f64, hm: f64, hp: f64| {
        let defect = mid - (hp * lo + hm * hi) / (hm + hp);
        let d2 = 2.0 * ((hi - mid) / hp - (mid - lo) / hm) / (hm + hp);
        (defect, d2)
    };

    for j in 0..n2 {
        for i in 0..n1 {
            let v = s.at(i, j);
            if i + 1 < n1 {
                let d1 = (s.at(i + 1, j) - v) / (x1[i + 1] - x1[i]);
                min_d1[0] = min_d1[0].min(d1);
                flag(ViolationKind::MonotonicityX1, i, j, v - s.at(i + 1, j));
            }
            if j + 1 < n2 {
                let d1 = (s.at(i, j + 1) - v) / (x2[j + 1] - x2[j]);
                min_d1[1] = min_d1[1].min(d1);
                flag(ViolationKind::MonotonicityX2, i, j, v - s.at(i, j + 1));
            }

            let inner1 = i > 0 && i + 1 < n1;
            let inner2 = j > 0 && j + 1 < n2;
            let (hm1, hp1) = if inner1 {
                (x1[i] - x1[i - 1], x1[i + 1] - x1[i])
            } else {
                (0.0, 0.0)
            };
            let (hm2, hp2) = if inner2 {
                (x2[j] - x2[j - 1], x2[j + 1] - x2[j])
            } else {
                (0.0, 0.0)
            };
            if inner1 {
                let (defect, d2) = chord(s.at(i - 1, j), v, s.at(i + 1, j), hm1, hp1);
                min_d2[0] = min_d2[0].min(d2);
                flag(ViolationKind::ConvexityX1, i, j, defect);
            }
            if inner2 {
                let (defect, d2) = chord(s.at(i, j - 1), v, s.at(i, j + 1), hm2, hp2);
                min_d2[1] = min_d2[1].min(d2);
                flag(ViolationKind::ConvexityX2, i, j, defect);
            }
            if inner1 && inner2 {
                // neighbours along (1, 1) placed on the nearest grid lines
                let sp = hp1.min(hp2);
                let sm = hm1.min(hm2);
                let x = g.node(i, j);
                let hi = s.interpolate_unchecked(ContractState {
                    x1: x.x1 + sp,
                    x2: x.x2 + sp,
                });
                let lo = s.interpolate_unchecked(ContractState {
                    x1: x.x1 - sm,
                    x2: x.x2 - sm,
                });
                let (defect, d2) = chord(lo, v, hi, sm, sp);
                min_d2[2] = min_d2[2].min(0.5 * d2);
                flag(ViolationKind::ConvexityDiagonal, i, j, defect);
            }
        }
    }

    let convex = !violations.iter().any(|v| {
        matches!(
            v.kind,
            ViolationKind::ConvexityX1
                | ViolationKind::ConvexityX2
                | ViolationKind::ConvexityDiagonal
        )
    });
    let monotone = !violations.iter().any(|v| {
        matches!(
            v.kind,
            ViolationKind::MonotonicityX1 | ViolationKind::MonotonicityX2
        )
    });
    CmReport {
        tag: s.tag,
        tolerance: tol,
        min_d2_x1: min_d2[0],
        min_d2_x2: min_d2[1],
        min_d2_diagonal: min_d2[2],
        min_d1_x1: min_d1[0],
        min_d1_x2: min_d1[1],
        convex,
        monotone,
        violations,
    }
}

/// Interior test lattice `{k·w0/4 : k = 1..=8}²`.
pub fn interior_lattice(w0: f64) -> Vec<ContractState> {
    let axis: Vec<f64> = (1..=8).map(|k| k as f64 * w0 / 4.0).collect();
    axis.iter()
        .flat_map(|&x1| axis.iter().map(move |&x2| ContractState { x1, x2 }))
        .collect()
}

/// Largest `|s(c·x) − c·s(x)|` relative to `max(|c·s(x)|, |s(c·x)|)` over
/// `points`, by interpolation. Points whose image leaves the domain are
/// skipped.
pub fn homogeneity_check(s: &ValueSurface, c: f64, points: &[ContractState]) -> f64 {
    assert!(c > 0.0, "scale must be positive");
    let mut worst: f64 = 0.0;
    for &x in points {
        let (Ok(base), Ok(scaled)) = (s.interpolate(x), s.interpolate(x.scaled(c))) else {
            continue;
        };
        let denom = (c * base).abs().max(scaled.abs());
        if denom > 0.0 {
            worst = worst.max((scaled - c * base).abs() / denom);
        }
    }
    worst
}
