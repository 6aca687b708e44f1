//! Backward dynamic program over the exercise schedule.
//!
//! Starting from the expiry payoff, each interval `(tₙ, tₙ₊₁)` is solved by
//! the implicit stepper and each exercise time by the supremum over
//! actions, down to `V₀⁻`.

use std::sync::Arc;

use crate::contracts::{Contract, ContractKind};
use crate::diagnostics::{cm_check, CmReport};
use crate::error::{GmxbError, Result};
use crate::exercise::{apply_exercise, ControlMap, SearchMode};
use crate::grid::{GridSpec, Side, TimeTag, ValueSurface};
use crate::model::{ContractState, MarketModel};
use crate::stepper::{step_interval_observed, SourceTerm, StepperConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Retention {
    /// Keep nothing but the final surface.
    None,
    /// Keep `n⁻` and `n⁺` at every anniversary.
    #[default]
    Anniversaries,
    /// Also keep every interior time step.
    AllSteps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingConfig {
    pub stepper: StepperConfig,
    pub mode: SearchMode,
    pub retention: Retention,
    /// Tolerance factor for the convexity/monotonicity reports, relative to
    /// the surface's max norm. `None` skips the reports.
    pub cm_tolerance: Option<f64>,
}

impl Default for PricingConfig {
    fn default() -> Self {
        Self {
            stepper: StepperConfig::default(),
            mode: SearchMode::default(),
            retention: Retention::default(),
            cm_tolerance: Some(1e-8),
        }
    }
}

/// A convexity/monotonicity property that held before a PDE step and was
/// lost after it.
#[derive(Debug, Clone, PartialEq)]
pub struct PreservationFlag {
    pub interval: (usize, usize),
    pub lost_convexity: bool,
    pub lost_monotonicity: bool,
}

#[derive(Debug, Clone)]
pub struct PricingResult {
    /// `V(w0, w0, 0⁻)`.
    pub value_at_origin: f64,
    /// Retained surfaces in backward order (latest time first).
    pub surfaces: Vec<ValueSurface>,
    /// Indexed by anniversary.
    pub control_maps: Vec<ControlMap>,
    /// One report per anniversary surface, when enabled.
    pub diagnostics: Vec<CmReport>,
    pub preservation_flags: Vec<PreservationFlag>,
    pub final_surface: ValueSurface,
}

impl PricingResult {
    pub fn surface(&self, n: usize, side: Side) -> Option<&ValueSurface> {
        self.surfaces
            .iter()
            .find(|s| s.tag == TimeTag::Anniversary { n, side })
    }

    pub fn report(&self, n: usize, side: Side) -> Option<&CmReport> {
        self.diagnostics
            .iter()
            .find(|r| r.tag == TimeTag::Anniversary { n, side })
    }
}

fn source_of(contract: &dyn Contract) -> impl Fn(f64) -> f64 + Sync + '_ {
    move |t| contract.source_rate(t)
}

/// Prices `contract` on `grid`, returning `V(w0, w0, 0⁻)` and the
/// intermediate surfaces and control maps.
pub fn price(
    contract: &dyn Contract,
    market: &MarketModel,
    grid: Arc<GridSpec>,
    cfg: &PricingConfig,
) -> Result<PricingResult> {
    let schedule = contract.schedule();
    let n_ex = schedule.len();
    let w0 = contract.w0();
    if w0 > grid.x1_max() || w0 > grid.x2_max() {
        return Err(GmxbError::InvalidInput(format!(
            "initial deposit {w0} outside the truncated domain"
        )));
    }

    let rate = source_of(contract);
    let source = match contract.kind() {
        ContractKind::Gmwb => SourceTerm::Zero,
        ContractKind::Glwb => SourceTerm::Rate(&rate),
    };
    let x_max = grid.x1_max();
    let g_terminal = contract.boundary_slope_at_expiry();
    let mut v = ValueSurface::from_fn(
        grid.clone(),
        TimeTag::Anniversary {
            n: n_ex,
            side: Side::Minus,
        },
        |x| {
            // the top row carries the asymptotic form g·x₁
            if x.x1 == x_max {
                g_terminal * x_max
            } else {
                contract.payoff(x)
            }
        },
    )?;

    let keep = cfg.retention != Retention::None;
    let mut surfaces = Vec::new();
    let mut maps: Vec<Option<ControlMap>> = vec![None; n_ex];
    let mut diagnostics = Vec::new();
    let mut flags = Vec::new();
    let report = |s: &ValueSurface, out: &mut Vec<CmReport>| {
        if let Some(tol) = cfg.cm_tolerance {
            out.push(cm_check(s, tol * s.max_abs()));
        }
    };

    report(&v, &mut diagnostics);
    if keep {
        surfaces.push(v.clone());
    }

    for n in (0..n_ex).rev() {
        let (t0, t1) = (schedule.time(n), schedule.next_time(n));
        let mut interior = Vec::new();
        let v_plus = step_interval_observed(
            &v,
            market,
            source,
            &cfg.stepper,
            t0,
            t1,
            TimeTag::Anniversary {
                n,
                side: Side::Plus,
            },
            |t, values| {
                if cfg.retention == Retention::AllSteps && t > t0 {
                    interior.push((t, values.to_vec()));
                }
            },
        )?;
        for (t, values) in interior {
            surfaces.push(ValueSurface::new(
                grid.clone(),
                values,
                TimeTag::Interior(t),
            )?);
        }

        report(&v_plus, &mut diagnostics);
        if cfg.cm_tolerance.is_some() && diagnostics.len() >= 2 {
            let before = &diagnostics[diagnostics.len() - 2];
            let after = &diagnostics[diagnostics.len() - 1];
            let lost_convexity = before.convex && !after.convex;
            let lost_monotonicity = before.monotone && !after.monotone;
            if lost_convexity || lost_monotonicity {
                flags.push(PreservationFlag {
                    interval: (n, n + 1),
                    lost_convexity,
                    lost_monotonicity,
                });
            }
        }

        let (v_minus, map) = apply_exercise(&v_plus, contract, n, cfg.mode)?;
        report(&v_minus, &mut diagnostics);
        if keep {
            surfaces.push(v_plus);
            surfaces.push(v_minus.clone());
        }
        maps[n] = Some(map);
        v = v_minus;
    }

    let value_at_origin = match (grid.x1_index_of(w0), grid.x2_index_of(w0)) {
        (Some(i), Some(j)) => v.at(i, j),
        _ => v.interpolate(ContractState { x1: w0, x2: w0 })?,
    };
    if !value_at_origin.is_finite() {
        return Err(GmxbError::Numerical("non-finite contract value".into()));
    }

    Ok(PricingResult {
        value_at_origin,
        surfaces,
        control_maps: maps
            .into_iter()
            .map(|m| m.expect("every anniversary visited"))
            .collect(),
        diagnostics,
        preservation_flags: flags,
        final_surface: v,
    })
}
