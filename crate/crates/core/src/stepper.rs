//! Implicit finite-difference stepping between exercise times.
//!
//! Solves `∂tV + ℒV + m(t)·x₁ = 0` backward from `t_{n+1}⁻` to `tₙ⁺` with
//!
//!   ℒ = ½σ²x₁²∂x₁x₁ + (r − α)x₁∂x₁ − r.
//!
//! `ℒ` only differentiates in `x₁`, so every line of constant `x₂` is an
//! independent tridiagonal system. Drift uses central differences where
//! both off-diagonal weights stay nonnegative and one-sided differences
//! otherwise, so each step matrix is an M-matrix. At `x₁ = 0` the equation
//! degenerates to `∂tV − rV = 0`. At `x₁ = x₁^max` the solution is taken
//! to be `g(t)·x₁`, which turns the equation into `g' = αg − m(t)`.

use rayon::prelude::*;

use crate::error::{GmxbError, Result};
use crate::grid::{TimeTag, ValueSurface};
use crate::model::{MarketModel, MortalityModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    /// Fully-implicit time steps per year.
    pub steps_per_year: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            steps_per_year: 100,
        }
    }
}

impl StepperConfig {
    pub fn new(steps_per_year: usize) -> Result<Self> {
        if steps_per_year == 0 {
            return Err(GmxbError::InvalidInput(
                "steps_per_year must be at least 1".into(),
            ));
        }
        Ok(Self { steps_per_year })
    }

    /// Time steps doubled per grid refinement level, so `Δt ∝ h`.
    pub fn refined(self, level: usize) -> Self {
        Self {
            steps_per_year: self.steps_per_year << level,
        }
    }

    fn steps(&self, length: f64) -> usize {
        ((self.steps_per_year as f64 * length - 1e-9).ceil() as usize).max(1)
    }
}

/// Source term `m(t)·x₁` added between exercise times.
#[derive(Clone, Copy)]
pub enum SourceTerm<'a> {
    Zero,
    /// Death benefit: the estate receives the account at the death density.
    DeathBenefit(&'a MortalityModel),
    /// Any rate function of time.
    Rate(&'a (dyn Fn(f64) -> f64 + Sync)),
}

impl std::fmt::Debug for SourceTerm<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SourceTerm::Zero => f.write_str("Zero"),
            SourceTerm::DeathBenefit(m) => f.debug_tuple("DeathBenefit").field(m).finish(),
            SourceTerm::Rate(_) => f.write_str("Rate(..)"),
        }
    }
}

impl SourceTerm<'_> {
    /// Coefficient of `x₁` at time `t`.
    pub fn rate(&self, t: f64) -> f64 {
        match self {
            SourceTerm::Zero => 0.0,
            SourceTerm::DeathBenefit(m) => m.hazard_rate(t).unwrap_or(0.0),
            SourceTerm::Rate(f) => f(t),
        }
    }

    pub fn value(&self, x1: f64, t: f64) -> f64 {
        self.rate(t) * x1
    }
}

/// One backward-Euler step of `g' = αg − m`.
#[inline]
fn boundary_step(g: f64, alpha: f64, source_rate: f64, dt: f64) -> f64 {
    (g + dt * source_rate) / (1.0 + alpha * dt)
}

/// Advances the boundary slope `g` from `t_end` back to `t_start`.
pub fn step_boundary_row(
    g_end: f64,
    market: &MarketModel,
    source: SourceTerm<'_>,
    cfg: &StepperConfig,
    t_start: f64,
    t_end: f64,
) -> Result<f64> {
    let length = t_end - t_start;
    if !(length > 0.0) {
        return Err(GmxbError::Domain(format!(
            "empty interval [{t_start}, {t_end}]"
        )));
    }
    let steps = cfg.steps(length);
    let dt = length / steps as f64;
    let mut g = g_end;
    for k in (0..steps).rev() {
        let mid = t_start + (k as f64 + 0.5) * dt;
        g = boundary_step(g, market.alpha, source.rate(mid), dt);
    }
    Ok(g)
}

/// Off-diagonal weights of `ℒ` at each interior node, per unit time.
struct Stencil {
    lower: Vec<f64>,
    upper: Vec<f64>,
    upwinded: usize,
}

fn stencil(x: &[f64], market: &MarketModel) -> Stencil {
    let n = x.len();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut upwinded = 0;
    let var = market.sigma * market.sigma;
    let mu = market.drift();
    for i in 1..n - 1 {
        let hm = x[i] - x[i - 1];
        let hp = x[i + 1] - x[i];
        let diff = var * x[i] * x[i];
        let conv = mu * x[i];
        let a = diff / (hm * (hm + hp)) - conv / (hm + hp);
        let b = diff / (hp * (hm + hp)) + conv / (hm + hp);
        if a >= 0.0 && b >= 0.0 {
            lower[i] = a;
            upper[i] = b;
        } else {
            upwinded += 1;
            lower[i] = diff / (hm * (hm + hp));
            upper[i] = diff / (hp * (hm + hp));
            if conv >= 0.0 {
                upper[i] += conv / hp;
            } else {
                lower[i] -= conv / hm;
            }
        }
    }
    Stencil {
        lower,
        upper,
        upwinded,
    }
}

/// Number of interior `x₁` nodes where the drift falls back to one-sided
/// differences.
pub fn upwind_node_count(x1: &[f64], market: &MarketModel) -> usize {
    stencil(x1, market).upwinded
}

/// Thomas algorithm for the step matrix. Rows `0` and `n−1` are set by the
/// caller through `diag`/`rhs`; the M-matrix keeps every pivot positive.
fn solve_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &mut [f64],
    scratch: &mut [f64],
) -> Result<()> {
    let n = diag.len();
    let mut pivot = diag[0];
    if !(pivot > 0.0) {
        return Err(GmxbError::Numerical("singular tridiagonal system".into()));
    }
    scratch[0] = sup[0] / pivot;
    rhs[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i] * scratch[i - 1];
        if !(pivot > 0.0) {
            return Err(GmxbError::Numerical(format!(
                "nonpositive pivot {pivot} at row {i}"
            )));
        }
        scratch[i] = sup[i] / pivot;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
    Ok(())
}

/// Advances `v_end` (at `t_end⁻`) back to `t_start⁺`.
pub fn step_interval(
    v_end: &ValueSurface,
    market: &MarketModel,
    source: SourceTerm<'_>,
    cfg: &StepperConfig,
    t_start: f64,
    t_end: f64,
    tag: TimeTag,
) -> Result<ValueSurface> {
    step_interval_observed(v_end, market, source, cfg, t_start, t_end, tag, |_, _| {})
}

/// As [`step_interval`], calling `observe(t, values)` after every time step
/// (the last call is at `t_start`).
#[allow(clippy::too_many_arguments)]
pub fn step_interval_observed(
    v_end: &ValueSurface,
    market: &MarketModel,
    source: SourceTerm<'_>,
    cfg: &StepperConfig,
    t_start: f64,
    t_end: f64,
    tag: TimeTag,
    mut observe: impl FnMut(f64, &[f64]),
) -> Result<ValueSurface> {
    let length = t_end - t_start;
    if !(length > 0.0) {
        return Err(GmxbError::Domain(format!(
            "empty interval [{t_start}, {t_end}]"
        )));
    }
    let grid = v_end.grid().clone();
    let x = grid.x1();
    let n1 = grid.n1();
    let steps = cfg.steps(length);
    let dt = length / steps as f64;
    let st = stencil(x, market);
    let x_max = grid.x1_max();

    let mut sub = vec![0.0; n1];
    let mut diag = vec![0.0; n1];
    let mut sup = vec![0.0; n1];
    diag[0] = 1.0 + market.r * dt;
    for i in 1..n1 - 1 {
        sub[i] = -dt * st.lower[i];
        sup[i] = -dt * st.upper[i];
        diag[i] = 1.0 + dt * (st.lower[i] + st.upper[i] + market.r);
    }
    diag[n1 - 1] = 1.0;

    let mut values = v_end.values().to_vec();
    for k in (0..steps).rev() {
        let mid = t_start + (k as f64 + 0.5) * dt;
        let rate = source.rate(mid);
        values
            .par_chunks_mut(n1)
            .map_init(
                || vec![0.0; n1],
                |scratch, line| {
                    let g = line[n1 - 1] / x_max;
                    for i in 1..n1 - 1 {
                        line[i] += dt * rate * x[i];
                    }
                    line[n1 - 1] = boundary_step(g, market.alpha, rate, dt) * x_max;
                    solve_tridiagonal(&sub, &diag, &sup, line, scratch)
                },
            )
            .collect::<Result<Vec<()>>>()?;
        observe(t_start + k as f64 * dt, &values);
    }
    ValueSurface::new(grid, values, tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{default_grid, GridSpec, Side};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn plus(n: usize) -> TimeTag {
        TimeTag::Anniversary {
            n,
            side: Side::Plus,
        }
    }

    fn minus(n: usize) -> TimeTag {
        TimeTag::Anniversary {
            n,
            side: Side::Minus,
        }
    }

    fn small_grid() -> Arc<GridSpec> {
        let axis: Vec<f64> = (0..=40).map(|k| 10.0 * k as f64).collect();
        Arc::new(GridSpec::new(axis.clone(), vec![0.0, 50.0, 100.0]).unwrap())
    }

    #[test]
    fn constant_discounts_at_risk_free_rate() {
        let g = Arc::new(default_grid(100.0, 0));
        let m = MarketModel::new(0.2, 0.05, 0.0).unwrap();
        let v = ValueSurface::from_fn(g.clone(), minus(1), |_| 3.0).unwrap();
        // a constant is not of the form g·x₁ at the top row, so only look
        // well inside the domain
        let out = step_interval(
            &v,
            &m,
            SourceTerm::Zero,
            &StepperConfig::default(),
            0.0,
            1.0,
            plus(0),
        )
        .unwrap();
        let exact = 3.0 * (-0.05f64).exp();
        for i in 0..30 {
            for j in 0..g.n2() {
                let rel = (out.at(i, j) - exact).abs() / exact;
                assert!(rel < 1e-4, "node ({i},{j}): {rel}");
            }
        }
    }

    #[test]
    fn account_is_a_martingale_without_fee() {
        let g = Arc::new(default_grid(100.0, 0));
        let m = MarketModel::new(0.25, 0.03, 0.0).unwrap();
        let v = ValueSurface::from_fn(g.clone(), minus(1), |x| x.x1).unwrap();
        let out = step_interval(
            &v,
            &m,
            SourceTerm::Zero,
            &StepperConfig::default(),
            0.0,
            1.0,
            plus(0),
        )
        .unwrap();
        for i in 1..g.n1() {
            for j in [0, 20, 64] {
                let rel = (out.at(i, j) - g.x1()[i]).abs() / g.x1()[i];
                assert!(rel < 1e-3, "node ({i},{j}): {rel}");
            }
        }
    }

    #[test]
    fn boundary_row_examples() {
        let cfg = StepperConfig::default();
        let flat = MarketModel::new(0.15, 0.05, 0.0).unwrap();
        assert_eq!(
            step_boundary_row(1.0, &flat, SourceTerm::Zero, &cfg, 0.0, 1.0).unwrap(),
            1.0
        );

        let fee = MarketModel::new(0.15, 0.05, 0.01).unwrap();
        let g = step_boundary_row(1.0, &fee, SourceTerm::Zero, &cfg, 0.0, 1.0).unwrap();
        // exact ODE solution e^{−αΔ}; backward Euler error is O(α²Δ·Δt)
        assert_abs_diff_eq!(g, (-0.01f64).exp(), epsilon = 1e-6);

        let m = MortalityModel::constant(0.02, 50.0).unwrap();
        let none = MarketModel::new(0.2, 0.04, 0.0).unwrap();
        let g =
            step_boundary_row(0.0, &none, SourceTerm::DeathBenefit(&m), &cfg, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(g, 0.02, epsilon = 1e-12);
        assert!(step_boundary_row(0.0, &none, SourceTerm::Zero, &cfg, 1.0, 1.0).is_err());
    }

    #[test]
    fn top_row_follows_boundary_ode() {
        let g = small_grid();
        let m = MarketModel::new(0.2, 0.04, 0.015).unwrap();
        let mort = MortalityModel::constant(0.02, 50.0).unwrap();
        let cfg = StepperConfig::new(50).unwrap();
        let v = ValueSurface::from_fn(g.clone(), minus(3), |x| 0.7 * x.x1).unwrap();
        let out = step_interval(
            &v,
            &m,
            SourceTerm::DeathBenefit(&mort),
            &cfg,
            2.0,
            3.0,
            plus(2),
        )
        .unwrap();
        let g0 =
            step_boundary_row(0.7, &m, SourceTerm::DeathBenefit(&mort), &cfg, 2.0, 3.0).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(out.at(40, j), g0 * 400.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn stencil_is_upwinded_where_central_fails() {
        let x: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let no_vol = MarketModel::new(0.0, 0.05, 0.0).unwrap();
        assert_eq!(upwind_node_count(&x, &no_vol), 9);
        let vol = MarketModel::new(0.3, 0.05, 0.0).unwrap();
        assert_eq!(upwind_node_count(&x, &vol), 0);
    }

    #[test]
    fn zero_volatility_transports_the_payoff() {
        // σ = 0: V(x, 0) = e^{−r}·V(x·e^{r−α}, 1); check at a node well inside
        let axis: Vec<f64> = (0..=400).map(|k| k as f64).collect();
        let g = Arc::new(GridSpec::new(axis, vec![0.0, 1.0, 2.0]).unwrap());
        let m = MarketModel::new(0.0, 0.05, 0.02).unwrap();
        let v = ValueSurface::from_fn(g.clone(), minus(1), |x| x.x1 * x.x1).unwrap();
        let out = step_interval(
            &v,
            &m,
            SourceTerm::Zero,
            &StepperConfig::new(2000).unwrap(),
            0.0,
            1.0,
            plus(0),
        )
        .unwrap();
        let x0 = 100.0;
        let exact = (-0.05f64).exp() * (x0 * 0.03f64.exp()).powi(2);
        assert!((out.at(100, 1) - exact).abs() / exact < 5e-3);
    }

    #[test]
    fn lines_are_independent() {
        let g = small_grid();
        let m = MarketModel::new(0.2, 0.04, 0.01).unwrap();
        let v = ValueSurface::from_fn(g.clone(), minus(1), |x| (x.x1 - x.x2).max(0.0) + x.x2 * 0.1)
            .unwrap();
        let out = step_interval(
            &v,
            &m,
            SourceTerm::Zero,
            &StepperConfig::default(),
            0.0,
            1.0,
            plus(0),
        )
        .unwrap();
        // same line alone
        let one = Arc::new(GridSpec::new(g.x1().to_vec(), vec![0.0, 50.0, 51.0]).unwrap());
        let w =
            ValueSurface::from_fn(one.clone(), minus(1), |x| (x.x1 - 50.0).max(0.0) + 5.0).unwrap();
        let alone = step_interval(
            &w,
            &m,
            SourceTerm::Zero,
            &StepperConfig::default(),
            0.0,
            1.0,
            plus(0),
        )
        .unwrap();
        for i in 0..g.n1() {
            assert_eq!(out.at(i, 1), alone.at(i, 1));
        }
    }

    proptest! {
        #[test]
        fn ordered_inputs_give_ordered_outputs(seed in any::<u64>(), sigma in 0.0f64..0.6, r in 0.0f64..0.1, alpha in 0.0f64..0.05) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = small_grid();
            let m = MarketModel::new(sigma, r, alpha).unwrap();
            let lo: Vec<f64> = (0..g.len()).map(|_| rng.random_range(0.0..100.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|v| v + rng.random_range(0.0..5.0)).collect();
            let cfg = StepperConfig::new(20).unwrap();
            let a = step_interval(&ValueSurface::new(g.clone(), lo, minus(1)).unwrap(), &m, SourceTerm::Zero, &cfg, 0.0, 1.0, plus(0)).unwrap();
            let b = step_interval(&ValueSurface::new(g.clone(), hi, minus(1)).unwrap(), &m, SourceTerm::Zero, &cfg, 0.0, 1.0, plus(0)).unwrap();
            for (u, v) in a.values().iter().zip(b.values()) {
                prop_assert!(*u <= *v + 1e-10);
            }
        }

        #[test]
        fn discrete_maximum_principle(seed in any::<u64>(), sigma in 0.0f64..0.6, r in 0.0f64..0.1) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = small_grid();
            // α = 0 keeps the top-row ODE from growing the boundary
            let m = MarketModel::new(sigma, r, 0.0).unwrap();
            let vals: Vec<f64> = (0..g.len()).map(|_| rng.random_range(0.0..100.0)).collect();
            let v = ValueSurface::new(g.clone(), vals, minus(1)).unwrap();
            let out = step_interval(&v, &m, SourceTerm::Zero, &StepperConfig::new(20).unwrap(), 0.0, 1.0, plus(0)).unwrap();
            prop_assert!(out.max_abs() <= v.max_abs() + 1e-10);
        }
    }
}
