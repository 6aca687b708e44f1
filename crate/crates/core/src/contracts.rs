//! Event semantics of the two guarantees.
//!
//! At an exercise time the holder picks an action `λ`. The writer pays the
//! cash flow `f_{x,n}(λ)` and the contract moves to the post-event state
//! `**f**_{x,n}(λ)`. Everything the pricer needs from a contract goes
//! through the [`Contract`] trait.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{GmxbError, Result};
use crate::model::{ContractState, ExerciseSchedule, MortalityModel};

/// Cash paid by the writer and the resulting state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventOutcome {
    pub new_state: ContractState,
    pub cash: f64,
}

/// Closed interval of admissible actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleSet {
    pub lo: f64,
    pub hi: f64,
}

impl AdmissibleSet {
    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.lo && lambda <= self.hi
    }

    /// Uniform partition `λ₁ < … < λ_p` including both endpoints.
    pub fn partition(&self, p: usize) -> Vec<f64> {
        assert!(p >= 2, "partition needs at least two points");
        let width = self.hi - self.lo;
        let last = (p - 1) as f64;
        (0..p)
            .map(|k| {
                if k == p - 1 {
                    self.hi
                } else {
                    self.lo + width * k as f64 / last
                }
            })
            .collect()
    }

    /// Spacing of the uniform `p`-point partition.
    pub fn cell_width(&self, p: usize) -> f64 {
        (self.hi - self.lo) / (p - 1) as f64
    }
}

/// Finite set of actions sufficient for the supremum, and whether that
/// sufficiency is backed by the convexity argument.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub actions: Vec<f64>,
    pub certified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractKind {
    Glwb,
    Gmwb,
}

impl std::fmt::Display for ContractKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ContractKind::Glwb => f.write_str("glwb"),
            ContractKind::Gmwb => f.write_str("gmwb"),
        }
    }
}

/// Contract-agnostic view used by the pricer, the exercise optimizer and
/// the Monte Carlo oracle.
pub trait Contract: Sync {
    fn kind(&self) -> ContractKind;

    fn schedule(&self) -> &ExerciseSchedule;

    /// Initial deposit; the contract is priced at `(w0, w0)`.
    fn w0(&self) -> f64;

    fn admissible(&self) -> AdmissibleSet;

    /// Cash flow and post-event state for action `lambda` at anniversary `n`.
    fn event(&self, x: ContractState, n: usize, lambda: f64) -> Result<EventOutcome>;

    /// Worst-case cost at expiry.
    fn payoff(&self, x: ContractState) -> f64;

    /// Whether the optimum at anniversary `n` is attained on the candidate set.
    fn bang_bang_certified(&self, n: usize) -> bool;

    fn candidate_set(&self, x: ContractState, n: usize) -> CandidateSet;

    /// Coefficient `m(t)` of the source term `m(t)·x₁` between exercise times.
    fn source_rate(&self, t: f64) -> f64;

    /// `g(T)` in `V(x₁^max, x₂, T) = g(T)·x₁^max`.
    fn boundary_slope_at_expiry(&self) -> f64;

    /// Whether the value is homogeneous of degree one in the state,
    /// `V(c·x) = c·V(x)`.
    fn homogeneous(&self) -> bool {
        false
    }

    /// Translates an action chosen at a grid node to the state `x` actually
    /// reached by a simulated path.
    fn transfer_action(&self, node: ContractState, lambda: f64, x: ContractState) -> f64 {
        let _ = (node, x);
        lambda
    }
}

fn check_penalties(penalties: &BTreeMap<usize, f64>) -> Result<()> {
    match penalties.iter().find(|(_, k)| !(0.0..=1.0).contains(*k)) {
        Some((n, k)) => Err(GmxbError::InvalidInput(format!(
            "penalty rate {k} at anniversary {n} outside [0, 1]"
        ))),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// GLWB

/// Guaranteed lifelong withdrawal benefit parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GlwbSpec {
    /// Contract withdrawal rate δ.
    pub delta: f64,
    /// Bonus (roll-up) rate β applied on nonwithdrawal.
    pub beta: f64,
    /// Surrender penalty κₙ by anniversary; anniversaries not listed carry 0.
    pub penalties: BTreeMap<usize, f64>,
    /// Anniversaries on which the benefit base ratchets up to the account.
    pub ratchets: BTreeSet<usize>,
    /// Expiry N in years.
    pub expiry: usize,
    pub w0: f64,
}

impl GlwbSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(GmxbError::InvalidInput(format!(
                "withdrawal rate delta = {} outside [0, 1]",
                self.delta
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(GmxbError::InvalidInput(format!(
                "bonus rate beta = {} < 0",
                self.beta
            )));
        }
        if !(self.w0 > 0.0 && self.w0.is_finite()) {
            return Err(GmxbError::InvalidInput(format!(
                "w0 = {} must be positive",
                self.w0
            )));
        }
        if self.expiry == 0 {
            return Err(GmxbError::InvalidInput(
                "expiry must be at least one year".into(),
            ));
        }
        check_penalties(&self.penalties)
    }

    pub fn penalty(&self, n: usize) -> f64 {
        self.penalties.get(&n).copied().unwrap_or(0.0)
    }

    pub fn ratchet(&self, n: usize) -> bool {
        self.ratchets.contains(&n)
    }
}

/// GLWB cash flow and state transition at anniversary `n`.
///
/// `λ = 0` is nonwithdrawal (bonus, possibly ratchet), `λ ∈ (0, 1]`
/// withdraws `λ·δ·x₂`, and `λ ∈ (1, 2]` surrenders the fraction `λ − 1` of
/// what remains after a contract-rate withdrawal. Cash is weighted by the
/// survival probability at the anniversary.
pub fn glwb_event(
    spec: &GlwbSpec,
    mortality: &MortalityModel,
    x: ContractState,
    n: usize,
    lambda: f64,
) -> Result<EventOutcome> {
    if !(0.0..=2.0).contains(&lambda) {
        return Err(GmxbError::Domain(format!(
            "GLWB action {lambda} outside [0, 2]"
        )));
    }
    let survival = mortality.survival(n as f64)?;
    Ok(glwb_outcome(spec, survival, x, n, lambda))
}

fn glwb_outcome(
    spec: &GlwbSpec,
    survival: f64,
    x: ContractState,
    n: usize,
    lambda: f64,
) -> EventOutcome {
    let ratchet = if spec.ratchet(n) { 1.0 } else { 0.0 };
    if lambda == 0.0 {
        return EventOutcome {
            new_state: ContractState {
                x1: x.x1,
                x2: (x.x2 * (1.0 + spec.beta)).max(ratchet * x.x1),
            },
            cash: 0.0,
        };
    }

    let withdrawal = lambda.min(1.0) * spec.delta * x.x2;
    let account = (x.x1 - withdrawal).max(0.0);
    let after_withdrawal = ContractState {
        x1: account,
        x2: x.x2.max(ratchet * account),
    };
    if lambda <= 1.0 {
        return EventOutcome {
            new_state: after_withdrawal,
            cash: survival * withdrawal,
        };
    }

    let surrendered = (lambda - 1.0) * (1.0 - spec.penalty(n)) * account;
    EventOutcome {
        new_state: after_withdrawal.scaled(2.0 - lambda),
        cash: survival * (withdrawal + surrendered),
    }
}

/// GLWB worst-case cost at expiry: the writer owes nothing.
pub fn glwb_payoff(_x: ContractState) -> f64 {
    0.0
}

/// A GLWB together with the mortality model it is priced against.
#[derive(Debug, Clone)]
pub struct GlwbContract {
    spec: GlwbSpec,
    mortality: MortalityModel,
    schedule: ExerciseSchedule,
    survival: Vec<f64>,
}

impl GlwbContract {
    /// Fails if the spec is invalid or if holders may outlive the contract
    /// (`N < t*`).
    pub fn new(spec: GlwbSpec, mortality: MortalityModel) -> Result<Self> {
        spec.validate()?;
        if (spec.expiry as f64) < mortality.cutoff() {
            return Err(GmxbError::InvalidInput(format!(
                "GLWB expiry N = {} precedes the mortality cutoff t* = {}",
                spec.expiry,
                mortality.cutoff()
            )));
        }
        let schedule = ExerciseSchedule::annual(spec.expiry);
        let survival = schedule
            .times()
            .iter()
            .map(|&t| mortality.survival(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec,
            mortality,
            schedule,
            survival,
        })
    }

    pub fn spec(&self) -> &GlwbSpec {
        &self.spec
    }

    pub fn mortality(&self) -> &MortalityModel {
        &self.mortality
    }
}

impl Contract for GlwbContract {
    fn kind(&self) -> ContractKind {
        ContractKind::Glwb
    }

    fn homogeneous(&self) -> bool {
        true
    }

    fn schedule(&self) -> &ExerciseSchedule {
        &self.schedule
    }

    fn w0(&self) -> f64 {
        self.spec.w0
    }

    fn admissible(&self) -> AdmissibleSet {
        AdmissibleSet { lo: 0.0, hi: 2.0 }
    }

    fn event(&self, x: ContractState, n: usize, lambda: f64) -> Result<EventOutcome> {
        if !(0.0..=2.0).contains(&lambda) {
            return Err(GmxbError::Domain(format!(
                "GLWB action {lambda} outside [0, 2]"
            )));
        }
        Ok(glwb_outcome(&self.spec, self.survival[n], x, n, lambda))
    }

    fn payoff(&self, x: ContractState) -> f64 {
        glwb_payoff(x)
    }

    fn bang_bang_certified(&self, _n: usize) -> bool {
        true
    }

    fn candidate_set(&self, _x: ContractState, _n: usize) -> CandidateSet {
        CandidateSet {
            actions: vec![0.0, 1.0, 2.0],
            certified: true,
        }
    }

    fn source_rate(&self, t: f64) -> f64 {
        self.mortality.hazard_rate(t).unwrap_or(0.0)
    }

    fn boundary_slope_at_expiry(&self) -> f64 {
        0.0
    }
}

// ---------------------------------------------------------------------------
// GMWB

/// Guaranteed minimum withdrawal benefit parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GmwbSpec {
    /// Contract withdrawal amount G per anniversary.
    pub withdrawal: f64,
    /// Penalty κₙ by anniversary, including κ_N used by the expiry payoff.
    pub penalties: BTreeMap<usize, f64>,
    pub expiry: usize,
    pub w0: f64,
}

impl GmwbSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.withdrawal >= 0.0 && self.withdrawal.is_finite()) {
            return Err(GmxbError::InvalidInput(format!(
                "withdrawal amount G = {} must be nonnegative",
                self.withdrawal
            )));
        }
        if !(self.w0 > 0.0 && self.w0.is_finite()) {
            return Err(GmxbError::InvalidInput(format!(
                "w0 = {} must be positive",
                self.w0
            )));
        }
        if self.expiry == 0 {
            return Err(GmxbError::InvalidInput(
                "expiry must be at least one year".into(),
            ));
        }
        check_penalties(&self.penalties)
    }

    pub fn penalty(&self, n: usize) -> f64 {
        self.penalties.get(&n).copied().unwrap_or(0.0)
    }
}

/// GMWB cash flow and state transition for withdrawing the fraction
/// `lambda` of the benefit base.
pub fn gmwb_event(
    spec: &GmwbSpec,
    x: ContractState,
    n: usize,
    lambda: f64,
) -> Result<EventOutcome> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(GmxbError::Domain(format!(
            "GMWB action {lambda} outside [0, 1]"
        )));
    }
    Ok(gmwb_outcome(spec, x, n, lambda))
}

fn gmwb_outcome(spec: &GmwbSpec, x: ContractState, n: usize, lambda: f64) -> EventOutcome {
    let g = spec.withdrawal;
    let amount = lambda * x.x2;
    let cash = if amount <= g.min(x.x2) {
        amount
    } else {
        g + (1.0 - spec.penalty(n)) * (amount - g)
    };
    EventOutcome {
        new_state: ContractState {
            x1: (x.x1 - amount).max(0.0),
            x2: (1.0 - lambda) * x.x2,
        },
        cash,
    }
}

/// `max(x₁, (1 − κ_N)·x₂)`.
pub fn gmwb_payoff(spec: &GmwbSpec, x: ContractState) -> f64 {
    x.x1.max((1.0 - spec.penalty(spec.expiry)) * x.x2)
}

#[derive(Debug, Clone)]
pub struct GmwbContract {
    spec: GmwbSpec,
    schedule: ExerciseSchedule,
}

impl GmwbContract {
    pub fn new(spec: GmwbSpec) -> Result<Self> {
        spec.validate()?;
        let schedule = ExerciseSchedule::annual(spec.expiry);
        Ok(Self { spec, schedule })
    }

    pub fn spec(&self) -> &GmwbSpec {
        &self.spec
    }
}

impl Contract for GmwbContract {
    fn kind(&self) -> ContractKind {
        ContractKind::Gmwb
    }

    fn schedule(&self) -> &ExerciseSchedule {
        &self.schedule
    }

    fn w0(&self) -> f64 {
        self.spec.w0
    }

    fn admissible(&self) -> AdmissibleSet {
        AdmissibleSet { lo: 0.0, hi: 1.0 }
    }

    fn event(&self, x: ContractState, n: usize, lambda: f64) -> Result<EventOutcome> {
        gmwb_event(&self.spec, x, n, lambda)
    }

    fn payoff(&self, x: ContractState) -> f64 {
        gmwb_payoff(&self.spec, x)
    }

    /// The cash flow is linear in the state only without a penalty or
    /// without a free withdrawal amount.
    fn bang_bang_certified(&self, n: usize) -> bool {
        self.spec.penalty(n) == 0.0 || self.spec.withdrawal == 0.0
    }

    fn candidate_set(&self, x: ContractState, n: usize) -> CandidateSet {
        let actions = if x.x2 > 0.0 {
            let free = (self.spec.withdrawal / x.x2).min(1.0);
            let mut a = vec![0.0, free, 1.0];
            a.dedup();
            a
        } else {
            vec![0.0]
        };
        CandidateSet {
            actions,
            certified: self.bang_bang_certified(n),
        }
    }

    fn source_rate(&self, _t: f64) -> f64 {
        0.0
    }

    fn boundary_slope_at_expiry(&self) -> f64 {
        1.0
    }

    /// Nodes store a fraction of their own benefit base; a path at a nearby
    /// state keeps the withdrawal amount, except that a full surrender stays
    /// a full surrender.
    fn transfer_action(&self, node: ContractState, lambda: f64, x: ContractState) -> f64 {
        if lambda >= 1.0 {
            1.0
        } else if x.x2 > 0.0 {
            (lambda * node.x2 / x.x2).min(1.0)
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn state(x1: f64, x2: f64) -> ContractState {
        ContractState { x1, x2 }
    }

    fn glwb(delta: f64, beta: f64, kappa: f64, ratchet: bool) -> GlwbSpec {
        GlwbSpec {
            delta,
            beta,
            penalties: [(1, kappa)].into_iter().collect(),
            ratchets: if ratchet {
                [1].into_iter().collect()
            } else {
                BTreeSet::new()
            },
            expiry: 57,
            w0: 100.0,
        }
    }

    fn gmwb(g: f64, kappa: f64) -> GmwbSpec {
        GmwbSpec {
            withdrawal: g,
            penalties: [(1, kappa)].into_iter().collect(),
            expiry: 10,
            w0: 100.0,
        }
    }

    fn alive() -> MortalityModel {
        MortalityModel::constant(0.0, 60.0).unwrap()
    }

    #[test]
    fn glwb_contract_rate_withdrawal() {
        let out = glwb_event(
            &glwb(0.05, 0.06, 0.0, false),
            &alive(),
            state(100.0, 100.0),
            1,
            1.0,
        )
        .unwrap();
        assert_abs_diff_eq!(out.new_state.x1, 95.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.new_state.x2, 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.cash, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn glwb_bonus_on_nonwithdrawal() {
        let out = glwb_event(
            &glwb(0.05, 0.06, 0.0, false),
            &alive(),
            state(100.0, 100.0),
            1,
            0.0,
        )
        .unwrap();
        assert_eq!(out.new_state, state(100.0, 106.0));
        assert_eq!(out.cash, 0.0);
    }

    #[test]
    fn glwb_full_surrender() {
        let out = glwb_event(
            &glwb(0.05, 0.06, 0.03, false),
            &alive(),
            state(100.0, 100.0),
            1,
            2.0,
        )
        .unwrap();
        assert_eq!(out.new_state, state(0.0, 0.0));
        assert_abs_diff_eq!(out.cash, 97.15, epsilon = 1e-12);
    }

    #[test]
    fn glwb_ratchet_dominates_bonus() {
        let out = glwb_event(
            &glwb(0.05, 0.06, 0.0, true),
            &alive(),
            state(120.0, 100.0),
            1,
            0.0,
        )
        .unwrap();
        assert_eq!(out.new_state, state(120.0, 120.0));
        assert_eq!(out.cash, 0.0);
    }

    #[test]
    fn glwb_cash_is_survival_weighted() {
        let m = MortalityModel::constant(0.02, 50.0).unwrap();
        let out = glwb_event(
            &glwb(0.05, 0.0, 0.0, false),
            &m,
            state(100.0, 100.0),
            10,
            1.0,
        )
        .unwrap();
        assert_abs_diff_eq!(out.cash, 0.8 * 5.0, epsilon = 1e-12);
    }

    #[test]
    fn glwb_rejects_out_of_range_action() {
        let spec = glwb(0.05, 0.06, 0.0, false);
        assert!(glwb_event(&spec, &alive(), state(1.0, 1.0), 1, 2.5).is_err());
        assert!(glwb_event(&spec, &alive(), state(1.0, 1.0), 1, -0.1).is_err());
    }

    #[test]
    fn gmwb_free_withdrawal() {
        let out = gmwb_event(&gmwb(10.0, 0.08), state(100.0, 100.0), 1, 0.1).unwrap();
        assert_abs_diff_eq!(out.new_state.x1, 90.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.new_state.x2, 90.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.cash, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn gmwb_full_surrender_pays_penalty() {
        let out = gmwb_event(&gmwb(10.0, 0.08), state(100.0, 100.0), 1, 1.0).unwrap();
        assert_eq!(out.new_state, state(0.0, 0.0));
        assert_abs_diff_eq!(out.cash, 92.8, epsilon = 1e-12);
    }

    #[test]
    fn gmwb_account_floors_at_zero() {
        let out = gmwb_event(&gmwb(10.0, 0.08), state(5.0, 100.0), 1, 0.1).unwrap();
        assert_eq!(out.new_state.x1, 0.0);
        assert_abs_diff_eq!(out.new_state.x2, 90.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.cash, 10.0, epsilon = 1e-12);
        assert!(gmwb_event(&gmwb(10.0, 0.0), state(1.0, 1.0), 1, 1.5).is_err());
    }

    #[test]
    fn payoffs() {
        for x in [state(0.0, 0.0), state(100.0, 100.0), state(1e6, 0.0)] {
            assert_eq!(glwb_payoff(x), 0.0);
        }
        let mut spec = gmwb(10.0, 0.0);
        assert_eq!(gmwb_payoff(&spec, state(50.0, 100.0)), 100.0);
        assert_eq!(gmwb_payoff(&spec, state(100.0, 0.0)), 100.0);
        spec.penalties.insert(spec.expiry, 0.1);
        assert_abs_diff_eq!(
            gmwb_payoff(&spec, state(50.0, 100.0)),
            90.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn candidate_sets() {
        let c = GlwbContract::new(glwb(0.05, 0.06, 0.03, true), MortalityModel::bundled()).unwrap();
        let cs = c.candidate_set(state(3.0, 700.0), 1);
        assert_eq!(cs.actions, vec![0.0, 1.0, 2.0]);
        assert!(cs.certified);

        let m = GmwbContract::new(gmwb(10.0, 0.08)).unwrap();
        let cs = m.candidate_set(state(50.0, 100.0), 2);
        assert_eq!(cs.actions, vec![0.0, 0.1, 1.0]);
        assert!(cs.certified);
        let cs = m.candidate_set(state(50.0, 5.0), 1);
        assert_eq!(cs.actions, vec![0.0, 1.0]);
        assert!(!cs.certified);
        assert_eq!(m.candidate_set(state(50.0, 0.0), 2).actions, vec![0.0]);
    }

    #[test]
    fn glwb_refuses_short_expiry() {
        let mut spec = glwb(0.05, 0.06, 0.0, false);
        spec.expiry = 40;
        assert!(GlwbContract::new(spec, MortalityModel::bundled()).is_err());
    }

    #[test]
    fn gmwb_cash_is_not_convex_in_state_with_penalty() {
        // f(x) at λ = 1 equals x₂ below G and G + (1−κ)(x₂−G) above:
        // the midpoint of (G/2) and (3G/2) lies above the chord.
        let spec = gmwb(10.0, 0.08);
        let f = |x2: f64| gmwb_event(&spec, state(50.0, x2), 1, 1.0).unwrap().cash;
        let (a, b) = (5.0, 15.0);
        assert!(f(0.5 * (a + b)) > 0.5 * (f(a) + f(b)) + 1e-9);

        let free = gmwb(10.0, 0.0);
        let g = |x2: f64| gmwb_event(&free, state(50.0, x2), 1, 1.0).unwrap().cash;
        assert_abs_diff_eq!(g(10.0), 0.5 * (g(a) + g(b)), epsilon = 1e-12);
    }

    fn glwb_spec_strategy() -> impl Strategy<Value = GlwbSpec> {
        (0.0f64..0.2, 0.0f64..0.2, 0.0f64..1.0, any::<bool>())
            .prop_map(|(d, b, k, r)| glwb(d, b, k, r))
    }

    proptest! {
        #[test]
        fn glwb_cash_continuous_at_contract_rate(spec in glwb_spec_strategy(), x1 in 0.0f64..500.0, x2 in 0.0f64..500.0) {
            let m = alive();
            let x = state(x1, x2);
            let at = glwb_event(&spec, &m, x, 1, 1.0).unwrap().cash;
            let right = glwb_event(&spec, &m, x, 1, 1.0 + 1e-12).unwrap().cash;
            prop_assert!((at - right).abs() <= 1e-9 * (1.0 + at.abs()));
            prop_assert!((at - spec.delta * x2).abs() <= 1e-12 * (1.0 + at));
        }

        #[test]
        fn glwb_event_is_homogeneous(spec in glwb_spec_strategy(), x1 in 0.0f64..500.0, x2 in 0.0f64..500.0,
                                     lambda in 0.0f64..=2.0, c in 0.1f64..10.0) {
            let m = alive();
            let a = glwb_event(&spec, &m, state(x1, x2).scaled(c), 1, lambda).unwrap();
            let b = glwb_event(&spec, &m, state(x1, x2), 1, lambda).unwrap();
            let tol = 1e-9 * (1.0 + c * (x1 + x2));
            prop_assert!((a.cash - c * b.cash).abs() <= tol);
            prop_assert!((a.new_state.x1 - c * b.new_state.x1).abs() <= tol);
            prop_assert!((a.new_state.x2 - c * b.new_state.x2).abs() <= tol);
        }

        #[test]
        fn glwb_partial_surrender_scales_contract_rate_state(spec in glwb_spec_strategy(), x1 in 0.0f64..500.0,
                                                             x2 in 0.0f64..500.0, lambda in 1.0f64..=2.0) {
            let m = alive();
            let one = glwb_event(&spec, &m, state(x1, x2), 1, 1.0).unwrap().new_state;
            let out = glwb_event(&spec, &m, state(x1, x2), 1, lambda).unwrap().new_state;
            prop_assert_eq!(out, one.scaled(2.0 - lambda));
        }

        #[test]
        fn glwb_event_convex_in_state(spec in glwb_spec_strategy(), a1 in 0.0f64..300.0, a2 in 0.0f64..300.0,
                                      b1 in 0.0f64..300.0, b2 in 0.0f64..300.0, lambda in 0.0f64..=2.0, t in 0.0f64..=1.0) {
            let m = alive();
            let f = |x: ContractState| glwb_event(&spec, &m, x, 1, lambda).unwrap();
            let (fa, fb) = (f(state(a1, a2)), f(state(b1, b2)));
            let mid = f(state(t * a1 + (1.0 - t) * b1, t * a2 + (1.0 - t) * b2));
            let chord = |u: f64, v: f64| t * u + (1.0 - t) * v;
            let tol = 1e-9 * (1.0 + a1 + a2 + b1 + b2);
            prop_assert!(mid.cash <= chord(fa.cash, fb.cash) + tol);
            prop_assert!(mid.new_state.x1 <= chord(fa.new_state.x1, fb.new_state.x1) + tol);
            prop_assert!(mid.new_state.x2 <= chord(fa.new_state.x2, fb.new_state.x2) + tol);
        }

        #[test]
        fn gmwb_benefit_linear_in_action(g in 0.0f64..50.0, x1 in 0.0f64..300.0, x2 in 0.0f64..300.0,
                                         a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let spec = gmwb(g, 0.05);
            let x = state(x1, x2);
            let f = |l: f64| gmwb_event(&spec, x, 1, l).unwrap();
            let mid = f(0.5 * (a + b));
            prop_assert!((mid.new_state.x2 - 0.5 * (f(a).new_state.x2 + f(b).new_state.x2)).abs() < 1e-9);
            // concave in λ: kink at λx₂ = G bends downwards
            prop_assert!(mid.cash >= 0.5 * (f(a).cash + f(b).cash) - 1e-9);
        }
    }
}
