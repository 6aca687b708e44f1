//! Worst-case funding cost of GLWB and GMWB variable-annuity guarantees.
//!
//! The value `V(x₁, x₂, t)` of a contract with account `x₁` and benefit base
//! `x₂` is computed backward in time: an implicit finite-difference solve
//! between anniversaries and a supremum over withdrawal actions at each one.

pub mod contracts;
pub mod diagnostics;
pub mod error;
pub mod exercise;
pub mod grid;
pub mod model;
pub mod presets;
pub mod pricer;
pub mod stepper;

pub use contracts::{
    AdmissibleSet, CandidateSet, Contract, ContractKind, EventOutcome, GlwbContract, GlwbSpec,
    GmwbContract, GmwbSpec,
};
pub use diagnostics::{
    cm_check, homogeneity_check, interior_lattice, mc_policy_value, CmReport, McConfig, McEstimate,
    Violation, ViolationKind,
};
pub use error::{GmxbError, Result};
pub use exercise::{apply_exercise, bang_bang_gap, ControlMap, GapReport, SearchMode};
pub use grid::{default_grid, GridSpec, Side, TimeTag, ValueSurface};
pub use model::{ContractState, ExerciseSchedule, MarketModel, MortalityModel};
pub use pricer::{price, PreservationFlag, PricingConfig, PricingResult, Retention};
pub use stepper::{step_interval, SourceTerm, StepperConfig};
