//! Reference contract settings.

use std::collections::{BTreeMap, BTreeSet};

use crate::contracts::{GlwbSpec, GmwbSpec};
use crate::model::MarketModel;

/// GLWB market: σ = 0.20, r = 0.04, α = 0.015.
pub fn glwb_market() -> MarketModel {
    MarketModel {
        sigma: 0.20,
        r: 0.04,
        alpha: 0.015,
    }
}

/// GLWB contract with δ = 0.05, β = 0.06, N = 57, triennial ratchets and
/// surrender penalties of 3%, 3%, 2%, 1% over the first anniversaries.
pub fn glwb_spec() -> GlwbSpec {
    let expiry = 57;
    GlwbSpec {
        delta: 0.05,
        beta: 0.06,
        penalties: BTreeMap::from([(0, 0.03), (1, 0.03), (2, 0.02), (3, 0.01)]),
        ratchets: (1..expiry).filter(|n| n % 3 == 0).collect::<BTreeSet<_>>(),
        expiry,
        w0: 100.0,
    }
}

/// GMWB market: σ = 0.15, r = 0.05, α = 0.01.
pub fn gmwb_market() -> MarketModel {
    MarketModel {
        sigma: 0.15,
        r: 0.05,
        alpha: 0.01,
    }
}

/// GMWB contract with G = 10 over ten years and a penalty schedule falling
/// from 8% to 3% by year six, zero afterwards.
pub fn gmwb_spec() -> GmwbSpec {
    GmwbSpec {
        withdrawal: 10.0,
        penalties: BTreeMap::from([
            (0, 0.08),
            (1, 0.08),
            (2, 0.07),
            (3, 0.06),
            (4, 0.05),
            (5, 0.04),
            (6, 0.03),
        ]),
        expiry: 10,
        w0: 100.0,
    }
}
