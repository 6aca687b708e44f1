//! Monte Carlo value of a fixed exercise policy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::contracts::Contract;
use crate::error::{GmxbError, Result};
use crate::exercise::ControlMap;
use crate::model::{ContractState, MarketModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub paths: usize,
    pub seed: u64,
    /// Left-endpoint quadrature steps per year for the death benefit.
    pub substeps_per_year: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: 1_000_000,
            seed: 20_140_527,
            substeps_per_year: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub paths: usize,
}

/// Discounted cash flows of one path under the policy in `maps`.
fn simulate_path(
    contract: &dyn Contract,
    market: &MarketModel,
    maps: &[ControlMap],
    substeps_per_year: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let schedule = contract.schedule();
    let mut x = ContractState {
        x1: contract.w0(),
        x2: contract.w0(),
    };
    let mut total = 0.0;
    let drift = market.r - market.alpha - 0.5 * market.sigma * market.sigma;

    for (n, map) in maps.iter().enumerate() {
        let t = schedule.time(n);
        let (node, lambda) = map.nearest(x);
        let lambda = contract.transfer_action(node, lambda, x);
        let out = contract.event(x, n, lambda)?;
        total += (-market.r * t).exp() * out.cash;
        x = out.new_state;
        if x.x1 == 0.0 && x.x2 == 0.0 {
            return Ok(total);
        }
        if x.x1 == 0.0 {
            continue;
        }

        let t_next = schedule.next_time(n);
        let length = t_next - t;
        let mid = 0.5 * (t + t_next);
        let death_benefit = contract.source_rate(mid) > 0.0;
        let steps = if death_benefit {
            ((substeps_per_year as f64 * length).ceil() as usize).max(1)
        } else {
            1
        };
        let dt = length / steps as f64;
        let vol = market.sigma * dt.sqrt();
        for k in 0..steps {
            let s = t + k as f64 * dt;
            if death_benefit {
                total += (-market.r * s).exp() * contract.source_rate(s + 0.5 * dt) * x.x1 * dt;
            }
            let z: f64 = StandardNormal.sample(rng);
            x.x1 *= (drift * dt + vol * z).exp();
        }
    }

    Ok(total + (-market.r * schedule.expiry()).exp() * contract.payoff(x))
}

/// Estimates the value of the policy given by `maps` (one per anniversary)
/// starting from `(w0, w0)`.
///
/// The account moves by exact lognormal steps. Each path draws from its own
/// ChaCha8 stream selected by the path index, and the per-path results are
/// reduced in path order, so the estimate does not depend on scheduling.
pub fn mc_policy_value(
    contract: &dyn Contract,
    market: &MarketModel,
    maps: &[ControlMap],
    cfg: &McConfig,
) -> Result<McEstimate> {
    if cfg.paths == 0 || cfg.substeps_per_year == 0 {
        return Err(GmxbError::InvalidInput(
            "Monte Carlo needs at least one path and one substep".into(),
        ));
    }
    let n_ex = contract.schedule().len();
    if maps.len() < n_ex {
        return Err(GmxbError::MissingControlMap(maps.len()));
    }
    if let Some((k, _)) = maps.iter().enumerate().find(|(k, m)| m.anniversary != *k) {
        return Err(GmxbError::MissingControlMap(k));
    }

    let values: Vec<f64> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(p as u64);
            simulate_path(
                contract,
                market,
                &maps[..n_ex],
                cfg.substeps_per_year,
                &mut rng,
            )
        })
        .collect::<Result<_>>()?;

    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        estimate: mean,
        standard_error: (var / n).sqrt(),
        paths: values.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::{GlwbContract, GlwbSpec, GmwbContract, GmwbSpec};
    use crate::grid::{GridSpec, Side, TimeTag, ValueSurface};
    use crate::model::MortalityModel;
    use std::collections::BTreeSet;
    use std::sync::Arc;

    fn constant_policy(contract: &dyn Contract, lambda: f64) -> Vec<ControlMap> {
        let axis: Vec<f64> = (0..=40).map(|k| 5.0 * k as f64).collect();
        let grid = Arc::new(GridSpec::new(axis.clone(), axis).unwrap());
        (0..contract.schedule().len())
            .map(|n| ControlMap {
                grid: grid.clone(),
                anniversary: n,
                lambda_star: grid_nodes(&grid)
                    .iter()
                    .map(|x| {
                        if x.x2 > 0.0 {
                            lambda * 10.0 / x.x2
                        } else {
                            0.0
                        }
                    })
                    .map(|l| l.min(1.0))
                    .collect(),
                value: vec![0.0; grid.len()],
            })
            .collect()
    }

    fn grid_nodes(g: &GridSpec) -> Vec<ContractState> {
        let mut out = vec![ContractState::default(); g.len()];
        for j in 0..g.n2() {
            for i in 0..g.n1() {
                out[g.index(i, j)] = g.node(i, j);
            }
        }
        out
    }

    #[test]
    fn zero_contract_costs_nothing() {
        let spec = GlwbSpec {
            delta: 0.0,
            beta: 0.0,
            penalties: Default::default(),
            ratchets: BTreeSet::new(),
            expiry: 4,
            w0: 100.0,
        };
        let c = GlwbContract::new(spec, MortalityModel::constant(0.0, 4.0).unwrap()).unwrap();
        let m = MarketModel::new(0.0, 0.04, 0.01).unwrap();
        let maps = constant_policy(&c, 0.0);
        let est = mc_policy_value(
            &c,
            &m,
            &maps,
            &McConfig {
                paths: 100,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(est.estimate, 0.0);
        assert_eq!(est.standard_error, 0.0);
    }

    #[test]
    fn deterministic_withdrawals_match_closed_form() {
        // σ = 0, α = 0: withdraw G = 10 at t = 0..4, account grows at r
        let spec = GmwbSpec {
            withdrawal: 10.0,
            penalties: Default::default(),
            expiry: 5,
            w0: 100.0,
        };
        let c = GmwbContract::new(spec).unwrap();
        let r: f64 = 0.05;
        let m = MarketModel::new(0.0, r, 0.0).unwrap();
        let maps = constant_policy(&c, 1.0);
        let est = mc_policy_value(
            &c,
            &m,
            &maps,
            &McConfig {
                paths: 10,
                ..Default::default()
            },
        )
        .unwrap();

        // hand oracle: x₁ after each withdrawal then growth; x₂ drops by 10
        let mut x1: f64 = 100.0;
        let mut x2: f64 = 100.0;
        let mut pv = 0.0;
        for n in 0..5 {
            pv += (-r * n as f64).exp() * 10.0;
            x1 = (x1 - 10.0).max(0.0) * r.exp();
            x2 -= 10.0;
        }
        pv += (-r * 5.0).exp() * x1.max(x2);
        assert!((est.estimate - pv).abs() < 1e-9, "{} vs {pv}", est.estimate);
        assert!(est.standard_error < 1e-12);
    }

    #[test]
    fn death_benefit_quadrature() {
        // no withdrawals, σ = 0, α = 0, r = 0: the estate receives x₁ = 100
        // times the probability of dying within the horizon
        let spec = GlwbSpec {
            delta: 0.0,
            beta: 0.0,
            penalties: Default::default(),
            ratchets: BTreeSet::new(),
            expiry: 10,
            w0: 100.0,
        };
        let c = GlwbContract::new(spec, MortalityModel::constant(0.1, 10.0).unwrap()).unwrap();
        let m = MarketModel::new(0.0, 0.0, 0.0).unwrap();
        let maps = constant_policy(&c, 0.0);
        let est = mc_policy_value(
            &c,
            &m,
            &maps,
            &McConfig {
                paths: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((est.estimate - 100.0).abs() < 1e-9, "{}", est.estimate);
    }

    #[test]
    fn estimate_is_reproducible_and_errors_on_missing_maps() {
        let spec = GmwbSpec {
            withdrawal: 10.0,
            penalties: Default::default(),
            expiry: 3,
            w0: 100.0,
        };
        let c = GmwbContract::new(spec).unwrap();
        let m = MarketModel::new(0.15, 0.05, 0.01).unwrap();
        let maps = constant_policy(&c, 1.0);
        let cfg = McConfig {
            paths: 2000,
            seed: 7,
            substeps_per_year: 10,
        };
        let a = mc_policy_value(&c, &m, &maps, &cfg).unwrap();
        let b = mc_policy_value(&c, &m, &maps, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.standard_error > 0.0);
        assert!(matches!(
            mc_policy_value(&c, &m, &maps[..2], &cfg),
            Err(GmxbError::MissingControlMap(2))
        ));
        let _ = ValueSurface::from_fn(
            maps[0].grid.clone(),
            TimeTag::Anniversary {
                n: 0,
                side: Side::Plus,
            },
            |_| 0.0,
        );
    }
}
