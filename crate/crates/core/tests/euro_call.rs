use std::sync::Arc;

use gmxb::{
    default_grid, step_interval, MarketModel, Side, SourceTerm, StepperConfig, TimeTag,
    ValueSurface,
};
use statrs::distribution::{ContinuousCDF, Normal};

fn black_scholes_call(s: f64, k: f64, r: f64, sigma: f64, t: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / (sigma * t.sqrt());
    let d2 = d1 - sigma * t.sqrt();
    s * n.cdf(d1) - k * (-r * t).exp() * n.cdf(d2)
}

/// Relative error of the one-year call at x₁ = 100 on refinement `level`.
fn call_error(level: usize) -> f64 {
    let market = MarketModel::new(0.2, 0.04, 0.0).unwrap();
    let g = Arc::new(default_grid(100.0, level));
    let top = g.x1_max();
    // the top row carries g·x₁max with g = 1 for a deep in-the-money call
    let payoff = ValueSurface::from_fn(
        g.clone(),
        TimeTag::Anniversary {
            n: 1,
            side: Side::Minus,
        },
        |x| {
            if x.x1 == top {
                top
            } else {
                (x.x1 - 100.0).max(0.0)
            }
        },
    )
    .unwrap();
    let cfg = StepperConfig::default().refined(level);
    let v = step_interval(
        &payoff,
        &market,
        SourceTerm::Zero,
        &cfg,
        0.0,
        1.0,
        TimeTag::Anniversary {
            n: 0,
            side: Side::Plus,
        },
    )
    .unwrap();
    let exact = black_scholes_call(100.0, 100.0, 0.04, 0.2, 1.0);
    (v.at(g.x1_index_of(100.0).unwrap(), 0) - exact).abs() / exact
}

#[test]
fn oracle_value() {
    // reference value computed independently of the library
    let exact = black_scholes_call(100.0, 100.0, 0.04, 0.2, 1.0);
    assert!((exact - 9.925053717274437).abs() < 1e-9, "{exact}");
}

#[test]
fn call_converges_to_closed_form() {
    let e1 = call_error(1);
    let e2 = call_error(2);
    assert!(e1 < 2.5e-3, "level 1 error {e1}");
    assert!(e1 / e2 >= 2.0, "ratio {}", e1 / e2);
}
