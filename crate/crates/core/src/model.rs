//! Market dynamics, mortality and the shared domain types.
//!
//! Between exercise times the investment account follows a geometric
//! Brownian motion under the risk-neutral measure,
//!
//!   dX₁ / X₁ = (r − α) dt + σ dZ,
//!
//! and the benefit base is not invested. Mortality enters the lifelong
//! benefit through the density of deaths `M(t)`, with survival
//! `R(t) = 1 − ∫₀ᵗ M(s) ds`.

use crate::error::{GmxbError, Result};

/// Risk-neutral market parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketModel {
    /// Volatility of the investment account (1/√year).
    pub sigma: f64,
    /// Risk-free rate (1/year).
    pub r: f64,
    /// Hedging fee deducted continuously from the investment account (1/year).
    pub alpha: f64,
}

impl MarketModel {
    pub fn new(sigma: f64, r: f64, alpha: f64) -> Result<Self> {
        if !(sigma.is_finite() && r.is_finite() && alpha.is_finite()) {
            return Err(GmxbError::InvalidInput(
                "market parameters must be finite".into(),
            ));
        }
        if sigma < 0.0 {
            return Err(GmxbError::InvalidInput(format!("sigma = {sigma} < 0")));
        }
        if alpha < 0.0 {
            return Err(GmxbError::InvalidInput(format!("alpha = {alpha} < 0")));
        }
        Ok(Self { sigma, r, alpha })
    }

    /// Drift of the investment account, `r − α`.
    pub fn drift(&self) -> f64 {
        self.r - self.alpha
    }
}

/// State of a contract: investment account `x1` and withdrawal benefit `x2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContractState {
    pub x1: f64,
    pub x2: f64,
}

impl ContractState {
    pub fn new(x1: f64, x2: f64) -> Result<Self> {
        if !(x1 >= 0.0 && x2 >= 0.0 && x1.is_finite() && x2.is_finite()) {
            return Err(GmxbError::Domain(format!(
                "contract state ({x1}, {x2}) must be finite and nonnegative"
            )));
        }
        Ok(Self { x1, x2 })
    }

    pub fn scaled(self, c: f64) -> Self {
        Self {
            x1: c * self.x1,
            x2: c * self.x2,
        }
    }
}

/// Piecewise-constant death density with exact survival.
///
/// Interval `k` covers `[starts[k], starts[k+1])` (the last one ends at
/// `end`) and carries `rates[k]`. The density is right-continuous at the
/// breakpoints and zero past the table. The cutoff `t*` is the first time
/// survival reaches zero, or the end of the table if it never does;
/// survival is defined to be zero from `t*` on.
#[derive(Debug, Clone, PartialEq)]
pub struct MortalityModel {
    starts: Vec<f64>,
    end: f64,
    rates: Vec<f64>,
    /// Cumulative deaths at each interval start.
    cumulative: Vec<f64>,
    cutoff: f64,
}

const EXHAUSTED: f64 = 1e-12;

impl MortalityModel {
    /// Builds a model from contiguous intervals starting at 0.
    pub fn piecewise(starts: Vec<f64>, end: f64, rates: Vec<f64>) -> Result<Self> {
        if starts.is_empty() || starts.len() != rates.len() {
            return Err(GmxbError::InvalidInput(
                "mortality table needs one rate per interval".into(),
            ));
        }
        if starts[0] != 0.0 {
            return Err(GmxbError::InvalidInput(format!(
                "mortality table must start at t = 0, got {}",
                starts[0]
            )));
        }
        if !starts.windows(2).all(|w| w[0] < w[1]) || *starts.last().unwrap() >= end {
            return Err(GmxbError::InvalidInput(
                "mortality intervals must be strictly increasing".into(),
            ));
        }
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(GmxbError::InvalidInput(format!(
                "mortality rate {r} must be finite and nonnegative"
            )));
        }

        let mut cumulative = Vec::with_capacity(starts.len());
        let mut acc = 0.0;
        for k in 0..starts.len() {
            cumulative.push(acc);
            let stop = starts.get(k + 1).copied().unwrap_or(end);
            acc += rates[k] * (stop - starts[k]);
        }
        if acc > 1.0 + 1e-9 {
            return Err(GmxbError::InvalidInput(format!(
                "mortality table integrates to {acc} > 1"
            )));
        }
        // survival reaches zero inside the last interval with deaths
        let mut cutoff = end;
        if acc >= 1.0 - EXHAUSTED {
            if let Some(k) = rates.iter().rposition(|&r| r > 0.0) {
                let stop = starts.get(k + 1).copied().unwrap_or(end);
                let hit = starts[k] + (1.0 - cumulative[k]) / rates[k];
                cutoff = if (stop - hit).abs() < 1e-9 {
                    stop
                } else {
                    hit.min(stop)
                };
            }
        }

        Ok(Self {
            starts,
            end,
            rates,
            cumulative,
            cutoff,
        })
    }

    /// Constant density `rate` on `[0, horizon)`.
    pub fn constant(rate: f64, horizon: f64) -> Result<Self> {
        Self::piecewise(vec![0.0], horizon, vec![rate])
    }

    /// Annual rates `rates[k]` on `[k, k+1)`.
    pub fn annual(rates: Vec<f64>) -> Result<Self> {
        let end = rates.len() as f64;
        let starts = (0..rates.len()).map(|k| k as f64).collect();
        Self::piecewise(starts, end, rates)
    }

    /// Synthetic Gompertz–Makeham table for a holder aged 65 at time zero,
    /// truncated so that nobody survives past age 122 (t* = 57).
    ///
    /// Force of mortality `A + B·c^age` with A = 2.2e-4, B = 2.7e-6,
    /// c = 1.124. Annual death fractions are differences of the
    /// Gompertz–Makeham survival curve; the residual survivors at age 121
    /// all die in the final year.
    pub fn bundled() -> Self {
        const AGE: f64 = 65.0;
        const HORIZON: usize = 57;
        let (a, b, c) = (2.2e-4_f64, 2.7e-6_f64, 1.124_f64);
        let survival = |t: f64| (-a * t - b * c.powf(AGE) * (c.powf(t) - 1.0) / c.ln()).exp();
        let mut rates: Vec<f64> = (0..HORIZON)
            .map(|k| survival(k as f64) - survival(k as f64 + 1.0))
            .collect();
        rates[HORIZON - 1] = survival((HORIZON - 1) as f64);
        Self::annual(rates).expect("bundled mortality table is valid")
    }

    /// Parses a table of `age_start rate` records preceded by the
    /// `# annual_hazard` header. Ages before `initial_age` are dropped and
    /// the remaining intervals are shifted so `initial_age` maps to t = 0.
    pub fn from_table_str(text: &str, initial_age: f64) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, "# annual_hazard")) => {}
            Some((no, other)) => {
                return Err(GmxbError::InvalidInput(format!(
                    "mortality table line {no}: expected header '# annual_hazard', found '{other}'"
                )))
            }
            None => return Err(GmxbError::InvalidInput("empty mortality table".into())),
        }

        let mut ages = Vec::new();
        let mut rates = Vec::new();
        for (no, line) in lines {
            if line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let parse = |f: Option<&str>, what: &str| -> Result<f64> {
                f.ok_or_else(|| {
                    GmxbError::InvalidInput(format!("mortality table line {no}: missing {what}"))
                })?
                .parse::<f64>()
                .map_err(|e| {
                    GmxbError::InvalidInput(format!("mortality table line {no}: bad {what}: {e}"))
                })
            };
            let age = parse(fields.next(), "age_start")?;
            let rate = parse(fields.next(), "rate")?;
            if fields.next().is_some() {
                return Err(GmxbError::InvalidInput(format!(
                    "mortality table line {no}: expected two fields"
                )));
            }
            ages.push(age);
            rates.push(rate);
        }
        if ages.is_empty() {
            return Err(GmxbError::InvalidInput(
                "mortality table has no records".into(),
            ));
        }

        let first = ages.iter().position(|&a| a == initial_age).ok_or_else(|| {
            GmxbError::InvalidInput(format!(
                "mortality table has no record starting at age {initial_age}"
            ))
        })?;
        let end = ages.last().unwrap() + 1.0 - initial_age;
        let starts = ages[first..].iter().map(|a| a - initial_age).collect();
        Self::piecewise(starts, end, rates[first..].to_vec())
    }

    /// Serializes the table in the `# annual_hazard` file format.
    pub fn to_table_string(&self, initial_age: f64) -> String {
        let mut out = String::from("# annual_hazard\n");
        for (s, r) in self.starts.iter().zip(&self.rates) {
            out.push_str(&format!("{} {}\n", s + initial_age, r));
        }
        out
    }

    /// Time after which nobody survives.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    fn interval(&self, t: f64) -> Option<usize> {
        if t >= self.end {
            return None;
        }
        Some(self.starts.partition_point(|&s| s <= t) - 1)
    }

    /// Survival probability `R(t)`.
    pub fn survival(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(GmxbError::Domain(format!("survival at negative time {t}")));
        }
        if t >= self.cutoff {
            return Ok(0.0);
        }
        let k = self
            .interval(t)
            .expect("t below cutoff lies inside the table");
        let dead = self.cumulative[k] + self.rates[k] * (t - self.starts[k]);
        Ok((1.0 - dead).clamp(0.0, 1.0))
    }

    /// Death density `M(t)`; zero from the cutoff on.
    pub fn hazard_rate(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(GmxbError::Domain(format!("hazard at negative time {t}")));
        }
        if t >= self.cutoff {
            return Ok(0.0);
        }
        Ok(self.interval(t).map_or(0.0, |k| self.rates[k]))
    }

    /// `∫ₐᵇ M(s) ds` in closed form.
    pub fn integrated_hazard(&self, a: f64, b: f64) -> Result<f64> {
        if !(0.0 <= a && a <= b) {
            return Err(GmxbError::Domain(format!("bad interval [{a}, {b}]")));
        }
        let upto = |t: f64| -> f64 {
            let t = t.min(self.cutoff);
            match self.interval(t) {
                Some(k) => self.cumulative[k] + self.rates[k] * (t - self.starts[k]),
                None => {
                    let k = self.starts.len() - 1;
                    self.cumulative[k] + self.rates[k] * (self.end - self.starts[k])
                }
            }
        };
        Ok(upto(b) - upto(a))
    }
}

/// Exercise times `t₀ < … < t_{N−1}` and the expiry `T = t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExerciseSchedule {
    times: Vec<f64>,
    expiry: f64,
}

impl ExerciseSchedule {
    pub fn new(times: Vec<f64>, expiry: f64) -> Result<Self> {
        if times.is_empty() {
            return Err(GmxbError::InvalidInput("empty exercise schedule".into()));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) || *times.last().unwrap() >= expiry {
            return Err(GmxbError::InvalidInput(
                "exercise times must increase strictly and precede expiry".into(),
            ));
        }
        Ok(Self { times, expiry })
    }

    /// Anniversaries `0, 1, …, N−1` with expiry `N`.
    pub fn annual(years: usize) -> Self {
        assert!(years > 0, "annual schedule needs at least one year");
        Self {
            times: (0..years).map(|n| n as f64).collect(),
            expiry: years as f64,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn expiry(&self) -> f64 {
        self.expiry
    }

    pub fn time(&self, n: usize) -> f64 {
        self.times[n]
    }

    /// End of the interval following exercise time `n`.
    pub fn next_time(&self, n: usize) -> f64 {
        self.times.get(n + 1).copied().unwrap_or(self.expiry)
    }
}
