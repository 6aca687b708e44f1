//! Run configuration: TOML with one table per concern.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use gmxb::{
    ContractKind, GlwbSpec, GmwbSpec, MarketModel, McConfig, MortalityModel, SearchMode,
    StepperConfig,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const GLWB_PRESET: &str = include_str!("../presets/glwb-table1.toml");
pub const GMWB_PRESET: &str = include_str!("../presets/gmwb-table2.toml");

/// A configuration problem, reported with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn field_error(field: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError(format!("field `{field}`: {msg}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub contract: ContractSection,
    pub market: MarketSection,
    #[serde(default)]
    pub mortality: MortalitySection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub stepper: StepperSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSection {
    /// `glwb` or `gmwb`.
    pub kind: String,
    pub w0: f64,
    pub expiry: usize,
    /// κ₀, κ₁, …; anniversaries past the end of the list carry no penalty.
    #[serde(default)]
    pub penalties: Vec<f64>,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
    pub ratchets: Option<Vec<usize>>,
    pub withdrawal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub sigma: f64,
    pub r: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MortalitySection {
    /// `bundled` or a path to an `# annual_hazard` table, relative to the
    /// config file.
    pub table: String,
    pub initial_age: f64,
}

impl Default for MortalitySection {
    fn default() -> Self {
        Self {
            table: "bundled".into(),
            initial_age: 65.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub refinement_level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    pub steps_per_year: usize,
}

impl Default for StepperSection {
    fn default() -> Self {
        Self {
            steps_per_year: StepperConfig::default().steps_per_year,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    /// `dense` or `extreme-points`.
    pub mode: String,
    pub partition: usize,
    pub override_certification: bool,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            mode: "dense".into(),
            partition: gmxb::exercise::DEFAULT_PARTITION,
            override_certification: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub paths: usize,
    pub seed: u64,
    pub substeps_per_year: usize,
}

impl Default for McSection {
    fn default() -> Self {
        let d = McConfig::default();
        Self {
            paths: d.paths,
            seed: d.seed,
            substeps_per_year: d.substeps_per_year,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("gmxb-out"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
}

/// Where a configuration came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Preset(&'static str),
    File(PathBuf),
}

/// A parsed and validated configuration.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub source: Source,
    /// SHA-256 of the configuration text plus any mortality table it reads.
    pub hash: String,
    pub contract: ContractParams,
    pub market: MarketModel,
    pub stepper: StepperConfig,
    pub mode: SearchMode,
    pub mc: McConfig,
}

#[derive(Debug, Clone)]
pub enum ContractParams {
    Glwb(GlwbSpec, MortalityModel),
    Gmwb(GmwbSpec),
}

impl ContractParams {
    pub fn kind(&self) -> ContractKind {
        match self {
            ContractParams::Glwb(..) => ContractKind::Glwb,
            ContractParams::Gmwb(_) => ContractKind::Gmwb,
        }
    }

    pub fn w0(&self) -> f64 {
        match self {
            ContractParams::Glwb(s, _) => s.w0,
            ContractParams::Gmwb(s) => s.w0,
        }
    }
}

/// Resolves `arg` as a preset name or a config file path and validates it.
pub fn load(arg: &str) -> Result<Loaded, ConfigError> {
    let (text, source) = match arg {
        "glwb-table1" => (GLWB_PRESET.to_string(), Source::Preset("glwb-table1")),
        "gmwb-table2" => (GMWB_PRESET.to_string(), Source::Preset("gmwb-table2")),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read config {path}: {e}")))?;
            (text, Source::File(PathBuf::from(path)))
        }
    };
    let base = match &source {
        Source::File(p) => p.parent().map(Path::to_path_buf).unwrap_or_default(),
        Source::Preset(_) => PathBuf::new(),
    };
    from_str(&text, source, &base)
}

/// Parses configuration text; relative table paths resolve against `base`.
pub fn from_str(text: &str, source: Source, base: &Path) -> Result<Loaded, ConfigError> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| ConfigError(format!("malformed config: {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());

    let m = &config.market;
    for (name, v, signed) in [
        ("market.sigma", m.sigma, false),
        ("market.r", m.r, true),
        ("market.alpha", m.alpha, false),
    ] {
        if !v.is_finite() || (!signed && v < 0.0) {
            return Err(field_error(name, format!("invalid value {v}")));
        }
    }
    let market = MarketModel::new(config.market.sigma, config.market.r, config.market.alpha)
        .map_err(|e| field_error("market", e))?;
    let stepper = StepperConfig::new(config.stepper.steps_per_year)
        .map_err(|e| field_error("stepper.steps_per_year", e))?;
    let mode = match config.search.mode.as_str() {
        "dense" if config.search.partition >= 2 => SearchMode::Dense {
            partition: config.search.partition,
        },
        "dense" => return Err(field_error("search.partition", "must be at least 2")),
        "extreme-points" => SearchMode::ExtremePoints {
            override_certification: config.search.override_certification,
        },
        other => {
            return Err(field_error(
                "search.mode",
                format!("expected `dense` or `extreme-points`, found `{other}`"),
            ))
        }
    };
    if config.mc.paths == 0 {
        return Err(field_error("mc.paths", "must be at least 1"));
    }
    if config.mc.substeps_per_year == 0 {
        return Err(field_error("mc.substeps_per_year", "must be at least 1"));
    }
    let mc = McConfig {
        paths: config.mc.paths,
        seed: config.mc.seed,
        substeps_per_year: config.mc.substeps_per_year,
    };

    let c = &config.contract;
    for (k, &kappa) in c.penalties.iter().enumerate() {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(field_error(
                &format!("contract.penalties[{k}]"),
                format!("{kappa} outside [0, 1]"),
            ));
        }
    }
    let penalties: BTreeMap<usize, f64> = c
        .penalties
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, k)| *k != 0.0)
        .collect();
    let unexpected = |name: &str, present: bool| {
        if present {
            Err(field_error(
                &format!("contract.{name}"),
                format!("not used by a {} contract", c.kind),
            ))
        } else {
            Ok(())
        }
    };
    let required = |name: &str, v: Option<f64>| {
        v.ok_or_else(|| {
            field_error(
                &format!("contract.{name}"),
                format!("required for a {} contract", c.kind),
            )
        })
    };

    let contract = match c.kind.as_str() {
        "glwb" => {
            unexpected("withdrawal", c.withdrawal.is_some())?;
            let spec = GlwbSpec {
                delta: required("delta", c.delta)?,
                beta: required("beta", c.beta)?,
                penalties,
                ratchets: c
                    .ratchets
                    .clone()
                    .unwrap_or_default()
                    .into_iter()
                    .collect::<BTreeSet<_>>(),
                expiry: c.expiry,
                w0: c.w0,
            };
            spec.validate().map_err(|e| field_error("contract", e))?;
            let mortality = if config.mortality.table == "bundled" {
                MortalityModel::bundled()
            } else {
                let path = base.join(&config.mortality.table);
                let table = std::fs::read_to_string(&path).map_err(|e| {
                    field_error(
                        "mortality.table",
                        format!("cannot read {}: {e}", path.display()),
                    )
                })?;
                hasher.update(table.as_bytes());
                MortalityModel::from_table_str(&table, config.mortality.initial_age)
                    .map_err(|e| field_error("mortality.table", e))?
            };
            if (spec.expiry as f64) < mortality.cutoff() {
                return Err(field_error(
                    "contract.expiry",
                    format!(
                        "{} precedes the mortality cutoff {}",
                        spec.expiry,
                        mortality.cutoff()
                    ),
                ));
            }
            ContractParams::Glwb(spec, mortality)
        }
        "gmwb" => {
            unexpected("delta", c.delta.is_some())?;
            unexpected("beta", c.beta.is_some())?;
            unexpected("ratchets", c.ratchets.is_some())?;
            let spec = GmwbSpec {
                withdrawal: required("withdrawal", c.withdrawal)?,
                penalties,
                expiry: c.expiry,
                w0: c.w0,
            };
            spec.validate().map_err(|e| field_error("contract", e))?;
            ContractParams::Gmwb(spec)
        }
        other => {
            return Err(field_error(
                "contract.kind",
                format!("expected `glwb` or `gmwb`, found `{other}`"),
            ))
        }
    };

    let hash = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(Loaded {
        config,
        source,
        hash,
        contract,
        market,
        stepper,
        mode,
        mc,
    })
}
