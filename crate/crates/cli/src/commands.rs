//! Subcommand implementations. Every file written starts with a block of
//! `# key: value` metadata lines.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gmxb::{
    bang_bang_gap, default_grid, homogeneity_check, interior_lattice, mc_policy_value, price,
    Contract, ContractKind, ControlMap, GlwbContract, GmwbContract, GmxbError, PricingConfig,
    PricingResult, SearchMode, Side,
};

use crate::config::{ContractParams, Loaded, Source};
use crate::CliError;

/// Relative allowance added to three standard errors in the MC comparison.
pub const MC_DISCRETIZATION_ALLOWANCE: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Price,
    ControlMaps,
    Slice { x1: f64, anniversary: usize },
    Verify,
    Converge { levels: usize },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Price => "price",
            Command::ControlMaps => "control-maps",
            Command::Slice { .. } => "slice",
            Command::Verify => "verify",
            Command::Converge { .. } => "converge",
        }
    }
}

pub fn build_contract(params: &ContractParams) -> Result<Box<dyn Contract>, CliError> {
    let built: gmxb::Result<Box<dyn Contract>> = match params {
        ContractParams::Glwb(spec, m) => {
            GlwbContract::new(spec.clone(), m.clone()).map(|c| Box::new(c) as Box<dyn Contract>)
        }
        ContractParams::Gmwb(spec) => {
            GmwbContract::new(spec.clone()).map(|c| Box::new(c) as Box<dyn Contract>)
        }
    };
    built.map_err(|e| CliError::config(e.to_string()))
}

/// Nodes whose action lies more than one partition cell from every
/// candidate, and the number of nodes considered. GMWB nodes with `x₂ = 0`
/// are skipped since every action is equivalent there.
pub fn off_extreme(map: &ControlMap, contract: &dyn Contract, partition: usize) -> (usize, usize) {
    let cell = contract.admissible().cell_width(partition);
    let g = &map.grid;
    let mut off = 0;
    let mut total = 0;
    for j in 0..g.n2() {
        for i in 0..g.n1() {
            let x = g.node(i, j);
            if contract.kind() == ContractKind::Gmwb && x.x2 == 0.0 {
                continue;
            }
            total += 1;
            let lambda = map.lambda_at(i, j);
            let near = contract
                .candidate_set(x, map.anniversary)
                .actions
                .iter()
                .any(|c| (lambda - c).abs() <= cell + 1e-12);
            if !near {
                off += 1;
            }
        }
    }
    (off, total)
}

/// Category of a GLWB action for reports, matching within `cell`.
pub fn glwb_label(lambda: f64, cell: f64) -> &'static str {
    let near = |e: f64| (lambda - e).abs() <= cell + 1e-12;
    if near(0.0) {
        "nonwithdrawal"
    } else if near(1.0) {
        "contract-rate"
    } else if near(2.0) {
        "surrender"
    } else {
        "fractional"
    }
}

/// Category of a GMWB action `λ` at benefit base `x2`, matching within
/// `cell` in units of `λ`.
pub fn gmwb_label(lambda: f64, x2: f64, g: f64, cell: f64) -> &'static str {
    let near = |e: f64| (lambda - e).abs() <= cell + 1e-12;
    if x2 == 0.0 || near(0.0) {
        "none"
    } else if near(1.0) {
        "surrender"
    } else if near((g / x2).min(1.0)) {
        "contract-amount"
    } else {
        "fractional"
    }
}

fn header(loaded: &Loaded, cmd: &Command, level: usize, steps_per_year: usize) -> String {
    let g = default_grid(loaded.contract.w0(), level);
    let mut h = String::new();
    let _ = writeln!(h, "# gmxb: {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(h, "# command: {}", cmd.name());
    let source = match &loaded.source {
        Source::Preset(p) => format!("preset {p}"),
        Source::File(p) => format!(
            "file {}",
            p.file_name().unwrap_or_default().to_string_lossy()
        ),
    };
    let _ = writeln!(h, "# config: {source}");
    let _ = writeln!(h, "# config_sha256: {}", loaded.hash);
    let kind = match loaded.contract.kind() {
        ContractKind::Glwb => "glwb",
        ContractKind::Gmwb => "gmwb",
    };
    let _ = writeln!(h, "# contract: {kind}");
    let _ = writeln!(h, "# grid: {}x{} (level {level})", g.n1(), g.n2());
    let _ = writeln!(h, "# steps_per_year: {steps_per_year}");
    let _ = writeln!(h, "# mode: {}", loaded.mode);
    h
}

fn write(dir: &Path, name: &str, header: &str, body: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, format!("{header}{body}"))
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn run_pricing(
    loaded: &Loaded,
    contract: &dyn Contract,
    level: usize,
    cm: bool,
) -> Result<PricingResult, CliError> {
    let grid = Arc::new(default_grid(contract.w0(), level));
    let cfg = PricingConfig {
        stepper: loaded.stepper.refined(level),
        mode: loaded.mode,
        cm_tolerance: cm.then_some(1e-8),
        ..Default::default()
    };
    price(contract, &loaded.market, grid, &cfg).map_err(CliError::from)
}

/// Runs `cmd` and returns the files written.
pub fn execute(loaded: &Loaded, cmd: &Command, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let contract = build_contract(&loaded.contract)?;
    let contract = contract.as_ref();
    let level = loaded.config.grid.refinement_level;
    let steps = loaded.stepper.refined(level).steps_per_year;
    let head = header(loaded, cmd, level, steps);

    match cmd {
        Command::Price => {
            let res = run_pricing(loaded, contract, level, false)?;
            let mut body = String::new();
            let _ = writeln!(body, "value_at_origin: {}", res.value_at_origin);
            for map in &res.control_maps {
                let cell = contract.admissible().cell_width(partition(loaded));
                let _ = writeln!(
                    body,
                    "actions_n{}: {}",
                    map.anniversary,
                    histogram(map, loaded, cell)
                );
            }
            Ok(vec![write(out, "price.txt", &head, &body)?])
        }
        Command::ControlMaps => {
            let res = run_pricing(loaded, contract, level, false)?;
            let mut files = Vec::new();
            for map in &res.control_maps {
                let cell = contract.admissible().cell_width(partition(loaded));
                let csv = match &loaded.contract {
                    ContractParams::Glwb(..) => map.to_csv(|_, l| glwb_label(l, cell).to_string()),
                    ContractParams::Gmwb(_) => map.to_csv(|x, l| format!("{}", l * x.x2)),
                };
                let name = format!("control_map_n{:02}.csv", map.anniversary);
                files.push(write(out, &name, &head, &csv)?);
            }
            Ok(files)
        }
        Command::Slice { x1, anniversary } => {
            let n = *anniversary;
            if n >= contract.schedule().len() {
                return Err(CliError::config(format!(
                    "--anniversary {n}: the contract has anniversaries 0..{}",
                    contract.schedule().len() - 1
                )));
            }
            let grid = default_grid(contract.w0(), level);
            let i = grid.x1_index_of(*x1).ok_or_else(|| {
                CliError::config(format!("--x1 {x1} is not a grid node at level {level}"))
            })?;
            let res = run_pricing(loaded, contract, level, false)?;
            let minus = res
                .surface(n, Side::Minus)
                .expect("anniversary surfaces are retained");
            let plus = res
                .surface(n, Side::Plus)
                .expect("anniversary surfaces are retained");
            let mut csv = String::from("x2,value_minus,value_plus\n");
            for (j, x2) in grid.x2().iter().enumerate() {
                let _ = writeln!(csv, "{x2},{},{}", minus.at(i, j), plus.at(i, j));
            }
            let name = format!("slice_x1_{x1}_n{n:02}.csv");
            Ok(vec![write(out, &name, &head, &csv)?])
        }
        Command::Verify => verify(loaded, contract, level, &head, out),
        Command::Converge { levels } => {
            let mut body = String::from("level,n1,n2,steps_per_year,value,change,ratio\n");
            let mut prev: Option<(f64, f64)> = None;
            for l in 0..=*levels {
                let res = run_pricing(loaded, contract, l, false)?;
                let g = default_grid(contract.w0(), l);
                let v = res.value_at_origin;
                let change = prev.map(|(p, _)| v - p);
                let ratio = match (prev, change) {
                    (Some((_, pc)), Some(c)) if pc.is_finite() && c != 0.0 => {
                        format!("{}", pc.abs() / c.abs())
                    }
                    _ => String::new(),
                };
                let _ = writeln!(
                    body,
                    "{l},{},{},{},{v},{},{ratio}",
                    g.n1(),
                    g.n2(),
                    loaded.stepper.refined(l).steps_per_year,
                    change.map(|c| c.to_string()).unwrap_or_default(),
                );
                prev = Some((v, change.unwrap_or(f64::NAN)));
            }
            Ok(vec![write(out, "converge.csv", &head, &body)?])
        }
    }
}

fn partition(loaded: &Loaded) -> usize {
    match loaded.mode {
        SearchMode::Dense { partition } => partition,
        SearchMode::ExtremePoints { .. } => gmxb::exercise::DEFAULT_PARTITION,
    }
}

fn histogram(map: &ControlMap, loaded: &Loaded, cell: f64) -> String {
    let g = &map.grid;
    let labels: &[&str] = match loaded.contract {
        ContractParams::Glwb(..) => &["nonwithdrawal", "contract-rate", "surrender", "fractional"],
        ContractParams::Gmwb(_) => &["none", "contract-amount", "surrender", "fractional"],
    };
    let mut counts = vec![0usize; labels.len()];
    for j in 0..g.n2() {
        for i in 0..g.n1() {
            let l = map.lambda_at(i, j);
            let label = match &loaded.contract {
                ContractParams::Glwb(..) => glwb_label(l, cell),
                ContractParams::Gmwb(s) => gmwb_label(l, g.node(i, j).x2, s.withdrawal, cell),
            };
            let k = labels
                .iter()
                .position(|x| *x == label)
                .expect("known label");
            counts[k] += 1;
        }
    }
    labels
        .iter()
        .zip(&counts)
        .map(|(l, c)| format!("{l}={c}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn verify(
    loaded: &Loaded,
    contract: &dyn Contract,
    level: usize,
    head: &str,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let res = run_pricing(loaded, contract, level, true)?;
    let partition = partition(loaded);
    let mut body = String::new();
    let _ = writeln!(body, "value_at_origin: {}", res.value_at_origin);

    for n in 0..contract.schedule().len() {
        let vp = res
            .surface(n, Side::Plus)
            .expect("anniversary surfaces are retained");
        let rep = bang_bang_gap(vp, contract, n, partition)?;
        let (gap, k) = rep.max_relative_gap();
        let x = rep
            .dense
            .grid
            .node(k % rep.dense.grid.n1(), k / rep.dense.grid.n1());
        let (off, total) = off_extreme(&rep.dense, contract, partition);
        let _ = writeln!(
            body,
            "gap_n{n}: max_relative {gap:e} at ({}, {}) certified {} off_extreme {off}/{total}",
            x.x1,
            x.x2,
            contract.bang_bang_certified(n),
        );
    }

    let mut csv = String::from("tag,kind,x1,x2,defect\n");
    for r in &res.diagnostics {
        let worst = r
            .worst()
            .map(|w| {
                format!(
                    " worst {} at ({}, {}) defect {:e}",
                    w.kind, w.x.x1, w.x.x2, w.defect
                )
            })
            .unwrap_or_default();
        let _ = writeln!(
            body,
            "cm_{}: convex {} monotone {} violations {} tolerance {:e}{worst}",
            r.tag,
            r.convex,
            r.monotone,
            r.violations.len(),
            r.tolerance,
        );
        r.violations_csv_rows(&mut csv);
    }

    if contract.homogeneous() {
        let s = res
            .surface(0, Side::Minus)
            .expect("anniversary surfaces are retained");
        let h = homogeneity_check(s, 2.0, &interior_lattice(contract.w0()));
        let _ = writeln!(body, "homogeneity_0-: {h:e}");
    }

    let mc = mc_policy_value(contract, &loaded.market, &res.control_maps, &loaded.mc)?;
    let diff = mc.estimate - res.value_at_origin;
    let bound = 3.0 * mc.standard_error + MC_DISCRETIZATION_ALLOWANCE * res.value_at_origin.abs();
    let _ = writeln!(body, "mc_paths: {}", mc.paths);
    let _ = writeln!(body, "mc_seed: {}", loaded.mc.seed);
    let _ = writeln!(body, "mc_estimate: {}", mc.estimate);
    let _ = writeln!(body, "mc_standard_error: {}", mc.standard_error);
    let _ = writeln!(body, "mc_minus_pde: {diff}");
    let _ = writeln!(body, "mc_bound: {bound}");
    let _ = writeln!(body, "mc_within_bound: {}", diff.abs() <= bound);

    Ok(vec![
        write(out, "verify.txt", head, &body)?,
        write(out, "cm_violations.csv", head, &csv)?,
    ])
}

impl From<GmxbError> for CliError {
    fn from(e: GmxbError) -> Self {
        match e {
            GmxbError::NotCertified { .. } => CliError {
                code: 3,
                message: e.to_string(),
            },
            _ => CliError {
                code: 4,
                message: e.to_string(),
            },
        }
    }
}
