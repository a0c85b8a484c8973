//! Command-line surface: forward and inverse mapping queries, the
//! reference table, rho_h sweeps emitting plot-ready CSV, and Monte Carlo
//! validation runs. Scenarios come from JSON files and/or flags; flags
//! override file fields, while conflicts inside one source are errors.
//!
//! Exit codes: 0 success, 2 malformed scenario or grid, 3 degenerate
//! epsilon, 4 unattainable inversion target, 5 insufficient Monte Carlo
//! events. Data goes to stdout, diagnostics to stderr.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bivariate::ShadowingCorrelation;
use crate::error::Error;
use crate::gaussian::{StandardScore, UnitProbability};
use crate::mapping::{
    event_correlation, invert_correlation, DualLinkScenario, LinkBudget, LinkReliability,
    TABLE_RHO_H,
};
use crate::montecarlo::{
    estimate_event_correlation, estimate_joint_failure, McMethod, SimConfig,
};

pub const CSV_HEADER: &str = "rho_h,eps1,eps2,joint_failure,rho";

// ---------------------------------------------------------------------------
// Scenario file schema
// ---------------------------------------------------------------------------

/// JSON scenario: two links, a shadowing correlation, and optionally a
/// simulation block. Unknown fields are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub links: Vec<LinkEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimEntry>,
}

/// One link, given as exactly one of: a margin `beta`, a failure
/// probability `epsilon`, or a full budget (all four dB fields).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_t_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_l_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_th_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_db: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimEntry {
    pub n_samples: u64,
    pub seed: u64,
    pub method: MethodArg,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_count: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Plain,
    Importance,
}

impl From<MethodArg> for McMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Plain => McMethod::Plain,
            MethodArg::Importance => McMethod::Importance,
        }
    }
}

// ---------------------------------------------------------------------------
// Result schema
// ---------------------------------------------------------------------------

/// Echo of the resolved inputs plus every derived quantity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub inputs: ScenarioFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_target: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub rho_h: f64,
    pub joint_failure: f64,
    pub rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_rho_std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_rho_z: Option<f64>,
}

// ---------------------------------------------------------------------------
// Argument parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "shadowcorr",
    version,
    about = "Maps shadowing cross-correlation to failure-event correlation for dual-connectivity links"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward mapping: links + rho_h -> event correlation and joint failure
    Map(MapArgs),
    /// Inverse mapping: links + target rho -> rho_h
    Invert(InvertArgs),
    /// The reference mapping table at eps1 = eps2 = 1e-4
    Table(TableArgs),
    /// Evaluate the forward mapping over a rho_h grid, emitting CSV
    Sweep(SweepArgs),
    /// Monte Carlo validation of the analytic mapping
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct LinkArgs {
    /// JSON scenario file
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Failure probability of link 1 (replaces the file entry)
    #[arg(long)]
    pub eps1: Option<f64>,
    /// Failure probability of link 2
    #[arg(long)]
    pub eps2: Option<f64>,
    /// Normalized margin of link 1 (replaces the file entry)
    #[arg(long)]
    pub beta1: Option<f64>,
    /// Normalized margin of link 2
    #[arg(long)]
    pub beta2: Option<f64>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct OutputArgs {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Significant digits for derived values
    #[arg(long, default_value_t = 6)]
    pub precision: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[command(flatten)]
    pub links: LinkArgs,
    /// Shadowing cross-correlation (overrides the file value)
    #[arg(long = "rho-h", allow_hyphen_values = true)]
    pub rho_h: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    #[command(flatten)]
    pub links: LinkArgs,
    /// Target failure-event correlation
    #[arg(long, allow_hyphen_values = true)]
    pub rho: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub links: LinkArgs,
    /// rho_h grid: `start:stop:step` or a comma list
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    /// Output format (sweep emits CSV)
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Significant digits for derived values
    #[arg(long, default_value_t = 6)]
    pub precision: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub links: LinkArgs,
    /// Shadowing cross-correlation (overrides the file value)
    #[arg(long = "rho-h", allow_hyphen_values = true)]
    pub rho_h: Option<f64>,
    /// Sample count (overrides the file sim block)
    #[arg(long)]
    pub samples: Option<u64>,
    /// RNG seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Estimator
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Batches for batch-means standard errors
    #[arg(long)]
    pub batches: Option<u32>,
    #[command(flatten)]
    pub output: OutputArgs,
}

// ---------------------------------------------------------------------------
// Errors with exit codes
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum CliError {
    Malformed(String),
    Degenerate(String),
    Unattainable { target: f64, min: f64, max: f64 },
    InsufficientEvents(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Malformed(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Unattainable { .. } => 4,
            CliError::InsufficientEvents(_) => 5,
            CliError::Internal(_) => 1,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Malformed(m) => format!("malformed input: {m}"),
            CliError::Degenerate(m) => format!("degenerate scenario: {m}"),
            CliError::Unattainable { target, min, max } => format!(
                "target rho = {target} is unattainable; attainable range is [{min}, {max}]"
            ),
            CliError::InsufficientEvents(m) => format!("insufficient events: {m}"),
            CliError::Internal(m) => format!("internal error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::DegenerateScenario { .. } => CliError::Degenerate(e.to_string()),
            Error::TargetUnattainable { target, min, max } => {
                CliError::Unattainable { target, min, max }
            }
            Error::InsufficientEvents { .. } => CliError::InsufficientEvents(e.to_string()),
            Error::Internal(m) => CliError::Internal(m),
            Error::Domain { .. }
            | Error::DegenerateCorrelation { .. }
            | Error::NotDegenerate { .. }
            | Error::InvalidConfig(_) => CliError::Malformed(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------------------
// Scenario resolution
// ---------------------------------------------------------------------------

struct ResolvedLinks {
    link1: LinkReliability,
    link2: LinkReliability,
    echo: Vec<LinkEntry>,
}

fn load_scenario_file(path: &PathBuf) -> CliResult<ScenarioFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Malformed(format!("scenario file {}: {e}", path.display())))?;
    let file: ScenarioFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Malformed(format!("scenario file {}: {e}", path.display())))?;
    if file.links.len() != 2 {
        return Err(CliError::Malformed(format!(
            "scenario field `links` must have exactly 2 entries, got {}",
            file.links.len()
        )));
    }
    Ok(file)
}

fn resolve_link(entry: &LinkEntry, name: &str) -> CliResult<LinkReliability> {
    let budget_fields = [
        ("p_t_dbm", entry.p_t_dbm),
        ("p_l_db", entry.p_l_db),
        ("p_th_dbm", entry.p_th_dbm),
        ("sigma_db", entry.sigma_db),
    ];
    let budget_given = budget_fields.iter().filter(|(_, v)| v.is_some()).count();

    match (entry.beta, entry.epsilon, budget_given) {
        (Some(_), Some(_), _) => Err(CliError::Malformed(format!(
            "{name}: `beta` and `epsilon` are mutually exclusive"
        ))),
        (Some(_), None, n) | (None, Some(_), n) if n > 0 => Err(CliError::Malformed(format!(
            "{name}: budget fields cannot be combined with `beta`/`epsilon`"
        ))),
        (Some(b), None, _) => {
            let beta = StandardScore::new(b)
                .map_err(|e| CliError::Malformed(format!("{name}.beta: {e}")))?;
            Ok(LinkReliability::from_beta(beta))
        }
        (None, Some(e), _) => {
            let eps = UnitProbability::new(e)
                .map_err(|err| CliError::Malformed(format!("{name}.epsilon: {err}")))?;
            if e == 0.0 || e == 1.0 {
                return Err(CliError::Degenerate(format!(
                    "{name}.epsilon = {e} makes the failure indicator constant"
                )));
            }
            LinkReliability::from_epsilon(eps)
                .map_err(|err| CliError::Malformed(format!("{name}.epsilon: {err}")))
        }
        (None, None, 4) => {
            let budget = LinkBudget::new(
                entry.p_t_dbm.expect("checked"),
                entry.p_l_db.expect("checked"),
                entry.p_th_dbm.expect("checked"),
                entry.sigma_db.expect("checked"),
            )
            .map_err(|e| CliError::Malformed(format!("{name}: {e}")))?;
            LinkReliability::from_budget(&budget)
                .map_err(|e| CliError::Malformed(format!("{name}: {e}")))
        }
        (None, None, 0) => Err(CliError::Malformed(format!(
            "{name}: give `beta`, `epsilon`, or all four budget fields"
        ))),
        (None, None, _) => {
            let missing: Vec<&str> = budget_fields
                .iter()
                .filter(|(_, v)| v.is_none())
                .map(|(n, _)| *n)
                .collect();
            Err(CliError::Malformed(format!(
                "{name}: incomplete budget, missing {}",
                missing.join(", ")
            )))
        }
    }
}

fn resolve_links(args: &LinkArgs, file: Option<&ScenarioFile>) -> CliResult<ResolvedLinks> {
    let mut entries: Vec<LinkEntry> = Vec::with_capacity(2);
    for (i, (flag_eps, flag_beta)) in [(args.eps1, args.beta1), (args.eps2, args.beta2)]
        .into_iter()
        .enumerate()
    {
        let name = format!("link {}", i + 1);
        let entry = match (flag_eps, flag_beta) {
            (Some(_), Some(_)) => {
                return Err(CliError::Malformed(format!(
                    "{name} given by both --eps{} and --beta{}",
                    i + 1,
                    i + 1
                )))
            }
            (Some(e), None) => LinkEntry {
                epsilon: Some(e),
                ..LinkEntry::default()
            },
            (None, Some(b)) => LinkEntry {
                beta: Some(b),
                ..LinkEntry::default()
            },
            (None, None) => match file {
                Some(f) => f.links[i].clone(),
                None => {
                    return Err(CliError::Malformed(format!(
                        "{name} unspecified: give --eps{}/--beta{} or a scenario file",
                        i + 1,
                        i + 1
                    )))
                }
            },
        };
        entries.push(entry);
    }
    let link1 = resolve_link(&entries[0], "links[0]")?;
    let link2 = resolve_link(&entries[1], "links[1]")?;
    Ok(ResolvedLinks {
        link1,
        link2,
        echo: entries,
    })
}

fn resolve_rho_h(flag: Option<f64>, file: Option<&ScenarioFile>) -> CliResult<ShadowingCorrelation> {
    let value = flag
        .or_else(|| file.and_then(|f| f.rho_h))
        .ok_or_else(|| CliError::Malformed("rho_h unspecified: give --rho-h or set it in the scenario file".into()))?;
    ShadowingCorrelation::new(value).map_err(|e| CliError::Malformed(format!("rho_h: {e}")))
}

fn resolve_sim(args: &SimulateArgs, file: Option<&ScenarioFile>) -> CliResult<(SimConfig, SimEntry)> {
    let file_sim = file.and_then(|f| f.sim.clone());
    let n_samples = args
        .samples
        .or(file_sim.as_ref().map(|s| s.n_samples))
        .ok_or_else(|| CliError::Malformed("sample count unspecified: give --samples or a sim block".into()))?;
    let seed = args
        .seed
        .or(file_sim.as_ref().map(|s| s.seed))
        .ok_or_else(|| CliError::Malformed("seed unspecified: give --seed or a sim block".into()))?;
    let method = args
        .method
        .or(file_sim.as_ref().map(|s| s.method))
        .unwrap_or(MethodArg::Plain);
    let batch_count = args
        .batches
        .or(file_sim.as_ref().and_then(|s| s.batch_count))
        .unwrap_or(64);
    let mut cfg = SimConfig::new(n_samples, seed, method.into());
    cfg.batch_count = batch_count;
    let echo = SimEntry {
        n_samples,
        seed,
        method,
        batch_count: Some(batch_count),
    };
    Ok((cfg, echo))
}

fn check_precision(p: usize) -> CliResult<usize> {
    if (1..=17).contains(&p) {
        Ok(p)
    } else {
        Err(CliError::Malformed(format!(
            "--precision must be in [1, 17], got {p}"
        )))
    }
}

// ---------------------------------------------------------------------------
// Numeric formatting
// ---------------------------------------------------------------------------

/// Round to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x)
        .parse()
        .expect("round-trip of formatted float")
}

/// Render with `digits` significant digits, plain decimal where compact
/// and scientific otherwise (printf %g style).
pub fn fmt_num(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let r = round_sig(x, digits);
    if r == 0.0 {
        return "0".into();
    }
    let mag = r.abs().log10().floor() as i32;
    if mag < -4 || mag >= digits as i32 {
        let s = format!("{:.*e}", digits - 1, r);
        let (mant, exp) = s.split_once('e').expect("exponent present");
        let mant = trim_trailing(mant);
        format!("{mant}e{exp}")
    } else {
        let decimals = (digits as i32 - 1 - mag).max(0) as usize;
        trim_trailing(&format!("{:.*}", decimals, r)).to_string()
    }
}

fn trim_trailing(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

// ---------------------------------------------------------------------------
// Command implementations
// ---------------------------------------------------------------------------

fn analytic_record(
    links: &ResolvedLinks,
    rho_h: ShadowingCorrelation,
    sim_echo: Option<SimEntry>,
) -> CliResult<ResultRecord> {
    let scenario = DualLinkScenario::new(links.link1, links.link2, rho_h);
    let corr = event_correlation(&scenario)?;
    Ok(ResultRecord {
        inputs: ScenarioFile {
            links: links.echo.clone(),
            rho_h: Some(rho_h.value()),
            sim: sim_echo,
        },
        rho_target: None,
        beta1: links.link1.beta().value(),
        beta2: links.link2.beta().value(),
        eps1: links.link1.epsilon().value(),
        eps2: links.link2.epsilon().value(),
        rho_h: rho_h.value(),
        joint_failure: corr.joint_failure.value(),
        rho: corr.rho,
        mc_estimate: None,
        mc_std_error: None,
        mc_z: None,
        mc_rho: None,
        mc_rho_std_error: None,
        mc_rho_z: None,
    })
}

fn cmd_map(args: &MapArgs) -> CliResult<String> {
    let precision = check_precision(args.output.precision)?;
    let file = args.links.scenario.as_ref().map(load_scenario_file).transpose()?;
    let links = resolve_links(&args.links, file.as_ref())?;
    let rho_h = resolve_rho_h(args.rho_h, file.as_ref())?;
    let record = analytic_record(&links, rho_h, None)?;
    render_record(&record, args.output.format, precision)
}

fn cmd_invert(args: &InvertArgs) -> CliResult<String> {
    let precision = check_precision(args.output.precision)?;
    let file = args.links.scenario.as_ref().map(load_scenario_file).transpose()?;
    if let Some(f) = &file {
        if f.rho_h.is_some() {
            return Err(CliError::Malformed(
                "scenario field `rho_h` is not a valid input for invert (it is the output)".into(),
            ));
        }
    }
    let links = resolve_links(&args.links, file.as_ref())?;
    let rho_h = invert_correlation(args.rho, links.link1.epsilon(), links.link2.epsilon())?;
    let mut record = analytic_record(&links, rho_h, None)?;
    record.rho_target = Some(args.rho);
    record.inputs.rho_h = None;
    render_record(&record, args.output.format, precision)
}

/// One evaluated grid point, shared by `table` and `sweep` so their
/// outputs are identical down to the formatted bytes.
struct SweepRow {
    rho_h: f64,
    eps1: f64,
    eps2: f64,
    joint_failure: f64,
    rho: f64,
}

fn sweep_rows(links: &ResolvedLinks, grid: &[f64]) -> CliResult<Vec<SweepRow>> {
    grid.iter()
        .map(|&rh| {
            let rho_h = ShadowingCorrelation::new(rh)
                .map_err(|e| CliError::Malformed(format!("grid value: {e}")))?;
            let record = analytic_record(links, rho_h, None)?;
            Ok(SweepRow {
                rho_h: rh,
                eps1: record.eps1,
                eps2: record.eps2,
                joint_failure: record.joint_failure,
                rho: record.rho,
            })
        })
        .collect()
}

fn rows_to_csv(rows: &[SweepRow], precision: usize) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_num(r.rho_h, precision),
            fmt_num(r.eps1, precision),
            fmt_num(r.eps2, precision),
            fmt_num(r.joint_failure, precision),
            fmt_num(r.rho, precision),
        ));
    }
    out
}

fn rows_to_json(rows: &[SweepRow], precision: usize) -> String {
    let items: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "rho_h": round_sig(r.rho_h, precision),
                "eps1": round_sig(r.eps1, precision),
                "eps2": round_sig(r.eps2, precision),
                "joint_failure": round_sig(r.joint_failure, precision),
                "rho": round_sig(r.rho, precision),
            })
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&items).expect("rows serialize");
    s.push('\n');
    s
}

fn table_links() -> CliResult<ResolvedLinks> {
    let entry = LinkEntry {
        epsilon: Some(1e-4),
        ..LinkEntry::default()
    };
    let link = resolve_link(&entry, "links[0]")?;
    Ok(ResolvedLinks {
        link1: link,
        link2: link,
        echo: vec![entry.clone(), entry],
    })
}

fn cmd_table(args: &TableArgs) -> CliResult<String> {
    let precision = check_precision(args.output.precision)?;
    let links = table_links()?;
    let rows = sweep_rows(&links, &TABLE_RHO_H)?;
    match args.output.format {
        Format::Csv => Ok(rows_to_csv(&rows, precision)),
        Format::Json => Ok(rows_to_json(&rows, precision)),
        Format::Table => {
            // Two-row layout: rho_h on top, rho beneath.
            let rho_h_cells: Vec<String> =
                rows.iter().map(|r| fmt_num(r.rho_h, precision)).collect();
            let rho_cells: Vec<String> = rows.iter().map(|r| fmt_num(r.rho, precision)).collect();
            let mut top = String::from("rho_h");
            let mut bottom = String::from("rho  ");
            for (a, b) in rho_h_cells.iter().zip(&rho_cells) {
                let w = a.len().max(b.len());
                top.push_str(&format!("  {a:>w$}"));
                bottom.push_str(&format!("  {b:>w$}"));
            }
            Ok(format!("{top}\n{bottom}\n"))
        }
    }
}

fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = |m: String| CliError::Malformed(format!("grid `{spec}`: {m}"));
    let values: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step".into()));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(e.to_string()))?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0 && step.is_finite()) {
            return Err(bad(format!("step must be positive, got {step}")));
        }
        if start > stop {
            return Err(bad(format!("start {start} exceeds stop {stop}")));
        }
        let mut out = Vec::new();
        let mut k = 0u64;
        loop {
            let x = start + k as f64 * step;
            if x > stop + 1e-9 * step {
                break;
            }
            out.push(x.min(stop));
            k += 1;
        }
        out
    } else {
        spec.split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(e.to_string()))?
    };
    if values.is_empty() {
        return Err(bad("grid is empty".into()));
    }
    for &v in &values {
        if !(v.is_finite() && (-1.0..=1.0).contains(&v)) {
            return Err(bad(format!("value {v} outside [-1, 1]")));
        }
    }
    Ok(values)
}

fn cmd_sweep(args: &SweepArgs) -> CliResult<String> {
    let precision = check_precision(args.precision)?;
    if args.format != Format::Csv {
        return Err(CliError::Malformed(
            "sweep emits CSV; use --format csv (the default)".into(),
        ));
    }
    let file = args.links.scenario.as_ref().map(load_scenario_file).transpose()?;
    let links = resolve_links(&args.links, file.as_ref())?;
    let grid = parse_grid(&args.grid)?;
    let rows = sweep_rows(&links, &grid)?;
    Ok(rows_to_csv(&rows, precision))
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<String> {
    let precision = check_precision(args.output.precision)?;
    let file = args.links.scenario.as_ref().map(load_scenario_file).transpose()?;
    let links = resolve_links(&args.links, file.as_ref())?;
    let rho_h = resolve_rho_h(args.rho_h, file.as_ref())?;
    let (cfg, sim_echo) = resolve_sim(args, file.as_ref())?;
    let mut record = analytic_record(&links, rho_h, Some(sim_echo))?;

    let joint = estimate_joint_failure(
        StandardScore::new(record.beta1).expect("resolved beta is finite"),
        StandardScore::new(record.beta2).expect("resolved beta is finite"),
        rho_h,
        &cfg,
    )?;
    record.mc_estimate = Some(joint.estimate);
    record.mc_std_error = Some(joint.std_error);
    record.mc_z = Some(z_score(joint.estimate, record.joint_failure, joint.std_error));

    if cfg.method == McMethod::Plain {
        let corr = estimate_event_correlation(
            StandardScore::new(record.beta1).expect("resolved beta is finite"),
            StandardScore::new(record.beta2).expect("resolved beta is finite"),
            rho_h,
            &cfg,
        )?;
        record.mc_rho = Some(corr.estimate);
        record.mc_rho_std_error = Some(corr.std_error);
        record.mc_rho_z = Some(z_score(corr.estimate, record.rho, corr.std_error));
    }
    render_record(&record, args.output.format, precision)
}

fn z_score(estimate: f64, reference: f64, std_error: f64) -> f64 {
    let diff = estimate - reference;
    if diff == 0.0 {
        0.0
    } else {
        diff / std_error
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

fn render_record(record: &ResultRecord, format: Format, precision: usize) -> CliResult<String> {
    match format {
        Format::Json => {
            let mut value = serde_json::to_value(record)
                .map_err(|e| CliError::Internal(format!("serialize record: {e}")))?;
            round_derived_fields(&mut value, precision);
            let mut s = serde_json::to_string_pretty(&value)
                .map_err(|e| CliError::Internal(format!("serialize record: {e}")))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut header = String::from(CSV_HEADER);
            let mut row = format!(
                "{},{},{},{},{}",
                fmt_num(record.rho_h, precision),
                fmt_num(record.eps1, precision),
                fmt_num(record.eps2, precision),
                fmt_num(record.joint_failure, precision),
                fmt_num(record.rho, precision),
            );
            for (name, v) in [
                ("mc_estimate", record.mc_estimate),
                ("mc_std_error", record.mc_std_error),
                ("mc_z", record.mc_z),
                ("mc_rho", record.mc_rho),
                ("mc_rho_std_error", record.mc_rho_std_error),
                ("mc_rho_z", record.mc_rho_z),
            ] {
                if let Some(v) = v {
                    header.push(',');
                    header.push_str(name);
                    row.push(',');
                    row.push_str(&fmt_num(v, precision));
                }
            }
            Ok(format!("{header}\n{row}\n"))
        }
        Format::Table => {
            let mut out = String::new();
            let mut push = |k: &str, v: String| out.push_str(&format!("{k:<16} {v}\n"));
            if let Some(t) = record.rho_target {
                push("rho_target", fmt_num(t, precision));
            }
            push("beta1", fmt_num(record.beta1, precision));
            push("beta2", fmt_num(record.beta2, precision));
            push("eps1", fmt_num(record.eps1, precision));
            push("eps2", fmt_num(record.eps2, precision));
            push("rho_h", fmt_num(record.rho_h, precision));
            push("joint_failure", fmt_num(record.joint_failure, precision));
            push("rho", fmt_num(record.rho, precision));
            for (k, v) in [
                ("mc_estimate", record.mc_estimate),
                ("mc_std_error", record.mc_std_error),
                ("mc_z", record.mc_z),
                ("mc_rho", record.mc_rho),
                ("mc_rho_std_error", record.mc_rho_std_error),
                ("mc_rho_z", record.mc_rho_z),
            ] {
                if let Some(v) = v {
                    push(k, fmt_num(v, precision));
                }
            }
            Ok(out)
        }
    }
}

/// Round every derived numeric field in a record's JSON tree; the `inputs`
/// echo stays verbatim so a record can be replayed exactly.
fn round_derived_fields(value: &mut serde_json::Value, precision: usize) {
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map.iter_mut() {
            if k == "inputs" {
                continue;
            }
            if let serde_json::Value::Number(n) = v {
                if let Some(x) = n.as_f64() {
                    if let Some(rounded) = serde_json::Number::from_f64(round_sig(x, precision)) {
                        *v = serde_json::Value::Number(rounded);
                    }
                }
            }
        }
    }
}

/// Dispatch a parsed command line; the Ok payload is the stdout text.
pub fn run(cli: Cli) -> CliResult<String> {
    match &cli.command {
        Command::Map(args) => cmd_map(args),
        Command::Invert(args) => cmd_invert(args),
        Command::Table(args) => cmd_table(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Simulate(args) => cmd_simulate(args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_sig_and_fmt() {
        assert_eq!(round_sig(0.023213758373, 6), 0.0232138);
        assert_eq!(fmt_num(0.023213758373, 6), "0.0232138");
        assert_eq!(fmt_num(0.0001, 6), "0.0001");
        assert_eq!(fmt_num(1.0, 6), "1");
        assert_eq!(fmt_num(0.0, 6), "0");
        assert_eq!(fmt_num(2.3311436998e-6, 6), "2.33114e-6");
        assert_eq!(fmt_num(-0.5, 3), "-0.5");
        assert_eq!(fmt_num(123456789.0, 4), "1.235e8");
        assert_eq!(fmt_num(3.719, 6), "3.719");
    }

    #[test]
    fn grid_parsing_forms() {
        assert_eq!(parse_grid("0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0.3").unwrap(), vec![0.3]);
        assert_eq!(parse_grid("-0.5,0,0.5").unwrap(), vec![-0.5, 0.0, 0.5]);
        assert!(parse_grid("0:1:-0.5").is_err());
        assert!(parse_grid("1:0:0.5").is_err());
        assert!(parse_grid("0:2:0.5").is_err());
        assert!(parse_grid("").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn grid_includes_endpoint_despite_rounding() {
        let g = parse_grid("0:0.3:0.1").unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(*g.last().unwrap(), 0.3);
    }

    #[test]
    fn link_entry_conflicts_are_rejected() {
        let e = LinkEntry {
            beta: Some(1.0),
            epsilon: Some(0.1),
            ..LinkEntry::default()
        };
        assert!(matches!(
            resolve_link(&e, "links[0]"),
            Err(CliError::Malformed(_))
        ));

        let e = LinkEntry {
            beta: Some(1.0),
            p_t_dbm: Some(20.0),
            ..LinkEntry::default()
        };
        assert!(matches!(
            resolve_link(&e, "links[0]"),
            Err(CliError::Malformed(_))
        ));

        let e = LinkEntry {
            p_t_dbm: Some(20.0),
            p_l_db: Some(100.0),
            ..LinkEntry::default()
        };
        let err = resolve_link(&e, "links[0]").unwrap_err();
        assert!(err.message().contains("p_th_dbm"));

        let e = LinkEntry::default();
        assert!(resolve_link(&e, "links[0]").is_err());
    }

    #[test]
    fn degenerate_epsilon_is_exit_3() {
        let e = LinkEntry {
            epsilon: Some(0.0),
            ..LinkEntry::default()
        };
        let err = resolve_link(&e, "links[0]").unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn budget_link_resolves_to_expected_margin() {
        let e = LinkEntry {
            p_t_dbm: Some(23.0),
            p_l_db: Some(100.0),
            p_th_dbm: Some(-100.0),
            sigma_db: Some(8.0),
            ..LinkEntry::default()
        };
        let l = resolve_link(&e, "links[0]").unwrap();
        assert_eq!(l.beta().value(), 2.875);
    }

    #[test]
    fn unknown_scenario_fields_are_rejected() {
        let text = r#"{"links": [{"epsilon": 1e-4}, {"epsilon": 1e-4}], "rho_h": 0.5, "frobnicate": 1}"#;
        let parsed: std::result::Result<ScenarioFile, _> = serde_json::from_str(text);
        let err = parsed.unwrap_err().to_string();
        assert!(err.contains("frobnicate"), "{err}");
    }
}
