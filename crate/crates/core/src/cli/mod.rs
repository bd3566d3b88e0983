//! Command-line front end: `list`, `gradcheck`, `run` and `compare`.
//!
//! Exit codes: 0 success, 1 a check or computation failed, 2 usage or
//! configuration error.

mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{DatasetSpec, RunConfig, OUTPUT_ROOT_ENV};

use crate::activation::{ActivationSpec, REGISTRY};
use crate::ensemble::{MemberDef, PerformanceTable};
use crate::error::{Error, Result};
use crate::eval::{run_protocol, wilcoxon_signed_rank, Alternative, WilcoxonResult};
use crate::gradcheck::{
    check_activation_with, check_network, Fault, GradCheckConfig, NetCheckConfig,
};
use crate::seed;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "actens", version, about = "Learnable activations and activation-diverse ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the activation registry.
    List,
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Cross-validate the models of a config file and write the results.
    Run {
        config: PathBuf,
    },
    /// Wilcoxon signed-rank test between two rows of a performance table.
    Compare {
        table: PathBuf,
        model_a: String,
        model_b: String,
        /// Report the one-sided test (A better than B) as the headline.
        #[arg(long)]
        one_sided: bool,
    },
}

#[derive(Debug, clap::Args)]
pub struct GradcheckArgs {
    /// Comma-separated registry names, or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub kinds: Vec<String>,
    /// Relative error tolerance of the activation-level check.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Relative error tolerance of the whole-network check.
    #[arg(long, default_value_t = 1e-4)]
    pub net_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random points per activation.
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    /// Skip the whole-network check.
    #[arg(long)]
    pub activation_only: bool,
    /// Corrupt one analytic derivative, `<kind>:<x|param>`.
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<u8> {
    match command {
        Command::List => cmd_list(out).map(|_| EXIT_OK),
        Command::Gradcheck(args) => {
            let passed = cmd_gradcheck(&args, out)?;
            Ok(if passed { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Run { config } => cmd_run(&config, out).map(|_| EXIT_OK),
        Command::Compare {
            table,
            model_a,
            model_b,
            one_sided,
        } => cmd_compare(&table, &model_a, &model_b, one_sided, out).map(|_| EXIT_OK),
    }
}

/// Configuration and lookup problems map to 2, everything else to 1.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Context { source, .. } => exit_code(source),
        Error::Config(_)
        | Error::UnknownActivation(_)
        | Error::UnknownRecipe(_)
        | Error::Parse { .. }
        | Error::Json(_)
        | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

pub fn cmd_list(out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{:<16} {:<24} {:<9} description", "name", "learnable (per channel)", "maxInput")?;
    for e in &REGISTRY {
        let spec = ActivationSpec::from_name(e.name)?;
        let layout = spec.layout();
        let params = if layout.per_channel() == 0 {
            "-".to_string()
        } else {
            layout
                .segments()
                .iter()
                .map(|s| if s.len == 1 { s.name.to_string() } else { format!("{}[{}]", s.name, s.len) })
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mi = if e.kind.uses_max_input() { "yes" } else { "no" };
        writeln!(out, "{:<16} {:<24} {:<9} {}", e.name, params, mi, e.summary)?;
    }
    Ok(())
}

fn parse_fault(text: &str) -> Result<(String, Fault)> {
    let (kind, target) = text
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("fault `{text}` is not `<kind>:<target>`")))?;
    let spec = ActivationSpec::from_name(kind)?;
    if target != "x" && spec.layout().segment(target).is_none() {
        return Err(Error::Config(format!("`{kind}` has no parameter `{target}`")));
    }
    Ok((
        kind.to_string(),
        Fault {
            target: target.to_string(),
        },
    ))
}

/// Returns whether every requested check passed.
pub fn cmd_gradcheck(args: &GradcheckArgs, out: &mut dyn Write) -> Result<bool> {
    let names: Vec<String> = if args.kinds.iter().any(|k| k == "all") {
        REGISTRY.iter().map(|e| e.name.to_string()).collect()
    } else {
        args.kinds.clone()
    };
    let specs = names
        .iter()
        .map(|n| ActivationSpec::from_name(n))
        .collect::<Result<Vec<_>>>()?;
    if !(args.tol > 0.0 && args.net_tol > 0.0) || args.points == 0 {
        return Err(Error::Config("tolerances and point count must be positive".into()));
    }
    let fault = args.inject_fault.as_deref().map(parse_fault).transpose()?;
    let act_cfg = GradCheckConfig {
        points: args.points,
        tolerance: args.tol,
        seed: args.seed,
        ..Default::default()
    };
    let net_cfg = NetCheckConfig {
        tolerance: args.net_tol,
        seed: args.seed,
        ..Default::default()
    };
    let mut failed = 0;
    for (name, spec) in names.iter().zip(&specs) {
        let f = fault.as_ref().filter(|(k, _)| k == name).map(|(_, f)| f);
        let act = check_activation_with(spec, &act_cfg, f)?;
        writeln!(out, "activation {act}")?;
        if let (Some(f), false) = (f, act.passed()) {
            writeln!(out, "  injected fault in `{name}` derivative d/d{} detected", f.target)?;
        }
        failed += usize::from(!act.passed());
        if !args.activation_only {
            let net = check_network(spec, &net_cfg)?;
            writeln!(out, "network    {net}")?;
            failed += usize::from(!net.passed());
        }
    }
    let total = specs.len() * if args.activation_only { 1 } else { 2 };
    writeln!(out, "{} of {total} checks passed", total - failed)?;
    Ok(failed == 0)
}

#[derive(Serialize)]
struct ManifestDataset {
    name: String,
    samples: usize,
    features: usize,
    classes: usize,
    fold_seed: u64,
}

#[derive(Serialize)]
struct ManifestModel<'a> {
    name: &'a str,
    members: &'a [MemberDef],
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    selections: BTreeMap<String, Vec<usize>>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    dropped: BTreeMap<String, Vec<usize>>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    version: &'static str,
    config_sha256: String,
    seed: u64,
    config: &'a RunConfig,
    datasets: Vec<ManifestDataset>,
    models: Vec<ManifestModel<'a>>,
}

/// What a `run` wrote.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub table: PerformanceTable,
}

pub const TABLE_CSV: &str = "performance.csv";
pub const TABLE_JSON: &str = "performance.json";
pub const SCORES_DIR: &str = "scores";
pub const MANIFEST: &str = "manifest.json";

pub fn cmd_run(path: &Path, out: &mut dyn Write) -> Result<RunOutput> {
    let raw = fs::read(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    let cfg = RunConfig::read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let models = cfg.models()?;
    let datasets = cfg.load_datasets(base)?;
    let result = run_protocol(&models, &datasets, &cfg.protocol())?;

    let dir = cfg.output_path(base);
    fs::create_dir_all(&dir)?;
    result.table.write_csv(&dir.join(TABLE_CSV))?;
    fs::write(dir.join(TABLE_JSON), result.table.to_json_string()? + "\n")?;
    let scores = dir.join(SCORES_DIR);
    if scores.exists() {
        fs::remove_dir_all(&scores)?;
    }
    result.scores.write_dir(&scores)?;

    let manifest = Manifest {
        experiment: &cfg.experiment,
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: hex::encode(Sha256::digest(&raw)),
        seed: cfg.seed,
        config: &cfg,
        datasets: datasets
            .iter()
            .map(|d| ManifestDataset {
                name: d.name.clone(),
                samples: d.len(),
                features: d.dim(),
                classes: d.classes,
                fold_seed: seed::subseed(cfg.seed, &[seed::name_hash(&d.name)]),
            })
            .collect(),
        models: models
            .iter()
            .map(|m| ManifestModel {
                name: &m.name,
                members: &m.members,
                selections: result.selections.get(&m.name).cloned().unwrap_or_default(),
                dropped: result.dropped.get(&m.name).cloned().unwrap_or_default(),
            })
            .collect(),
    };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;

    write!(out, "{}", result.table.to_csv_string())?;
    writeln!(out, "wrote {}", dir.display())?;
    Ok(RunOutput {
        dir,
        table: result.table,
    })
}

/// Both sidedness modes of the test between two table rows.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub datasets: usize,
    pub two_sided: WilcoxonResult,
    pub one_sided: WilcoxonResult,
}

pub fn compare_rows(table: &PerformanceTable, a: &str, b: &str) -> Result<Comparison> {
    let (ra, rb) = (table.row(a)?, table.row(b)?);
    let mut missing: Vec<String> = table.missing(a)?;
    for d in table.missing(b)? {
        if !missing.contains(&d) {
            missing.push(d);
        }
    }
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "`{a}` and `{b}` do not cover the same datasets; missing: {}",
            missing.join(", ")
        )));
    }
    Ok(Comparison {
        datasets: ra.len(),
        two_sided: wilcoxon_signed_rank(ra, rb, Alternative::TwoSided)?,
        one_sided: wilcoxon_signed_rank(ra, rb, Alternative::Greater)?,
    })
}

fn describe(r: &WilcoxonResult) -> String {
    let w = r.statistic.map_or("-".to_string(), |w| w.to_string());
    format!(
        "W={w} W+={} W-={} n_effective={} p={:.6} ({})",
        r.w_plus,
        r.w_minus,
        r.n_effective,
        r.p_value,
        if r.exact { "exact" } else { "normal approximation" }
    )
}

pub fn cmd_compare(
    table: &Path,
    a: &str,
    b: &str,
    one_sided: bool,
    out: &mut dyn Write,
) -> Result<Comparison> {
    let t = PerformanceTable::read_csv(table)?;
    let c = compare_rows(&t, a, b)?;
    writeln!(out, "{a} vs {b} over {} datasets", c.datasets)?;
    let mark = |selected: bool| if selected { "*" } else { " " };
    writeln!(out, "{} two-sided        {}", mark(!one_sided), describe(&c.two_sided))?;
    writeln!(out, "{} one-sided (A > B) {}", mark(one_sided), describe(&c.one_sided))?;
    Ok(c)
}
