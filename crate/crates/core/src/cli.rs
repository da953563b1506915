//! Command-line front end.
//!
//! Every subcommand writes a JSON document (CSV for `density-table`) to
//! stdout or to `--out`. Exit codes: 0 success, 1 internal error or failed
//! theorem check, 2 invalid input, 3 non-convergence or inconclusive check.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::channel1d::{bore_exact, BoreProblem, BoreResult, STANDARD_GRAVITY};
use crate::config::{load, MinimizeConfig, StabilityConfig, TheoremConfig};
use crate::density::{DensityModel, DEFAULT_SONIC_TOLERANCE};
use crate::domain::{differential, write_forms_csv, TorusGrid};
use crate::error::{Error, Result};
use crate::solver::{minimize, regime_map, report_for, CriticalPointReport, Termination};
use crate::sphere::SphereMap;
use crate::stability::{probe_fields, stability_probe, CheckVerdict, ProbeKind, StabilityReport, TheoremOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

/// Environment variable capping the worker pool (0 or unset: automatic).
pub const THREADS_ENV: &str = "HODGEFLOW_THREADS";

#[derive(Debug, Parser)]
#[command(name = "hodgeflow", version, about = "Nonlinear Hodge energies of sphere-valued maps on flat tori")]
struct Cli {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory for CSV dumps of maps, differentials and probe fields.
    #[arg(long, global = true)]
    dump_dir: Option<PathBuf>,
    /// Omit the timestamp so repeated runs produce identical output.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate Q, rho, e, d/dQ(Q rho^2), F and regime as CSV.
    DensityTable(DensityTableArgs),
    /// Classify a single squared speed.
    Classify(ClassifyArgs),
    /// Surface elevation over a floor incline.
    Bore(BoreArgs),
    /// Projected gradient descent from a configured initial map.
    Minimize(ConfigArgs),
    /// Second-variation probing of a configured map.
    Stability(ConfigArgs),
    /// Descend from seeded initial maps and check the stability verdict.
    TheoremCheck(ConfigArgs),
}

#[derive(Debug, Args)]
struct DensityTableArgs {
    /// Density model as JSON, e.g. '{"type":"polytropic","gamma":2}'.
    #[arg(long)]
    model: String,
    #[arg(long)]
    qmax: f64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Sonic tolerance on d/dQ(Q rho^2).
    #[arg(long, default_value_t = DEFAULT_SONIC_TOLERANCE)]
    tol: f64,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = DEFAULT_SONIC_TOLERANCE)]
    tol: f64,
}

#[derive(Debug, Args)]
struct BoreArgs {
    #[arg(long = "H", required_unless_present = "batch", allow_hyphen_values = true)]
    h: Option<f64>,
    #[arg(long, required_unless_present = "batch", allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long, required_unless_present = "batch", allow_hyphen_values = true)]
    v1: Option<f64>,
    #[arg(long, default_value_t = STANDARD_GRAVITY)]
    g: f64,
    /// CSV of problems with columns H, delta, v1 and optionally g.
    #[arg(long, conflicts_with_all = ["h", "delta", "v1"])]
    batch: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
}

/// Common wrapper of every JSON report.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<u64>,
    result: T,
}

struct Output {
    out: Option<PathBuf>,
    dump_dir: Option<PathBuf>,
    timestamp: bool,
}

impl Output {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(std::io::stdout().lock())),
        })
    }

    fn json<T: Serialize>(&self, command: &str, result: T) -> Result<()> {
        let envelope = Envelope {
            command,
            version: env!("CARGO_PKG_VERSION"),
            timestamp: self
                .timestamp
                .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)),
            result,
        };
        let mut w = self.writer()?;
        serde_json::to_writer_pretty(&mut w, &envelope).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn dump(&self, name: &str, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let Some(dir) = &self.dump_dir else {
            return Ok(());
        };
        std::fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join(name))?);
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn dump_map(&self, name: &str, grid: &TorusGrid, u: &SphereMap) -> Result<()> {
        self.dump(&format!("{name}.csv"), |w| u.write_csv(grid, w))?;
        if self.dump_dir.is_some() {
            let du = differential(grid, u)?;
            self.dump(&format!("{name}_du.csv"), |w| write_forms_csv(grid, &du, w))?;
        }
        Ok(())
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter { .. }
        | Error::Parse(_)
        | Error::Io(_)
        | Error::ShapeMismatch(_)
        | Error::NonUnit(_)
        | Error::Domain { .. }
        | Error::NearSonic { .. }
        | Error::NoAdmissibleRoot { .. } => EXIT_INVALID,
        Error::StepUnderflow(_) => EXIT_INCONCLUSIVE,
        Error::DegenerateProjection(_) => EXIT_INTERNAL,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| Error::invalid(THREADS_ENV, format!("must be a non-negative integer, got {value:?}")))?;
    // a second initialisation in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    configure_threads()?;
    let out = Output {
        out: cli.out,
        dump_dir: cli.dump_dir,
        timestamp: !cli.no_timestamp,
    };
    match cli.command {
        Command::DensityTable(a) => density_table(&out, &a),
        Command::Classify(a) => classify(&out, &a),
        Command::Bore(a) => bore(&out, &a),
        Command::Minimize(a) => run_minimize(&out, &load(&a.config)?),
        Command::Stability(a) => run_stability(&out, &load(&a.config)?),
        Command::TheoremCheck(a) => run_theorem(&out, &load(&a.config)?),
    }
}

fn parse_model(text: &str) -> Result<DensityModel> {
    let model: DensityModel = serde_json::from_str(text).map_err(|e| Error::Parse(format!("--model: {e}")))?;
    model.validate()?;
    Ok(model)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Sample speeds of the table: `steps + 1` evenly spaced values on
/// [0, qmax] without those at or past the admissible limit, plus the
/// critical speed when it lies inside the range.
pub fn table_speeds(model: &DensityModel, qmax: f64, steps: usize) -> Vec<f64> {
    let limit = model.admissible_limit();
    let admissible = |q: f64| limit.is_none_or(|l| q < l);
    let mut qs: Vec<f64> = (0..=steps)
        .map(|i| qmax * i as f64 / steps as f64)
        .filter(|&q| admissible(q))
        .collect();
    if let Some(qc) = model.q_crit() {
        if qc > 0.0 && qc <= qmax && admissible(qc) && !qs.iter().any(|&q| (q - qc).abs() <= 1e-12) {
            qs.push(qc);
            qs.sort_by(f64::total_cmp);
        }
    }
    qs
}

fn density_table(out: &Output, a: &DensityTableArgs) -> Result<i32> {
    let model = parse_model(&a.model)?;
    if !(a.qmax.is_finite() && a.qmax > 0.0) {
        return Err(Error::invalid("qmax", format!("must be > 0, got {}", a.qmax)));
    }
    if a.steps == 0 {
        return Err(Error::invalid("steps", "must be >= 1"));
    }
    if !(a.tol.is_finite() && a.tol >= 0.0) {
        return Err(Error::invalid("tol", "must be >= 0"));
    }
    let mut writer = csv::Writer::from_writer(out.writer()?);
    writer.write_record(["Q", "rho", "e", "dQrho2", "F", "regime"])?;
    for q in table_speeds(&model, a.qmax, a.steps) {
        writer.write_record([
            q.to_string(),
            model.rho(q)?.to_string(),
            model.variational_density(q)?.to_string(),
            model.mass_flux_derivative(q)?.to_string(),
            fmt_opt(model.froude(q)?),
            model.classify(q, a.tol)?.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Classification {
    model: DensityModel,
    q: f64,
    rho: f64,
    variational_density: f64,
    mass_flux_derivative: f64,
    subsonic: bool,
    froude: Option<f64>,
    regime: crate::density::FlowRegime,
}

fn classify(out: &Output, a: &ClassifyArgs) -> Result<i32> {
    let model = parse_model(&a.model)?;
    let q = a.q;
    let c = Classification {
        q,
        rho: model.rho(q)?,
        variational_density: model.variational_density(q)?,
        mass_flux_derivative: model.mass_flux_derivative(q)?,
        subsonic: model.subsonic_check(q)?,
        froude: model.froude(q)?,
        regime: model.classify(q, a.tol)?,
        model,
    };
    out.json("classify", c)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct BatchRow {
    problem: BoreProblem,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<BoreResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn bore(out: &Output, a: &BoreArgs) -> Result<i32> {
    if let Some(path) = &a.batch {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut rows = Vec::new();
        for record in reader.deserialize::<BoreProblem>() {
            let problem = record?;
            rows.push(match bore_exact(&problem) {
                Ok(r) => BatchRow {
                    problem,
                    result: Some(r),
                    error: None,
                },
                Err(e) => BatchRow {
                    problem,
                    result: None,
                    error: Some(e.to_string()),
                },
            });
        }
        let failed = rows.iter().any(|r| r.error.is_some());
        out.json("bore", rows)?;
        return Ok(if failed { EXIT_INVALID } else { EXIT_OK });
    }
    let (Some(h), Some(delta), Some(v1)) = (a.h, a.delta, a.v1) else {
        return Err(Error::invalid("H/delta/v1", "all three are required without --batch"));
    };
    let problem = BoreProblem::new(h, delta, v1).with_gravity(a.g);
    out.json("bore", bore_exact(&problem)?)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct MinimizeOutput<'a> {
    config: &'a MinimizeConfig,
    initial: CriticalPointReport,
    report: CriticalPointReport,
}

fn run_minimize(out: &Output, cfg: &MinimizeConfig) -> Result<i32> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let u0 = cfg.init.build(&grid, cfg.target_m + 1)?;
    let initial = report_for(&grid, &cfg.model, &u0, 0, Termination::MaxIterations)?;
    let (u, report) = minimize(&grid, &cfg.model, &u0, &cfg.options)?;
    out.dump_map("initial", &grid, &u0)?;
    out.dump_map("final", &grid, &u)?;
    dump_regimes(out, &grid, &cfg.model, &u)?;
    let converged = report.converged;
    out.json(
        "minimize",
        MinimizeOutput {
            config: cfg,
            initial,
            report,
        },
    )?;
    Ok(if converged { EXIT_OK } else { EXIT_INCONCLUSIVE })
}

fn dump_regimes(out: &Output, grid: &TorusGrid, model: &DensityModel, u: &SphereMap) -> Result<()> {
    if out.dump_dir.is_none() {
        return Ok(());
    }
    let map = regime_map(grid, model, u, DEFAULT_SONIC_TOLERANCE)?;
    out.dump("regimes.csv", |w| {
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(["cell", "regime"])?;
        for (cell, r) in map.regimes.iter().enumerate() {
            writer.write_record([cell.to_string(), r.to_string()])?;
        }
        writer.flush()?;
        Ok(())
    })
}

#[derive(Serialize)]
struct StabilityOutput<'a> {
    config: &'a StabilityConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    descent: Option<CriticalPointReport>,
    stability: StabilityReport,
}

fn probe_file_name(kind: ProbeKind) -> String {
    match kind {
        ProbeKind::Basis(a) => format!("probe_basis_{a}.csv"),
        ProbeKind::Random(i) => format!("probe_random_{i}.csv"),
    }
}

fn run_stability(out: &Output, cfg: &StabilityConfig) -> Result<i32> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let u0 = cfg.init.build(&grid, cfg.target_m + 1)?;
    let (u, descent) = if cfg.minimize_first {
        let (u, r) = minimize(&grid, &cfg.model, &u0, &cfg.options)?;
        (u, Some(r))
    } else {
        (u0, None)
    };
    let probe = crate::stability::ProbeOptions {
        solver_tolerance: cfg.options.gradient_tolerance,
        ..cfg.probe.clone()
    };
    let report = stability_probe(&grid, &cfg.model, &u, &probe)?;
    out.dump_map("map", &grid, &u)?;
    if out.dump_dir.is_some() {
        for (kind, v) in probe_fields(&grid, &u, probe.probes, probe.seed)? {
            out.dump(&probe_file_name(kind), |w| v.write_csv(&grid, w))?;
        }
    }
    let converged = descent.as_ref().is_none_or(|d| d.converged);
    out.json(
        "stability",
        StabilityOutput {
            config: cfg,
            descent,
            stability: report,
        },
    )?;
    Ok(if converged { EXIT_OK } else { EXIT_INCONCLUSIVE })
}

#[derive(Serialize)]
struct TheoremOutput<'a> {
    config: &'a TheoremConfig,
    verdict: &'static str,
    outcome: TheoremOutcome,
}

fn run_theorem(out: &Output, cfg: &TheoremConfig) -> Result<i32> {
    let setup = cfg.resolve()?;
    let outcome = crate::stability::theorem_experiment(&setup)?;
    let (verdict, code) = match outcome.verdict {
        CheckVerdict::Pass => ("pass", EXIT_OK),
        CheckVerdict::Fail => ("fail", EXIT_INTERNAL),
        CheckVerdict::Inconclusive => ("inconclusive", EXIT_INCONCLUSIVE),
    };
    out.json(
        "theorem-check",
        TheoremOutput {
            config: cfg,
            verdict,
            outcome,
        },
    )?;
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_speeds_insert_the_sonic_point() {
        let model = DensityModel::polytropic(2.0);
        let qs = table_speeds(&model, 2.0, 10);
        assert_eq!(qs.len(), 11);
        assert!(qs.contains(&(2.0 / 3.0)));
        assert!(qs.iter().all(|&q| q < 2.0));
        let flat = table_speeds(&DensityModel::Incompressible, 1.0, 4);
        assert_eq!(flat, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn exit_codes_follow_error_kinds() {
        assert_eq!(exit_code(&Error::invalid("x", "y")), EXIT_INVALID);
        assert_eq!(exit_code(&Error::StepUnderflow(1e-10)), EXIT_INCONCLUSIVE);
        assert_eq!(exit_code(&Error::DegenerateProjection(0.0)), EXIT_INTERNAL);
    }

    #[test]
    fn parse_failures_are_validation_errors() {
        assert_eq!(run(["hodgeflow", "nonsense"]), EXIT_INVALID);
        assert_eq!(run(["hodgeflow", "classify", "--model", "{\"type\":\"polytropic\",\"gamma\":0.5}", "--q", "0.1"]), EXIT_INVALID);
        assert_eq!(run(["hodgeflow", "classify", "--model", "{\"type\":\"bogus\"}", "--q", "0.1"]), EXIT_INVALID);
    }
}
