//! Command-line front end.
//!
//! Every command resolves its configuration (flags, then an optional JSON
//! file whose keys override them), validates it, runs the library and
//! writes CSV tables plus a JSON summary embedding the resolved config and
//! the library version. Exit codes: 0 success, 2 validation error,
//! 3 solver non-convergence, 1 anything else.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    default_sizes, fit_power_law, fit_power_law_points, pyramid_series, sweep_minimal_dissipation, ModelFamily,
    ScalingSeries, DEFAULT_EPS_FINAL,
};
use crate::analytic::{
    erasure_energies, full_control_geodesic, full_control_geodesic_velocity, global_erasure_length, hellinger_angle,
    interaction_decompose, local_erasure_tau_beta_w, nbody_energies, nbody_gamma, nbody_gamma_exact,
};
use crate::error::{Error, Result};
use crate::geometry::{integrate_geodesic, shoot_geodesic, GeodesicSolution, ShootOptions, Target};
use crate::jet::logistic;
use crate::models::{oracle, AllToAll, FullControl, Gauge, Model, ModelSpec, PyramidSpec, Qubits, Star};
use crate::steps::{
    fisher_quadratic, pyramid_bound, simulate_step_plan, star_erasure_plan, ChainDifferential, ConditionalChain,
};
use crate::thermo::{ControlPoint, DissipationReport, UnitsContext};
use crate::VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;

/// Largest `N` for commands that enumerate `2^N` microstates.
pub const MAX_ENUMERATED_SPINS: usize = 12;
/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "MINDISS_THREADS";

const DEFAULT_STEPS: usize = 4000;
const DEFAULT_GRID: usize = 2000;
const DEFAULT_SEED: u64 = 2024;
/// The n-body protocol is tabulated on `[0, tau (1 - NBODY_END_GAP)]`.
pub const NBODY_END_GAP: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "mindiss", version, about = "Minimal-dissipation protocols for spin systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Optimal protocol for one model and boundary condition.
    Geodesic(RunConfig),
    /// Minimal dissipation across system sizes, with a power-law fit.
    Sweep(RunConfig),
    /// Closed-form bounds.
    Bounds(RunConfig),
    /// Tabulate a closed-form or constructive protocol.
    Protocol(RunConfig),
    /// Refit an existing sweep table.
    Fit(RunConfig),
    /// Interaction-order content of protocol snapshots.
    Decompose(RunConfig),
    /// Run the invariant suites.
    Selftest(RunConfig),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Geodesic(_) => "geodesic",
            Command::Sweep(_) => "sweep",
            Command::Bounds(_) => "bounds",
            Command::Protocol(_) => "protocol",
            Command::Fit(_) => "fit",
            Command::Decompose(_) => "decompose",
            Command::Selftest(_) => "selftest",
        }
    }

    fn config(&self) -> &RunConfig {
        match self {
            Command::Geodesic(c)
            | Command::Sweep(c)
            | Command::Bounds(c)
            | Command::Protocol(c)
            | Command::Fit(c)
            | Command::Decompose(c)
            | Command::Selftest(c) => c,
        }
    }
}

/// Options shared by every command. Unset options take command defaults;
/// the JSON file given by `--config` overrides flags key by key.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Model or family name.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model: Option<String>,
    /// Number of spins.
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    /// Pyramid spatial dimension.
    #[arg(long = "D")]
    #[serde(rename = "D", skip_serializing_if = "Option::is_none", default)]
    pub dimension: Option<usize>,
    /// Pyramid layer growth `a`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub aperture: Option<usize>,
    /// Pyramid first-layer size `c`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub base: Option<usize>,
    /// Pyramid layer count, a single value or an inclusive range `lo..hi`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub layers: Option<String>,
    /// Final field `eps*` in energy units.
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps_final: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tau: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta: Option<f64>,
    /// Integration steps.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub steps: Option<usize>,
    /// Comma-separated system sizes for sweeps.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sizes: Option<Vec<usize>>,
    /// Protocol kind: `hellinger`, `nbody`, `qubit`, `star` or `local`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kind: Option<String>,
    /// Samples for tabulated protocols.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid: Option<usize>,
    /// Comma-separated snapshot times as fractions of `tau`.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub times: Option<Vec<f64>>,
    /// Input table for `fit`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out_dir: Option<PathBuf>,
    /// Shooting solver options.
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub shoot: Option<ShootOptions>,
    /// JSON file whose keys override the flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    /// Applies the `--config` file, if any, on top of the flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut out = self.clone();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let file: RunConfig =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            overlay!(
                out, file, model, n, dimension, aperture, base, layers, eps_final, tau, beta, steps, sizes, kind, grid,
                times, input, seed, out_dir, shoot
            );
        }
        out.config = None;
        Ok(out)
    }

    fn units(&self) -> Result<UnitsContext> {
        UnitsContext::new(self.beta.unwrap_or(1.0), self.tau.unwrap_or(1.0))
    }

    fn eps(&self) -> Result<f64> {
        let e = self.eps_final.unwrap_or(DEFAULT_EPS_FINAL);
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps-final must be positive and finite, got {e}")));
        }
        Ok(e)
    }

    fn model_name(&self, default: &str) -> String {
        self.model.clone().unwrap_or_else(|| default.to_string())
    }

    fn shoot_options(&self) -> Result<ShootOptions> {
        let mut o = self.shoot.unwrap_or_default();
        if let Some(s) = self.steps {
            o.steps = s;
        }
        if o.steps == 0 {
            return Err(Error::InvalidArgument("steps must be positive".into()));
        }
        Ok(o)
    }

    fn layer_list(&self) -> Result<Vec<usize>> {
        let spec = self.layers.clone().unwrap_or_else(|| "2..6".into());
        let parse = |s: &str| {
            s.trim().parse::<usize>().map_err(|_| Error::InvalidArgument(format!("bad layer count `{s}`")))
        };
        let list = match spec.split_once("..") {
            Some((a, b)) => {
                let (lo, hi) = (parse(a)?, parse(b.trim_start_matches('='))?);
                if hi < lo {
                    return Err(Error::InvalidArgument(format!("empty layer range `{spec}`")));
                }
                (lo..=hi).collect()
            }
            None => vec![parse(&spec)?],
        };
        Ok(list)
    }

    fn spins(&self, default: usize) -> usize {
        self.n.unwrap_or(default)
    }

    fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    execute(&cli.command)
}

pub fn execute(command: &Command) -> i32 {
    let name = command.name();
    let cfg = match command.config().resolve() {
        Ok(c) => c,
        Err(e) => return report_error(name, command.config(), &e),
    };
    let outcome = match command {
        Command::Geodesic(_) => cmd_geodesic(&cfg),
        Command::Sweep(_) => cmd_sweep(&cfg),
        Command::Bounds(_) => cmd_bounds(&cfg),
        Command::Protocol(_) => cmd_protocol(&cfg),
        Command::Fit(_) => cmd_fit(&cfg),
        Command::Decompose(_) => cmd_decompose(&cfg),
        Command::Selftest(_) => cmd_selftest(&cfg),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => report_error(name, &cfg, &e),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::TargetUnreachable(_) | Error::DegenerateMetric { .. } => EXIT_NON_CONVERGENCE,
        Error::MetricNotPsd { .. } | Error::Io(_) => EXIT_FAILURE,
        _ => EXIT_VALIDATION,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match exit_code(e) {
        EXIT_NON_CONVERGENCE => "non_convergence",
        EXIT_VALIDATION => "validation",
        _ => "failure",
    }
}

fn report_error(command: &str, cfg: &RunConfig, e: &Error) -> i32 {
    let body = json!({
        "command": command,
        "version": VERSION,
        "config": cfg,
        "error": { "kind": error_kind(e), "message": e.to_string() },
    });
    let text = serde_json::to_string_pretty(&body).unwrap_or_default();
    eprintln!("{text}");
    if let Some(dir) = &cfg.out_dir {
        if fs::create_dir_all(dir).is_ok() {
            let _ = fs::write(dir.join("error.json"), format!("{text}\n"));
        }
    }
    exit_code(e)
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(dir: &Path, file: &str, command: &str, cfg: &RunConfig, result: Value) -> Result<()> {
    fs::create_dir_all(dir)?;
    let body = json!({ "command": command, "version": VERSION, "config": cfg, "result": result });
    let text = serde_json::to_string_pretty(&body)?;
    fs::write(dir.join(file), format!("{text}\n"))?;
    // A closed stdout (e.g. a pipe into `head`) must not fail the run.
    let _ = writeln!(std::io::stdout(), "{text}");
    Ok(())
}

fn report_json(r: &DissipationReport) -> Value {
    json!({
        "length": r.length,
        "w_diss": r.w_diss,
        "delta_f": r.delta_f,
        "work_total": r.work_total,
        "work_variance": r.work_variance,
        "landauer_reference": r.landauer_reference,
    })
}

/// Gudermannian `2 atan(e^x) - pi/2`, written to stay accurate for large `x`.
fn gudermannian(x: f64) -> f64 {
    x.tanh().atan2((1.0 / x.cosh()).max(0.0)).copysign(x)
}

fn check_spins(n: usize, what: &str) -> Result<()> {
    if n == 0 || n > MAX_ENUMERATED_SPINS {
        return Err(Error::InvalidArgument(format!(
            "{what} enumerates 2^N states; N must lie in 1..={MAX_ENUMERATED_SPINS}, got {n}"
        )));
    }
    Ok(())
}

/// Independent-qubit erasure geodesic in closed form: `gd(beta eps)` grows
/// linearly in time, so `beta eps(t) = asinh tan(gd(beta eps*) t / tau)`.
pub fn qubit_geodesic(n: usize, eps_final: f64, units: &UnitsContext, samples: usize) -> Result<(Vec<f64>, Vec<f64>, DissipationReport)> {
    let model = Qubits::try_new(n)?;
    let beta = units.beta;
    let phi = gudermannian(beta * eps_final);
    let samples = samples.max(2);
    let times: Vec<f64> = (0..samples).map(|k| units.tau * k as f64 / (samples - 1) as f64).collect();
    let eps: Vec<f64> = times
        .iter()
        .enumerate()
        .map(|(k, t)| if k + 1 == samples { eps_final } else { (phi * t / units.tau).tan().asinh() / beta })
        .collect();
    let length = (n as f64).sqrt() * phi;
    let df = (model.ln_z(&[0.0], beta)? - model.ln_z(&[eps_final], beta)?) / beta;
    Ok((times, eps, DissipationReport::optimal(length, units, df, Some(n))))
}

fn trajectory_rows(sol: &GeodesicSolution) -> Vec<Vec<String>> {
    sol.trajectory
        .times()
        .iter()
        .zip(sol.trajectory.points())
        .zip(&sol.speed_profile)
        .map(|((t, p), s)| {
            let mut row = vec![fmt17(*t)];
            row.extend(p.params().iter().map(|x| fmt17(*x)));
            row.push(fmt17(*s));
            row
        })
        .collect()
}

fn cmd_geodesic(cfg: &RunConfig) -> Result<i32> {
    let units = cfg.units()?;
    let eps = cfg.eps()?;
    let model = cfg.model_name("all_to_all");
    let dir = cfg.out_dir();
    let steps = cfg.steps.unwrap_or(DEFAULT_STEPS);
    let mut resolved = cfg.clone();
    resolved.eps_final = Some(eps);
    resolved.model = Some(model.clone());
    match model.as_str() {
        "qubit" | "qubits" | "local" => {
            let n = cfg.spins(1);
            resolved.n = Some(n);
            let (times, eps_t, report) = qubit_geodesic(n, eps, &units, steps + 1)?;
            let speed = report.length / units.tau;
            let rows: Vec<Vec<String>> = times
                .iter()
                .zip(&eps_t)
                .map(|(t, e)| vec![fmt17(*t), fmt17(*e), fmt17(speed)])
                .collect();
            write_csv(&dir.join("trajectory.csv"), &["t".into(), "eps".into(), "ds_dt".into()], &rows)?;
            let result = json!({
                "model": "qubits", "N": n, "method": "closed_form",
                "report": report_json(&report), "converged": true, "shooting_ratio": Value::Null,
            });
            write_json(&dir, "summary.json", "geodesic", &resolved, result)?;
            Ok(EXIT_OK)
        }
        "all_to_all" | "chain" => {
            let n = cfg.spins(10);
            resolved.n = Some(n);
            let spec: ModelSpec = serde_json::from_value(json!({ "model": model, "N": n }))?;
            let m = spec.build()?;
            let opts = cfg.shoot_options()?;
            let origin = ControlPoint::new(vec![0.0, 0.0])?;
            let (sol, diag) = shoot_geodesic(m.as_ref(), &origin, Target { eps_final: eps }, &units, &opts)?;
            write_csv(
                &dir.join("trajectory.csv"),
                &["t".into(), "eps".into(), "J".into(), "ds_dt".into()],
                &trajectory_rows(&sol),
            )?;
            let result = json!({
                "model": model, "N": n, "method": "shooting",
                "report": report_json(&sol.report),
                "converged": sol.converged,
                "shooting_ratio": sol.shooting_ratio,
                "theta": diag.theta,
                "eps_hit": diag.eps_hit,
                "bisections": diag.bisections,
                "brackets": diag.brackets,
                "converged_brackets": diag.converged_brackets,
                "monotone_scan": diag.monotone,
                "speed_spread": sol.speed_spread(),
            });
            write_json(&dir, "summary.json", "geodesic", &resolved, result)?;
            Ok(if sol.converged { EXIT_OK } else { EXIT_NON_CONVERGENCE })
        }
        "full_control" => {
            let n = cfg.spins(4);
            check_spins(n, "full-control geodesic")?;
            resolved.n = Some(n);
            // Uniform start to the product state at field eps*, on the
            // permutation-reduced levels k = number of excited spins. Level
            // energies per microstate carry `ln C(N, k)` on top of the
            // Hellinger form and are pinned to `E_0 = 0`.
            let fc = FullControl::permutation_reduced(n)?.with_gauge(Gauge::PinFirst);
            let e = logistic(-2.0 * units.beta * eps);
            let p = fc.weights(&vec![0.0; fc.n_params()], units.beta)?.1;
            let q: Vec<f64> = fc
                .multiplicities()
                .iter()
                .enumerate()
                .map(|(k, &m)| m as f64 * e.powi(k as i32) * (1.0 - e).powi((n - k) as i32))
                .collect();
            let proto = full_control_geodesic(&p, &q, units.tau, steps)?;
            let ln_m: Vec<f64> = fc.multiplicities().iter().map(|&m| (m as f64).ln()).collect();
            let speed = proto.length / units.tau;
            let rows: Vec<Vec<String>> = proto
                .times
                .iter()
                .zip(&proto.beta_energies)
                .map(|(t, be)| {
                    let g0 = be[0] + ln_m[0];
                    let mut row = vec![fmt17(*t)];
                    row.extend((1..=n).map(|k| fmt17((be[k] + ln_m[k] - g0) / units.beta)));
                    row.push(fmt17(speed));
                    row
                })
                .collect();
            let mut header = vec!["t".to_string()];
            header.extend((1..=n).map(|k| format!("E{k}")));
            header.push("ds_dt".into());
            write_csv(&dir.join("trajectory.csv"), &header, &rows)?;
            let end: Vec<f64> = (1..=n).map(|k| 2.0 * eps * k as f64).collect();
            let df = (fc.ln_z(&vec![0.0; n], units.beta)? - fc.ln_z(&end, units.beta)?) / units.beta;
            let report = DissipationReport::optimal(proto.length, &units, df, Some(n));
            let result = json!({
                "model": "full_control", "N": n, "method": "closed_form",
                "report": report_json(&report),
                "converged": true,
                "shooting_ratio": Value::Null,
            });
            write_json(&dir, "summary.json", "geodesic", &resolved, result)?;
            Ok(EXIT_OK)
        }
        other => Err(Error::InvalidArgument(format!(
            "no geodesic solver for model `{other}` (use qubit, all_to_all, chain or full_control; star and pyramid use `protocol` and `bounds`)"
        ))),
    }
}

fn series_json(series: &ScalingSeries) -> Value {
    let fit = match fit_power_law(series) {
        Ok(f) => json!(f),
        Err(e) => json!({ "error": e.to_string() }),
    };
    json!({ "series": series, "fit": fit, "all_converged": series.all_converged() })
}

fn cmd_sweep(cfg: &RunConfig) -> Result<i32> {
    let units = cfg.units()?;
    let dir = cfg.out_dir();
    let model = cfg.model_name("all_to_all");
    let mut resolved = cfg.clone();
    resolved.model = Some(model.clone());
    if model == "pyramid" {
        let d = cfg.dimension.unwrap_or(3);
        let a = cfg.aperture.unwrap_or(2);
        let c = cfg.base.unwrap_or(1);
        let layers = cfg.layer_list()?;
        resolved.dimension = Some(d);
        resolved.aperture = Some(a);
        resolved.base = Some(c);
        resolved.layers = Some(cfg.layers.clone().unwrap_or_else(|| "2..6".into()));
        let series = pyramid_series(a, c, d, &layers)?;
        let mut rows = Vec::new();
        for &m in &layers {
            let b = pyramid_bound(&PyramidSpec::new(m, a, c, d)?, units.tau, units.beta)?;
            rows.push(vec![
                m.to_string(),
                b.n_total.to_string(),
                fmt17(b.length_bound),
                fmt17(b.w_diss_bound * units.tau * units.beta),
                fmt17(b.w_diss_asymptotic * units.tau * units.beta),
            ]);
        }
        let header: Vec<String> =
            ["layers", "N", "length_bound", "tau_w_diss_bound", "tau_w_diss_asymptotic"].iter().map(|s| s.to_string()).collect();
        write_csv(&dir.join("sweep.csv"), &header, &rows)?;
        write_json(&dir, "sweep.json", "sweep", &resolved, series_json(&series))?;
        return Ok(EXIT_OK);
    }
    let family = ModelFamily::parse(&model)?;
    let eps = cfg.eps()?;
    let sizes = cfg.sizes.clone().unwrap_or_else(default_sizes);
    resolved.eps_final = Some(eps);
    resolved.sizes = Some(sizes.clone());
    let series = sweep_minimal_dissipation(family, &sizes, eps, &units, &cfg.shoot_options()?)?;
    let rows: Vec<Vec<String>> = series
        .points
        .iter()
        .map(|p| {
            let n = p.n as usize;
            vec![
                n.to_string(),
                fmt17(p.tau_beta_w),
                serde_json::to_value(p.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                p.converged.to_string(),
                fmt17(local_erasure_tau_beta_w(n)),
                fmt17(global_erasure_length(n).powi(2)),
            ]
        })
        .collect();
    let header: Vec<String> = ["N", "tau_w_diss", "method", "converged", "local_ceiling", "full_control_floor"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    write_csv(&dir.join("sweep.csv"), &header, &rows)?;
    write_json(&dir, "sweep.json", "sweep", &resolved, series_json(&series))?;
    Ok(if series.all_converged() { EXIT_OK } else { EXIT_NON_CONVERGENCE })
}

fn cmd_bounds(cfg: &RunConfig) -> Result<i32> {
    let units = cfg.units()?;
    let n = cfg.spins(10);
    let bt = units.beta * units.tau;
    let mut resolved = cfg.clone();
    resolved.n = Some(n);
    let mut result = json!({
        "N": n,
        "local": { "tau_beta_w": local_erasure_tau_beta_w(n), "w_diss": local_erasure_tau_beta_w(n) / bt },
        "full_control": {
            "length": global_erasure_length(n),
            "tau_beta_w": global_erasure_length(n).powi(2),
            "w_diss": global_erasure_length(n).powi(2) / bt,
            "limit_tau_beta_w": PI * PI,
        },
        "star": {
            "constructive_length": 1.5 * PI,
            "constructive_tau_beta_w": 2.25 * PI * PI,
            "lemma_length_bound": 2.0 * PI,
            "lemma_tau_beta_w_bound": 4.0 * PI * PI,
        },
        "landauer_reference": n as f64 * std::f64::consts::LN_2 / units.beta,
    });
    if cfg.layers.is_some() || cfg.dimension.is_some() || cfg.aperture.is_some() {
        let spec = PyramidSpec::new(
            *cfg.layer_list()?.last().unwrap(),
            cfg.aperture.unwrap_or(2),
            cfg.base.unwrap_or(1),
            cfg.dimension.unwrap_or(3),
        )?;
        result["pyramid"] = json!({ "spec": spec, "bound": pyramid_bound(&spec, units.tau, units.beta)? });
    }
    write_json(&cfg.out_dir(), "bounds.json", "bounds", &resolved, result)?;
    Ok(EXIT_OK)
}

fn cmd_protocol(cfg: &RunConfig) -> Result<i32> {
    let units = cfg.units()?;
    let dir = cfg.out_dir();
    let kind = cfg.kind.clone().unwrap_or_else(|| "nbody".into());
    let grid = cfg.grid.unwrap_or(DEFAULT_GRID).max(2);
    let mut resolved = cfg.clone();
    resolved.kind = Some(kind.clone());
    resolved.grid = Some(grid);
    let tau = units.tau;
    match kind.as_str() {
        "nbody" => {
            let n = cfg.spins(10);
            resolved.n = Some(n);
            // The protocol diverges at t = tau; the table ends just short of it.
            let t_end = tau * (1.0 - NBODY_END_GAP);
            let mut rows = Vec::with_capacity(grid + 1);
            for k in 0..=grid {
                let t = if k == grid { t_end } else { t_end * k as f64 / grid as f64 };
                rows.push(vec![fmt17(t), fmt17(nbody_gamma(t, tau, n)?), fmt17(nbody_gamma_exact(t, tau, n)?)]);
            }
            let header = vec!["t".into(), "beta_gamma".into(), "beta_gamma_exact".into()];
            write_csv(&dir.join("protocol.csv"), &header, &rows)?;
            let l = global_erasure_length(n);
            let result = json!({ "kind": "nbody", "N": n, "length": l, "tau_beta_w": l * l });
            write_json(&dir, "protocol.json", "protocol", &resolved, result)?;
        }
        "hellinger" => {
            let n = cfg.spins(4);
            check_spins(n, "full-control protocol")?;
            resolved.n = Some(n);
            // Uniform state to the all-ground state; energies per excitation
            // number, relative to the ground level.
            let size = 1usize << n;
            let p = vec![1.0 / size as f64; size];
            let mut q = vec![0.0; size];
            q[0] = 1.0;
            let proto = full_control_geodesic(&p, &q, tau, grid)?;
            let mut rows = Vec::with_capacity(proto.times.len());
            for (t, e) in proto.times.iter().zip(&proto.beta_energies) {
                let mut row = vec![fmt17(*t)];
                row.extend((1..=n).map(|k| fmt17(e[(1usize << k) - 1] - e[0])));
                rows.push(row);
            }
            let mut header = vec!["t".to_string()];
            header.extend((1..=n).map(|k| format!("beta_E{k}")));
            write_csv(&dir.join("protocol.csv"), &header, &rows)?;
            let result = json!({ "kind": "hellinger", "N": n, "length": proto.length, "tau_beta_w": proto.length.powi(2) });
            write_json(&dir, "protocol.json", "protocol", &resolved, result)?;
        }
        "qubit" | "local" => {
            let n = cfg.spins(1);
            let eps = cfg.eps()?;
            resolved.n = Some(n);
            resolved.eps_final = Some(eps);
            let (times, eps_t, report) = qubit_geodesic(n, eps, &units, grid + 1)?;
            let rows: Vec<Vec<String>> = times.iter().zip(&eps_t).map(|(t, e)| vec![fmt17(*t), fmt17(*e)]).collect();
            write_csv(&dir.join("protocol.csv"), &["t".into(), "eps".into()], &rows)?;
            write_json(&dir, "protocol.json", "protocol", &resolved, json!({ "kind": "qubit", "N": n, "report": report_json(&report) }))?;
        }
        "star" => {
            let n = cfg.spins(9);
            check_spins(n, "star protocol")?;
            resolved.n = Some(n);
            let star = Star::new(n)?;
            let chain = ConditionalChain::star_thermal(&star, &[0.0, 0.0, 0.0], units.beta)?;
            let plan = star_erasure_plan(&chain, n)?;
            let sim = simulate_step_plan(&plan, grid, tau)?;
            let rows: Vec<Vec<String>> = sim
                .times
                .iter()
                .zip(&sim.states)
                .zip(&sim.segment)
                .map(|((t, s), k)| {
                    let half = s.len() / 2;
                    let up: f64 = s[half..].iter().sum();
                    vec![fmt17(*t), k.to_string(), fmt17(up), fmt17(s[0])]
                })
                .collect();
            let header = vec!["t".into(), "segment".into(), "p_center_up".into(), "p_all_down".into()];
            write_csv(&dir.join("protocol.csv"), &header, &rows)?;
            let result = json!({
                "kind": "star", "N": n,
                "segments": plan.segments.iter().map(|s| json!({ "factor": s.factor, "weight": s.weight, "length": s.length })).collect::<Vec<_>>(),
                "analytic_length": sim.analytic_length,
                "measured_length": sim.measured_length,
                "tau_beta_w": sim.measured_length.powi(2),
            });
            write_json(&dir, "protocol.json", "protocol", &resolved, result)?;
        }
        other => return Err(Error::InvalidArgument(format!("unknown protocol kind `{other}`"))),
    }
    Ok(EXIT_OK)
}

fn cmd_fit(cfg: &RunConfig) -> Result<i32> {
    let input = cfg.input.clone().ok_or_else(|| Error::InvalidArgument("fit needs --input".into()))?;
    let mut rdr = csv::Reader::from_path(&input)?;
    let headers = rdr.headers()?.clone();
    let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h));
    let n_col = col(&["N", "n"]).ok_or_else(|| Error::InvalidArgument("input lacks an `N` column".into()))?;
    let w_col = col(&["tau_w_diss", "tau_w_diss_bound"])
        .ok_or_else(|| Error::InvalidArgument("input lacks a `tau_w_diss` column".into()))?;
    let conv_col = col(&["converged"]);
    let mut pts = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize| {
            rec[i].trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad number `{}`", &rec[i])))
        };
        if conv_col.is_some_and(|c| rec[c].trim() != "true") {
            continue;
        }
        pts.push((parse(n_col)?, parse(w_col)?));
    }
    let fit = fit_power_law_points(&pts)?;
    write_json(&cfg.out_dir(), "fit.json", "fit", cfg, json!(fit))?;
    Ok(EXIT_OK)
}

/// `beta` energies by excitation bitmask for a decomposable protocol.
fn snapshot_energies(kind: &str, n: usize, s: f64, tau: f64) -> Result<Vec<f64>> {
    match kind {
        "full_control" | "hellinger" => erasure_energies(&vec![0.5; n], s),
        "nbody" => Ok(nbody_energies(n, nbody_gamma(s * tau, tau, n)?)),
        "local" | "qubit" => {
            // Independent qubits: every spin carries the same single-spin
            // energy and there is no coupling at all.
            let e = (0.5 * PI * s).tan().asinh() * 2.0;
            Ok((0..1usize << n).map(|m| e * m.count_ones() as f64).collect())
        }
        other => Err(Error::InvalidArgument(format!("cannot decompose protocol kind `{other}`"))),
    }
}

fn cmd_decompose(cfg: &RunConfig) -> Result<i32> {
    let n = cfg.spins(6);
    check_spins(n, "decompose")?;
    let units = cfg.units()?;
    let kind = cfg.kind.clone().unwrap_or_else(|| "full_control".into());
    let times = cfg.times.clone().unwrap_or_else(|| (1..=5).map(|k| k as f64 / 6.0).collect());
    if times.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
        return Err(Error::InvalidArgument("snapshot times must be interior fractions of tau".into()));
    }
    let mut resolved = cfg.clone();
    resolved.n = Some(n);
    resolved.kind = Some(kind.clone());
    resolved.times = Some(times.clone());
    let mut snaps = Vec::with_capacity(times.len());
    for &s in &times {
        let d = interaction_decompose(n, &snapshot_energies(&kind, n, s, units.tau)?)?;
        let ranges: Vec<(f64, f64)> = (1..=n).map(|k| d.range_of_order(k)).collect();
        snaps.push(json!({
            "t": s * units.tau,
            "max_abs_by_order": d.max_abs_by_order(),
            "range_by_order": ranges,
        }));
    }
    write_json(&cfg.out_dir(), "decompose.json", "decompose", &resolved, json!({ "kind": kind, "N": n, "snapshots": snaps }))?;
    Ok(EXIT_OK)
}

/// Outcome of one self-test check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.02..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Fast invariant checks; returns one entry per check.
pub fn selftest(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let units = UnitsContext::default();
    let mut out = Vec::new();

    let exact = (1..=64).all(|n| local_erasure_tau_beta_w(n) == n as f64 * PI * PI / 4.0);
    let q = Qubits::new(1);
    let (sol, _) = shoot_geodesic(&q, &ControlPoint::new(vec![0.0])?, Target { eps_final: 20.0 }, &units, &ShootOptions::default())?;
    let dev = (sol.report.tau_beta_w(&units) - PI * PI / 4.0).abs();
    out.push(check("local_bound", exact && dev < 1e-4, format!("shot qubit |tau beta W - pi^2/4| = {dev:.3e}")));

    let dev = (global_erasure_length(40).powi(2) - PI * PI).abs();
    out.push(check("global_bound", dev < 1e-4, format!("N = 40 deviation {dev:.3e}")));

    let mut worst = 0.0f64;
    for _ in 0..5 {
        let levels = rng.gen_range(2..=6);
        let mult: Vec<u64> = (0..levels).map(|_| rng.gen_range(1..4)).collect();
        let fc = FullControl::new(mult)?.with_gauge(Gauge::PinFirst);
        let (p, qd) = (random_dist(&mut rng, levels), random_dist(&mut rng, levels));
        let (start, vel) = full_control_geodesic_velocity(&fc, &p, &qd, 1.0)?;
        let sol = integrate_geodesic(&fc, &start, &vel, 2000, &units)?;
        let l = hellinger_angle(&p, &qd)?;
        worst = worst.max((sol.report.length - l).abs() / l);
    }
    out.push(check("hellinger_equivalence", worst < 1e-6, format!("max relative deviation {worst:.3e}")));

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let sizes: Vec<usize> = (0..rng.gen_range(2..=4)).map(|_| rng.gen_range(2..=5)).collect();
        let marginal = random_dist(&mut rng, sizes[0]);
        let conds: Vec<Vec<Vec<f64>>> =
            sizes.windows(2).map(|w| (0..w[0]).map(|_| random_dist(&mut rng, w[1])).collect()).collect();
        let chain = ConditionalChain::new(marginal, conds)?;
        let mut d = ChainDifferential::zeros(&chain);
        let tangent = |rng: &mut ChaCha8Rng, n: usize| {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|x| *x -= m);
            v
        };
        d.marginal = tangent(&mut rng, sizes[0]);
        for (l, c) in d.conditionals.iter_mut().enumerate() {
            for row in c.iter_mut() {
                *row = tangent(&mut rng, sizes[l + 1]);
            }
        }
        let f = fisher_quadratic(&chain, &d)?;
        worst = worst.max((f.joint - f.decomposed()).abs() / f.joint.max(1.0));
    }
    out.push(check("fisher_markov", worst < 1e-10, format!("max deviation {worst:.3e}")));

    let mut ok = true;
    for n in 3..=8 {
        let d = interaction_decompose(n, &erasure_energies(&vec![0.3; n], 0.5)?)?;
        ok &= d.max_abs_by_order()[2..].iter().all(|c| *c > 1e-6);
    }
    out.push(check("interaction_orders", ok, "erasure geodesic couples every order for N = 3..8".into()));

    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (e, j) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = rng.gen_range(2..=8);
        worst = worst.max((AllToAll::new(n)?.ln_z(&[e, j], 1.0)? - oracle::all_to_all(n, e, j, 1.0)).abs());
    }
    out.push(check("oracle_partition_functions", worst < 1e-12, format!("max |ln Z - brute force| = {worst:.3e}")));

    let chain = ConditionalChain::star_thermal(&Star::new(9)?, &[0.0, 0.0, 0.0], 1.0)?;
    let sim = simulate_step_plan(&star_erasure_plan(&chain, 9)?, 400, 1.0)?;
    let dev = (sim.measured_length - 1.5 * PI).abs();
    out.push(check("star_construction", dev < 1e-6, format!("measured length - 3 pi / 2 = {dev:.3e}")));

    let b = pyramid_bound(&PyramidSpec::new(4, 2, 1, 2)?, 1.0, 1.0)?;
    out.push(check(
        "pyramid_bound",
        b.n_total == 16 && b.w_diss_bound == 36.0 * PI * PI,
        format!("N_total = {}, bound = {}", b.n_total, b.w_diss_bound),
    ));
    Ok(out)
}

fn cmd_selftest(cfg: &RunConfig) -> Result<i32> {
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let mut resolved = cfg.clone();
    resolved.seed = Some(seed);
    let checks = selftest(seed)?;
    for c in &checks {
        eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let all = checks.iter().all(|c| c.passed);
    write_json(&cfg.out_dir(), "selftest.json", "selftest", &resolved, json!({ "passed": all, "checks": checks }))?;
    Ok(if all { EXIT_OK } else { EXIT_FAILURE })
}
