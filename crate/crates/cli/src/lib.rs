//! Argument handling and command execution for the `canard-lab` binary.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure, 3 certificate not verified.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use canard_lab::bifurcation::{corner_classify, equilibrium, fold_hopf, nonexistence_threshold};
use canard_lab::certificates::{
    build_w, check_confinement, interior_lattice, subcritical_witness, superexplosion_witness, CertError,
};
use canard_lab::integrator::MIN_TOL;
use canard_lab::orbit::{find_periodic_orbit, OrbitError, OrbitOptions};
use canard_lab::stommel::{classify_regime, simulate as stommel_simulate, StommelParams, StommelState};
use canard_lab::sweep::{sweep, SweepOptions};
use canard_lab::system::SystemConfig;
use canard_lab::{integrate, EventKind, EventSpec, IntegrateError, IntegrateOptions, Preset, State, SystemSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

pub const THREADS_ENV: &str = "CANARD_LAB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    /// Help or version text; not a failure.
    #[error("{0}")]
    Info(String),
    #[error("{0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("certificate not verified: {0}")]
    Certificate(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Info(_) => 0,
            CliError::Usage(_) | CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Numerical(_) => 2,
            CliError::Certificate(_) => 3,
        }
    }
}

impl From<IntegrateError> for CliError {
    fn from(e: IntegrateError) -> Self {
        match e {
            IntegrateError::InvalidTolerance(_) | IntegrateError::InvalidInput(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<OrbitError> for CliError {
    fn from(e: OrbitError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<CertError> for CliError {
    fn from(e: CertError) -> Self {
        match e {
            CertError::ConstructionFailed(_) | CertError::NoWitness(_) => CliError::Certificate(e.to_string()),
            CertError::NotSuperExplosion { .. } | CertError::PreconditionViolated(_) | CertError::InvalidInput(_) => {
                CliError::Config(e.to_string())
            }
            CertError::NoReturn => CliError::Numerical(e.to_string()),
            CertError::Orbit(o) => o.into(),
            CertError::Integrate(i) => i.into(),
            CertError::System(s) => CliError::Config(s.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "canard-lab", version, about = "Canard explosions in piecewise-smooth Liénard systems")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Clone)]
struct SystemArgs {
    /// Built-in system: fig4 or fig6.
    #[arg(long)]
    preset: Option<String>,
    /// JSON system file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Time-scale separation; defaults to 0.2 for presets.
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    /// Slow nullcline position; defaults to 0 for presets.
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long = "t-max", default_value_t = 500.0)]
    t_max: f64,
    /// Write the resolved system as JSON.
    #[arg(long = "save-config")]
    save_config: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Region {
    #[value(name = "W")]
    W,
    #[value(name = "V")]
    V,
    #[value(name = "Vprime")]
    VPrime,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Integrate one trajectory; CSV t,x,y.
    Simulate {
        #[command(flatten)]
        sys: SystemArgs,
        /// Initial x; defaults to lambda.
        #[arg(long, allow_negative_numbers = true)]
        x0: Option<f64>,
        /// Initial y; defaults to 0.1 below the equilibrium.
        #[arg(long, allow_negative_numbers = true)]
        y0: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON log of splitting-line and slow-nullcline crossings.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Corner and fold bifurcation reports as JSON.
    Classify {
        #[command(flatten)]
        sys: SystemArgs,
    },
    /// Locate the outermost stable periodic orbit.
    Orbit {
        #[command(flatten)]
        sys: SystemArgs,
        /// Cycle samples as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Amplitude sweep over lambda; CSV rows plus explosion intervals.
    Sweep {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long = "lambda-min", allow_negative_numbers = true)]
        lambda_min: f64,
        #[arg(long = "lambda-max", allow_negative_numbers = true)]
        lambda_max: f64,
        #[arg(long, default_value_t = 40)]
        samples: usize,
        /// Amplitude difference that counts as an explosion.
        #[arg(long, default_value_t = 1.0)]
        jump: f64,
        #[arg(long = "refine-width", default_value_t = 1e-6)]
        refine_width: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Explosion intervals as JSON.
        #[arg(long)]
        intervals: Option<PathBuf>,
    },
    /// Build and check an invariant-region certificate.
    Certify {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, value_enum)]
        region: Region,
        #[arg(long = "x-hat", default_value_t = -3.0, allow_negative_numbers = true)]
        x_hat: f64,
        #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
        m1: f64,
        #[arg(long, allow_negative_numbers = true)]
        m4: Option<f64>,
        /// Boundary samples per side.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Full certificate as JSON; a summary goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the Stommel model and its corner-form image.
    Stommel {
        #[arg(long = "K")]
        k: f64,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        y0: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        mu0: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long = "t-max", default_value_t = 500.0)]
        t_max: f64,
        /// Trajectory in (y, mu) as CSV t,y,mu.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Corner-form trajectory as CSV t,x,y.
        #[arg(long = "general-out")]
        general_out: Option<PathBuf>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Common {
    pub tol: f64,
    pub t_max: f64,
    pub save_config: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Simulate {
        init: State,
        out: Option<PathBuf>,
        events: Option<PathBuf>,
    },
    Classify,
    Orbit {
        out: Option<PathBuf>,
    },
    Sweep {
        lambda_min: f64,
        lambda_max: f64,
        samples: usize,
        jump: f64,
        refine_width: f64,
        out: Option<PathBuf>,
        intervals: Option<PathBuf>,
    },
    Certify {
        region: Region,
        x_hat: f64,
        m1: f64,
        m4: Option<f64>,
        samples: usize,
        out: Option<PathBuf>,
    },
    Stommel {
        params: StommelParams,
        init: StommelState,
        out: Option<PathBuf>,
        general_out: Option<PathBuf>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionPlan {
    pub command: Command,
    /// Absent only for the Stommel command.
    pub spec: Option<SystemSpec>,
    pub common: Common,
}

fn check_numbers(tol: f64, t_max: f64) -> Result<(), CliError> {
    if !(MIN_TOL..=1e-3).contains(&tol) {
        return Err(CliError::Config(format!("--tol {tol} outside [{MIN_TOL}, 1e-3]")));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(CliError::Config(format!("--t-max {t_max} must be positive")));
    }
    Ok(())
}

fn resolve_system(a: &SystemArgs) -> Result<(SystemSpec, Common), CliError> {
    check_numbers(a.tol, a.t_max)?;
    let config = match (&a.preset, &a.config) {
        (Some(name), None) => {
            let preset = Preset::parse(name).map_err(|e| CliError::Config(e.to_string()))?;
            SystemConfig::Preset {
                preset: preset.name().to_string(),
                epsilon: a.eps.unwrap_or(0.2),
                lambda: a.lambda.unwrap_or(0.0),
            }
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let mut spec = SystemSpec::from_json(&text).map_err(|e| CliError::Config(e.to_string()))?;
            if let Some(e) = a.eps {
                spec = spec.with_epsilon(e);
            }
            if let Some(l) = a.lambda {
                spec = spec.with_lambda(l);
            }
            spec.to_config()
        }
        _ => return Err(CliError::Usage("a system is required: pass --preset or --config".into())),
    };
    let spec = SystemSpec::from_config(&config).map_err(|e| CliError::Config(e.to_string()))?;
    spec.validate()
        .into_result()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok((
        spec,
        Common {
            tol: a.tol,
            t_max: a.t_max,
            save_config: a.save_config.clone(),
        },
    ))
}

/// Parses arguments (without the program name) into a validated plan.
pub fn plan<I, S>(args: I) -> Result<ExecutionPlan, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("canard-lab")).chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError::Info(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    })?;
    match cli.command {
        Cmd::Simulate {
            sys,
            x0,
            y0,
            out,
            events,
        } => {
            let (spec, common) = resolve_system(&sys)?;
            let p = spec.equilibrium_state();
            let init = State::new(x0.unwrap_or(p.x), y0.unwrap_or(p.y - 0.1));
            if !init.is_finite() {
                return Err(CliError::Config("initial state must be finite".into()));
            }
            Ok(ExecutionPlan {
                command: Command::Simulate { init, out, events },
                spec: Some(spec),
                common,
            })
        }
        Cmd::Classify { sys } => {
            let (spec, common) = resolve_system(&sys)?;
            Ok(ExecutionPlan {
                command: Command::Classify,
                spec: Some(spec),
                common,
            })
        }
        Cmd::Orbit { sys, out } => {
            let (spec, common) = resolve_system(&sys)?;
            Ok(ExecutionPlan {
                command: Command::Orbit { out },
                spec: Some(spec),
                common,
            })
        }
        Cmd::Sweep {
            sys,
            lambda_min,
            lambda_max,
            samples,
            jump,
            refine_width,
            out,
            intervals,
        } => {
            let (spec, common) = resolve_system(&sys)?;
            if !(lambda_min < lambda_max) || !lambda_min.is_finite() || !lambda_max.is_finite() {
                return Err(CliError::Config(format!("empty lambda range [{lambda_min}, {lambda_max}]")));
            }
            if samples < 2 {
                return Err(CliError::Config("--samples must be at least 2".into()));
            }
            if !(jump > 0.0) || !(refine_width > 0.0) {
                return Err(CliError::Config("--jump and --refine-width must be positive".into()));
            }
            Ok(ExecutionPlan {
                command: Command::Sweep {
                    lambda_min,
                    lambda_max,
                    samples,
                    jump,
                    refine_width,
                    out,
                    intervals,
                },
                spec: Some(spec),
                common,
            })
        }
        Cmd::Certify {
            sys,
            region,
            x_hat,
            m1,
            m4,
            samples,
            out,
        } => {
            let (spec, common) = resolve_system(&sys)?;
            if samples < 2 {
                return Err(CliError::Config("--samples must be at least 2".into()));
            }
            Ok(ExecutionPlan {
                command: Command::Certify {
                    region,
                    x_hat,
                    m1,
                    m4,
                    samples,
                    out,
                },
                spec: Some(spec),
                common,
            })
        }
        Cmd::Stommel {
            k,
            eps,
            lambda,
            y0,
            mu0,
            tol,
            t_max,
            out,
            general_out,
        } => {
            check_numbers(tol, t_max)?;
            let params = StommelParams::new(k, eps, lambda).map_err(|e| CliError::Config(e.to_string()))?;
            Ok(ExecutionPlan {
                command: Command::Stommel {
                    params,
                    init: StommelState::new(y0, mu0),
                    out,
                    general_out,
                },
                spec: None,
                common: Common {
                    tol,
                    t_max,
                    save_config: None,
                },
            })
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
        path: "<stdout>".into(),
        source,
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

/// Threads for sweeps: `CANARD_LAB_THREADS` if set and positive, otherwise
/// the machine's parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Serialize)]
struct OrbitSummary {
    lambda: f64,
    fixed_point: State,
    period: f64,
    amplitude: f64,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    closure: f64,
    classification: &'static str,
    metrics: canard_lab::orbit::ClassifyMetrics,
    stability_multiplier: f64,
}

/// Runs a plan, writing the primary report to `out` and artifacts to the
/// paths in the plan.
pub fn execute(plan: &ExecutionPlan, out: &mut dyn Write) -> Result<(), CliError> {
    let c = &plan.common;
    if let (Some(path), Some(spec)) = (&c.save_config, &plan.spec) {
        write_file(path, &to_json(&spec.to_config()))?;
    }
    let orbit_opts = || OrbitOptions::default().with_tol(c.tol);
    match &plan.command {
        Command::Simulate { init, out: csv, events } => {
            let spec = plan.spec.as_ref().expect("planned with a system");
            let io = IntegrateOptions::new(c.tol).with_sample_dt(0.05).with_events(vec![
                EventSpec::record(EventKind::SplittingLine),
                EventSpec::record(EventKind::SlowNullcline),
            ]);
            let tr = integrate(spec, *init, c.t_max, &io)?;
            match csv {
                Some(p) => write_file(p, &tr.to_csv())?,
                None => emit(out, &tr.to_csv())?,
            }
            if let Some(p) = events {
                write_file(p, &to_json(&tr.events_json()))?;
            }
        }
        Command::Classify => {
            let spec = plan.spec.as_ref().expect("planned with a system");
            let mut report = serde_json::to_value(corner_classify(spec)).expect("report serializes");
            let obj = report.as_object_mut().expect("object");
            obj.insert("equilibrium".into(), serde_json::to_value(equilibrium(spec)).expect("serializes"));
            obj.insert(
                "fold_hopf".into(),
                fold_hopf(spec).map_or(serde_json::Value::Null, |r| serde_json::to_value(r).expect("serializes")),
            );
            obj.insert(
                "nonexistence".into(),
                nonexistence_threshold(spec)
                    .map_or(serde_json::Value::Null, |r| serde_json::to_value(r).expect("serializes")),
            );
            emit(out, &to_json(&report))?;
        }
        Command::Orbit { out: csv } => {
            let spec = plan.spec.as_ref().expect("planned with a system");
            let o = find_periodic_orbit(spec, &orbit_opts())?;
            if let Some(p) = csv {
                write_file(p, &o.cycle.to_csv())?;
            }
            emit(
                out,
                &to_json(&OrbitSummary {
                    lambda: o.lambda,
                    fixed_point: o.fixed_point,
                    period: o.period,
                    amplitude: o.amplitude,
                    x_min: o.x_min,
                    x_max: o.x_max,
                    y_min: o.y_min,
                    y_max: o.y_max,
                    closure: o.closure,
                    classification: o.classification.name(),
                    metrics: o.metrics,
                    stability_multiplier: o.stability_multiplier,
                }),
            )?;
        }
        Command::Sweep {
            lambda_min,
            lambda_max,
            samples,
            jump,
            refine_width,
            out: csv,
            intervals,
        } => {
            let spec = plan.spec.as_ref().expect("planned with a system");
            let opts = SweepOptions {
                orbit: orbit_opts(),
                jump_threshold: *jump,
                refine_width: *refine_width,
                threads: thread_count(),
            };
            let r = sweep(spec, *lambda_min, *lambda_max, *samples, &opts)?;
            match csv {
                Some(p) => write_file(p, &r.to_csv())?,
                None => emit(out, &r.to_csv())?,
            }
            let iv = to_json(&r.intervals_json());
            match intervals {
                Some(p) => write_file(p, &iv)?,
                None if csv.is_some() => emit(out, &iv)?,
                None => {}
            }
        }
        Command::Certify {
            region,
            x_hat,
            m1,
            m4,
            samples,
            out: json_path,
        } => {
            let spec = plan.spec.as_ref().expect("planned with a system");
            let (full, verified, what) = match region {
                Region::W => {
                    let (w, cert) = build_w(spec, *x_hat, *m1, *m4, *samples)?;
                    let starts = interior_lattice(&w.vertices, 20, 1e-3);
                    let conf = check_confinement(spec, &w.vertices, &starts, 100.0 / spec.epsilon(), c.tol)?;
                    let ok = cert.verified && conf.confined;
                    (
                        json!({ "region": "W", "verified": ok, "polygon": w, "certificate": cert, "confinement": conf }),
                        ok,
                        format!("W: min inward product {}", cert.min_inward_product),
                    )
                }
                Region::V => {
                    let v = superexplosion_witness(spec, &orbit_opts())?;
                    let ok = v.verified();
                    (
                        json!({ "region": "V", "verified": ok, "witness": v }),
                        ok,
                        format!("V: orbit depth {}", v.orbit_max_depth),
                    )
                }
                Region::VPrime => {
                    let v = subcritical_witness(spec, &orbit_opts())?;
                    let ok = v.verified();
                    (
                        json!({ "region": "Vprime", "verified": ok, "witness": v }),
                        ok,
                        format!("V': coexistence {}", v.coexistence.coexistence),
                    )
                }
            };
            match json_path {
                Some(p) => {
                    write_file(p, &to_json(&full))?;
                    let mut summary = full;
                    let obj = summary.as_object_mut().expect("object");
                    obj.remove("polygon");
                    obj.remove("witness");
                    emit(out, &to_json(&summary))?;
                }
                None => emit(out, &to_json(&full))?,
            }
            if !verified {
                return Err(CliError::Certificate(what));
            }
        }
        Command::Stommel {
            params,
            init,
            out: csv,
            general_out,
        } => {
            let io = IntegrateOptions::new(c.tol).with_sample_dt(0.05);
            let (orig, general) = stommel_simulate(params, *init, c.t_max, &io)?;
            let orig_csv = orig.to_csv().replacen("t,x,y", "t,y,mu", 1);
            if let Some(p) = csv {
                write_file(p, &orig_csv)?;
            }
            if let Some(p) = general_out {
                write_file(p, &general.to_csv())?;
            }
            let regime = classify_regime(params);
            let (spec, _) = canard_lab::stommel::to_general_form(params);
            emit(
                out,
                &to_json(&json!({
                    "params": params,
                    "regime": regime,
                    "general_form": spec.to_config(),
                    "final_state": { "y": orig.last().state.x, "mu": orig.last().state.y },
                    "circulation": canard_lab::stommel::circulation(orig.last().state.x),
                })),
            )?;
        }
    }
    Ok(())
}

/// Plans and executes; returns the process exit code. Diagnostics go to `err`.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let result = plan(args).and_then(|p| execute(&p, out));
    match result {
        Ok(()) => 0,
        Err(CliError::Info(msg)) => {
            let _ = write!(out, "{msg}");
            0
        }
        Err(e) => {
            let _ = writeln!(err, "canard-lab: {e}");
            e.exit_code()
        }
    }
}
