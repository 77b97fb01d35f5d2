//! Amplitude sweeps in `lambda` with explosion detection.
//!
//! Rows are processed in fixed-size chunks; inside a chunk each fixed-point
//! search starts from the previous row's orbit. Chunks run on worker threads,
//! and the chunk layout does not depend on the thread count, so results are
//! identical for any number of threads.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bifurcation::{equilibrium, Stability};
use crate::integrator::{integrate, Direction, EventKind, EventSpec, IntegrateOptions};
use crate::orbit::{find_periodic_orbit, locate_explosion, ExplosionInterval, OrbitError, OrbitOptions};
use crate::system::{State, SystemSpec};

pub const CHUNK: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub orbit: OrbitOptions,
    pub jump_threshold: f64,
    /// Width to which each detected jump is narrowed.
    pub refine_width: f64,
    pub threads: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            orbit: OrbitOptions::default(),
            jump_threshold: 1.0,
            refine_width: 1e-6,
            threads: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowSource {
    FixedPoint,
    Equilibration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// Zero when the trajectory rests at the equilibrium; NaN when nothing
    /// could be measured.
    pub amplitude: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub period: f64,
    /// An orbit class name, `Equilibrium` or `NoOrbit`.
    pub classification: String,
    pub source: RowSource,
    #[serde(skip)]
    fixed_point: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub explosion_intervals: Vec<ExplosionInterval>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,amplitude,x_min,x_max,period,classification\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.lambda, r.amplitude, r.x_min, r.x_max, r.period, r.classification
            );
        }
        out
    }

    pub fn intervals_json(&self) -> serde_json::Value {
        serde_json::json!({ "explosion_intervals": self.explosion_intervals })
    }
}

fn row_from_orbit(spec: &SystemSpec, opts: &OrbitOptions) -> SweepRow {
    let lambda = spec.lambda();
    match find_periodic_orbit(spec, opts) {
        Ok(o) => SweepRow {
            lambda,
            amplitude: o.amplitude,
            x_min: o.x_min,
            x_max: o.x_max,
            period: o.period,
            classification: o.classification.name().to_string(),
            source: RowSource::FixedPoint,
            fixed_point: Some(o.fixed_point.y),
        },
        Err(_) => equilibrate(spec, opts),
    }
}

/// Runs `50 / eps` time units from next to the equilibrium and measures the
/// last full turn of whatever it settles onto.
fn equilibrate(spec: &SystemSpec, opts: &OrbitOptions) -> SweepRow {
    let lambda = spec.lambda();
    let eq = spec.equilibrium_state();
    let t_end = 50.0 / spec.epsilon();
    let nan_row = |class: &str| SweepRow {
        lambda,
        amplitude: f64::NAN,
        x_min: f64::NAN,
        x_max: f64::NAN,
        period: f64::NAN,
        classification: class.to_string(),
        source: RowSource::Equilibration,
        fixed_point: None,
    };
    let io = IntegrateOptions::new(opts.tol)
        .with_settle(opts.settle)
        .with_events(vec![EventSpec::record(EventKind::Section {
            x0: lambda,
            direction: Direction::Rightward,
            y_window: None,
        })]);
    let start = State::new(eq.x, eq.y - 1e-3);
    let Ok(tr) = integrate(spec, start, t_end, &io) else {
        return nan_row("NoOrbit");
    };
    let stable = equilibrium(spec).primary().stability == Stability::Stable;
    if tr.status == crate::integrator::Status::Settled || (stable && tr.events.len() < 2) {
        return SweepRow {
            amplitude: 0.0,
            x_min: eq.x,
            x_max: eq.x,
            period: 0.0,
            ..nan_row("Equilibrium")
        };
    }
    let n = tr.events.len();
    if n < 2 {
        return nan_row("NoOrbit");
    }
    let (a, b) = (tr.events[n - 2], tr.events[n - 1]);
    let turn: Vec<State> = tr
        .samples
        .iter()
        .filter(|s| s.t >= a.t && s.t <= b.t)
        .map(|s| s.state)
        .collect();
    let fold = |f: fn(f64, f64) -> f64, init: f64, get: fn(&State) -> f64| turn.iter().map(get).fold(init, f);
    SweepRow {
        amplitude: fold(f64::max, f64::NEG_INFINITY, |s| s.y) - fold(f64::min, f64::INFINITY, |s| s.y),
        x_min: fold(f64::min, f64::INFINITY, |s| s.x),
        x_max: fold(f64::max, f64::NEG_INFINITY, |s| s.x),
        period: b.t - a.t,
        ..nan_row("Unclassified")
    }
}

fn run_chunk(spec: &SystemSpec, lambdas: &[f64], opts: &OrbitOptions) -> Vec<SweepRow> {
    let mut hint: Option<f64> = None;
    let mut rows = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let o = opts.clone().with_hint(hint);
        let row = row_from_orbit(&spec.with_lambda(l), &o);
        hint = row.fixed_point;
        rows.push(row);
    }
    rows
}

/// `n` equally spaced rows over `[lo, hi]`, then every adjacent pair whose
/// amplitudes differ by more than the jump threshold is narrowed down.
pub fn sweep(spec: &SystemSpec, lo: f64, hi: f64, n: usize, opts: &SweepOptions) -> Result<SweepResult, OrbitError> {
    if !(lo < hi) || n < 2 {
        return Err(OrbitError::InvalidInput(format!("sweep over [{lo}, {hi}] with {n} rows")));
    }
    spec.validate().into_result()?;
    let lambdas: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let chunks: Vec<&[f64]> = lambdas.chunks(CHUNK).collect();
    let threads = opts.threads.clamp(1, chunks.len());
    let mut results: Vec<Option<Vec<SweepRow>>> = vec![None; chunks.len()];
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let chunks = &chunks;
                scope.spawn(move || {
                    (w..chunks.len())
                        .step_by(threads)
                        .map(|c| (c, run_chunk(spec, chunks[c], &opts.orbit)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (c, rows) in h.join().expect("sweep worker panicked") {
                results[c] = Some(rows);
            }
        }
    });
    let rows: Vec<SweepRow> = results.into_iter().flatten().flatten().collect();

    let mut explosion_intervals = Vec::new();
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.amplitude.is_finite() && b.amplitude.is_finite() && (b.amplitude - a.amplitude).abs() > opts.jump_threshold {
            match locate_explosion(spec, a.lambda, b.lambda, opts.refine_width, opts.jump_threshold, &opts.orbit) {
                Ok(iv) => explosion_intervals.push(iv),
                Err(OrbitError::NoJump { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(SweepResult {
        rows,
        explosion_intervals,
    })
}
