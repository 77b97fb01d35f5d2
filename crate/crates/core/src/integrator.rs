//! Adaptive Dormand–Prince 5(4) integration of piecewise-smooth planar fields
//! with located crossings of vertical lines.
//!
//! Every step is taken with the smooth field of the region the step started
//! in, continued past the region boundary. When the dense output shows a
//! boundary (or a user event line) being crossed, the step is cut back to the
//! crossing: the crossing time is bracketed on the interpolant, then refined by
//! Newton iterations on exact re-steps until `|x - c| <= event_tol`. The new
//! region is picked from the sign of `x'` at the crossing.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::system::State;

pub const MIN_TOL: f64 = 1e-13;
pub const MAX_TOL: f64 = 1e-3;
pub const DIVERGENCE_RADIUS: f64 = 1e8;
pub const MIN_STEP: f64 = 1e-14;
/// Field norm below which a returning trajectory counts as settled.
pub const DEFAULT_SETTLE: f64 = 1e-7;

/// A planar field that is smooth on each vertical strip between consecutive
/// switch points. Region `i` is the strip to the right of `i` switch points.
pub trait PiecewiseField {
    /// Ascending `x` positions of the switch lines.
    fn switch_points(&self) -> Vec<f64>;

    /// The smooth field of region `region`, evaluated anywhere in the plane.
    fn region_field(&self, region: usize, s: State) -> [f64; 2];

    /// Position of the vertical slow nullcline, if the field has one.
    fn slow_nullcline(&self) -> Option<f64> {
        None
    }
}

/// Region containing `x`, ties resolved to the right.
pub fn region_of(switches: &[f64], x: f64) -> usize {
    switches.iter().filter(|&&c| x >= c).count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Leftward,
    Rightward,
    Both,
}

impl Direction {
    fn matches(self, before: f64, after: f64) -> bool {
        match self {
            Direction::Rightward => before < 0.0 && after >= 0.0,
            Direction::Leftward => before > 0.0 && after <= 0.0,
            Direction::Both => (before < 0.0 && after >= 0.0) || (before > 0.0 && after <= 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum EventKind {
    /// Any switch line of the field.
    SplittingLine,
    Section {
        x0: f64,
        direction: Direction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y_window: Option<(f64, f64)>,
    },
    /// `x = lambda`, in either direction.
    SlowNullcline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventAction {
    Record,
    Halt,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    pub action: EventAction,
}

impl EventSpec {
    pub fn record(kind: EventKind) -> Self {
        Self {
            kind,
            action: EventAction::Record,
        }
    }

    pub fn halt(kind: EventKind) -> Self {
        Self {
            kind,
            action: EventAction::Halt,
        }
    }

    pub fn section(x0: f64, direction: Direction) -> EventKind {
        EventKind::Section {
            x0,
            direction,
            y_window: None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            EventKind::SplittingLine => "splitting-line",
            EventKind::Section { .. } => "section",
            EventKind::SlowNullcline => "slow-nullcline",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrateOptions {
    pub tol: f64,
    pub max_step: f64,
    pub events: Vec<EventSpec>,
    /// Stop with [`Status::Settled`] once the field norm drops below this.
    pub settle: Option<f64>,
    /// Emit interpolated samples at multiples of this spacing as well as at
    /// step ends.
    pub sample_dt: Option<f64>,
    /// Keep only events and the final state when false.
    pub keep_samples: bool,
}

impl IntegrateOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            max_step: f64::INFINITY,
            events: Vec::new(),
            settle: None,
            sample_dt: None,
            keep_samples: true,
        }
    }

    pub fn with_events(mut self, events: Vec<EventSpec>) -> Self {
        self.events = events;
        self
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }

    pub fn with_settle(mut self, radius: f64) -> Self {
        self.settle = Some(radius);
        self
    }

    pub fn with_sample_dt(mut self, dt: f64) -> Self {
        self.sample_dt = Some(dt);
        self
    }

    pub fn without_samples(mut self) -> Self {
        self.keep_samples = false;
        self
    }

    pub fn event_tol(&self) -> f64 {
        event_tol(self.tol)
    }
}

pub fn event_tol(tol: f64) -> f64 {
    tol.max(1e-10)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: State,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub state: State,
    /// Index into the requested event list.
    pub event: usize,
    /// The line that was crossed.
    pub line: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Completed,
    HaltedAtEvent,
    /// The field fell below the settle threshold: resting at an equilibrium.
    Settled,
    Diverged,
}

/// Bounding box of the whole path, from the continuous extension of every
/// step (not just the stored samples).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Extent {
    fn at(s: State) -> Self {
        Self {
            x_min: s.x,
            x_max: s.x,
            y_min: s.y,
            y_max: s.y,
        }
    }

    fn include(&mut self, v: V2) {
        self.x_min = self.x_min.min(v[0]);
        self.x_max = self.x_max.max(v[0]);
        self.y_min = self.y_min.min(v[1]);
        self.y_max = self.y_max.max(v[1]);
    }

    /// Adds a step: its end point, and an interior turning point of either
    /// component when the slope changes sign across the step.
    fn update(&mut self, dense: &Dense, dx0: f64, dx1: f64, dy0: f64, dy1: f64) {
        self.include(dense.eval(1.0));
        for (i, (a, b)) in [(dx0, dx1), (dy0, dy1)].into_iter().enumerate() {
            if a.signum() != b.signum() {
                let turn = golden_extremum(|th| dense.eval(th)[i], a > 0.0);
                self.include(dense.eval(turn));
            }
        }
    }
}

/// Location of the interior maximum (`max = true`) or minimum on `[0, 1]`.
fn golden_extremum(f: impl Fn(f64) -> f64, max: bool) -> f64 {
    let g = |x: f64| if max { -f(x) } else { f(x) };
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while b - a > 1e-12 {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    0.5 * (a + b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<EventRecord>,
    pub event_specs: Vec<EventSpec>,
    pub status: Status,
    pub event_tol: f64,
    pub extent: Extent,
}

impl Trajectory {
    pub fn last(&self) -> Sample {
        *self.samples.last().expect("trajectory always holds its initial sample")
    }

    pub fn events_of(&self, id: usize) -> impl Iterator<Item = &EventRecord> {
        self.events.iter().filter(move |e| e.event == id)
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{}", s.t, s.state.x, s.state.y);
        }
        out
    }

    /// `[{t, x, y, event}, ...]` with `event` the event label.
    pub fn events_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .events
            .iter()
            .map(|e| {
                serde_json::json!({
                    "t": e.t,
                    "x": e.state.x,
                    "y": e.state.y,
                    "event": self.event_specs[e.event].label(),
                })
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("tolerance {0:e} outside [1e-13, 1e-3]")]
    InvalidTolerance(f64),
    #[error("invalid integration input: {0}")]
    InvalidInput(String),
    #[error("trajectory left the ball of radius 1e8 at t = {}", .0.last().t)]
    Diverged(Box<Trajectory>),
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64, state: State },
    #[error("no return to the section before t_max")]
    NoReturn,
}

// Dormand–Prince 5(4) tableau with Hairer's dense output coefficients.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

type V2 = [f64; 2];

#[inline]
fn comb(y: V2, h: f64, terms: &[(f64, V2)]) -> V2 {
    let mut out = y;
    for &(a, k) in terms {
        out[0] += h * a * k[0];
        out[1] += h * a * k[1];
    }
    out
}

struct StepResult {
    y1: V2,
    k7: V2,
    err: f64,
    dense: Dense,
}

/// Continuous extension over one step, `theta` in [0, 1].
#[derive(Clone, Copy)]
struct Dense {
    r: [V2; 5],
}

impl Dense {
    fn eval(&self, theta: f64) -> V2 {
        let t1 = 1.0 - theta;
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate() {
            let r = |j: usize| self.r[j][i];
            *o = r(0) + theta * (r(1) + t1 * (r(2) + theta * (r(3) + t1 * r(4))));
        }
        out
    }
}

fn dp5_step(f: &dyn Fn(V2) -> V2, y0: V2, k1: V2, h: f64, tol: f64) -> StepResult {
    let k2 = f(comb(y0, h, &[(A21, k1)]));
    let k3 = f(comb(y0, h, &[(A31, k1), (A32, k2)]));
    let k4 = f(comb(y0, h, &[(A41, k1), (A42, k2), (A43, k3)]));
    let k5 = f(comb(y0, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]));
    let k6 = f(comb(y0, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]));
    let y1 = comb(y0, h, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
    let k7 = f(y1);
    // absolute control: step choice is invariant under shifts and axis flips
    let mut sq = 0.0;
    for i in 0..2 {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        sq += (e / tol).powi(2);
    }
    let mut r = [[0.0; 2]; 5];
    for i in 0..2 {
        let ydiff = y1[i] - y0[i];
        let bspl = h * k1[i] - ydiff;
        r[0][i] = y0[i];
        r[1][i] = ydiff;
        r[2][i] = bspl;
        r[3][i] = ydiff - h * k7[i] - bspl;
        r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    StepResult {
        y1,
        k7,
        err: (sq / 2.0).sqrt(),
        dense: Dense { r },
    }
}

/// A vertical line watched during integration.
#[derive(Clone, Copy, Debug)]
struct Watch {
    line: f64,
    /// Index into `events` for user events, `None` for bare region switches.
    user: Option<usize>,
    direction: Direction,
    y_window: Option<(f64, f64)>,
    armed: bool,
    is_switch: bool,
}

fn theta_grid() -> [f64; 5] {
    [0.0, 0.25, 0.5, 0.75, 1.0]
}

/// Earliest crossing of `watch` on the interpolant, as a step fraction.
fn locate_on_dense(dense: &Dense, w: &Watch, region_lo: f64, region_hi: f64) -> Option<f64> {
    let v = |th: f64| dense.eval(th)[0] - w.line;
    let grid = theta_grid();
    let vals: Vec<f64> = grid.iter().map(|&th| v(th)).collect();
    let direction = if !w.is_switch {
        w.direction
    } else if w.line == region_hi {
        Direction::Rightward
    } else if w.line == region_lo {
        Direction::Leftward
    } else {
        return None;
    };
    for j in 1..grid.len() {
        let hit = direction.matches(vals[j - 1], vals[j]);
        if hit {
            return Some(illinois(&v, grid[j - 1], grid[j], vals[j - 1], vals[j]));
        }
    }
    None
}

/// Regula falsi with the Illinois modification; returns the point on the far
/// side of the root so that the crossing is guaranteed to lie before it.
fn illinois(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> f64 {
    if fb == 0.0 {
        return b;
    }
    let mut side = 0;
    for _ in 0..100 {
        if (b - a).abs() <= 1e-15 {
            break;
        }
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) {
            c
        } else {
            0.5 * (a + b)
        };
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    b
}

struct Integrator<'a, F: PiecewiseField + ?Sized> {
    field: &'a F,
    switches: Vec<f64>,
    opts: &'a IntegrateOptions,
    ev_tol: f64,
}

impl<'a, F: PiecewiseField + ?Sized> Integrator<'a, F> {
    fn rhs(&self, region: usize) -> impl Fn(V2) -> V2 + '_ {
        move |y: V2| self.field.region_field(region, State::new(y[0], y[1]))
    }

    fn region_bounds(&self, region: usize) -> (f64, f64) {
        let lo = if region == 0 {
            f64::NEG_INFINITY
        } else {
            self.switches[region - 1]
        };
        let hi = self.switches.get(region).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    /// Region entered at a point on or near the switch line `line`.
    fn region_after_crossing(&self, s: State, line_idx: usize, from: usize) -> usize {
        let left = line_idx;
        let right = line_idx + 1;
        let dx_right = self.field.region_field(right, s)[0];
        if dx_right > 0.0 {
            right
        } else if dx_right < 0.0 {
            left
        } else if from == left {
            right
        } else {
            left
        }
    }
}

/// Integrates `field` from `init` over `[0, t_max]`.
pub fn integrate<F: PiecewiseField + ?Sized>(
    field: &F,
    init: State,
    t_max: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory, IntegrateError> {
    if !(MIN_TOL..=MAX_TOL).contains(&opts.tol) {
        return Err(IntegrateError::InvalidTolerance(opts.tol));
    }
    if !init.is_finite() {
        return Err(IntegrateError::InvalidInput("non-finite initial state".into()));
    }
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(IntegrateError::InvalidInput(format!("t_max = {t_max}")));
    }
    if !(opts.max_step > 0.0) {
        return Err(IntegrateError::InvalidInput(format!("max_step = {}", opts.max_step)));
    }
    let ig = Integrator {
        field,
        switches: field.switch_points(),
        opts,
        ev_tol: opts.event_tol(),
    };
    run(&ig, init, t_max)
}

fn run<F: PiecewiseField + ?Sized>(ig: &Integrator<'_, F>, init: State, t_max: f64) -> Result<Trajectory, IntegrateError> {
    let opts = ig.opts;
    let tol = opts.tol;
    let ev_tol = ig.ev_tol;

    let mut watches: Vec<Watch> = Vec::new();
    let record_split = opts.events.iter().position(|e| e.kind == EventKind::SplittingLine);
    for &c in &ig.switches {
        watches.push(Watch {
            line: c,
            user: record_split,
            direction: Direction::Both,
            y_window: None,
            armed: (init.x - c).abs() > ev_tol,
            is_switch: true,
        });
    }
    for (i, e) in opts.events.iter().enumerate() {
        let (line, direction, y_window) = match e.kind {
            EventKind::SplittingLine => continue,
            EventKind::Section {
                x0,
                direction,
                y_window,
            } => (x0, direction, y_window),
            EventKind::SlowNullcline => match ig.field.slow_nullcline() {
                Some(l) => (l, Direction::Both, None),
                None => continue,
            },
        };
        if !line.is_finite() {
            return Err(IntegrateError::InvalidInput(format!("event line {line}")));
        }
        watches.push(Watch {
            line,
            user: Some(i),
            direction,
            y_window,
            armed: (init.x - line).abs() > ev_tol,
            is_switch: false,
        });
    }

    let mut traj = Trajectory {
        samples: vec![Sample { t: 0.0, state: init }],
        events: Vec::new(),
        event_specs: opts.events.clone(),
        status: Status::Completed,
        event_tol: ev_tol,
        extent: Extent::at(init),
    };
    let mut t = 0.0;
    let mut y: V2 = [init.x, init.y];
    let mut region = region_of(&ig.switches, init.x);
    if let Some(idx) = ig.switches.iter().position(|&c| c == init.x) {
        region = ig.region_after_crossing(init, idx, idx);
    }
    let mut k1 = ig.rhs(region)(y);
    let mut next_sample = opts.sample_dt;

    let norm0 = (k1[0].hypot(k1[1])).max(1e-12);
    let mut h = (0.01 * (1.0 + init.norm()) / norm0).clamp(1e-6, 0.1).min(opts.max_step);
    let mut last_rejected = false;

    let push = |traj: &mut Trajectory, t: f64, s: State| {
        if opts.keep_samples {
            traj.samples.push(Sample { t, state: s });
        } else {
            traj.samples.truncate(1);
            traj.samples.push(Sample { t, state: s });
        }
    };

    loop {
        if let Some(r) = opts.settle {
            if k1[0].hypot(k1[1]) <= r {
                traj.status = Status::Settled;
                break;
            }
        }
        if t >= t_max {
            break;
        }
        let remaining = t_max - t;
        let mut step = h.min(opts.max_step);
        let mut last_step = false;
        if step >= remaining {
            step = remaining;
            last_step = true;
        }
        let f = ig.rhs(region);
        let res = dp5_step(&f, y, k1, step, tol);
        if !(res.err <= 1.0) {
            let fac = if res.err.is_finite() {
                (0.9 * res.err.powf(-0.2)).max(0.2)
            } else {
                0.2
            };
            h = step * fac;
            last_rejected = true;
            if h < MIN_STEP * t.abs().max(1.0) {
                return Err(IntegrateError::StepUnderflow {
                    t,
                    state: State::new(y[0], y[1]),
                });
            }
            continue;
        }

        // watched crossings inside the step; only the earliest line is acted on
        let (lo, hi) = ig.region_bounds(region);
        let mut hits: Vec<(f64, usize)> = Vec::new();
        for (wi, w) in watches.iter().enumerate() {
            if !w.armed || (w.is_switch && w.line != lo && w.line != hi) {
                continue;
            }
            if let Some(th) = locate_on_dense(&res.dense, w, lo, hi) {
                if let (false, Some((a, b))) = (w.is_switch, w.y_window) {
                    let yy = res.dense.eval(th)[1];
                    if yy < a || yy > b {
                        continue;
                    }
                }
                hits.push((th, wi));
            }
        }
        let first = hits.iter().copied().min_by(|a, b| a.0.total_cmp(&b.0));

        if let Some((theta, wi)) = first {
            let line = watches[wi].line;
            let (h_e, ev) = polish(&f, y, k1, step * theta, step, line, tol, ev_tol);
            emit_dense(&mut traj, opts, &mut next_sample, t, h_e, &ev.dense);
            traj.extent.update(&ev.dense, k1[0], ev.k7[0], k1[1], ev.k7[1]);
            t += h_e;
            y = ev.y1;
            let s = State::new(y[0], y[1]);
            if h_e > 0.0 {
                push(&mut traj, t, s);
            }
            let mut group: Vec<usize> = hits.iter().filter(|h| watches[h.1].line == line).map(|h| h.1).collect();
            group.sort_by_key(|&j| (!watches[j].is_switch, j));
            for (j, other) in watches.iter_mut().enumerate() {
                if group.contains(&j) {
                    other.armed = false;
                } else if (y[0] - other.line).abs() > ev_tol {
                    other.armed = true;
                }
            }
            k1 = ev.k7;
            let mut halt = false;
            for j in group {
                let w = watches[j];
                if w.is_switch {
                    let idx = ig.switches.iter().position(|&c| c == w.line).expect("switch line");
                    let next = ig.region_after_crossing(s, idx, region);
                    if next != region {
                        region = next;
                        if let Some(id) = w.user {
                            traj.events.push(EventRecord {
                                t,
                                state: s,
                                event: id,
                                line: w.line,
                            });
                        }
                    }
                    k1 = ig.rhs(region)(y);
                } else {
                    let id = w.user.expect("user event");
                    traj.events.push(EventRecord {
                        t,
                        state: s,
                        event: id,
                        line: w.line,
                    });
                    halt |= opts.events[id].action == EventAction::Halt;
                }
            }
            if halt {
                traj.status = Status::HaltedAtEvent;
                break;
            }
            // the truncated step says nothing about the next size
        } else {
            emit_dense(&mut traj, opts, &mut next_sample, t, step, &res.dense);
            traj.extent.update(&res.dense, k1[0], res.k7[0], k1[1], res.k7[1]);
            t = if last_step { t_max } else { t + step };
            y = res.y1;
            // a crossing too shallow to bracket: follow the end state
            let end_region = region_of(&ig.switches, y[0]);
            let (lo, hi) = ig.region_bounds(region);
            if y[0] < lo || y[0] >= hi {
                region = end_region;
                k1 = ig.rhs(region)(y);
            } else {
                k1 = res.k7;
            }
            push(&mut traj, t, State::new(y[0], y[1]));
            for w in watches.iter_mut() {
                if (y[0] - w.line).abs() > ev_tol {
                    w.armed = true;
                }
            }
            let grow = if last_rejected { 1.0 } else { 5.0 };
            let fac = if res.err > 0.0 {
                (0.9 * res.err.powf(-0.2)).clamp(0.2, grow)
            } else {
                grow
            };
            if !last_step {
                h = step * fac;
            }
            last_rejected = false;
        }

        if y[0].hypot(y[1]) > DIVERGENCE_RADIUS || !y[0].is_finite() || !y[1].is_finite() {
            traj.status = Status::Diverged;
            if !opts.keep_samples {
                traj.samples.truncate(1);
            }
            return Err(IntegrateError::Diverged(Box::new(traj)));
        }
    }
    if !opts.keep_samples {
        let last = State::new(y[0], y[1]);
        traj.samples.truncate(1);
        if t > 0.0 {
            traj.samples.push(Sample { t, state: last });
        }
    }
    Ok(traj)
}

/// Exact re-steps from `y0` refined by Newton iterations on the step length so
/// that the end state lies on `x = line`.
#[allow(clippy::too_many_arguments)]
fn polish(
    f: &dyn Fn(V2) -> V2,
    y0: V2,
    k1: V2,
    h_guess: f64,
    h_full: f64,
    line: f64,
    tol: f64,
    ev_tol: f64,
) -> (f64, StepResult) {
    let target = (0.01 * ev_tol).max(1e-13);
    let mut h = h_guess.clamp(0.0, h_full);
    let mut best: Option<(f64, StepResult, f64)> = None;
    for _ in 0..12 {
        let r = dp5_step(f, y0, k1, h, tol);
        let resid = r.y1[0] - line;
        let better = best.as_ref().map_or(true, |b| resid.abs() < b.2.abs());
        let dx = r.k7[0];
        if better {
            best = Some((h, r, resid));
        }
        if resid.abs() <= target || dx == 0.0 || !dx.is_finite() {
            break;
        }
        let hn = (h - resid / dx).clamp(0.0, h_full);
        if hn == h {
            break;
        }
        h = hn;
    }
    let (h, r, _) = best.expect("at least one re-step");
    (h, r)
}

fn emit_dense(traj: &mut Trajectory, opts: &IntegrateOptions, next: &mut Option<f64>, t: f64, h: f64, dense: &Dense) {
    let (Some(dt), Some(tn)) = (opts.sample_dt, next.as_mut()) else {
        return;
    };
    if !opts.keep_samples || h <= 0.0 {
        return;
    }
    while *tn < t + h {
        if *tn > t {
            let v = dense.eval((*tn - t) / h);
            traj.samples.push(Sample {
                t: *tn,
                state: State::new(v[0], v[1]),
            });
        }
        *tn += dt;
    }
}

/// First crossing of `section` (a vertical line event) after leaving `start`.
pub fn first_return<F: PiecewiseField + ?Sized>(
    field: &F,
    section: EventKind,
    start: State,
    t_max: f64,
    tol: f64,
) -> Result<(State, f64), IntegrateError> {
    first_return_with(field, section, start, t_max, &IntegrateOptions::new(tol))
}

/// [`first_return`] with explicit options (settle radius, step cap); the
/// event list of `opts` is replaced by the section. Without a settle radius,
/// [`DEFAULT_SETTLE`] applies, so a trajectory coming to rest at an
/// equilibrium is reported as `NoReturn`.
pub fn first_return_with<F: PiecewiseField + ?Sized>(
    field: &F,
    section: EventKind,
    start: State,
    t_max: f64,
    opts: &IntegrateOptions,
) -> Result<(State, f64), IntegrateError> {
    let mut o = opts.clone().without_samples();
    o.events = vec![EventSpec::halt(section)];
    o.settle.get_or_insert(DEFAULT_SETTLE);
    let traj = integrate(field, start, t_max, &o)?;
    match (traj.status, traj.events.first()) {
        (Status::HaltedAtEvent, Some(e)) => Ok((e.state, e.t)),
        _ => Err(IntegrateError::NoReturn),
    }
}
