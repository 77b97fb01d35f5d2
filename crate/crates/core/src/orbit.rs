//! Periodic orbits through the return map on the section
//! `{x = lambda, y < F(lambda)}`, crossed left to right.
//!
//! Every periodic orbit surrounds the equilibrium and so meets the section
//! once per turn, at its lowest point. With `d = F(lambda) - y` measuring the
//! distance below the equilibrium, a stable orbit sits where the displacement
//! `P(y) - y` changes sign from negative (inside) to positive (outside).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bifurcation::{equilibrium, Stability};
use crate::integrator::{
    first_return_with, integrate, Direction, EventKind, EventSpec, IntegrateError, IntegrateOptions, Trajectory,
};
use crate::poly::PolyBranch;
use crate::system::{State, SystemError, SystemSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("no return to the section (settled at the equilibrium or escaped)")]
    NoReturn,
    #[error("no stable periodic orbit: no sign change of P(y) - y over {scanned} section points down to d = {d_max}")]
    NoOrbit { scanned: usize, d_max: f64 },
    #[error("no classification rule fires ({metrics})")]
    Ambiguous { metrics: Box<ClassifyMetrics> },
    #[error("amplitude jump {jump} does not exceed threshold {threshold}")]
    NoJump { jump: f64, threshold: f64 },
    #[error("x_min does not change sign: {x_min_lo} at lambda = {lo}, {x_min_hi} at lambda = {hi}")]
    NotBracketed { lo: f64, hi: f64, x_min_lo: f64, x_min_hi: f64 },
    #[error("shadow hypothesis fails: min (g - g_shadow) = {min} at x = {at}")]
    HypothesisViolated { min: f64, at: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    System(#[from] SystemError),
}

impl OrbitError {
    /// Whether the failure is a numerical outcome rather than bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, OrbitError::InvalidInput(_) | OrbitError::System(_))
    }
}

/// Thresholds of the arclength-tracking classifier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyThresholds {
    /// Tube radius `delta = delta_factor * 2 sqrt(eps) * max(1, amplitude)`.
    pub delta_factor: f64,
    /// A large orbit with at least this arclength fraction tracking only the
    /// repelling branch has a head.
    pub head_fraction: f64,
    /// A large orbit below this fraction is a relaxation oscillation.
    pub relaxation_fraction: f64,
    /// A small orbit whose repelling-branch tracking spans at least this
    /// fraction of the fold height is a headless canard.
    pub headless_extent: f64,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        Self {
            delta_factor: 0.1,
            head_fraction: 0.03,
            relaxation_fraction: 0.02,
            headless_extent: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyMetrics {
    pub delta: f64,
    pub frac_left: f64,
    pub frac_middle: f64,
    pub frac_right: f64,
    /// Near the repelling branch and away from both attracting ones.
    pub frac_middle_only: f64,
    /// `y` range covered while near the repelling branch only.
    pub middle_only_y_extent: f64,
    pub fold_height: f64,
    /// `x_min < 0` and `x_max > x_M`: the orbit visits both outer branches.
    pub large: bool,
}

impl std::fmt::Display for ClassifyMetrics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "delta={:.4} left={:.3} middle={:.3} right={:.3} middle_only={:.3} middle_y_extent={:.4} large={}",
            self.delta,
            self.frac_left,
            self.frac_middle,
            self.frac_right,
            self.frac_middle_only,
            self.middle_only_y_extent,
            self.large
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    SmallCycle,
    CanardWithoutHead,
    CanardWithHead,
    RelaxationOscillation,
    /// No rule fired; see the metrics.
    Ambiguous,
}

impl Classification {
    pub fn name(&self) -> &'static str {
        match self {
            Classification::SmallCycle => "SmallCycle",
            Classification::CanardWithoutHead => "CanardWithoutHead",
            Classification::CanardWithHead => "CanardWithHead",
            Classification::RelaxationOscillation => "RelaxationOscillation",
            Classification::Ambiguous => "Ambiguous",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitOptions {
    pub tol: f64,
    /// Time allowed for one return; defaults to `100 / eps + 100`.
    pub t_max: Option<f64>,
    /// Field norm below which a trajectory counts as settled.
    pub settle: f64,
    pub grid: usize,
    pub d_min: f64,
    /// Bisection stops when the bracket on `y` is this narrow.
    pub bisect_tol: f64,
    /// Previous fixed point, tried first.
    pub hint: Option<f64>,
    /// Sample spacing of the reconstructed cycle.
    pub sample_dt: f64,
    pub thresholds: ClassifyThresholds,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            t_max: None,
            settle: 1e-7,
            grid: 64,
            d_min: 1e-7,
            bisect_tol: 1e-10,
            hint: None,
            sample_dt: 0.02,
            thresholds: ClassifyThresholds::default(),
        }
    }
}

impl OrbitOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_hint(mut self, hint: Option<f64>) -> Self {
        self.hint = hint;
        self
    }

    fn return_time(&self, spec: &SystemSpec) -> f64 {
        self.t_max.unwrap_or(100.0 / spec.epsilon() + 100.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub lambda: f64,
    /// Lowest point of the cycle, on the section.
    pub fixed_point: State,
    pub cycle: Trajectory,
    pub period: f64,
    pub amplitude: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// `|state(T) - state(0)|`.
    pub closure: f64,
    pub classification: Classification,
    pub metrics: ClassifyMetrics,
    pub stability_multiplier: f64,
}

pub fn section(spec: &SystemSpec) -> EventKind {
    EventKind::Section {
        x0: spec.lambda(),
        direction: Direction::Rightward,
        y_window: Some((f64::NEG_INFINITY, spec.f_value(spec.lambda()))),
    }
}

fn return_opts(opts: &OrbitOptions) -> IntegrateOptions {
    IntegrateOptions::new(opts.tol).with_settle(opts.settle)
}

/// `y` of the first return of `(lambda, y0)` to the section.
pub fn return_map(spec: &SystemSpec, y0: f64, opts: &OrbitOptions) -> Result<f64, OrbitError> {
    return_point(spec, y0, opts).map(|(s, _)| s.y)
}

fn return_point(spec: &SystemSpec, y0: f64, opts: &OrbitOptions) -> Result<(State, f64), OrbitError> {
    let f_lam = spec.f_value(spec.lambda());
    if !(y0 < f_lam) {
        return Err(OrbitError::InvalidInput(format!("y0 = {y0} is not below F(lambda) = {f_lam}")));
    }
    let start = State::new(spec.lambda(), y0);
    match first_return_with(spec, section(spec), start, opts.return_time(spec), &return_opts(opts)) {
        Ok(r) => Ok(r),
        Err(IntegrateError::NoReturn) | Err(IntegrateError::Diverged(_)) => Err(OrbitError::NoReturn),
        Err(e) => Err(e.into()),
    }
}

/// Sign of the displacement `P(y) - y`; a trajectory that settles onto a
/// stable equilibrium counts as moving inward (positive).
fn displacement(spec: &SystemSpec, y: f64, opts: &OrbitOptions, stable_eq: bool) -> Result<f64, OrbitError> {
    match return_map(spec, y, opts) {
        Ok(p) => Ok(p - y),
        Err(OrbitError::NoReturn) if stable_eq => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Bracket `[d_in, d_out]` with the displacement negative at `d_in` and
/// positive at `d_out`.
type Bracket = (f64, f64);

fn scan_grid(
    spec: &SystemSpec,
    opts: &OrbitOptions,
    stable_eq: bool,
    d_max: f64,
) -> Result<(Vec<Bracket>, usize, f64), OrbitError> {
    let f_lam = spec.f_value(spec.lambda());
    let n = opts.grid.max(4);
    let mut ds: Vec<f64> = (0..n)
        .map(|i| opts.d_min * (d_max / opts.d_min).powf(i as f64 / (n - 1) as f64))
        .collect();
    let mut vals: Vec<Option<f64>> = Vec::with_capacity(n);
    for &d in &ds {
        vals.push(displacement(spec, f_lam - d, opts, stable_eq).ok());
    }
    let mut top = d_max;
    for _ in 0..3 {
        match vals.last() {
            Some(Some(v)) if *v < 0.0 => {
                let lo = top;
                top *= 4.0;
                for i in 1..=8 {
                    let d = lo * (top / lo).powf(i as f64 / 8.0);
                    ds.push(d);
                    vals.push(displacement(spec, f_lam - d, opts, stable_eq).ok());
                }
            }
            _ => break,
        }
    }
    let mut brackets = Vec::new();
    for i in 1..ds.len() {
        if let (Some(a), Some(b)) = (vals[i - 1], vals[i]) {
            if a < 0.0 && b > 0.0 {
                brackets.push((ds[i - 1], ds[i]));
            }
        }
    }
    Ok((brackets, ds.len(), top))
}

/// Geometric search outward/inward from a previous fixed point.
fn local_bracket(spec: &SystemSpec, opts: &OrbitOptions, stable_eq: bool, hint: f64) -> Option<Bracket> {
    let f_lam = spec.f_value(spec.lambda());
    let d0 = f_lam - hint;
    if !(d0 > opts.d_min) {
        return None;
    }
    let v0 = displacement(spec, f_lam - d0, opts, stable_eq).ok()?;
    let mut prev = d0;
    for k in 1..=30 {
        let fac = 1.0 + 0.01 * 1.5f64.powi(k - 1);
        let d = if v0 < 0.0 { d0 * fac } else { d0 / fac };
        if d < opts.d_min {
            return None;
        }
        let v = displacement(spec, f_lam - d, opts, stable_eq).ok()?;
        if v0 < 0.0 && v > 0.0 {
            return Some((prev, d));
        }
        if v0 > 0.0 && v < 0.0 {
            return Some((d, prev));
        }
        prev = d;
    }
    None
}

/// Bisection for the fixed point in `y`, given a bracket in `d`.
fn bisect_fixed_point(spec: &SystemSpec, opts: &OrbitOptions, stable_eq: bool, br: Bracket) -> Result<f64, OrbitError> {
    let f_lam = spec.f_value(spec.lambda());
    // y_hi is inside (negative displacement), y_lo outside
    let (mut y_lo, mut y_hi) = (f_lam - br.1, f_lam - br.0);
    for _ in 0..200 {
        if y_hi - y_lo <= opts.bisect_tol {
            break;
        }
        let m = 0.5 * (y_lo + y_hi);
        if m <= y_lo || m >= y_hi {
            break;
        }
        if displacement(spec, m, opts, stable_eq)? < 0.0 {
            y_hi = m;
        } else {
            y_lo = m;
        }
    }
    Ok(0.5 * (y_lo + y_hi))
}

/// Finds a stable periodic orbit: the outermost one, or the one nearest
/// `opts.hint` when given.
/// Only the fold is required of `spec`, so smooth shadow systems work too.
pub fn find_periodic_orbit(spec: &SystemSpec, opts: &OrbitOptions) -> Result<PeriodicOrbit, OrbitError> {
    let geo = spec.geometry()?;
    let stable_eq = equilibrium(spec).primary().stability == Stability::Stable;
    let f_lam = spec.f_value(spec.lambda());

    let mut chosen = opts.hint.and_then(|h| local_bracket(spec, opts, stable_eq, h));
    if chosen.is_none() {
        let d_max = 2.0 * (geo.y_m.abs() + f_lam.abs() + 1.0) + 1.0;
        let (brackets, scanned, top) = scan_grid(spec, opts, stable_eq, d_max)?;
        chosen = match opts.hint {
            Some(h) => brackets
                .iter()
                .copied()
                .min_by(|a, b| ((f_lam - a.0) - h).abs().total_cmp(&((f_lam - b.0) - h).abs())),
            None => brackets.last().copied(),
        };
        if chosen.is_none() {
            return Err(OrbitError::NoOrbit { scanned, d_max: top });
        }
    }
    let y_star = bisect_fixed_point(spec, opts, stable_eq, chosen.expect("bracket"))?;
    build_orbit(spec, y_star, opts)
}

/// Reconstructs one period from a point on the section and measures it.
pub fn build_orbit(spec: &SystemSpec, y_star: f64, opts: &OrbitOptions) -> Result<PeriodicOrbit, OrbitError> {
    let start = State::new(spec.lambda(), y_star);
    let io = IntegrateOptions::new(opts.tol)
        .with_events(vec![EventSpec::halt(section(spec)), EventSpec::record(EventKind::SplittingLine)])
        .with_sample_dt(opts.sample_dt);
    let cycle = integrate(spec, start, opts.return_time(spec), &io)?;
    let end = match cycle.events_of(0).next() {
        Some(e) => *e,
        None => return Err(OrbitError::NoReturn),
    };
    let ext = cycle.extent;
    let amplitude = ext.y_max - ext.y_min;
    let closure = end.state.dist(&start);

    let h = 1e-6;
    let multiplier = match (return_map(spec, y_star + h, opts), return_map(spec, y_star - h, opts)) {
        (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
        _ => f64::NAN,
    };
    let mut orbit = PeriodicOrbit {
        lambda: spec.lambda(),
        fixed_point: start,
        cycle,
        period: end.t,
        amplitude,
        x_min: ext.x_min,
        x_max: ext.x_max,
        y_min: ext.y_min,
        y_max: ext.y_max,
        closure,
        classification: Classification::Ambiguous,
        metrics: classify_metrics(spec, &[], 0.0, &opts.thresholds)?,
        stability_multiplier: multiplier,
    };
    let (class, metrics) = classify_with(spec, &orbit, &opts.thresholds)?;
    orbit.classification = class;
    orbit.metrics = metrics;
    Ok(orbit)
}

/// Euclidean distance from `(px, py)` to the graph of `p` over `[lo, hi]`
/// (either end may be infinite), via the critical points of the squared
/// distance.
pub fn distance_to_graph(p: &PolyBranch, lo: f64, hi: f64, px: f64, py: f64) -> f64 {
    let shifted = p.sub(&PolyBranch::from_slice(&[py]));
    let q = PolyBranch::from_slice(&[-px, 1.0]).add(&shifted.mul(&p.derivative()));
    let d2 = |x: f64| (x - px).powi(2) + (p.eval(x) - py).powi(2);
    let mut best = f64::INFINITY;
    for x in q.roots_in(lo, hi) {
        best = best.min(d2(x));
    }
    for x in [lo, hi] {
        if x.is_finite() {
            best = best.min(d2(x));
        }
    }
    best.sqrt()
}

fn classify_metrics(
    spec: &SystemSpec,
    pts: &[State],
    amplitude: f64,
    th: &ClassifyThresholds,
) -> Result<ClassifyMetrics, OrbitError> {
    let geo = spec.geometry()?;
    let delta = th.delta_factor * 2.0 * spec.epsilon().sqrt() * amplitude.max(1.0);
    let right = spec.right_branch();
    let (mut total, mut l, mut m, mut r, mut mo) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for w in pts.windows(2) {
        let p = w[0];
        let len = p.dist(&w[1]);
        x_min = x_min.min(p.x);
        x_max = x_max.max(p.x);
        let near_l = distance_to_graph(spec.g(), f64::NEG_INFINITY, 0.0, p.x, p.y) < delta;
        let near_m = distance_to_graph(spec.h(), 0.0, geo.x_m, p.x, p.y) < delta;
        let near_r = distance_to_graph(right, geo.x_m, f64::INFINITY, p.x, p.y) < delta;
        total += len;
        if near_l {
            l += len;
        }
        if near_m {
            m += len;
        }
        if near_r {
            r += len;
        }
        if near_m && !near_l && !near_r {
            mo += len;
            ylo = ylo.min(p.y);
            yhi = yhi.max(p.y);
        }
    }
    let total = total.max(f64::MIN_POSITIVE);
    Ok(ClassifyMetrics {
        delta,
        frac_left: l / total,
        frac_middle: m / total,
        frac_right: r / total,
        frac_middle_only: mo / total,
        middle_only_y_extent: if yhi >= ylo { yhi - ylo } else { 0.0 },
        fold_height: geo.y_m,
        large: x_min < 0.0 && x_max > geo.x_m,
    })
}

fn classify_with(
    spec: &SystemSpec,
    orbit: &PeriodicOrbit,
    th: &ClassifyThresholds,
) -> Result<(Classification, ClassifyMetrics), OrbitError> {
    let pts: Vec<State> = orbit.cycle.samples.iter().map(|s| s.state).collect();
    let mut mt = classify_metrics(spec, &pts, orbit.amplitude, th)?;
    let geo = spec.geometry()?;
    mt.large = orbit.x_min < 0.0 && orbit.x_max > geo.x_m;
    let class = if mt.large {
        if mt.frac_middle_only >= th.head_fraction {
            Classification::CanardWithHead
        } else if mt.frac_middle_only < th.relaxation_fraction {
            Classification::RelaxationOscillation
        } else {
            Classification::Ambiguous
        }
    } else if mt.middle_only_y_extent >= th.headless_extent * mt.fold_height.abs() {
        Classification::CanardWithoutHead
    } else {
        Classification::SmallCycle
    };
    Ok((class, mt))
}

/// Canard type of a closed orbit.
pub fn classify_orbit(
    spec: &SystemSpec,
    orbit: &PeriodicOrbit,
    th: &ClassifyThresholds,
) -> Result<Classification, OrbitError> {
    match classify_with(spec, orbit, th)? {
        (Classification::Ambiguous, metrics) => Err(OrbitError::Ambiguous {
            metrics: Box::new(metrics),
        }),
        (c, _) => Ok(c),
    }
}

/// Amplitude of the attracting state at `spec`, zero when the equilibrium is
/// the only attractor found.
fn amplitude_at(spec: &SystemSpec, opts: &OrbitOptions) -> Result<f64, OrbitError> {
    match find_periodic_orbit(spec, opts) {
        Ok(o) => Ok(o.amplitude),
        Err(OrbitError::NoOrbit { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplosionInterval {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub amplitude_lo: f64,
    pub amplitude_hi: f64,
    /// Whether the larger orbit lies at the lower end of the interval.
    pub grows_toward_lo: bool,
}

/// Shrinks `[lo, hi]` around the largest amplitude jump until it is at most
/// `width_tol` wide.
pub fn locate_explosion(
    spec: &SystemSpec,
    lo: f64,
    hi: f64,
    width_tol: f64,
    jump_threshold: f64,
    opts: &OrbitOptions,
) -> Result<ExplosionInterval, OrbitError> {
    if !(lo < hi) || !(width_tol > 0.0) {
        return Err(OrbitError::InvalidInput(format!("interval [{lo}, {hi}], width {width_tol}")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut amp_a = amplitude_at(&spec.with_lambda(a), opts)?;
    let mut amp_b = amplitude_at(&spec.with_lambda(b), opts)?;
    let jump = (amp_b - amp_a).abs();
    if !(jump > jump_threshold) {
        return Err(OrbitError::NoJump {
            jump,
            threshold: jump_threshold,
        });
    }
    while b - a > width_tol {
        let m = 0.5 * (a + b);
        let amp_m = amplitude_at(&spec.with_lambda(m), opts)?;
        if (amp_m - amp_a).abs() >= (amp_b - amp_m).abs() {
            b = m;
            amp_b = amp_m;
        } else {
            a = m;
            amp_a = amp_m;
        }
    }
    Ok(ExplosionInterval {
        lambda_lo: a,
        lambda_hi: b,
        amplitude_lo: amp_a,
        amplitude_hi: amp_b,
        grows_toward_lo: amp_a > amp_b,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrazingReport {
    pub lambda_g: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub x_min_lo: f64,
    pub x_min_hi: f64,
}

pub const GRAZING_WIDTH: f64 = 1e-8;

fn x_min_at(spec: &SystemSpec, lambda: f64, opts: &OrbitOptions) -> Result<f64, OrbitError> {
    find_periodic_orbit(&spec.with_lambda(lambda), opts).map(|o| o.x_min)
}

/// Parameter at which the stable orbit touches the splitting line: bisection
/// on the sign of the orbit's `x_min`, with `x_min < 0` at `lo` and `> 0` at `hi`.
pub fn find_grazing(spec: &SystemSpec, lo: f64, hi: f64, opts: &OrbitOptions) -> Result<GrazingReport, OrbitError> {
    let mut xa = x_min_at(spec, lo, opts)?;
    let mut xb = x_min_at(spec, hi, opts)?;
    if !(xa < 0.0 && xb > 0.0) {
        return Err(OrbitError::NotBracketed {
            lo,
            hi,
            x_min_lo: xa,
            x_min_hi: xb,
        });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > GRAZING_WIDTH {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let xm = x_min_at(spec, m, opts)?;
        if xm < 0.0 {
            a = m;
            xa = xm;
        } else {
            b = m;
            xb = xm;
        }
    }
    Ok(GrazingReport {
        lambda_g: 0.5 * (a + b),
        lambda_lo: a,
        lambda_hi: b,
        x_min_lo: xa,
        x_min_hi: xb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Preset;

    fn fig6(lambda: f64) -> SystemSpec {
        SystemSpec::preset(Preset::Fig6, 0.2, lambda)
    }

    #[test]
    fn distance_to_line_and_parabola() {
        let line = PolyBranch::from_slice(&[0.0, 1.0]);
        let d = distance_to_graph(&line, f64::NEG_INFINITY, f64::INFINITY, 1.0, 0.0);
        assert!((d - 0.5f64.sqrt()).abs() < 1e-14);
        // restricted to x <= -1 the nearest point is the end (-1, -1)
        let d = distance_to_graph(&line, f64::NEG_INFINITY, -1.0, 1.0, 0.0);
        assert!((d - 5f64.sqrt()).abs() < 1e-14);
        let par = PolyBranch::from_slice(&[0.0, 0.0, 1.0]);
        assert!(distance_to_graph(&par, -2.0, 2.0, 0.0, 0.0) < 1e-15);
        assert!((distance_to_graph(&par, -2.0, 2.0, 0.0, -1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn return_map_rejects_points_above_equilibrium() {
        let spec = fig6(0.001);
        assert!(matches!(
            return_map(&spec, 1.0, &OrbitOptions::default()),
            Err(OrbitError::InvalidInput(_))
        ));
    }

    #[test]
    fn return_map_climbs_from_far_below() {
        let spec = fig6(0.001);
        let p = return_map(&spec, -2.0, &OrbitOptions::default()).unwrap();
        assert!(p > -2.0 && p < spec.f_value(0.001));
    }

    #[test]
    fn no_orbit_far_left() {
        let spec = fig6(-2.0);
        assert_eq!(return_map(&spec, -2.0, &OrbitOptions::default()), Err(OrbitError::NoReturn));
        assert!(matches!(
            find_periodic_orbit(&spec, &OrbitOptions::default()),
            Err(OrbitError::NoOrbit { .. })
        ));
    }

    #[test]
    fn relaxation_orbit() {
        let spec = fig6(0.001);
        let o = find_periodic_orbit(&spec, &OrbitOptions::default()).unwrap();
        assert!(o.closure <= 1e-6, "{}", o.closure);
        assert!(o.x_min < 0.0 && o.x_max > 2.0 / 3.0);
        assert_eq!(o.classification, Classification::RelaxationOscillation, "{}", o.metrics);
        assert!(o.stability_multiplier.abs() < 1.0);
        let again = return_map(&spec, o.fixed_point.y, &OrbitOptions::default()).unwrap();
        assert!((again - o.fixed_point.y).abs() < 1e-6);
    }
}
