//! Sampled certificates for the invariant regions behind the existence of
//! periodic orbits:
//!
//! * `W`, a six-sided trapping region around the unstable equilibrium for
//!   `0 < lambda < x_M`;
//! * `V`, bounded by the strong unstable trajectory of an unstable node, which
//!   the stable orbit must stay outside of (so it is a relaxation oscillation);
//! * `V'`, bounded by a trajectory leaving `(0, beta)` and returning higher at
//!   `(0, beta')`, which separates a stable focus from a stable orbit.
//!
//! Verification is sampling: the normal component of the field is evaluated
//! at finitely many boundary points. Vertices are checked once per adjacent
//! side, each with that side's normal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bifurcation::{corner_classify, equilibrium, linear_part, CornerKind, LinearType, Stability};
use crate::integrator::{integrate, Direction, EventKind, EventSpec, IntegrateError, IntegrateOptions, Status};
use crate::orbit::{find_periodic_orbit, OrbitError, OrbitOptions, PeriodicOrbit};
use crate::system::{Side, State, SystemError, SystemSpec};

/// Tangency allowance for the normal-product test.
pub const INWARD_TOL: f64 = -1e-9;
/// Orbit points this close to a witness boundary count as outside.
pub const BOUNDARY_SLACK: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertError {
    #[error("construction failed: {0}")]
    ConstructionFailed(String),
    #[error("not a super-explosion: h'(0) = {h_slope} <= 2 sqrt(eps) = {two_sqrt_eps}")]
    NotSuperExplosion { h_slope: f64, two_sqrt_eps: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("no witness trajectory found ({0})")]
    NoWitness(String),
    #[error("boundary trajectory did not return to the section")]
    NoReturn,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailurePoint {
    pub segment: usize,
    pub point: State,
    pub product: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateResult {
    pub verified: bool,
    /// Smallest product of the field with the unit normal the flow has to
    /// cross: inward for trapping regions, outward for repelling ones.
    pub min_inward_product: f64,
    pub samples: usize,
    pub failure_points: Vec<FailurePoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: State,
    pub b: State,
    /// Unit normal the flow must not cross against.
    pub normal: (f64, f64),
}

impl Segment {
    fn new(a: State, b: State, normal: (f64, f64)) -> Self {
        let n = normal.0.hypot(normal.1);
        Self {
            a,
            b,
            normal: (normal.0 / n, normal.1 / n),
        }
    }

    fn point(&self, s: f64) -> State {
        State::new(self.a.x + s * (self.b.x - self.a.x), self.a.y + s * (self.b.y - self.a.y))
    }
}

/// Checks `normal . G >= -1e-9` at `samples` evenly spaced points per
/// segment, both ends included.
pub fn verify_segments(spec: &SystemSpec, segments: &[Segment], samples: usize) -> CertificateResult {
    let n = samples.max(2);
    let mut min = f64::INFINITY;
    let mut fails = Vec::new();
    let mut count = 0;
    for (k, seg) in segments.iter().enumerate() {
        for i in 0..n {
            let p = seg.point(i as f64 / (n - 1) as f64);
            let (dx, dy) = spec.eval_field(p);
            let prod = seg.normal.0 * dx + seg.normal.1 * dy;
            count += 1;
            min = min.min(prod);
            if prod < INWARD_TOL {
                fails.push(FailurePoint {
                    segment: k,
                    point: p,
                    product: prod,
                });
            }
        }
    }
    CertificateResult {
        verified: fails.is_empty(),
        min_inward_product: min,
        samples: count,
        failure_points: fails,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WParams {
    pub x_hat: f64,
    pub m1: f64,
    pub m4: f64,
    pub x2: f64,
    pub y1: f64,
    pub y3: f64,
    pub y5: f64,
    /// `(g(x_hat) - y3) / (lambda - x2)`; `m4` must exceed it.
    pub m4_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonRegion {
    /// Counter-clockwise.
    pub vertices: Vec<State>,
    pub segments: Vec<Segment>,
    pub params: WParams,
}

/// Whether `p` is inside the closed polygon (even-odd rule).
pub fn point_in_polygon(poly: &[State], p: State) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn dist_to_segment(a: State, b: State, p: State) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * vx + (p.y - a.y) * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.dist(&State::new(a.x + t * vx, a.y + t * vy))
}

/// Distance from `p` to the polygon boundary.
pub fn boundary_distance(poly: &[State], p: State) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| dist_to_segment(poly[i], poly[(i + 1) % n], p))
        .fold(f64::INFINITY, f64::min)
}

fn w_geometry(spec: &SystemSpec, x_hat: f64, m1: f64, m4: Option<f64>) -> Result<(PolygonRegion, bool), CertError> {
    let lam = spec.lambda();
    let geo = spec.geometry()?;
    let y1 = m1 * (lam - x_hat);
    let right = spec.right_branch();
    let x_cross = right
        .sub(&crate::poly::PolyBranch::from_slice(&[y1]))
        .roots_in(geo.x_m, f64::INFINITY)
        .last()
        .copied()
        .ok_or_else(|| CertError::ConstructionFailed(format!("F(x) = {y1} has no root beyond the fold")))?;
    let x2 = x_cross + 1.0;
    let y3 = geo.y_m;
    let gx = spec.g().eval(x_hat);
    let m4_bound = (gx - y3) / (lam - x2);
    let (m4, ok) = match m4 {
        Some(m) => (m, m > m4_bound),
        // halfway: y5 = (y3 + g(x_hat)) / 2, strictly between
        None => (0.5 * m4_bound, gx > y3),
    };
    let y5 = m4 * (lam - x2) + y3;
    let v = [
        State::new(x_hat, 0.0),
        State::new(lam, y1),
        State::new(x2, y1),
        State::new(x2, y3),
        State::new(lam, y5),
        State::new(x_hat, y5),
    ];
    let segments = vec![
        Segment::new(v[0], v[1], (-m1, 1.0)),
        Segment::new(v[1], v[2], (0.0, 1.0)),
        Segment::new(v[2], v[3], (-1.0, 0.0)),
        Segment::new(v[3], v[4], (m4, -1.0)),
        Segment::new(v[4], v[5], (0.0, -1.0)),
        Segment::new(v[5], v[0], (1.0, 0.0)),
    ];
    Ok((
        PolygonRegion {
            vertices: v.to_vec(),
            segments,
            params: WParams {
                x_hat,
                m1,
                m4,
                x2,
                y1,
                y3,
                y5,
                m4_bound,
            },
        },
        ok && y5 > 0.0,
    ))
}

/// Builds the six-sided trapping region and checks inward flow on its
/// boundary. With `m4` left to default, `x_hat` is doubled (up to 12 times)
/// until every side traps; a larger `x_hat` lifts the top side and steepens
/// the slanted one.
pub fn build_w(
    spec: &SystemSpec,
    x_hat: f64,
    m1: f64,
    m4: Option<f64>,
    samples: usize,
) -> Result<(PolygonRegion, CertificateResult), CertError> {
    let lam = spec.lambda();
    let x_m = spec.geometry()?.x_m;
    if !(lam > 0.0 && lam < x_m) {
        return Err(CertError::PreconditionViolated(format!(
            "lambda = {lam} outside (0, x_M = {x_m})"
        )));
    }
    if !(x_hat < 0.0 && m1 < 0.0) {
        return Err(CertError::InvalidInput(format!("need x_hat < 0 and m1 < 0, got {x_hat}, {m1}")));
    }
    let mut xh = x_hat;
    let mut last = None;
    for _ in 0..12 {
        let (region, constraints_ok) = w_geometry(spec, xh, m1, m4)?;
        if constraints_ok {
            let cert = verify_segments(spec, &region.segments, samples);
            if cert.verified || m4.is_some() {
                return Ok((region, cert));
            }
            last = Some((region, cert));
        } else if m4.is_some() {
            return Err(CertError::ConstructionFailed(format!(
                "m4 = {} does not exceed (g(x_hat) - y3) / (lambda - x2) = {}",
                region.params.m4, region.params.m4_bound
            )));
        }
        xh *= 2.0;
    }
    if let Some(unverified) = last {
        return Ok(unverified);
    }
    Err(CertError::ConstructionFailed(format!(
        "no x_hat in [{}, {x_hat}] satisfies the slope constraints",
        xh / 2.0
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfinementReport {
    pub starts: usize,
    /// Largest distance outside the region reached by any trajectory.
    pub max_exit_distance: f64,
    pub confined: bool,
}

/// Integrates each start for `t_max` and records how far any trajectory gets
/// outside the polygon.
pub fn check_confinement(
    spec: &SystemSpec,
    polygon: &[State],
    starts: &[State],
    t_max: f64,
    tol: f64,
) -> Result<ConfinementReport, CertError> {
    let io = IntegrateOptions::new(tol).with_sample_dt(0.05);
    let mut worst: f64 = 0.0;
    for &s in starts {
        let tr = integrate(spec, s, t_max, &io)?;
        for p in &tr.samples {
            if !point_in_polygon(polygon, p.state) {
                worst = worst.max(boundary_distance(polygon, p.state));
            }
        }
    }
    Ok(ConfinementReport {
        starts: starts.len(),
        max_exit_distance: worst,
        confined: worst <= crate::integrator::event_tol(tol),
    })
}

/// Up to `n` points of a regular lattice strictly inside the polygon, at
/// least `margin` from its boundary.
pub fn interior_lattice(polygon: &[State], n: usize, margin: f64) -> Vec<State> {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in polygon {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let mut k = ((n as f64).sqrt().ceil() as usize).max(2);
    loop {
        let mut pts = Vec::new();
        for i in 0..k {
            for j in 0..k {
                let p = State::new(
                    x0 + (x1 - x0) * (i as f64 + 0.5) / k as f64,
                    y0 + (y1 - y0) * (j as f64 + 0.5) / k as f64,
                );
                if point_in_polygon(polygon, p) && boundary_distance(polygon, p) >= margin {
                    pts.push(p);
                }
            }
        }
        if pts.len() >= n || k > 64 {
            // spread the picks over the lattice
            let step = (pts.len() as f64 / n as f64).max(1.0);
            return (0..n.min(pts.len())).map(|i| pts[(i as f64 * step) as usize]).collect();
        }
        k += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessKind {
    V,
    VPrime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessRegion {
    pub kind: WitnessKind,
    /// Boundary trajectory, first to last sample.
    pub boundary: Vec<State>,
    /// Closing segment, from the trajectory's end back to its start line.
    pub closing: Segment,
    /// Distance of the trajectory's end from its target line.
    pub closure_residual: f64,
}

impl WitnessRegion {
    pub fn polygon(&self) -> Vec<State> {
        let mut p = self.boundary.clone();
        p.push(self.closing.b);
        p
    }

    pub fn contains(&self, p: State) -> bool {
        point_in_polygon(&self.polygon(), p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperExplosionWitness {
    pub region: WitnessRegion,
    pub certificate: CertificateResult,
    pub eigvec_slope: f64,
    pub orbit_amplitude: f64,
    /// Deepest orbit sample inside `V` (zero or negative when outside).
    pub orbit_max_depth: f64,
    pub orbit_outside: bool,
}

impl SuperExplosionWitness {
    pub fn verified(&self) -> bool {
        self.certificate.verified && self.orbit_outside
    }
}

fn orbit_depth(region: &WitnessRegion, orbit: &PeriodicOrbit) -> f64 {
    let poly = region.polygon();
    orbit
        .cycle
        .samples
        .iter()
        .map(|s| {
            let d = boundary_distance(&poly, s.state);
            if point_in_polygon(&poly, s.state) {
                d
            } else {
                -d
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Launches along the strong unstable eigenvector of the unstable node and
/// follows it around to `{x = lambda, y < F(lambda)}`. The vertical closing
/// segment has the flow leaving `V`, so `V` is negatively invariant; the
/// located stable orbit must lie outside it.
pub fn superexplosion_witness(spec: &SystemSpec, opts: &OrbitOptions) -> Result<SuperExplosionWitness, CertError> {
    let report = corner_classify(spec);
    if report.kind != CornerKind::SuperExplosion {
        return Err(CertError::NotSuperExplosion {
            h_slope: report.thresholds.h_slope,
            two_sqrt_eps: report.thresholds.two_sqrt_eps,
        });
    }
    let lam = spec.lambda();
    let eq = equilibrium(spec);
    let lp = eq.primary();
    if !(lam > 0.0) || lp.linear_type == LinearType::Focus || lp.stability != Stability::Unstable {
        return Err(CertError::PreconditionViolated(format!(
            "equilibrium at lambda = {lam} is not an unstable node"
        )));
    }
    let slope = lp.strong_eigvec_slope.expect("node has real eigenvectors");
    let n = slope.hypot(1.0);
    let p = eq.location;
    let start = State::new(p.x + 1e-8 / n, p.y + 1e-8 * slope / n);
    let f_lam = spec.f_value(lam);
    let io = IntegrateOptions::new(opts.tol)
        .with_sample_dt(opts.sample_dt)
        .with_events(vec![EventSpec::halt(EventKind::Section {
            x0: lam,
            direction: Direction::Rightward,
            y_window: Some((f64::NEG_INFINITY, f_lam)),
        })]);
    let tr = integrate(spec, start, 100.0 / spec.epsilon() + 100.0, &io)?;
    let Some(end) = tr.events.first().copied() else {
        return Err(CertError::NoReturn);
    };
    let mut boundary: Vec<State> = vec![p];
    boundary.extend(tr.samples.iter().map(|s| s.state));
    let closing = Segment::new(end.state, State::new(lam, f_lam), (1.0, 0.0));
    let certificate = verify_segments(spec, &[closing], 200);
    let region = WitnessRegion {
        kind: WitnessKind::V,
        boundary,
        closing,
        closure_residual: (end.state.x - lam).abs(),
    };
    let orbit = find_periodic_orbit(spec, opts)?;
    let depth = orbit_depth(&region, &orbit);
    Ok(SuperExplosionWitness {
        orbit_outside: depth <= BOUNDARY_SLACK,
        orbit_max_depth: depth,
        orbit_amplitude: orbit.amplitude,
        eigvec_slope: slope,
        certificate,
        region,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaOutcome {
    /// Settled onto the equilibrium without reaching the right half-plane.
    SpiralIn,
    /// Came back to `x = 0` higher than it started.
    Up,
    /// Came back lower.
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaProbe {
    pub beta: f64,
    pub outcome: BetaOutcome,
    pub beta_prime: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoexistenceReport {
    pub equilibrium_stable_focus: bool,
    /// Starts on a 1e-3 circle around the equilibrium that settle onto it.
    pub ball_converged: usize,
    pub ball_starts: usize,
    pub orbit_found: bool,
    pub orbit_amplitude: f64,
    pub orbit_multiplier: f64,
    /// Starts above and below the orbit on the section that end up on it.
    pub outer_converged: usize,
    pub outer_starts: usize,
    pub coexistence: bool,
}

/// Checks that a stable focus and a stable periodic orbit coexist: a small
/// circle around the focus settles, the outermost orbit has a multiplier
/// below one, and starts outside that orbit are drawn onto it.
pub fn check_coexistence(spec: &SystemSpec, opts: &OrbitOptions) -> Result<(CoexistenceReport, Option<PeriodicOrbit>), CertError> {
    let eps = spec.epsilon();
    let lam = spec.lambda();
    let p = spec.equilibrium_state();
    let side = if lam < 0.0 { Side::Left } else { Side::Right };
    let lp = linear_part(spec.branch_derivative(lam, side), eps, None);
    let focus = lp.linear_type == LinearType::Focus && lp.stability == Stability::Stable;
    let io = IntegrateOptions::new(opts.tol).with_settle(opts.settle).without_samples();
    let ball_starts = 16;
    let mut ball_converged = 0;
    for k in 0..ball_starts {
        let a = 2.0 * std::f64::consts::PI * k as f64 / ball_starts as f64;
        let s = State::new(p.x + 1e-3 * a.cos(), p.y + 1e-3 * a.sin());
        let tr = integrate(spec, s, 500.0 / eps, &io)?;
        if tr.last().state.dist(&p) < 1e-4 {
            ball_converged += 1;
        }
    }
    let orbit = find_periodic_orbit(spec, opts).ok();
    let (mut amp, mut mult, mut outer_converged, mut outer_starts) = (f64::NAN, f64::NAN, 0, 0);
    if let Some(o) = &orbit {
        amp = o.amplitude;
        mult = o.stability_multiplier;
        let pts: Vec<State> = o.cycle.samples.iter().map(|s| s.state).collect();
        let starts: Vec<State> = (1..=4)
            .flat_map(|k| {
                let d = 0.25 * k as f64 * (1.0 + o.amplitude);
                [State::new(lam, o.y_min - d), State::new(lam, o.y_max + d)]
            })
            .collect();
        outer_starts = starts.len();
        for &s in &starts {
            let tr = integrate(spec, s, 500.0 / eps, &io)?;
            let e = tr.last().state;
            let d = pts.iter().map(|q| q.dist(&e)).fold(f64::INFINITY, f64::min);
            if d < 1e-2 && tr.status != Status::Settled {
                outer_converged += 1;
            }
        }
    }
    let coexistence = focus
        && ball_converged == ball_starts
        && orbit.is_some()
        && mult.abs() < 1.0
        && outer_converged == outer_starts;
    Ok((
        CoexistenceReport {
            equilibrium_stable_focus: focus,
            ball_converged,
            ball_starts,
            orbit_found: orbit.is_some(),
            orbit_amplitude: amp,
            orbit_multiplier: mult,
            outer_converged,
            outer_starts,
            coexistence,
        },
        orbit,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubcriticalWitness {
    pub beta: f64,
    pub beta_prime: f64,
    pub region: WitnessRegion,
    pub certificate: CertificateResult,
    pub orbit_outside_vprime: bool,
    pub orbit_max_depth: f64,
    pub coexistence: CoexistenceReport,
    pub search: Vec<BetaProbe>,
}

impl SubcriticalWitness {
    pub fn verified(&self) -> bool {
        self.certificate.verified && self.orbit_outside_vprime && self.coexistence.coexistence
    }
}

struct BetaRun {
    outcome: BetaOutcome,
    beta_prime: Option<f64>,
    samples: Vec<State>,
    end: Option<State>,
}

fn run_beta(spec: &SystemSpec, beta: f64, opts: &OrbitOptions) -> Result<BetaRun, CertError> {
    let io = IntegrateOptions::new(opts.tol)
        .with_settle(opts.settle)
        .with_sample_dt(opts.sample_dt)
        .with_events(vec![
            EventSpec::record(EventKind::Section {
                x0: 0.0,
                direction: Direction::Rightward,
                y_window: Some((f64::NEG_INFINITY, 0.0)),
            }),
            EventSpec::halt(EventKind::Section {
                x0: 0.0,
                direction: Direction::Leftward,
                y_window: None,
            }),
        ]);
    let tr = integrate(spec, State::new(0.0, beta), 100.0 / spec.epsilon() + 100.0, &io)?;
    let samples: Vec<State> = tr.samples.iter().map(|s| s.state).collect();
    if tr.status != Status::HaltedAtEvent {
        return Ok(BetaRun {
            outcome: BetaOutcome::SpiralIn,
            beta_prime: None,
            samples,
            end: None,
        });
    }
    let end = tr.events_of(1).next().expect("halting event").state;
    let outcome = if end.y > beta { BetaOutcome::Up } else { BetaOutcome::Down };
    Ok(BetaRun {
        outcome,
        beta_prime: Some(end.y),
        samples,
        end: Some(end),
    })
}

/// Searches `beta` in `(g(lambda), h(x_M))` for a trajectory from `(0, beta)`
/// that circles the stable focus and comes back to `x = 0` above `beta`. The
/// closing segment has the flow leaving `V'`, so `V'` is negatively
/// invariant; the stable orbit must lie outside it.
pub fn subcritical_witness(spec: &SystemSpec, opts: &OrbitOptions) -> Result<SubcriticalWitness, CertError> {
    let eps = spec.epsilon();
    let two = 2.0 * eps.sqrt();
    let hs = spec.h().eval_derivative(0.0);
    let gs = spec.g().eval_derivative(0.0);
    let lam = spec.lambda();
    if !(hs > two) {
        return Err(CertError::PreconditionViolated(format!("h'(0) = {hs} is not above 2 sqrt(eps) = {two}")));
    }
    if !(gs.abs() < two) {
        return Err(CertError::PreconditionViolated(format!(
            "|g'(0)| = {} is not below 2 sqrt(eps) = {two}",
            gs.abs()
        )));
    }
    if !(lam < 0.0) {
        return Err(CertError::PreconditionViolated(format!("lambda = {lam} is not negative")));
    }
    let geo = spec.geometry()?;
    let (lo, hi) = (spec.g().eval(lam), geo.y_m);
    let mut search = Vec::new();
    let probe = |beta: f64, search: &mut Vec<BetaProbe>| -> Result<BetaRun, CertError> {
        let r = run_beta(spec, beta, opts)?;
        search.push(BetaProbe {
            beta,
            outcome: r.outcome,
            beta_prime: r.beta_prime,
        });
        Ok(r)
    };
    let n = 32;
    let mut found: Option<(f64, BetaRun)> = None;
    let mut last_in: Option<f64> = None;
    let mut first_down: Option<f64> = None;
    for i in 1..n {
        let beta = lo + (hi - lo) * i as f64 / n as f64;
        let r = probe(beta, &mut search)?;
        match r.outcome {
            BetaOutcome::Up => {
                found = Some((beta, r));
                break;
            }
            BetaOutcome::SpiralIn => last_in = Some(beta),
            BetaOutcome::Down => {
                if first_down.is_none() && last_in.is_some() {
                    first_down = Some(beta);
                    break;
                }
            }
        }
    }
    if found.is_none() {
        if let (Some(mut a), Some(mut b)) = (last_in, first_down) {
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let r = probe(m, &mut search)?;
                match r.outcome {
                    BetaOutcome::Up => {
                        found = Some((m, r));
                        break;
                    }
                    BetaOutcome::SpiralIn => a = m,
                    BetaOutcome::Down => b = m,
                }
            }
        }
    }
    let Some((beta, run)) = found else {
        let ups = search.iter().filter(|p| p.outcome == BetaOutcome::Up).count();
        let ins = search.iter().filter(|p| p.outcome == BetaOutcome::SpiralIn).count();
        return Err(CertError::NoWitness(format!(
            "{} probes over beta in ({lo}, {hi}): {ins} spiral in, {ups} return higher, {} return lower",
            search.len(),
            search.len() - ups - ins
        )));
    };
    let end = run.end.expect("returned");
    let beta_prime = end.y;
    let closing = Segment::new(end, State::new(0.0, beta), (-1.0, 0.0));
    let certificate = verify_segments(spec, &[closing], 200);
    let region = WitnessRegion {
        kind: WitnessKind::VPrime,
        boundary: run.samples,
        closing,
        closure_residual: end.x.abs(),
    };

    let (coexistence, orbit) = check_coexistence(spec, opts)?;
    let depth = orbit.as_ref().map_or(f64::NAN, |o| orbit_depth(&region, o));
    Ok(SubcriticalWitness {
        beta,
        beta_prime,
        region,
        certificate,
        orbit_outside_vprime: depth <= BOUNDARY_SLACK,
        orbit_max_depth: depth,
        coexistence,
        search,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::PolyBranch;
    use crate::system::Preset;

    #[test]
    fn polygon_helpers() {
        let sq = [State::new(0.0, 0.0), State::new(1.0, 0.0), State::new(1.0, 1.0), State::new(0.0, 1.0)];
        assert!(point_in_polygon(&sq, State::new(0.5, 0.5)));
        assert!(!point_in_polygon(&sq, State::new(1.5, 0.5)));
        assert!((boundary_distance(&sq, State::new(1.5, 0.5)) - 0.5).abs() < 1e-15);
        let pts = interior_lattice(&sq, 9, 0.1);
        assert_eq!(pts.len(), 9);
        assert!(pts.iter().all(|p| point_in_polygon(&sq, *p)));
    }

    #[test]
    fn w_on_the_gentle_corner() {
        let spec = SystemSpec::preset(Preset::Fig4, 0.2, 0.5);
        let (w, cert) = build_w(&spec, -3.0, -1.0, None, 200).unwrap();
        assert!(cert.verified, "{:?}", cert.failure_points.first());
        assert_eq!(cert.samples, 1200);
        let p = w.params;
        assert!(p.m4 > p.m4_bound);
        assert!(p.y5 < spec.g().eval(p.x_hat));
        assert!((p.y1 + 3.5).abs() < 1e-15);
    }

    #[test]
    fn shallow_x_hat_is_moved_out() {
        let spec = SystemSpec::preset(Preset::Fig4, 0.2, 0.5);
        let (w, cert) = build_w(&spec, -0.01, -1.0, None, 100).unwrap();
        assert!(w.params.x_hat < -0.8);
        assert!(cert.verified);
        assert!(matches!(
            build_w(&spec, -0.01, -1.0, Some(-100.0), 100),
            Err(CertError::ConstructionFailed(_))
        ));
    }

    #[test]
    fn witness_gates() {
        let spec = SystemSpec::preset(Preset::Fig4, 0.2, 0.5);
        assert!(matches!(
            superexplosion_witness(&spec, &OrbitOptions::default()),
            Err(CertError::NotSuperExplosion { .. })
        ));
        let steep = SystemSpec::preset(Preset::Fig6, 0.2, -0.05);
        assert!(matches!(
            subcritical_witness(&steep, &OrbitOptions::default()),
            Err(CertError::PreconditionViolated(_))
        ));
        let soft = steep.with_left_branch(PolyBranch::from_slice(&[0.0, -0.5]));
        assert!(matches!(
            subcritical_witness(&soft.with_lambda(0.1), &OrbitOptions::default()),
            Err(CertError::PreconditionViolated(_))
        ));
    }
}
