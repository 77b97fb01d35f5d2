//! Comparison of the nonsmooth flow with smooth shadow systems.
//!
//! A shadow system replaces `g` on `x < 0` by another branch, usually `h`
//! continued across the splitting line. With `R = (x^2 + y^2) / 2`, both
//! systems satisfy `R_n' - R_s' = x (g(x) - g_shadow(x))` at a common point,
//! which is `<= 0` on `x < 0` whenever `g >= g_shadow` there: an excursion into
//! the left half-plane from `(0, y_c)` stays inside the shadow excursion.

use serde::{Deserialize, Serialize};

use crate::integrator::{integrate, Direction, EventKind, EventSpec, IntegrateOptions, Trajectory};
use crate::orbit::{find_periodic_orbit, OrbitError, OrbitOptions};
use crate::poly::PolyBranch;
use crate::system::{State, SystemSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShadowKind {
    ExtendH,
    ReplaceG(PolyBranch),
}

impl ShadowKind {
    pub fn left_branch(&self, spec: &SystemSpec) -> PolyBranch {
        match self {
            ShadowKind::ExtendH => spec.h().clone(),
            ShadowKind::ReplaceG(p) => p.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowBoundReport {
    pub entry_y: f64,
    /// Largest `R_n - R_s` over the arc, compared at equal `y`, and at the
    /// exits through `x = 0`.
    pub max_r_excess: f64,
    pub bounded: bool,
    pub exit_y_nonsmooth: f64,
    pub exit_y_shadow: f64,
    pub matched_points: usize,
    /// Largest `x (g - g_shadow)` sampled along the shadow arc.
    pub max_rate_difference: f64,
    /// Minimum of `g - g_shadow` over the x-range of the arcs.
    pub hypothesis_min: f64,
}

fn left_arc(spec: &SystemSpec, y_c: f64, tol: f64) -> Result<Trajectory, OrbitError> {
    let io = IntegrateOptions::new(tol).with_max_step(0.02).with_events(vec![EventSpec::halt(EventKind::Section {
        x0: 0.0,
        direction: Direction::Rightward,
        y_window: None,
    })]);
    let tr = integrate(spec, State::new(0.0, y_c), 100.0 / spec.epsilon() + 100.0, &io)?;
    if tr.events.is_empty() {
        return Err(OrbitError::NoReturn);
    }
    Ok(tr)
}

/// `x` where the arc passes height `y`, from a cubic Hermite interpolant in
/// time between the bracketing samples. The arc must be monotone in `y`.
fn x_at_height(arc: &Trajectory, spec: &SystemSpec, y: f64) -> Option<f64> {
    let s = &arc.samples;
    let i = s.windows(2).position(|w| w[0].state.y >= y && w[1].state.y <= y)?;
    let (a, b) = (s[i], s[i + 1]);
    let h = b.t - a.t;
    let (fa, fb) = (spec.eval_field(a.state), spec.eval_field(b.state));
    let herm = |p0: f64, p1: f64, m0: f64, m1: f64, u: f64| {
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * p0 + (u3 - 2.0 * u2 + u) * h * m0 + (-2.0 * u3 + 3.0 * u2) * p1 + (u3 - u2) * h * m1
    };
    let yy = |u: f64| herm(a.state.y, b.state.y, fa.1, fb.1, u) - y;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if yy(m) > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    let u = 0.5 * (lo + hi);
    Some(herm(a.state.x, b.state.x, fa.0, fb.0, u))
}

/// Follows `(0, y_c)` through the left half-plane in both systems and bounds
/// the radial excess of the nonsmooth arc. Requires `lambda >= 0`, so that
/// `y` decreases along both arcs.
pub fn shadow_compare(spec: &SystemSpec, kind: &ShadowKind, y_c: f64, tol: f64) -> Result<ShadowBoundReport, OrbitError> {
    if !(y_c > 0.0) {
        return Err(OrbitError::InvalidInput(format!("entry height y_c = {y_c} must be positive")));
    }
    if spec.lambda() < 0.0 {
        return Err(OrbitError::Unsupported(
            "arcs are matched by height, which needs lambda >= 0".into(),
        ));
    }
    let g_s = kind.left_branch(spec);
    let shadow = spec.with_left_branch(g_s.clone());
    let itol = (tol * 1e-3).clamp(1e-13, 1e-10);
    let arc_n = left_arc(spec, y_c, itol)?;
    let arc_s = left_arc(&shadow, y_c, itol)?;

    let x_lo = arc_n.extent.x_min.min(arc_s.extent.x_min).min(0.0);
    let diff = spec.g().sub(&g_s);
    let ext = diff.extremes_on(x_lo, 0.0);
    let scale = 1.0 + spec.g().extremes_on(x_lo, 0.0).max.abs();
    if ext.min < -1e-12 * scale {
        return Err(OrbitError::HypothesisViolated {
            min: ext.min,
            at: ext.argmin,
        });
    }

    let r = |s: State| 0.5 * (s.x * s.x + s.y * s.y);
    let mut max_excess: f64 = 0.0;
    let mut matched = 0;
    for s in &arc_n.samples {
        if let Some(xs) = x_at_height(&arc_s, &shadow, s.state.y) {
            max_excess = max_excess.max(r(s.state) - r(State::new(xs, s.state.y)));
            matched += 1;
        }
    }
    let exit_n = arc_n.events[0].state;
    let exit_s = arc_s.events[0].state;
    max_excess = max_excess.max(0.5 * (exit_n.y * exit_n.y - exit_s.y * exit_s.y));
    let max_rate = arc_s
        .samples
        .iter()
        .map(|s| s.state.x * diff.eval(s.state.x))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ShadowBoundReport {
        entry_y: y_c,
        max_r_excess: max_excess,
        bounded: max_excess <= tol,
        exit_y_nonsmooth: exit_n.y,
        exit_y_shadow: exit_s.y,
        matched_points: matched,
        max_rate_difference: max_rate,
        hypothesis_min: ext.min,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowEqualityReport {
    pub lambda: f64,
    pub fixed_point_nonsmooth: f64,
    pub fixed_point_shadow: f64,
    /// Largest distance between the two cycles at common sample times.
    pub max_pointwise: f64,
    pub x_min: f64,
}

/// Locates the stable orbit of the nonsmooth system and of its `h`-extended
/// shadow independently, and compares them point by point over one period.
pub fn shadow_equality(spec: &SystemSpec, opts: &OrbitOptions) -> Result<ShadowEqualityReport, OrbitError> {
    let shadow = spec.shadow_extend_h();
    let on = find_periodic_orbit(spec, opts)?;
    let os = find_periodic_orbit(&shadow, opts)?;
    let io = IntegrateOptions::new(opts.tol).with_sample_dt(opts.sample_dt);
    let tn = integrate(spec, on.fixed_point, on.period, &io)?;
    let ts = integrate(&shadow, on.fixed_point, on.period, &io)?;
    let mut max_pointwise: f64 = 0.0;
    let mut j = 0;
    for a in &tn.samples {
        while j < ts.samples.len() && ts.samples[j].t < a.t {
            j += 1;
        }
        if j < ts.samples.len() && ts.samples[j].t == a.t {
            max_pointwise = max_pointwise.max(a.state.dist(&ts.samples[j].state));
        }
    }
    Ok(ShadowEqualityReport {
        lambda: spec.lambda(),
        fixed_point_nonsmooth: on.fixed_point.y,
        fixed_point_shadow: os.fixed_point.y,
        max_pointwise,
        x_min: on.x_min,
    })
}
