//! Piecewise-polynomial Liénard systems
//!
//! ```text
//! x' = -y + F(x),   y' = eps (x - lambda)
//! F = g on x <= 0,  h on 0 <= x (<= split),  f on x >= split
//! ```
//!
//! The splitting line is `x = 0`; an optional outer branch `f` adds a second
//! corner at `x = split` ('Z'-shaped critical manifold). Without it, the
//! repelling middle branch ends at the smooth fold where `h'` first vanishes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::PiecewiseField;
use crate::poly::{PolyBranch, PolyError};

/// Tolerance for the continuity conditions at the corners.
pub const CONTINUITY_TOL: f64 = 1e-12;
/// Grid density of the sampled slope-sign check on the middle branch.
pub const SLOPE_SAMPLES: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("continuity violated: {what} = {value:e}")]
    ContinuityViolation { what: String, value: f64 },
    #[error("slope sign violated: {what} = {value}")]
    SlopeSignViolation { what: String, value: f64 },
    #[error("h' has no positive root where it changes sign: no fold")]
    NoFold,
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: String, value: f64 },
    #[error("bad polynomial for {branch}: {source}")]
    Poly {
        branch: String,
        #[source]
        source: PolyError,
    },
    #[error("unknown preset {0:?} (expected fig4 or fig6)")]
    UnknownPreset(String),
    #[error("config parse error: {0}")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
}

impl State {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &State) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Second corner of a 'Z'-shaped critical manifold.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterBranch {
    pub poly: PolyBranch,
    pub split: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    epsilon: f64,
    lambda: f64,
    g: PolyBranch,
    h: PolyBranch,
    outer: Option<OuterBranch>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Gentle corner (`h'(0) = 0.32`) and smooth fold at 1.6; both explosions
    /// are supercritical at `eps = 0.2`.
    Fig4,
    /// Steep corner (`h'(0) = 2`) with fold at 2/3; super-explosion at `eps = 0.2`.
    Fig6,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self, SystemError> {
        match name {
            "fig4" => Ok(Preset::Fig4),
            "fig6" => Ok(Preset::Fig6),
            other => Err(SystemError::UnknownPreset(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig4 => "fig4",
            Preset::Fig6 => "fig6",
        }
    }

    /// `g(x) = (x - 1)^2 - 1` for both presets.
    pub fn g(&self) -> PolyBranch {
        PolyBranch::from_slice(&[0.0, -2.0, 1.0])
    }

    pub fn h(&self) -> PolyBranch {
        match self {
            // -(x + 1/15)^2 (x - 73/30) - 73/6750 = -x^3 + (23/10) x^2 + (8/25) x
            Preset::Fig4 => PolyBranch::from_slice(&[0.0, 8.0 / 25.0, 23.0 / 10.0, -1.0]),
            // -(x + 1)^2 (x - 3/2) - 3/2 = -x^3 - (1/2) x^2 + 2x
            Preset::Fig6 => PolyBranch::from_slice(&[0.0, 2.0, -1.0 / 2.0, -1.0]),
        }
    }
}

/// One named check of [`SystemSpec::validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    /// The quantity the check is about (residual, slope, root location...).
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    #[serde(skip)]
    errors: Vec<SystemError>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn errors(&self) -> &[SystemError] {
        &self.errors
    }

    pub fn into_result(self) -> Result<(), SystemError> {
        match self.errors.into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, value: f64, err: impl FnOnce() -> SystemError) {
        self.checks.push(ValidationCheck {
            name: name.into(),
            passed,
            value,
        });
        if !passed {
            self.errors.push(err());
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldKind {
    Smooth,
    Corner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchStability {
    Attracting,
    Repelling,
    /// `F'` changes sign somewhere on the branch.
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchInfo {
    pub lo: f64,
    pub hi: f64,
    pub stability: BranchStability,
}

/// Critical manifold `y = F(x)`: left branch `M^l` (x < 0), repelling middle
/// `M^m` (0 < x < x_M) and right branch `M^r` (x > x_M).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldGeometry {
    pub x_m: f64,
    pub y_m: f64,
    pub fold_kind: FoldKind,
    pub left: BranchInfo,
    pub middle: BranchInfo,
    pub right: BranchInfo,
}

impl ManifoldGeometry {
    pub fn branches(&self) -> [BranchInfo; 3] {
        [self.left, self.middle, self.right]
    }
}

impl SystemSpec {
    /// Assembles a system without checking it; see [`SystemSpec::validate`].
    pub fn new(epsilon: f64, lambda: f64, g: PolyBranch, h: PolyBranch) -> Self {
        Self {
            epsilon,
            lambda,
            g,
            h,
            outer: None,
        }
    }

    pub fn with_outer(mut self, poly: PolyBranch, split: f64) -> Self {
        self.outer = Some(OuterBranch { poly, split });
        self
    }

    /// Assembles and validates.
    pub fn checked(epsilon: f64, lambda: f64, g: PolyBranch, h: PolyBranch) -> Result<Self, SystemError> {
        let spec = Self::new(epsilon, lambda, g, h);
        spec.validate().into_result()?;
        Ok(spec)
    }

    pub fn preset(preset: Preset, epsilon: f64, lambda: f64) -> Self {
        Self::new(epsilon, lambda, preset.g(), preset.h())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn g(&self) -> &PolyBranch {
        &self.g
    }

    pub fn h(&self) -> &PolyBranch {
        &self.h
    }

    pub fn outer(&self) -> Option<&OuterBranch> {
        self.outer.as_ref()
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    /// Same system with `g` replaced.
    pub fn with_left_branch(&self, g: PolyBranch) -> Self {
        Self { g, ..self.clone() }
    }

    /// Smooth system obtained by extending `h` across the splitting line.
    /// Not a valid corner system (it has no corner), but it integrates fine.
    pub fn shadow_extend_h(&self) -> Self {
        Self {
            g: self.h.clone(),
            ..self.clone()
        }
    }

    pub fn split_points(&self) -> Vec<f64> {
        match &self.outer {
            Some(o) => vec![0.0, o.split],
            None => vec![0.0],
        }
    }

    /// Branch governing `x`, ties on a split resolved to the right.
    pub fn branch_at(&self, x: f64) -> &PolyBranch {
        match &self.outer {
            Some(o) if x >= o.split => &o.poly,
            _ if x >= 0.0 => &self.h,
            _ => &self.g,
        }
    }

    /// The piecewise nonlinearity `F`.
    pub fn f_value(&self, x: f64) -> f64 {
        self.branch_at(x).eval(x)
    }

    pub fn eval_field(&self, s: State) -> (f64, f64) {
        (self.f_value(s.x) - s.y, self.epsilon * (s.x - self.lambda))
    }

    /// Derivative of the branch governing the interval immediately to the
    /// given side of `x`.
    pub fn branch_derivative(&self, x: f64, side: Side) -> f64 {
        let branch = match side {
            Side::Right => self.branch_at(x),
            Side::Left => match &self.outer {
                Some(o) if x > o.split => &o.poly,
                _ if x > 0.0 => &self.h,
                _ => &self.g,
            },
        };
        branch.eval_derivative(x)
    }

    /// `p_lambda = (lambda, F(lambda))`, the unique equilibrium.
    pub fn equilibrium_state(&self) -> State {
        State::new(self.lambda, self.f_value(self.lambda))
    }

    /// Smallest positive root of `h'` (smooth fold) or the declared second split.
    pub fn fold_location(&self) -> Result<f64, SystemError> {
        if let Some(o) = &self.outer {
            return Ok(o.split);
        }
        self.h
            .derivative()
            .roots_in(0.0, f64::INFINITY)
            .first()
            .copied()
            .ok_or(SystemError::NoFold)
    }

    /// Branch beyond the fold/second corner.
    pub fn right_branch(&self) -> &PolyBranch {
        match &self.outer {
            Some(o) => &o.poly,
            None => &self.h,
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport {
            checks: Vec::new(),
            errors: Vec::new(),
        };
        let eps = self.epsilon;
        r.push("epsilon > 0", eps.is_finite() && eps > 0.0, eps, || SystemError::InvalidParameter {
            name: "epsilon".into(),
            value: eps,
        });
        let lam = self.lambda;
        r.push("lambda finite", lam.is_finite(), lam, || SystemError::InvalidParameter {
            name: "lambda".into(),
            value: lam,
        });

        let g0 = self.g.eval(0.0);
        r.push("g(0) = 0", g0.abs() <= CONTINUITY_TOL, g0, || SystemError::ContinuityViolation {
            what: "g(0)".into(),
            value: g0,
        });
        let h0 = self.h.eval(0.0);
        r.push("h(0) = 0", h0.abs() <= CONTINUITY_TOL, h0, || SystemError::ContinuityViolation {
            what: "h(0)".into(),
            value: h0,
        });
        let dg0 = self.g.eval_derivative(0.0);
        r.push("g'(0) < 0", dg0 < 0.0, dg0, || SystemError::SlopeSignViolation {
            what: "g'(0)".into(),
            value: dg0,
        });
        let dh0 = self.h.eval_derivative(0.0);
        r.push("h'(0) > 0", dh0 > 0.0, dh0, || SystemError::SlopeSignViolation {
            what: "h'(0)".into(),
            value: dh0,
        });

        let dh = self.h.derivative();
        match &self.outer {
            Some(o) => {
                let s = o.split;
                r.push("split > 0", s.is_finite() && s > 0.0, s, || SystemError::InvalidParameter {
                    name: "split".into(),
                    value: s,
                });
                let gap = o.poly.eval(s) - self.h.eval(s);
                let scale = 1.0 + self.h.eval(s).abs();
                r.push("f(split) = h(split)", gap.abs() <= CONTINUITY_TOL * scale, gap, || {
                    SystemError::ContinuityViolation {
                        what: "f(split) - h(split)".into(),
                        value: gap,
                    }
                });
                if s > 0.0 && s.is_finite() {
                    let (ok, worst) = positive_on(&dh, 0.0, s);
                    r.push("h' > 0 on (0, split)", ok, worst, || SystemError::SlopeSignViolation {
                        what: "min h' on (0, split)".into(),
                        value: worst,
                    });
                }
                let df = o.poly.eval_derivative(s);
                r.push("f'(split) < 0", df < 0.0, df, || SystemError::SlopeSignViolation {
                    what: "f'(split)".into(),
                    value: df,
                });
            }
            None => match self.fold_location() {
                Ok(xm) => {
                    r.push("h' has a positive root", true, xm, || SystemError::NoFold);
                    let (ok, worst) = positive_on(&dh, 0.0, xm);
                    r.push("h' > 0 on (0, x_M)", ok, worst, || SystemError::SlopeSignViolation {
                        what: "min h' on (0, x_M)".into(),
                        value: worst,
                    });
                    // h' must change sign so x_M is a maximum of h
                    let next = dh.roots_in(xm, f64::INFINITY).first().copied();
                    let probe = match next {
                        Some(x2) => 0.5 * (xm + x2),
                        None => xm + 1.0,
                    };
                    let beyond = dh.eval(probe);
                    r.push("h' < 0 beyond x_M", beyond < 0.0, beyond, || SystemError::NoFold);
                }
                Err(e) => r.push("h' has a positive root", false, f64::NAN, || e),
            },
        }
        r
    }

    /// Assembles the critical-manifold geometry. Requires a fold.
    pub fn geometry(&self) -> Result<ManifoldGeometry, SystemError> {
        let x_m = self.fold_location()?;
        let dg = self.g.derivative();
        let left_stab = if dg.sup_left_of(0.0) < 0.0 {
            BranchStability::Attracting
        } else if dg.roots_in(f64::NEG_INFINITY, 0.0).is_empty() && dg.eval(-1.0) > 0.0 {
            BranchStability::Repelling
        } else {
            BranchStability::Mixed
        };
        let (mid_pos, _) = positive_on(&self.h.derivative(), 0.0, x_m);
        let mid_stab = if mid_pos {
            BranchStability::Repelling
        } else {
            BranchStability::Mixed
        };
        let dr = self.right_branch().derivative();
        let right_stab = if dr.roots_in(x_m, f64::INFINITY).is_empty() {
            if dr.eval(x_m + 1.0) < 0.0 {
                BranchStability::Attracting
            } else {
                BranchStability::Repelling
            }
        } else {
            BranchStability::Mixed
        };
        Ok(ManifoldGeometry {
            x_m,
            y_m: self.f_value(x_m),
            fold_kind: if self.outer.is_some() {
                FoldKind::Corner
            } else {
                FoldKind::Smooth
            },
            left: BranchInfo {
                lo: f64::NEG_INFINITY,
                hi: 0.0,
                stability: left_stab,
            },
            middle: BranchInfo {
                lo: 0.0,
                hi: x_m,
                stability: mid_stab,
            },
            right: BranchInfo {
                lo: x_m,
                hi: f64::INFINITY,
                stability: right_stab,
            },
        })
    }

    pub fn from_config(config: &SystemConfig) -> Result<Self, SystemError> {
        let spec = match config {
            SystemConfig::Preset {
                preset,
                epsilon,
                lambda,
            } => Self::preset(Preset::parse(preset)?, *epsilon, *lambda),
            SystemConfig::Explicit {
                epsilon,
                lambda,
                g,
                h,
                f,
            } => {
                let mut spec = Self::new(*epsilon, *lambda, g.clone(), h.clone());
                if let Some(outer) = f {
                    let poly = PolyBranch::new(outer.coeffs.clone()).map_err(|source| SystemError::Poly {
                        branch: "f".into(),
                        source,
                    })?;
                    spec = spec.with_outer(poly, outer.split);
                }
                spec
            }
        };
        spec.validate().into_result()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self, SystemError> {
        let config: SystemConfig = serde_json::from_str(text).map_err(|e| SystemError::Parse(e.to_string()))?;
        Self::from_config(&config)
    }

    pub fn to_config(&self) -> SystemConfig {
        SystemConfig::Explicit {
            epsilon: self.epsilon,
            lambda: self.lambda,
            g: self.g.clone(),
            h: self.h.clone(),
            f: self.outer.as_ref().map(|o| OuterConfig {
                coeffs: o.poly.coeffs().to_vec(),
                split: o.split,
            }),
        }
    }
}

/// Whether `p > 0` on the open interval `(lo, hi)`: no root inside (exact
/// isolation) and positive on a uniform sample grid. Returns the smallest
/// sampled value alongside.
fn positive_on(p: &PolyBranch, lo: f64, hi: f64) -> (bool, f64) {
    let no_roots = p.roots_in(lo, hi).is_empty();
    let mut worst = f64::INFINITY;
    for i in 1..SLOPE_SAMPLES {
        let x = lo + (hi - lo) * i as f64 / SLOPE_SAMPLES as f64;
        worst = worst.min(p.eval(x));
    }
    (no_roots && worst > 0.0, worst)
}

impl PiecewiseField for SystemSpec {
    fn switch_points(&self) -> Vec<f64> {
        self.split_points()
    }

    fn region_field(&self, region: usize, s: State) -> [f64; 2] {
        let branch = match region {
            0 => &self.g,
            1 => &self.h,
            _ => self.right_branch(),
        };
        [branch.eval(s.x) - s.y, self.epsilon * (s.x - self.lambda)]
    }

    fn slow_nullcline(&self) -> Option<f64> {
        Some(self.lambda)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterConfig {
    pub coeffs: Vec<f64>,
    pub split: f64,
}

/// System config file contents: either a named preset or explicit
/// ascending-degree coefficient lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemConfig {
    Preset {
        preset: String,
        epsilon: f64,
        lambda: f64,
    },
    Explicit {
        epsilon: f64,
        lambda: f64,
        g: PolyBranch,
        h: PolyBranch,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        f: Option<OuterConfig>,
    },
}
