//! Equilibrium linearization, corner and fold bifurcation classification, and
//! the divergence bound ruling out periodic orbits far left of the corner.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::system::{Side, State, SystemError, SystemSpec};

/// Width of the equality bands reported as degenerate.
pub const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BifurcationError {
    #[error("both slopes must give foci: |g'| = {g_slope_abs}, h' = {h_slope}, 2 sqrt(eps) = {two_sqrt_eps}")]
    NotFocusFocus {
        g_slope_abs: f64,
        h_slope: f64,
        two_sqrt_eps: f64,
    },
    #[error("divergence bound needs g' < 0 on x <= 0: {reason}")]
    HypothesisNotSatisfied { reason: String },
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    /// Zero trace: a linear centre.
    Neutral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearType {
    Node,
    Focus,
    DegenerateNode,
}

/// Linearization `[[F', -1], [eps, 0]]` at the equilibrium for one branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPart {
    /// Branch used; `None` away from the splitting line.
    pub side: Option<Side>,
    pub f_slope: f64,
    pub mu_plus: Complex64,
    pub mu_minus: Complex64,
    pub stability: Stability,
    pub linear_type: LinearType,
    /// Slope `eps / mu_2` of the eigenvector of the eigenvalue of larger
    /// modulus, for real eigenvalues.
    pub strong_eigvec_slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub location: State,
    /// One entry, or left and right entries when the equilibrium sits on the
    /// splitting line.
    pub linear: Vec<LinearPart>,
}

impl EquilibriumReport {
    /// The governing linearization (the right one on the splitting line).
    pub fn primary(&self) -> &LinearPart {
        self.linear.last().expect("at least one linearization")
    }
}

/// Roots of `mu^2 - a mu + eps`, ordered `(mu_+, mu_-)` by real part (or by
/// sign of imaginary part for complex pairs). The smaller-modulus real root is
/// taken from the product `mu_+ mu_- = eps` to avoid cancellation.
pub fn eigenvalues(a: f64, eps: f64) -> (Complex64, Complex64) {
    let disc = a * a - 4.0 * eps;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        if a >= 0.0 {
            let big = 0.5 * (a + sq);
            let small = if big != 0.0 { eps / big } else { 0.0 };
            (Complex64::new(big, 0.0), Complex64::new(small, 0.0))
        } else {
            let big = 0.5 * (a - sq);
            let small = if big != 0.0 { eps / big } else { 0.0 };
            (Complex64::new(small, 0.0), Complex64::new(big, 0.0))
        }
    } else {
        let w = 0.5 * (-disc).sqrt();
        (Complex64::new(0.5 * a, w), Complex64::new(0.5 * a, -w))
    }
}

pub fn linear_part(a: f64, eps: f64, side: Option<Side>) -> LinearPart {
    let (mu_plus, mu_minus) = eigenvalues(a, eps);
    let disc = a * a - 4.0 * eps;
    let linear_type = if disc.abs() <= DEGENERATE_TOL {
        LinearType::DegenerateNode
    } else if disc > 0.0 {
        LinearType::Node
    } else {
        LinearType::Focus
    };
    let stability = if a > 0.0 {
        Stability::Unstable
    } else if a < 0.0 {
        Stability::Stable
    } else {
        Stability::Neutral
    };
    let strong_eigvec_slope = if linear_type == LinearType::Focus {
        None
    } else {
        let mu2 = if mu_plus.re.abs() >= mu_minus.re.abs() {
            mu_plus.re
        } else {
            mu_minus.re
        };
        Some(eps / mu2)
    };
    LinearPart {
        side,
        f_slope: a,
        mu_plus,
        mu_minus,
        stability,
        linear_type,
        strong_eigvec_slope,
    }
}

pub fn equilibrium(spec: &SystemSpec) -> EquilibriumReport {
    let lam = spec.lambda();
    let eps = spec.epsilon();
    let mut linear = Vec::new();
    let on_split = spec.split_points().into_iter().any(|c| c == lam);
    if on_split {
        for side in [Side::Left, Side::Right] {
            linear.push(linear_part(spec.branch_derivative(lam, side), eps, Some(side)));
        }
    } else {
        linear.push(linear_part(spec.branch_derivative(lam, Side::Right), eps, None));
    }
    EquilibriumReport {
        location: spec.equilibrium_state(),
        linear,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CornerKind {
    HopfLike,
    SuperExplosion,
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Supercritical,
    Subcritical,
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerThresholds {
    pub two_sqrt_eps: f64,
    pub h_slope: f64,
    pub g_slope: f64,
    /// Present when both one-sided linearizations are foci.
    #[serde(rename = "Lambda")]
    pub lambda_quantity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerBifurcationReport {
    pub kind: CornerKind,
    pub criticality: Criticality,
    pub thresholds: CornerThresholds,
    pub criticality_convention: String,
}

pub const CRITICALITY_CONVENTION: &str = "Hopf-like: subcritical iff |g'(0)| < h'(0), i.e. Lambda > 0; \
an alternative reading of the focus-focus criterion with the opposite sign of Lambda exists and is not used. \
Super-explosion: subcritical iff |g'(0)| < 2 sqrt(eps).";

/// Classifies the bifurcation as the equilibrium crosses the corner at
/// `lambda = 0`; only the slopes at the corner and `eps` matter.
pub fn corner_classify(spec: &SystemSpec) -> CornerBifurcationReport {
    classify_slopes(spec.g().eval_derivative(0.0), spec.h().eval_derivative(0.0), spec.epsilon())
}

pub fn classify_slopes(g_slope: f64, h_slope: f64, eps: f64) -> CornerBifurcationReport {
    let two = 2.0 * eps.sqrt();
    let gabs = g_slope.abs();
    let lambda_quantity = lambda_quantity(g_slope, h_slope, eps).ok();
    let (kind, criticality) = if (h_slope - two).abs() <= DEGENERATE_TOL {
        (CornerKind::Degenerate, Criticality::Degenerate)
    } else if h_slope < two {
        let c = if (gabs - h_slope).abs() <= DEGENERATE_TOL {
            Criticality::Degenerate
        } else if gabs > h_slope {
            Criticality::Supercritical
        } else {
            Criticality::Subcritical
        };
        (CornerKind::HopfLike, c)
    } else {
        let c = if gabs >= two {
            Criticality::Supercritical
        } else {
            Criticality::Subcritical
        };
        (CornerKind::SuperExplosion, c)
    };
    CornerBifurcationReport {
        kind,
        criticality,
        thresholds: CornerThresholds {
            two_sqrt_eps: two,
            h_slope,
            g_slope,
            lambda_quantity,
        },
        criticality_convention: CRITICALITY_CONVENTION.to_string(),
    }
}

/// `Lambda = h'/sqrt(4 eps - h'^2) - |g'|/sqrt(4 eps - g'^2)`: growth per
/// unit angle on the right minus decay per unit angle on the left.
pub fn lambda_quantity(g_slope: f64, h_slope: f64, eps: f64) -> Result<f64, BifurcationError> {
    let two = 2.0 * eps.sqrt();
    let gabs = g_slope.abs();
    if !(gabs < two && h_slope > 0.0 && h_slope < two) {
        return Err(BifurcationError::NotFocusFocus {
            g_slope_abs: gabs,
            h_slope,
            two_sqrt_eps: two,
        });
    }
    let four = 4.0 * eps;
    Ok(h_slope / (four - h_slope * h_slope).sqrt() - gabs / (four - gabs * gabs).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldHopfReport {
    pub lambda_h: f64,
    pub criticality: Criticality,
    /// `h'''(x_M)`; the first Lyapunov coefficient is `h'''(x_M) / 16`.
    pub h_third: f64,
    pub lyapunov_coefficient: f64,
    /// Linearization at `lambda = lambda_h`.
    pub mu_plus: Complex64,
    pub mu_minus: Complex64,
}

/// Hopf bifurcation at the smooth fold. Shifting to the fold and writing
/// `h = y_M + a2 u^2 + a3 u^3 + ...` gives a first Lyapunov coefficient of
/// `3 a3 / 8 = h'''(x_M) / 16` (the quadratic terms cancel for this Liénard
/// form), so the Hopf point is supercritical iff `h'''(x_M) < 0`.
pub fn fold_hopf(spec: &SystemSpec) -> Result<FoldHopfReport, BifurcationError> {
    if spec.outer().is_some() {
        return Err(SystemError::NoFold.into());
    }
    let x_m = spec.fold_location()?;
    let d3 = spec.h().derivative().derivative().derivative().eval(x_m);
    let criticality = if d3.abs() <= DEGENERATE_TOL {
        Criticality::Degenerate
    } else if d3 < 0.0 {
        Criticality::Supercritical
    } else {
        Criticality::Subcritical
    };
    let (mu_plus, mu_minus) = eigenvalues(spec.h().eval_derivative(x_m), spec.epsilon());
    Ok(FoldHopfReport {
        lambda_h: x_m,
        criticality,
        h_third: d3,
        lyapunov_coefficient: d3 / 16.0,
        mu_plus,
        mu_minus,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonexistenceThreshold {
    #[serde(rename = "K")]
    pub k_threshold: f64,
    /// Largest slope of `h` on `[0, x_M]`.
    pub k: f64,
    /// Supremum of `g'` on `x < 0`.
    pub m: f64,
    pub x_m: f64,
    pub hypothesis_ok: bool,
}

impl NonexistenceThreshold {
    /// Whether `lambda` lies in the certified orbit-free range `lambda < -K`.
    pub fn excludes(&self, lambda: f64) -> bool {
        self.hypothesis_ok && lambda < -self.k_threshold
    }
}

/// Divergence bound: with `k = max h'` on `[0, x_M]` and `g' <= m < 0` on
/// `x < 0`, there are no periodic orbits for `lambda < -2 k x_M / |m|`.
pub fn nonexistence_threshold(spec: &SystemSpec) -> Result<NonexistenceThreshold, BifurcationError> {
    let x_m = spec.fold_location()?;
    let dh = spec.h().derivative();
    let k = dh.extremes_on(0.0, x_m).max;
    let dg = spec.g().derivative();
    let roots = dg.roots_in(f64::NEG_INFINITY, 0.0);
    if let Some(r) = roots.first() {
        return Err(BifurcationError::HypothesisNotSatisfied {
            reason: format!("g' vanishes at x = {r}"),
        });
    }
    let m = dg.sup_left_of(0.0);
    if !(m < 0.0) {
        return Err(BifurcationError::HypothesisNotSatisfied {
            reason: format!("sup g' on x < 0 is {m}"),
        });
    }
    Ok(NonexistenceThreshold {
        k_threshold: 2.0 * k * x_m / m.abs(),
        k,
        m,
        x_m,
        hypothesis_ok: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::PolyBranch;
    use crate::system::Preset;

    fn fig4(lambda: f64) -> SystemSpec {
        SystemSpec::preset(Preset::Fig4, 0.2, lambda)
    }

    fn fig6(lambda: f64) -> SystemSpec {
        SystemSpec::preset(Preset::Fig6, 0.2, lambda)
    }

    #[test]
    fn equilibrium_examples() {
        let r = equilibrium(&fig6(0.1));
        let lp = r.primary();
        assert!((lp.f_slope - 1.87).abs() < 1e-14);
        assert_eq!(lp.linear_type, LinearType::Node);
        assert_eq!(lp.stability, Stability::Unstable);
        assert!((lp.mu_plus.re - 1.7557).abs() < 1e-3);
        assert!((lp.mu_minus.re - 0.1139).abs() < 1e-3);

        let r = equilibrium(&fig4(1.0));
        assert!((r.primary().f_slope - 1.92).abs() < 1e-13);
        assert!((r.primary().mu_plus.re - 1.8095).abs() < 1e-4);
        assert!((r.primary().mu_minus.re - 0.1105).abs() < 1e-4);

        let d = linear_part(1.0, 0.25, None);
        assert_eq!(d.linear_type, LinearType::DegenerateNode);
        assert_eq!(d.mu_plus, Complex64::new(0.5, 0.0));
        assert_eq!(d.mu_minus, Complex64::new(0.5, 0.0));
    }

    #[test]
    fn corner_equilibrium_reports_both_sides() {
        let r = equilibrium(&fig4(0.0));
        assert_eq!(r.linear.len(), 2);
        assert_eq!(r.linear[0].side, Some(Side::Left));
        assert_eq!(r.linear[0].f_slope, -2.0);
        assert_eq!(r.linear[1].linear_type, LinearType::Focus);
    }

    #[test]
    fn vieta_identities() {
        for &(a, eps) in &[(1.3, 0.2), (-0.7, 0.05), (0.1, 0.3), (-3.0, 1e-4), (0.0, 0.2)] {
            let (p, m) = eigenvalues(a, eps);
            assert!(((p * m).re - eps).abs() < 1e-12 && (p * m).im.abs() < 1e-12);
            assert!(((p + m).re - a).abs() < 1e-12);
        }
    }

    #[test]
    fn corner_examples() {
        let r = corner_classify(&fig4(0.0));
        assert_eq!(r.kind, CornerKind::HopfLike);
        assert_eq!(r.criticality, Criticality::Supercritical);
        assert!(r.thresholds.lambda_quantity.is_none());
        let r = corner_classify(&fig6(0.0));
        assert_eq!(r.kind, CornerKind::SuperExplosion);
        assert_eq!(r.criticality, Criticality::Supercritical);
        let r = classify_slopes(-0.3, 0.5, 0.2);
        assert_eq!((r.kind, r.criticality), (CornerKind::HopfLike, Criticality::Subcritical));
        assert!(r.thresholds.lambda_quantity.unwrap() > 0.0);
        let r = classify_slopes(-0.5, 2.0, 0.2);
        assert_eq!((r.kind, r.criticality), (CornerKind::SuperExplosion, Criticality::Subcritical));
        assert_eq!(classify_slopes(-1.0, 1.0, 0.25).kind, CornerKind::Degenerate);
        assert_eq!(classify_slopes(-0.4, 0.4, 0.2).criticality, Criticality::Degenerate);
    }

    #[test]
    fn lambda_quantity_examples() {
        let l = lambda_quantity(-0.3, 0.5, 0.2).unwrap();
        let oracle = 0.5 / 0.55f64.sqrt() - 0.3 / 0.71f64.sqrt();
        assert!((l - oracle).abs() < 1e-15);
        assert!((l - 0.31816).abs() < 1e-5);
        assert!((lambda_quantity(-0.5, 0.3, 0.2).unwrap() + l).abs() < 1e-15);
        assert_eq!(lambda_quantity(-0.7, 0.7, 0.2).unwrap(), 0.0);
        assert!(matches!(
            lambda_quantity(-2.0, 0.32, 0.2),
            Err(BifurcationError::NotFocusFocus { .. })
        ));
    }

    #[test]
    fn fold_hopf_examples() {
        let r = fold_hopf(&fig4(0.0)).unwrap();
        assert!((r.lambda_h - 1.6).abs() < 1e-12);
        assert_eq!(r.criticality, Criticality::Supercritical);
        assert_eq!(r.h_third, -6.0);
        assert!(r.mu_plus.re.abs() < 1e-10);
        assert!((r.mu_plus.im - 0.2f64.sqrt()).abs() < 1e-10);
        let r = fold_hopf(&fig6(0.0)).unwrap();
        assert!((r.lambda_h - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.criticality, Criticality::Supercritical);
    }

    #[test]
    fn nonexistence_examples() {
        let t = nonexistence_threshold(&fig6(0.0)).unwrap();
        assert_eq!((t.k, t.m), (2.0, -2.0));
        assert!((t.k_threshold - 4.0 / 3.0).abs() < 1e-15);
        let t = nonexistence_threshold(&fig4(0.0)).unwrap();
        assert!((t.k - 25.0 / 12.0).abs() < 1e-13);
        assert!((t.k_threshold - 10.0 / 3.0).abs() < 1e-12);
        let bad = fig6(0.0).with_left_branch(PolyBranch::from_slice(&[0.0, -1.0, 0.0, 1.0]));
        assert!(matches!(
            nonexistence_threshold(&bad),
            Err(BifurcationError::HypothesisNotSatisfied { .. })
        ));
    }

    #[test]
    fn report_json_carries_thresholds() {
        let js = serde_json::to_value(corner_classify(&fig6(0.0))).unwrap();
        assert_eq!(js["kind"], "SuperExplosion");
        assert_eq!(js["criticality"], "supercritical");
        assert_eq!(js["thresholds"]["h_slope"], 2.0);
        assert!(js["thresholds"]["Lambda"].is_null());
    }
}
