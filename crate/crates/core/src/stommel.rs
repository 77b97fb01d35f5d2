//! The nondimensional Stommel box model
//!
//! ```text
//! y'  = mu - y - K |1 - y| y
//! mu' = eps (lambda - y)
//! ```
//!
//! and its reduction to the corner form through `X = 1 - y`, `Y = mu - 1`.
//! The flip of the fast axis puts `y < 1` (poleward transport) on `X > 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bifurcation::{Criticality, DEGENERATE_TOL};
use crate::integrator::{integrate, IntegrateError, IntegrateOptions, PiecewiseField, Trajectory};
use crate::poly::PolyBranch;
use crate::system::{State, SystemSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StommelError {
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StommelParams {
    #[serde(rename = "K")]
    pub k: f64,
    pub epsilon: f64,
    pub lambda: f64,
}

impl StommelParams {
    pub fn new(k: f64, epsilon: f64, lambda: f64) -> Result<Self, StommelError> {
        if !(k > 1.0) || !k.is_finite() {
            return Err(StommelError::InvalidParameter { name: "K", value: k });
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(StommelError::InvalidParameter {
                name: "epsilon",
                value: epsilon,
            });
        }
        if !lambda.is_finite() {
            return Err(StommelError::InvalidParameter {
                name: "lambda",
                value: lambda,
            });
        }
        Ok(Self { k, epsilon, lambda })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StommelState {
    pub y: f64,
    pub mu: f64,
}

impl StommelState {
    pub fn new(y: f64, mu: f64) -> Self {
        Self { y, mu }
    }
}

impl From<State> for StommelState {
    fn from(s: State) -> Self {
        Self { y: s.x, mu: s.y }
    }
}

impl From<StommelState> for State {
    fn from(s: StommelState) -> Self {
        State::new(s.y, s.mu)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Circulation {
    /// `y < 1`.
    Poleward,
    Equatorward,
}

pub fn circulation(y: f64) -> Circulation {
    if y < 1.0 {
        Circulation::Poleward
    } else {
        Circulation::Equatorward
    }
}

fn field_on(p: &StommelParams, s: StommelState, poleward: bool) -> (f64, f64) {
    let a = if poleward { 1.0 - s.y } else { s.y - 1.0 };
    (s.mu - s.y - p.k * a * s.y, p.epsilon * (p.lambda - s.y))
}

pub fn stommel_field(p: &StommelParams, s: StommelState) -> (f64, f64) {
    field_on(p, s, s.y < 1.0)
}

/// `X = 1 - y`, `Y = mu - 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinateMap;

impl CoordinateMap {
    pub fn to_general(&self, s: StommelState) -> State {
        State::new(1.0 - s.y, s.mu - 1.0)
    }

    pub fn to_stommel(&self, p: State) -> StommelState {
        StommelState::new(1.0 - p.x, p.y + 1.0)
    }

    /// Pushes a Stommel tangent vector forward to the general coordinates.
    pub fn push_vector(&self, v: (f64, f64)) -> (f64, f64) {
        (-v.0, v.1)
    }
}

/// The corner-form system conjugate to the Stommel model, with
/// `h = (K - 1) X - K X^2`, `g = -(1 + K) X + K X^2` and `Lambda = 1 - lambda`.
pub fn to_general_form(p: &StommelParams) -> (SystemSpec, CoordinateMap) {
    let k = p.k;
    let g = PolyBranch::from_slice(&[0.0, -(1.0 + k), k]);
    let h = PolyBranch::from_slice(&[0.0, k - 1.0, -k]);
    (SystemSpec::new(p.epsilon, 1.0 - p.lambda, g, h), CoordinateMap)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Canard,
    SuperExplosion,
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub criticality: Criticality,
    pub k_minus_one: f64,
    pub two_sqrt_eps: f64,
}

/// Canard cycles at the corner when `K - 1 < 2 sqrt(eps)`, a super-explosion
/// when `K - 1 > 2 sqrt(eps)`. Always supercritical: `|g'(0)| = K + 1`
/// exceeds both `h'(0) = K - 1` and, in the super-explosion case, `2 sqrt(eps)`.
pub fn classify_regime(p: &StommelParams) -> RegimeReport {
    let km1 = p.k - 1.0;
    let two = 2.0 * p.epsilon.sqrt();
    let regime = if (km1 - two).abs() <= DEGENERATE_TOL {
        Regime::Degenerate
    } else if km1 < two {
        Regime::Canard
    } else {
        Regime::SuperExplosion
    };
    RegimeReport {
        regime,
        criticality: if regime == Regime::Degenerate {
            Criticality::Degenerate
        } else {
            Criticality::Supercritical
        },
        k_minus_one: km1,
        two_sqrt_eps: two,
    }
}

/// The Stommel field in the integrator's `(x, y) = (y, mu)` slots. Region 0 is
/// `y < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StommelSystem(pub StommelParams);

impl PiecewiseField for StommelSystem {
    fn switch_points(&self) -> Vec<f64> {
        vec![1.0]
    }

    fn region_field(&self, region: usize, s: State) -> [f64; 2] {
        let (a, b) = field_on(&self.0, s.into(), region == 0);
        [a, b]
    }

    fn slow_nullcline(&self) -> Option<f64> {
        Some(self.0.lambda)
    }
}

/// Simulates the Stommel model and the conjugate corner system from the
/// mapped initial state. The first trajectory is in `(y, mu)`.
pub fn simulate(
    p: &StommelParams,
    init: StommelState,
    t_max: f64,
    opts: &IntegrateOptions,
) -> Result<(Trajectory, Trajectory), IntegrateError> {
    let original = integrate(&StommelSystem(*p), init.into(), t_max, opts)?;
    let (spec, map) = to_general_form(p);
    let general = integrate(&spec, map.to_general(init), t_max, opts)?;
    Ok((original, general))
}
