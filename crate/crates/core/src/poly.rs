//! Real polynomials in ascending-degree coefficient form.
//!
//! Real roots are isolated by the derivative cascade: between two
//! consecutive real roots of `p'` the polynomial is monotone, so each such
//! interval (closed off by the Cauchy bound) holds at most one simple root,
//! which bisection then pins down to the last representable bit. Multiple
//! roots surface as critical points where `p` vanishes up to Horner
//! round-off.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("polynomial needs at least one coefficient")]
    Empty,
    #[error("coefficient {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
}

#[derive(Deserialize)]
struct RawPoly {
    coeffs: Vec<f64>,
}

impl TryFrom<RawPoly> for PolyBranch {
    type Error = PolyError;

    fn try_from(raw: RawPoly) -> Result<Self, Self::Error> {
        PolyBranch::new(raw.coeffs)
    }
}

/// A polynomial branch of the piecewise nonlinearity, `c[0] + c[1] x + ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoly")]
pub struct PolyBranch {
    coeffs: Vec<f64>,
}

impl PolyBranch {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, PolyError> {
        if coeffs.is_empty() {
            return Err(PolyError::Empty);
        }
        if let Some((index, &value)) = coeffs.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(PolyError::NonFinite { index, value });
        }
        Ok(Self { coeffs })
    }

    /// Builds from a coefficient slice that is known to be finite and nonempty.
    pub fn from_slice(coeffs: &[f64]) -> Self {
        Self::new(coeffs.to_vec()).expect("coefficients must be finite and nonempty")
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree after discarding trailing zero coefficients (0 for constants).
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[self.degree()]
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Upper bound on the rounding error of a Horner evaluation at `x`.
    fn eval_error_bound(&self, x: f64) -> f64 {
        let ax = x.abs();
        let mag = self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * ax + c.abs());
        4.0 * (self.coeffs.len() as f64) * f64::EPSILON * mag
    }

    pub fn derivative(&self) -> PolyBranch {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        let coeffs = self.coeffs[1..]
            .iter()
            .enumerate()
            .map(|(i, &c)| c * (i + 1) as f64)
            .collect();
        Self { coeffs }
    }

    pub fn eval_derivative(&self, x: f64) -> f64 {
        let n = self.coeffs.len();
        let mut acc = 0.0;
        for i in (1..n).rev() {
            acc = acc * x + self.coeffs[i] * i as f64;
        }
        acc
    }

    pub fn eval_second_derivative(&self, x: f64) -> f64 {
        self.derivative().eval_derivative(x)
    }

    pub fn add(&self, other: &PolyBranch) -> PolyBranch {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|i| self.coeffs.get(i).copied().unwrap_or(0.0) + other.coeffs.get(i).copied().unwrap_or(0.0))
            .collect();
        Self { coeffs }
    }

    pub fn sub(&self, other: &PolyBranch) -> PolyBranch {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, k: f64) -> PolyBranch {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    pub fn mul(&self, other: &PolyBranch) -> PolyBranch {
        let mut coeffs = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Self { coeffs }
    }

    /// Cauchy bound: every real root lies strictly inside `(-B, B)`.
    pub fn cauchy_bound(&self) -> f64 {
        let d = self.degree();
        if d == 0 {
            return 1.0;
        }
        let lead = self.coeffs[d].abs();
        1.0 + self.coeffs[..d]
            .iter()
            .map(|c| c.abs() / lead)
            .fold(0.0, f64::max)
    }

    /// All distinct real roots, ascending. The zero polynomial reports none.
    pub fn real_roots(&self) -> Vec<f64> {
        let d = self.degree();
        match d {
            0 => Vec::new(),
            1 => vec![-self.coeffs[0] / self.coeffs[1]],
            _ => {
                let bound = self.cauchy_bound();
                let crit = self.derivative().real_roots();
                let mut knots = Vec::with_capacity(crit.len() + 2);
                knots.push(-bound);
                knots.extend(crit.iter().copied().filter(|c| c.abs() < bound));
                knots.push(bound);

                let mut roots: Vec<f64> = Vec::new();
                for &c in &crit {
                    if self.eval(c).abs() <= self.eval_error_bound(c) {
                        roots.push(c);
                    }
                }
                for w in knots.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let (fa, fb) = (self.eval(a), self.eval(b));
                    if fa == 0.0 || fb == 0.0 {
                        continue;
                    }
                    if fa.signum() != fb.signum() {
                        roots.push(bisect_monotone(|x| self.eval(x), a, b, fa));
                    }
                }
                for &c in &[-bound, bound] {
                    if self.eval(c) == 0.0 {
                        roots.push(c);
                    }
                }
                roots.sort_by(|a, b| a.total_cmp(b));
                roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * (1.0 + b.abs()));
                roots
            }
        }
    }

    /// Real roots in the open interval `(lo, hi)`; infinite endpoints are allowed.
    pub fn roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.real_roots()
            .into_iter()
            .filter(|&r| r > lo && r < hi)
            .collect()
    }

    /// Exact extrema on a closed finite interval from endpoints and critical points.
    pub fn extremes_on(&self, lo: f64, hi: f64) -> Extremes {
        assert!(lo <= hi && lo.is_finite() && hi.is_finite());
        let mut candidates = vec![lo, hi];
        candidates.extend(self.derivative().roots_in(lo, hi));
        let mut ext = Extremes {
            min: f64::INFINITY,
            argmin: lo,
            max: f64::NEG_INFINITY,
            argmax: lo,
        };
        for x in candidates {
            let v = self.eval(x);
            if v < ext.min {
                ext.min = v;
                ext.argmin = x;
            }
            if v > ext.max {
                ext.max = v;
                ext.argmax = x;
            }
        }
        ext
    }

    /// Supremum of the polynomial over the half-line `(-inf, hi)`, or `+inf`
    /// when it is unbounded above there.
    pub fn sup_left_of(&self, hi: f64) -> f64 {
        let d = self.degree();
        if d == 0 {
            return self.coeffs[0];
        }
        // sign of p(x) as x -> -inf is sign(lead) * (-1)^d
        let lead = self.leading();
        let at_minus_inf = if d % 2 == 0 { lead } else { -lead };
        if at_minus_inf > 0.0 {
            return f64::INFINITY;
        }
        let mut sup = self.eval(hi);
        for c in self.derivative().roots_in(f64::NEG_INFINITY, hi) {
            sup = sup.max(self.eval(c));
        }
        sup
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremes {
    pub min: f64,
    pub argmin: f64,
    pub max: f64,
    pub argmax: f64,
}

/// Bisection on a bracket with a sign change, run until the midpoint
/// coincides with an endpoint in floating point.
pub(crate) fn bisect_monotone(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, fa: f64) -> f64 {
    let sa = fa.signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
