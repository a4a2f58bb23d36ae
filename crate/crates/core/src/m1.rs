//! Closed-form equilibria of the SG and EMA flows for scalar data (`m = 1`).
//!
//! With `a = A`, `c = C` in `Rⁿ`, `ρ = [xxᵀ]`, `τ = [yxᵀ]`, the non-trivial
//! equilibria are `c = a`, `B = ε a aᵀ / ‖a‖` with `‖a‖` a positive root of
//!
//! ```text
//! ρ‖a‖² − τε‖a‖ + λ = 0
//! ```
//!
//! i.e. spheres of radii `r ≤ R` around the origin, plus the origin itself.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::model::{DataMoments, ModelState};

/// Relative distance used to classify a limit, in units of the outer radius.
pub const CLASSIFY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarMoments {
    pub rho: f64,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub lambda: f64,
}

impl ScalarMoments {
    pub fn new(rho: f64, tau: f64, lambda: f64) -> Self {
        Self {
            rho,
            tau,
            delta: None,
            lambda,
        }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self {
            delta: Some(delta),
            ..self
        }
    }

    pub fn discriminant(&self) -> f64 {
        self.tau * self.tau - 4.0 * self.rho * self.lambda
    }

    /// `DataMoments` for these scalars. Without `δ`, the smallest `[yyᵀ]`
    /// that keeps the triple realizable and is at least `ρ` is used.
    pub fn to_moments(&self) -> Result<DataMoments> {
        let delta = self.delta.unwrap_or_else(|| default_delta(self.rho, self.tau));
        DataMoments::scalar(self.rho, self.tau, delta)
    }
}

/// `max(ρ, τ²/ρ)`; for `ρ = 0`, `τ²` (any value works only when `τ = 0`).
pub fn default_delta(rho: f64, tau: f64) -> f64 {
    if rho > 0.0 {
        rho.max(tau * tau / rho)
    } else {
        tau * tau
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub discriminant: f64,
    /// Positive radii in increasing order.
    pub radii: Vec<f64>,
    /// Sign `ε` of the predictor `B = ε a aᵀ/‖a‖`.
    pub epsilon: f64,
    pub includes_origin: bool,
    /// Length scale for classification when there is no outer radius.
    #[serde(skip, default = "one")]
    zero_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl EquilibriumSet {
    pub fn inner(&self) -> Option<f64> {
        (self.radii.len() == 2).then(|| self.radii[0])
    }

    pub fn outer(&self) -> Option<f64> {
        (self.radii.len() == 2).then(|| self.radii[1])
    }

    pub fn contains_radius(&self, radius: f64) -> bool {
        radius == 0.0 || self.radii.iter().any(|&r| (r - radius).abs() <= 1e-12 * r.max(1.0))
    }
}

/// Solves `ρ s² − |τ| s + λ = 0` for the positive radii `s`.
pub fn solve_equilibria(sm: &ScalarMoments) -> Result<EquilibriumSet> {
    let ScalarMoments { rho, tau, lambda, .. } = *sm;
    if !rho.is_finite() || !tau.is_finite() || !lambda.is_finite() || rho < 0.0 || lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need rho >= 0 and lambda >= 0 (rho = {rho}, lambda = {lambda})"
        )));
    }
    let disc = sm.discriminant();
    let abs_tau = tau.abs();
    let epsilon = if tau < 0.0 { -1.0 } else { 1.0 };

    let mut radii = Vec::new();
    if tau != 0.0 && disc >= 0.0 {
        if rho > 0.0 {
            if disc == 0.0 {
                radii.push(abs_tau / (2.0 * rho));
            } else {
                let sq = disc.sqrt();
                // Small root via the product of roots to avoid cancellation.
                let big = (abs_tau + sq) / (2.0 * rho);
                let small = lambda / (rho * big);
                if small > 0.0 {
                    radii.push(small);
                }
                radii.push(big);
            }
        } else if lambda > 0.0 {
            radii.push(lambda / abs_tau);
        }
    }
    for &s in &radii {
        let resid = rho * s * s - abs_tau * s + lambda;
        debug_assert!(
            resid.abs() <= 1e-12 * (rho * s * s).max(abs_tau * s).max(lambda).max(1.0),
            "circle equation residual {resid:e}"
        );
    }
    let zero_scale = match radii.len() {
        2 => radii[1],
        _ if rho > 0.0 => (abs_tau / (2.0 * rho)).max(1.0),
        _ => 1.0,
    };
    Ok(EquilibriumSet {
        discriminant: disc,
        radii,
        epsilon,
        includes_origin: true,
        zero_scale,
    })
}

/// The equilibrium `a = radius·u`, `B = ε·radius·u uᵀ`, `c = a` for a unit
/// direction `u`. `radius = 0` gives the origin.
pub fn materialize_equilibrium(set: &EquilibriumSet, radius: f64, direction: &[f64]) -> Result<ModelState> {
    if !set.contains_radius(radius) {
        return Err(Error::RadiusNotInSet(radius));
    }
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if direction.is_empty() || (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "direction must be a unit vector (norm {norm})"
        )));
    }
    let a = Mat::column(direction).scale(radius);
    let b = Mat::outer(direction, direction).scale(set.epsilon * radius);
    Ok(ModelState { c: a.clone(), a, b })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LimitClass {
    Zero,
    InnerCircle,
    OuterCircle,
    NotConverged,
}

impl fmt::Display for LimitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Zero => "zero",
            Self::InnerCircle => "inner",
            Self::OuterCircle => "outer",
            Self::NotConverged => "not_converged",
        })
    }
}

/// Classifies a final state by `‖a‖` against the origin and the two radii,
/// at tolerance `1e-5·R`. Zero wins ties, then the inner circle.
pub fn classify_limit(final_state: &ModelState, set: &EquilibriumSet) -> LimitClass {
    let norm = final_state.a.norm();
    if !norm.is_finite() {
        return LimitClass::NotConverged;
    }
    let tol = CLASSIFY_TOL * set.zero_scale;
    if norm <= tol {
        return LimitClass::Zero;
    }
    match (set.inner(), set.outer()) {
        (Some(r), Some(big_r)) => {
            if (norm - r).abs() <= tol {
                LimitClass::InnerCircle
            } else if (norm - big_r).abs() <= tol {
                LimitClass::OuterCircle
            } else {
                LimitClass::NotConverged
            }
        }
        _ => LimitClass::NotConverged,
    }
}

/// Whether a non-trivial equilibrium can also be a critical point of `Ē`:
/// `ρδ² = τ²(δ − λ)`, impossible when `λ > δ`.
pub fn critical_coincidence(sm: &ScalarMoments) -> Result<bool> {
    let delta = sm.delta.ok_or(Error::MissingDelta)?;
    if sm.lambda > delta {
        return Ok(false);
    }
    let lhs = sm.rho * delta * delta;
    let rhs = sm.tau * sm.tau * (delta - sm.lambda);
    let scale = 1f64.max(lhs.abs()).max(rhs.abs());
    Ok((lhs - rhs).abs() <= 1e-9 * scale)
}
