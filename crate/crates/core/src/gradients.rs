//! Closed-form gradient fields and objectives for linear encoders and
//! predictors.
//!
//! With `F̄(A, B, C) = ½ E‖BAx − Cy‖² + (λ/2)(‖A‖²_F + ‖B‖²_F)` and the
//! residual `R = B A Sxx − C Syx`:
//!
//! * `P̄ = ∂F̄/∂A = Bᵀ R + λA`
//! * `Q̄ = ∂F̄/∂B = R Aᵀ + λB`
//!
//! `Ē(A, B) = F̄(A, B, A)`; its `A`-gradient picks up the extra terms coming
//! from the second branch.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::model::{DataMoments, ModelState};

/// Quadratic forms below this are reported as unrealizable moment triples.
pub const INCONSISTENT_MOMENTS_TOL: f64 = 1e-9;

/// Gradients with respect to the encoder (`d_a`, `n×m`) and predictor
/// (`d_b`, `n×n`).
#[derive(Debug, Clone, PartialEq)]
pub struct GradPair {
    pub d_a: Mat,
    pub d_b: Mat,
}

impl GradPair {
    pub fn norm(&self) -> f64 {
        (self.d_a.norm_sq() + self.d_b.norm_sq()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Objectives {
    pub e_bar: f64,
    pub f_bar: f64,
}

pub(crate) fn check_shapes(state: &ModelState, mom: &DataMoments) -> Result<()> {
    let dims = state.dims()?;
    if mom.m() != dims.m {
        return Err(Error::DimensionMismatch(format!(
            "state has m = {}, moments have m = {}",
            dims.m,
            mom.m()
        )));
    }
    Ok(())
}

fn residual_with_target(a: &Mat, b: &Mat, target: &Mat, mom: &DataMoments) -> Mat {
    let mut r = b.matmul(a).matmul(&mom.sxx);
    r -= &target.matmul(&mom.syx);
    r
}

/// `R(A, B, C) = B A Sxx − C Syx`.
pub fn residual(state: &ModelState, mom: &DataMoments) -> Result<Mat> {
    check_shapes(state, mom)?;
    Ok(residual_with_target(&state.a, &state.b, &state.c, mom))
}

/// `P̄ = Bᵀ R + λA`, the gradient of `F̄` in `A` at `(A, B, C)`.
pub fn grad_p(state: &ModelState, mom: &DataMoments, lambda: f64) -> Result<Mat> {
    let r = residual(state, mom)?;
    let mut p = state.b.tr_matmul(&r);
    p.axpy(lambda, &state.a);
    Ok(p)
}

/// `Q̄ = R Aᵀ + λB`, the gradient of `F̄` in `B` at `(A, B, C)`.
pub fn grad_q(state: &ModelState, mom: &DataMoments, lambda: f64) -> Result<Mat> {
    let r = residual(state, mom)?;
    let mut q = r.matmul_tr(&state.a);
    q.axpy(lambda, &state.b);
    Ok(q)
}

/// Both SG/EMA fields at once, sharing the residual.
pub fn grad_pq(state: &ModelState, mom: &DataMoments, lambda: f64) -> Result<GradPair> {
    let r = residual(state, mom)?;
    let mut d_a = state.b.tr_matmul(&r);
    d_a.axpy(lambda, &state.a);
    let mut d_b = r.matmul_tr(&state.a);
    d_b.axpy(lambda, &state.b);
    Ok(GradPair { d_a, d_b })
}

/// Gradient of `Ē(A, B)`; `C` is ignored.
///
/// `dA = Bᵀ(BA Sxx − A Syx) − (BA Syxᵀ − A Syy) + λA`,
/// `dB = (BA Sxx − A Syx) Aᵀ + λB`.
pub fn grad_e(state: &ModelState, mom: &DataMoments, lambda: f64) -> Result<GradPair> {
    check_shapes(state, mom)?;
    let (a, b) = (&state.a, &state.b);
    let ba = b.matmul(a);
    let r = residual_with_target(a, b, a, mom);
    // S(A, B) = B A Sxy − A Syy
    let mut s = ba.matmul(&mom.sxy());
    s -= &a.matmul(&mom.syy);

    let mut d_a = b.tr_matmul(&r);
    d_a -= &s;
    d_a.axpy(lambda, a);
    let mut d_b = r.matmul_tr(a);
    d_b.axpy(lambda, b);
    Ok(GradPair { d_a, d_b })
}

/// `½ E‖B A x − C y‖²` in moment form, without any consistency check.
fn prediction_error(a: &Mat, b: &Mat, c: &Mat, mom: &DataMoments) -> f64 {
    let ba = b.matmul(a);
    // ½ tr(BA Sxx (BA)ᵀ) − tr(C Syx (BA)ᵀ) + ½ tr(C Syy Cᵀ)
    let quad = ba.matmul(&mom.sxx).dot(&ba);
    let cross = c.matmul(&mom.syx).dot(&ba);
    let target = c.matmul(&mom.syy).dot(c);
    0.5 * quad - cross + 0.5 * target
}

fn regularizer(state: &ModelState, lambda: f64) -> f64 {
    0.5 * lambda * (state.a.norm_sq() + state.b.norm_sq())
}

/// `(Ē, F̄)` without checking that the moments are realizable. Used for
/// trajectory diagnostics, where a negative value is itself informative.
pub fn objectives_unchecked(state: &ModelState, mom: &DataMoments, lambda: f64) -> Objectives {
    let reg = regularizer(state, lambda);
    let f = prediction_error(&state.a, &state.b, &state.c, mom);
    let e = prediction_error(&state.a, &state.b, &state.a, mom);
    Objectives {
        e_bar: e + reg,
        f_bar: f + reg,
    }
}

/// `(Ē, F̄)` in moment form.
///
/// Fails with [`Error::InconsistentMoments`] when either prediction-error
/// term is below `-1e-9`, which no distribution of views can produce.
pub fn eval_objectives(state: &ModelState, mom: &DataMoments, lambda: f64) -> Result<Objectives> {
    check_shapes(state, mom)?;
    let f = prediction_error(&state.a, &state.b, &state.c, mom);
    let e = prediction_error(&state.a, &state.b, &state.a, mom);
    for v in [e, f] {
        if v < -INCONSISTENT_MOMENTS_TOL {
            return Err(Error::InconsistentMoments(v));
        }
    }
    let reg = regularizer(state, lambda);
    Ok(Objectives {
        e_bar: e + reg,
        f_bar: f + reg,
    })
}
