//! Discrete SG / EMA / gradient-descent steppers and fixed-step integration
//! of the corresponding continuous flows:
//!
//! ```text
//! Ȧ = −(Bᵀ R + λA)      R = B A Sxx − C Syx
//! Ḃ = −(R Aᵀ + λB)
//! Ċ = (1 − α)(A − C)     (EMA only)
//! ```
//!
//! SG substitutes `C = A`; the gradient flow of `Ē` ignores `C` altogether.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{balance_residual, integrability_defect};
use crate::error::{Error, Result};
use crate::gradients::{self, check_shapes, Objectives};
use crate::matrix::{gemm_nt_raw, gemm_raw, gemm_tn_raw};
use crate::model::{AlphaSchedule, DataMoments, Dims, HyperParams, ModelState, DIVERGENCE_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoKind {
    /// Stop gradient: `C ≡ A`.
    Sg,
    /// Exponential moving average target.
    Ema,
    /// Gradient flow / descent on `Ē`; `C` is never touched.
    GdFlow,
}

impl fmt::Display for AlgoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sg => "sg",
            Self::Ema => "ema",
            Self::GdFlow => "gdflow",
        })
    }
}

impl FromStr for AlgoKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sg" => Ok(Self::Sg),
            "ema" => Ok(Self::Ema),
            "gdflow" | "gd" => Ok(Self::GdFlow),
            other => Err(Error::Parse(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Rk4,
    Euler,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rk4 => "rk4",
            Self::Euler => "euler",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk4" => Ok(Self::Rk4),
            "euler" => Ok(Self::Euler),
            other => Err(Error::Parse(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Vector field of one of the three flows over the flat state
/// `[A | B | C]`, with preallocated scratch space.
#[derive(Debug, Clone)]
pub struct FlowField {
    algo: AlgoKind,
    dims: Dims,
    lambda: f64,
    sxx: Vec<f64>,
    syx: Vec<f64>,
    sxy: Vec<f64>,
    syy: Vec<f64>,
    ba: Vec<f64>,
    r: Vec<f64>,
    tmp: Vec<f64>,
}

impl FlowField {
    pub fn new(algo: AlgoKind, dims: Dims, mom: &DataMoments, lambda: f64) -> Result<Self> {
        if mom.m() != dims.m {
            return Err(Error::DimensionMismatch(format!(
                "state has m = {}, moments have m = {}",
                dims.m,
                mom.m()
            )));
        }
        let nm = dims.encoder_len();
        Ok(Self {
            algo,
            dims,
            lambda,
            sxx: mom.sxx.as_slice().to_vec(),
            syx: mom.syx.as_slice().to_vec(),
            sxy: mom.sxy().into_vec(),
            syy: mom.syy.as_slice().to_vec(),
            ba: vec![0.0; nm],
            r: vec![0.0; nm],
            tmp: vec![0.0; nm],
        })
    }

    pub fn algo(&self) -> AlgoKind {
        self.algo
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Writes the time derivative of `state` into `out`.
    ///
    /// For SG the `C` block of `out` repeats the `A` block, so a state with
    /// `C = A` keeps that property under any Runge–Kutta combination.
    pub fn eval(&mut self, state: &[f64], alpha: f64, out: &mut [f64]) {
        let Dims { n, m } = self.dims;
        let p = n * m;
        let q = n * n;
        debug_assert_eq!(state.len(), 2 * p + q);
        debug_assert_eq!(out.len(), 2 * p + q);
        let (a, rest) = state.split_at(p);
        let (b, c) = rest.split_at(q);
        let target = match self.algo {
            AlgoKind::Ema => c,
            AlgoKind::Sg | AlgoKind::GdFlow => a,
        };

        // R = (B A) Sxx − target Syx
        gemm_raw(b, n, n, a, m, &mut self.ba);
        gemm_raw(&self.ba, n, m, &self.sxx, m, &mut self.r);
        gemm_raw(target, n, m, &self.syx, m, &mut self.tmp);
        for (r, t) in self.r.iter_mut().zip(&self.tmp) {
            *r -= t;
        }

        let (da, rest) = out.split_at_mut(p);
        let (db, dc) = rest.split_at_mut(q);
        let lambda = self.lambda;

        gemm_tn_raw(b, n, n, &self.r, m, da);
        if self.algo == AlgoKind::GdFlow {
            // Second-branch term: −S with S = B A Sxy − A Syy.
            gemm_raw(&self.ba, n, m, &self.sxy, m, &mut self.tmp);
            for (d, t) in da.iter_mut().zip(&self.tmp) {
                *d -= t;
            }
            gemm_raw(a, n, m, &self.syy, m, &mut self.tmp);
            for (d, t) in da.iter_mut().zip(&self.tmp) {
                *d += t;
            }
        }
        for (d, x) in da.iter_mut().zip(a) {
            *d = -(*d + lambda * x);
        }

        gemm_nt_raw(&self.r, n, m, a, n, db);
        for (d, x) in db.iter_mut().zip(b) {
            *d = -(*d + lambda * x);
        }

        match self.algo {
            AlgoKind::Ema => {
                let k = 1.0 - alpha;
                for ((d, x), y) in dc.iter_mut().zip(a).zip(c) {
                    *d = k * (x - y);
                }
            }
            AlgoKind::Sg => dc.copy_from_slice(da),
            AlgoKind::GdFlow => dc.iter_mut().for_each(|d| *d = 0.0),
        }
    }

    /// Norm of the derivative over the coordinates the algorithm actually
    /// evolves: `(A, B)` for SG and gradient flow, `(A, B, C)` for EMA.
    pub fn active_norm(&self, derivative: &[f64]) -> f64 {
        let active = match self.algo {
            AlgoKind::Ema => derivative.len(),
            AlgoKind::Sg | AlgoKind::GdFlow => self.dims.encoder_len() + self.dims.predictor_len(),
        };
        derivative[..active].iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Time derivative of `state` as a [`ModelState`]-shaped value.
pub fn flow_rhs(
    algo: AlgoKind,
    state: &ModelState,
    mom: &DataMoments,
    lambda: f64,
    alpha: f64,
) -> Result<ModelState> {
    check_shapes(state, mom)?;
    let dims = state.dims()?;
    let mut field = FlowField::new(algo, dims, mom, lambda)?;
    let x = prepared(algo, state).to_vec();
    let mut out = vec![0.0; x.len()];
    field.eval(&x, alpha, &mut out);
    ModelState::from_slice(dims, &out)
}

/// Norm of the flow vector field at `state` over the evolved coordinates.
pub fn flow_rhs_norm(
    algo: AlgoKind,
    state: &ModelState,
    mom: &DataMoments,
    lambda: f64,
    alpha: f64,
) -> Result<f64> {
    check_shapes(state, mom)?;
    let dims = state.dims()?;
    let mut field = FlowField::new(algo, dims, mom, lambda)?;
    let x = prepared(algo, state).to_vec();
    let mut out = vec![0.0; x.len()];
    field.eval(&x, alpha, &mut out);
    Ok(field.active_norm(&out))
}

fn prepared(algo: AlgoKind, state: &ModelState) -> ModelState {
    match algo {
        AlgoKind::Sg => state.with_target_synced(),
        AlgoKind::Ema | AlgoKind::GdFlow => state.clone(),
    }
}

fn any_diverged(x: &[f64]) -> bool {
    x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD)
}

/// One iteration of the discrete procedure at step index `t` (1-based in the
/// usual presentation; `α` is read at progress `t / total_steps`).
///
/// * SG: `A ← A − μ P̄(A,B,A)`, `B ← B − ν Q̄(A,B,A)`, `C ← A`.
/// * EMA: `A`, `B` updated from the old state, then `C ← α C + (1 − α) A_new`.
/// * gradient descent: `(A, B) ← (A, B) − (μ, ν) ∇Ē`.
pub fn step_discrete(
    algo: AlgoKind,
    state: &ModelState,
    mom: &DataMoments,
    hyper: &HyperParams,
    t: usize,
    total_steps: usize,
) -> Result<ModelState> {
    check_shapes(state, mom)?;
    let HyperParams { lambda, mu, nu, .. } = *hyper;
    let next = match algo {
        AlgoKind::Sg => {
            let g = gradients::grad_pq(&state.with_target_synced(), mom, lambda)?;
            let mut a = state.a.clone();
            a.axpy(-mu, &g.d_a);
            let mut b = state.b.clone();
            b.axpy(-nu, &g.d_b);
            ModelState { c: a.clone(), a, b }
        }
        AlgoKind::Ema => {
            let g = gradients::grad_pq(state, mom, lambda)?;
            let mut a = state.a.clone();
            a.axpy(-mu, &g.d_a);
            let mut b = state.b.clone();
            b.axpy(-nu, &g.d_b);
            let alpha = hyper.alpha.at(progress(t as f64, total_steps as f64));
            let mut c = state.c.scale(alpha);
            c.axpy(1.0 - alpha, &a);
            ModelState { a, b, c }
        }
        AlgoKind::GdFlow => {
            let g = gradients::grad_e(state, mom, lambda)?;
            let mut a = state.a.clone();
            a.axpy(-mu, &g.d_a);
            let mut b = state.b.clone();
            b.axpy(-nu, &g.d_b);
            ModelState {
                a,
                b,
                c: state.c.clone(),
            }
        }
    };
    if next.is_diverged() {
        return Err(Error::Diverged(t as f64));
    }
    Ok(next)
}

fn progress(t: f64, total: f64) -> f64 {
    if total > 0.0 {
        t / total
    } else {
        0.0
    }
}

/// Fixed-step integrator over flat states, reusable across runs.
#[derive(Debug, Clone)]
pub struct Integrator {
    field: FlowField,
    scheme: Scheme,
    alpha: AlphaSchedule,
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

/// Where a run stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunEnd {
    pub t: f64,
    /// Time of the step that produced a diverged state, if any.
    pub diverged_at: Option<f64>,
}

impl Integrator {
    pub fn new(
        algo: AlgoKind,
        scheme: Scheme,
        dims: Dims,
        mom: &DataMoments,
        lambda: f64,
        alpha: AlphaSchedule,
    ) -> Result<Self> {
        let field = FlowField::new(algo, dims, mom, lambda)?;
        let len = dims.state_len();
        Ok(Self {
            field,
            scheme,
            alpha,
            k: [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]],
            stage: vec![0.0; len],
        })
    }

    pub fn field_mut(&mut self) -> &mut FlowField {
        &mut self.field
    }

    /// Advances `x` from time `t` by `h`; `horizon` scales the α schedule.
    pub fn step(&mut self, x: &mut [f64], t: f64, h: f64, horizon: f64) {
        let alpha = |s: f64| self.alpha.at(progress(s, horizon));
        match self.scheme {
            Scheme::Euler => {
                let a0 = alpha(t);
                self.field.eval(x, a0, &mut self.k[0]);
                for (xi, ki) in x.iter_mut().zip(&self.k[0]) {
                    *xi += h * ki;
                }
            }
            Scheme::Rk4 => {
                let (a0, a1, a2) = (alpha(t), alpha(t + 0.5 * h), alpha(t + h));
                let [k1, k2, k3, k4] = &mut self.k;
                self.field.eval(x, a0, k1);
                for ((s, xi), ki) in self.stage.iter_mut().zip(x.iter()).zip(k1.iter()) {
                    *s = xi + 0.5 * h * ki;
                }
                self.field.eval(&self.stage, a1, k2);
                for ((s, xi), ki) in self.stage.iter_mut().zip(x.iter()).zip(k2.iter()) {
                    *s = xi + 0.5 * h * ki;
                }
                self.field.eval(&self.stage, a1, k3);
                for ((s, xi), ki) in self.stage.iter_mut().zip(x.iter()).zip(k3.iter()) {
                    *s = xi + h * ki;
                }
                self.field.eval(&self.stage, a2, k4);
                let w = h / 6.0;
                for i in 0..x.len() {
                    x[i] += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        if self.field.algo() == AlgoKind::Sg {
            let p = self.field.dims().encoder_len();
            let q = self.field.dims().predictor_len();
            let (a, rest) = x.split_at_mut(p);
            rest[q..].copy_from_slice(a);
        }
    }

    /// Runs `steps` steps of size `dt` from `t = 0`, stopping early on
    /// divergence. `x` holds the last non-diverged state on return.
    pub fn run(&mut self, x: &mut [f64], dt: f64, steps: usize) -> RunEnd {
        let horizon = dt * steps as f64;
        let mut backup = x.to_vec();
        for k in 0..steps {
            let t = k as f64 * dt;
            backup.copy_from_slice(x);
            self.step(x, t, dt, horizon);
            if any_diverged(x) {
                x.copy_from_slice(&backup);
                return RunEnd {
                    t,
                    diverged_at: Some(t + dt),
                };
            }
        }
        RunEnd {
            t: horizon,
            diverged_at: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub e_bar: f64,
    pub f_bar: f64,
    pub balance_residual: f64,
    pub norm_a: f64,
    pub integrability_defect: f64,
}

impl Diagnostics {
    pub fn of(state: &ModelState, mom: &DataMoments, lambda: f64) -> Self {
        let Objectives { e_bar, f_bar } = gradients::objectives_unchecked(state, mom, lambda);
        Self {
            e_bar,
            f_bar,
            balance_residual: balance_residual(state),
            norm_a: state.a.norm(),
            integrability_defect: integrability_defect(state, mom),
        }
    }
}

/// Recorded snapshots of a continuous run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub algo: AlgoKind,
    pub times: Vec<f64>,
    pub states: Vec<ModelState>,
    pub diagnostics: Vec<Diagnostics>,
    /// Set when integration stopped on a diverged state; the last snapshot is
    /// then the last finite state.
    pub diverged_at: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&ModelState> {
        self.states.last()
    }

    pub fn dims(&self) -> Option<Dims> {
        self.states.first().and_then(|s| s.dims().ok())
    }

    pub fn csv_header(dims: Dims) -> Vec<String> {
        let Dims { n, m } = dims;
        let idx = |i: usize, j: usize| {
            if n < 10 && m.max(n) < 10 {
                format!("{i}{j}")
            } else {
                format!("{i}_{j}")
            }
        };
        let mut h = vec!["t".to_string()];
        for i in 0..n {
            for j in 0..m {
                h.push(format!("A_{}", idx(i, j)));
            }
        }
        for i in 0..n {
            for j in 0..n {
                h.push(format!("B_{}", idx(i, j)));
            }
        }
        for i in 0..n {
            for j in 0..m {
                h.push(format!("C_{}", idx(i, j)));
            }
        }
        h.extend(
            ["E_bar", "F_bar", "balance_residual", "norm_A", "integ_defect"]
                .into_iter()
                .map(String::from),
        );
        h
    }

    /// One snapshot per row, coefficients row-major in the order `A, B, C`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let dims = self
            .dims()
            .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::csv_header(dims))?;
        for ((t, s), d) in self.times.iter().zip(&self.states).zip(&self.diagnostics) {
            let mut row = Vec::with_capacity(dims.state_len() + 6);
            row.push(t.to_string());
            row.extend(s.to_vec().iter().map(f64::to_string));
            for v in [
                d.e_bar,
                d.f_bar,
                d.balance_residual,
                d.norm_a,
                d.integrability_defect,
            ] {
                row.push(v.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses a trajectory CSV; the algorithm tag is not stored in the file
    /// and must be supplied.
    pub fn read_csv<R: Read>(reader: R, algo: AlgoKind) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let count = |prefix: &str| headers.iter().filter(|h| h.starts_with(prefix)).count();
        let (na, nb) = (count("A_"), count("B_"));
        let n = (nb as f64).sqrt().round() as usize;
        if n == 0 || n * n != nb || na % n != 0 || count("C_") != na {
            return Err(Error::Parse("trajectory header has inconsistent shapes".into()));
        }
        let dims = Dims::new(n, na / n)?;
        if headers.len() != dims.state_len() + 6 || &headers[0] != "t" {
            return Err(Error::Parse("unexpected trajectory header".into()));
        }
        let mut traj = Trajectory {
            algo,
            times: Vec::new(),
            states: Vec::new(),
            diagnostics: Vec::new(),
            diverged_at: None,
        };
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let v = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {}: '{s}': {e}", row + 2)))
                })
                .collect::<Result<Vec<_>>>()?;
            let len = dims.state_len();
            traj.times.push(v[0]);
            traj.states.push(ModelState::from_slice(dims, &v[1..=len])?);
            let d = &v[len + 1..];
            traj.diagnostics.push(Diagnostics {
                e_bar: d[0],
                f_bar: d[1],
                balance_residual: d[2],
                norm_a: d[3],
                integrability_defect: d[4],
            });
        }
        Ok(traj)
    }
}

/// Integrates the continuous flow with classical RK4 at fixed step
/// `hyper.dt`, recording every `stride` steps plus the final state.
pub fn integrate_flow(
    algo: AlgoKind,
    state0: &ModelState,
    mom: &DataMoments,
    hyper: &HyperParams,
    t_end: f64,
    stride: usize,
) -> Result<Trajectory> {
    integrate_flow_with(Scheme::Rk4, algo, state0, mom, hyper, t_end, stride)
}

/// As [`integrate_flow`] with an explicit scheme. When `t_end` is not a
/// multiple of `dt` the last step is shortened. A ramped α is evaluated at
/// `t / t_end` for every stage.
pub fn integrate_flow_with(
    scheme: Scheme,
    algo: AlgoKind,
    state0: &ModelState,
    mom: &DataMoments,
    hyper: &HyperParams,
    t_end: f64,
    stride: usize,
) -> Result<Trajectory> {
    check_shapes(state0, mom)?;
    hyper.validate()?;
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(Error::InvalidParameter(format!("t_end = {t_end} must be >= 0")));
    }
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    if !state0.is_finite() {
        return Err(Error::InvalidParameter("initial state is not finite".into()));
    }
    let dims = state0.dims()?;
    let dt = hyper.dt;
    let mut integ = Integrator::new(algo, scheme, dims, mom, hyper.lambda, hyper.alpha)?;
    let mut x = prepared(algo, state0).to_vec();

    let full = (t_end / dt).floor() as usize;
    let remainder = t_end - full as f64 * dt;
    let total = if remainder > 1e-12 * dt.max(t_end) {
        full + 1
    } else {
        full
    };

    let mut traj = Trajectory {
        algo,
        times: Vec::new(),
        states: Vec::new(),
        diagnostics: Vec::new(),
        diverged_at: None,
    };
    let record = |traj: &mut Trajectory, t: f64, x: &[f64]| -> Result<()> {
        let s = ModelState::from_slice(dims, x)?;
        traj.diagnostics.push(Diagnostics::of(&s, mom, hyper.lambda));
        traj.times.push(t);
        traj.states.push(s);
        Ok(())
    };
    record(&mut traj, 0.0, &x)?;

    let mut backup = x.clone();
    let mut t = 0.0;
    for k in 0..total {
        let h = if k + 1 == total && total > full {
            t_end - t
        } else {
            dt
        };
        backup.copy_from_slice(&x);
        integ.step(&mut x, t, h, t_end);
        let t_next = if k + 1 == total { t_end } else { (k + 1) as f64 * dt };
        if any_diverged(&x) {
            traj.diverged_at = Some(t_next);
            x.copy_from_slice(&backup);
            if traj.times.last() != Some(&t) {
                record(&mut traj, t, &x)?;
            }
            return Ok(traj);
        }
        t = t_next;
        if (k + 1) % stride == 0 || k + 1 == total {
            record(&mut traj, t, &x)?;
        }
    }
    Ok(traj)
}

/// Runs `steps` iterations of [`step_discrete`], recording every `stride`
/// iterations plus the last one. Snapshot times are iteration indices.
pub fn iterate_discrete(
    algo: AlgoKind,
    state0: &ModelState,
    mom: &DataMoments,
    hyper: &HyperParams,
    steps: usize,
    stride: usize,
) -> Result<Trajectory> {
    check_shapes(state0, mom)?;
    hyper.validate()?;
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    let mut traj = Trajectory {
        algo,
        times: Vec::new(),
        states: Vec::new(),
        diagnostics: Vec::new(),
        diverged_at: None,
    };
    let record = |traj: &mut Trajectory, t: usize, s: &ModelState| {
        traj.diagnostics.push(Diagnostics::of(s, mom, hyper.lambda));
        traj.times.push(t as f64);
        traj.states.push(s.clone());
    };
    let mut s = prepared(algo, state0);
    record(&mut traj, 0, &s);
    for k in 1..=steps {
        s = match step_discrete(algo, &s, mom, hyper, k, steps) {
            Ok(next) => next,
            Err(Error::Diverged(_)) => {
                traj.diverged_at = Some(k as f64);
                if traj.times.last() != Some(&((k - 1) as f64)) {
                    record(&mut traj, k - 1, &s);
                }
                return Ok(traj);
            }
            Err(e) => return Err(e),
        };
        if k % stride == 0 || k == steps {
            record(&mut traj, k, &s);
        }
    }
    Ok(traj)
}

/// Final state after `steps` fixed steps, without recording.
pub fn evolve(
    scheme: Scheme,
    algo: AlgoKind,
    state0: &ModelState,
    mom: &DataMoments,
    hyper: &HyperParams,
    steps: usize,
) -> Result<(ModelState, RunEnd)> {
    check_shapes(state0, mom)?;
    let dims = state0.dims()?;
    let mut integ = Integrator::new(algo, scheme, dims, mom, hyper.lambda, hyper.alpha)?;
    let mut x = prepared(algo, state0).to_vec();
    let end = integ.run(&mut x, hyper.dt, steps);
    Ok((ModelState::from_slice(dims, &x)?, end))
}

/// Integrates with constant `α` until the flow vector norm drops to `tol`
/// or `t_max` is reached. Returns the final state and whether `tol` was met.
#[allow(clippy::too_many_arguments)]
pub fn integrate_to_rest(
    algo: AlgoKind,
    state0: &ModelState,
    mom: &DataMoments,
    lambda: f64,
    alpha: f64,
    dt: f64,
    t_max: f64,
    tol: f64,
) -> Result<(ModelState, bool)> {
    check_shapes(state0, mom)?;
    let dims = state0.dims()?;
    let mut integ = Integrator::new(
        algo,
        Scheme::Rk4,
        dims,
        mom,
        lambda,
        AlphaSchedule::constant(alpha),
    )?;
    let mut x = prepared(algo, state0).to_vec();
    let mut d = vec![0.0; x.len()];
    let steps = (t_max / dt).ceil() as usize;
    for k in 0..steps {
        if k % 16 == 0 {
            integ.field_mut().eval(&x, alpha, &mut d);
            if integ.field_mut().active_norm(&d) <= tol {
                return Ok((ModelState::from_slice(dims, &x)?, true));
            }
        }
        integ.step(&mut x, k as f64 * dt, dt, t_max);
        if any_diverged(&x) {
            return Err(Error::Diverged(k as f64 * dt));
        }
    }
    integ.field_mut().eval(&x, alpha, &mut d);
    let done = integ.field_mut().active_norm(&d) <= tol;
    Ok((ModelState::from_slice(dims, &x)?, done))
}
