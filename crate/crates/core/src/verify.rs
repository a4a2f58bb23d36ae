//! Built-in invariant checks: gradient fields against finite differences,
//! the conserved quantity along SG/EMA flows, the collapse bound of the
//! gradient flow, and the residuals of the closed-form `m = 1` equilibria.

use rand::Rng;
use serde::Serialize;

use crate::analysis::{collapse_bound_check, conserved_quantity, linearize};
use crate::dynamics::{flow_rhs_norm, integrate_flow, AlgoKind};
use crate::error::Result;
use crate::gradients::{grad_e, grad_pq, objectives_unchecked};
use crate::m1::{materialize_equilibrium, solve_equilibria, ScalarMoments};
use crate::matrix::Mat;
use crate::model::{random_moments, random_state_from, AlphaSchedule, Dims, HyperParams, ModelState, Seed};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: Seed,
    /// Random instances per randomized check.
    pub instances: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: Seed(0),
            instances: 20,
        }
    }
}

pub fn run_all(opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    Ok(vec![
        gradient_check(opts)?,
        conservation_check(opts)?,
        collapse_check(opts)?,
        equilibrium_residual_check()?,
        origin_spectrum_check()?,
    ])
}

fn random_dims<R: Rng>(rng: &mut R) -> Dims {
    let n = rng.gen_range(2..=5);
    let m = rng.gen_range(1..n);
    Dims { n, m }
}

/// Central difference of `f` along each coordinate of `x`.
fn central_difference(x: &Mat, h: f64, mut f: impl FnMut(&Mat) -> f64) -> Mat {
    let mut g = Mat::zeros(x.rows(), x.cols());
    let mut xp = x.clone();
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let v = x[(i, j)];
            xp[(i, j)] = v + h;
            let fp = f(&xp);
            xp[(i, j)] = v - h;
            let fm = f(&xp);
            xp[(i, j)] = v;
            g[(i, j)] = (fp - fm) / (2.0 * h);
        }
    }
    g
}

fn relative_error(got: &Mat, want: &Mat) -> f64 {
    (got - want).norm() / want.norm().max(1e-9)
}

fn gradient_check(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut rng = opts.seed.stream(1);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..opts.instances {
        let dims = random_dims(&mut rng);
        let mom = random_moments(dims.m, &mut rng);
        let s = random_state_from(dims, &mut rng);
        let lambda = rng.gen_range(0.0..1.0);
        let f = |a: &Mat, b: &Mat, c: &Mat| {
            let st = ModelState {
                a: a.clone(),
                b: b.clone(),
                c: c.clone(),
            };
            objectives_unchecked(&st, &mom, lambda)
        };
        let pq = grad_pq(&s, &mom, lambda)?;
        let ge = grad_e(&s, &mom, lambda)?;
        let errs = [
            relative_error(&pq.d_a, &central_difference(&s.a, h, |a| f(a, &s.b, &s.c).f_bar)),
            relative_error(&pq.d_b, &central_difference(&s.b, h, |b| f(&s.a, b, &s.c).f_bar)),
            relative_error(&ge.d_a, &central_difference(&s.a, h, |a| f(a, &s.b, a).f_bar)),
            relative_error(&ge.d_b, &central_difference(&s.b, h, |b| f(&s.a, b, &s.a).f_bar)),
        ];
        worst = errs.into_iter().fold(worst, f64::max);
    }
    Ok(CheckResult {
        name: "gradients match central differences",
        passed: worst <= 1e-6,
        value: worst,
        threshold: 1e-6,
    })
}

fn conservation_check(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut rng = opts.seed.stream(2);
    let mut worst = 0.0f64;
    for k in 0..opts.instances {
        let algo = if k % 2 == 0 { AlgoKind::Sg } else { AlgoKind::Ema };
        let dims = random_dims(&mut rng);
        let mom = random_moments(dims.m, &mut rng);
        let s0 = random_state_from(dims, &mut rng).scaled(0.5);
        let hyper = HyperParams {
            lambda: rng.gen_range(0.01..0.5),
            alpha: AlphaSchedule::constant(0.9),
            dt: 1e-3,
            ..HyperParams::default()
        };
        let traj = integrate_flow(algo, &s0, &mom, &hyper, 10.0, 1000)?;
        let k0 = conserved_quantity(&traj.states[0], hyper.lambda, 0.0);
        let scale = k0.norm().max(1e-12);
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let kt = conserved_quantity(s, hyper.lambda, *t);
            worst = worst.max((&kt - &k0).norm() / scale);
        }
        if traj.diverged_at.is_some() {
            worst = f64::INFINITY;
        }
    }
    Ok(CheckResult {
        name: "e^(2 lambda t)(AA^T - B^T B) is conserved",
        passed: worst <= 1e-5,
        value: worst,
        threshold: 1e-5,
    })
}

fn collapse_check(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut rng = opts.seed.stream(3);
    let mut failures = 0usize;
    for k in 0..opts.instances {
        let lambda = [0.01, 0.1, 1.0][k % 3];
        let dims = random_dims(&mut rng);
        let mom = random_moments(dims.m, &mut rng);
        let s0 = random_state_from(dims, &mut rng).scaled(0.5);
        let hyper = HyperParams {
            lambda,
            dt: 1e-2,
            ..HyperParams::default()
        };
        let traj = integrate_flow(AlgoKind::GdFlow, &s0, &mom, &hyper, 50.0, 10)?;
        if traj.diverged_at.is_some() || !collapse_bound_check(&traj, lambda) {
            failures += 1;
        }
    }
    Ok(CheckResult {
        name: "gradient flow obeys |A(t)| <= |A(0)| e^(-lambda t)",
        passed: failures == 0,
        value: failures as f64,
        threshold: 0.0,
    })
}

fn equilibrium_residual_check() -> Result<CheckResult> {
    let sm = ScalarMoments::new(3.0, 2.0, 0.1);
    let set = solve_equilibria(&sm)?;
    let mom = sm.to_moments()?;
    let dir = [0.6, 0.8];
    let mut worst = 0.0f64;
    for &radius in std::iter::once(&0.0).chain(&set.radii) {
        let eq = materialize_equilibrium(&set, radius, &dir)?;
        for algo in [AlgoKind::Sg, AlgoKind::Ema] {
            worst = worst.max(flow_rhs_norm(algo, &eq, &mom, sm.lambda, 0.9)?);
        }
    }
    Ok(CheckResult {
        name: "closed-form m=1 equilibria are at rest",
        passed: worst <= 1e-10,
        value: worst,
        threshold: 1e-10,
    })
}

fn origin_spectrum_check() -> Result<CheckResult> {
    let dims = Dims::new(3, 2)?;
    let mut rng = Seed(4).rng();
    let mom = random_moments(dims.m, &mut rng);
    let (lambda, alpha) = (0.1, 0.99);
    let hyper = HyperParams {
        lambda,
        alpha: AlphaSchedule::constant(alpha),
        ..HyperParams::default()
    };
    let report = linearize(AlgoKind::Ema, &ModelState::zeros(dims), &mom, &hyper)?;
    let (nm, nn) = (dims.n * dims.m, dims.n * dims.n);
    let mut want: Vec<f64> = std::iter::repeat_n(-lambda, nm + nn)
        .chain(std::iter::repeat_n(alpha - 1.0, nm))
        .collect();
    want.sort_by(|a, b| b.total_cmp(a));
    let worst = report
        .spectrum
        .iter()
        .zip(&want)
        .map(|(e, w)| (e.re - w).abs().max(e.im.abs()))
        .fold(0.0, f64::max);
    let ok = report.spectrum.len() == want.len() && (report.max_real_part + 0.01).abs() <= 1e-8;
    Ok(CheckResult {
        name: "origin spectrum is {-lambda, -(1-alpha)}",
        passed: ok && worst <= 1e-8,
        value: worst,
        threshold: 1e-8,
    })
}
