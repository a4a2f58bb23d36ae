#![allow(dead_code)]

use linssl::dynamics::flow_rhs;
use linssl::model::random_moments;
use linssl::{AlgoKind, DataMoments, Dims, Mat, ModelState};
use rand::Rng;

/// `½ E‖BAx − Cy‖² + (λ/2)(‖A‖² + ‖B‖²)` written as `½ tr(M Σ Mᵀ)` with
/// `M = [BA, −C]` and `Σ` the joint second moment of `(x, y)`.
pub fn objective_joint(a: &Mat, b: &Mat, c: &Mat, mom: &DataMoments, lambda: f64) -> f64 {
    let m = mom.sxx.rows();
    let n = a.rows();
    let ba = b.matmul(a);
    let big = Mat::from_fn(n, 2 * m, |i, j| if j < m { ba[(i, j)] } else { -c[(i, j - m)] });
    let sigma = Mat::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
        (true, true) => mom.sxx[(i, j)],
        (true, false) => mom.syx[(j - m, i)],
        (false, true) => mom.syx[(i - m, j)],
        (false, false) => mom.syy[(i - m, j - m)],
    });
    let mut quad = 0.0;
    for r in 0..n {
        for i in 0..2 * m {
            for j in 0..2 * m {
                quad += big[(r, i)] * sigma[(i, j)] * big[(r, j)];
            }
        }
    }
    0.5 * quad + 0.5 * lambda * (a.norm_sq() + b.norm_sq())
}

/// Central differences of `f` with step `h` in every coordinate of `x`.
pub fn central_diff(x: &Mat, h: f64, f: impl Fn(&Mat) -> f64) -> Mat {
    let mut g = Mat::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let mut p = x.clone();
            let mut q = x.clone();
            p[(i, j)] += h;
            q[(i, j)] -= h;
            g[(i, j)] = (f(&p) - f(&q)) / (2.0 * h);
        }
    }
    g
}

pub fn rel_err(got: &Mat, want: &Mat) -> f64 {
    (got - want).norm() / want.norm().max(1e-9)
}

pub fn random_dims<R: Rng>(rng: &mut R) -> Dims {
    let n = rng.gen_range(2..=5);
    let m = rng.gen_range(1..n);
    Dims::new(n, m).unwrap()
}

pub fn random_problem<R: Rng>(rng: &mut R) -> (ModelState, DataMoments) {
    let dims = random_dims(rng);
    let mom = random_moments(dims.m, rng);
    let s = linssl::model::random_state_from(dims, rng);
    (s, mom)
}

/// Root of a continuous `f` on `[lo, hi]` with a sign change, by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "no sign change on [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if (f(mid) <= 0.0) == (flo <= 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `∂P̄/∂ψ − (∂Q̄/∂θ)ᵀ` of the SG field by central differences, with rows
/// indexed by `θ = vec(A)` and columns by `ψ = vec(B)` (row-major).
pub fn schwarz_residual_fd(s: &ModelState, mom: &DataMoments, lambda: f64) -> Mat {
    let Dims { n, m } = s.dims().unwrap();
    let (p, q) = (n * m, n * n);
    let h = 1e-5;
    let field = |x: &ModelState| flow_rhs(AlgoKind::Sg, x, mom, lambda, 0.0).unwrap();
    let mut dp_dpsi = Mat::zeros(p, q);
    for k in 0..q {
        let (mut up, mut dn) = (s.clone(), s.clone());
        let (i, j) = (k / n, k % n);
        up.b[(i, j)] += h;
        dn.b[(i, j)] -= h;
        let (fu, fd) = (field(&up).a, field(&dn).a);
        for r in 0..p {
            // The flow is minus the field.
            dp_dpsi[(r, k)] = -(fu.as_slice()[r] - fd.as_slice()[r]) / (2.0 * h);
        }
    }
    let mut dq_dtheta = Mat::zeros(q, p);
    for k in 0..p {
        let (mut up, mut dn) = (s.clone(), s.clone());
        let (i, j) = (k / m, k % m);
        up.a[(i, j)] += h;
        dn.a[(i, j)] -= h;
        up.c = up.a.clone();
        dn.c = dn.a.clone();
        let (fu, fd) = (field(&up).b, field(&dn).b);
        for r in 0..q {
            dq_dtheta[(r, k)] = -(fu.as_slice()[r] - fd.as_slice()[r]) / (2.0 * h);
        }
    }
    &dp_dpsi - &dq_dtheta.transpose()
}
