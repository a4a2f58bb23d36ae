mod common;

use common::{central_diff, objective_joint, random_problem, rel_err};
use linssl::gradients::objectives_unchecked;
use linssl::model::random_moments;
use linssl::{eval_objectives, grad_e, grad_p, grad_q, DataMoments, Dims, Mat, ModelState, Seed};
use rand::Rng;
use rand_distr::StandardNormal;

const H: f64 = 1e-5;

#[test]
fn grad_p_and_q_match_finite_differences() {
    let mut rng = Seed(11).rng();
    for _ in 0..100 {
        let (s, mom) = random_problem(&mut rng);
        let lambda = rng.gen_range(0.0..1.0);
        let fd_a = central_diff(&s.a, H, |a| objective_joint(a, &s.b, &s.c, &mom, lambda));
        let fd_b = central_diff(&s.b, H, |b| objective_joint(&s.a, b, &s.c, &mom, lambda));
        assert!(rel_err(&grad_p(&s, &mom, lambda).unwrap(), &fd_a) <= 1e-6);
        assert!(rel_err(&grad_q(&s, &mom, lambda).unwrap(), &fd_b) <= 1e-6);
    }
}

#[test]
fn grad_e_matches_finite_differences() {
    let mut rng = Seed(12).rng();
    for _ in 0..100 {
        let (s, mom) = random_problem(&mut rng);
        let lambda = rng.gen_range(0.0..1.0);
        let g = grad_e(&s, &mom, lambda).unwrap();
        let fd_a = central_diff(&s.a, H, |a| objective_joint(a, &s.b, a, &mom, lambda));
        let fd_b = central_diff(&s.b, H, |b| objective_joint(&s.a, b, &s.a, &mom, lambda));
        assert!(rel_err(&g.d_a, &fd_a) <= 1e-6, "{}", rel_err(&g.d_a, &fd_a));
        assert!(rel_err(&g.d_b, &fd_b) <= 1e-6);
    }
}

#[test]
fn objectives_agree_with_joint_form() {
    let mut rng = Seed(13).rng();
    for _ in 0..50 {
        let (s, mom) = random_problem(&mut rng);
        let o = eval_objectives(&s, &mom, 0.3).unwrap();
        let f = objective_joint(&s.a, &s.b, &s.c, &mom, 0.3);
        let e = objective_joint(&s.a, &s.b, &s.a, &mom, 0.3);
        assert!((o.f_bar - f).abs() <= 1e-10 * f.max(1.0));
        assert!((o.e_bar - e).abs() <= 1e-10 * e.max(1.0));
    }
}

/// Views `x = L₁ g`, `y = L₂ g + L₃ h` with `g, h` standard normal.
#[test]
fn objective_matches_sample_average() {
    let (n, m) = (3, 2);
    let mut rng = Seed(14).rng();
    let l1 = Mat::from_rows(&[&[1.0, 0.0], &[0.4, 0.8]]);
    let l2 = Mat::from_rows(&[&[0.7, -0.2], &[0.1, 0.9]]);
    let l3 = Mat::from_rows(&[&[0.5, 0.0], &[0.3, 0.4]]);
    let mom = DataMoments::new(
        l1.matmul_tr(&l1),
        l2.matmul_tr(&l1),
        &l2.matmul_tr(&l2) + &l3.matmul_tr(&l3),
    )
    .unwrap();
    let s = linssl::random_state(Dims::new(n, m).unwrap(), Seed(15));
    let ba = s.b.matmul(&s.a);
    let samples = 100_000;
    let mut acc = 0.0;
    for _ in 0..samples {
        let g: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let h: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let (g, h) = (Mat::column(&g), Mat::column(&h));
        let x = l1.matmul(&g);
        let y = &l2.matmul(&g) + &l3.matmul(&h);
        let d = &ba.matmul(&x) - &s.c.matmul(&y);
        acc += 0.5 * d.norm_sq();
    }
    let estimate = acc / samples as f64;
    let exact = eval_objectives(&s, &mom, 0.0).unwrap().f_bar;
    assert!((estimate - exact).abs() <= 0.01 * exact, "{estimate} vs {exact}");
}

#[test]
fn fields_are_linear_in_target_and_moments() {
    let mut rng = Seed(16).rng();
    for _ in 0..20 {
        let (s, mom) = random_problem(&mut rng);
        let c2 = linssl::model::random_state_from(s.dims().unwrap(), &mut rng).c;
        let (x, y) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let at = |c: Mat| ModelState { c, ..s.clone() };
        let mixed = at(&s.c.scale(x) + &c2.scale(y));
        let lhs = grad_p(&mixed, &mom, 0.0).unwrap();
        let base = grad_p(&at(Mat::zeros(s.c.rows(), s.c.cols())), &mom, 0.0).unwrap();
        // Affine in C: P(xC + yC') = P(0) + x(P(C) − P(0)) + y(P(C') − P(0)).
        let p1 = &grad_p(&s, &mom, 0.0).unwrap() - &base;
        let p2 = &grad_p(&at(c2.clone()), &mom, 0.0).unwrap() - &base;
        let rhs = &(&base + &p1.scale(x)) + &p2.scale(y);
        assert!((&lhs - &rhs).norm() <= 1e-10 * rhs.norm().max(1.0));

        let mom2 = random_moments(mom.m(), &mut rng);
        let sum = DataMoments {
            sxx: &mom.sxx + &mom2.sxx,
            syx: &mom.syx + &mom2.syx,
            syy: &mom.syy + &mom2.syy,
        };
        let q = &grad_q(&s, &mom, 0.0).unwrap() + &grad_q(&s, &mom2, 0.0).unwrap();
        assert!((&grad_q(&s, &sum, 0.0).unwrap() - &q).norm() <= 1e-10 * q.norm().max(1.0));
    }
}

#[test]
fn second_branch_vanishes_without_cross_moments() {
    let mut rng = Seed(17).rng();
    for _ in 0..20 {
        let (s, mom) = random_problem(&mut rng);
        let m = mom.m();
        let mom = DataMoments {
            syx: Mat::zeros(m, m),
            syy: Mat::zeros(m, m),
            ..mom
        };
        let g = grad_e(&s, &mom, 0.2).unwrap();
        let zero_c = ModelState {
            c: Mat::zeros(s.c.rows(), s.c.cols()),
            ..s.clone()
        };
        assert_eq!(g.d_a, grad_p(&zero_c, &mom, 0.2).unwrap());
        assert_eq!(g.d_b, grad_q(&zero_c, &mom, 0.2).unwrap());
    }
}

#[test]
fn objectives_nonnegative_for_realizable_moments() {
    let mut rng = Seed(18).rng();
    for _ in 0..50 {
        let (s, mom) = random_problem(&mut rng);
        let o = objectives_unchecked(&s, &mom, 0.0);
        assert!(o.e_bar >= -1e-12 && o.f_bar >= -1e-12);
    }
}
