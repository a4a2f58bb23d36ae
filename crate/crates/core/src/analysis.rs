//! Diagnostics for the linear dynamics: the Schwarz integrability defect,
//! the balance residual `BᵀB − AAᵀ`, linearization of the SG/EMA flows at an
//! equilibrium with its spectrum, perturbation probes, and the exponential
//! collapse bound for the gradient flow of `Ē`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_flow, AlgoKind, FlowField, Trajectory};
use crate::error::{Error, Result};
use crate::gradients::{self, check_shapes};
use crate::matrix::Mat;
use crate::model::{AlphaSchedule, DataMoments, Dims, HyperParams, ModelState, Seed};
use crate::spectrum::{self, Eigenvalue, EIGEN_METHOD};

/// Flow residual below which a state counts as an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-8;
/// Alignment (cosine) with the equilibrium manifold's tangent space needed to
/// exclude an eigendirection.
pub const TANGENT_ALIGNMENT: f64 = 0.99;
/// Relative slack of the collapse bound.
pub const COLLAPSE_SLACK: f64 = 1e-6;

/// `‖A Syxᵀ‖_F`. Each diagonal block of the cross-derivative mismatch
/// `∂P̄/∂ψ − (∂Q̄/∂θ)ᵀ` equals `Syx Aᵀ`, so this vanishes iff the SG field
/// passes the Schwarz test.
pub fn integrability_defect(state: &ModelState, mom: &DataMoments) -> f64 {
    state.a.matmul_tr(&mom.syx).norm()
}

/// `‖BᵀB − AAᵀ‖_F`.
pub fn balance_residual(state: &ModelState) -> f64 {
    let mut d = state.b.tr_matmul(&state.b);
    d -= &state.a.matmul_tr(&state.a);
    d.norm()
}

/// `e^{2λt}(AAᵀ − BᵀB)`, constant along continuous SG and EMA flows.
pub fn conserved_quantity(state: &ModelState, lambda: f64, t: f64) -> Mat {
    let mut k = state.a.matmul_tr(&state.a);
    k -= &state.b.tr_matmul(&state.b);
    k.scale((2.0 * lambda * t).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub perturbation_size: f64,
    pub t_probe: f64,
    pub distance_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub algo: AlgoKind,
    /// Full spectrum of the linearized flow.
    pub spectrum: Vec<Eigenvalue>,
    /// Max real part over the spectrum minus the excluded tangent modes.
    pub max_real_part: f64,
    pub method: String,
    /// True when eigenvalues along the equilibrium manifold were excluded.
    pub modulo_manifold: bool,
    /// Indices into `spectrum` of the excluded tangent modes.
    pub excluded: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub empirical_decay: Option<ProbeRecord>,
}

impl StabilityReport {
    pub fn is_asymptotically_stable(&self) -> bool {
        self.max_real_part < 0.0
    }

    pub fn retained(&self) -> impl Iterator<Item = &Eigenvalue> {
        self.spectrum
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.excluded.contains(i))
            .map(|(_, e)| e)
    }
}

/// Linearization of the SG or EMA flow around an equilibrium.
#[derive(Debug, Clone)]
pub struct Linearization {
    algo: AlgoKind,
    dims: Dims,
    eq: ModelState,
    mom: DataMoments,
    lambda: f64,
    alpha: f64,
    residual: Mat,
}

impl Linearization {
    /// Checks the preconditions of [`linearize`] and caches the residual.
    pub fn new(algo: AlgoKind, eq: &ModelState, mom: &DataMoments, hyper: &HyperParams) -> Result<Self> {
        check_shapes(eq, mom)?;
        let dims = eq.dims()?;
        if dims.n <= dims.m {
            return Err(Error::StabilityNeedsWideEmbedding { n: dims.n, m: dims.m });
        }
        let alpha = match algo {
            AlgoKind::GdFlow => {
                return Err(Error::InvalidParameter(
                    "linearization is defined for the SG and EMA flows only".into(),
                ))
            }
            AlgoKind::Sg => hyper.alpha.constant_value().unwrap_or(0.0),
            AlgoKind::Ema => match hyper.alpha {
                AlphaSchedule::Constant { alpha } if alpha != 1.0 => alpha,
                _ => {
                    return Err(Error::InvalidParameter(
                        "EMA linearization needs a constant alpha != 1".into(),
                    ))
                }
            },
        };
        let eq = match algo {
            AlgoKind::Sg => eq.with_target_synced(),
            _ => eq.clone(),
        };
        let g = gradients::grad_pq(&eq, mom, hyper.lambda)?;
        let (pn, qn) = (g.d_a.norm(), g.d_b.norm());
        let cn = if algo == AlgoKind::Ema {
            (&eq.a - &eq.c).norm()
        } else {
            0.0
        };
        if pn > EQUILIBRIUM_TOL || qn > EQUILIBRIUM_TOL || cn > EQUILIBRIUM_TOL {
            return Err(Error::NotAnEquilibrium(format!(
                "|P| = {pn:e}, |Q| = {qn:e}, |A - C| = {cn:e}"
            )));
        }
        let residual = gradients::residual(&eq, mom)?;
        Ok(Self {
            algo,
            dims,
            eq,
            mom: mom.clone(),
            lambda: hyper.lambda,
            alpha,
            residual,
        })
    }

    /// Size of the perturbation vector: `(δ, ε)` for SG, `(δ, ε, φ)` for EMA.
    pub fn dim(&self) -> usize {
        let d = self.dims.encoder_len() + self.dims.predictor_len();
        match self.algo {
            AlgoKind::Ema => d + self.dims.encoder_len(),
            _ => d,
        }
    }

    fn split(&self, v: &[f64]) -> (Mat, Mat, Mat) {
        let Dims { n, m } = self.dims;
        let (p, q) = (n * m, n * n);
        let delta = Mat::from_row_slice(n, m, &v[..p]);
        let eps = Mat::from_row_slice(n, n, &v[p..p + q]);
        let phi = match self.algo {
            AlgoKind::Ema => Mat::from_row_slice(n, m, &v[p + q..]),
            _ => delta.clone(),
        };
        (delta, eps, phi)
    }

    /// Exact first-order response of the flow to the perturbation `v`:
    ///
    /// ```text
    /// dR = (εA + Bδ) Sxx − φ Syx
    /// δ̇ = −(εᵀR + Bᵀ dR + λδ)
    /// ε̇ = −(dR Aᵀ + R δᵀ + λε)
    /// φ̇ = (1 − α)(δ − φ)
    /// ```
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim());
        let (delta, eps, phi) = self.split(v);
        let (a, b) = (&self.eq.a, &self.eq.b);
        let r = &self.residual;

        let mut dr = eps.matmul(a);
        dr += &b.matmul(&delta);
        let mut dr = dr.matmul(&self.mom.sxx);
        dr -= &phi.matmul(&self.mom.syx);

        let mut d_delta = eps.tr_matmul(r);
        d_delta += &b.tr_matmul(&dr);
        d_delta.axpy(self.lambda, &delta);

        let mut d_eps = dr.matmul_tr(a);
        d_eps += &r.matmul_tr(&delta);
        d_eps.axpy(self.lambda, &eps);

        let mut out = d_delta.scale(-1.0).into_vec();
        out.extend(d_eps.scale(-1.0).into_vec());
        if self.algo == AlgoKind::Ema {
            out.extend((&delta - &phi).scale(1.0 - self.alpha).into_vec());
        }
        out
    }

    /// Dense Jacobian, built column by column from canonical perturbations.
    pub fn jacobian(&self) -> Mat {
        let d = self.dim();
        let mut jac = Mat::zeros(d, d);
        let mut e = vec![0.0; d];
        for k in 0..d {
            e[k] = 1.0;
            let col = self.apply(&e);
            for (i, x) in col.into_iter().enumerate() {
                jac[(i, k)] = x;
            }
            e[k] = 0.0;
        }
        jac
    }

    /// Flow vector field restricted to the perturbation coordinates.
    pub fn field_at(&self, v: &[f64]) -> Vec<f64> {
        let (delta, eps, phi) = self.split(v);
        let s = ModelState {
            a: &self.eq.a + &delta,
            b: &self.eq.b + &eps,
            c: &self.eq.c + &phi,
        };
        let mut field = FlowField::new(self.algo, self.dims, &self.mom, self.lambda)
            .expect("shapes checked at construction");
        let x = s.to_vec();
        let mut out = vec![0.0; x.len()];
        field.eval(&x, self.alpha, &mut out);
        out.truncate(self.dim());
        out
    }

    /// Largest relative mismatch between `J v` and a central difference of
    /// the flow at the equilibrium, over `count` random unit directions.
    pub fn finite_difference_error(&self, count: usize, seed: Seed) -> f64 {
        let mut rng = seed.rng();
        let d = self.dim();
        let scale = self.eq.norm().max(1.0);
        let h = 1e-5 * scale;
        let mut worst: f64 = 0.0;
        for _ in 0..count {
            let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= nv);
            let plus: Vec<f64> = v.iter().map(|x| h * x).collect();
            let minus: Vec<f64> = v.iter().map(|x| -h * x).collect();
            let (fp, fm) = (self.field_at(&plus), self.field_at(&minus));
            let jv = self.apply(&v);
            let mut err = 0.0;
            let mut norm = 0.0;
            for i in 0..d {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                err += (fd - jv[i]).powi(2);
                norm += jv[i] * jv[i];
            }
            let rel = err.sqrt() / norm.sqrt().max(1e-9);
            worst = worst.max(rel);
        }
        worst
    }

    /// Orthonormal basis of the tangent space of the orbit
    /// `{(QA, QBQᵀ, QC) : Q orthogonal}` through the equilibrium.
    ///
    /// The flows commute with this action, so every orbit tangent lies in
    /// the kernel of the Jacobian. For `m = 1` the orbit is the whole circle
    /// (sphere) of equilibria.
    pub fn orbit_tangent_basis(&self) -> Vec<Vec<f64>> {
        let n = self.dims.n;
        let (a, b, c) = (&self.eq.a, &self.eq.b, &self.eq.c);
        let mut gens = Vec::new();
        for k in 0..n {
            for l in (k + 1)..n {
                let mut s = Mat::zeros(n, n);
                s[(k, l)] = 1.0;
                s[(l, k)] = -1.0;
                let mut v = s.matmul(a).into_vec();
                v.extend((&s.matmul(b) - &b.matmul(&s)).into_vec());
                if self.algo == AlgoKind::Ema {
                    v.extend(s.matmul(c).into_vec());
                }
                gens.push(v);
            }
        }
        if gens.iter().all(|g| g.iter().all(|x| x.abs() < 1e-300)) {
            return Vec::new();
        }
        spectrum::orthonormal_basis(&gens, 1e-8)
    }
}

/// Linearizes the SG or EMA flow at `eq`, computes the spectrum, and
/// excludes eigenvalues whose eigenspaces lie along the orbit of
/// equilibria generated by orthogonal conjugation (cosine ≥ 0.99).
pub fn linearize(
    algo: AlgoKind,
    eq: &ModelState,
    mom: &DataMoments,
    hyper: &HyperParams,
) -> Result<StabilityReport> {
    let lin = Linearization::new(algo, eq, mom, hyper)?;
    let jac = lin.jacobian();

    #[cfg(debug_assertions)]
    {
        let err = lin.finite_difference_error(20, Seed(0x5eed));
        assert!(err <= 1e-6, "Jacobian fails the finite-difference check: {err:e}");
    }

    let spectrum = spectrum::eigenvalues(&jac);
    let tangent = lin.orbit_tangent_basis();
    let excluded = tangent_modes(&jac, &spectrum, &tangent);
    let max_real_part = spectrum
        .iter()
        .enumerate()
        .filter(|(i, _)| !excluded.contains(i))
        .map(|(_, e)| e.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(StabilityReport {
        algo,
        spectrum,
        max_real_part,
        method: EIGEN_METHOD.to_string(),
        modulo_manifold: !excluded.is_empty(),
        excluded,
        empirical_decay: None,
    })
}

/// Indices of real eigenvalues whose eigenspace is aligned with `tangent`.
fn tangent_modes(jac: &Mat, spectrum: &[Eigenvalue], tangent: &[Vec<f64>]) -> Vec<usize> {
    if tangent.is_empty() {
        return Vec::new();
    }
    let scale = jac.norm().max(1.0);
    let cluster_tol = 1e-6 * scale;
    let mut excluded = Vec::new();
    let mut visited = vec![false; spectrum.len()];
    for i in 0..spectrum.len() {
        if visited[i] || spectrum[i].im.abs() > cluster_tol {
            continue;
        }
        let members: Vec<usize> = (i..spectrum.len())
            .filter(|&j| {
                !visited[j]
                    && spectrum[j].im.abs() <= cluster_tol
                    && (spectrum[j].re - spectrum[i].re).abs() <= cluster_tol
            })
            .collect();
        members.iter().for_each(|&j| visited[j] = true);

        let shift = members.iter().map(|&j| spectrum[j].re).sum::<f64>() / members.len() as f64;
        let mut shifted = jac.clone();
        for k in 0..jac.rows() {
            shifted[(k, k)] -= shift;
        }
        let null: Vec<Vec<f64>> = spectrum::smallest_right_singular_vectors(&shifted, members.len())
            .into_iter()
            .filter(|(s, _)| *s <= 1e-6 * scale)
            .map(|(_, v)| v)
            .collect();
        let aligned = spectrum::principal_cosines(&null, tangent)
            .into_iter()
            .filter(|c| *c >= TANGENT_ALIGNMENT)
            .count();
        let room = tangent.len() - excluded.len().min(tangent.len());
        excluded.extend(members.into_iter().take(aligned.min(room)));
    }
    excluded.sort_unstable();
    excluded
}

/// Distance from `state` to the equilibrium set containing `eq`.
///
/// For `m = 1` equilibria off the origin this is the distance to the whole
/// circle (sphere) `{(R u, ε R u uᵀ, R u) : ‖u‖ = 1}`; otherwise it is the
/// distance to `eq` itself. Only evolved coordinates count (`C` is skipped
/// for SG).
pub fn distance_to_equilibrium_set(algo: AlgoKind, state: &ModelState, eq: &ModelState) -> f64 {
    let with_c = algo == AlgoKind::Ema;
    let radius = eq.a.norm();
    if eq.a.cols() != 1 || radius == 0.0 {
        let mut d = (&state.a - &eq.a).norm_sq() + (&state.b - &eq.b).norm_sq();
        if with_c {
            d += (&state.c - &eq.c).norm_sq();
        }
        return d.sqrt();
    }
    let u_eq = eq.a.col(0).iter().map(|x| x / radius).collect::<Vec<_>>();
    let bu = eq.b.matmul(&Mat::column(&u_eq));
    let eps = if u_eq.iter().zip(bu.as_slice()).map(|(x, y)| x * y).sum::<f64>() >= 0.0 {
        1.0
    } else {
        -1.0
    };
    let u = closest_circle_direction(state, eps, with_c);
    let point = circle_point(radius, eps, &u);
    let mut d = (&state.a - &point.a).norm_sq() + (&state.b - &point.b).norm_sq();
    if with_c {
        d += (&state.c - &point.c).norm_sq();
    }
    d.sqrt()
}

fn circle_point(radius: f64, eps: f64, u: &[f64]) -> ModelState {
    let a = Mat::column(u).scale(radius);
    let b = Mat::outer(u, u).scale(eps * radius);
    ModelState { c: a.clone(), a, b }
}

/// Maximizes `s·u + ε uᵀ B_sym u` over the unit sphere, with `s = a (+ c)`,
/// which minimizes the distance to the circle. Minorize–maximize iterations
/// from several starts.
fn closest_circle_direction(state: &ModelState, eps: f64, with_c: bool) -> Vec<f64> {
    let n = state.a.rows();
    let mut s = state.a.col(0);
    if with_c {
        for (x, y) in s.iter_mut().zip(state.c.col(0)) {
            *x += y;
        }
    }
    let m = state.b.symmetric_part().scale(eps);
    let shift = m.norm() + 1e-12;
    let objective = |u: &[f64]| -> f64 {
        let mu = m.matmul(&Mat::column(u));
        u.iter().zip(&s).map(|(x, y)| x * y).sum::<f64>()
            + u.iter().zip(mu.as_slice()).map(|(x, y)| x * y).sum::<f64>()
    };
    let normalize = |mut v: Vec<f64>| -> Option<Vec<f64>> {
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (nv > 0.0).then(|| {
            v.iter_mut().for_each(|x| *x /= nv);
            v
        })
    };
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(u) = normalize(s.clone()) {
        starts.push(u);
    }
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        starts.push(e.clone());
        e[k] = -1.0;
        starts.push(e);
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mut u in starts {
        for _ in 0..500 {
            let mu = m.matmul(&Mat::column(&u));
            let g: Vec<f64> = (0..n).map(|i| s[i] + 2.0 * (mu[(i, 0)] + shift * u[i])).collect();
            match normalize(g) {
                Some(next) => {
                    let step: f64 = next.iter().zip(&u).map(|(x, y)| (x - y).abs()).sum();
                    u = next;
                    if step < 1e-15 {
                        break;
                    }
                }
                None => break,
            }
        }
        let val = objective(&u);
        if best.as_ref().is_none_or(|(b, _)| val > *b) {
            best = Some((val, u));
        }
    }
    best.map(|(_, u)| u).unwrap_or_else(|| {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        e
    })
}

/// Perturbs `eq` by a random direction of norm `perturbation_size`,
/// integrates for `t_probe` (RK4, `hyper.dt`, constant α), and returns the
/// final distance to the equilibrium set.
pub fn empirical_stability_probe(
    algo: AlgoKind,
    eq: &ModelState,
    mom: &DataMoments,
    hyper: &HyperParams,
    perturbation_size: f64,
    t_probe: f64,
    seed: Seed,
) -> Result<ProbeRecord> {
    let lin = Linearization::new(algo, eq, mom, hyper)?;
    let mut rng = seed.rng();
    let d = lin.dim();
    let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x *= perturbation_size / nv);
    let (delta, eps, phi) = lin.split(&v);
    let start = ModelState {
        a: &lin.eq.a + &delta,
        b: &lin.eq.b + &eps,
        c: &lin.eq.c + &phi,
    };
    let probe_hyper = HyperParams {
        alpha: AlphaSchedule::constant(lin.alpha),
        ..*hyper
    };
    let stride = usize::MAX / 2;
    let traj = integrate_flow(algo, &start, mom, &probe_hyper, t_probe, stride)?;
    if let Some(t) = traj.diverged_at {
        return Err(Error::Diverged(t));
    }
    let last = traj.final_state().expect("non-empty trajectory");
    Ok(ProbeRecord {
        perturbation_size,
        t_probe,
        distance_after: distance_to_equilibrium_set(algo, last, &lin.eq),
    })
}

/// True iff `‖A(t)‖_F ≤ ‖A(t₀)‖_F · e^{−λ(t − t₀)} · (1 + 1e-6)` at every
/// snapshot.
pub fn collapse_bound_check(traj: &Trajectory, lambda: f64) -> bool {
    let (Some(&t0), Some(s0)) = (traj.times.first(), traj.states.first()) else {
        return true;
    };
    let a0 = s0.a.norm();
    traj.times
        .iter()
        .zip(&traj.states)
        .all(|(t, s)| s.a.norm() <= a0 * (-lambda * (t - t0)).exp() * (1.0 + COLLAPSE_SLACK))
}
