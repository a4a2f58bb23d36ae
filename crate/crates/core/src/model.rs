//! Domain types shared by every other module: dimensions, the `(A, B, C)`
//! parameter triple, second moments of the view distribution, and the
//! hyper-parameters of the training procedures.
//!
//! Encoder `x ↦ A x` and target encoder `y ↦ C y` are `n×m`, the predictor
//! `z ↦ B z` is `n×n`. Parameter vectors flatten each matrix row after row,
//! in the order `A, B, C`.

use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Mat;

/// Any coefficient above this magnitude marks a state as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Embedding dimension.
    pub n: usize,
    /// Data dimension.
    pub m: usize,
}

impl Dims {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidParameter(format!(
                "dimensions must be positive (n = {n}, m = {m})"
            )));
        }
        Ok(Self { n, m })
    }

    /// Set when `n ≤ m`. Gradients and flows still work; stability analysis
    /// refuses such shapes.
    pub fn narrow_embedding_warning(&self) -> bool {
        self.n <= self.m
    }

    /// Number of coefficients in `A` (and in `C`).
    pub fn encoder_len(&self) -> usize {
        self.n * self.m
    }

    pub fn predictor_len(&self) -> usize {
        self.n * self.n
    }

    pub fn state_len(&self) -> usize {
        2 * self.encoder_len() + self.predictor_len()
    }
}

/// Encoder `A`, predictor `B` and target encoder `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
}

impl ModelState {
    pub fn new(a: Mat, b: Mat, c: Mat) -> Result<Self> {
        let state = Self { a, b, c };
        state.dims()?;
        Ok(state)
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            a: Mat::zeros(dims.n, dims.m),
            b: Mat::zeros(dims.n, dims.n),
            c: Mat::zeros(dims.n, dims.m),
        }
    }

    /// Dimensions, checking that the three shapes agree.
    pub fn dims(&self) -> Result<Dims> {
        let (n, m) = self.a.shape();
        if self.b.shape() != (n, n) || self.c.shape() != (n, m) {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, B is {}x{}, C is {}x{}",
                n,
                m,
                self.b.rows(),
                self.b.cols(),
                self.c.rows(),
                self.c.cols()
            )));
        }
        Dims::new(n, m)
    }

    /// Row-major flattening in the order `A, B, C`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.a.len() + self.b.len() + self.c.len());
        v.extend_from_slice(self.a.as_slice());
        v.extend_from_slice(self.b.as_slice());
        v.extend_from_slice(self.c.as_slice());
        v
    }

    pub fn from_slice(dims: Dims, v: &[f64]) -> Result<Self> {
        if v.len() != dims.state_len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients, got {}",
                dims.state_len(),
                v.len()
            )));
        }
        let (p, q) = (dims.encoder_len(), dims.predictor_len());
        Ok(Self {
            a: Mat::from_row_slice(dims.n, dims.m, &v[..p]),
            b: Mat::from_row_slice(dims.n, dims.n, &v[p..p + q]),
            c: Mat::from_row_slice(dims.n, dims.m, &v[p + q..]),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite()
    }

    /// Non-finite, or some coefficient beyond [`DIVERGENCE_THRESHOLD`].
    pub fn is_diverged(&self) -> bool {
        !self.is_finite()
            || self.a.max_abs() > DIVERGENCE_THRESHOLD
            || self.b.max_abs() > DIVERGENCE_THRESHOLD
            || self.c.max_abs() > DIVERGENCE_THRESHOLD
    }

    /// Euclidean distance between flattened states.
    pub fn distance(&self, other: &ModelState) -> f64 {
        ((&self.a - &other.a).norm_sq()
            + (&self.b - &other.b).norm_sq()
            + (&self.c - &other.c).norm_sq())
        .sqrt()
    }

    pub fn norm(&self) -> f64 {
        (self.a.norm_sq() + self.b.norm_sq() + self.c.norm_sq()).sqrt()
    }

    /// `(QA, QBQᵀ, QC)` for an `n×n` matrix `Q` (orthogonal in practice).
    pub fn conjugate(&self, q: &Mat) -> Self {
        Self {
            a: q.matmul(&self.a),
            b: q.matmul(&self.b).matmul_tr(q),
            c: q.matmul(&self.c),
        }
    }

    /// Every coefficient multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            a: self.a.scale(s),
            b: self.b.scale(s),
            c: self.c.scale(s),
        }
    }

    /// Copy with `C` replaced by `A`, the form the stop-gradient procedure uses.
    pub fn with_target_synced(&self) -> Self {
        Self {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.a.clone(),
        }
    }
}

/// Second moments `Sxx = [xxᵀ]`, `Syx = [yxᵀ]`, `Syy = [yyᵀ]`.
///
/// `Sxy` is always `Syxᵀ` and is never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMoments {
    pub sxx: Mat,
    pub syx: Mat,
    pub syy: Mat,
}

impl DataMoments {
    /// Validates shapes and symmetry of directly supplied moments.
    pub fn new(sxx: Mat, syx: Mat, syy: Mat) -> Result<Self> {
        let m = sxx.rows();
        for (name, mat) in [("Sxx", &sxx), ("Syx", &syx), ("Syy", &syy)] {
            if mat.shape() != (m, m) {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {m}x{m}",
                    mat.rows(),
                    mat.cols()
                )));
            }
            if !mat.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} has non-finite entries")));
            }
        }
        if m == 0 {
            return Err(Error::InvalidParameter("moments must be at least 1x1".into()));
        }
        for (name, mat) in [("Sxx", &sxx), ("Syy", &syy)] {
            let tol = SYMMETRY_TOL * mat.max_abs().max(1.0);
            if mat.asymmetry() > tol {
                return Err(Error::InvalidParameter(format!("{name} is not symmetric")));
            }
            if min_symmetric_eigenvalue(mat) < -tol {
                return Err(Error::InvalidParameter(format!(
                    "{name} is not positive semidefinite"
                )));
            }
        }
        Ok(Self { sxx, syx, syy })
    }

    /// `m = 1` moments from scalars `ρ = [xxᵀ]`, `τ = [yxᵀ]`, `δ = [yyᵀ]`.
    pub fn scalar(rho: f64, tau: f64, delta: f64) -> Result<Self> {
        if !rho.is_finite() || !delta.is_finite() || !tau.is_finite() || rho < 0.0 || delta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "scalar moments need rho >= 0, delta >= 0 (got rho = {rho}, tau = {tau}, delta = {delta})"
            )));
        }
        Ok(Self {
            sxx: Mat::scalar(rho),
            syx: Mat::scalar(tau),
            syy: Mat::scalar(delta),
        })
    }

    pub fn m(&self) -> usize {
        self.sxx.rows()
    }

    pub fn sxy(&self) -> Mat {
        self.syx.transpose()
    }

    /// Smallest eigenvalue of the joint second-moment matrix of `(x, y)`.
    /// Negative values mean no distribution has these moments.
    pub fn joint_min_eigenvalue(&self) -> f64 {
        let m = self.m();
        let joint = Mat::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
            (true, true) => self.sxx[(i, j)],
            (true, false) => self.syx[(j - m, i)],
            (false, true) => self.syx[(i - m, j)],
            (false, false) => self.syy[(i - m, j - m)],
        });
        min_symmetric_eigenvalue(&joint)
    }
}

fn min_symmetric_eigenvalue(m: &Mat) -> f64 {
    let sym = m.symmetric_part().to_nalgebra();
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaSchedule {
    Constant { alpha: f64 },
    /// `α(s) = start + (end - start)·s` for progress `s ∈ [0, 1]`.
    LinearRamp { start: f64, end: f64 },
}

impl AlphaSchedule {
    pub fn constant(alpha: f64) -> Self {
        Self::Constant { alpha }
    }

    pub fn ramp(start: f64, end: f64) -> Self {
        Self::LinearRamp { start, end }
    }

    /// Value at progress `s` (clamped to `[0, 1]`).
    pub fn at(&self, progress: f64) -> f64 {
        match *self {
            Self::Constant { alpha } => alpha,
            Self::LinearRamp { start, end } => {
                let s = progress.clamp(0.0, 1.0);
                start + (end - start) * s
            }
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match *self {
            Self::Constant { alpha } => Some(alpha),
            Self::LinearRamp { .. } => None,
        }
    }

    /// True if `α = 1` is reached, which freezes the target encoder.
    pub fn reaches_one(&self) -> bool {
        match *self {
            Self::Constant { alpha } => alpha == 1.0,
            Self::LinearRamp { start, end } => start == 1.0 || end == 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |x: f64| (0.0..=1.0).contains(&x);
        let valid = match *self {
            Self::Constant { alpha } => ok(alpha),
            Self::LinearRamp { start, end } => ok(start) && ok(end),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("alpha schedule {self:?} outside [0, 1]")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    pub alpha: AlphaSchedule,
    pub dt: f64,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidParameter(format!("lambda = {} < 0", self.lambda)));
        }
        for (name, v) in [("mu", self.mu), ("nu", self.nu), ("dt", self.dt)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")));
            }
        }
        self.alpha.validate()
    }

    /// `α = 1` is allowed but freezes `C`.
    pub fn alpha_freezes_target(&self) -> bool {
        self.alpha.reaches_one()
    }
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            mu: 0.05,
            nu: 0.05,
            alpha: AlphaSchedule::constant(0.99),
            dt: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl Seed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent generator for sub-task `index` (a separate ChaCha stream).
    pub fn stream(self, index: u64) -> ChaCha8Rng {
        let mut rng = self.rng();
        rng.set_stream(index);
        rng
    }
}

/// Empirical moments of a set of view pairs.
pub fn moments_from_samples<X, Y>(pairs: &[(X, Y)]) -> Result<DataMoments>
where
    X: AsRef<[f64]>,
    Y: AsRef<[f64]>,
{
    let (first_x, _) = pairs.first().ok_or(Error::NoSamples)?;
    let m = first_x.as_ref().len();
    if m == 0 {
        return Err(Error::DimensionMismatch("empty sample vectors".into()));
    }
    let mut sxx = Mat::zeros(m, m);
    let mut syx = Mat::zeros(m, m);
    let mut syy = Mat::zeros(m, m);
    for (row, (x, y)) in pairs.iter().enumerate() {
        let (x, y) = (x.as_ref(), y.as_ref());
        if x.len() != m || y.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "pair {row} has lengths ({}, {}), expected {m}",
                x.len(),
                y.len()
            )));
        }
        for i in 0..m {
            for j in 0..m {
                sxx[(i, j)] += x[i] * x[j];
                syx[(i, j)] += y[i] * x[j];
                syy[(i, j)] += y[i] * y[j];
            }
        }
    }
    let inv = 1.0 / pairs.len() as f64;
    let sxx = sxx.scale(inv).symmetric_part();
    let syy = syy.scale(inv).symmetric_part();
    let syx = syx.scale(inv);
    DataMoments::new(sxx, syx, syy)
}

/// Reads view pairs from CSV with header `x1,...,xm,y1,...,ym`.
pub fn read_sample_pairs<R: Read>(reader: R) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let width = headers.len();
    if width == 0 || width % 2 != 0 {
        return Err(Error::Parse(format!(
            "sample header must have 2m columns, found {width}"
        )));
    }
    let m = width / 2;
    for (k, h) in headers.iter().enumerate() {
        let expected = if k < m {
            format!("x{}", k + 1)
        } else {
            format!("y{}", k - m + 1)
        };
        if h != expected {
            return Err(Error::Parse(format!(
                "header column {k} is '{h}', expected '{expected}'"
            )));
        }
    }
    let mut pairs = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: '{s}': {e}", row + 2)))
            })
            .collect::<Result<Vec<_>>>()?;
        let (x, y) = values.split_at(m);
        pairs.push((x.to_vec(), y.to_vec()));
    }
    Ok(pairs)
}

pub fn load_moments_csv(path: &Path) -> Result<DataMoments> {
    let file = std::fs::File::open(path)?;
    moments_from_samples(&read_sample_pairs(file)?)
}

/// Every coefficient of `A`, `B`, `C` drawn i.i.d. from `N(0, 1)`, in that
/// order, from the generator seeded by `seed`.
pub fn random_state(dims: Dims, seed: Seed) -> ModelState {
    random_state_from(dims, &mut seed.rng())
}

pub fn random_state_from<R: rand::Rng + ?Sized>(dims: Dims, rng: &mut R) -> ModelState {
    let mut draw = |rows, cols| Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng));
    let a = draw(dims.n, dims.m);
    let b = draw(dims.n, dims.n);
    let c = draw(dims.n, dims.m);
    ModelState { a, b, c }
}

/// Moments of a random Gaussian view distribution: the joint second-moment
/// matrix is `G Gᵀ / 2m` for a standard normal `2m×2m` matrix `G`, so the
/// triple is always realizable.
pub fn random_moments<R: rand::Rng + ?Sized>(m: usize, rng: &mut R) -> DataMoments {
    let g = Mat::from_fn(2 * m, 2 * m, |_, _| StandardNormal.sample(rng));
    let joint = g.matmul_tr(&g).scale(1.0 / (2 * m) as f64);
    let sxx = Mat::from_fn(m, m, |i, j| joint[(i, j)]).symmetric_part();
    let syx = Mat::from_fn(m, m, |i, j| joint[(m + i, j)]);
    let syy = Mat::from_fn(m, m, |i, j| joint[(m + i, m + j)]).symmetric_part();
    DataMoments { sxx, syx, syy }
}

/// Random orthogonal `n×n` matrix (QR of a Gaussian matrix).
pub fn random_orthogonal<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Mat {
    let g = Mat::from_fn(n, n, |_, _| StandardNormal.sample(rng)).to_nalgebra();
    let q = g.qr().q();
    Mat::from_nalgebra(&q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_unit_sample() {
        let mom = moments_from_samples(&[(vec![1.0], vec![1.0])]).unwrap();
        assert_eq!(mom.sxx, Mat::scalar(1.0));
        assert_eq!(mom.syx, Mat::scalar(1.0));
        assert_eq!(mom.syy, Mat::scalar(1.0));
    }

    #[test]
    fn opposite_views() {
        let mom = moments_from_samples(&[(vec![1.0], vec![-1.0]), (vec![-1.0], vec![1.0])]).unwrap();
        assert_eq!(mom.sxx, Mat::scalar(1.0));
        assert_eq!(mom.syx, Mat::scalar(-1.0));
        assert_eq!(mom.syy, Mat::scalar(1.0));
    }

    #[test]
    fn sample_errors() {
        let empty: [(Vec<f64>, Vec<f64>); 0] = [];
        assert!(matches!(moments_from_samples(&empty), Err(Error::NoSamples)));
        let ragged = [(vec![1.0, 2.0], vec![1.0, 2.0]), (vec![1.0], vec![1.0, 0.0])];
        assert!(matches!(
            moments_from_samples(&ragged),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn csv_samples() {
        let text = "x1,x2,y1,y2\n1,0,1,0\n0,2,0,-2\n";
        let pairs = read_sample_pairs(text.as_bytes()).unwrap();
        assert_eq!(pairs.len(), 2);
        let mom = moments_from_samples(&pairs).unwrap();
        assert_eq!(mom.sxx, Mat::from_rows(&[&[0.5, 0.0], &[0.0, 2.0]]));
        assert_eq!(mom.syx, Mat::from_rows(&[&[0.5, 0.0], &[0.0, -2.0]]));

        assert!(read_sample_pairs("x1,y2\n1,1\n".as_bytes()).is_err());
        assert!(read_sample_pairs("x1,y1\n1,abc\n".as_bytes()).is_err());
    }

    #[test]
    fn random_state_shape_and_determinism() {
        let dims = Dims::new(2, 1).unwrap();
        let s1 = random_state(dims, Seed(17));
        let s2 = random_state(dims, Seed(17));
        assert_eq!(s1, s2);
        assert_eq!(s1.to_vec().len(), 8);
        assert!(s1.to_vec().iter().all(|x| *x != 0.0));
        assert_ne!(s1, random_state(dims, Seed(18)));
    }

    #[test]
    fn flatten_is_row_major() {
        let dims = Dims::new(2, 1).unwrap();
        let v: Vec<f64> = (0..8).map(f64::from).collect();
        let s = ModelState::from_slice(dims, &v).unwrap();
        assert_eq!(s.b, Mat::from_rows(&[&[2.0, 3.0], &[4.0, 5.0]]));
        assert_eq!(s.to_vec(), v);
        assert!(ModelState::from_slice(dims, &v[..7]).is_err());
    }

    #[test]
    fn narrow_embedding_is_a_warning() {
        assert!(Dims::new(2, 2).unwrap().narrow_embedding_warning());
        assert!(!Dims::new(3, 2).unwrap().narrow_embedding_warning());
        assert!(Dims::new(0, 2).is_err());
    }

    #[test]
    fn hyper_validation() {
        let mut h = HyperParams::default();
        assert!(h.validate().is_ok());
        h.alpha = AlphaSchedule::constant(1.0);
        assert!(h.validate().is_ok());
        assert!(h.alpha_freezes_target());
        h.alpha = AlphaSchedule::ramp(0.9, 1.1);
        assert!(h.validate().is_err());
        h.alpha = AlphaSchedule::ramp(0.9, 1.0);
        assert_eq!(h.alpha.at(0.5), 0.95);
        h.mu = 0.0;
        assert!(h.validate().is_err());
    }

    #[test]
    fn moment_validation() {
        assert!(DataMoments::scalar(-1.0, 0.0, 1.0).is_err());
        let asym = Mat::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]);
        assert!(DataMoments::new(asym, Mat::zeros(2, 2), Mat::identity(2)).is_err());
        let indefinite = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(DataMoments::new(indefinite, Mat::zeros(2, 2), Mat::identity(2)).is_err());
        // Realizable only if rho * delta >= tau^2.
        assert!(DataMoments::scalar(1.0, 2.0, 1.0).unwrap().joint_min_eigenvalue() < 0.0);
        assert!(DataMoments::scalar(3.0, 2.0, 2.0).unwrap().joint_min_eigenvalue() >= 0.0);
    }
}
