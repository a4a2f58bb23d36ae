//! Monte-Carlo convergence statistics for SG and EMA with scalar data.
//!
//! Each trial draws `ρ`, `τ`, `λ` uniformly and an `N(0, 1)` initial state,
//! runs both flows from the same draw, and classifies where `a` ends up.
//! Trial `i` uses its own ChaCha stream, so results do not depend on thread
//! count or scheduling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{AlgoKind, Integrator, Scheme};
use crate::error::{Error, Result};
use crate::m1::{classify_limit, default_delta, solve_equilibria, LimitClass, ScalarMoments};
use crate::model::{random_state_from, AlphaSchedule, DataMoments, Dims, ModelState, Seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub trials: usize,
    pub steps: usize,
    pub scheme: Scheme,
    pub dt: f64,
    pub n: usize,
    pub rho_range: [f64; 2],
    pub tau_range: [f64; 2],
    pub lambda_range: [f64; 2],
    /// Schedule for the EMA runs; SG has no target to average.
    pub alpha: AlphaSchedule,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            // 4000 time units at dt = 0.05.
            steps: 80_000,
            scheme: Scheme::Rk4,
            dt: 0.05,
            n: 2,
            rho_range: [0.0, 3.0],
            tau_range: [-1.0, 1.0],
            lambda_range: [0.01, 0.1],
            alpha: AlphaSchedule::ramp(0.9, 1.0),
            seed: 0,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return bad(format!("dt = {} must be > 0", self.dt));
        }
        if self.n == 0 {
            return bad("n must be >= 1".into());
        }
        for (name, [lo, hi]) in [
            ("rho_range", self.rho_range),
            ("tau_range", self.tau_range),
            ("lambda_range", self.lambda_range),
        ] {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return bad(format!("{name} = [{lo}, {hi}] is not a valid interval"));
            }
        }
        if self.rho_range[0] < 0.0 {
            return bad("rho_range must be nonnegative".into());
        }
        if self.lambda_range[0] < 0.0 {
            return bad("lambda_range must be nonnegative".into());
        }
        let in_unit = |a: f64| (0.0..=1.0).contains(&a);
        let ok = match self.alpha {
            AlphaSchedule::Constant { alpha } => in_unit(alpha),
            AlphaSchedule::LinearRamp { start, end } => in_unit(start) && in_unit(end),
        };
        if !ok {
            return bad("alpha must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// How one run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ToOuter,
    ToInner,
    ToZero,
    NotConverged,
    Diverged,
}

impl From<LimitClass> for Outcome {
    fn from(c: LimitClass) -> Self {
        match c {
            LimitClass::OuterCircle => Self::ToOuter,
            LimitClass::InnerCircle => Self::ToInner,
            LimitClass::Zero => Self::ToZero,
            LimitClass::NotConverged => Self::NotConverged,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub index: usize,
    pub rho: f64,
    pub tau: f64,
    pub lambda: f64,
    /// `None` when the discriminant is negative and the trial is skipped.
    pub sg: Option<Outcome>,
    pub ema: Option<Outcome>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    #[serde(rename = "to_R")]
    pub to_outer: usize,
    #[serde(rename = "to_r")]
    pub to_inner: usize,
    pub to_zero: usize,
    pub not_converged: usize,
    pub diverged: usize,
}

impl OutcomeCounts {
    pub fn add(&mut self, o: Outcome) {
        match o {
            Outcome::ToOuter => self.to_outer += 1,
            Outcome::ToInner => self.to_inner += 1,
            Outcome::ToZero => self.to_zero += 1,
            Outcome::NotConverged => self.not_converged += 1,
            Outcome::Diverged => self.diverged += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.to_outer + self.to_inner + self.to_zero + self.not_converged + self.diverged
    }
}

/// Fractions over the trials with a nonnegative discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoStats {
    /// Ended within tolerance of the origin or of the outer circle.
    pub converged: f64,
    #[serde(rename = "to_R")]
    pub to_outer: f64,
    #[serde(rename = "to_r")]
    pub to_inner: f64,
    pub to_zero: f64,
    pub not_converged: f64,
    pub diverged: f64,
    pub counts: OutcomeCounts,
}

impl AlgoStats {
    pub fn from_counts(counts: OutcomeCounts) -> Self {
        let total = counts.total();
        let frac = |k: usize| if total == 0 { 0.0 } else { k as f64 / total as f64 };
        Self {
            converged: frac(counts.to_outer + counts.to_zero),
            to_outer: frac(counts.to_outer),
            to_inner: frac(counts.to_inner),
            to_zero: frac(counts.to_zero),
            not_converged: frac(counts.not_converged),
            diverged: frac(counts.diverged),
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub config: TrialConfig,
    pub ema: AlgoStats,
    pub sg: AlgoStats,
    /// Trials dropped for a negative discriminant.
    pub skipped: usize,
}

/// Runs one trial from its own random stream.
pub fn run_trial(cfg: &TrialConfig, index: usize) -> Result<TrialRecord> {
    let mut rng = Seed(cfg.seed).stream(index as u64);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng, [lo, hi]: [f64; 2]| {
        if lo == hi {
            lo
        } else {
            rng.gen_range(lo..hi)
        }
    };
    let rho = draw(&mut rng, cfg.rho_range);
    let tau = draw(&mut rng, cfg.tau_range);
    let lambda = draw(&mut rng, cfg.lambda_range);
    let dims = Dims::new(cfg.n, 1)?;
    let state0 = random_state_from(dims, &mut rng);

    let sm = ScalarMoments::new(rho, tau, lambda);
    let mut record = TrialRecord {
        index,
        rho,
        tau,
        lambda,
        sg: None,
        ema: None,
    };
    if sm.discriminant() < 0.0 {
        return Ok(record);
    }
    let set = solve_equilibria(&sm)?;
    let mom = DataMoments::scalar(rho, tau, default_delta(rho, tau))?;
    let run = |algo: AlgoKind, alpha: AlphaSchedule| -> Result<Outcome> {
        let mut integ = Integrator::new(algo, cfg.scheme, dims, &mom, lambda, alpha)?;
        let start = match algo {
            AlgoKind::Sg => state0.with_target_synced(),
            _ => state0.clone(),
        };
        let mut x = start.to_vec();
        let end = integ.run(&mut x, cfg.dt, cfg.steps);
        if end.diverged_at.is_some() {
            return Ok(Outcome::Diverged);
        }
        Ok(classify_limit(&ModelState::from_slice(dims, &x)?, &set).into())
    };
    record.sg = Some(run(AlgoKind::Sg, AlphaSchedule::constant(0.0))?);
    record.ema = Some(run(AlgoKind::Ema, cfg.alpha)?);
    Ok(record)
}

/// Every trial's draw and outcomes, in trial order.
pub fn run_trials(cfg: &TrialConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    (0..cfg.trials).into_par_iter().map(|i| run_trial(cfg, i)).collect()
}

pub fn summarize(cfg: &TrialConfig, records: &[TrialRecord]) -> TrialStats {
    let mut sg = OutcomeCounts::default();
    let mut ema = OutcomeCounts::default();
    let mut skipped = 0;
    for r in records {
        match (r.sg, r.ema) {
            (Some(s), Some(e)) => {
                sg.add(s);
                ema.add(e);
            }
            _ => skipped += 1,
        }
    }
    TrialStats {
        config: cfg.clone(),
        ema: AlgoStats::from_counts(ema),
        sg: AlgoStats::from_counts(sg),
        skipped,
    }
}

pub fn run_monte_carlo(cfg: &TrialConfig) -> Result<TrialStats> {
    let records = run_trials(cfg)?;
    Ok(summarize(cfg, &records))
}
