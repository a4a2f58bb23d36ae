//! Subcommand implementations. Each takes the flag values and the matching
//! config table, resolves parameters and writes its outputs.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::args::{EquilibriaArgs, Mode, MonteCarloArgs, Radius, SimulateArgs, StabilityArgs, VerifyArgs};
use crate::config::{resolve_alpha, Overlay, Pair};
use crate::error::{CliError, CliResult};
use crate::output::{create, default_manifest_path, emit_json, write_json, Manifest};
use linssl::dynamics::{integrate_flow_with, iterate_discrete, Trajectory};
use linssl::m1::default_delta;
use linssl::model::{load_moments_csv, random_state};
use linssl::verify::{run_all, CheckResult, VerifyOptions};
use linssl::{
    collapse_bound_check, empirical_stability_probe, linearize, materialize_equilibrium, run_monte_carlo,
    solve_equilibria, AlgoKind, AlphaSchedule, DataMoments, Dims, HyperParams, Mat, ScalarMoments, Scheme, Seed,
    TrialConfig,
};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
enum MomentSource {
    File { path: PathBuf, sxx: Mat, syx: Mat, syy: Mat },
    Scalar { rho: f64, tau: f64, delta: f64 },
}

#[derive(Debug, Serialize)]
struct SimulateParams {
    algo: AlgoKind,
    mode: Mode,
    scheme: Scheme,
    n: usize,
    m: usize,
    lambda: f64,
    mu: f64,
    nu: f64,
    dt: f64,
    t_end: Option<f64>,
    steps: Option<usize>,
    alpha: AlphaSchedule,
    seed: u64,
    stride: usize,
    initial_state: &'static str,
    moments: MomentSource,
}

#[derive(Debug, Serialize)]
struct SimulateResult<'a> {
    #[serde(flatten)]
    params: &'a SimulateParams,
    snapshots: usize,
    diverged_at: Option<f64>,
}

fn resolve_moments(args: &SimulateArgs) -> CliResult<(DataMoments, MomentSource)> {
    if let Some(path) = &args.moments {
        let mom = load_moments_csv(path)?;
        let src = MomentSource::File {
            path: path.clone(),
            sxx: mom.sxx.clone(),
            syx: mom.syx.clone(),
            syy: mom.syy.clone(),
        };
        return Ok((mom, src));
    }
    if args.m.is_some_and(|m| m != 1) {
        return Err(usage("--rho/--tau describe scalar data (m = 1); pass --moments for m > 1"));
    }
    let rho = args.rho.unwrap_or(3.0);
    let tau = args.tau.unwrap_or(2.0);
    let delta = args.delta.unwrap_or_else(|| default_delta(rho, tau));
    let mom = DataMoments::scalar(rho, tau, delta).map_err(|e| usage(format!("scalar moments: {e}")))?;
    Ok((mom, MomentSource::Scalar { rho, tau, delta }))
}

pub fn simulate(flags: SimulateArgs, config: SimulateArgs, config_path: Option<&Path>) -> CliResult<()> {
    let alpha = resolve_alpha(
        (flags.alpha, flags.alpha_ramp),
        (config.alpha, config.alpha_ramp),
        AlphaSchedule::constant(0.99),
    )?;
    let args = flags.overlay(config);
    let (mom, source) = resolve_moments(&args)?;
    let m = mom.m();
    if args.m.is_some_and(|want| want != m) {
        return Err(usage(format!("--m {} does not match the moments (m = {m})", args.m.unwrap_or(0))));
    }
    let mode = args.mode.unwrap_or(Mode::Flow);
    let params = SimulateParams {
        algo: args.algo.unwrap_or(AlgoKind::Sg),
        mode,
        scheme: args.scheme.unwrap_or_default(),
        n: args.n.unwrap_or(2),
        m,
        lambda: args.lambda.unwrap_or(0.1),
        mu: args.mu.unwrap_or(0.05),
        nu: args.nu.unwrap_or(0.05),
        dt: args.dt.unwrap_or(0.05),
        t_end: (mode == Mode::Flow).then(|| args.t_end.unwrap_or(100.0)),
        steps: (mode == Mode::Discrete).then(|| args.steps.unwrap_or(2000)),
        alpha,
        seed: args.seed.unwrap_or(0),
        stride: args.stride.unwrap_or(10),
        initial_state: "A, B, C entries i.i.d. N(0, 1), in that order, from ChaCha8 seeded with `seed`",
        moments: source,
    };
    let dims = Dims::new(params.n, m)?;
    if dims.narrow_embedding_warning() {
        eprintln!("warning: n = {} <= m = {m}; the embedding is not narrower than the data", dims.n);
    }
    let hyper = HyperParams {
        lambda: params.lambda,
        mu: params.mu,
        nu: params.nu,
        alpha,
        dt: params.dt,
    };
    let s0 = random_state(dims, Seed(params.seed));
    let traj = match (params.t_end, params.steps) {
        (Some(t_end), _) => integrate_flow_with(params.scheme, params.algo, &s0, &mom, &hyper, t_end, params.stride)?,
        (None, Some(steps)) => iterate_discrete(params.algo, &s0, &mom, &hyper, steps, params.stride)?,
        (None, None) => unreachable!("mode fixes one of t_end and steps"),
    };

    let out = args.out.unwrap_or_else(|| PathBuf::from("traj.csv"));
    traj.write_csv(create(&out)?)?;
    let manifest_path = args.manifest.unwrap_or_else(|| default_manifest_path(&out));
    let result = SimulateResult {
        params: &params,
        snapshots: traj.len(),
        diverged_at: traj.diverged_at,
    };
    let mut manifest = Manifest::new("simulate", params.seed, config_path, &result);
    manifest.outputs = vec![&out, &manifest_path];
    write_json(&manifest_path, &manifest)?;

    if let Some(t) = traj.diverged_at {
        return Err(CliError::Numerical(format!(
            "diverged at t = {t}; {} snapshots up to the last finite state written to {}",
            traj.len(),
            out.display()
        )));
    }
    let last = traj.final_state().expect("trajectory has the initial snapshot");
    println!(
        "{} snapshots written to {}; final |A| = {:.6e}",
        traj.len(),
        out.display(),
        last.a.norm()
    );
    Ok(())
}

fn scalar_moments(rho: Option<f64>, tau: Option<f64>, lambda: Option<f64>) -> ScalarMoments {
    ScalarMoments::new(rho.unwrap_or(3.0), tau.unwrap_or(2.0), lambda.unwrap_or(0.1))
}

pub fn equilibria(flags: EquilibriaArgs, config: EquilibriaArgs) -> CliResult<()> {
    let args = flags.overlay(config);
    let set = solve_equilibria(&scalar_moments(args.rho, args.tau, args.lambda))?;
    emit_json(args.json.as_deref(), &set)
}

pub fn stability(flags: StabilityArgs, config: StabilityArgs) -> CliResult<()> {
    let args = flags.overlay(config);
    let algo = args.algo.unwrap_or(AlgoKind::Sg);
    if algo == AlgoKind::GdFlow {
        return Err(usage("stability analysis covers sg and ema"));
    }
    let sm = scalar_moments(args.rho, args.tau, args.lambda);
    let set = solve_equilibria(&sm)?;
    let which = args.radius.unwrap_or(Radius::Outer);
    let radius = match which {
        Radius::Origin => Some(0.0),
        Radius::Inner => set.inner(),
        Radius::Outer => set.outer(),
    }
    .ok_or_else(|| {
        usage(format!(
            "no {} circle: need two distinct radii (discriminant {:e}, radii {:?})",
            format!("{which:?}").to_lowercase(),
            set.discriminant,
            set.radii
        ))
    })?;
    let n = args.n.unwrap_or(2);
    let mut direction = vec![0.0; n];
    *direction.first_mut().ok_or_else(|| usage("--n must be >= 1"))? = 1.0;
    let eq = materialize_equilibrium(&set, radius, &direction)?;
    let mom = sm.to_moments()?;
    let hyper = HyperParams {
        lambda: sm.lambda,
        alpha: AlphaSchedule::constant(args.alpha.unwrap_or(0.9)),
        dt: args.dt.unwrap_or(0.05),
        ..HyperParams::default()
    };
    let mut report = linearize(algo, &eq, &mom, &hyper)?;
    if let Some(Pair([size, t])) = args.probe {
        let seed = Seed(args.seed.unwrap_or(0));
        report.empirical_decay = Some(empirical_stability_probe(algo, &eq, &mom, &hyper, size, t, seed)?);
    }
    emit_json(args.out.as_deref(), &report)
}

pub fn monte_carlo(flags: MonteCarloArgs, config: MonteCarloArgs, config_path: Option<&Path>) -> CliResult<()> {
    let defaults = TrialConfig::default();
    let alpha = resolve_alpha(
        (flags.alpha, flags.alpha_ramp),
        (config.alpha, config.alpha_ramp),
        defaults.alpha,
    )?;
    let args = flags.overlay(config);
    let cfg = TrialConfig {
        trials: args.trials.unwrap_or(defaults.trials),
        steps: args.steps.unwrap_or(defaults.steps),
        scheme: args.scheme.unwrap_or(defaults.scheme),
        dt: args.dt.unwrap_or(defaults.dt),
        n: args.n.unwrap_or(defaults.n),
        rho_range: args.rho_range.map_or(defaults.rho_range, |p| p.0),
        tau_range: args.tau_range.map_or(defaults.tau_range, |p| p.0),
        lambda_range: args.lambda_range.map_or(defaults.lambda_range, |p| p.0),
        alpha,
        seed: args.seed.unwrap_or(defaults.seed),
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let stats = match args.threads {
        Some(0) => return Err(usage("--threads must be >= 1")),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| usage(e.to_string()))?
            .install(|| run_monte_carlo(&cfg))?,
        None => run_monte_carlo(&cfg)?,
    };

    let out = args.out.unwrap_or_else(|| PathBuf::from("stats.json"));
    write_json(&out, &stats)?;
    let manifest_path = args.manifest.unwrap_or_else(|| default_manifest_path(&out));
    let mut manifest = Manifest::new("montecarlo", cfg.seed, config_path, &cfg);
    manifest.outputs = vec![&out, &manifest_path];
    manifest.notes = vec![
        "SG and EMA runs of a trial share its random draw of (rho, tau, lambda) and the initial state",
        "trial i draws from ChaCha8 stream i of the master seed, so results do not depend on thread count",
        "fractions are over trials with a nonnegative discriminant; the rest are counted in `skipped`",
        "SG starts from C = A and uses no averaging; EMA uses `alpha`",
    ];
    write_json(&manifest_path, &manifest)?;
    for (name, s) in [("sg", &stats.sg), ("ema", &stats.ema)] {
        println!(
            "{name}: converged {:.2}%  to_R {:.2}%  to_r {:.2}%  to_zero {:.2}%  not_converged {:.2}%  diverged {:.2}%",
            100.0 * s.converged,
            100.0 * s.to_outer,
            100.0 * s.to_inner,
            100.0 * s.to_zero,
            100.0 * s.not_converged,
            100.0 * s.diverged
        );
    }
    println!("skipped (negative discriminant): {}", stats.skipped);
    Ok(())
}

pub fn verify(flags: VerifyArgs, config: VerifyArgs) -> CliResult<()> {
    let args = flags.overlay(config);
    let opts = VerifyOptions {
        seed: Seed(args.seed.unwrap_or(0)),
        instances: args.instances.unwrap_or(VerifyOptions::default().instances),
    };
    let mut results = run_all(&opts)?;
    if let Some(path) = &args.trajectory {
        let lambda = args
            .lambda
            .ok_or_else(|| usage("--trajectory needs --lambda, the weight decay of the run"))?;
        let file = std::fs::File::open(path).map_err(crate::error::io_error(path))?;
        let traj = Trajectory::read_csv(file, AlgoKind::GdFlow)?;
        let ok = collapse_bound_check(&traj, lambda);
        results.push(CheckResult {
            name: "trajectory obeys |A(t)| <= |A(0)| e^(-lambda t)",
            passed: ok,
            value: f64::from(u8::from(!ok)),
            threshold: 0.0,
        });
    }
    for r in &results {
        println!(
            "{} {}: {:.3e} (threshold {:.1e})",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.value,
            r.threshold
        );
    }
    if let Some(out) = &args.out {
        write_json(out, &results)?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::Verification(format!("{failed} of {} checks failed", results.len())));
    }
    Ok(())
}
