//! Command-line arguments. Every subcommand field is optional so the same
//! struct doubles as a TOML table; defaults are applied after merging.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::{overlay, Pair};
use linssl::{AlgoKind, Scheme};

#[derive(Debug, Parser)]
#[command(name = "linssl", version, about = "Numerical lab for linear non-contrastive self-supervised learning")]
pub struct Cli {
    /// TOML file with one table per subcommand; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one SG, EMA or gradient-flow run and write its trajectory.
    Simulate(SimulateArgs),
    /// Closed-form equilibria for scalar data.
    Equilibria(EquilibriaArgs),
    /// Linear stability of a scalar-data equilibrium.
    Stability(StabilityArgs),
    /// Convergence statistics over random scalar problems.
    #[command(name = "montecarlo")]
    MonteCarlo(MonteCarloArgs),
    /// Built-in invariant checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Continuous flow integrated to `t_end`.
    Flow,
    /// Discrete iterations with step sizes `mu`, `nu`.
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Radius {
    Origin,
    Inner,
    Outer,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// sg, ema or gdflow [default: sg]
    #[arg(long)]
    pub algo: Option<AlgoKind>,
    /// Embedding dimension [default: 2]
    #[arg(long)]
    pub n: Option<usize>,
    /// Data dimension; must match --moments [default: 1]
    #[arg(long)]
    pub m: Option<usize>,
    /// Weight decay [default: 0.1]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Encoder step size in discrete mode [default: 0.05]
    #[arg(long)]
    pub mu: Option<f64>,
    /// Predictor step size in discrete mode [default: 0.05]
    #[arg(long)]
    pub nu: Option<f64>,
    /// Integration step [default: 0.05]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time of a flow run [default: 100]
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Iterations of a discrete run [default: 2000]
    #[arg(long)]
    pub steps: Option<usize>,
    /// flow or discrete [default: flow]
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// rk4 or euler for flow runs [default: rk4]
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// Constant EMA rate [default: 0.99]
    #[arg(long, conflicts_with = "alpha_ramp")]
    pub alpha: Option<f64>,
    /// Linear EMA ramp `start,end` over the run
    #[arg(long, value_name = "A0,A1")]
    pub alpha_ramp: Option<Pair>,
    /// Seed of the N(0, 1) initial state [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV of view pairs `x_1..x_m, y_1..y_m`
    #[arg(long, value_name = "FILE", conflicts_with_all = ["rho", "tau", "delta"])]
    pub moments: Option<PathBuf>,
    /// Scalar [xx^T] when m = 1 [default: 3]
    #[arg(long)]
    pub rho: Option<f64>,
    /// Scalar [yx^T] when m = 1 [default: 2]
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    /// Scalar [yy^T]; defaults to the smallest consistent value >= rho
    #[arg(long)]
    pub delta: Option<f64>,
    /// Record every this many steps [default: 10]
    #[arg(long)]
    pub stride: Option<usize>,
    /// Trajectory CSV [default: traj.csv]
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Run manifest [default: run.json next to --out]
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

overlay!(SimulateArgs {
    algo, n, m, lambda, mu, nu, dt, t_end, steps, mode, scheme, alpha, alpha_ramp, seed, moments, rho, tau,
    delta, stride, out, manifest,
});

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriaArgs {
    /// [xx^T] [default: 3]
    #[arg(long)]
    pub rho: Option<f64>,
    /// [yx^T] [default: 2]
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    /// Weight decay [default: 0.1]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Write the EquilibriumSet here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

overlay!(EquilibriaArgs { rho, tau, lambda, json });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityArgs {
    /// sg or ema [default: sg]
    #[arg(long)]
    pub algo: Option<AlgoKind>,
    /// [xx^T] [default: 3]
    #[arg(long)]
    pub rho: Option<f64>,
    /// [yx^T] [default: 2]
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    /// Weight decay [default: 0.1]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// origin, inner or outer [default: outer]
    #[arg(long, value_enum)]
    pub radius: Option<Radius>,
    /// Constant EMA rate [default: 0.9]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Embedding dimension [default: 2]
    #[arg(long)]
    pub n: Option<usize>,
    /// Integration step of the probe [default: 0.05]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Empirical probe `size,t`: perturb, integrate, measure the distance
    #[arg(long, value_name = "SIZE,T")]
    pub probe: Option<Pair>,
    /// Seed of the probe direction [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the StabilityReport here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

overlay!(StabilityArgs { algo, rho, tau, lambda, radius, alpha, n, dt, probe, seed, out });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloArgs {
    /// Number of trials [default: 10000]
    #[arg(long)]
    pub trials: Option<usize>,
    /// Integration steps per run [default: 80000]
    #[arg(long)]
    pub steps: Option<usize>,
    /// rk4 or euler [default: rk4]
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// Integration step [default: 0.05]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Embedding dimension [default: 2]
    #[arg(long)]
    pub n: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Range of [xx^T] [default: 0,3]
    #[arg(long, value_name = "LO,HI")]
    pub rho_range: Option<Pair>,
    /// Range of [yx^T] [default: -1,1]
    #[arg(long, value_name = "LO,HI", allow_hyphen_values = true)]
    pub tau_range: Option<Pair>,
    /// Range of the weight decay [default: 0.01,0.1]
    #[arg(long, value_name = "LO,HI")]
    pub lambda_range: Option<Pair>,
    /// Constant EMA rate
    #[arg(long, conflicts_with = "alpha_ramp")]
    pub alpha: Option<f64>,
    /// Linear EMA ramp [default: 0.9,1.0]
    #[arg(long, value_name = "A0,A1")]
    pub alpha_ramp: Option<Pair>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub threads: Option<usize>,
    /// Statistics JSON [default: stats.json]
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Run manifest [default: run.json next to --out]
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

overlay!(MonteCarloArgs {
    trials, steps, scheme, dt, n, seed, rho_range, tau_range, lambda_range, alpha, alpha_ramp, threads, out,
    manifest,
});

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyArgs {
    /// Seed of the randomized checks [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random instances per check [default: 20]
    #[arg(long)]
    pub instances: Option<usize>,
    /// Also check the collapse bound on a gradient-flow trajectory CSV
    #[arg(long, value_name = "FILE")]
    pub trajectory: Option<PathBuf>,
    /// Weight decay of --trajectory
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Write the check results as JSON
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

overlay!(VerifyArgs { seed, instances, trajectory, lambda, out });
