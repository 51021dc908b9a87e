use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use cmdplab::analysis::{
    dual_certificate, eta_values, feasibility_boundary, theorem_bounds, BoundInputs, BoundReport,
};
use cmdplab::harness::{
    run_many_with_threads, summarize, write_checkpoints_csv, write_summary_csv, Overlay, RunResult,
    Spread,
};
use cmdplab::learners::{EpisodeRecord, LearnerContext, LearnerSpec, RegretBudgets};
use cmdplab::model::{compute_diameter, solve_cmdp, Cmdp};
use cmdplab::verify::{check_names, run_checks, VerifyOptions};
use serde::Serialize;

use crate::config::{CheckpointConfig, ConfigError, EnvironmentConfig, ExperimentConfig, SCHEMA_VERSION};
use crate::{BoundaryArgs, ExperimentArgs, ReportArgs, RunArgs, VerifyArgs};

pub const THREADS_ENV: &str = "CMDPLAB_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<cmdplab::Error> for CliError {
    fn from(e: cmdplab::Error) -> Self {
        use cmdplab::Error as E;
        let root = match &e {
            E::Seed { source, .. } => source.as_ref(),
            other => other,
        };
        let msg = e.to_string();
        match root {
            E::OracleInfeasible => CliError::Infeasible(msg),
            E::InvalidBudget { .. }
            | E::BudgetTooTight { .. }
            | E::InvalidDelta(_)
            | E::WrongEnvironment(_)
            | E::InvalidModel(_) => CliError::Config(msg),
            _ => CliError::Runtime(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Config file (if any) with command-line overrides applied, plus the
/// instance it describes.
fn resolve(exp: &ExperimentArgs, default_horizon: Option<u64>) -> Result<(ExperimentConfig, Cmdp), CliError> {
    let mut cfg = match &exp.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let (Some(theta), Some(c_ub)) = (exp.theta, exp.cub) else {
                return Err(config_err("without --config, both --theta and --cub are required"));
            };
            let horizon = exp
                .horizon
                .or(default_horizon)
                .ok_or_else(|| config_err("without --config, --T is required"))?;
            ExperimentConfig {
                version: SCHEMA_VERSION,
                horizon,
                delta: 0.05,
                seeds: vec![0],
                output: "cmdplab-out".into(),
                initial_state: 0,
                environment: EnvironmentConfig::TwoState { theta, c_ub },
                learner: LearnerSpec::ucrl(),
                checkpoints: CheckpointConfig::default(),
            }
        }
    };
    if exp.theta.is_some() || exp.cub.is_some() {
        match &mut cfg.environment {
            EnvironmentConfig::TwoState { theta, c_ub } => {
                *theta = exp.theta.unwrap_or(*theta);
                *c_ub = exp.cub.unwrap_or(*c_ub);
            }
            EnvironmentConfig::File { .. } => {
                return Err(config_err("--theta/--cub apply only to the two-state environment"))
            }
        }
    }
    if let Some(t) = exp.horizon {
        cfg.horizon = t;
    }
    if let Some(d) = exp.delta {
        cfg.delta = d;
    }
    let cmdp = cfg.build_cmdp()?;
    if let Some(name) = &exp.learner {
        cfg.learner = LearnerSpec::from_name(name, cmdp.n_costs()).ok_or_else(|| {
            config_err(format!(
                "unknown learner `{name}`; valid learners: {}",
                LearnerSpec::NAMES.join(", ")
            ))
        })?;
    }
    if let Some(b) = &exp.budgets {
        let budgets = RegretBudgets::new(b.clone()).map_err(|e| config_err(e.to_string()))?;
        match &mut cfg.learner {
            LearnerSpec::ModifiedUcrlCmdp { budgets: slot } => *slot = budgets,
            _ if exp.learner.is_none() => cfg.learner = LearnerSpec::ModifiedUcrlCmdp { budgets },
            other => {
                return Err(config_err(format!(
                    "--budgets applies to modified-ucrl-cmdp, not {}",
                    other.name()
                )))
            }
        }
    }
    if let LearnerSpec::ModifiedUcrlCmdp { budgets } = &cfg.learner {
        if budgets.as_slice().len() != cmdp.n_costs() {
            return Err(config_err(format!(
                "{} regret budgets for {} cost functions",
                budgets.as_slice().len(),
                cmdp.n_costs()
            )));
        }
    }
    cfg.validate(None)?;
    Ok((cfg, cmdp))
}

fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(config_err(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        },
    }
}

fn bound_inputs(cfg: &ExperimentConfig, cmdp: &Cmdp, horizon: f64, epsilon: f64) -> BoundInputs {
    let (eta, eta_hat) = eta_values(cmdp, epsilon).unwrap_or((f64::NAN, f64::NAN));
    BoundInputs {
        horizon,
        n_states: cmdp.n_states,
        n_actions: cmdp.n_actions,
        n_costs: cmdp.n_costs(),
        delta: cfg.delta,
        eta,
        eta_hat,
        budgets: match &cfg.learner {
            LearnerSpec::ModifiedUcrlCmdp { budgets } => Some(budgets.as_slice().to_vec()),
            _ => None,
        },
        diameter: compute_diameter(cmdp).unwrap_or(f64::NAN),
    }
}

/// Theorem bounds at horizon `t`, or `None` where they are undefined.
fn bounds_at(cfg: &ExperimentConfig, cmdp: &Cmdp, t: u64) -> Option<BoundReport> {
    theorem_bounds(&bound_inputs(cfg, cmdp, t as f64, 0.0)).ok()
}

#[derive(Serialize)]
struct SeedSummary<'a> {
    seed: u64,
    final_reward_regret: f64,
    final_cost_regret: &'a [f64],
    transitions: u64,
    trajectory_hash: String,
    episodes: &'a [EpisodeRecord],
}

#[derive(Serialize)]
struct RunSummary<'a> {
    learner: &'a LearnerSpec,
    horizon: u64,
    delta: f64,
    r_star: f64,
    lambda_star: Vec<f64>,
    final_reward_regret: Spread,
    final_cost_regret: Vec<Spread>,
    bound_inputs: BoundInputs,
    final_bounds: Option<BoundReport>,
    runs: Vec<SeedSummary<'a>>,
}

pub fn run(args: RunArgs) -> Result<ExitCode, CliError> {
    let (mut cfg, cmdp) = resolve(&args.experiment, None)?;
    if let Some(n) = args.seeds {
        if n == 0 {
            return Err(config_err("--seeds must be at least 1"));
        }
        cfg.seeds = (0..n).collect();
    }
    if let Some(list) = args.seed_list {
        cfg.seeds = list;
    }
    if let Some(out) = args.out {
        cfg.output = out;
    }
    cfg.validate(None)?;
    let threads = thread_cap()?;

    let oracle = solve_cmdp(&cmdp)?;
    if !oracle.feasible {
        return Err(CliError::Infeasible(
            "true CMDP is infeasible: no policy meets the cost budgets, so regret is undefined".into(),
        ));
    }
    // Surface learner configuration problems before spawning any run.
    let ctx = LearnerContext {
        shape: cmdp.shape(),
        horizon: cfg.horizon,
        delta: cfg.delta,
        seed: cfg.seeds[0],
    };
    cfg.learner.build(&ctx, &cmdp)?;
    let spec = cfg.run_spec(cmdp.clone())?;

    let started = Instant::now();
    let results = run_many_with_threads(&spec, &cfg.seeds, threads)?;
    let elapsed = started.elapsed();
    write_outputs(&cfg, &cmdp, &oracle.lambda_star, oracle.r_star, &results)?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "learner {} on {} seeds, T = {}", spec.learner.name(), results.len(), cfg.horizon)?;
    writeln!(out, "seed,reward_regret,cost_regret,episodes")?;
    for r in &results {
        let costs: Vec<String> = r.final_cost_regret.iter().map(|c| format!("{c:.3}")).collect();
        writeln!(
            out,
            "{},{:.3},{},{}",
            r.seed,
            r.final_reward_regret,
            costs.join(";"),
            r.episodes.len()
        )?;
    }
    writeln!(out, "wrote {}", cfg.output.display())?;
    eprintln!("finished in {:.2}s", elapsed.as_secs_f64());
    Ok(ExitCode::SUCCESS)
}

fn write_outputs(
    cfg: &ExperimentConfig,
    cmdp: &Cmdp,
    lambda_star: &[f64],
    r_star: f64,
    results: &[RunResult],
) -> Result<(), CliError> {
    let dir = &cfg.output;
    fs::create_dir_all(dir)?;
    let runtime = |e: cmdplab::Error| CliError::Runtime(e.to_string());
    for r in results {
        let f = fs::File::create(dir.join(format!("seed_{}.csv", r.seed)))?;
        write_checkpoints_csv(r, f).map_err(runtime)?;
    }

    let rows = summarize(results).map_err(runtime)?;
    let m = cmdp.n_costs();
    let mut overlays = vec![
        Overlay {
            name: "theorem1_bound".into(),
            at: Box::new(|t| bounds_at(cfg, cmdp, t).map_or(f64::NAN, |b| b.theorem1_bound)),
        },
        Overlay {
            name: "theorem2_reward_bound".into(),
            at: Box::new(|t| bounds_at(cfg, cmdp, t).map_or(f64::NAN, |b| b.theorem2_reward_bound)),
        },
    ];
    for i in 0..m {
        overlays.push(Overlay {
            name: format!("theorem2_cost_bound_{}", i + 1),
            at: Box::new(move |t| bounds_at(cfg, cmdp, t).map_or(f64::NAN, |b| b.theorem2_cost_bounds[i])),
        });
    }
    overlays.push(Overlay {
        name: "theorem3_floor".into(),
        at: Box::new(|t| bounds_at(cfg, cmdp, t).map_or(f64::NAN, |b| b.theorem3_floor)),
    });
    let f = fs::File::create(dir.join("summary.csv"))?;
    write_summary_csv(&rows, &overlays, f).map_err(runtime)?;

    let last = rows.last().expect("at least one checkpoint");
    let summary = RunSummary {
        learner: &cfg.learner,
        horizon: cfg.horizon,
        delta: cfg.delta,
        r_star,
        lambda_star: lambda_star.to_vec(),
        final_reward_regret: last.reward_regret,
        final_cost_regret: last.cost_regret.clone(),
        bound_inputs: bound_inputs(cfg, cmdp, cfg.horizon as f64, 0.0),
        final_bounds: bounds_at(cfg, cmdp, cfg.horizon),
        runs: results
            .iter()
            .map(|r| SeedSummary {
                seed: r.seed,
                final_reward_regret: r.final_reward_regret,
                final_cost_regret: &r.final_cost_regret,
                transitions: r.transitions,
                trajectory_hash: format!("{:016x}", r.trajectory_hash),
                episodes: &r.episodes,
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(dir.join("summary.json"), json + "\n")?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    Ok(())
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text)?;
        }
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn boundary(args: BoundaryArgs) -> Result<ExitCode, CliError> {
    if args.steps == 0 || !(args.theta_min <= args.theta_max) {
        return Err(config_err("need --steps >= 1 and --theta-min <= --theta-max"));
    }
    if !(0.0..=1.0).contains(&args.theta_min) || !(0.0..=1.0).contains(&args.theta_max) {
        return Err(config_err("θ range must lie inside [0, 1]"));
    }
    let width = args.theta_max - args.theta_min;
    let grid: Vec<f64> = (0..=args.steps)
        .map(|k| args.theta_min + width * k as f64 / args.steps as f64)
        .collect();
    let points = feasibility_boundary(|th| Cmdp::two_state(th, args.cub), &grid)?;
    let mut text = String::from("theta,min_cost,c_ub,feasible\n");
    for p in points {
        writeln!(text, "{},{},{},{}", p.param, p.min_cost, p.c_ub, p.feasible).expect("string write");
    }
    emit(&text, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

pub fn verify(args: VerifyArgs) -> Result<ExitCode, CliError> {
    if args.list {
        println!("{}", check_names().join("\n"));
        return Ok(ExitCode::SUCCESS);
    }
    let only: Vec<String> = match args.only {
        None => Vec::new(),
        Some(names) => {
            let names: Vec<String> = names.into_iter().filter(|n| !n.trim().is_empty()).collect();
            if names.is_empty() {
                return Err(config_err(format!(
                    "empty check selection; available: {}",
                    check_names().join(", ")
                )));
            }
            names
        }
    };
    let mut opts = VerifyOptions {
        tolerance_scale: args.tolerance_scale,
        ..Default::default()
    };
    if let Some(seed) = args.seed {
        opts.seed = seed;
    }
    let outcomes = run_checks(&only, &opts).map_err(|e| config_err(e.to_string()))?;
    let passed = outcomes.iter().filter(|o| o.passed).count();
    for o in &outcomes {
        println!("{} {:<22} {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    println!("{passed}/{} checks passed", outcomes.len());
    Ok(if passed == outcomes.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

pub fn report(args: ReportArgs) -> Result<ExitCode, CliError> {
    let (cfg, cmdp) = resolve(&args.experiment, Some(100_000))?;
    let sol = solve_cmdp(&cmdp)?;
    let m = cmdp.n_costs();
    let idx = |prefix: &str| (1..=m).map(|i| format!(",{prefix}_{i}")).collect::<String>();
    let list = |v: &[f64]| v.iter().map(|x| format!(",{x}")).collect::<String>();

    let mut text = String::new();
    let w = &mut text;
    writeln!(w, "# instance").unwrap();
    writeln!(w, "n_states,n_actions,n_costs{}", idx("c_ub")).unwrap();
    writeln!(w, "{},{},{}{}", cmdp.n_states, cmdp.n_actions, m, list(&cmdp.c_ub)).unwrap();
    writeln!(w, "\n# oracle").unwrap();
    writeln!(w, "feasible,r_star{}{}", idx("c_star"), idx("lambda_star")).unwrap();
    writeln!(w, "{},{}{}{}", sol.feasible, sol.r_star, list(&sol.c_star), list(&sol.lambda_star)).unwrap();

    writeln!(w, "\n# duality").unwrap();
    writeln!(w, "strictly_feasible,dual_value,primal_value,gap").unwrap();
    match dual_certificate(&cmdp) {
        Ok(c) => writeln!(w, "true,{},{},{}", c.dual_value, c.primal_value, c.gap).unwrap(),
        Err(cmdplab::Error::NotStrictlyFeasible { .. }) => writeln!(w, "false,,,").unwrap(),
        Err(e) => return Err(e.into()),
    }

    let inputs = bound_inputs(&cfg, &cmdp, cfg.horizon as f64, args.epsilon);
    writeln!(w, "\n# eta").unwrap();
    writeln!(w, "epsilon,eta,eta_hat,diameter").unwrap();
    writeln!(w, "{},{},{},{}", args.epsilon, inputs.eta, inputs.eta_hat, inputs.diameter).unwrap();

    writeln!(w, "\n# bounds").unwrap();
    writeln!(
        w,
        "T,delta,theorem1_bound,theorem2_reward_bound{},theorem3_floor,theorem3_floor_untimed",
        idx("theorem2_cost_bound")
    )
    .unwrap();
    match theorem_bounds(&inputs) {
        Ok(b) => writeln!(
            w,
            "{},{},{},{}{},{},{}",
            b.horizon,
            b.delta,
            b.theorem1_bound,
            b.theorem2_reward_bound,
            list(&b.theorem2_cost_bounds),
            b.theorem3_floor,
            b.theorem3_floor_untimed
        )
        .unwrap(),
        Err(e) => writeln!(w, "# unavailable: {e}").unwrap(),
    }
    emit(&text, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}
