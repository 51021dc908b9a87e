//! Self-checks of the numerical core against independent oracles.
//!
//! Each check draws its own instances from a fixed seed and compares the
//! library against a brute-force or closed-form answer. Tolerances are
//! multiplied by [`VerifyOptions::tolerance_scale`].

use cmdplab_lp::{solve_lp, LpProblem};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    bias_check, dual_certificate, eta_values, feasibility_boundary, mixing_check,
    perturbation_residual,
};
use crate::chain;
use crate::error::{Error, Result};
use crate::estimation::{ConfidenceSet, TransitionCounts};
use crate::learners::plan_optimistic;
use crate::model::{average_values, solve_cmdp, Cmdp, StationaryPolicy};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub tolerance_scale: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            tolerance_scale: 1.0,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type CheckFn = fn(&VerifyOptions, &mut ChaCha8Rng) -> Result<(bool, String)>;

pub const CHECKS: &[(&str, CheckFn)] = &[
    ("lp-oracle", lp_oracle),
    ("cmdp-brute-force", cmdp_brute_force),
    ("duality-gap", duality_gap),
    ("lagrange-bound", lagrange_bound),
    ("budget-sensitivity", budget_sensitivity),
    ("perturbation", perturbation),
    ("poisson", poisson),
    ("mixing", mixing),
    ("optimism", optimism),
    ("feasibility-boundary", boundary),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs the selected checks (all when `only` is empty) in suite order.
pub fn run_checks(only: &[String], opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
    if !(opts.tolerance_scale >= 0.0 && opts.tolerance_scale.is_finite()) {
        return Err(Error::InvalidInputs(format!(
            "tolerance scale {} must be finite and non-negative",
            opts.tolerance_scale
        )));
    }
    if let Some(bad) = only.iter().find(|n| !check_names().contains(&n.as_str())) {
        return Err(Error::InvalidInputs(format!(
            "unknown check `{bad}`; available: {}",
            check_names().join(", ")
        )));
    }
    Ok(CHECKS
        .iter()
        .enumerate()
        .filter(|(_, (name, _))| only.is_empty() || only.iter().any(|o| o == name))
        .map(|(k, (name, f))| {
            let mut rng = rng::stream(opts.seed, 100 + k as u64);
            match f(opts, &mut rng) {
                Ok((passed, detail)) => CheckOutcome { name, passed, detail },
                Err(e) => CheckOutcome {
                    name,
                    passed: false,
                    detail: format!("error: {e}"),
                },
            }
        })
        .collect())
}

fn stochastic_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

pub fn random_chain(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| stochastic_row(rng, n)).collect();
    chain::from_rows(&rows)
}

/// Dense random CMDP with one cost whose budget sits a random margin in
/// `[0.02, 0.3]` above the smallest achievable average cost, so it is
/// strictly feasible.
pub fn random_cmdp(rng: &mut ChaCha8Rng, n_states: usize, n_actions: usize) -> Result<Cmdp> {
    let p = (0..n_states)
        .map(|_| (0..n_actions).map(|_| stochastic_row(rng, n_states)).collect())
        .collect();
    let mut table = || -> Vec<Vec<f64>> {
        (0..n_states)
            .map(|_| (0..n_actions).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect()
    };
    let r = table();
    let c = table();
    let mut cmdp = Cmdp::new(p, r, vec![c], vec![1.0])?;
    let min_cost = crate::analysis::min_average_cost(&cmdp, 0)?;
    cmdp.c_ub[0] = min_cost + rng.gen_range(0.02..0.3);
    Ok(cmdp)
}

/// Maximum of `c·x` over `{A x <= b, x >= 0}` by enumerating every basic
/// point. Only for tiny bounded problems.
pub fn vertex_enumeration(objective: &[f64], rows: &[(Vec<f64>, f64)]) -> Option<f64> {
    let n = objective.len();
    let mut all: Vec<(Vec<f64>, f64)> = rows.to_vec();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        all.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let a = DMatrix::from_fn(n, n, |i, j| all[pick[i]].0[j]);
        let b = DVector::from_fn(n, |i, _| all[pick[i]].1);
        if let Some(x) = a.lu().solve(&b) {
            let ok = all
                .iter()
                .all(|(row, rhs)| row.iter().zip(x.iter()).map(|(u, v)| u * v).sum::<f64>() <= rhs + 1e-9);
            if ok && x.iter().all(|v| v.is_finite()) {
                let val: f64 = objective.iter().zip(x.iter()).map(|(u, v)| u * v).sum();
                best = Some(best.map_or(val, |b: f64| b.max(val)));
            }
        }
        // next n-combination of all.len()
        let m = all.len();
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < m - n + i {
                pick[i] += 1;
                for k in i + 1..n {
                    pick[k] = pick[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn lp_oracle(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let tol = 1e-7 * opts.tolerance_scale;
    let mut worst: f64 = 0.0;
    for _ in 0..60 {
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=5);
        let objective: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut lp = LpProblem::new(objective.clone());
        let mut rows = Vec::new();
        for _ in 0..m {
            let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rhs = rng.gen_range(0.5..2.0);
            lp.add_le(row.clone(), rhs);
            rows.push((row, rhs));
        }
        lp.add_le(vec![1.0; n], 10.0);
        rows.push((vec![1.0; n], 10.0));
        let sol = solve_lp(&lp)?;
        let oracle = vertex_enumeration(&objective, &rows).expect("origin is feasible");
        if !sol.is_optimal() {
            return Ok((false, format!("solver reported {:?} on a bounded feasible LP", sol.status)));
        }
        worst = worst.max((sol.objective_value - oracle).abs());
    }
    Ok((worst <= tol, format!("60 LPs, max |solver − vertices| = {worst:.2e}")))
}

fn cmdp_brute_force(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let tol = 5e-3 * opts.tolerance_scale;
    let mut worst: f64 = 0.0;
    for _ in 0..8 {
        let cmdp = random_cmdp(rng, 2, 2)?;
        let exact = solve_cmdp(&cmdp)?;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=50 {
            for j in 0..=50 {
                let (u, v) = (i as f64 / 50.0, j as f64 / 50.0);
                let pi = StationaryPolicy::new(vec![vec![u, 1.0 - u], vec![v, 1.0 - v]])?;
                let vals = average_values(&cmdp, &pi)?;
                if vals.costs[0] <= cmdp.c_ub[0] {
                    best = best.max(vals.reward);
                }
            }
        }
        if best > exact.r_star + 1e-9 {
            return Ok((false, format!("grid {best} beats LP {}", exact.r_star)));
        }
        worst = worst.max(exact.r_star - best);
    }
    Ok((worst <= tol, format!("8 instances, max LP − grid = {worst:.2e}")))
}

fn strictly_feasible_instances(rng: &mut ChaCha8Rng, count: usize) -> Result<Vec<Cmdp>> {
    (0..count)
        .map(|k| random_cmdp(rng, 2 + k % 3, 2))
        .collect()
}

fn duality_gap(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for cmdp in strictly_feasible_instances(rng, 30)? {
        worst = worst.max(dual_certificate(&cmdp)?.gap);
    }
    Ok((worst < 1e-6 * opts.tolerance_scale, format!("30 instances, max gap = {worst:.2e}")))
}

fn lagrange_bound(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = f64::NEG_INFINITY;
    for cmdp in strictly_feasible_instances(rng, 30)? {
        let cert = dual_certificate(&cmdp)?;
        let (eta, eta_hat) = eta_values(&cmdp, 0.0)?;
        let sum: f64 = cert.lambda_star.iter().sum();
        worst = worst.max(sum - eta_hat / eta);
    }
    Ok((
        worst <= 1e-6 * opts.tolerance_scale,
        format!("30 instances, max Σλ* − η̂/η = {worst:.2e}"),
    ))
}

fn budget_sensitivity(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = f64::NEG_INFINITY;
    for cmdp in strictly_feasible_instances(rng, 30)? {
        let (slack, eta_hat) = eta_values(&cmdp, 0.0)?;
        let eps = 0.5 * slack;
        let cut = rng.gen_range(0.0..=eps);
        let reduced = cmdp.with_budgets(vec![cmdp.c_ub[0] - cut])?;
        let drop = solve_cmdp(&cmdp)?.r_star - solve_cmdp(&reduced)?.r_star;
        worst = worst.max(drop - cut * eta_hat / (slack - eps));
    }
    Ok((
        worst <= 1e-6 * opts.tolerance_scale,
        format!("30 instances, max excess over bound = {worst:.2e}"),
    ))
}

fn perturbation(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = random_chain(rng, 5);
        let q = random_chain(rng, 5);
        worst = worst.max(perturbation_residual(&p, &q)?);
    }
    Ok((worst < 1e-8 * opts.tolerance_scale, format!("100 pairs, max residual = {worst:.2e}")))
}

fn poisson(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (mut worst_res, mut worst_env): (f64, f64) = (0.0, f64::NEG_INFINITY);
    let mut stated_violations = 0;
    for _ in 0..100 {
        let cmdp = random_cmdp(rng, 5, 1)?;
        let chk = bias_check(&cmdp, &StationaryPolicy::uniform(5, 1))?;
        worst_res = worst_res.max(chk.poisson_residual);
        worst_env = worst_env.max(chk.max_abs_bias - chk.mixing_bound);
        stated_violations += usize::from(chk.max_abs_bias > chk.stated_bound);
    }
    Ok((
        worst_res < 1e-8 * opts.tolerance_scale && worst_env <= 1e-9 * opts.tolerance_scale,
        format!(
            "100 chains, max residual = {worst_res:.2e}, max |v| − span·t0/ρ = {worst_env:.2e}, \
             max|r|·t0/(1−ρ) exceeded on {stated_violations}"
        ),
    ))
}

fn mixing(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = f64::INFINITY;
    for k in 0..50 {
        let p = random_chain(rng, 2 + k % 4);
        worst = worst.min(mixing_check(&p, 200)?.worst_margin);
    }
    Ok((
        worst >= -1e-12 * opts.tolerance_scale,
        format!("50 chains, t <= 200, min margin = {worst:.2e}"),
    ))
}

fn optimism(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let tol = 1e-6 * opts.tolerance_scale;
    let (mut checked, mut violations, mut attempts) = (0, 0, 0);
    while checked < 100 && attempts < 1000 {
        attempts += 1;
        let cmdp = random_cmdp(rng, 2 + attempts % 2, 2)?;
        let steps = rng.gen_range(20..2000);
        let mut counts = TransitionCounts::new(cmdp.n_states, cmdp.n_actions);
        let mut s = 0;
        for _ in 0..steps {
            let a = rng.gen_range(0..cmdp.n_actions);
            let u: f64 = rng.gen();
            let row = &cmdp.p[s][a];
            let mut acc = 0.0;
            let mut next = row.len() - 1;
            for (k, q) in row.iter().enumerate() {
                acc += q;
                if u < acc {
                    next = k;
                    break;
                }
            }
            counts.record(s, a, next)?;
            s = next;
        }
        let cset = ConfidenceSet::from_counts(&counts, 0.05)?;
        if !cset.contains(&cmdp.p)? {
            continue;
        }
        checked += 1;
        let plan = plan_optimistic(&cset, &cmdp.shape(), &[0.0])?;
        let r_star = solve_cmdp(&cmdp)?.r_star;
        let ok = plan.feasible
            && plan.objective >= r_star - tol
            && plan.planned_costs[0] <= cmdp.c_ub[0] + tol;
        violations += usize::from(!ok);
    }
    Ok((
        checked == 100 && violations == 0,
        format!("{checked} snapshots containing the truth, {violations} violations"),
    ))
}

fn boundary(opts: &VerifyOptions, _rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
    let pts = feasibility_boundary(|th| Cmdp::two_state(th, 0.5), &grid)?;
    let worst = pts
        .iter()
        .map(|pt| {
            let y = if pt.param >= 0.5 { 1.0 / (1.0 + 2.0 * pt.param) } else { 0.5 };
            (pt.min_cost - y).abs()
        })
        .fold(0.0, f64::max);
    Ok((worst <= 1e-6 * opts.tolerance_scale, format!("21 points, max deviation = {worst:.2e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_enumeration_small_cases() {
        // max x + y s.t. x <= 1, y <= 2
        let rows = vec![(vec![1.0, 0.0], 1.0), (vec![0.0, 1.0], 2.0)];
        assert_eq!(vertex_enumeration(&[1.0, 1.0], &rows), Some(3.0));
        // infeasible: x <= -1
        assert_eq!(vertex_enumeration(&[1.0], &[(vec![1.0], -1.0)]), None);
    }

    #[test]
    fn unknown_check_rejected() {
        let err = run_checks(&["nope".into()], &VerifyOptions::default()).unwrap_err();
        assert!(err.to_string().contains("lp-oracle"));
        assert!(run_checks(&[], &VerifyOptions { tolerance_scale: -1.0, seed: 0 }).is_err());
    }

    #[test]
    fn fast_checks_pass_and_zero_tolerance_fails() {
        let only: Vec<String> = ["lp-oracle", "perturbation", "feasibility-boundary"]
            .map(String::from)
            .to_vec();
        let out = run_checks(&only, &VerifyOptions::default()).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|o| o.passed), "{out:?}");
        let strict = VerifyOptions {
            tolerance_scale: 0.0,
            ..Default::default()
        };
        let out = run_checks(&only[1..2], &strict).unwrap();
        assert!(!out[0].passed);
    }
}
