//! Duality certificates, regret-bound calculators and numerical checks of
//! Markov-chain identities.

use cmdplab_lp::{solve_lp, LpStatus};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chain;
use crate::error::{Error, Result};
use crate::harness::{Checkpoint, RegretTrace, RunResult};
use crate::learners::{regret_scale, MAX_REGRET_BUDGET};
use crate::model::{
    compute_bias, flatten, occupation_lp, solve_cmdp, Cmdp, OccupationMeasure, StationaryPolicy,
};

/// Minimum uniform slack for a CMDP to count as strictly feasible.
pub const STRICT_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualCertificate {
    pub lambda_star: Vec<f64>,
    pub dual_value: f64,
    pub primal_value: f64,
    pub gap: f64,
}

/// The policy maximizing `min_i (c_ub_i − c̄_i)`, with that slack.
#[derive(Debug, Clone, PartialEq)]
pub struct SlaterPoint {
    pub slack: f64,
    pub mu: OccupationMeasure,
}

/// Solves `max s` subject to `Σ μ c_i + s <= c_ub_i` over the occupation
/// polytope, with `s` free. Without costs the slack is `+∞`.
pub fn slater_point(cmdp: &Cmdp) -> Result<SlaterPoint> {
    let (ns, na) = (cmdp.n_states, cmdp.n_actions);
    let n_mu = ns * na;
    let mut lp = occupation_lp(&cmdp.p, ns, na, 2);
    if cmdp.n_costs() == 0 {
        let sol = solve_lp(&lp)?;
        return Ok(SlaterPoint {
            slack: f64::INFINITY,
            mu: OccupationMeasure::from_flat(&sol.x, ns, na),
        });
    }
    lp.objective[n_mu] = 1.0;
    lp.objective[n_mu + 1] = -1.0;
    for (c, ub) in cmdp.c.iter().zip(&cmdp.c_ub) {
        let mut row: Vec<f64> = flatten(c).collect();
        row.extend([1.0, -1.0]);
        lp.add_le(row, *ub);
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::InvalidModel(format!(
            "slack program ended {:?}",
            sol.status
        )));
    }
    Ok(SlaterPoint {
        slack: sol.x[n_mu] - sol.x[n_mu + 1],
        mu: OccupationMeasure::from_flat(&sol.x, ns, na),
    })
}

/// `D(λ) = max_π r̄_π + Σ_i λ_i (c_ub_i − c̄_{i,π})`, by LP.
pub fn dual_function(cmdp: &Cmdp, lambda: &[f64]) -> Result<f64> {
    if lambda.len() != cmdp.n_costs() {
        return Err(Error::DimensionMismatch(format!(
            "{} multipliers for {} costs",
            lambda.len(),
            cmdp.n_costs()
        )));
    }
    let (ns, na) = (cmdp.n_states, cmdp.n_actions);
    let mut lp = occupation_lp(&cmdp.p, ns, na, 0);
    let constant: f64 = lambda.iter().zip(&cmdp.c_ub).map(|(l, ub)| l * ub).sum();
    lp.objective = (0..ns)
        .flat_map(|s| (0..na).map(move |a| (s, a)))
        .map(|(s, a)| cmdp.r[s][a] - lambda.iter().zip(&cmdp.c).map(|(l, c)| l * c[s][a]).sum::<f64>())
        .collect();
    let sol = solve_lp(&lp)?;
    Ok(sol.objective_value + constant)
}

pub fn dual_certificate(cmdp: &Cmdp) -> Result<DualCertificate> {
    let slater = slater_point(cmdp)?;
    if !(slater.slack > STRICT_SLACK) {
        return Err(Error::NotStrictlyFeasible {
            slack: slater.slack,
        });
    }
    let primal = solve_cmdp(cmdp)?;
    let dual_value = dual_function(cmdp, &primal.lambda_star)?;
    Ok(DualCertificate {
        gap: (dual_value - primal.r_star).abs(),
        lambda_star: primal.lambda_star,
        dual_value,
        primal_value: primal.r_star,
    })
}

/// `(η, η̂)`: the Slater slack less the margin `epsilon`, and the reward range.
///
/// `η` may be zero or negative when the margin is not available; this is
/// reported rather than rejected. Only an infeasible CMDP is an error.
pub fn eta_values(cmdp: &Cmdp, epsilon: f64) -> Result<(f64, f64)> {
    let slack = slater_point(cmdp)?.slack;
    if slack < -STRICT_SLACK {
        return Err(Error::NotStrictlyFeasible { slack });
    }
    let (lo, hi) = cmdp
        .r
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok((slack - epsilon, hi - lo))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundInputs {
    pub horizon: f64,
    pub n_states: usize,
    pub n_actions: usize,
    pub n_costs: usize,
    pub delta: f64,
    pub eta: f64,
    pub eta_hat: f64,
    /// Regret budgets `b_i`; `None` means the unmodified learner (`b_i = 34`).
    pub budgets: Option<Vec<f64>>,
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub horizon: f64,
    pub n_states: usize,
    pub n_actions: usize,
    pub n_costs: usize,
    pub delta: f64,
    pub theorem1_bound: f64,
    pub theorem2_reward_bound: f64,
    pub theorem2_cost_bounds: Vec<f64>,
    /// `0.015·sqrt(D·S·A·T)`, the form carried through the lower-bound proof.
    pub theorem3_floor: f64,
    /// `0.015·sqrt(D·S·A)`, the form without the horizon.
    pub theorem3_floor_untimed: f64,
}

pub fn theorem_bounds(inp: &BoundInputs) -> Result<BoundReport> {
    let t = inp.horizon;
    if !(t >= 2.0) || inp.n_states == 0 || inp.n_actions == 0 {
        return Err(Error::InvalidInputs(format!(
            "need T >= 2 and non-empty state/action sets (T = {t})"
        )));
    }
    if !(inp.delta > 0.0 && inp.delta < 1.0) {
        return Err(Error::InvalidDelta(inp.delta));
    }
    if !(inp.diameter >= 0.0) {
        return Err(Error::InvalidInputs(format!("diameter {}", inp.diameter)));
    }
    let b = inp
        .budgets
        .clone()
        .unwrap_or_else(|| vec![MAX_REGRET_BUDGET; inp.n_costs]);
    if b.len() != inp.n_costs {
        return Err(Error::DimensionMismatch(format!(
            "{} budgets for {} costs",
            b.len(),
            inp.n_costs
        )));
    }
    let scale = regret_scale(inp.n_states, inp.n_actions, t, inp.delta);
    let b_min = b.iter().copied().fold(MAX_REGRET_BUDGET, f64::min);
    let extra = MAX_REGRET_BUDGET - b_min;
    // A zero extra term stays zero even when η̂/η is infinite or undefined.
    let ratio_term = if extra == 0.0 {
        0.0
    } else if inp.eta > 0.0 {
        extra * inp.eta_hat / inp.eta
    } else {
        return Err(Error::InvalidInputs(format!(
            "η = {} must be positive when budgets are reduced",
            inp.eta
        )));
    };
    let dsa = inp.diameter * (inp.n_states * inp.n_actions) as f64;
    Ok(BoundReport {
        horizon: t,
        n_states: inp.n_states,
        n_actions: inp.n_actions,
        n_costs: inp.n_costs,
        delta: inp.delta,
        theorem1_bound: MAX_REGRET_BUDGET * scale,
        theorem2_reward_bound: (MAX_REGRET_BUDGET + ratio_term) * scale,
        theorem2_cost_bounds: b.iter().map(|bi| bi * scale).collect(),
        theorem3_floor: 0.015 * (dsa * t).sqrt(),
        theorem3_floor_untimed: 0.015 * dsa.sqrt(),
    })
}

/// Anything carrying a reward regret and a cost-regret vector.
pub trait Regrets {
    fn reward_regret(&self) -> f64;
    fn cost_regret(&self) -> Vec<f64>;
}

impl Regrets for RegretTrace {
    fn reward_regret(&self) -> f64 {
        RegretTrace::reward_regret(self)
    }
    fn cost_regret(&self) -> Vec<f64> {
        RegretTrace::cost_regret(self)
    }
}

impl Regrets for Checkpoint {
    fn reward_regret(&self) -> f64 {
        self.reward_regret
    }
    fn cost_regret(&self) -> Vec<f64> {
        self.cost_regret.clone()
    }
}

impl Regrets for RunResult {
    fn reward_regret(&self) -> f64 {
        self.final_reward_regret
    }
    fn cost_regret(&self) -> Vec<f64> {
        self.final_cost_regret.clone()
    }
}

/// `Δ^R + Σ_i λ_i Δ^(i)`.
pub fn weighted_regret(trace: &impl Regrets, lambda: &[f64]) -> Result<f64> {
    let cost = trace.cost_regret();
    if cost.len() != lambda.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} multipliers for {} costs",
            lambda.len(),
            cost.len()
        )));
    }
    Ok(trace.reward_regret() + lambda.iter().zip(&cost).map(|(l, d)| l * d).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub param: f64,
    pub min_cost: f64,
    pub c_ub: f64,
    pub feasible: bool,
}

/// Smallest achievable first average cost for each member of a family.
pub fn feasibility_boundary<F>(family: F, grid: &[f64]) -> Result<Vec<BoundaryPoint>>
where
    F: Fn(f64) -> Result<Cmdp>,
{
    grid.iter()
        .map(|&param| {
            let cmdp = family(param)?;
            let min_cost = min_average_cost(&cmdp, 0)?;
            let c_ub = cmdp.c_ub[0];
            Ok(BoundaryPoint {
                param,
                min_cost,
                c_ub,
                feasible: min_cost <= c_ub,
            })
        })
        .collect()
}

/// `min_π c̄_{i,π}` over the occupation polytope.
pub fn min_average_cost(cmdp: &Cmdp, index: usize) -> Result<f64> {
    let c = cmdp
        .c
        .get(index)
        .ok_or_else(|| Error::IndexOutOfRange(format!("cost {index}")))?;
    let mut lp = occupation_lp(&cmdp.p, cmdp.n_states, cmdp.n_actions, 0);
    lp.objective = flatten(c).map(|v| -v).collect();
    Ok(-solve_lp(&lp)?.objective_value)
}

/// Max-norm residual of `P̃^∞ − P^∞ = P̃^∞ (P̃ − P) (I − P + 1·dᵀ)⁻¹`.
pub fn perturbation_residual(p: &DMatrix<f64>, p_tilde: &DMatrix<f64>) -> Result<f64> {
    let n = p.nrows();
    if p.shape() != (n, n) || p_tilde.shape() != (n, n) {
        return Err(Error::DimensionMismatch("chains must be square and equal size".into()));
    }
    let d = chain::stationary_distribution(p)?;
    let d_tilde = chain::stationary_distribution(p_tilde)?;
    let ones = DVector::from_element(n, 1.0);
    let p_inf = &ones * d.transpose();
    let p_tilde_inf = &ones * d_tilde.transpose();
    let fundamental = DMatrix::identity(n, n) - p + &p_inf;
    let z = fundamental
        .try_inverse()
        .ok_or(Error::SingularFundamentalMatrix)?;
    let rhs = &p_tilde_inf * (p_tilde - p) * z;
    Ok((p_tilde_inf - p_inf - rhs).amax())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingReport {
    pub t0: usize,
    pub rho: f64,
    /// `min_{s, t} [(1−ρ)^{⌊t/t0⌋} − TV(P^t(s,·), d)]`; non-negative iff
    /// the geometric bound holds everywhere checked.
    pub worst_margin: f64,
    pub holds: bool,
}

/// Checks `TV(P^t(s,·), d) <= (1−ρ)^{⌊t/t0⌋}` for all `s` and `1 <= t <= t_max`.
pub fn mixing_check(p: &DMatrix<f64>, t_max: usize) -> Result<MixingReport> {
    let (t0, rho) = chain::doeblin_constants(p)?;
    let d = chain::stationary_distribution(p)?;
    let d: Vec<f64> = d.iter().copied().collect();
    let n = p.nrows();
    let mut power = DMatrix::identity(n, n);
    let mut worst = f64::INFINITY;
    for t in 1..=t_max {
        power = &power * p;
        let bound = (1.0 - rho).powi((t / t0) as i32);
        for s in 0..n {
            let row: Vec<f64> = power.row(s).iter().copied().collect();
            worst = worst.min(bound - chain::total_variation(&row, &d));
        }
    }
    Ok(MixingReport {
        t0,
        rho,
        worst_margin: worst,
        holds: worst >= -1e-12,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasCheck {
    pub gain: f64,
    pub poisson_residual: f64,
    pub max_abs_bias: f64,
    pub t0: usize,
    pub rho: f64,
    /// `max|r|·t0/(1−ρ)`.
    pub stated_bound: f64,
    /// `span(r_π)·t0/ρ`, which follows from the geometric mixing bound.
    pub mixing_bound: f64,
}

/// Bias of `pi` on the reward table together with two envelopes for it.
pub fn bias_check(cmdp: &Cmdp, pi: &StationaryPolicy) -> Result<BiasCheck> {
    let bias = compute_bias(cmdp, pi)?;
    let p = cmdp.induced_chain(pi);
    let (t0, rho) = chain::doeblin_constants(&p)?;
    let r_max = cmdp.r.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let rv = cmdp.induced_values(pi, &cmdp.r);
    Ok(BiasCheck {
        gain: bias.gain,
        poisson_residual: crate::model::poisson_residual(cmdp, pi, &cmdp.r, &bias),
        max_abs_bias: bias.v.iter().fold(0.0, |m, v| m.max(v.abs())),
        t0,
        rho,
        stated_bound: r_max * t0 as f64 / (1.0 - rho),
        mixing_bound: (rv.max() - rv.min()) * t0 as f64 / rho,
    })
}
