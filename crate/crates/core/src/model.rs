//! Tabular constrained MDPs, stationary policies and occupation measures.
//!
//! States and actions are zero-based. The occupation-measure LP used
//! throughout maximizes `Σ μ(s,a) r(s,a)` over the polytope
//!
//! ```text
//! Σ_{s,a} μ(s,a) = 1
//! Σ_a μ(s,a) = Σ_{s',b} μ(s',b) p(s',b,s)      for every s
//! Σ_{s,a} μ(s,a) c_i(s,a) <= c_ub_i            for every cost i
//! μ >= 0
//! ```
//!
//! and the optimal randomized controller is recovered by normalizing μ per
//! state (see [`sr_policy`]).

use std::path::Path;

use cmdplab_lp::{solve_lp, LpProblem, LpSolution};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain;
use crate::error::{Error, Result};

/// Transition tensor indexed `p[s][a][s']`.
pub type Transitions = Vec<Vec<Vec<f64>>>;

/// Tolerance on transition-row and policy-row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance on occupation-measure total mass and flow balance.
pub const MEASURE_TOL: f64 = 1e-9;
/// Hitting-time value beyond which the diameter iteration gives up.
pub const HITTING_TIME_CAP: f64 = 1e9;
/// Fixed-point tolerance of the hitting-time value iteration.
pub const HITTING_TIME_TOL: f64 = 1e-9;

/// Everything about a CMDP except its transition law: what a learner is told.
#[derive(Debug, Clone, PartialEq)]
pub struct CmdpShape {
    pub n_states: usize,
    pub n_actions: usize,
    /// `r[s][a]`
    pub r: Vec<Vec<f64>>,
    /// `c[i][s][a]`
    pub c: Vec<Vec<Vec<f64>>>,
    pub c_ub: Vec<f64>,
}

impl CmdpShape {
    pub fn n_costs(&self) -> usize {
        self.c.len()
    }

    /// Largest absolute reward or cost entry.
    pub fn max_abs_entry(&self) -> f64 {
        self.r
            .iter()
            .flatten()
            .chain(self.c.iter().flatten().flatten())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn with_transitions(&self, p: Transitions) -> Result<Cmdp> {
        Cmdp::new(p, self.r.clone(), self.c.clone(), self.c_ub.clone())
    }
}

/// A tabular CMDP instance.
///
/// Serialized as JSON with the fields `S`, `A`, `M`, `p`, `r`, `c`, `c_ub`;
/// see `docs/cmdp-format.md`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CmdpFile", into = "CmdpFile")]
pub struct Cmdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub p: Transitions,
    pub r: Vec<Vec<f64>>,
    pub c: Vec<Vec<Vec<f64>>>,
    pub c_ub: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CmdpFile {
    #[serde(rename = "S")]
    s: usize,
    #[serde(rename = "A")]
    a: usize,
    #[serde(rename = "M")]
    m: usize,
    p: Transitions,
    r: Vec<Vec<f64>>,
    c: Vec<Vec<Vec<f64>>>,
    c_ub: Vec<f64>,
}

impl TryFrom<CmdpFile> for Cmdp {
    type Error = Error;

    fn try_from(f: CmdpFile) -> Result<Self> {
        let cmdp = Cmdp::new(f.p, f.r, f.c, f.c_ub)?;
        if cmdp.n_states != f.s || cmdp.n_actions != f.a || cmdp.n_costs() != f.m {
            return Err(Error::InvalidModel(format!(
                "declared S={}, A={}, M={} but tables have S={}, A={}, M={}",
                f.s,
                f.a,
                f.m,
                cmdp.n_states,
                cmdp.n_actions,
                cmdp.n_costs()
            )));
        }
        Ok(cmdp)
    }
}

impl From<Cmdp> for CmdpFile {
    fn from(c: Cmdp) -> Self {
        CmdpFile {
            s: c.n_states,
            a: c.n_actions,
            m: c.c.len(),
            p: c.p,
            r: c.r,
            c: c.c,
            c_ub: c.c_ub,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidModel(msg.into())
}

impl Cmdp {
    pub fn new(
        p: Transitions,
        r: Vec<Vec<f64>>,
        c: Vec<Vec<Vec<f64>>>,
        c_ub: Vec<f64>,
    ) -> Result<Self> {
        let n_states = p.len();
        if n_states == 0 {
            return Err(invalid("at least one state is required"));
        }
        let n_actions = p[0].len();
        if n_actions == 0 {
            return Err(invalid("at least one action is required"));
        }
        for (s, rows) in p.iter().enumerate() {
            if rows.len() != n_actions {
                return Err(invalid(format!("p[{s}] has {} actions", rows.len())));
            }
            for (a, row) in rows.iter().enumerate() {
                check_distribution(row, n_states)
                    .map_err(|e| invalid(format!("p[{s}][{a}]: {e}")))?;
            }
        }
        check_table(&r, n_states, n_actions).map_err(|e| invalid(format!("r: {e}")))?;
        if c.len() != c_ub.len() {
            return Err(invalid(format!(
                "{} cost tables but {} budgets",
                c.len(),
                c_ub.len()
            )));
        }
        for (i, table) in c.iter().enumerate() {
            check_table(table, n_states, n_actions).map_err(|e| invalid(format!("c[{i}]: {e}")))?;
        }
        if c_ub.iter().any(|v| !v.is_finite()) {
            return Err(invalid("c_ub has a non-finite entry"));
        }
        Ok(Self {
            n_states,
            n_actions,
            p,
            r,
            c,
            c_ub,
        })
    }

    /// The two-state, two-action example: from state 0, action 0 moves to
    /// state 1 with probability `theta`; every other transition is a fair
    /// coin. Reward and cost depend on the state only: `r = (2, 1)`,
    /// `c = (1, 0)`.
    pub fn two_state(theta: f64, c_ub: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(invalid(format!("theta = {theta} outside [0, 1]")));
        }
        let coin = vec![0.5, 0.5];
        Self::new(
            vec![
                vec![vec![1.0 - theta, theta], coin.clone()],
                vec![coin.clone(), coin],
            ],
            vec![vec![2.0, 2.0], vec![1.0, 1.0]],
            vec![vec![vec![1.0, 1.0], vec![0.0, 0.0]]],
            vec![c_ub],
        )
    }

    pub fn n_costs(&self) -> usize {
        self.c.len()
    }

    pub fn shape(&self) -> CmdpShape {
        CmdpShape {
            n_states: self.n_states,
            n_actions: self.n_actions,
            r: self.r.clone(),
            c: self.c.clone(),
            c_ub: self.c_ub.clone(),
        }
    }

    pub fn with_budgets(&self, c_ub: Vec<f64>) -> Result<Self> {
        Self::new(self.p.clone(), self.r.clone(), self.c.clone(), c_ub)
    }

    /// State-to-state transition matrix under `pi`.
    pub fn induced_chain(&self, pi: &StationaryPolicy) -> DMatrix<f64> {
        let n = self.n_states;
        DMatrix::from_fn(n, n, |s, t| {
            (0..self.n_actions).map(|a| pi.pi[s][a] * self.p[s][a][t]).sum()
        })
    }

    /// Per-state expectation of `table[s][a]` under `pi`.
    pub fn induced_values(&self, pi: &StationaryPolicy, table: &[Vec<f64>]) -> DVector<f64> {
        DVector::from_fn(self.n_states, |s, _| {
            (0..self.n_actions).map(|a| pi.pi[s][a] * table[s][a]).sum()
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("Cmdp serialization is infallible")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }

    fn check_policy(&self, pi: &StationaryPolicy) -> Result<()> {
        if pi.n_states() != self.n_states || pi.pi.iter().any(|row| row.len() != self.n_actions) {
            return Err(Error::DimensionMismatch(format!(
                "policy is {}x{}, model is {}x{}",
                pi.n_states(),
                pi.pi.first().map_or(0, Vec::len),
                self.n_states,
                self.n_actions
            )));
        }
        Ok(())
    }
}

fn check_distribution(row: &[f64], n: usize) -> std::result::Result<(), String> {
    if row.len() != n {
        return Err(format!("length {} != {n}", row.len()));
    }
    if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err("entry outside [0, 1]".into());
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(format!("sums to {sum}"));
    }
    Ok(())
}

fn check_table(t: &[Vec<f64>], n_states: usize, n_actions: usize) -> std::result::Result<(), String> {
    if t.len() != n_states || t.iter().any(|row| row.len() != n_actions) {
        return Err(format!("expected a {n_states}x{n_actions} table"));
    }
    if t.iter().flatten().any(|v| !v.is_finite()) {
        return Err("non-finite entry".into());
    }
    Ok(())
}

/// A randomized stationary controller `pi[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    pub pi: Vec<Vec<f64>>,
}

impl StationaryPolicy {
    pub fn new(pi: Vec<Vec<f64>>) -> Result<Self> {
        let n_actions = pi.first().map_or(0, Vec::len);
        for (s, row) in pi.iter().enumerate() {
            check_distribution(row, n_actions)
                .map_err(|e| invalid(format!("policy row {s}: {e}")))?;
        }
        Ok(Self { pi })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            pi: vec![vec![1.0 / n_actions as f64; n_actions]; n_states],
        }
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        Self {
            pi: actions
                .iter()
                .map(|&a| {
                    let mut row = vec![0.0; n_actions];
                    row[a] = 1.0;
                    row
                })
                .collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.pi.len()
    }

    /// Inverse-CDF draw from `pi[s][·]` given `u ∈ [0, 1)`.
    pub fn sample(&self, s: usize, u: f64) -> usize {
        let row = &self.pi[s];
        let mut acc = 0.0;
        for (a, &w) in row.iter().enumerate() {
            acc += w;
            if u < acc {
                return a;
            }
        }
        // u landed in the rounding gap above the accumulated mass
        row.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }
}

/// Long-run state-action frequencies `mu[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationMeasure {
    pub mu: Vec<Vec<f64>>,
}

impl OccupationMeasure {
    pub fn new(mu: Vec<Vec<f64>>) -> Result<Self> {
        if mu.iter().flatten().any(|&v| !(v >= 0.0)) {
            return Err(invalid("occupation measure has a negative entry"));
        }
        let total: f64 = mu.iter().flatten().sum();
        if (total - 1.0).abs() > MEASURE_TOL {
            return Err(invalid(format!("occupation measure sums to {total}")));
        }
        Ok(Self { mu })
    }

    /// Reshapes a flat LP solution, clipping round-off negatives.
    pub(crate) fn from_flat(x: &[f64], n_states: usize, n_actions: usize) -> Self {
        Self {
            mu: (0..n_states)
                .map(|s| (0..n_actions).map(|a| x[s * n_actions + a].max(0.0)).collect())
                .collect(),
        }
    }

    pub fn total(&self) -> f64 {
        self.mu.iter().flatten().sum()
    }

    pub fn state_mass(&self, s: usize) -> f64 {
        self.mu[s].iter().sum()
    }

    /// `Σ μ(s,a) table[s][a]`.
    pub fn expectation(&self, table: &[Vec<f64>]) -> f64 {
        self.mu
            .iter()
            .zip(table)
            .map(|(m, t)| m.iter().zip(t).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    /// Largest violation of the flow-balance equations under `p`.
    pub fn flow_residual(&self, p: &Transitions) -> f64 {
        let n = self.mu.len();
        (0..n)
            .map(|s| {
                let out = self.state_mass(s);
                let inflow: f64 = (0..n)
                    .map(|t| {
                        self.mu[t]
                            .iter()
                            .enumerate()
                            .map(|(b, m)| m * p[t][b][s])
                            .sum::<f64>()
                    })
                    .sum();
                (out - inflow).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Optimal value and dual information of the occupation-measure LP.
#[derive(Debug, Clone, PartialEq)]
pub struct CmdpSolution {
    pub feasible: bool,
    /// Meaningful only when `feasible`.
    pub mu_star: OccupationMeasure,
    /// NaN when infeasible.
    pub r_star: f64,
    pub c_star: Vec<f64>,
    /// Multipliers of the cost rows.
    pub lambda_star: Vec<f64>,
}

impl CmdpSolution {
    fn infeasible(n_states: usize, n_actions: usize, n_costs: usize) -> Self {
        Self {
            feasible: false,
            mu_star: OccupationMeasure {
                mu: vec![vec![0.0; n_actions]; n_states],
            },
            r_star: f64::NAN,
            c_star: vec![f64::NAN; n_costs],
            lambda_star: vec![f64::NAN; n_costs],
        }
    }
}

#[inline]
pub(crate) fn sa_index(s: usize, a: usize, n_actions: usize) -> usize {
    s * n_actions + a
}

/// LP over `μ(s,a)` (plus `extra_vars` trailing variables) carrying the
/// normalization row (equality row 0) and the flow rows (equality rows
/// `1..=S`). Callers add objective terms and cost rows.
pub(crate) fn occupation_lp(
    p: &Transitions,
    n_states: usize,
    n_actions: usize,
    extra_vars: usize,
) -> LpProblem {
    let nv = n_states * n_actions + extra_vars;
    let mut lp = LpProblem::new(vec![0.0; nv]);
    let mut total = vec![0.0; nv];
    total[..n_states * n_actions].fill(1.0);
    lp.add_eq(total, 1.0);
    for s in 0..n_states {
        let mut row = vec![0.0; nv];
        for t in 0..n_states {
            for b in 0..n_actions {
                row[sa_index(t, b, n_actions)] -= p[t][b][s];
            }
        }
        for a in 0..n_actions {
            row[sa_index(s, a, n_actions)] += 1.0;
        }
        lp.add_eq(row, 0.0);
    }
    lp
}

pub(crate) fn flatten(table: &[Vec<f64>]) -> impl Iterator<Item = f64> + '_ {
    table.iter().flatten().copied()
}

/// `SR(μ)`: normalize each state's row of `mu`; rows with no mass play
/// `fallback_action` deterministically.
pub fn sr_policy(mu: &OccupationMeasure, fallback_action: usize) -> StationaryPolicy {
    let pi = mu
        .mu
        .iter()
        .map(|row| {
            let mass: f64 = row.iter().sum();
            if mass > 0.0 {
                row.iter().map(|v| v / mass).collect()
            } else {
                let mut r = vec![0.0; row.len()];
                r[fallback_action] = 1.0;
                r
            }
        })
        .collect();
    StationaryPolicy { pi }
}

/// Long-run average reward and costs of a stationary policy.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageValues {
    pub reward: f64,
    pub costs: Vec<f64>,
}

pub fn average_values(cmdp: &Cmdp, pi: &StationaryPolicy) -> Result<AverageValues> {
    let mu = occupation_of_policy(cmdp, pi)?;
    Ok(AverageValues {
        reward: mu.expectation(&cmdp.r),
        costs: cmdp.c.iter().map(|c| mu.expectation(c)).collect(),
    })
}

/// `mu[s][a] = d(s)·pi[s][a]` with `d` the stationary distribution of the
/// chain induced by `pi`.
pub fn occupation_of_policy(cmdp: &Cmdp, pi: &StationaryPolicy) -> Result<OccupationMeasure> {
    cmdp.check_policy(pi)?;
    let d = chain::stationary_distribution(&cmdp.induced_chain(pi))?;
    Ok(OccupationMeasure {
        mu: (0..cmdp.n_states)
            .map(|s| pi.pi[s].iter().map(|w| d[s] * w).collect())
            .collect(),
    })
}

/// Solves the CMDP's occupation-measure LP.
pub fn solve_cmdp(cmdp: &Cmdp) -> Result<CmdpSolution> {
    let (s, a, m) = (cmdp.n_states, cmdp.n_actions, cmdp.n_costs());
    let mut lp = occupation_lp(&cmdp.p, s, a, 0);
    lp.objective = flatten(&cmdp.r).collect();
    for (c, ub) in cmdp.c.iter().zip(&cmdp.c_ub) {
        lp.add_le(flatten(c).collect(), *ub);
    }
    let sol = solve_lp(&lp)?;
    Ok(cmdp_solution_from_lp(cmdp, &sol, m))
}

pub(crate) fn cmdp_solution_from_lp(cmdp: &Cmdp, sol: &LpSolution, n_cost_rows: usize) -> CmdpSolution {
    let (s, a) = (cmdp.n_states, cmdp.n_actions);
    if !sol.is_optimal() {
        return CmdpSolution::infeasible(s, a, cmdp.n_costs());
    }
    let mu = OccupationMeasure::from_flat(&sol.x, s, a);
    CmdpSolution {
        feasible: true,
        r_star: mu.expectation(&cmdp.r),
        c_star: cmdp.c.iter().map(|c| mu.expectation(c)).collect(),
        lambda_star: sol.dual_ineq[..n_cost_rows].to_vec(),
        mu_star: mu,
    }
}

/// `max_{s ≠ s'} min_π E[hitting time of s' from s]`.
pub fn compute_diameter(cmdp: &Cmdp) -> Result<f64> {
    let n = cmdp.n_states;
    if n == 1 {
        return Ok(0.0);
    }
    let mut diameter: f64 = 0.0;
    for target in 0..n {
        let reach = can_reach(cmdp, target);
        if let Some(from) = reach.iter().position(|r| !r) {
            return Err(Error::NotCommunicating { from, to: target });
        }
        let h = hitting_times(cmdp, target)?;
        diameter = diameter.max(h.iter().copied().fold(0.0, f64::max));
    }
    Ok(diameter)
}

/// States with a positive-probability path to `target`.
fn can_reach(cmdp: &Cmdp, target: usize) -> Vec<bool> {
    let n = cmdp.n_states;
    let mut reach = vec![false; n];
    reach[target] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for s in 0..n {
            if reach[s] {
                continue;
            }
            let hit = cmdp.p[s]
                .iter()
                .any(|row| row.iter().zip(&reach).any(|(&q, &r)| q > 0.0 && r));
            if hit {
                reach[s] = true;
                changed = true;
            }
        }
    }
    reach
}

/// Value iteration for the unit-cost shortest path to `target`.
fn hitting_times(cmdp: &Cmdp, target: usize) -> Result<Vec<f64>> {
    let n = cmdp.n_states;
    let mut h = vec![0.0; n];
    loop {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                if s == target {
                    return 0.0;
                }
                1.0 + cmdp.p[s]
                    .iter()
                    .map(|row| row.iter().zip(&h).map(|(q, v)| q * v).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let delta = next
            .iter()
            .zip(&h)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        h = next;
        if let Some(from) = h.iter().position(|&v| v > HITTING_TIME_CAP) {
            return Err(Error::NotCommunicating { from, to: target });
        }
        if delta < HITTING_TIME_TOL {
            return Ok(h);
        }
    }
}

/// Gain and bias of a stationary policy for one reward table.
#[derive(Debug, Clone, PartialEq)]
pub struct Bias {
    pub gain: f64,
    /// Normalized so that `Σ_s d(s) v(s) = 0`.
    pub v: Vec<f64>,
}

/// Solves the Poisson equation for the reward table.
pub fn compute_bias(cmdp: &Cmdp, pi: &StationaryPolicy) -> Result<Bias> {
    compute_bias_for(cmdp, pi, &cmdp.r)
}

/// Solves `g + v(s) = r_π(s) + Σ_s' P_π(s,s') v(s')` for an arbitrary
/// per-(s,a) table, e.g. one of the cost functions.
pub fn compute_bias_for(cmdp: &Cmdp, pi: &StationaryPolicy, table: &[Vec<f64>]) -> Result<Bias> {
    cmdp.check_policy(pi)?;
    let p = cmdp.induced_chain(pi);
    let d = chain::stationary_distribution(&p)?;
    chain::doeblin_constants(&p)?;
    let rv = cmdp.induced_values(pi, table);
    let n = cmdp.n_states;

    // Unknowns [v; g].
    let mut a = DMatrix::zeros(n + 1, n + 1);
    let mut b = DVector::zeros(n + 1);
    for s in 0..n {
        for t in 0..n {
            a[(s, t)] = -p[(s, t)];
        }
        a[(s, s)] += 1.0;
        a[(s, n)] = 1.0;
        b[s] = rv[s];
    }
    for t in 0..n {
        a[(n, t)] = d[t];
    }
    let x = a.lu().solve(&b).ok_or(Error::ReducibleChain)?;
    Ok(Bias {
        gain: x[n],
        v: x.iter().take(n).copied().collect(),
    })
}

/// Per-state residual of the Poisson equation at `(gain, v)`.
pub fn poisson_residual(cmdp: &Cmdp, pi: &StationaryPolicy, table: &[Vec<f64>], bias: &Bias) -> f64 {
    let p = cmdp.induced_chain(pi);
    let rv = cmdp.induced_values(pi, table);
    let v = DVector::from_column_slice(&bias.v);
    let pv = &p * &v;
    (0..cmdp.n_states)
        .map(|s| (bias.gain + v[s] - rv[s] - pv[s]).abs())
        .fold(0.0, f64::max)
}
