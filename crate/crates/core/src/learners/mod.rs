//! Learning algorithms behind a common act/observe interface.
//!
//! Every learner is told the reward and cost tables and the budgets (the
//! [`CmdpShape`]) but never the transition law. The one exception is
//! [`FixedPolicy`], which the harness builds from the true model to play the
//! oracle controller.

mod baseline;
mod ce;
mod optimistic;
mod tts;
mod ucrl;

pub use baseline::{FixedPolicy, UniformLearner};
pub use ce::CertaintyEquivalence;
pub use optimistic::{plan_optimistic, OptimisticPlan};
pub use tts::{TwoTimescale, TtsParams};
pub use ucrl::UcrlCmdp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::check_delta;
use crate::model::{solve_cmdp, sr_policy, Cmdp, CmdpShape, OccupationMeasure, StationaryPolicy, Transitions};

/// Largest admissible regret budget; `b_i = 34` means no tightening.
pub const MAX_REGRET_BUDGET: f64 = 34.0;

/// The act/observe contract shared by all learners.
pub trait Learner: Send {
    fn name(&self) -> &str;

    /// Chooses the action for state `s`, consuming one random draw.
    fn act(&mut self, s: usize) -> Result<usize>;

    /// Feeds back the transition that followed the last action.
    fn observe(&mut self, s: usize, a: usize, s_next: usize) -> Result<()>;

    /// Episodes started so far (zero for learners without episodes).
    fn episodes(&self) -> &[EpisodeRecord] {
        &[]
    }
}

/// What every learner is initialized with.
#[derive(Debug, Clone)]
pub struct LearnerContext {
    pub shape: CmdpShape,
    pub horizon: u64,
    pub delta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub k: usize,
    pub tau_k: u64,
    pub feasible: bool,
}

/// The controller and bookkeeping for one episode of an optimistic learner.
#[derive(Debug, Clone)]
pub struct EpisodePlan {
    pub k: usize,
    pub tau_k: u64,
    pub mu_tilde: OccupationMeasure,
    pub p_tilde: Transitions,
    /// `SR(μ̃)` when feasible, uniform otherwise.
    pub policy: StationaryPolicy,
    /// Visits within this episode.
    pub n_k: Vec<Vec<u64>>,
    /// `N_{τ_k}(s,a)`.
    pub n_snapshot: Vec<Vec<u64>>,
    pub feasible: bool,
}

impl EpisodePlan {
    /// Draws an action from one uniform `u ∈ [0,1)`: with probability
    /// `gamma` uniformly at random, otherwise from the plan's policy. An
    /// infeasible plan plays uniformly.
    pub fn choose(&self, s: usize, u: f64, gamma: f64) -> usize {
        let n_actions = self.policy.pi[s].len();
        let uniform = |v: f64| ((v * n_actions as f64) as usize).min(n_actions - 1);
        if !self.feasible {
            uniform(u)
        } else if u < gamma {
            uniform(u / gamma)
        } else {
            self.policy.sample(s, (u - gamma) / (1.0 - gamma))
        }
    }
}

/// Doubling criterion for the pair just visited.
pub fn episode_should_end(plan: &EpisodePlan, s: usize, a: usize) -> bool {
    doubling_reached(&plan.n_k, &plan.n_snapshot, s, a)
}

pub(crate) fn doubling_reached(n_k: &[Vec<u64>], snapshot: &[Vec<u64>], s: usize, a: usize) -> bool {
    n_k[s][a] >= snapshot[s][a].max(1)
}

/// Desired cost-regret levels `b_i ∈ [0, 34]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RegretBudgets(Vec<f64>);

impl RegretBudgets {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        for (index, &value) in b.iter().enumerate() {
            if !(0.0..=MAX_REGRET_BUDGET).contains(&value) {
                return Err(Error::InvalidBudget { index, value });
            }
        }
        Ok(Self(b))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for RegretBudgets {
    type Error = Error;
    fn try_from(b: Vec<f64>) -> Result<Self> {
        Self::new(b)
    }
}

impl From<RegretBudgets> for Vec<f64> {
    fn from(b: RegretBudgets) -> Self {
        b.0
    }
}

/// `S·sqrt(A·T^1.5·ln(T/δ))`, the common factor of the regret bounds.
pub fn regret_scale(n_states: usize, n_actions: usize, horizon: f64, delta: f64) -> f64 {
    n_states as f64 * (n_actions as f64 * horizon.powf(1.5) * (horizon / delta).ln()).sqrt()
}

/// Constraint tightening `d_i = (34 − b_i)/T · S·sqrt(A·T^1.5·ln(T/δ))`.
///
/// Fails when some tightened threshold `c_ub_i − d_i` is not positive.
pub fn modified_budgets_to_tighten(
    budgets: &RegretBudgets,
    n_states: usize,
    n_actions: usize,
    horizon: u64,
    delta: f64,
    c_ub: &[f64],
) -> Result<Vec<f64>> {
    check_delta(delta)?;
    if budgets.0.len() != c_ub.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} budgets for {} costs",
            budgets.0.len(),
            c_ub.len()
        )));
    }
    let t = horizon as f64;
    let scale = regret_scale(n_states, n_actions, t, delta) / t;
    let d: Vec<f64> = budgets.0.iter().map(|b| (MAX_REGRET_BUDGET - b) * scale).collect();
    for (index, (ub, di)) in c_ub.iter().zip(&d).enumerate() {
        if ub - di <= 0.0 {
            return Err(Error::BudgetTooTight {
                index,
                threshold: ub - di,
            });
        }
    }
    Ok(d)
}

/// `γ = T^{-1/4}`.
pub fn exploration_rate(horizon: u64) -> f64 {
    (horizon as f64).powf(-0.25)
}

/// Learner selection, as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LearnerSpec {
    UcrlCmdp {
        /// Explicit constraint tightening `d`, bypassing the budget formula.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tighten: Option<Vec<f64>>,
        /// Overrides `γ = T^{-1/4}`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exploration: Option<f64>,
    },
    ModifiedUcrlCmdp {
        budgets: RegretBudgets,
    },
    Ce {
        #[serde(default)]
        per_step: bool,
    },
    Tts {
        #[serde(default = "TtsParams::default_lambda_max")]
        lambda_max: f64,
        #[serde(default = "TtsParams::default_u0")]
        u0: f64,
    },
    Uniform,
    Oracle,
}

impl LearnerSpec {
    pub const NAMES: [&'static str; 6] = [
        "ucrl-cmdp",
        "modified-ucrl-cmdp",
        "ce",
        "tts",
        "uniform",
        "oracle",
    ];

    pub fn ucrl() -> Self {
        Self::UcrlCmdp {
            tighten: None,
            exploration: None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::UcrlCmdp { .. } => "ucrl-cmdp",
            Self::ModifiedUcrlCmdp { .. } => "modified-ucrl-cmdp",
            Self::Ce { .. } => "ce",
            Self::Tts { .. } => "tts",
            Self::Uniform => "uniform",
            Self::Oracle => "oracle",
        }
    }

    /// Default hyperparameters for a learner name.
    pub fn from_name(name: &str, n_costs: usize) -> Option<Self> {
        Some(match name {
            "ucrl-cmdp" => Self::ucrl(),
            "modified-ucrl-cmdp" => Self::ModifiedUcrlCmdp {
                budgets: RegretBudgets(vec![MAX_REGRET_BUDGET; n_costs]),
            },
            "ce" => Self::Ce { per_step: false },
            "tts" => Self::Tts {
                lambda_max: TtsParams::default_lambda_max(),
                u0: TtsParams::default_u0(),
            },
            "uniform" => Self::Uniform,
            "oracle" => Self::Oracle,
            _ => return None,
        })
    }

    /// Instantiates the learner. Only the oracle reads `truth`.
    pub fn build(&self, ctx: &LearnerContext, truth: &Cmdp) -> Result<Box<dyn Learner>> {
        Ok(match self {
            Self::UcrlCmdp {
                tighten,
                exploration,
            } => {
                let mut l = match tighten {
                    Some(d) => UcrlCmdp::with_tightening(ctx, d.clone())?,
                    None => UcrlCmdp::new(ctx)?,
                };
                if let Some(g) = exploration {
                    l.set_exploration(*g)?;
                }
                Box::new(l)
            }
            Self::ModifiedUcrlCmdp { budgets } => Box::new(UcrlCmdp::modified(ctx, budgets)?),
            Self::Ce { per_step } => Box::new(CertaintyEquivalence::new(ctx, *per_step)?),
            Self::Tts { lambda_max, u0 } => Box::new(TwoTimescale::new(
                ctx,
                TtsParams {
                    lambda_max: *lambda_max,
                    u0: *u0,
                },
            )?),
            Self::Uniform => Box::new(UniformLearner::new(ctx)),
            Self::Oracle => {
                let sol = solve_cmdp(truth)?;
                if !sol.feasible {
                    return Err(Error::OracleInfeasible);
                }
                Box::new(FixedPolicy::new(ctx, "oracle", sr_policy(&sol.mu_star, 0)))
            }
        })
    }
}
