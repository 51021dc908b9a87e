use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    episode_should_end, exploration_rate, modified_budgets_to_tighten, plan_optimistic,
    EpisodePlan, EpisodeRecord, Learner, LearnerContext, RegretBudgets,
};
use crate::error::{Error, Result};
use crate::estimation::{check_delta, ConfidenceSet, TransitionCounts};
use crate::model::{sr_policy, CmdpShape, StationaryPolicy};
use crate::rng;

/// Optimistic constrained learner with episode doubling.
///
/// At the start of each episode it solves the joint (μ, p') program against
/// the confidence set snapshot and then plays `SR(μ̃)`, mixed with uniform
/// exploration at rate `γ = T^{-1/4}`. Episodes whose program is infeasible
/// play the uniform policy. With a non-zero tightening `d` every cost budget
/// is reduced to `c_ub − d`, which is the regret-budgeted variant.
pub struct UcrlCmdp {
    name: &'static str,
    shape: CmdpShape,
    delta: f64,
    gamma: f64,
    tighten: Vec<f64>,
    counts: TransitionCounts,
    plan: Option<EpisodePlan>,
    replan: bool,
    episodes: Vec<EpisodeRecord>,
    rng: ChaCha8Rng,
}

impl UcrlCmdp {
    pub fn new(ctx: &LearnerContext) -> Result<Self> {
        let m = ctx.shape.n_costs();
        Self::build(ctx, vec![0.0; m], "ucrl-cmdp")
    }

    /// The regret-budgeted variant with `d` derived from `budgets`.
    pub fn modified(ctx: &LearnerContext, budgets: &RegretBudgets) -> Result<Self> {
        let s = &ctx.shape;
        let d = modified_budgets_to_tighten(
            budgets,
            s.n_states,
            s.n_actions,
            ctx.horizon,
            ctx.delta,
            &s.c_ub,
        )?;
        Self::build(ctx, d, "modified-ucrl-cmdp")
    }

    /// Uses an explicit tightening vector instead of the budget formula.
    pub fn with_tightening(ctx: &LearnerContext, d: Vec<f64>) -> Result<Self> {
        if d.len() != ctx.shape.n_costs() || d.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidInputs(format!(
                "tightening {d:?} must hold one non-negative entry per cost"
            )));
        }
        let name = if d.iter().all(|&v| v == 0.0) {
            "ucrl-cmdp"
        } else {
            "modified-ucrl-cmdp"
        };
        Self::build(ctx, d, name)
    }

    fn build(ctx: &LearnerContext, tighten: Vec<f64>, name: &'static str) -> Result<Self> {
        check_delta(ctx.delta)?;
        if ctx.horizon == 0 {
            return Err(Error::InvalidInputs("horizon must be at least 1".into()));
        }
        Ok(Self {
            name,
            shape: ctx.shape.clone(),
            delta: ctx.delta,
            gamma: exploration_rate(ctx.horizon),
            tighten,
            counts: TransitionCounts::new(ctx.shape.n_states, ctx.shape.n_actions),
            plan: None,
            replan: true,
            episodes: Vec::new(),
            rng: rng::stream(ctx.seed, rng::LEARNER_STREAM),
        })
    }

    pub fn set_exploration(&mut self, gamma: f64) -> Result<()> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidInputs(format!("exploration rate {gamma} outside [0, 1)")));
        }
        self.gamma = gamma;
        Ok(())
    }

    pub fn exploration(&self) -> f64 {
        self.gamma
    }

    pub fn tightening(&self) -> &[f64] {
        &self.tighten
    }

    pub fn counts(&self) -> &TransitionCounts {
        &self.counts
    }

    pub fn current_plan(&self) -> Option<&EpisodePlan> {
        self.plan.as_ref()
    }

    fn start_episode(&mut self) -> Result<()> {
        let cset = ConfidenceSet::from_counts(&self.counts, self.delta)?;
        let core = plan_optimistic(&cset, &self.shape, &self.tighten)?;
        let (ns, na) = (self.shape.n_states, self.shape.n_actions);
        let policy = if core.feasible {
            sr_policy(&core.mu_tilde, 0)
        } else {
            StationaryPolicy::uniform(ns, na)
        };
        let k = self.episodes.len() + 1;
        self.episodes.push(EpisodeRecord {
            k,
            tau_k: self.counts.t,
            feasible: core.feasible,
        });
        self.plan = Some(EpisodePlan {
            k,
            tau_k: self.counts.t,
            mu_tilde: core.mu_tilde,
            p_tilde: core.p_tilde,
            policy,
            n_k: vec![vec![0; na]; ns],
            n_snapshot: self.counts.n_sa.clone(),
            feasible: core.feasible,
        });
        self.replan = false;
        Ok(())
    }
}

impl Learner for UcrlCmdp {
    fn name(&self) -> &str {
        self.name
    }

    fn act(&mut self, s: usize) -> Result<usize> {
        if s >= self.shape.n_states {
            return Err(Error::IndexOutOfRange(format!("state {s}")));
        }
        if self.replan {
            self.start_episode()?;
        }
        let u: f64 = self.rng.gen();
        let plan = self.plan.as_ref().expect("episode started above");
        Ok(plan.choose(s, u, self.gamma))
    }

    fn observe(&mut self, s: usize, a: usize, s_next: usize) -> Result<()> {
        self.counts.record(s, a, s_next)?;
        if let Some(plan) = self.plan.as_mut() {
            plan.n_k[s][a] += 1;
            if episode_should_end(plan, s, a) {
                self.replan = true;
            }
        }
        Ok(())
    }

    fn episodes(&self) -> &[EpisodeRecord] {
        &self.episodes
    }
}
