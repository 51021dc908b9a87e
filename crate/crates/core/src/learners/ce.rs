use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{doubling_reached, EpisodeRecord, Learner, LearnerContext};
use crate::error::{Error, Result};
use crate::estimation::TransitionCounts;
use crate::model::{solve_cmdp, sr_policy, CmdpShape, StationaryPolicy};
use crate::rng;

/// Certainty equivalence: plan as if the empirical model were the truth.
///
/// The CMDP is re-solved on the empirical estimate (unvisited rows uniform)
/// on the same doubling schedule as the optimistic learners, or at every
/// step when `per_step` is set. An infeasible estimate plays uniformly.
pub struct CertaintyEquivalence {
    shape: CmdpShape,
    per_step: bool,
    counts: TransitionCounts,
    policy: StationaryPolicy,
    feasible: bool,
    n_k: Vec<Vec<u64>>,
    snapshot: Vec<Vec<u64>>,
    replan: bool,
    episodes: Vec<EpisodeRecord>,
    rng: ChaCha8Rng,
}

impl CertaintyEquivalence {
    pub fn new(ctx: &LearnerContext, per_step: bool) -> Result<Self> {
        let (ns, na) = (ctx.shape.n_states, ctx.shape.n_actions);
        Ok(Self {
            shape: ctx.shape.clone(),
            per_step,
            counts: TransitionCounts::new(ns, na),
            policy: StationaryPolicy::uniform(ns, na),
            feasible: false,
            n_k: vec![vec![0; na]; ns],
            snapshot: vec![vec![0; na]; ns],
            replan: true,
            episodes: Vec::new(),
            rng: rng::stream(ctx.seed, rng::LEARNER_STREAM),
        })
    }

    pub fn policy(&self) -> &StationaryPolicy {
        &self.policy
    }

    /// Whether the current estimate's CMDP was feasible at the last replan.
    pub fn estimate_feasible(&self) -> bool {
        self.feasible
    }

    pub fn counts(&self) -> &TransitionCounts {
        &self.counts
    }

    /// Replaces the statistics, e.g. to evaluate the rule on a given estimate.
    pub fn set_counts(&mut self, counts: TransitionCounts) {
        self.counts = counts;
        self.replan = true;
    }

    fn replan_now(&mut self) -> Result<()> {
        let estimate = self.shape.with_transitions(self.counts.empirical_model())?;
        let sol = solve_cmdp(&estimate)?;
        self.feasible = sol.feasible;
        self.policy = if sol.feasible {
            sr_policy(&sol.mu_star, 0)
        } else {
            StationaryPolicy::uniform(self.shape.n_states, self.shape.n_actions)
        };
        self.episodes.push(EpisodeRecord {
            k: self.episodes.len() + 1,
            tau_k: self.counts.t,
            feasible: sol.feasible,
        });
        self.snapshot = self.counts.n_sa.clone();
        for row in &mut self.n_k {
            row.fill(0);
        }
        self.replan = false;
        Ok(())
    }
}

impl Learner for CertaintyEquivalence {
    fn name(&self) -> &str {
        "ce"
    }

    fn act(&mut self, s: usize) -> Result<usize> {
        if s >= self.shape.n_states {
            return Err(Error::IndexOutOfRange(format!("state {s}")));
        }
        if self.replan || self.per_step {
            self.replan_now()?;
        }
        let u: f64 = self.rng.gen();
        Ok(self.policy.sample(s, u))
    }

    fn observe(&mut self, s: usize, a: usize, s_next: usize) -> Result<()> {
        self.counts.record(s, a, s_next)?;
        self.n_k[s][a] += 1;
        if doubling_reached(&self.n_k, &self.snapshot, s, a) {
            self.replan = true;
        }
        Ok(())
    }

    fn episodes(&self) -> &[EpisodeRecord] {
        &self.episodes
    }
}
