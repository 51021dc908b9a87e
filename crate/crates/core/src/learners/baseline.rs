use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Learner, LearnerContext};
use crate::error::{Error, Result};
use crate::model::StationaryPolicy;
use crate::rng;

/// Plays a fixed stationary policy and ignores feedback.
pub struct FixedPolicy {
    name: String,
    policy: StationaryPolicy,
    rng: ChaCha8Rng,
}

impl FixedPolicy {
    pub fn new(ctx: &LearnerContext, name: &str, policy: StationaryPolicy) -> Self {
        Self {
            name: name.to_owned(),
            policy,
            rng: rng::stream(ctx.seed, rng::LEARNER_STREAM),
        }
    }
}

impl Learner for FixedPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&mut self, s: usize) -> Result<usize> {
        if s >= self.policy.n_states() {
            return Err(Error::IndexOutOfRange(format!("state {s}")));
        }
        let u: f64 = self.rng.gen();
        Ok(self.policy.sample(s, u))
    }

    fn observe(&mut self, _s: usize, _a: usize, _s_next: usize) -> Result<()> {
        Ok(())
    }
}

/// Uniformly random actions in every state.
pub struct UniformLearner(FixedPolicy);

impl UniformLearner {
    pub fn new(ctx: &LearnerContext) -> Self {
        let policy = StationaryPolicy::uniform(ctx.shape.n_states, ctx.shape.n_actions);
        Self(FixedPolicy::new(ctx, "uniform", policy))
    }
}

impl Learner for UniformLearner {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn act(&mut self, s: usize) -> Result<usize> {
        self.0.act(s)
    }

    fn observe(&mut self, s: usize, a: usize, s_next: usize) -> Result<()> {
        self.0.observe(s, a, s_next)
    }
}
