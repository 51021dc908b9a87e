use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Learner, LearnerContext};
use crate::error::{Error, Result};
use crate::estimation::TransitionCounts;
use crate::model::CmdpShape;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtsParams {
    /// Upper end of the price projection interval `[0, lambda_max]`.
    pub lambda_max: f64,
    /// Initial probability of action 0 in state 0.
    pub u0: f64,
}

impl TtsParams {
    pub fn default_lambda_max() -> f64 {
        100.0
    }

    pub fn default_u0() -> f64 {
        0.5
    }
}

impl Default for TtsParams {
    fn default() -> Self {
        Self {
            lambda_max: Self::default_lambda_max(),
            u0: Self::default_u0(),
        }
    }
}

/// Two-timescale price/policy learner for the two-state example family.
///
/// The price moves on the fast scale `α_t = 1/t`,
/// `λ_{t+1} = Π_[0, λmax](λ_t + α_t (c(s_t, a_t) − c_ub))`, and the
/// probability `u` of action 0 in state 0 on the slow scale
/// `β_t = 1/(t (1 + ln t))`,
/// `u_{t+1} = Π_[0,1](u_t + β_t [1{λ_t > 1, θ̂_t > ½} + 1{λ_t < 1, θ̂_t < ½}])`.
/// State 1 always plays action 0.
pub struct TwoTimescale {
    shape: CmdpShape,
    params: TtsParams,
    lambda: f64,
    u: f64,
    t: u64,
    counts: TransitionCounts,
    rng: ChaCha8Rng,
}

impl TwoTimescale {
    pub fn new(ctx: &LearnerContext, params: TtsParams) -> Result<Self> {
        let s = &ctx.shape;
        if s.n_states != 2 || s.n_actions != 2 || s.n_costs() != 1 {
            return Err(Error::WrongEnvironment(format!(
                "two-timescale rule needs S=2, A=2, M=1 (got S={}, A={}, M={})",
                s.n_states,
                s.n_actions,
                s.n_costs()
            )));
        }
        if !(0.0..=1.0).contains(&params.u0) || !(params.lambda_max > 0.0) {
            return Err(Error::InvalidInputs(format!("{params:?}")));
        }
        Ok(Self {
            shape: ctx.shape.clone(),
            params,
            lambda: 0.0,
            u: params.u0,
            t: 1,
            counts: TransitionCounts::new(2, 2),
            rng: rng::stream(ctx.seed, rng::LEARNER_STREAM),
        })
    }

    pub fn price(&self) -> f64 {
        self.lambda
    }

    pub fn action_probability(&self) -> f64 {
        self.u
    }

    /// Empirical probability of reaching state 1 from state 0 under action 0.
    pub fn theta_hat(&self) -> Option<f64> {
        let n = self.counts.n_sa[0][0];
        (n > 0).then(|| self.counts.n_sas[0][0][1] as f64 / n as f64)
    }

    pub fn fast_step(t: u64) -> f64 {
        1.0 / t as f64
    }

    pub fn slow_step(t: u64) -> f64 {
        let t = t as f64;
        1.0 / (t * (1.0 + t.ln()))
    }
}

impl Learner for TwoTimescale {
    fn name(&self) -> &str {
        "tts"
    }

    fn act(&mut self, s: usize) -> Result<usize> {
        let u: f64 = self.rng.gen();
        Ok(match s {
            0 if u < self.u => 0,
            0 => 1,
            1 => 0,
            _ => return Err(Error::IndexOutOfRange(format!("state {s}"))),
        })
    }

    fn observe(&mut self, s: usize, a: usize, s_next: usize) -> Result<()> {
        let theta = self.theta_hat();
        self.counts.record(s, a, s_next)?;
        let lambda = self.lambda;
        let cost = self.shape.c[0][s][a];
        let c_ub = self.shape.c_ub[0];

        self.lambda = (lambda + Self::fast_step(self.t) * (cost - c_ub)).clamp(0.0, self.params.lambda_max);

        if let Some(theta) = theta {
            let push = f64::from(u8::from(lambda > 1.0 && theta > 0.5))
                + f64::from(u8::from(lambda < 1.0 && theta < 0.5));
            self.u = (self.u + Self::slow_step(self.t) * push).clamp(0.0, 1.0);
        }
        self.t += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Cmdp;

    fn ctx_for(cmdp: &Cmdp) -> LearnerContext {
        LearnerContext {
            shape: cmdp.shape(),
            horizon: 1000,
            delta: 0.05,
            seed: 3,
        }
    }

    #[test]
    fn price_constant_when_cost_equals_budget() {
        let mut cmdp = Cmdp::two_state(0.8, 0.5).unwrap();
        cmdp.c[0] = vec![vec![0.5; 2]; 2];
        let mut l = TwoTimescale::new(&ctx_for(&cmdp), TtsParams::default()).unwrap();
        for t in 0..100 {
            l.observe(t % 2, 0, (t + 1) % 2).unwrap();
            assert_eq!(l.price(), 0.0);
        }
    }

    #[test]
    fn price_telescopes_to_harmonic_sum() {
        let mut cmdp = Cmdp::two_state(0.8, 0.5).unwrap();
        cmdp.c[0] = vec![vec![1.0; 2]; 2];
        let mut l = TwoTimescale::new(&ctx_for(&cmdp), TtsParams::default()).unwrap();
        let mut harmonic = 0.0;
        for t in 1..=500u64 {
            l.observe(0, 0, 1).unwrap();
            harmonic += 1.0 / t as f64;
            assert!((l.price() - 0.5 * harmonic).abs() < 1e-12);
        }
    }

    #[test]
    fn timescales_separate() {
        let ratio = |t: u64| TwoTimescale::slow_step(t) / TwoTimescale::fast_step(t);
        assert!((ratio(1) - 1.0).abs() < 1e-15);
        assert!(ratio(10) > ratio(1000));
        assert!(ratio(1_000_000) < 0.07);
        let t = 12345u64;
        assert!((ratio(t) - 1.0 / (1.0 + (t as f64).ln())).abs() < 1e-15);
    }

    #[test]
    fn rejects_other_environments() {
        let three = Cmdp::new(
            vec![vec![vec![1.0 / 3.0; 3]; 2]; 3],
            vec![vec![0.0; 2]; 3],
            vec![vec![vec![0.0; 2]; 3]],
            vec![1.0],
        )
        .unwrap();
        assert!(matches!(
            TwoTimescale::new(&ctx_for(&three), TtsParams::default()),
            Err(Error::WrongEnvironment(_))
        ));
    }

    #[test]
    fn state_one_always_plays_first_action() {
        let cmdp = Cmdp::two_state(0.8, 0.5).unwrap();
        let mut l = TwoTimescale::new(&ctx_for(&cmdp), TtsParams::default()).unwrap();
        assert!((0..100).all(|_| l.act(1).unwrap() == 0));
    }

    #[test]
    fn policy_parameter_rises_with_high_price_and_high_theta() {
        let mut cmdp = Cmdp::two_state(0.8, 0.1).unwrap();
        cmdp.c[0] = vec![vec![1.0; 2]; 2];
        let mut l = TwoTimescale::new(&ctx_for(&cmdp), TtsParams { lambda_max: 100.0, u0: 0.0 }).unwrap();
        for _ in 0..50 {
            l.observe(0, 0, 1).unwrap();
        }
        assert!(l.price() > 1.0);
        assert!(l.action_probability() > 0.0);
    }
}
