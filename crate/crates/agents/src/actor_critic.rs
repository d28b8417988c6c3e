//! Policy and value networks of one agent, with the TD actor-critic
//! updates.

use rand::Rng;

use crate::buffer::Transition;
use crate::error::{Error, Result};
use crate::mlp::Mlp;
use crate::state::StateTensor;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// `r + gamma * v_next - v_now`; pass `v_next = 0` for terminal transitions.
pub fn td_residual(r: f64, v_next: f64, v_now: f64, gamma: f64) -> f64 {
    r + gamma * v_next - v_now
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActorCritic {
    pub actor: Mlp,
    pub critic: Mlp,
}

impl ActorCritic {
    pub fn new(input_len: usize, hidden: &[usize], actions: usize, rng: &mut impl Rng) -> Self {
        let sizes = |out| std::iter::once(input_len).chain(hidden.iter().copied()).chain([out]).collect::<Vec<_>>();
        let actor = Mlp::new(&sizes(actions), true, rng);
        let critic = Mlp::new(&sizes(1), true, rng);
        Self { actor, critic }
    }

    pub fn action_count(&self) -> usize {
        self.actor.output_len()
    }

    fn check_input(&self, s: &StateTensor) -> Result<()> {
        if s.input_len() != self.actor.input_len() {
            return Err(Error::DimensionMismatch { expected: self.actor.input_len(), got: s.input_len() });
        }
        Ok(())
    }

    pub fn policy(&self, s: &StateTensor) -> Result<Vec<f64>> {
        self.check_input(s)?;
        let probs = softmax(&self.actor.forward(s.sparse()).output);
        if probs.iter().all(|p| p.is_finite()) {
            Ok(probs)
        } else {
            Err(Error::CorruptParams("actor output"))
        }
    }

    pub fn value(&self, s: &StateTensor) -> Result<f64> {
        self.check_input(s)?;
        let v = self.critic.forward(s.sparse()).output[0];
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::CorruptParams("critic output"))
        }
    }

    /// Dense gradient of `log pi(a|s)` over the actor parameters.
    pub fn log_prob_gradient(&self, s: &StateTensor, a: usize) -> Result<Vec<f64>> {
        self.check_action(a)?;
        self.check_input(s)?;
        let fwd = self.actor.forward(s.sparse());
        Ok(self.actor.gradient(&fwd, &log_prob_dout(&fwd.output, a)))
    }

    /// Dense gradient of `V(s)` over the critic parameters.
    pub fn value_gradient(&self, s: &StateTensor) -> Result<Vec<f64>> {
        self.check_input(s)?;
        let fwd = self.critic.forward(s.sparse());
        Ok(self.critic.gradient(&fwd, &[1.0]))
    }

    fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.action_count() {
            return Err(Error::ActionOutOfRange { action: a, count: self.action_count() });
        }
        Ok(())
    }

    /// TD residual of `t` under the current critic.
    pub fn td(&self, t: &Transition, gamma: f64) -> Result<f64> {
        let v_next = if t.done { 0.0 } else { self.value(&t.next)? };
        Ok(td_residual(t.reward, v_next, self.value(&t.state)?, gamma))
    }

    /// Semi-gradient step `w += alpha * psi * grad V(s)`. Returns the TD
    /// residual and the loss `psi^2 / 2`.
    pub fn critic_update(&mut self, t: &Transition, gamma: f64, alpha: f64) -> Result<(f64, f64)> {
        let psi = self.td(t, gamma)?;
        self.critic_step(t, psi, alpha)?;
        Ok((psi, 0.5 * psi * psi))
    }

    fn critic_step(&mut self, t: &Transition, psi: f64, alpha: f64) -> Result<()> {
        if psi == 0.0 {
            return Ok(());
        }
        let fwd = self.critic.forward(t.state.sparse());
        if !self.critic.step(&fwd, &[1.0], alpha * psi) {
            return Err(Error::CorruptParams("critic gradient"));
        }
        Ok(())
    }

    /// Policy-gradient step `theta += alpha * psi * grad log pi(a|s)`.
    pub fn actor_update(&mut self, t: &Transition, psi: f64, alpha: f64) -> Result<()> {
        self.check_action(t.action)?;
        self.check_input(&t.state)?;
        if !psi.is_finite() {
            return Err(Error::CorruptParams("TD residual"));
        }
        if psi == 0.0 {
            return Ok(());
        }
        let fwd = self.actor.forward(t.state.sparse());
        let dout = log_prob_dout(&fwd.output, t.action);
        if !self.actor.step(&fwd, &dout, alpha * psi) {
            return Err(Error::CorruptParams("actor gradient"));
        }
        Ok(())
    }

    /// One actor-critic update on `t`: the residual is computed once with the
    /// current critic and drives both steps.
    pub fn learn(&mut self, t: &Transition, gamma: f64, actor_lr: f64, critic_lr: f64) -> Result<f64> {
        self.check_action(t.action)?;
        self.check_input(&t.state)?;
        let input = t.state.sparse();
        let v_next = if t.done { 0.0 } else { self.value(&t.next)? };
        let now = self.critic.forward(input.clone());
        let psi = td_residual(t.reward, v_next, now.output[0], gamma);
        if !psi.is_finite() {
            return Err(Error::CorruptParams("TD residual"));
        }
        if psi == 0.0 {
            return Ok(psi);
        }
        if !self.critic.step(&now, &[1.0], critic_lr * psi) {
            return Err(Error::CorruptParams("critic gradient"));
        }
        let fwd = self.actor.forward(input);
        let dout = log_prob_dout(&fwd.output, t.action);
        if !self.actor.step(&fwd, &dout, actor_lr * psi) {
            return Err(Error::CorruptParams("actor gradient"));
        }
        Ok(psi)
    }
}

/// `d log softmax(z)_a / dz = onehot(a) - softmax(z)`.
fn log_prob_dout(logits: &[f64], a: usize) -> Vec<f64> {
    let mut d: Vec<f64> = softmax(logits).into_iter().map(|p| -p).collect();
    d[a] += 1.0;
    d
}
