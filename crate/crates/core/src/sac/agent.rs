use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::buffer::Batch;
use super::hyper::{AlphaMode, SacHyperparams};
use crate::nn::{adam_step, AdamState, Mlp, MlpGrads};
use crate::seed;
use crate::{Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub const SQUASH_EPS: f64 = 1e-6;
const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

/// Losses from one gradient step, all evaluated before the parameters moved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateStats {
    pub critic1_loss: f64,
    pub critic2_loss: f64,
    pub actor_loss: f64,
    pub alpha_loss: Option<f64>,
    /// Temperature used by the critic and actor losses.
    pub alpha: f64,
}

/// Reparameterised draw from the squashed Gaussian policy.
#[derive(Clone, Debug)]
pub struct PolicySample {
    pub actions: Array2<f64>,
    pub log_probs: Array1<f64>,
}

/// Squashed-Gaussian actor with twin soft Q critics.
#[derive(Clone, Debug)]
pub struct SacAgent {
    pub hyper: SacHyperparams,
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target1: Mlp,
    pub target2: Mlp,
    pub log_alpha: f64,
    pub actor_opt: AdamState,
    pub critic1_opt: AdamState,
    pub critic2_opt: AdamState,
    pub alpha_opt: AdamState,
    /// Environment steps taken so far.
    pub global_step: u64,
    /// Gradient steps taken so far.
    pub updates: u64,
    pub(crate) rng: ChaCha8Rng,
    state_dim: usize,
    action_dim: usize,
}

fn check_finite(a: &Array2<f64>, layer: usize, what: &str) -> Result<()> {
    match a.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(Error::Numeric { layer, what: format!("{what} produced {v}") }),
        None => Ok(()),
    }
}

fn joined(states: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    concatenate(Axis(1), &[states, actions]).map_err(|e| Error::Shape(e.to_string()))
}

impl SacAgent {
    pub fn new(state_dim: usize, action_dim: usize, hyper: SacHyperparams, seed: u64) -> Result<Self> {
        hyper.validate()?;
        if state_dim == 0 || action_dim == 0 {
            return Err(Error::Config("state and action dimensions must be positive".into()));
        }
        let mut rng = seed::rng(seed::derive(seed, seed::TAG_AGENT, 0));
        let dims = |input: usize, output: usize| {
            let mut d = vec![input];
            d.extend_from_slice(&hyper.hidden);
            d.push(output);
            d
        };
        let actor = Mlp::new(&dims(state_dim, 2 * action_dim), hyper.activation, &mut rng)?;
        let critic1 = Mlp::new(&dims(state_dim + action_dim, 1), hyper.activation, &mut rng)?;
        let critic2 = Mlp::new(&dims(state_dim + action_dim, 1), hyper.activation, &mut rng)?;
        let adam = hyper.adam();
        let log_alpha = match hyper.alpha_mode {
            AlphaMode::Fixed(a) | AlphaMode::Auto(a) => a.ln(),
        };
        Ok(Self {
            actor_opt: AdamState::for_mlp(&actor, adam)?,
            critic1_opt: AdamState::for_mlp(&critic1, adam)?,
            critic2_opt: AdamState::for_mlp(&critic2, adam)?,
            alpha_opt: AdamState::new(&[1], adam)?,
            target1: critic1.clone(),
            target2: critic2.clone(),
            actor,
            critic1,
            critic2,
            log_alpha,
            hyper,
            global_step: 0,
            updates: 0,
            rng,
            state_dim,
            action_dim,
        })
    }

    /// Reassemble an agent from stored parts, checking that they fit together.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        hyper: SacHyperparams,
        nets: [Mlp; 5],
        log_alpha: f64,
        opts: [AdamState; 4],
        rng: ChaCha8Rng,
        global_step: u64,
        updates: u64,
    ) -> Result<Self> {
        hyper.validate()?;
        let [actor, critic1, critic2, target1, target2] = nets;
        let action_dim = actor.output_dim() / 2;
        let state_dim = actor.input_dim();
        if action_dim == 0 || actor.output_dim() % 2 != 0 {
            return Err(Error::Shape("actor output must hold a mean and log-std per action".into()));
        }
        for c in [&critic1, &critic2, &target1, &target2] {
            if c.input_dim() != state_dim + action_dim || c.output_dim() != 1 || c.dims() != critic1.dims() {
                return Err(Error::Shape("critic dimensions do not match the actor".into()));
            }
        }
        let [actor_opt, critic1_opt, critic2_opt, alpha_opt] = opts;
        Ok(Self {
            hyper,
            actor,
            critic1,
            critic2,
            target1,
            target2,
            log_alpha,
            actor_opt,
            critic1_opt,
            critic2_opt,
            alpha_opt,
            global_step,
            updates,
            rng,
            state_dim,
            action_dim,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn alpha(&self) -> f64 {
        match self.hyper.alpha_mode {
            AlphaMode::Fixed(a) => a,
            AlphaMode::Auto(_) => self.log_alpha.exp(),
        }
    }

    pub fn target_entropy(&self) -> f64 {
        self.hyper.target_entropy_for(self.action_dim)
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn check_states(&self, states: &Array2<f64>) -> Result<()> {
        if states.ncols() != self.state_dim {
            return Err(Error::Shape(format!("state has {} entries, agent expects {}", states.ncols(), self.state_dim)));
        }
        if states.nrows() == 0 {
            return Err(Error::Usage("empty batch".into()));
        }
        Ok(())
    }

    fn row(&self, state: &[f64]) -> Result<Array2<f64>> {
        let x = Array2::from_shape_vec((1, state.len()), state.to_vec()).map_err(|e| Error::Shape(e.to_string()))?;
        self.check_states(&x)?;
        Ok(x)
    }

    pub fn standard_normal(&mut self, rows: usize) -> Array2<f64> {
        let d = self.action_dim;
        Array2::from_shape_simple_fn((rows, d), || self.rng.sample(StandardNormal))
    }

    fn policy_heads(&self, out: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        check_finite(out, self.actor.num_layers() - 1, "actor")?;
        let d = self.action_dim;
        Ok((out.slice(s![.., ..d]).to_owned(), out.slice(s![.., d..]).to_owned()))
    }

    /// Squashed sample for explicit noise `eps`, shape `(batch, action_dim)`.
    pub fn policy_sample(&self, states: &Array2<f64>, eps: &Array2<f64>) -> Result<PolicySample> {
        self.check_states(states)?;
        if eps.dim() != (states.nrows(), self.action_dim) {
            return Err(Error::Shape("noise shape does not match batch and action dims".into()));
        }
        let (mu, raw) = self.policy_heads(&self.actor.predict(states)?)?;
        Ok(squash(&mu, &raw, eps))
    }

    /// Deterministic action `tanh(mu)`.
    pub fn deterministic_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        let (mu, _) = self.policy_heads(&self.actor.predict(&self.row(state)?)?)?;
        Ok(mu.iter().map(|m| m.tanh()).collect())
    }

    /// Action and log-probability for one state under forced noise.
    pub fn action_with_noise(&self, state: &[f64], eps: &[f64]) -> Result<(Vec<f64>, f64)> {
        let e = Array2::from_shape_vec((1, eps.len()), eps.to_vec()).map_err(|e| Error::Shape(e.to_string()))?;
        let p = self.policy_sample(&self.row(state)?, &e)?;
        Ok((p.actions.row(0).to_vec(), p.log_probs[0]))
    }

    /// Stochastic draws consume the agent RNG. Deterministic mode returns no
    /// log-probability.
    pub fn sample_action(&mut self, state: &[f64], deterministic: bool) -> Result<(Vec<f64>, Option<f64>)> {
        if deterministic {
            return Ok((self.deterministic_action(state)?, None));
        }
        let x = self.row(state)?;
        let eps = self.standard_normal(1);
        let p = self.policy_sample(&x, &eps)?;
        Ok((p.actions.row(0).to_vec(), Some(p.log_probs[0])))
    }

    /// `min(Q'1, Q'2)(s', a') - alpha * log_prob`, one entry per row.
    pub fn target_q(
        &self,
        next_states: &Array2<f64>,
        next_actions: &Array2<f64>,
        next_log_probs: &Array1<f64>,
        alpha: f64,
    ) -> Result<Array1<f64>> {
        let x = joined(next_states.view(), next_actions.view())?;
        let q1 = self.target1.predict(&x)?;
        let q2 = self.target2.predict(&x)?;
        check_finite(&q1, self.target1.num_layers() - 1, "target critic 1")?;
        check_finite(&q2, self.target2.num_layers() - 1, "target critic 2")?;
        let mut out = Array1::zeros(x.nrows());
        for i in 0..x.nrows() {
            let entropy = if alpha == 0.0 { 0.0 } else { alpha * next_log_probs[i] };
            out[i] = q1[[i, 0]].min(q2[[i, 0]]) - entropy;
        }
        Ok(out)
    }

    /// Regression targets `r + gamma * (1 - done) * target_q` for noise `next_eps`.
    pub fn critic_targets(&self, batch: &Batch, next_eps: &Array2<f64>, alpha: f64) -> Result<Array1<f64>> {
        let next = self.policy_sample(&batch.next_states, next_eps)?;
        let tq = self.target_q(&batch.next_states, &next.actions, &next.log_probs, alpha)?;
        let gamma = self.hyper.gamma;
        let mut y = batch.rewards.clone();
        Zip::from(&mut y).and(&batch.dones).and(&tq).for_each(|y, &d, &t| {
            if d == 0.0 && gamma != 0.0 {
                *y += gamma * t;
            }
        });
        Ok(y)
    }

    /// Mean squared error of each critic against `targets`, with gradients.
    pub fn critic_losses(&self, batch: &Batch, targets: &Array1<f64>) -> Result<[(f64, MlpGrads); 2]> {
        self.check_states(&batch.states)?;
        let x = joined(batch.states.view(), batch.actions.view())?;
        let n = x.nrows() as f64;
        let one = |net: &Mlp, name: &str| -> Result<(f64, MlpGrads)> {
            let (q, tape) = net.forward_batch(&x)?;
            check_finite(&q, net.num_layers() - 1, name)?;
            let diff = &q.column(0) - targets;
            let loss = diff.mapv(|v| v * v).sum() / n;
            let g = diff.mapv(|v| 2.0 * v / n).insert_axis(Axis(1));
            Ok((loss, net.backward(tape, &g)?.grads))
        };
        Ok([one(&self.critic1, "critic 1")?, one(&self.critic2, "critic 2")?])
    }

    /// Actor loss `mean(alpha * log_prob - min(Q1, Q2))` for noise `eps`,
    /// its gradient, and the per-row log-probabilities.
    pub fn actor_loss(
        &self,
        states: &Array2<f64>,
        eps: &Array2<f64>,
        alpha: f64,
    ) -> Result<(f64, MlpGrads, Array1<f64>)> {
        self.check_states(states)?;
        let (rows, d) = (states.nrows(), self.action_dim);
        if eps.dim() != (rows, d) {
            return Err(Error::Shape("noise shape does not match batch and action dims".into()));
        }
        let (out, tape) = self.actor.forward_batch(states)?;
        let (mu, raw) = self.policy_heads(&out)?;
        let sample = squash(&mu, &raw, eps);
        let x = joined(states.view(), sample.actions.view())?;
        let (q1, t1) = self.critic1.forward_batch(&x)?;
        let (q2, t2) = self.critic2.forward_batch(&x)?;
        check_finite(&q1, self.critic1.num_layers() - 1, "critic 1")?;
        check_finite(&q2, self.critic2.num_layers() - 1, "critic 2")?;

        let n = rows as f64;
        let mut loss = 0.0;
        let mut g1 = Array2::zeros((rows, 1));
        let mut g2 = Array2::zeros((rows, 1));
        for i in 0..rows {
            let (a, b) = (q1[[i, 0]], q2[[i, 0]]);
            let entropy = if alpha == 0.0 { 0.0 } else { alpha * sample.log_probs[i] };
            loss += entropy - a.min(b);
            if a <= b {
                g1[[i, 0]] = -1.0 / n;
            } else {
                g2[[i, 0]] = -1.0 / n;
            }
        }
        loss /= n;
        let dq = self.critic1.backward(t1, &g1)?.input + self.critic2.backward(t2, &g2)?.input;

        let sd = self.state_dim;
        let mut out_grad = Array2::zeros((rows, 2 * d));
        for i in 0..rows {
            for j in 0..d {
                let ls = raw[[i, j]].clamp(LOG_STD_MIN, LOG_STD_MAX);
                let sigma_eps = ls.exp() * eps[[i, j]];
                let a = sample.actions[[i, j]];
                let one_minus = 1.0 - a * a;
                // d log_prob / du from the squash correction.
                let dlogp_du = 2.0 * a * one_minus / (one_minus + SQUASH_EPS);
                let dl_du = alpha / n * dlogp_du + dq[[i, sd + j]] * one_minus;
                out_grad[[i, j]] = dl_du;
                if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw[[i, j]]) {
                    out_grad[[i, d + j]] = dl_du * sigma_eps - alpha / n;
                }
            }
        }
        let grads = self.actor.backward(tape, &out_grad)?.grads;
        Ok((loss, grads, sample.log_probs))
    }

    /// Temperature loss `mean(-alpha * (log_prob + H))` and its derivative
    /// with respect to `log_alpha`.
    pub fn temperature_loss(&self, log_probs: &Array1<f64>) -> Result<(f64, f64)> {
        if log_probs.is_empty() {
            return Err(Error::Usage("empty batch".into()));
        }
        let h = self.target_entropy();
        let alpha = self.log_alpha.exp();
        let m = log_probs.iter().map(|lp| lp + h).sum::<f64>() / log_probs.len() as f64;
        Ok((-alpha * m, -alpha * m))
    }

    fn require_batch(&self, batch: &Batch) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Usage("empty batch".into()));
        }
        self.check_states(&batch.states)?;
        if batch.actions.ncols() != self.action_dim {
            return Err(Error::Shape("batch action width does not match agent".into()));
        }
        Ok(())
    }

    fn critic_step(&mut self, batch: &Batch, alpha: f64) -> Result<(f64, f64)> {
        let eps = self.standard_normal(batch.len());
        let y = self.critic_targets(batch, &eps, alpha)?;
        let [(l1, g1), (l2, g2)] = self.critic_losses(batch, &y)?;
        adam_step(&mut self.critic1, &g1, &mut self.critic1_opt)?;
        adam_step(&mut self.critic2, &g2, &mut self.critic2_opt)?;
        Ok((l1, l2))
    }

    fn actor_step(&mut self, states: &Array2<f64>, eps: &Array2<f64>, alpha: f64) -> Result<f64> {
        let (loss, grads, _) = self.actor_loss(states, eps, alpha)?;
        adam_step(&mut self.actor, &grads, &mut self.actor_opt)?;
        Ok(loss)
    }

    /// One Adam step on `log_alpha` for the given log-probabilities.
    pub fn temperature_update_with(&mut self, log_probs: &Array1<f64>) -> Result<f64> {
        if !matches!(self.hyper.alpha_mode, AlphaMode::Auto(_)) {
            return Err(Error::Usage("temperature update requires auto alpha mode".into()));
        }
        let (loss, grad) = self.temperature_loss(log_probs)?;
        let mut p = [self.log_alpha];
        self.alpha_opt.step(&mut [&mut p[..]], &[&[grad][..]], |_| 0)?;
        self.log_alpha = p[0];
        Ok(loss)
    }

    /// One Adam step on both critics. Returns the pre-step losses.
    pub fn critic_update(&mut self, batch: &Batch) -> Result<(f64, f64)> {
        self.require_batch(batch)?;
        let alpha = self.alpha();
        self.critic_step(batch, alpha)
    }

    /// One Adam step on the actor with freshly drawn noise.
    pub fn actor_update(&mut self, batch: &Batch) -> Result<f64> {
        self.require_batch(batch)?;
        let eps = self.standard_normal(batch.len());
        let alpha = self.alpha();
        self.actor_step(&batch.states, &eps, alpha)
    }

    /// One Adam step on `log_alpha`. Only valid in auto mode.
    pub fn temperature_update(&mut self, batch: &Batch) -> Result<f64> {
        self.require_batch(batch)?;
        if !matches!(self.hyper.alpha_mode, AlphaMode::Auto(_)) {
            return Err(Error::Usage("temperature update requires auto alpha mode".into()));
        }
        let eps = self.standard_normal(batch.len());
        let lp = self.policy_sample(&batch.states, &eps)?.log_probs;
        self.temperature_update_with(&lp)
    }

    pub fn polyak_update(&mut self) -> Result<()> {
        let tau = self.hyper.tau;
        self.target1.polyak_from(&self.critic1, tau)?;
        self.target2.polyak_from(&self.critic2, tau)
    }

    /// Full update on one minibatch: temperature, critics, actor, targets.
    /// The actor and temperature share one noise draw; critics and actor
    /// use the temperature from before this step's temperature update.
    pub fn gradient_step(&mut self, batch: &Batch) -> Result<UpdateStats> {
        self.require_batch(batch)?;
        let eps = self.standard_normal(batch.len());
        let alpha = self.alpha();
        let alpha_loss = match self.hyper.alpha_mode {
            AlphaMode::Auto(_) => {
                let lp = self.policy_sample(&batch.states, &eps)?.log_probs;
                Some(self.temperature_update_with(&lp)?)
            }
            AlphaMode::Fixed(_) => None,
        };
        let (critic1_loss, critic2_loss) = self.critic_step(batch, alpha)?;
        let actor_loss = self.actor_step(&batch.states, &eps, alpha)?;
        self.polyak_update()?;
        self.updates += 1;
        Ok(UpdateStats { critic1_loss, critic2_loss, actor_loss, alpha_loss, alpha })
    }
}

/// `a = tanh(mu + sigma * eps)` with the squash-corrected Gaussian log-density.
pub fn squash(mu: &Array2<f64>, raw_log_std: &Array2<f64>, eps: &Array2<f64>) -> PolicySample {
    let (rows, d) = mu.dim();
    let mut actions = Array2::zeros((rows, d));
    let mut log_probs = Array1::zeros(rows);
    for i in 0..rows {
        let mut lp = 0.0;
        for j in 0..d {
            let ls = raw_log_std[[i, j]].clamp(LOG_STD_MIN, LOG_STD_MAX);
            let e = eps[[i, j]];
            let a = (mu[[i, j]] + ls.exp() * e).tanh();
            actions[[i, j]] = a;
            lp += -0.5 * e * e - ls - HALF_LOG_2PI - (1.0 - a * a + SQUASH_EPS).ln();
        }
        log_probs[i] = lp;
    }
    PolicySample { actions, log_probs }
}
