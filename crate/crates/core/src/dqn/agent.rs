use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::Mlp;
use super::replay::{ReplayBuffer, Transition};
use crate::config_space::{ActionId, NUM_ACTIONS};
use crate::env::{NormalizedState, STATE_DIM};
use crate::error::{Result, XrError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsilonSchedule {
    pub eps0: f64,
    pub decay: f64,
    pub eps_min: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            eps0: 1.0,
            decay: 0.9975,
            eps_min: 0.05,
        }
    }
}

impl EpsilonSchedule {
    pub fn at(&self, t: u64) -> f64 {
        decay_epsilon(self, t)
    }
}

pub fn decay_epsilon(s: &EpsilonSchedule, t: u64) -> f64 {
    let t = i32::try_from(t).unwrap_or(i32::MAX);
    (s.eps0 * s.decay.powi(t)).max(s.eps_min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub target_sync_every: u64,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            lr: 1e-3,
            batch_size: 32,
            buffer_capacity: 5000,
            target_sync_every: 100,
            gamma: 0.99,
            epsilon: EpsilonSchedule::default(),
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(XrError::param("dqn.hidden", "layer sizes must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(XrError::param("dqn.lr", "must be positive"));
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return Err(XrError::param("dqn.batch_size", "must be in 1..=buffer_capacity"));
        }
        if self.target_sync_every == 0 {
            return Err(XrError::param("dqn.target_sync_every", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(XrError::param("dqn.gamma", "must be in [0, 1)"));
        }
        let e = self.epsilon;
        if !((0.0..=1.0).contains(&e.eps0) && (0.0..=1.0).contains(&e.eps_min) && e.decay > 0.0 && e.decay <= 1.0) {
            return Err(XrError::param("dqn.epsilon", "eps0, eps_min in [0,1] and decay in (0,1]"));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![STATE_DIM];
        s.extend(&self.hidden);
        s.push(NUM_ACTIONS);
        s
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

pub fn select_action<R: Rng + ?Sized>(q: &[f64], eps: f64, rng: &mut R) -> ActionId {
    debug_assert_eq!(q.len(), NUM_ACTIONS);
    let explore = rng.random::<f64>() < eps;
    let id = if explore {
        rng.random_range(0..NUM_ACTIONS)
    } else {
        argmax(q)
    };
    ActionId::new(id).expect("index in range")
}

pub fn td_targets(batch: &[Transition], target: &Mlp, gamma: f64) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            if t.done {
                t.reward
            } else {
                let q = target.forward(t.next_state.as_slice());
                t.reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect()
}

/// Mean squared error between `Q(s_i, a_i)` and `targets`, with its gradient
/// added into `grads`.
pub fn td_loss_and_grad(net: &Mlp, batch: &[Transition], targets: &[f64], grads: &mut [f64]) -> f64 {
    assert_eq!(batch.len(), targets.len());
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut d_out = vec![0.0; net.output_dim()];
    for (t, &y) in batch.iter().zip(targets) {
        let cache = net.forward_cached(t.state.as_slice());
        let a = t.action.index();
        let err = cache.output()[a] - y;
        loss += err * err;
        d_out.fill(0.0);
        d_out[a] = 2.0 * err / n;
        net.backward(&cache, &d_out, grads);
    }
    loss / n
}

/// One optimizer update on `batch`; returns the pre-update loss.
pub fn train_step(net: &mut Mlp, target: &Mlp, batch: &[Transition], opt: &mut Adam, gamma: f64) -> f64 {
    assert!(!batch.is_empty(), "empty batch");
    let targets = td_targets(batch, target, gamma);
    let mut grads = net.zero_grads();
    let loss = td_loss_and_grad(net, batch, &targets, &mut grads);
    opt.step(net.params_mut(), &grads);
    loss
}

pub fn sync_target(net: &Mlp, target: &mut Mlp) {
    target.copy_from(net);
}

/// Online deep Q-learning agent.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    cfg: DqnConfig,
    online: Mlp,
    target: Mlp,
    opt: Adam,
    replay: ReplayBuffer,
    rng: ChaCha8Rng,
    decisions: u64,
    updates: u64,
}

impl DqnAgent {
    pub fn new(cfg: DqnConfig, mut rng: ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let online = Mlp::new(&cfg.layer_sizes(), &mut rng);
        let target = online.clone();
        Ok(Self {
            opt: Adam::new(online.param_count(), cfg.lr),
            replay: ReplayBuffer::new(cfg.buffer_capacity),
            online,
            target,
            rng,
            decisions: 0,
            updates: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.cfg
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn epsilon(&self) -> f64 {
        self.cfg.epsilon.at(self.decisions)
    }

    pub fn q_values(&self, obs: &NormalizedState) -> Result<Vec<f64>> {
        if !obs.0.iter().all(|v| v.is_finite()) {
            return Err(XrError::NonFiniteInput);
        }
        Ok(self.online.forward(obs.as_slice()))
    }

    /// Epsilon-greedy action for the current decision.
    pub fn act(&mut self, obs: &NormalizedState) -> Result<ActionId> {
        let q = self.q_values(obs)?;
        let eps = self.epsilon();
        Ok(select_action(&q, eps, &mut self.rng))
    }

    pub fn greedy_action(&self, obs: &NormalizedState) -> Result<ActionId> {
        let q = self.q_values(obs)?;
        Ok(ActionId::new(argmax(&q)).expect("index in range"))
    }

    /// Stores the transition, trains once if enough data is buffered, and
    /// advances the decision counter. Returns the training loss if a step ran.
    pub fn learn(&mut self, t: Transition) -> Option<f64> {
        self.replay.push(t);
        let loss = if self.replay.len() >= self.cfg.batch_size {
            let batch = self.replay.sample(self.cfg.batch_size, &mut self.rng);
            self.updates += 1;
            Some(train_step(&mut self.online, &self.target, &batch, &mut self.opt, self.cfg.gamma))
        } else {
            None
        };
        self.decisions += 1;
        if self.decisions.is_multiple_of(self.cfg.target_sync_every) {
            sync_target(&self.online, &mut self.target);
        }
        loss
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: self.cfg.clone(),
            sizes: self.online.sizes().to_vec(),
            online: self.online.params().to_vec(),
            target: self.target.params().to_vec(),
            optimizer: self.opt.clone(),
            decisions: self.decisions,
            updates: self.updates,
        };
        let text = serde_json::to_string(&ck)?;
        std::fs::write(path, text).map_err(|e| XrError::io(path, e))
    }

    /// Restores network weights, optimizer state and counters. The replay
    /// buffer is not part of a checkpoint and starts empty.
    pub fn load(path: &Path, rng: ChaCha8Rng) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| XrError::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(XrError::Checkpoint(format!("unknown format {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(XrError::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        ck.config.validate()?;
        if ck.sizes != ck.config.layer_sizes() {
            return Err(XrError::ShapeMismatch(format!(
                "layer sizes {:?} do not match config {:?}",
                ck.sizes,
                ck.config.layer_sizes()
            )));
        }
        let bad = || XrError::ShapeMismatch("parameter vector length".into());
        let online = Mlp::from_params(&ck.sizes, ck.online).ok_or_else(bad)?;
        let target = Mlp::from_params(&ck.sizes, ck.target).ok_or_else(bad)?;
        if ck.optimizer.len() != online.param_count() {
            return Err(bad());
        }
        Ok(Self {
            replay: ReplayBuffer::new(ck.config.buffer_capacity),
            cfg: ck.config,
            online,
            target,
            opt: ck.optimizer,
            rng,
            decisions: ck.decisions,
            updates: ck.updates,
        })
    }
}

const CHECKPOINT_FORMAT: &str = "xrsim-dqn";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: DqnConfig,
    sizes: Vec<usize>,
    online: Vec<f64>,
    target: Vec<f64>,
    optimizer: Adam,
    decisions: u64,
    updates: u64,
}
