//! Actor–critic training: critic regression against soft targets,
//! deterministic policy gradient for the actor, Ornstein–Uhlenbeck
//! exploration noise, a ring replay buffer, and the end-to-end training
//! loop over retrieval episodes.

use std::fs::File;
use std::io::{BufWriter, Read as _, Write as _};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::env::{ActionQuery, EnvError, Environment, TransitionRecord};
use crate::nn::FeedForwardNet;
use crate::prompting::TargetPair;

#[derive(Debug, Error)]
pub enum DdpgError {
    #[error("no usable training pairs")]
    NoPairs,
    #[error("config invalid: {0}")]
    BadConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint magic")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("environment error: {0}")]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub gamma: f64,
    pub tau: f64,
    pub batch: usize,
    pub buffer: usize,
    pub lr: f64,
    /// actor step size; kept below the critic's so the policy tracks a
    /// partially fitted value estimate instead of chasing its noise
    pub actor_lr: f64,
    /// number of training episodes (L)
    pub episodes: usize,
    /// max steps per episode (T)
    pub horizon: usize,
    /// episodes before the first parameter update
    pub warmup_episodes: usize,
    pub dim: usize,
    pub early_stop: f64,
    pub eval_rounds: usize,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.95,
            tau: 0.005,
            batch: 16,
            buffer: 1000,
            lr: 0.001,
            actor_lr: 0.001,
            episodes: 2000,
            horizon: 10,
            warmup_episodes: 10,
            dim: 128,
            early_stop: 0.1,
            eval_rounds: 5,
            hidden: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DdpgError> {
        if self.batch == 0 || self.buffer == 0 || self.horizon == 0 || self.dim == 0 {
            return Err(DdpgError::BadConfig("sizes must be positive".into()));
        }
        if self.batch > self.buffer {
            return Err(DdpgError::BadConfig(format!(
                "batch {} exceeds buffer {}",
                self.batch, self.buffer
            )));
        }
        if self.eval_rounds > self.horizon {
            return Err(DdpgError::BadConfig(format!(
                "eval rounds {} exceed horizon {}",
                self.eval_rounds, self.horizon
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.tau) {
            return Err(DdpgError::BadConfig("gamma/tau out of range".into()));
        }
        if self.lr <= 0.0 || self.actor_lr <= 0.0 {
            return Err(DdpgError::BadConfig("learning rates must be positive".into()));
        }
        Ok(())
    }

    pub fn actor_sizes(&self) -> Vec<usize> {
        vec![2 * self.dim, self.hidden, self.hidden, 2 * self.dim]
    }

    pub fn critic_sizes(&self) -> Vec<usize> {
        vec![4 * self.dim, self.hidden, self.hidden, 1]
    }
}

// ---------------------------------------------------------------------------
// Replay buffer and exploration noise
// ---------------------------------------------------------------------------

/// Fixed-capacity ring buffer of transitions; oldest entries are evicted
/// first once full. Sampling is uniform with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<TransitionRecord>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        ReplayBuffer { data: Vec::with_capacity(capacity), capacity, next: 0 }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, t: TransitionRecord) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn sample_indices(&self, batch: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..batch).map(|_| rng.gen_range(0..self.data.len())).collect()
    }

    pub fn sample<'a>(&'a self, batch: usize, rng: &mut ChaCha8Rng) -> Vec<&'a TransitionRecord> {
        self.sample_indices(batch, rng).into_iter().map(|i| &self.data[i]).collect()
    }
}

/// Ornstein–Uhlenbeck process: x += theta * (mu - x) * dt + sigma * sqrt(dt) * eps.
#[derive(Debug, Clone)]
pub struct OUNoise {
    pub x: Vec<f64>,
    pub theta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub dt: f64,
    rng: ChaCha8Rng,
}

impl OUNoise {
    pub fn new(dim: usize, seed: u64) -> Self {
        OUNoise {
            x: vec![0.0; dim],
            theta: 0.15,
            mu: 0.0,
            sigma: 0.1,
            dt: 1.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn reset(&mut self) {
        self.x.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn sample(&mut self) -> Vec<f64> {
        let scale = self.sigma * self.dt.sqrt();
        for v in &mut self.x {
            let eps: f64 = self.rng.sample(StandardNormal);
            *v += self.theta * (self.mu - *v) * self.dt + scale * eps;
        }
        self.x.clone()
    }
}

// ---------------------------------------------------------------------------
// Forward passes and updates
// ---------------------------------------------------------------------------

pub fn actor_forward(net: &FeedForwardNet, s: &[f64], clip: f64) -> ActionQuery {
    let a = net.forward(s).iter().map(|x| x.clamp(-clip, clip)).collect();
    ActionQuery { a }
}

pub fn critic_forward(net: &FeedForwardNet, s: &[f64], a: &[f64]) -> f64 {
    let mut input = Vec::with_capacity(s.len() + a.len());
    input.extend_from_slice(s);
    input.extend_from_slice(a);
    net.forward(&input)[0]
}

/// Mean squared error of the critic against fixed per-sample targets,
/// with the full parameter gradient. Exposed separately so the gradient
/// can be checked by finite differences.
pub fn critic_loss_grad(
    critic: &FeedForwardNet,
    batch: &[&TransitionRecord],
    targets: &[f64],
) -> (f64, Vec<f64>) {
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut grads = vec![0.0; critic.num_params()];
    for (t, &target) in batch.iter().zip(targets) {
        let mut input = t.state.clone();
        input.extend_from_slice(&t.action);
        let trace = critic.forward_trace(&input);
        let q = trace.output()[0];
        let err = q - target;
        loss += err * err / n;
        let (g, _) = critic.backward(&trace, &[2.0 * err / n]);
        for (acc, gi) in grads.iter_mut().zip(&g) {
            *acc += gi;
        }
    }
    (loss, grads)
}

/// One critic regression step (targets from the frozen target networks).
/// Returns the pre-step loss; on a non-finite loss or gradient no
/// parameters are touched and `None` is returned so the caller can abort
/// with the last good state intact.
pub fn critic_update(
    critic: &mut FeedForwardNet,
    critic_target: &FeedForwardNet,
    actor_target: &FeedForwardNet,
    batch: &[&TransitionRecord],
    gamma: f64,
    lr: f64,
    clip: f64,
) -> Option<f64> {
    assert!(!batch.is_empty(), "critic_update: empty minibatch");
    let targets: Vec<f64> = batch
        .iter()
        .map(|t| {
            // past the end of an episode there is nothing left to earn,
            // so terminal transitions use the bare reward as the target
            let boot = if t.done {
                t.reward
            } else {
                let a_next = actor_forward(actor_target, &t.next_state, clip);
                t.reward + gamma * critic_forward(critic_target, &t.next_state, &a_next.a)
            };
            // The reward telescopes over |p - y| in [0, 1], so every true
            // discounted return lies in [-1, 1]; clamping the bootstrap
            // target there blocks the overestimation spiral without
            // biasing any reachable value.
            boot.clamp(-1.0, 1.0)
        })
        .collect();
    let (loss, grads) = critic_loss_grad(critic, batch, &targets);
    if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
        return None;
    }
    critic.apply_adam(&grads, lr);
    Some(loss)
}

/// Mean critic value of the actor's (clipped) actions over a state batch
/// plus the gradient with respect to the actor parameters, routed through
/// an arbitrary differentiable critic `(q, dq_da) = critic_fn(s, a)`.
pub fn actor_objective_grad<F>(
    actor: &FeedForwardNet,
    states: &[Vec<f64>],
    clip: f64,
    mut critic_fn: F,
) -> (f64, Vec<f64>)
where
    F: FnMut(&[f64], &[f64]) -> (f64, Vec<f64>),
{
    let n = states.len() as f64;
    let mut mean_q = 0.0;
    let mut grads = vec![0.0; actor.num_params()];
    for s in states {
        let trace = actor.forward_trace(s);
        let raw = trace.output();
        let a: Vec<f64> = raw.iter().map(|x| x.clamp(-clip, clip)).collect();
        let (q, mut dq_da) = critic_fn(s, &a);
        mean_q += q / n;
        // clipped coordinates sit on the clamp plateau: zero subgradient
        for (d, r) in dq_da.iter_mut().zip(raw) {
            if r.abs() > clip {
                *d = 0.0;
            }
            *d /= n;
        }
        let (g, _) = actor.backward(&trace, &dq_da);
        for (acc, gi) in grads.iter_mut().zip(&g) {
            *acc += gi;
        }
    }
    (mean_q, grads)
}

/// One deterministic-policy-gradient ascent step on the actor, critic
/// frozen. Returns the pre-step mean Q, or `None` on non-finite values
/// (no parameters touched).
pub fn actor_update(
    actor: &mut FeedForwardNet,
    critic: &FeedForwardNet,
    states: &[Vec<f64>],
    lr: f64,
    clip: f64,
) -> Option<f64> {
    assert!(!states.is_empty(), "actor_update: empty minibatch");
    let (mean_q, grads) = actor_objective_grad(actor, states, clip, |s, a| {
        let mut input = Vec::with_capacity(s.len() + a.len());
        input.extend_from_slice(s);
        input.extend_from_slice(a);
        let trace = critic.forward_trace(&input);
        let q = trace.output()[0];
        let (_, dx) = critic.backward(&trace, &[1.0]);
        (q, dx[s.len()..].to_vec())
    });
    if !mean_q.is_finite() || grads.iter().any(|g| !g.is_finite()) {
        return None;
    }
    // ascend: Adam minimizes, so feed the negated gradient
    let neg: Vec<f64> = grads.iter().map(|g| -g).collect();
    actor.apply_adam(&neg, lr);
    Some(mean_q)
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

/// One candidate training episode target.
#[derive(Debug, Clone, Copy)]
pub struct TrainPair {
    pub target: TargetPair,
    pub y: u8,
    /// true if the item belongs to the long tail; tail pairs are
    /// sampled preferentially during training
    pub tail: bool,
}

#[derive(Debug, Clone)]
pub struct UpdateRecord {
    pub update_idx: usize,
    pub critic_loss: f64,
    pub actor_objective: f64,
}

#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub ret: f64,
    pub p0: f64,
    pub p_final: f64,
    pub y: u8,
}

pub struct TrainOutput {
    pub actor: FeedForwardNet,
    pub critic: FeedForwardNet,
    pub actor_target: FeedForwardNet,
    pub critic_target: FeedForwardNet,
    pub update_curve: Vec<UpdateRecord>,
    pub episode_curve: Vec<EpisodeRecord>,
    /// set if training stopped early on a numeric fault; networks hold
    /// the last good parameters
    pub aborted: Option<String>,
}

/// probability of drawing a tail pair when both pools are nonempty
const TAIL_SAMPLE_PROB: f64 = 0.8;

/// scale of the random component mixed into the actor's identity init
const ACTOR_INIT_NOISE: f64 = 0.05;

fn sample_pair<'a>(
    pairs: &'a [TrainPair],
    tail_idx: &[usize],
    rng: &mut ChaCha8Rng,
) -> &'a TrainPair {
    if !tail_idx.is_empty() && tail_idx.len() < pairs.len() {
        if rng.gen_bool(TAIL_SAMPLE_PROB) {
            return &pairs[tail_idx[rng.gen_range(0..tail_idx.len())]];
        }
        return &pairs[rng.gen_range(0..pairs.len())];
    }
    &pairs[rng.gen_range(0..pairs.len())]
}

/// Full training procedure: roll episodes with the target actor plus OU
/// noise, store transitions, and after the warmup period run one critic
/// step, one actor step, and soft target updates per environment step.
pub fn train(
    cfg: &TrainConfig,
    env: &Environment,
    pairs: &[TrainPair],
    seed: u64,
) -> Result<TrainOutput, DdpgError> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(DdpgError::NoPairs);
    }
    let clip = env.action_clip();
    // The action space is the embedding space itself, so the identity map
    // is a natural starting policy: the first query echoes the target
    // pair's own embeddings, which retrieves the target item and a nearby
    // user and keeps early rewards from being hopelessly sparse.
    let mut actor = FeedForwardNet::near_identity(&cfg.actor_sizes(), seed, ACTOR_INIT_NOISE);
    let mut critic = FeedForwardNet::new(&cfg.critic_sizes(), seed.wrapping_add(1));
    let mut actor_target = actor.clone();
    let mut critic_target = critic.clone();
    let mut noise = OUNoise::new(2 * cfg.dim, seed.wrapping_add(2));
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
    let mut buffer = ReplayBuffer::new(cfg.buffer);
    let tail_idx: Vec<usize> =
        pairs.iter().enumerate().filter(|(_, p)| p.tail).map(|(i, _)| i).collect();

    let mut update_curve = Vec::new();
    let mut episode_curve = Vec::new();
    let mut aborted = None;

    'outer: for ep in 0..cfg.episodes {
        // resample on pairs whose target user has no usable history
        let mut state = None;
        for _ in 0..50 {
            let p = sample_pair(pairs, &tail_idx, &mut rng);
            match env.init_episode(p.target, p.y) {
                Ok(st) => {
                    state = Some(st);
                    break;
                }
                Err(EnvError::Prompt(_)) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        let mut st = state.ok_or(DdpgError::NoPairs)?;
        noise.reset();
        let p0 = st.p_current;
        let mut ret = 0.0;

        while !st.done {
            let mut a = actor_forward(&actor_target, &st.s, clip);
            for (ai, ni) in a.a.iter_mut().zip(noise.sample()) {
                *ai = (*ai + ni).clamp(-clip, clip);
            }
            let s_before = st.s.clone();
            let out = match env.step(&mut st, &a) {
                Ok(o) => o,
                // small candidate pools can run dry before the horizon
                Err(EnvError::PoolExhausted(_)) => break,
                Err(e) => return Err(e.into()),
            };
            ret += out.reward;
            buffer.push(TransitionRecord {
                state: s_before,
                action: a.a,
                reward: out.reward,
                next_state: st.s.clone(),
                done: out.done,
            });

            if ep >= cfg.warmup_episodes && buffer.len() >= cfg.batch {
                let batch = buffer.sample(cfg.batch, &mut rng);
                let loss = critic_update(
                    &mut critic,
                    &critic_target,
                    &actor_target,
                    &batch,
                    cfg.gamma,
                    cfg.lr,
                    clip,
                );
                let states: Vec<Vec<f64>> = batch.iter().map(|t| t.state.clone()).collect();
                let obj = loss
                    .and_then(|_| actor_update(&mut actor, &critic, &states, cfg.actor_lr, clip));
                match (loss, obj) {
                    (Some(l), Some(o)) => {
                        critic_target.soft_update_from(&critic, cfg.tau);
                        actor_target.soft_update_from(&actor, cfg.tau);
                        update_curve.push(UpdateRecord {
                            update_idx: update_curve.len(),
                            critic_loss: l,
                            actor_objective: o,
                        });
                    }
                    _ => {
                        aborted = Some(format!("non-finite update at episode {ep}"));
                        break 'outer;
                    }
                }
            }
        }
        episode_curve.push(EpisodeRecord {
            episode: ep,
            ret,
            p0,
            p_final: st.p_current,
            y: st.y_gt,
        });
    }

    Ok(TrainOutput {
        actor,
        critic,
        actor_target,
        critic_target,
        update_curve,
        episode_curve,
        aborted,
    })
}

// ---------------------------------------------------------------------------
// Curve files and checkpoints
// ---------------------------------------------------------------------------

pub fn write_update_curve(path: &Path, curve: &[UpdateRecord]) -> Result<(), DdpgError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "update_idx,critic_loss,actor_objective")?;
    for r in curve {
        writeln!(w, "{},{},{}", r.update_idx, r.critic_loss, r.actor_objective)?;
    }
    Ok(())
}

pub fn write_episode_curve(path: &Path, curve: &[EpisodeRecord]) -> Result<(), DdpgError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "episode,return,p0,p_final,y")?;
    for r in curve {
        writeln!(w, "{},{},{},{},{}", r.episode, r.ret, r.p0, r.p_final, r.y)?;
    }
    Ok(())
}

const CKPT_MAGIC: &[u8; 4] = b"CRLP";
const CKPT_VERSION: u32 = 1;

/// Little-endian binary checkpoint of a list of networks (layer sizes
/// plus 32-bit parameters).
pub fn save_checkpoint(path: &Path, nets: &[&FeedForwardNet]) -> Result<(), DdpgError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CKPT_MAGIC)?;
    w.write_all(&CKPT_VERSION.to_le_bytes())?;
    w.write_all(&(nets.len() as u32).to_le_bytes())?;
    for net in nets {
        w.write_all(&(net.sizes().len() as u32).to_le_bytes())?;
        for &s in net.sizes() {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        for &p in net.params() {
            w.write_all(&(p as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<FeedForwardNet>, DdpgError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    load_checkpoint_bytes(&bytes)
}

pub fn load_checkpoint_bytes(bytes: &[u8]) -> Result<Vec<FeedForwardNet>, DdpgError> {
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], DdpgError> {
        let end = pos.checked_add(n).ok_or(DdpgError::Truncated)?;
        if end > bytes.len() {
            return Err(DdpgError::Truncated);
        }
        let out = &bytes[*pos..end];
        *pos = end;
        Ok(out)
    };
    let read_u32 = |pos: &mut usize| -> Result<u32, DdpgError> {
        Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
    };
    if take(&mut pos, 4)? != CKPT_MAGIC {
        return Err(DdpgError::BadMagic);
    }
    let version = read_u32(&mut pos)?;
    if version != CKPT_VERSION {
        return Err(DdpgError::BadVersion(version));
    }
    let n_nets = read_u32(&mut pos)? as usize;
    if n_nets > 64 {
        return Err(DdpgError::Truncated);
    }
    let mut nets = Vec::with_capacity(n_nets);
    for _ in 0..n_nets {
        let n_sizes = read_u32(&mut pos)? as usize;
        if !(2..=16).contains(&n_sizes) {
            return Err(DdpgError::Truncated);
        }
        let mut sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            let s = read_u32(&mut pos)? as usize;
            if s == 0 || s > 1 << 20 {
                return Err(DdpgError::Truncated);
            }
            sizes.push(s);
        }
        let mut net = FeedForwardNet::zeros(&sizes);
        let n_params = net.num_params();
        let raw = take(&mut pos, n_params * 4)?;
        for (i, chunk) in raw.chunks_exact(4).enumerate() {
            net.params_mut()[i] = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        }
        nets.push(net);
    }
    if pos != bytes.len() {
        return Err(DdpgError::Truncated);
    }
    Ok(nets)
}
