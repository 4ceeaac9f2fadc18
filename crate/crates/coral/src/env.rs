//! The retrieval MDP: episode state, nearest-neighbor retrieval of the
//! next user/item pair from a continuous query, marginal-information-gain
//! reward, a frozen transition encoder, and episode stepping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::embeddings::EmbeddingTable;
use crate::dataset::RatingMatrix;
use crate::oracle::Oracle;
use crate::prompting::{
    render_prompt, select_supp_items, MetaIndex, PromptContext, PromptError, TargetPair,
};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("prompt error: {0}")]
    Prompt(#[from] PromptError),
    #[error("candidate pool exhausted for {0}")]
    PoolExhausted(&'static str),
    #[error("episode already finished")]
    EpisodeDone,
    #[error("action has non-finite coordinates")]
    NonFiniteAction,
}

/// Continuous retrieval query: first `d` coordinates address the user
/// space, the last `d` the item space.
#[derive(Debug, Clone)]
pub struct ActionQuery {
    pub a: Vec<f64>,
}

impl ActionQuery {
    pub fn user_query(&self) -> &[f64] {
        &self.a[..self.a.len() / 2]
    }

    pub fn item_query(&self) -> &[f64] {
        &self.a[self.a.len() / 2..]
    }
}

/// One replay-buffer entry.
#[derive(Debug, Clone)]
pub struct TransitionRecord {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// episode ended at this step (horizon reached or early stop); the
    /// value target must not bootstrap past the end of an episode
    pub done: bool,
}

/// Frozen affine-plus-tanh state transition map: only the actor and
/// critic learn; stored transitions keep already-encoded states, so this
/// map stays fixed after seeded construction.
#[derive(Debug, Clone)]
pub struct TransitionEncoder {
    dim: usize,
    weights: Vec<f64>, // 2d x 4d row-major
    bias: Vec<f64>,    // 2d
}

impl TransitionEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, cols) = (2 * dim, 4 * dim);
        let scale = 1.0 / (cols as f64).sqrt();
        let weights =
            (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal) * scale).collect();
        let bias = (0..rows).map(|_| rng.sample::<f64, _>(StandardNormal) * scale).collect();
        TransitionEncoder { dim, weights, bias }
    }

    /// s' = tanh(W [s; u'; i'] + b)
    pub fn encode(&self, state: &[f64], user_emb: &[f32], item_emb: &[f32]) -> Vec<f64> {
        assert_eq!(state.len(), 2 * self.dim, "encode: state dimension mismatch");
        assert_eq!(user_emb.len(), self.dim, "encode: user embedding dimension mismatch");
        assert_eq!(item_emb.len(), self.dim, "encode: item embedding dimension mismatch");
        let cols = 4 * self.dim;
        let mut input = Vec::with_capacity(cols);
        input.extend_from_slice(state);
        input.extend(user_emb.iter().map(|&x| x as f64));
        input.extend(item_emb.iter().map(|&x| x as f64));
        (0..2 * self.dim)
            .map(|r| {
                let row = &self.weights[r * cols..(r + 1) * cols];
                let z: f64 =
                    row.iter().zip(&input).map(|(w, x)| w * x).sum::<f64>() + self.bias[r];
                z.tanh()
            })
            .collect()
    }
}

/// r_t = |p_{t-1} - y| - |p_t - y|
pub fn compute_reward(p_prev: f64, p_cur: f64, y_gt: u8) -> f64 {
    let y = y_gt as f64;
    (p_prev - y).abs() - (p_cur - y).abs()
}

/// Nearest candidate by Euclidean distance, skipping excluded indices;
/// ties go to the smaller index.
fn nearest(query: &[f64], table: &[f32], dim: usize, n: usize, excluded: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for idx in 0..n {
        if excluded.contains(&idx) {
            continue;
        }
        let row = &table[idx * dim..(idx + 1) * dim];
        let d2: f64 = row
            .iter()
            .zip(query)
            .map(|(&e, &q)| {
                let diff = e as f64 - q;
                diff * diff
            })
            .sum();
        match best {
            Some((_, bd)) if d2 >= bd => {}
            _ => best = Some((idx, d2)),
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub dim: usize,
    /// max retrieval steps per episode (the paper's T)
    pub horizon: usize,
    /// training-time early stop threshold on |p - y|; None disables
    /// (evaluation runs fixed-length)
    pub early_stop: Option<f64>,
    pub y_thresh: u8,
    /// cap on supporting items in the prompt
    pub m_max: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig { dim: 128, horizon: 10, early_stop: Some(0.1), y_thresh: 4, m_max: 20 }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub s: Vec<f64>,
    pub ctx: PromptContext,
    pub p_current: f64,
    pub y_gt: u8,
    pub t: usize,
    pub done: bool,
    /// true if any oracle response in this episode was degraded
    pub degraded: bool,
}

pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub retrieved_user: usize,
    pub retrieved_item: usize,
}

/// One episode's environment view: read-only embedding table, training
/// rating matrix, item metadata, a frozen transition encoder, and the
/// oracle. Instances are independent and thread-safe over shared
/// read-only data.
pub struct Environment<'a> {
    pub table: &'a EmbeddingTable,
    pub matrix: &'a RatingMatrix,
    pub meta: &'a MetaIndex,
    pub encoder: &'a TransitionEncoder,
    pub oracle: &'a Oracle,
    pub config: EnvConfig,
    clip: f64,
}

impl<'a> Environment<'a> {
    pub fn new(
        table: &'a EmbeddingTable,
        matrix: &'a RatingMatrix,
        meta: &'a MetaIndex,
        encoder: &'a TransitionEncoder,
        oracle: &'a Oracle,
        config: EnvConfig,
    ) -> Self {
        let clip = table.max_abs_coord();
        Environment { table, matrix, meta, encoder, oracle, config, clip }
    }

    /// Action clipping bound: the largest absolute coordinate in the
    /// embedding table, keeping queries inside the populated region.
    pub fn action_clip(&self) -> f64 {
        self.clip
    }

    pub fn init_episode(&self, z: TargetPair, y_gt: u8) -> Result<EpisodeState, EnvError> {
        let supp = select_supp_items(z.user, self.matrix, self.config.m_max)?;
        // the target pair itself may sit in the training matrix; listing
        // it as a supporting item would hand the oracle the label
        let supp_items: Vec<(usize, u8)> = supp
            .into_iter()
            .filter(|&i| i != z.item)
            .map(|i| {
                let label = self.matrix.label(z.user, i).expect("supp items are rated");
                (i, label)
            })
            .collect();
        let ctx = PromptContext::new(z, supp_items)?;
        let mut s = Vec::with_capacity(2 * self.config.dim);
        s.extend(self.table.user_vec(z.user).iter().map(|&x| x as f64));
        s.extend(self.table.item_vec(z.item).iter().map(|&x| x as f64));
        let prompt = render_prompt(&ctx, self.meta, self.config.y_thresh)?;
        let resp = self.oracle.query(&prompt, &ctx);
        Ok(EpisodeState {
            s,
            ctx,
            p_current: resp.p_yes,
            y_gt,
            t: 0,
            done: false,
            degraded: resp.degraded,
        })
    }

    /// Eq.-style nearest-neighbor retrieval: nearest eligible user and
    /// item to the clipped query. The target user and all previously
    /// retrieved users/items are excluded; the target item is eligible.
    pub fn retrieve(
        &self,
        action: &ActionQuery,
        already_users: &[usize],
        already_items: &[usize],
        target: TargetPair,
    ) -> Result<(usize, usize), EnvError> {
        if action.a.iter().any(|x| !x.is_finite()) {
            return Err(EnvError::NonFiniteAction);
        }
        let d = self.config.dim;
        let uq: Vec<f64> = action.user_query().iter().map(|x| x.clamp(-self.clip, self.clip)).collect();
        let iq: Vec<f64> = action.item_query().iter().map(|x| x.clamp(-self.clip, self.clip)).collect();
        let mut user_excl = already_users.to_vec();
        user_excl.push(target.user);
        let user = nearest(&uq, &self.table.users, d, self.table.n_users, &user_excl)
            .ok_or(EnvError::PoolExhausted("users"))?;
        let item = nearest(&iq, &self.table.items, d, self.table.n_items, already_items)
            .ok_or(EnvError::PoolExhausted("items"))?;
        Ok((user, item))
    }

    /// One environment step: retrieve, extend the context, re-query the
    /// oracle, compute the marginal-gain reward, and encode the next
    /// state. Oracle degradation yields p = 0.5 rather than failure.
    pub fn step(
        &self,
        state: &mut EpisodeState,
        action: &ActionQuery,
    ) -> Result<StepOutcome, EnvError> {
        if state.done {
            return Err(EnvError::EpisodeDone);
        }
        let (user, item) =
            self.retrieve(action, &state.ctx.coll_users, &state.ctx.coll_items, state.ctx.target)?;
        state.ctx.append_pair(user, item, self.matrix, self.config.y_thresh)?;
        let prompt = render_prompt(&state.ctx, self.meta, self.config.y_thresh)?;
        let resp = self.oracle.query(&prompt, &state.ctx);
        state.degraded |= resp.degraded;
        let reward = compute_reward(state.p_current, resp.p_yes, state.y_gt);
        state.p_current = resp.p_yes;
        state.s = self.encoder.encode(&state.s, self.table.user_vec(user), self.table.item_vec(item));
        state.t += 1;
        let early = self
            .config
            .early_stop
            .map_or(false, |eps| (state.p_current - state.y_gt as f64).abs() < eps);
        state.done = state.t >= self.config.horizon || early;
        Ok(StepOutcome { reward, done: state.done, retrieved_user: user, retrieved_item: item })
    }
}
