//! User/item embedding tables and warm-start pretraining on head-item
//! data. Two collaborative filtering backbones sit behind one interface:
//! logistic matrix factorization and a small wide-plus-deep model.
//! Either produces an [`EmbeddingTable`] tagged with its provenance.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::nn::{adam_step, sigmoid, AdamState, FeedForwardNet};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes (expected CRLE)")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("file truncated")]
    Truncated,
    #[error("index out of range: {kind} {idx}")]
    UnknownIndex { kind: &'static str, idx: usize },
    #[error("NaN loss at epoch {epoch} (lr too high or degenerate data)")]
    NanLoss { epoch: usize },
    #[error("empty training set")]
    EmptyTrainingSet,
}

const MAGIC: &[u8; 4] = b"CRLE";
const VERSION: u8 = 1;

/// d-dimensional user and item vectors plus biases, used both as the
/// policy's state source and as the retrieval index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub n_users: usize,
    pub n_items: usize,
    /// row-major, `n_users x dim`
    pub users: Vec<f32>,
    /// row-major, `n_items x dim`
    pub items: Vec<f32>,
    pub user_bias: Vec<f32>,
    pub item_bias: Vec<f32>,
    pub global_bias: f32,
    pub provenance: String,
}

impl EmbeddingTable {
    pub fn user_vec(&self, u: usize) -> &[f32] {
        &self.users[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item_vec(&self, i: usize) -> &[f32] {
        &self.items[i * self.dim..(i + 1) * self.dim]
    }

    /// Largest absolute coordinate across both matrices; used as the
    /// action clipping bound.
    pub fn max_abs_coord(&self) -> f64 {
        self.users
            .iter()
            .chain(&self.items)
            .fold(0.0f32, |m, &x| m.max(x.abs())) as f64
    }
}

/// i.i.d. standard normal table from a seeded PRNG, zero biases.
pub fn init_random(seed: u64, n_users: usize, n_items: usize, d: usize) -> EmbeddingTable {
    assert!(d >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<f32> {
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) as f32).collect()
    };
    let users = draw(n_users * d);
    let items = draw(n_items * d);
    EmbeddingTable {
        dim: d,
        n_users,
        n_items,
        users,
        items,
        user_bias: vec![0.0; n_users],
        item_bias: vec![0.0; n_items],
        global_bias: 0.0,
        provenance: "random".into(),
    }
}

/// σ(u·i + b_u + b_i + b_0) for a stored table.
pub fn predict_affinity(
    table: &EmbeddingTable,
    user: usize,
    item: usize,
) -> Result<f64, EmbeddingError> {
    if user >= table.n_users {
        return Err(EmbeddingError::UnknownIndex { kind: "user", idx: user });
    }
    if item >= table.n_items {
        return Err(EmbeddingError::UnknownIndex { kind: "item", idx: item });
    }
    let dot: f64 = table
        .user_vec(user)
        .iter()
        .zip(table.item_vec(item))
        .map(|(a, b)| *a as f64 * *b as f64)
        .sum();
    Ok(sigmoid(
        dot + table.user_bias[user] as f64 + table.item_bias[item] as f64 + table.global_bias as f64,
    ))
}

/// One binarized training observation over dense indices.
#[derive(Debug, Clone, Copy)]
pub struct TrainSample {
    pub user: usize,
    pub item: usize,
    pub label: u8,
}

#[derive(Debug, Clone)]
pub enum Backbone {
    /// logistic matrix factorization
    Mf,
    /// wide linear biases plus a feed-forward net over [u; i]; with no
    /// hidden layers the deep part degenerates to the dot product, i.e.
    /// the MF score form
    WideDeep { hidden: Vec<usize> },
}

impl Backbone {
    pub fn tag(&self) -> &'static str {
        match self {
            Backbone::Mf => "mf",
            Backbone::WideDeep { .. } => "widedeep",
        }
    }
}

/// Flat-parameter trainer for either backbone. Layout of `theta`:
/// user matrix, item matrix, user biases, item biases, global bias,
/// then (wide+deep only) the deep net parameters.
pub struct CfTrainer {
    backbone: Backbone,
    d: usize,
    n_users: usize,
    n_items: usize,
    pub theta: Vec<f64>,
    net: Option<FeedForwardNet>,
}

impl CfTrainer {
    pub fn new(backbone: Backbone, seed: u64, n_users: usize, n_items: usize, d: usize) -> Self {
        let init = init_random(seed, n_users, n_items, d);
        let net = match &backbone {
            Backbone::WideDeep { hidden } if !hidden.is_empty() => {
                let mut sizes = vec![2 * d];
                sizes.extend_from_slice(hidden);
                sizes.push(1);
                Some(FeedForwardNet::new(&sizes, seed.wrapping_add(1)))
            }
            _ => None,
        };
        let mut theta = Vec::new();
        theta.extend(init.users.iter().map(|&x| x as f64));
        theta.extend(init.items.iter().map(|&x| x as f64));
        theta.extend(std::iter::repeat(0.0).take(n_users + n_items + 1));
        if let Some(n) = &net {
            theta.extend_from_slice(n.params());
        }
        CfTrainer { backbone, d, n_users, n_items, theta, net }
    }

    fn off_items(&self) -> usize {
        self.n_users * self.d
    }
    fn off_ubias(&self) -> usize {
        self.off_items() + self.n_items * self.d
    }
    fn off_ibias(&self) -> usize {
        self.off_ubias() + self.n_users
    }
    fn off_gbias(&self) -> usize {
        self.off_ibias() + self.n_items
    }
    fn off_net(&self) -> usize {
        self.off_gbias() + 1
    }

    fn sync_net(&mut self) {
        let off = self.off_net();
        if let Some(n) = &mut self.net {
            let len = n.num_params();
            n.params_mut().copy_from_slice(&self.theta[off..off + len]);
        }
    }

    /// Mean BCE loss over `samples` and its gradient w.r.t. `theta`.
    pub fn loss_and_grad(&mut self, samples: &[TrainSample]) -> (f64, Vec<f64>) {
        self.sync_net();
        let d = self.d;
        let (oi, ou, ob, og, on) =
            (self.off_items(), self.off_ubias(), self.off_ibias(), self.off_gbias(), self.off_net());
        let mut grads = vec![0.0; self.theta.len()];
        let mut loss = 0.0;
        let scale = 1.0 / samples.len() as f64;
        for s in samples {
            let uo = s.user * d;
            let io = oi + s.item * d;
            let uvec = &self.theta[uo..uo + d];
            let ivec = &self.theta[io..io + d];
            let bias =
                self.theta[ou + s.user] + self.theta[ob + s.item] + self.theta[og];
            let (z, net_bwd): (f64, Option<(Vec<f64>, Vec<f64>)>) = match (&self.backbone, &self.net)
            {
                (Backbone::Mf, _) | (Backbone::WideDeep { .. }, None) => {
                    let dot: f64 = uvec.iter().zip(ivec).map(|(a, b)| a * b).sum();
                    (bias + dot, None)
                }
                (Backbone::WideDeep { .. }, Some(net)) => {
                    let mut x = Vec::with_capacity(2 * d);
                    x.extend_from_slice(uvec);
                    x.extend_from_slice(ivec);
                    let trace = net.forward_trace(&x);
                    let out = trace.output()[0];
                    let (ng, dx) = net.backward(&trace, &[1.0]);
                    (bias + out, Some((ng, dx)))
                }
            };
            let p = sigmoid(z);
            let y = s.label as f64;
            // clamped log for numerical safety at saturation
            loss -= scale * (y * p.max(1e-12).ln() + (1.0 - y) * (1.0 - p).max(1e-12).ln());
            let dz = scale * (p - y);
            grads[ou + s.user] += dz;
            grads[ob + s.item] += dz;
            grads[og] += dz;
            match net_bwd {
                None => {
                    for k in 0..d {
                        grads[uo + k] += dz * self.theta[io + k];
                        grads[io + k] += dz * self.theta[uo + k];
                    }
                }
                Some((ng, dx)) => {
                    for k in 0..d {
                        grads[uo + k] += dz * dx[k];
                        grads[io + k] += dz * dx[d + k];
                    }
                    for (k, g) in ng.iter().enumerate() {
                        grads[on + k] += dz * g;
                    }
                }
            }
        }
        (loss, grads)
    }

    /// Minibatch Adam training. Returns the per-epoch full-batch BCE curve.
    pub fn train(
        &mut self,
        samples: &[TrainSample],
        epochs: usize,
        lr: f64,
        batch: usize,
        seed: u64,
    ) -> Result<Vec<f64>, EmbeddingError> {
        if samples.is_empty() {
            return Err(EmbeddingError::EmptyTrainingSet);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut adam = AdamState::new(self.theta.len());
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut curve = Vec::with_capacity(epochs);
        for epoch in 0..epochs {
            for k in 0..order.len() {
                let j = rng.gen_range(k..order.len());
                order.swap(k, j);
            }
            for chunk in order.chunks(batch.max(1)) {
                let mb: Vec<TrainSample> = chunk.iter().map(|&ix| samples[ix]).collect();
                let (loss, grads) = self.loss_and_grad(&mb);
                if !loss.is_finite() {
                    return Err(EmbeddingError::NanLoss { epoch });
                }
                adam_step(&mut self.theta, &grads, &mut adam, lr);
            }
            let (full, _) = self.loss_and_grad(samples);
            curve.push(full);
        }
        Ok(curve)
    }

    pub fn into_table(self) -> EmbeddingTable {
        let (oi, ou, ob, og) =
            (self.off_items(), self.off_ubias(), self.off_ibias(), self.off_gbias());
        let mut table = EmbeddingTable {
            dim: self.d,
            n_users: self.n_users,
            n_items: self.n_items,
            users: self.theta[..oi].iter().map(|&x| x as f32).collect(),
            items: self.theta[oi..ou].iter().map(|&x| x as f32).collect(),
            user_bias: self.theta[ou..ob].iter().map(|&x| x as f32).collect(),
            item_bias: self.theta[ob..og].iter().map(|&x| x as f32).collect(),
            global_bias: self.theta[og] as f32,
            provenance: self.backbone.tag().into(),
        };
        // The policy's action space is this coordinate space: rescale it
        // to a unit coordinate range so actions, exploration noise, and
        // the bounded state encoding share one scale. Nearest-neighbor
        // retrieval is invariant under the rescaling, and the affinity
        // scores change only by a monotone transform (biases absorb the
        // squared factor), so rankings are untouched.
        let c = table.max_abs_coord() as f32;
        if c > 0.0 {
            for x in table.users.iter_mut().chain(&mut table.items) {
                *x /= c;
            }
            for b in table.user_bias.iter_mut().chain(&mut table.item_bias) {
                *b /= c * c;
            }
            table.global_bias /= c * c;
        }
        table
    }
}

/// Logistic MF pretraining on head-item data.
pub fn pretrain_mf(
    samples: &[TrainSample],
    n_users: usize,
    n_items: usize,
    d: usize,
    epochs: usize,
    lr: f64,
    batch: usize,
    seed: u64,
) -> Result<(EmbeddingTable, Vec<f64>), EmbeddingError> {
    let mut t = CfTrainer::new(Backbone::Mf, seed, n_users, n_items, d);
    let curve = if epochs > 0 { t.train(samples, epochs, lr, batch, seed)? } else { Vec::new() };
    let mut table = t.into_table();
    if epochs == 0 {
        table.provenance = "random".into();
    }
    Ok((table, curve))
}

/// Wide-plus-deep pretraining; embeddings are read off the learned input
/// table.
#[allow(clippy::too_many_arguments)]
pub fn pretrain_widedeep(
    samples: &[TrainSample],
    n_users: usize,
    n_items: usize,
    d: usize,
    hidden: &[usize],
    epochs: usize,
    lr: f64,
    batch: usize,
    seed: u64,
) -> Result<(EmbeddingTable, Vec<f64>), EmbeddingError> {
    let mut t = CfTrainer::new(
        Backbone::WideDeep { hidden: hidden.to_vec() },
        seed,
        n_users,
        n_items,
        d,
    );
    let curve = if epochs > 0 { t.train(samples, epochs, lr, batch, seed)? } else { Vec::new() };
    Ok((t.into_table(), curve))
}

// ---------------------------------------------------------------------------
// Binary file format: magic "CRLE", version u8, d/n_users/n_items u32 LE,
// user matrix, item matrix, user biases, item biases, global bias as f32 LE
// row-major, then a length-prefixed provenance tag.
// ---------------------------------------------------------------------------

fn write_f32s<W: Write>(w: &mut W, xs: &[f32]) -> std::io::Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), EmbeddingError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            EmbeddingError::Truncated
        } else {
            EmbeddingError::Io(e)
        }
    })
}

fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f32>, EmbeddingError> {
    let mut buf = vec![0u8; n * 4];
    read_exact_or_truncated(r, &mut buf)?;
    Ok(buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub fn save_table(table: &EmbeddingTable, path: &Path) -> Result<(), EmbeddingError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(table.dim as u32).to_le_bytes())?;
    w.write_all(&(table.n_users as u32).to_le_bytes())?;
    w.write_all(&(table.n_items as u32).to_le_bytes())?;
    write_f32s(&mut w, &table.users)?;
    write_f32s(&mut w, &table.items)?;
    write_f32s(&mut w, &table.user_bias)?;
    write_f32s(&mut w, &table.item_bias)?;
    write_f32s(&mut w, &[table.global_bias])?;
    let tag = table.provenance.as_bytes();
    w.write_all(&(tag.len() as u16).to_le_bytes())?;
    w.write_all(tag)?;
    Ok(())
}

pub fn load_table(path: &Path) -> Result<EmbeddingTable, EmbeddingError> {
    let data = std::fs::read(path)?;
    load_table_bytes(&data)
}

pub fn load_table_bytes(data: &[u8]) -> Result<EmbeddingTable, EmbeddingError> {
    let mut r = std::io::Cursor::new(data);
    let mut magic = [0u8; 4];
    read_exact_or_truncated(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(EmbeddingError::BadMagic);
    }
    let mut v = [0u8; 1];
    read_exact_or_truncated(&mut r, &mut v)?;
    if v[0] != VERSION {
        return Err(EmbeddingError::BadVersion(v[0]));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut std::io::Cursor<&[u8]>| -> Result<usize, EmbeddingError> {
        read_exact_or_truncated(r, &mut u32buf)?;
        Ok(u32::from_le_bytes(u32buf) as usize)
    };
    let dim = read_u32(&mut r)?;
    let n_users = read_u32(&mut r)?;
    let n_items = read_u32(&mut r)?;
    // guard against absurd sizes from corrupt headers before allocating
    let total = dim
        .checked_mul(n_users + n_items)
        .and_then(|x| x.checked_add(n_users + n_items + 1))
        .ok_or(EmbeddingError::Truncated)?;
    if total.checked_mul(4).map_or(true, |bytes| bytes > data.len()) {
        return Err(EmbeddingError::Truncated);
    }
    let users = read_f32s(&mut r, n_users * dim)?;
    let items = read_f32s(&mut r, n_items * dim)?;
    let user_bias = read_f32s(&mut r, n_users)?;
    let item_bias = read_f32s(&mut r, n_items)?;
    let global_bias = read_f32s(&mut r, 1)?[0];
    let mut len_buf = [0u8; 2];
    read_exact_or_truncated(&mut r, &mut len_buf)?;
    let tag_len = u16::from_le_bytes(len_buf) as usize;
    let mut tag = vec![0u8; tag_len];
    read_exact_or_truncated(&mut r, &mut tag)?;
    let provenance = String::from_utf8(tag).map_err(|_| EmbeddingError::Truncated)?;
    Ok(EmbeddingTable {
        dim,
        n_users,
        n_items,
        users,
        items,
        user_bias,
        item_bias,
        global_bias,
        provenance,
    })
}
