//! The frozen prediction oracle: maps a rendered prompt to the
//! probability of answering "Yes", through either a remote
//! chat-completion endpoint or a deterministic simulated oracle backed
//! by a synthetic world. All backends sit behind a persistent
//! append-only cache; backend failures degrade to p = 0.5 instead of
//! aborting an episode.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::SyntheticWorld;
use crate::nn::sigmoid;
use crate::prompting::PromptContext;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("neither Yes nor No variant in top-k logprobs")]
    MissingYesNo,
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("context references {kind} {idx} outside the synthetic world")]
    OutsideWorld { kind: &'static str, idx: usize },
    #[error("http error: {0}")]
    Http(String),
    #[error("malformed completion response: {0}")]
    BadResponse(String),
    #[error("malformed cache line {0}")]
    BadCacheLine(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseSource {
    Remote,
    Cache,
    Simulated,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleResponse {
    pub p_yes: f64,
    pub source: ResponseSource,
    pub degraded: bool,
}

/// A prompt-probability backend. The LLM is frozen: backends carry no
/// learnable state and the same prompt always yields the same value.
pub trait OracleBackend: Send + Sync {
    /// Stable identity used in cache keys, so switching models never
    /// serves stale probabilities.
    fn id(&self) -> String;
    fn source(&self) -> ResponseSource;
    fn query(&self, prompt: &str, ctx: &PromptContext) -> Result<f64, OracleError>;
}

// ---------------------------------------------------------------------------
// Yes/No probability extraction from token logprobs
// ---------------------------------------------------------------------------

const YES_VARIANTS: [&str; 3] = ["Yes", "yes", "YES"];
const NO_VARIANTS: [&str; 3] = ["No", "no", "NO"];

/// p(Yes) from the first generated token's top-k logprobs: probabilities
/// of case variants are summed per answer, then renormalized over the
/// {Yes, No} pair only. Errors if either side is absent entirely.
pub fn remote_extract_p(token_logprobs: &[(String, f64)]) -> Result<f64, OracleError> {
    let mut p_yes = 0.0;
    let mut p_no = 0.0;
    let mut saw_yes = false;
    let mut saw_no = false;
    for (token, lp) in token_logprobs {
        let t = token.trim();
        if YES_VARIANTS.contains(&t) {
            p_yes += lp.exp();
            saw_yes = true;
        } else if NO_VARIANTS.contains(&t) {
            p_no += lp.exp();
            saw_no = true;
        }
    }
    if !saw_yes || !saw_no {
        return Err(OracleError::MissingYesNo);
    }
    Ok(p_yes / (p_yes + p_no))
}

// ---------------------------------------------------------------------------
// Simulated oracle
// ---------------------------------------------------------------------------

/// Deterministic stand-in for the LLM over a synthetic world. It reads
/// nothing outside the context: semantic evidence comes from category
/// overlap between the target item and the user's supporting items, and
/// collaborative evidence from coll users' visible votes weighted by
/// their visible agreement with the target user.
pub struct SimulatedOracle {
    pub world: SyntheticWorld,
    pub w_sem: f64,
    pub w_coll: f64,
}

impl SimulatedOracle {
    pub fn new(world: SyntheticWorld) -> Self {
        SimulatedOracle { world, w_sem: 1.0, w_coll: 3.0 }
    }

    fn check_item(&self, idx: usize) -> Result<(), OracleError> {
        if idx >= self.world.n_items() {
            return Err(OracleError::OutsideWorld { kind: "item", idx });
        }
        Ok(())
    }

    fn check_user(&self, idx: usize) -> Result<(), OracleError> {
        if idx >= self.world.n_users() {
            return Err(OracleError::OutsideWorld { kind: "user", idx });
        }
        Ok(())
    }

    pub fn simulated_query(&self, ctx: &PromptContext) -> Result<f64, OracleError> {
        self.check_user(ctx.target.user)?;
        self.check_item(ctx.target.item)?;
        for &(i, _) in &ctx.supp_items {
            self.check_item(i)?;
        }
        for &i in &ctx.coll_items {
            self.check_item(i)?;
        }
        for &u in &ctx.coll_users {
            self.check_user(u)?;
        }

        let target_cat = self.world.item_category[ctx.target.item];
        let mut sem = 0.0;
        for &(item, label) in &ctx.supp_items {
            if self.world.item_category[item] == target_cat {
                sem += if label == 1 { 1.0 } else { -1.0 };
            }
        }
        sem /= 1.0 + ctx.supp_items.len() as f64;

        // target user's visible labels, by item
        let supp_label: HashMap<usize, u8> = ctx.supp_items.iter().copied().collect();
        // position of the target item among coll items, if retrieved
        let target_pos = ctx.coll_items.iter().position(|&i| i == ctx.target.item);

        let mut vote_sum = 0.0;
        let mut sim_sum = 0.0;
        for &v in &ctx.coll_users {
            let mut agree = 0i64;
            let mut disagree = 0i64;
            let mut comparisons = 0i64;
            for (k, &j) in ctx.coll_items.iter().enumerate() {
                let Some(&y_u) = supp_label.get(&j) else { continue };
                let (pos, neg) = &ctx.coll_partitions[k];
                let v_likes = if pos.contains(&v) {
                    Some(true)
                } else if neg.contains(&v) {
                    Some(false)
                } else {
                    None
                };
                let Some(v_likes) = v_likes else { continue };
                comparisons += 1;
                if v_likes == (y_u == 1) {
                    agree += 1;
                } else {
                    disagree += 1;
                }
            }
            let s = (agree - disagree) as f64 / std::cmp::max(1, comparisons) as f64;
            let vote = match target_pos {
                Some(k) => {
                    let (pos, neg) = &ctx.coll_partitions[k];
                    if pos.contains(&v) {
                        1.0
                    } else if neg.contains(&v) {
                        -1.0
                    } else {
                        0.0
                    }
                }
                None => 0.0,
            };
            vote_sum += s * vote;
            sim_sum += s.abs();
        }
        let coll = vote_sum / f64::max(0.01, sim_sum);

        Ok(sigmoid(self.w_sem * sem + self.w_coll * coll))
    }
}

impl OracleBackend for SimulatedOracle {
    fn id(&self) -> String {
        format!("simulated:seed{}:w{}:{}", self.world.seed, self.w_sem, self.w_coll)
    }

    fn source(&self) -> ResponseSource {
        ResponseSource::Simulated
    }

    fn query(&self, _prompt: &str, ctx: &PromptContext) -> Result<f64, OracleError> {
        self.simulated_query(ctx)
    }
}

// ---------------------------------------------------------------------------
// Remote chat-completion backend
// ---------------------------------------------------------------------------

/// HTTP chat-completion backend requesting per-token logprobs with
/// top-k alternatives. Temperature 0, a single generated token.
pub struct RemoteOracle {
    pub endpoint: String,
    pub model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteOracle {
    pub fn new(endpoint: String, model: String, api_key: Option<String>) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(60))
            .build()
            .expect("client construction cannot fail with static options");
        RemoteOracle { endpoint, model, api_key, client }
    }
}

impl OracleBackend for RemoteOracle {
    fn id(&self) -> String {
        format!("remote:{}:{}", self.endpoint, self.model)
    }

    fn source(&self) -> ResponseSource {
        ResponseSource::Remote
    }

    fn query(&self, prompt: &str, _ctx: &PromptContext) -> Result<f64, OracleError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": 1,
            "temperature": 0,
            "logprobs": true,
            "top_logprobs": 20,
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| OracleError::Http(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(OracleError::Http(format!("status {}", resp.status())));
        }
        let v: serde_json::Value =
            resp.json().map_err(|e| OracleError::BadResponse(e.to_string()))?;
        let top = v
            .pointer("/choices/0/logprobs/content/0/top_logprobs")
            .and_then(|t| t.as_array())
            .ok_or_else(|| OracleError::BadResponse("missing top_logprobs".into()))?;
        let pairs: Vec<(String, f64)> = top
            .iter()
            .filter_map(|e| {
                Some((e.get("token")?.as_str()?.to_string(), e.get("logprob")?.as_f64()?))
            })
            .collect();
        remote_extract_p(&pairs)
    }
}

// ---------------------------------------------------------------------------
// Caching front
// ---------------------------------------------------------------------------

fn cache_key(oracle_id: &str, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(oracle_id.as_bytes());
    h.update([0u8]);
    h.update(prompt.as_bytes());
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse the append-only cache file: `key_hex p_yes oracle_id unix_time`
/// per line. Later entries for the same key win.
pub fn parse_cache_file<R: BufRead>(r: R) -> Result<HashMap<String, f64>, OracleError> {
    let mut map = HashMap::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let (key, p) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(k), Some(p), Some(_id), Some(_t)) => (k, p),
            _ => return Err(OracleError::BadCacheLine(lineno + 1)),
        };
        let p: f64 = p.parse().map_err(|_| OracleError::BadCacheLine(lineno + 1))?;
        if !(0.0..=1.0).contains(&p) || !key.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(OracleError::BadCacheLine(lineno + 1));
        }
        map.insert(key.to_string(), p);
    }
    Ok(map)
}

struct CacheInner {
    map: HashMap<String, f64>,
    writer: Option<std::io::BufWriter<std::fs::File>>,
}

/// The oracle used by the environment: backend + retries + persistent
/// cache. `query` never fails mid-episode; after `retries` failed
/// backend attempts it returns a degraded p = 0.5 response.
pub struct Oracle {
    backend: Box<dyn OracleBackend>,
    retries: usize,
    cache: Mutex<CacheInner>,
    backend_calls: AtomicUsize,
}

impl Oracle {
    pub fn new(
        backend: Box<dyn OracleBackend>,
        cache_path: Option<&Path>,
        retries: usize,
    ) -> Result<Self, OracleError> {
        let (map, writer) = match cache_path {
            Some(p) => {
                let map = if p.exists() {
                    let f = std::fs::File::open(p)?;
                    parse_cache_file(std::io::BufReader::new(f))?
                } else {
                    HashMap::new()
                };
                let f = std::fs::OpenOptions::new().create(true).append(true).open(p)?;
                (map, Some(std::io::BufWriter::new(f)))
            }
            None => (HashMap::new(), None),
        };
        Ok(Oracle {
            backend,
            retries,
            cache: Mutex::new(CacheInner { map, writer }),
            backend_calls: AtomicUsize::new(0),
        })
    }

    pub fn with_cache_file(
        backend: Box<dyn OracleBackend>,
        path: PathBuf,
        retries: usize,
    ) -> Result<Self, OracleError> {
        Self::new(backend, Some(&path), retries)
    }

    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn query(&self, prompt: &str, ctx: &PromptContext) -> OracleResponse {
        debug_assert!(!prompt.is_empty());
        let id = self.backend.id();
        let key = cache_key(&id, prompt);
        {
            let cache = self.cache.lock().unwrap();
            if let Some(&p) = cache.map.get(&key) {
                return OracleResponse { p_yes: p, source: ResponseSource::Cache, degraded: false };
            }
        }
        let mut last_err = None;
        for _ in 0..=self.retries {
            self.backend_calls.fetch_add(1, Ordering::SeqCst);
            match self.backend.query(prompt, ctx) {
                Ok(p) => {
                    let p = p.clamp(0.0, 1.0);
                    let mut cache = self.cache.lock().unwrap();
                    cache.map.insert(key.clone(), p);
                    if let Some(w) = &mut cache.writer {
                        let now = std::time::SystemTime::now()
                            .duration_since(std::time::UNIX_EPOCH)
                            .map(|d| d.as_secs())
                            .unwrap_or(0);
                        // write failures must not kill an episode; the
                        // in-memory entry stays authoritative
                        let _ = writeln!(w, "{key} {p} {id} {now}");
                        let _ = w.flush();
                    }
                    return OracleResponse {
                        p_yes: p,
                        source: self.backend.source(),
                        degraded: false,
                    };
                }
                Err(e) => last_err = Some(e),
            }
        }
        let _ = last_err;
        OracleResponse { p_yes: 0.5, source: self.backend.source(), degraded: true }
    }
}
