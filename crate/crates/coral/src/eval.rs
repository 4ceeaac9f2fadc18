//! Metrics (AUC, F1), the fixed-round evaluation protocol, and the
//! comparison harness over retrieval arms and seeds.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ddpg::{self, actor_forward, DdpgError, TrainConfig, TrainPair};
use crate::embeddings::{init_random, EmbeddingTable};
use crate::dataset::RatingMatrix;
use crate::env::{ActionQuery, EnvConfig, EnvError, Environment, TransitionEncoder};
use crate::nn::FeedForwardNet;
use crate::oracle::Oracle;
use crate::prompting::{MetaIndex, TargetPair};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("labels contain a single class; AUC undefined")]
    SingleClass,
    #[error("scores and labels differ in length")]
    LengthMismatch,
    #[error("environment error: {0}")]
    Env(#[from] EnvError),
    #[error("training error: {0}")]
    Ddpg(#[from] DdpgError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Rank-based AUC: fraction of (positive, negative) pairs ordered
/// correctly, ties counted half. Equals the Mann–Whitney U statistic.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch);
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut won = 0.0;
    for (sp, _) in scores.iter().zip(labels).filter(|(_, &y)| y == 1) {
        for (sn, _) in scores.iter().zip(labels).filter(|(_, &y)| y == 0) {
            if sp > sn {
                won += 1.0;
            } else if sp == sn {
                won += 0.5;
            }
        }
    }
    Ok(won / (n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Result {
    pub value: f64,
    /// true when a zero denominator (no predicted or no true positives)
    /// forced the value to 0
    pub zero_division: bool,
}

/// F1 at a score threshold (prediction = score >= threshold).
pub fn f1(scores: &[f64], labels: &[u8], threshold: f64) -> Result<F1Result, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch);
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        let pred = s >= threshold;
        match (pred, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        // precision or recall has a zero (or empty) numerator: F1's
        // denominator collapses, so report 0 and flag it
        return Ok(F1Result { value: 0.0, zero_division: true });
    }
    let denom = 2 * tp + fp + fn_;
    Ok(F1Result { value: 2.0 * tp as f64 / denom as f64, zero_division: false })
}

// ---------------------------------------------------------------------------
// Policy evaluation
// ---------------------------------------------------------------------------

/// How actions are produced during evaluation.
pub enum EvalPolicy<'a> {
    /// score every pair with p_0 only; no retrieval steps run
    NoRetrieval,
    /// seeded uniform queries in [-c, c]^{2d}
    Random { seed: u64 },
    /// noise-free deterministic actor
    Actor(&'a FeedForwardNet),
}

#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub target: TargetPair,
    pub y: u8,
    /// p_0 .. p_rounds (length rounds + 1)
    pub probs: Vec<f64>,
    pub retrieved: Vec<(usize, usize)>,
    pub degraded: bool,
}

#[derive(Debug, Clone)]
pub struct RoundMetrics {
    pub round: usize,
    pub auc: f64,
    pub f1: f64,
    pub f1_zero_division: bool,
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub per_round: Vec<RoundMetrics>,
    pub records: Vec<EvalRecord>,
}

pub const CLASSIFICATION_THRESHOLD: f64 = 0.5;

/// Fixed-length evaluation: every pair gets `rounds` retrieval steps
/// (never early-stopped) and metrics are computed at every round index.
/// The environment must be built with early stopping disabled.
pub fn evaluate_policy(
    policy: &EvalPolicy,
    env: &Environment,
    test_pairs: &[(TargetPair, u8)],
    rounds: usize,
) -> Result<EvalOutput, EvalError> {
    assert!(
        env.config.early_stop.is_none(),
        "evaluation requires an environment without early stopping"
    );
    assert!(rounds <= env.config.horizon, "rounds exceed the environment horizon");
    let clip = env.action_clip();
    let dim2 = 2 * env.config.dim;
    let mut records = Vec::with_capacity(test_pairs.len());
    for &(target, y) in test_pairs {
        let mut st = env.init_episode(target, y)?;
        let mut probs = Vec::with_capacity(rounds + 1);
        probs.push(st.p_current);
        let mut retrieved = Vec::new();
        if let EvalPolicy::NoRetrieval = policy {
            probs.resize(rounds + 1, st.p_current);
        } else {
            // fresh per-pair RNG keeps the random arm independent of
            // pair order
            let mut rng = match policy {
                EvalPolicy::Random { seed } => Some(ChaCha8Rng::seed_from_u64(
                    seed ^ (target.user as u64) << 20 ^ target.item as u64,
                )),
                _ => None,
            };
            for _ in 0..rounds {
                let action = match policy {
                    EvalPolicy::Actor(net) => actor_forward(net, &st.s, clip),
                    EvalPolicy::Random { .. } => ActionQuery {
                        a: (0..dim2)
                            .map(|_| rng.as_mut().unwrap().gen_range(-clip..=clip))
                            .collect(),
                    },
                    EvalPolicy::NoRetrieval => unreachable!(),
                };
                match env.step(&mut st, &action) {
                    Ok(out) => {
                        probs.push(st.p_current);
                        retrieved.push((out.retrieved_user, out.retrieved_item));
                    }
                    // tiny candidate pools: hold the last probability
                    Err(EnvError::PoolExhausted(_)) => probs.push(st.p_current),
                    Err(e) => return Err(e.into()),
                }
            }
        }
        records.push(EvalRecord { target, y, probs, retrieved, degraded: st.degraded });
    }
    let labels: Vec<u8> = records.iter().map(|r| r.y).collect();
    let mut per_round = Vec::with_capacity(rounds + 1);
    for r in 0..=rounds {
        let scores: Vec<f64> = records.iter().map(|rec| rec.probs[r]).collect();
        let a = auc(&scores, &labels)?;
        let f = f1(&scores, &labels, CLASSIFICATION_THRESHOLD)?;
        per_round.push(RoundMetrics { round: r, auc: a, f1: f.value, f1_zero_division: f.zero_division });
    }
    Ok(EvalOutput { per_round, records })
}

// ---------------------------------------------------------------------------
// Comparison harness
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    NoRetrieval,
    RandomRetrieval,
    TrainedWarm,
    TrainedRandomInit,
}

impl Arm {
    pub fn name(&self) -> &'static str {
        match self {
            Arm::NoRetrieval => "no_retrieval",
            Arm::RandomRetrieval => "random_retrieval",
            Arm::TrainedWarm => "trained_warm",
            Arm::TrainedRandomInit => "trained_random_init",
        }
    }

    pub fn parse(s: &str) -> Option<Arm> {
        match s {
            "no_retrieval" => Some(Arm::NoRetrieval),
            "random_retrieval" => Some(Arm::RandomRetrieval),
            "trained_warm" => Some(Arm::TrainedWarm),
            "trained_random_init" => Some(Arm::TrainedRandomInit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub arm: &'static str,
    pub seed: u64,
    pub round: usize,
    pub auc: f64,
    pub f1: f64,
    pub n_pairs: usize,
    pub degraded_count: usize,
}

/// Everything a comparison run shares across arms and seeds.
pub struct ComparisonSetup<'a> {
    pub warm_table: &'a EmbeddingTable,
    pub matrix: &'a RatingMatrix,
    pub meta: &'a MetaIndex,
    pub oracle: &'a Oracle,
    pub train_cfg: TrainConfig,
    pub encoder_seed: u64,
    pub y_thresh: u8,
    pub m_max: usize,
    pub train_pairs: &'a [TrainPair],
    pub test_pairs: &'a [(TargetPair, u8)],
}

impl ComparisonSetup<'_> {
    fn env_config(&self, early_stop: Option<f64>) -> EnvConfig {
        EnvConfig {
            dim: self.train_cfg.dim,
            horizon: self.train_cfg.horizon,
            early_stop,
            y_thresh: self.y_thresh,
            m_max: self.m_max,
        }
    }
}

/// Train (where the arm calls for it) and evaluate every requested arm at
/// every seed. Trained arms differ only in their embedding table: warm
/// uses the pretrained one, random-init a seeded random table.
pub fn run_comparison(
    setup: &ComparisonSetup,
    arms: &[Arm],
    seeds: &[u64],
) -> Result<Vec<ComparisonRow>, EvalError> {
    let cfg = &setup.train_cfg;
    let rounds = cfg.eval_rounds;
    let mut rows = Vec::new();
    for &arm in arms {
        for &seed in seeds {
            let random_table;
            let table = match arm {
                Arm::TrainedRandomInit => {
                    random_table = init_random(
                        seed,
                        setup.warm_table.n_users,
                        setup.warm_table.n_items,
                        setup.warm_table.dim,
                    );
                    &random_table
                }
                _ => setup.warm_table,
            };
            let encoder = TransitionEncoder::new(cfg.dim, setup.encoder_seed);
            let trained = match arm {
                Arm::TrainedWarm | Arm::TrainedRandomInit => {
                    let train_env = Environment::new(
                        table,
                        setup.matrix,
                        setup.meta,
                        &encoder,
                        setup.oracle,
                        setup.env_config(Some(cfg.early_stop)),
                    );
                    Some(ddpg::train(cfg, &train_env, setup.train_pairs, seed)?)
                }
                _ => None,
            };
            let eval_env = Environment::new(
                table,
                setup.matrix,
                setup.meta,
                &encoder,
                setup.oracle,
                setup.env_config(None),
            );
            let policy = match (&arm, &trained) {
                (Arm::NoRetrieval, _) => EvalPolicy::NoRetrieval,
                (Arm::RandomRetrieval, _) => EvalPolicy::Random { seed },
                (_, Some(t)) => EvalPolicy::Actor(&t.actor),
                _ => unreachable!(),
            };
            let out = evaluate_policy(&policy, &eval_env, setup.test_pairs, rounds)?;
            let degraded = out.records.iter().filter(|r| r.degraded).count();
            for m in &out.per_round {
                rows.push(ComparisonRow {
                    arm: arm.name(),
                    seed,
                    round: m.round,
                    auc: m.auc,
                    f1: m.f1,
                    n_pairs: out.records.len(),
                    degraded_count: degraded,
                });
            }
        }
    }
    Ok(rows)
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite metric values"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone)]
pub struct MedianRow {
    pub arm: &'static str,
    pub round: usize,
    pub auc: f64,
    pub f1: f64,
}

/// Median AUC/F1 across seeds for each (arm, round), in report order.
pub fn medians_by_arm_round(rows: &[ComparisonRow]) -> Vec<MedianRow> {
    let mut groups: BTreeMap<(&'static str, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let g = groups.entry((r.arm, r.round)).or_default();
        g.0.push(r.auc);
        g.1.push(r.f1);
    }
    groups
        .into_iter()
        .map(|((arm, round), (mut aucs, mut f1s))| MedianRow {
            arm,
            round,
            auc: median(&mut aucs),
            f1: median(&mut f1s),
        })
        .collect()
}

pub fn write_report(path: &Path, rows: &[ComparisonRow]) -> Result<(), EvalError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "arm,seed,round,auc,f1,n_pairs,degraded_count")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.arm, r.seed, r.round, r.auc, r.f1, r.n_pairs, r.degraded_count
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{binarize, generate_synthetic, IdIndex, SyntheticWorld};
    use crate::oracle::{OracleBackend, OracleError, ResponseSource, SimulatedOracle};
    use crate::prompting::PromptContext;

    #[test]
    fn auc_ordered_tied_and_mixed() {
        assert_eq!(auc(&[0.9, 0.8, 0.3], &[1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.6, 0.6], &[1, 0]).unwrap(), 0.5);
        // pairs: (0.2,0.7)=0, (0.2,0.5)=0, (0.5,0.7)=0, (0.5,0.5)=0.5
        assert_eq!(auc(&[0.2, 0.7, 0.5, 0.5], &[1, 0, 1, 0]).unwrap(), 0.125);
    }

    #[test]
    fn auc_rejects_single_class() {
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(EvalError::SingleClass)));
        assert!(matches!(auc(&[0.1, 0.2], &[0, 0]), Err(EvalError::SingleClass)));
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let n = 30;
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
            if labels.iter().all(|&y| y == labels[0]) {
                continue;
            }
            let cubed: Vec<f64> = scores.iter().map(|s| s.powi(3)).collect();
            let a = auc(&scores, &labels).unwrap();
            let b = auc(&cubed, &labels).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_complement_sums_to_one() {
        let scores = [0.91, 0.13, 0.55, 0.72, 0.08, 0.34];
        let labels = [1, 0, 1, 0, 0, 1];
        let flipped: Vec<u8> = labels.iter().map(|&y| 1 - y).collect();
        let a = auc(&scores, &labels).unwrap();
        let b = auc(&scores, &flipped).unwrap();
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f1_examples() {
        // preds [1,1,0], labels [1,0,1]
        let r = f1(&[0.9, 0.8, 0.2], &[1, 0, 1], 0.5).unwrap();
        assert_eq!(r, F1Result { value: 0.5, zero_division: false });
        let r = f1(&[0.9, 0.1], &[1, 0], 0.5).unwrap();
        assert_eq!(r.value, 1.0);
        // no predicted positives while positives exist
        let r = f1(&[0.1, 0.2], &[1, 0], 0.5).unwrap();
        assert_eq!(r, F1Result { value: 0.0, zero_division: true });
    }

    #[test]
    fn f1_permutation_invariant() {
        let scores = [0.9, 0.3, 0.6, 0.1, 0.8];
        let labels = [1u8, 0, 1, 1, 0];
        let a = f1(&scores, &labels, 0.5).unwrap();
        let perm = [2usize, 4, 0, 1, 3];
        let ps: Vec<f64> = perm.iter().map(|&i| scores[i]).collect();
        let pl: Vec<u8> = perm.iter().map(|&i| labels[i]).collect();
        assert_eq!(a, f1(&ps, &pl, 0.5).unwrap());
    }

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn deterministic_world_dot_scores_give_perfect_auc() {
        // labels are a deterministic function of the latent factors, so
        // scoring by the latent dot product must separate them perfectly
        let (_, _, world) = generate_synthetic(9, 25, 10, 4, 0.8);
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for u in 0..world.n_users() {
            for i in 0..world.n_items() {
                let dot: f64 = world.user_factors[u]
                    .iter()
                    .zip(&world.item_factors[i])
                    .map(|(a, b)| a * b)
                    .sum();
                scores.push(dot);
                labels.push(world.true_label(u, i));
            }
        }
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
    }

    // -- evaluation over a small environment -------------------------------

    struct Fix {
        table: EmbeddingTable,
        matrix: RatingMatrix,
        meta: MetaIndex,
        encoder: TransitionEncoder,
        oracle: Oracle,
    }

    fn fix(oracle: Option<Oracle>) -> Fix {
        let (ints, metas, world) = generate_synthetic(13, 30, 12, 4, 0.8);
        let users: Vec<String> = (0..30).map(SyntheticWorld::user_id).collect();
        let items: Vec<String> = (0..12).map(SyntheticWorld::item_id).collect();
        let index = IdIndex::from_id_lists(users, items);
        let matrix = RatingMatrix::from_interactions(&index, &ints).unwrap();
        let meta = MetaIndex::from_metas(&index, &metas);
        let oracle = oracle.unwrap_or_else(|| {
            Oracle::new(Box::new(SimulatedOracle::new(world.clone())), None, 0).unwrap()
        });
        Fix {
            table: init_random(2, 30, 12, 4),
            matrix,
            meta,
            encoder: TransitionEncoder::new(4, 3),
            oracle,
        }
    }

    fn eval_env(f: &Fix) -> Environment<'_> {
        Environment::new(
            &f.table,
            &f.matrix,
            &f.meta,
            &f.encoder,
            &f.oracle,
            EnvConfig { dim: 4, horizon: 5, early_stop: None, y_thresh: 4, m_max: 20 },
        )
    }

    fn test_pairs(f: &Fix, n: usize) -> Vec<(TargetPair, u8)> {
        let mut out = Vec::new();
        for u in 0..f.matrix.n_users() {
            let entries = f.matrix.user_entries(u);
            if entries.len() < 2 {
                continue;
            }
            let e = entries[0];
            out.push((TargetPair { user: u, item: e.item }, binarize(e.rating).unwrap()));
            if out.len() == n {
                break;
            }
        }
        // ensure both classes appear
        assert!(out.iter().any(|&(_, y)| y == 1) && out.iter().any(|&(_, y)| y == 0), "fixture lacks a class");
        out
    }

    #[test]
    fn probability_sequences_have_rounds_plus_one_entries() {
        let f = fix(None);
        let env = eval_env(&f);
        let pairs = test_pairs(&f, 8);
        let actor = FeedForwardNet::new(&[8, 6, 6, 8], 17);
        let out = evaluate_policy(&EvalPolicy::Actor(&actor), &env, &pairs, 4).unwrap();
        assert_eq!(out.per_round.len(), 5);
        for r in &out.records {
            assert_eq!(r.probs.len(), 5);
            assert!(r.probs.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    struct Coin;

    impl OracleBackend for Coin {
        fn id(&self) -> String {
            "coin".into()
        }
        fn source(&self) -> ResponseSource {
            ResponseSource::Simulated
        }
        fn query(&self, _p: &str, _c: &PromptContext) -> Result<f64, OracleError> {
            Ok(0.5)
        }
    }

    #[test]
    fn constant_oracle_gives_tied_auc() {
        let coin = Oracle::new(Box::new(Coin), None, 0).unwrap();
        let f = fix(Some(coin));
        let env = eval_env(&f);
        let pairs = test_pairs(&f, 8);
        let out = evaluate_policy(&EvalPolicy::NoRetrieval, &env, &pairs, 3).unwrap();
        for m in &out.per_round {
            assert_eq!(m.auc, 0.5);
        }
    }

    #[test]
    fn no_retrieval_repeats_p0() {
        let f = fix(None);
        let env = eval_env(&f);
        let pairs = test_pairs(&f, 6);
        let out = evaluate_policy(&EvalPolicy::NoRetrieval, &env, &pairs, 3).unwrap();
        for r in &out.records {
            assert!(r.probs.iter().all(|&p| p == r.probs[0]));
            assert!(r.retrieved.is_empty());
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let f = fix(None);
        let env = eval_env(&f);
        let pairs = test_pairs(&f, 8);
        for policy in [EvalPolicy::Random { seed: 5 }, EvalPolicy::NoRetrieval] {
            let a = evaluate_policy(&policy, &env, &pairs, 3).unwrap();
            let b = evaluate_policy(&policy, &env, &pairs, 3).unwrap();
            for (x, y) in a.records.iter().zip(&b.records) {
                assert_eq!(x.probs, y.probs);
                assert_eq!(x.retrieved, y.retrieved);
            }
            for (x, y) in a.per_round.iter().zip(&b.per_round) {
                assert_eq!(x.auc, y.auc);
                assert_eq!(x.f1, y.f1);
            }
        }
    }

    #[test]
    fn comparison_report_shape_and_medians() {
        let f = fix(None);
        let cfg = TrainConfig {
            dim: 4,
            hidden: 8,
            episodes: 12,
            horizon: 4,
            warmup_episodes: 2,
            batch: 4,
            buffer: 50,
            eval_rounds: 2,
            ..TrainConfig::default()
        };
        let train_pairs: Vec<TrainPair> = test_pairs(&f, 10)
            .into_iter()
            .map(|(target, y)| TrainPair { target, y, tail: target.item % 2 == 0 })
            .collect();
        let pairs = test_pairs(&f, 8);
        let setup = ComparisonSetup {
            warm_table: &f.table,
            matrix: &f.matrix,
            meta: &f.meta,
            oracle: &f.oracle,
            train_cfg: cfg,
            encoder_seed: 1,
            y_thresh: 4,
            m_max: 20,
            train_pairs: &train_pairs,
            test_pairs: &pairs,
        };
        let arms =
            [Arm::NoRetrieval, Arm::RandomRetrieval, Arm::TrainedWarm, Arm::TrainedRandomInit];
        let seeds = [1u64, 2, 3];
        let rows = run_comparison(&setup, &arms, &seeds).unwrap();
        assert_eq!(rows.len(), arms.len() * seeds.len() * 3);
        for r in &rows {
            assert!((0.0..=1.0).contains(&r.auc));
            assert_eq!(r.n_pairs, pairs.len());
        }
        let meds = medians_by_arm_round(&rows);
        assert_eq!(meds.len(), arms.len() * 3);
        // no_retrieval is seed-independent, so its median equals any row
        let nr_row = rows.iter().find(|r| r.arm == "no_retrieval" && r.round == 0).unwrap();
        let nr_med = meds.iter().find(|m| m.arm == "no_retrieval" && m.round == 0).unwrap();
        assert_eq!(nr_row.auc, nr_med.auc);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        write_report(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("arm,seed,round,auc,f1,n_pairs,degraded_count\n"));
        assert_eq!(text.lines().count(), rows.len() + 1);
        // rerun is bitwise identical
        let rows2 = run_comparison(&setup, &arms, &seeds).unwrap();
        let path2 = dir.path().join("report2.csv");
        write_report(&path2, &rows2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }
}
