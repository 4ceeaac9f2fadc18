// Scratch calibration harness (not part of the test suite; run with
// --ignored explicitly). Measures the AUC headroom of hand-coded
// retrieval policies on candidate synthetic-world configurations.

use std::collections::HashMap;

use coral::dataset::{
    head_tail_split, kcore_filter, make_splits, IdIndex, Interaction, RatingMatrix,
    SyntheticWorld, CATEGORY_NAMES,
};
use coral::embeddings::{pretrain_mf, EmbeddingTable, TrainSample};
use coral::eval::auc;
use coral::oracle::SimulatedOracle;
use coral::prompting::{select_supp_items, PromptContext, TargetPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn envf(key: &str, default: f64) -> f64 {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn gen_world(
    seed: u64,
    n_users: usize,
    n_items: usize,
    latent_dim: usize,
    zipf_s: f64,
    per_user: usize,
) -> (Vec<Interaction>, SyntheticWorld) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal_vec = |rng: &mut ChaCha8Rng, d: usize| -> Vec<f64> {
        (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let user_factors: Vec<Vec<f64>> =
        (0..n_users).map(|_| normal_vec(&mut rng, latent_dim)).collect();
    let item_factors: Vec<Vec<f64>> =
        (0..n_items).map(|_| normal_vec(&mut rng, latent_dim)).collect();
    let n_categories = CATEGORY_NAMES.len().min(n_items);
    let prototypes: Vec<Vec<f64>> =
        (0..n_categories).map(|_| normal_vec(&mut rng, latent_dim)).collect();
    let item_category: Vec<usize> = item_factors
        .iter()
        .map(|f| {
            let mut best = 0;
            let mut best_dot = f64::NEG_INFINITY;
            for (c, p) in prototypes.iter().enumerate() {
                let dot: f64 = f.iter().zip(p).map(|(a, b)| a * b).sum();
                if dot > best_dot {
                    best_dot = dot;
                    best = c;
                }
            }
            best
        })
        .collect();

    let weights: Vec<f64> =
        (0..n_items).map(|r| 1.0 / ((r + 1) as f64).powf(zipf_s)).collect();
    let wsum: f64 = weights.iter().sum();
    let total = n_users * per_user;
    let counts: Vec<usize> = weights
        .iter()
        .map(|w| (((total as f64) * w / wsum).floor() as usize).clamp(1, n_users))
        .collect();

    let user_weights: Vec<f64> =
        (0..n_users).map(|u| 1.0 / ((u + 1) as f64).powf(2.0)).collect();

    let mut interactions = Vec::new();
    let mut ts: i64 = 1_600_000_000;
    for (item, &count) in counts.iter().enumerate() {
        let mut keyed: Vec<(f64, usize)> = user_weights
            .iter()
            .enumerate()
            .map(|(u, &w)| (rng.gen::<f64>().powf(1.0 / w), u))
            .collect();
        keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut raters: Vec<usize> = keyed[..count].iter().map(|&(_, u)| u).collect();
        raters.sort_unstable();
        for user in raters {
            let dot: f64 = user_factors[user]
                .iter()
                .zip(&item_factors[item])
                .map(|(a, b)| a * b)
                .sum();
            let rating = if dot >= 0.0 { 5 } else { 1 };
            interactions.push(Interaction {
                user_id: SyntheticWorld::user_id(user),
                item_id: SyntheticWorld::item_id(item),
                rating,
                timestamp: ts,
            });
            ts += 60;
        }
    }
    let world = SyntheticWorld {
        seed,
        latent_dim,
        user_factors,
        item_factors,
        item_category,
        n_categories,
    };
    (interactions, world)
}

fn nearest_k(
    query: &[f64],
    table: &[f32],
    dim: usize,
    n: usize,
    k: usize,
    exclude: &[usize],
) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = (0..n)
        .filter(|i| !exclude.contains(i))
        .map(|i| {
            let row = &table[i * dim..(i + 1) * dim];
            let d2: f64 =
                query.iter().zip(row).map(|(q, &x)| (q - x as f64) * (q - x as f64)).sum();
            (d2, i)
        })
        .collect();
    scored.sort_by(|a, b| a.partial_cmp(b).unwrap());
    scored.into_iter().take(k).map(|(_, i)| i).collect()
}

fn emb(table: &[f32], idx: usize, dim: usize) -> Vec<f64> {
    table[idx * dim..(idx + 1) * dim].iter().map(|&x| x as f64).collect()
}

#[test]
#[ignore]
fn probe_identity_policy() {
    use coral::ddpg::{actor_forward, OUNoise, TrainConfig};
    use coral::env::{EnvConfig, Environment, TransitionEncoder};
    use coral::nn::FeedForwardNet;
    use coral::oracle::Oracle;
    use coral::prompting::MetaIndex;

    let per_user = envf("CAL_PER_USER", 250.0) as usize;
    let d = envf("CAL_D", 16.0) as usize;
    let (ints, world) = gen_world(0, 2000, 500, 4, 0.3, per_user);
    let kept = kcore_filter(ints, 5);
    let (head, tail) = head_tail_split(&kept).unwrap();
    let split = make_splits(&kept, &head, &tail, 0).unwrap();
    let user_ids: Vec<String> = (0..world.n_users()).map(SyntheticWorld::user_id).collect();
    let item_ids: Vec<String> = (0..world.n_items()).map(SyntheticWorld::item_id).collect();
    let index = IdIndex::from_id_lists(user_ids, item_ids);
    let matrix = RatingMatrix::from_interactions(&index, &split.train).unwrap();
    let head_samples: Vec<TrainSample> = split
        .train
        .iter()
        .filter(|it| head.contains(&it.item_id))
        .map(|it| TrainSample {
            user: index.user_idx(&it.user_id).unwrap(),
            item: index.item_idx(&it.item_id).unwrap(),
            label: u8::from(it.rating >= 4),
        })
        .collect();
    let (table, _) =
        pretrain_mf(&head_samples, index.n_users(), index.n_items(), d, 20, 0.05, 256, 0).unwrap();
    println!("table max_abs {:.3}", table.max_abs_coord());

    let meta = MetaIndex::from_descriptions(
        (0..world.n_items()).map(|i| format!("p{i}")).collect(),
    );
    let oracle = Oracle::new(Box::new(SimulatedOracle::new(world.clone())), None, 2).unwrap();
    let encoder = TransitionEncoder::new(d, 0);
    let env = Environment::new(
        &table,
        &matrix,
        &meta,
        &encoder,
        &oracle,
        EnvConfig { dim: d, horizon: 10, early_stop: Some(0.1), y_thresh: 4, m_max: 500 },
    );
    let cfg = TrainConfig { dim: d, hidden: 128, ..TrainConfig::default() };
    let actor = FeedForwardNet::near_identity(&cfg.actor_sizes(), 1, 0.05);
    let mut noise = OUNoise::new(2 * d, 2);
    let clip = env.action_clip();

    // tail train pairs like training would sample
    let tail_pairs: Vec<(usize, usize, u8)> = split
        .train
        .iter()
        .filter(|it| tail.contains(&it.item_id))
        .take(50)
        .map(|it| {
            (
                index.user_idx(&it.user_id).unwrap(),
                index.item_idx(&it.item_id).unwrap(),
                u8::from(it.rating >= 4),
            )
        })
        .collect();

    let mut hit0 = 0;
    let mut eventful = 0;
    for (ei, &(u, i, y)) in tail_pairs.iter().enumerate() {
        let mut st = env
            .init_episode(TargetPair { user: u, item: i }, y)
            .unwrap();
        let p0 = st.p_current;
        let mut retrieved_items = Vec::new();
        for t in 0..10 {
            let mut a = actor_forward(&actor, &st.s, clip);
            for (ai, ni) in a.a.iter_mut().zip(noise.sample()) {
                *ai += ni;
            }
            let out = env.step(&mut st, &a).unwrap();
            retrieved_items.push(out.retrieved_item);
            if t == 0 && out.retrieved_item == i {
                hit0 += 1;
            }
            if st.done {
                break;
            }
        }
        if (st.p_current - p0).abs() > 1e-12 {
            eventful += 1;
        }
        if ei < 5 {
            println!(
                "ep {ei}: target {i} retrieved {:?} p0 {p0:.3} pf {:.3} y {y}",
                retrieved_items, st.p_current
            );
        }
    }
    println!("round-0 target hits: {hit0}/50, eventful episodes: {eventful}/50");
}

// Where do behavior-policy returns come from? Decomposes mean episode
// return by pair popularity (head vs tail) for warm vs random embedding
// tables, using the untrained behavior policy (near-identity actor + OU
// noise). Criterion: the warm table should out-earn the random one on
// tail pairs, otherwise the warm-start ablation has no signal.
#[test]
#[ignore]
fn probe_return_sources() {
    use coral::ddpg::{actor_forward, OUNoise};
    use coral::embeddings::init_random;
    use coral::env::{ActionQuery, EnvConfig, Environment, TransitionEncoder};
    use coral::nn::FeedForwardNet;
    use coral::oracle::Oracle;
    use coral::prompting::MetaIndex;

    let d = 16usize;
    let zipf = envf("CAL_ZIPF", 0.3);
    let (ints, world) = gen_world(0, 2000, 500, 4, zipf, 150);
    let kept = kcore_filter(ints, 5);
    println!("zipf {zipf}: {} interactions survive 5-core", kept.len());
    let (head, tail) = head_tail_split(&kept).unwrap();
    let split = make_splits(&kept, &head, &tail, 0).unwrap();
    let user_ids: Vec<String> = (0..world.n_users()).map(SyntheticWorld::user_id).collect();
    let item_ids: Vec<String> = (0..world.n_items()).map(SyntheticWorld::item_id).collect();
    let index = IdIndex::from_id_lists(user_ids, item_ids);
    let matrix = RatingMatrix::from_interactions(&index, &split.train).unwrap();
    let head_samples: Vec<TrainSample> = split
        .train
        .iter()
        .filter(|it| head.contains(&it.item_id))
        .map(|it| TrainSample {
            user: index.user_idx(&it.user_id).unwrap(),
            item: index.item_idx(&it.item_id).unwrap(),
            label: u8::from(it.rating >= 4),
        })
        .collect();
    let (warm_table, _) =
        pretrain_mf(&head_samples, index.n_users(), index.n_items(), d, 20, 0.05, 256, 0).unwrap();
    let rand_table = init_random(1, index.n_users(), index.n_items(), d);
    let meta =
        MetaIndex::from_descriptions((0..world.n_items()).map(|i| format!("p{i}")).collect());
    let oracle = Oracle::new(Box::new(SimulatedOracle::new(world.clone())), None, 2).unwrap();

    // training pairs bucketed by popularity
    let mut head_pairs = Vec::new();
    let mut tail_pairs = Vec::new();
    for it in &split.train {
        let pair = (
            TargetPair {
                user: index.user_idx(&it.user_id).unwrap(),
                item: index.item_idx(&it.item_id).unwrap(),
            },
            u8::from(it.rating >= 4),
        );
        if tail.contains(&it.item_id) {
            tail_pairs.push(pair);
        } else {
            head_pairs.push(pair);
        }
    }

    let env_cfg = EnvConfig { dim: d, horizon: 10, early_stop: Some(0.1), y_thresh: 4, m_max: 500 };
    let actor = FeedForwardNet::near_identity(&[2 * d, 128, 128, 2 * d], 1, 0.05);
    let encoder = TransitionEncoder::new(d, 0);

    for (tname, table) in [("warm", &warm_table), ("random", &rand_table)] {
        let env = Environment::new(table, &matrix, &meta, &encoder, &oracle, env_cfg.clone());
        let clip = env.action_clip();
        for (bname, pairs) in [("head", &head_pairs), ("tail", &tail_pairs)] {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let mut noise = OUNoise::new(2 * d, 7);
            let mut total = 0.0;
            let mut eventful = 0usize;
            let n = 300.min(pairs.len());
            for ep in 0..n {
                let (target, y) = pairs[rng.gen_range(0..pairs.len())];
                let _ = ep;
                let mut st = match env.init_episode(target, y) {
                    Ok(s) => s,
                    Err(_) => continue,
                };
                noise.reset();
                let p0 = st.p_current;
                let mut ret = 0.0;
                while !st.done {
                    let mut a = actor_forward(&actor, &st.s, clip).a;
                    for (ai, ni) in a.iter_mut().zip(noise.sample()) {
                        *ai = (*ai + ni).clamp(-clip, clip);
                    }
                    match env.step(&mut st, &ActionQuery { a }) {
                        Ok(out) => ret += out.reward,
                        Err(_) => break,
                    }
                }
                if (st.p_current - p0).abs() > 1e-9 {
                    eventful += 1;
                }
                total += ret;
            }
            println!(
                "{tname:<6} {bname}: mean return {:+.4} eventful {}/{}",
                total / n as f64,
                eventful,
                n
            );
        }
    }

    // eval preview: identity actor vs baselines on this world
    let eval_cfg = EnvConfig { early_stop: None, ..env_cfg };
    let eval_env = Environment::new(&warm_table, &matrix, &meta, &encoder, &oracle, eval_cfg);
    let test_pairs: Vec<(TargetPair, u8)> = split
        .test
        .iter()
        .step_by(10)
        .map(|it| {
            (
                TargetPair {
                    user: index.user_idx(&it.user_id).unwrap(),
                    item: index.item_idx(&it.item_id).unwrap(),
                },
                u8::from(it.rating >= 4),
            )
        })
        .collect();
    use coral::eval::{evaluate_policy, EvalPolicy};
    for (name, policy) in [
        ("no_retrieval", EvalPolicy::NoRetrieval),
        ("random_ret", EvalPolicy::Random { seed: 1 }),
        ("identity", EvalPolicy::Actor(&actor)),
    ] {
        let ev = evaluate_policy(&policy, &eval_env, &test_pairs, 5).unwrap();
        let aucs: Vec<String> = ev.per_round.iter().map(|m| format!("{:.4}", m.auc)).collect();
        println!("{name}: per-round AUC {}", aucs.join(" "));
    }
}

#[test]
#[ignore]
fn experiment() {
    use coral::ddpg::{train, TrainConfig, TrainPair};
    use coral::embeddings::init_random;
    use coral::env::{EnvConfig, Environment, TransitionEncoder};
    use coral::eval::{evaluate_policy, EvalPolicy};
    use coral::oracle::Oracle;
    use coral::prompting::MetaIndex;

    let d = 16usize;
    let actor_lr = envf("CAL_ALR", 1e-6);
    let (ints, world) = gen_world(0, 2000, 500, 4, 0.3, 150);
    let kept = kcore_filter(ints, 5);
    let (head, tail) = head_tail_split(&kept).unwrap();
    let split = make_splits(&kept, &head, &tail, 0).unwrap();
    let user_ids: Vec<String> = (0..world.n_users()).map(SyntheticWorld::user_id).collect();
    let item_ids: Vec<String> = (0..world.n_items()).map(SyntheticWorld::item_id).collect();
    let index = IdIndex::from_id_lists(user_ids, item_ids);
    let matrix = RatingMatrix::from_interactions(&index, &split.train).unwrap();
    let head_samples: Vec<TrainSample> = split
        .train
        .iter()
        .filter(|it| head.contains(&it.item_id))
        .map(|it| TrainSample {
            user: index.user_idx(&it.user_id).unwrap(),
            item: index.item_idx(&it.item_id).unwrap(),
            label: u8::from(it.rating >= 4),
        })
        .collect();
    let (warm_table, _) =
        pretrain_mf(&head_samples, index.n_users(), index.n_items(), d, 20, 0.05, 256, 0).unwrap();

    let meta = MetaIndex::from_descriptions(
        (0..world.n_items()).map(|i| format!("p{i}")).collect(),
    );
    let oracle = Oracle::new(Box::new(SimulatedOracle::new(world.clone())), None, 2).unwrap();

    let train_pairs: Vec<TrainPair> = split
        .train
        .iter()
        .map(|it| TrainPair {
            target: TargetPair {
                user: index.user_idx(&it.user_id).unwrap(),
                item: index.item_idx(&it.item_id).unwrap(),
            },
            y: u8::from(it.rating >= 4),
            tail: tail.contains(&it.item_id),
        })
        .collect();
    let test_pairs: Vec<(TargetPair, u8)> = split
        .test
        .iter()
        .step_by(10)
        .map(|it| {
            (
                TargetPair {
                    user: index.user_idx(&it.user_id).unwrap(),
                    item: index.item_idx(&it.item_id).unwrap(),
                },
                u8::from(it.rating >= 4),
            )
        })
        .collect();
    println!("{} test pairs (subsampled)", test_pairs.len());

    let cfg = TrainConfig {
        dim: d,
        hidden: 128,
        warmup_episodes: 300,
        buffer: 50_000,
        actor_lr,
        ..TrainConfig::default()
    };
    let env_cfg_train = EnvConfig {
        dim: d,
        horizon: cfg.horizon,
        early_stop: Some(cfg.early_stop),
        y_thresh: 4,
        m_max: 500,
    };
    let env_cfg_eval = EnvConfig { early_stop: None, ..env_cfg_train };

    // smoothed-curve estimator candidates for the ablation criterion
    let summarize = |name: &str, curve: &[(usize, f64)]| {
        let rets: Vec<f64> = curve.iter().map(|&(_, r)| r).collect();
        let w = 200usize;
        let smoothed: Vec<f64> = (w..=rets.len())
            .map(|e| rets[e - w..e].iter().sum::<f64>() / w as f64)
            .collect();
        let final_ret = *smoothed.last().unwrap();
        let thr = 0.8 * final_ret;
        let t_sm = smoothed.iter().position(|&x| x >= thr).map(|i| i + w);
        // cumulative variant
        let mut cum = 0.0;
        let cums: Vec<f64> = rets.iter().map(|r| {
            cum += r;
            cum
        }).collect();
        let total = *cums.last().unwrap();
        let t_cum = cums.iter().position(|&x| x >= 0.8 * total);
        println!(
            "{name}: mean_first200 {:+.4} final_sm {:+.4} total {:+.2} t_smoothed {:?} t_cum {:?}",
            rets[..200].iter().sum::<f64>() / 200.0,
            final_ret,
            total,
            t_sm,
            t_cum
        );
    };

    for seed in [1u64, 2, 3] {
        let encoder = TransitionEncoder::new(d, 0);
        // warm arm
        let env =
            Environment::new(&warm_table, &matrix, &meta, &encoder, &oracle, env_cfg_train.clone());
        let t0 = std::time::Instant::now();
        let out = train(&cfg, &env, &train_pairs, seed).unwrap();
        let curve: Vec<(usize, f64)> =
            out.episode_curve.iter().map(|r| (r.episode, r.ret)).collect();
        summarize(&format!("warm   seed {seed}"), &curve);
        let eval_env =
            Environment::new(&warm_table, &matrix, &meta, &encoder, &oracle, env_cfg_eval.clone());
        let ev = evaluate_policy(&EvalPolicy::Actor(&out.actor), &eval_env, &test_pairs, 5).unwrap();
        let aucs: Vec<String> = ev.per_round.iter().map(|m| format!("{:.4}", m.auc)).collect();
        println!("warm   seed {seed}: per-round AUC {} ({:.0?})", aucs.join(" "), t0.elapsed());

        // random-init arm
        let rand_table = init_random(seed, index.n_users(), index.n_items(), d);
        let env_r =
            Environment::new(&rand_table, &matrix, &meta, &encoder, &oracle, env_cfg_train.clone());
        let out_r = train(&cfg, &env_r, &train_pairs, seed).unwrap();
        let curve_r: Vec<(usize, f64)> =
            out_r.episode_curve.iter().map(|r| (r.episode, r.ret)).collect();
        summarize(&format!("random seed {seed}"), &curve_r);
    }

    // baselines once (seed-independent / seeded)
    let encoder = TransitionEncoder::new(d, 0);
    let eval_env = Environment::new(&warm_table, &matrix, &meta, &encoder, &oracle, env_cfg_eval);
    for (name, policy) in [
        ("no_retrieval", EvalPolicy::NoRetrieval),
        ("random_ret s1", EvalPolicy::Random { seed: 1 }),
        ("random_ret s2", EvalPolicy::Random { seed: 2 }),
        ("random_ret s3", EvalPolicy::Random { seed: 3 }),
    ] {
        let ev = evaluate_policy(&policy, &eval_env, &test_pairs, 5).unwrap();
        let aucs: Vec<String> = ev.per_round.iter().map(|m| format!("{:.4}", m.auc)).collect();
        println!("{name}: per-round AUC {}", aucs.join(" "));
    }
}

#[test]
#[ignore]
fn dump_golden_prompts() {
    use coral::prompting::{render_prompt, MetaIndex, PromptContext, TargetPair};

    // small hand-built world: 5 users x 4 items
    let entries: &[(usize, usize, u8, i64)] = &[
        (0, 0, 5, 10),
        (0, 2, 1, 20),
        (1, 1, 5, 10),
        (1, 3, 2, 11),
        (2, 1, 4, 12),
        (2, 3, 5, 13),
        (3, 1, 2, 14),
        (3, 0, 4, 15),
        (4, 3, 1, 16),
    ];
    let ints: Vec<Interaction> = entries
        .iter()
        .map(|&(u, i, r, t)| Interaction {
            user_id: format!("u{u:03}"),
            item_id: format!("i{i:03}"),
            rating: r,
            timestamp: t,
        })
        .collect();
    let index = IdIndex::from_interactions(&ints);
    let matrix = RatingMatrix::from_interactions(&index, &ints).unwrap();
    let meta = MetaIndex::from_descriptions(vec![
        "Wireless ergonomic trackball mouse".into(),
        "Mechanical keyboard with brown switches".into(),
        "Noise-cancelling over-ear headphones".into(),
        "27-inch 4K IPS monitor".into(),
    ]);
    let target = TargetPair { user: 0, item: 1 };
    let supp = vec![(0usize, 1u8), (2, 0)];

    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    std::fs::create_dir_all(&dir).unwrap();

    let ctx = PromptContext::new(target, supp.clone()).unwrap();
    std::fs::write(
        dir.join("prompt_empty_evidence.txt"),
        render_prompt(&ctx, &meta, 4).unwrap(),
    )
    .unwrap();

    let mut ctx = PromptContext::new(target, supp.clone()).unwrap();
    ctx.append_pair(2, 1, &matrix, 4).unwrap();
    std::fs::write(
        dir.join("prompt_single_evidence.txt"),
        render_prompt(&ctx, &meta, 4).unwrap(),
    )
    .unwrap();

    let mut ctx = PromptContext::new(target, supp).unwrap();
    ctx.append_pair(2, 1, &matrix, 4).unwrap();
    ctx.append_pair(3, 3, &matrix, 4).unwrap();
    ctx.append_pair(4, 0, &matrix, 4).unwrap();
    std::fs::write(
        dir.join("prompt_multi_evidence.txt"),
        render_prompt(&ctx, &meta, 4).unwrap(),
    )
    .unwrap();
}

#[test]
#[ignore]
fn eval_identity_actor() {
    use coral::ddpg::TrainConfig;
    use coral::env::{EnvConfig, Environment, TransitionEncoder};
    use coral::eval::{evaluate_policy, EvalPolicy};
    use coral::nn::FeedForwardNet;
    use coral::oracle::Oracle;
    use coral::prompting::MetaIndex;

    let d = 16usize;
    let latent = envf("CAL_LATENT", 4.0) as usize;
    let per_user = envf("CAL_PER_USER", 150.0) as usize;
    let (ints, world) = gen_world(0, 2000, 500, latent, 0.3, per_user);
    let kept = kcore_filter(ints, 5);
    let (head, tail) = head_tail_split(&kept).unwrap();
    let split = make_splits(&kept, &head, &tail, 0).unwrap();
    let user_ids: Vec<String> = (0..world.n_users()).map(SyntheticWorld::user_id).collect();
    let item_ids: Vec<String> = (0..world.n_items()).map(SyntheticWorld::item_id).collect();
    let index = IdIndex::from_id_lists(user_ids, item_ids);
    let matrix = RatingMatrix::from_interactions(&index, &split.train).unwrap();
    let head_samples: Vec<TrainSample> = split
        .train
        .iter()
        .filter(|it| head.contains(&it.item_id))
        .map(|it| TrainSample {
            user: index.user_idx(&it.user_id).unwrap(),
            item: index.item_idx(&it.item_id).unwrap(),
            label: u8::from(it.rating >= 4),
        })
        .collect();
    let (table, _) =
        pretrain_mf(&head_samples, index.n_users(), index.n_items(), d, 20, 0.05, 256, 0).unwrap();

    let meta = MetaIndex::from_descriptions(
        (0..world.n_items()).map(|i| format!("p{i}")).collect(),
    );
    let oracle = Oracle::new(Box::new(SimulatedOracle::new(world.clone())), None, 2).unwrap();
    let encoder = TransitionEncoder::new(d, 0);
    let env = Environment::new(
        &table,
        &matrix,
        &meta,
        &encoder,
        &oracle,
        EnvConfig { dim: d, horizon: 10, early_stop: None, y_thresh: 4, m_max: 500 },
    );
    let cfg = TrainConfig { dim: d, hidden: 128, ..TrainConfig::default() };
    let actor = FeedForwardNet::near_identity(&cfg.actor_sizes(), 1, 0.05);

    let test_pairs: Vec<(TargetPair, u8)> = split
        .test
        .iter()
        .take(3000)
        .map(|it| {
            (
                TargetPair {
                    user: index.user_idx(&it.user_id).unwrap(),
                    item: index.item_idx(&it.item_id).unwrap(),
                },
                u8::from(it.rating >= 4),
            )
        })
        .collect();
    for (name, policy) in [
        ("no_retrieval", EvalPolicy::NoRetrieval),
        ("identity_actor", EvalPolicy::Actor(&actor)),
    ] {
        let out = evaluate_policy(&policy, &env, &test_pairs, 5).unwrap();
        for m in &out.per_round {
            println!("{name:15} round {}: auc {:.4} f1 {:.4}", m.round, m.auc, m.f1);
        }
    }
}

#[test]
#[ignore]
fn headroom() {
    let per_user = envf("CAL_PER_USER", 12.0) as usize;
    let zipf_s = envf("CAL_ZIPF", 0.7);
    let latent = envf("CAL_LATENT", 8.0) as usize;
    let d = envf("CAL_D", 16.0) as usize;
    let m_max = envf("CAL_MMAX", 20.0) as usize;
    let rounds = envf("CAL_ROUNDS", 5.0) as usize;
    let y_thresh = 4u8;

    let (ints, world) = gen_world(0, 2000, 500, latent, zipf_s, per_user);
    let kept = kcore_filter(ints, 5);
    let (head, tail) = head_tail_split(&kept).unwrap();
    let split = make_splits(&kept, &head, &tail, 0).unwrap();

    let user_ids: Vec<String> = (0..world.n_users()).map(SyntheticWorld::user_id).collect();
    let item_ids: Vec<String> = (0..world.n_items()).map(SyntheticWorld::item_id).collect();
    let index = IdIndex::from_id_lists(user_ids, item_ids);
    let matrix = RatingMatrix::from_interactions(&index, &split.train).unwrap();

    let head_samples: Vec<TrainSample> = split
        .train
        .iter()
        .filter(|it| head.contains(&it.item_id))
        .map(|it| TrainSample {
            user: index.user_idx(&it.user_id).unwrap(),
            item: index.item_idx(&it.item_id).unwrap(),
            label: u8::from(it.rating >= y_thresh),
        })
        .collect();
    let (table, curve) =
        pretrain_mf(&head_samples, index.n_users(), index.n_items(), d, 20, 0.05, 256, 0).unwrap();
    println!(
        "world: {} ints kept, head {} tail {} items, {} head samples, bce {:.4} -> {:.4}",
        kept.len(),
        head.len(),
        tail.len(),
        head_samples.len(),
        curve.first().unwrap(),
        curve.last().unwrap()
    );

    // popularity by train count
    let mut pop: Vec<usize> = vec![0; index.n_items()];
    let mut raters: Vec<Vec<usize>> = vec![Vec::new(); index.n_items()];
    for it in &split.train {
        let i = index.item_idx(&it.item_id).unwrap();
        let u = index.user_idx(&it.user_id).unwrap();
        pop[i] += 1;
        raters[i].push(u);
    }
    let mut by_pop: Vec<usize> = (0..index.n_items()).collect();
    by_pop.sort_by_key(|&i| std::cmp::Reverse(pop[i]));

    let oracle = SimulatedOracle::new(world.clone());
    let pairs: Vec<(usize, usize, u8)> = split
        .test
        .iter()
        .map(|it| {
            (
                index.user_idx(&it.user_id).unwrap(),
                index.item_idx(&it.item_id).unwrap(),
                u8::from(it.rating >= y_thresh),
            )
        })
        .collect();
    println!("{} test pairs", pairs.len());

    let supp_for = |u: usize, tgt: usize| -> Vec<(usize, u8)> {
        select_supp_items(u, &matrix, m_max)
            .unwrap()
            .into_iter()
            .filter(|&i| i != tgt)
            .map(|i| (i, matrix.label(u, i).unwrap()))
            .collect()
    };

    let run_policy = |name: &str, pick: &dyn Fn(usize, usize) -> Vec<(usize, usize)>| {
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        let mut moved = 0usize;
        for &(u, i, y) in &pairs {
            let supp = supp_for(u, i);
            let mut ctx = PromptContext::new(TargetPair { user: u, item: i }, supp).unwrap();
            let p0 = oracle.simulated_query(&ctx).unwrap();
            for (v, j) in pick(u, i) {
                ctx.append_pair(v, j, &matrix, y_thresh).unwrap();
            }
            let p = oracle.simulated_query(&ctx).unwrap();
            if (p - p0).abs() > 1e-12 {
                moved += 1;
            }
            scores.push(p);
            labels.push(y);
        }
        let a = auc(&scores, &labels).unwrap();
        println!(
            "{name:24} auc {:.4}  (p moved on {:.1}% of pairs)",
            a,
            100.0 * moved as f64 / pairs.len() as f64
        );
        a
    };

    // baseline: no retrieval
    run_policy("no_retrieval", &|_u, _i| Vec::new());

    // random retrieval
    {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let nu = index.n_users();
        let ni = index.n_items();
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for &(u, i, y) in &pairs {
            let supp = supp_for(u, i);
            let mut ctx = PromptContext::new(TargetPair { user: u, item: i }, supp).unwrap();
            for _ in 0..rounds {
                loop {
                    let v = rng.gen_range(0..nu);
                    let j = rng.gen_range(0..ni);
                    if v != u && !ctx.coll_users.contains(&v) && !ctx.coll_items.contains(&j) {
                        ctx.append_pair(v, j, &matrix, y_thresh).unwrap();
                        break;
                    }
                }
            }
            scores.push(oracle.simulated_query(&ctx).unwrap());
            labels.push(y);
        }
        println!("{:24} auc {:.4}", "random", auc(&scores, &labels).unwrap());
    }

    // C: users nearest to u, items = target then most popular
    run_policy("near_u+target+popular", &|u, i| {
        let q = emb(&table.users, u, d);
        let vs = nearest_k(&q, &table.users, d, table.n_users, rounds, &[u]);
        let mut items = vec![i];
        items.extend(by_pop.iter().copied().filter(|&j| j != i).take(rounds - 1));
        vs.into_iter().zip(items).collect()
    });

    // D: users nearest to u, items = NN chain from target embedding
    run_policy("near_u+target_chain", &|u, i| {
        let qu = emb(&table.users, u, d);
        let vs = nearest_k(&qu, &table.users, d, table.n_users, rounds, &[u]);
        let qi = emb(&table.items, i, d);
        let items = nearest_k(&qi, &table.items, d, table.n_items, rounds, &[]);
        vs.into_iter().zip(items).collect()
    });

    // G: users near u, items = target then chain near u's embedding
    run_policy("near_u+target+u_chain", &|u, i| {
        let qu = emb(&table.users, u, d);
        let vs = nearest_k(&qu, &table.users, d, table.n_users, rounds, &[u]);
        let mut items = vec![i];
        items.extend(
            nearest_k(&qu, &table.items, d, table.n_items, rounds, &[i])
                .into_iter()
                .take(rounds - 1),
        );
        vs.into_iter().zip(items).collect()
    });

    // H: users near u, items = target then chain from the origin
    run_policy("near_u+target+o_chain", &|u, i| {
        let qu = emb(&table.users, u, d);
        let vs = nearest_k(&qu, &table.users, d, table.n_users, rounds, &[u]);
        let zero = vec![0.0; d];
        let mut items = vec![i];
        items.extend(
            nearest_k(&zero, &table.items, d, table.n_items, rounds, &[i])
                .into_iter()
                .take(rounds - 1),
        );
        vs.into_iter().zip(items).collect()
    });

    // E: oracle-ish upper bound — actual raters of the target + popular items
    run_policy("raters+target+popular", &|u, i| {
        let mut vs: Vec<usize> = raters[i].iter().copied().filter(|&v| v != u).take(rounds).collect();
        let q = emb(&table.users, u, d);
        for v in nearest_k(&q, &table.users, d, table.n_users, rounds, &[u]) {
            if vs.len() >= rounds {
                break;
            }
            if !vs.contains(&v) {
                vs.push(v);
            }
        }
        let mut items = vec![i];
        items.extend(by_pop.iter().copied().filter(|&j| j != i).take(rounds - 1));
        vs.into_iter().zip(items).collect()
    });
}
