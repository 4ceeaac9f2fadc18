//! Operator surface for the pipeline: ingest -> pretrain -> train ->
//! eval, plus synthetic-world generation and prompt auditing. All stages
//! are driven by one flat key=value configuration file; command-line
//! `--set` overrides win over file values.
//!
//! Exit codes: 0 ok, 2 input error, 3 numeric abort, 4 oracle
//! configuration error.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coral::config::{BackboneKind, OracleKind, RunConfig, API_KEY_ENV};
use coral::dataset::{
    binarize, head_tail_split, kcore_filter, make_splits, parse_records, read_manifest,
    write_manifest, FieldConfig, IdIndex, Interaction, ItemMeta, RatingMatrix, SyntheticWorld,
    generate_synthetic,
};
use coral::ddpg::{self, load_checkpoint, save_checkpoint, TrainPair};
use coral::embeddings::{init_random, load_table, save_table, pretrain_mf, pretrain_widedeep, TrainSample};
use coral::env::{EnvConfig, Environment, TransitionEncoder};
use coral::eval::{
    evaluate_policy, medians_by_arm_round, write_report, Arm, ComparisonRow, EvalPolicy,
};
use coral::oracle::{Oracle, RemoteOracle, SimulatedOracle};
use coral::prompting::{render_prompt, select_supp_items, MetaIndex, PromptContext, TargetPair};

#[derive(Parser)]
#[command(name = "coral", version, about = "Collaborative retrieval-augmented LLM recommendation")]
struct Cli {
    /// Path to a flat key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration key (repeatable), e.g. --set episodes=100
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Oracle backend shortcut (same as --set oracle_backend=...)
    #[arg(long, global = true)]
    oracle: Option<String>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse reviews/metadata, k-core filter, split head/tail, write the split manifest
    Ingest,
    /// Pretrain warm-start embeddings on head-item data
    Pretrain,
    /// Train the retrieval policy and write checkpoint plus learning curves
    Train,
    /// Evaluate configured arms over the test split and write the report CSV
    Eval,
    /// Generate a synthetic dataset (reviews, metadata, hidden world)
    Synth {
        #[arg(long, default_value_t = 2000)]
        users: usize,
        #[arg(long, default_value_t = 500)]
        items: usize,
        #[arg(long = "latent-dim", default_value_t = 16)]
        latent_dim: usize,
        #[arg(long, default_value_t = 0.7)]
        zipf: f64,
    },
    /// Render and print the evidence-free prompt for one (user, item) pair
    PromptDump {
        #[arg(long)]
        user: String,
        #[arg(long)]
        item: String,
    },
}

enum CliError {
    Input(String),
    Numeric(String),
    OracleConfig(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::OracleConfig(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numeric(m) | CliError::OracleConfig(m) => m,
        }
    }
}

macro_rules! input_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        }
    )*};
}

input_from!(
    std::io::Error,
    coral::dataset::DatasetError,
    coral::embeddings::EmbeddingError,
    coral::prompting::PromptError,
    coral::env::EnvError,
    coral::ddpg::DdpgError,
    coral::eval::EvalError,
    coral::config::ConfigError,
    serde_json::Error
);

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = build_config(&cli)?;
    match cli.cmd {
        Cmd::Ingest => cmd_ingest(&cfg),
        Cmd::Pretrain => cmd_pretrain(&cfg),
        Cmd::Train => cmd_train(&cfg),
        Cmd::Eval => cmd_eval(&cfg),
        Cmd::Synth { users, items, latent_dim, zipf } => {
            cmd_synth(&cfg, users, items, latent_dim, zipf)
        }
        Cmd::PromptDump { user, item } => cmd_prompt_dump(&cfg, &user, &item),
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(o) = &cli.oracle {
        cfg.set("oracle_backend", o).map_err(|e| CliError::OracleConfig(e.to_string()))?;
    }
    if cfg.oracle_backend == OracleKind::Remote
        && (cfg.remote_endpoint.is_none() || cfg.remote_model.is_none())
    {
        return Err(CliError::OracleConfig(
            "remote oracle requires remote_endpoint and remote_model".into(),
        ));
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Path defaults and shared loading
// ---------------------------------------------------------------------------

fn manifest_path(cfg: &RunConfig) -> PathBuf {
    cfg.manifest_path.clone().unwrap_or_else(|| cfg.out_dir.join("manifest.tsv"))
}

fn embeddings_path(cfg: &RunConfig) -> PathBuf {
    cfg.embeddings_path.clone().unwrap_or_else(|| cfg.out_dir.join("embeddings.crle"))
}

fn checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.checkpoint_path.clone().unwrap_or_else(|| cfg.out_dir.join("policy.ckpt"))
}

fn cache_path(cfg: &RunConfig) -> PathBuf {
    cfg.cache_path.clone().unwrap_or_else(|| cfg.out_dir.join("oracle_cache.txt"))
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| CliError::Input(format!("config key '{key}' is required")))
}

fn open_buf(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))
}

struct Loaded {
    index: IdIndex,
    train: Vec<Interaction>,
    test: Vec<Interaction>,
    tail_items: BTreeSet<String>,
    metas: Vec<ItemMeta>,
}

fn load_world(cfg: &RunConfig) -> Result<SyntheticWorld, CliError> {
    let path = cfg.world_path.as_deref().ok_or_else(|| {
        CliError::OracleConfig("simulated oracle requires world_path".into())
    })?;
    let world: SyntheticWorld = serde_json::from_reader(open_buf(path)?)?;
    Ok(world)
}

fn load_split(cfg: &RunConfig) -> Result<Loaded, CliError> {
    let mpath = manifest_path(cfg);
    let entries = read_manifest(open_buf(&mpath)?)?;
    if entries.is_empty() {
        return Err(CliError::Input(format!("manifest {} is empty", mpath.display())));
    }
    let all: Vec<Interaction> = entries.iter().map(|(it, _)| it.clone()).collect();
    let index = match &cfg.world_path {
        // keep every synthetic entity addressable so matrix indices line
        // up with the hidden world's
        Some(p) => {
            let world: SyntheticWorld = serde_json::from_reader(open_buf(p)?)?;
            let users = (0..world.n_users()).map(SyntheticWorld::user_id).collect();
            let items = (0..world.n_items()).map(SyntheticWorld::item_id).collect();
            IdIndex::from_id_lists(users, items)
        }
        None => IdIndex::from_interactions(&all),
    };
    let (_, tail_items) = head_tail_split(&all)?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (it, tag) in entries {
        match tag.as_str() {
            "train" => train.push(it),
            "test" => test.push(it),
            _ => {}
        }
    }
    let meta_file = required(&cfg.meta_path, "meta_path")?;
    let (_, metas, _) =
        parse_records(std::io::Cursor::new(""), open_buf(meta_file)?, &FieldConfig::default())?;
    Ok(Loaded { index, train, test, tail_items, metas })
}

fn build_oracle(cfg: &RunConfig) -> Result<Oracle, CliError> {
    let backend: Box<dyn coral::oracle::OracleBackend> = match cfg.oracle_backend {
        OracleKind::Simulated => Box::new(SimulatedOracle::new(load_world(cfg)?)),
        OracleKind::Remote => {
            let endpoint = cfg.remote_endpoint.clone().unwrap();
            let model = cfg.remote_model.clone().unwrap();
            let api_key = std::env::var(API_KEY_ENV).ok();
            Box::new(RemoteOracle::new(endpoint, model, api_key))
        }
    };
    Oracle::new(backend, Some(&cache_path(cfg)), cfg.oracle_retries as usize)
        .map_err(|e| CliError::OracleConfig(e.to_string()))
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_synth(
    cfg: &RunConfig,
    users: usize,
    items: usize,
    latent_dim: usize,
    zipf: f64,
) -> Result<(), CliError> {
    let (ints, metas, world) = generate_synthetic(cfg.seed, users, items, latent_dim, zipf);
    let fields = FieldConfig::default();

    let reviews_path = cfg.out_dir.join("reviews.jsonl");
    let mut w = BufWriter::new(File::create(&reviews_path)?);
    for it in &ints {
        let line = serde_json::json!({
            &fields.user_field: it.user_id,
            &fields.item_field: it.item_id,
            &fields.rating_field: it.rating as f64,
            &fields.timestamp_field: it.timestamp,
        });
        writeln!(w, "{line}")?;
    }
    let meta_path = cfg.out_dir.join("meta.jsonl");
    let mut w = BufWriter::new(File::create(&meta_path)?);
    for m in &metas {
        let line = serde_json::json!({
            &fields.item_field: m.item_id,
            &fields.description_field: m.description,
        });
        writeln!(w, "{line}")?;
    }
    let world_path = cfg.out_dir.join("world.json");
    serde_json::to_writer(BufWriter::new(File::create(&world_path)?), &world)?;

    println!(
        "synth: {} interactions over {users} users x {items} items (seed {})",
        ints.len(),
        cfg.seed
    );
    println!("wrote {}", reviews_path.display());
    println!("wrote {}", meta_path.display());
    println!("wrote {}", world_path.display());
    Ok(())
}

fn cmd_ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let reviews = required(&cfg.reviews_path, "reviews_path")?;
    let meta = required(&cfg.meta_path, "meta_path")?;
    let (ints, _, stats) =
        parse_records(open_buf(reviews)?, open_buf(meta)?, &FieldConfig::default())?;
    println!(
        "parsed {} review lines ({} malformed), {} meta lines ({} malformed)",
        stats.review_lines, stats.review_malformed, stats.meta_lines, stats.meta_malformed
    );
    let ints = kcore_filter(ints, cfg.kcore);
    if ints.is_empty() {
        return Err(CliError::Input(format!("no interactions survive {}-core filtering", cfg.kcore)));
    }
    let users: BTreeSet<&str> = ints.iter().map(|it| it.user_id.as_str()).collect();
    let items: BTreeSet<&str> = ints.iter().map(|it| it.item_id.as_str()).collect();
    let (head, tail) = head_tail_split(&ints)?;
    let split = make_splits(&ints, &head, &tail, cfg.seed)?;

    let mpath = manifest_path(cfg);
    let mut w = BufWriter::new(File::create(&mpath)?);
    write_manifest(&split, &mut w)?;
    w.flush()?;

    println!(
        "{}-core: {} interactions, {} users, {} items",
        cfg.kcore,
        ints.len(),
        users.len(),
        items.len()
    );
    println!(
        "head {} items / tail {} items (tail share {:.1}%)",
        head.len(),
        tail.len(),
        100.0 * tail.len() as f64 / (head.len() + tail.len()) as f64
    );
    println!(
        "splits: train {} / val {} / test {} ({} eval pairs dropped for cold users)",
        split.train.len(),
        split.val.len(),
        split.test.len(),
        split.dropped_eval_pairs
    );
    println!("wrote {}", mpath.display());
    Ok(())
}

fn cmd_pretrain(cfg: &RunConfig) -> Result<(), CliError> {
    let loaded = load_split(cfg)?;
    let d = cfg.train.dim;
    let (n_users, n_items) = (loaded.index.n_users(), loaded.index.n_items());
    let epath = embeddings_path(cfg);

    if cfg.backbone == BackboneKind::None {
        let table = init_random(cfg.seed, n_users, n_items, d);
        save_table(&table, &epath)?;
        println!("wrote random table ({n_users} users, {n_items} items, d={d}) to {}", epath.display());
        return Ok(());
    }

    // warm start trains on head-item interactions only
    let mut samples = Vec::new();
    for it in &loaded.train {
        if loaded.tail_items.contains(&it.item_id) {
            continue;
        }
        samples.push(TrainSample {
            user: loaded.index.user_idx(&it.user_id)?,
            item: loaded.index.item_idx(&it.item_id)?,
            label: binarize(it.rating)?,
        });
    }
    if samples.is_empty() {
        return Err(CliError::Input("no head-item training interactions".into()));
    }
    let (table, curve) = match cfg.backbone {
        BackboneKind::Mf => pretrain_mf(
            &samples,
            n_users,
            n_items,
            d,
            cfg.pretrain_epochs,
            cfg.pretrain_lr,
            cfg.pretrain_batch,
            cfg.seed,
        )?,
        BackboneKind::WideDeep => pretrain_widedeep(
            &samples,
            n_users,
            n_items,
            d,
            &[64],
            cfg.pretrain_epochs,
            cfg.pretrain_lr,
            cfg.pretrain_batch,
            cfg.seed,
        )?,
        BackboneKind::None => unreachable!(),
    };
    save_table(&table, &epath)?;

    let curve_path = cfg.out_dir.join("pretrain_curve.csv");
    let mut w = BufWriter::new(File::create(&curve_path)?);
    writeln!(w, "epoch,bce")?;
    for (i, l) in curve.iter().enumerate() {
        writeln!(w, "{i},{l}")?;
    }
    if let (Some(first), Some(last)) = (curve.first(), curve.last()) {
        println!(
            "pretrained {} on {} head samples: BCE {first:.4} -> {last:.4} over {} epochs",
            table.provenance,
            samples.len(),
            curve.len()
        );
    }
    println!("wrote {}", epath.display());
    println!("wrote {}", curve_path.display());
    Ok(())
}

struct Stage {
    table: coral::embeddings::EmbeddingTable,
    matrix: RatingMatrix,
    meta: MetaIndex,
    oracle: Oracle,
}

fn build_stage(cfg: &mut RunConfig, loaded: &Loaded) -> Result<Stage, CliError> {
    let epath = embeddings_path(cfg);
    let table = load_table(&epath)
        .map_err(|e| CliError::Input(format!("cannot load {}: {e}", epath.display())))?;
    if table.dim != cfg.train.dim {
        println!("note: using embedding dimension d={} from {}", table.dim, epath.display());
        cfg.train.dim = table.dim;
    }
    let matrix = RatingMatrix::from_interactions(&loaded.index, &loaded.train)?;
    let meta = MetaIndex::from_metas(&loaded.index, &loaded.metas);
    let oracle = build_oracle(cfg)?;
    Ok(Stage { table, matrix, meta, oracle })
}

fn train_pairs(loaded: &Loaded) -> Result<Vec<TrainPair>, CliError> {
    let mut out = Vec::with_capacity(loaded.train.len());
    for it in &loaded.train {
        out.push(TrainPair {
            target: TargetPair {
                user: loaded.index.user_idx(&it.user_id)?,
                item: loaded.index.item_idx(&it.item_id)?,
            },
            y: binarize(it.rating)?,
            tail: loaded.tail_items.contains(&it.item_id),
        });
    }
    Ok(out)
}

fn test_pairs(loaded: &Loaded) -> Result<Vec<(TargetPair, u8)>, CliError> {
    let mut out = Vec::with_capacity(loaded.test.len());
    for it in &loaded.test {
        out.push((
            TargetPair {
                user: loaded.index.user_idx(&it.user_id)?,
                item: loaded.index.item_idx(&it.item_id)?,
            },
            binarize(it.rating)?,
        ));
    }
    Ok(out)
}

fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    let loaded = load_split(&cfg)?;
    let stage = build_stage(&mut cfg, &loaded)?;
    let encoder = TransitionEncoder::new(cfg.train.dim, cfg.encoder_seed);
    let env = Environment::new(
        &stage.table,
        &stage.matrix,
        &stage.meta,
        &encoder,
        &stage.oracle,
        EnvConfig {
            dim: cfg.train.dim,
            horizon: cfg.train.horizon,
            early_stop: Some(cfg.train.early_stop),
            y_thresh: cfg.y_thresh,
            m_max: cfg.m_max,
        },
    );
    let pairs = train_pairs(&loaded)?;
    let out = ddpg::train(&cfg.train, &env, &pairs, cfg.seed)?;

    let ckpt = checkpoint_path(&cfg);
    save_checkpoint(&ckpt, &[&out.actor, &out.critic, &out.actor_target, &out.critic_target])?;
    let up = cfg.out_dir.join("train_updates.csv");
    let ep = cfg.out_dir.join("train_episodes.csv");
    ddpg::write_update_curve(&up, &out.update_curve)?;
    ddpg::write_episode_curve(&ep, &out.episode_curve)?;
    println!(
        "trained {} episodes, {} updates, {} oracle backend calls",
        out.episode_curve.len(),
        out.update_curve.len(),
        stage.oracle.backend_calls()
    );
    println!("wrote {}", ckpt.display());
    println!("wrote {}", up.display());
    println!("wrote {}", ep.display());
    if let Some(msg) = out.aborted {
        return Err(CliError::Numeric(format!(
            "{msg}; last good networks saved to {}",
            ckpt.display()
        )));
    }
    Ok(())
}

fn cmd_eval(cfg: &RunConfig) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    let loaded = load_split(&cfg)?;
    let stage = build_stage(&mut cfg, &loaded)?;
    let rounds = cfg.train.eval_rounds;
    let pairs = test_pairs(&loaded)?;
    if pairs.is_empty() {
        return Err(CliError::Input("test split is empty".into()));
    }
    let encoder = TransitionEncoder::new(cfg.train.dim, cfg.encoder_seed);
    let eval_env_cfg = EnvConfig {
        dim: cfg.train.dim,
        horizon: cfg.train.horizon,
        early_stop: None,
        y_thresh: cfg.y_thresh,
        m_max: cfg.m_max,
    };

    let ckpt_actor = if cfg.arms.contains(&Arm::TrainedWarm) {
        let ckpt = checkpoint_path(&cfg);
        let nets = load_checkpoint(&ckpt)
            .map_err(|e| CliError::Input(format!("cannot load {}: {e}", ckpt.display())))?;
        Some(nets.into_iter().next().expect("checkpoint holds the actor first"))
    } else {
        None
    };

    let mut rows: Vec<ComparisonRow> = Vec::new();
    for &arm in &cfg.arms {
        for &seed in &cfg.seeds {
            let random_table;
            let table = match arm {
                Arm::TrainedRandomInit => {
                    random_table = init_random(
                        seed,
                        stage.table.n_users,
                        stage.table.n_items,
                        stage.table.dim,
                    );
                    &random_table
                }
                _ => &stage.table,
            };
            // the random-init ablation trains its own policy per seed;
            // the warm arm evaluates the checkpoint from `train`
            let trained = match arm {
                Arm::TrainedRandomInit => {
                    let train_env = Environment::new(
                        table,
                        &stage.matrix,
                        &stage.meta,
                        &encoder,
                        &stage.oracle,
                        EnvConfig {
                            early_stop: Some(cfg.train.early_stop),
                            ..eval_env_cfg.clone()
                        },
                    );
                    let tp = train_pairs(&loaded)?;
                    Some(ddpg::train(&cfg.train, &train_env, &tp, seed)?)
                }
                _ => None,
            };
            let env = Environment::new(
                table,
                &stage.matrix,
                &stage.meta,
                &encoder,
                &stage.oracle,
                eval_env_cfg.clone(),
            );
            let policy = match arm {
                Arm::NoRetrieval => EvalPolicy::NoRetrieval,
                Arm::RandomRetrieval => EvalPolicy::Random { seed },
                Arm::TrainedWarm => EvalPolicy::Actor(ckpt_actor.as_ref().unwrap()),
                Arm::TrainedRandomInit => EvalPolicy::Actor(&trained.as_ref().unwrap().actor),
            };
            let out = evaluate_policy(&policy, &env, &pairs, rounds)?;
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

    let report = cfg.out_dir.join("report.csv");
    write_report(&report, &rows)?;
    println!("evaluated {} pairs over rounds 0..={rounds}", pairs.len());
    for m in medians_by_arm_round(&rows) {
        println!(
            "{:<20} round {}: median AUC {:.4}, median F1 {:.4}",
            m.arm, m.round, m.auc, m.f1
        );
    }
    println!("wrote {}", report.display());
    Ok(())
}

fn cmd_prompt_dump(cfg: &RunConfig, user: &str, item: &str) -> Result<(), CliError> {
    let loaded = load_split(cfg)?;
    let matrix = RatingMatrix::from_interactions(&loaded.index, &loaded.train)?;
    let meta = MetaIndex::from_metas(&loaded.index, &loaded.metas);
    let target = TargetPair {
        user: loaded.index.user_idx(user)?,
        item: loaded.index.item_idx(item)?,
    };
    let supp: Vec<(usize, u8)> = select_supp_items(target.user, &matrix, cfg.m_max)?
        .into_iter()
        .filter(|&i| i != target.item)
        .map(|i| (i, binarize(matrix.rating(target.user, i).expect("supp items are rated")).unwrap()))
        .collect();
    let ctx = PromptContext::new(target, supp)?;
    print!("{}", render_prompt(&ctx, &meta, cfg.y_thresh)?);
    Ok(())
}
