use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use hashbridge_core::embed::{grad_check, GradCase, GradOp, GradReport};
use hashbridge_core::text::normalize_name;
use hashbridge_core::{
    build_graph, train_corpus, Corpus, ModelSnapshot, RankingOptions, ScoredHashtag, SearchEngine, TrainConfig,
    UserContext,
};
use hashbridge_service::{export_csv, ServiceConfig};
use serde_json::json;

use crate::{table, Command, CorpusArgs, RankArgs};

/// Runs one subcommand. Output is buffered and written once, so a closed pipe
/// (`hashbridge query ... | head`) ends the process quietly instead of panicking.
pub fn run(cmd: Command) -> Result<ExitCode> {
    let (text, code) = match cmd {
        Command::Ingest { corpus, json } => (ingest(&corpus, json)?, ExitCode::SUCCESS),
        Command::Train {
            corpus,
            config,
            seed,
            dim,
            epochs,
            out,
            json,
        } => (train(&corpus, config.as_deref(), seed, dim, epochs, &out, json)?, ExitCode::SUCCESS),
        Command::Index { snapshot, out } => (index(&snapshot, out.as_deref())?, ExitCode::SUCCESS),
        Command::Serve { snapshot, port, config } => (serve(snapshot, port, config.as_deref())?, ExitCode::SUCCESS),
        Command::Query(args) => (query(&args)?, ExitCode::SUCCESS),
        Command::Export { rank, out } => (export(&rank, out.as_deref())?, ExitCode::SUCCESS),
        Command::Gradcheck {
            seeds,
            epsilon,
            tolerance,
            json,
        } => gradcheck(seeds, epsilon, tolerance, json)?,
    };
    let mut stdout = io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(code),
    }
}

fn load_corpus(c: &CorpusArgs) -> Result<Corpus> {
    Ok(Corpus::load(&c.posts, &c.categories)?)
}

fn write_or_return(out: Option<&Path>, body: String) -> Result<String> {
    match out {
        Some(p) => {
            fs::write(p, body).with_context(|| format!("writing {}", p.display()))?;
            Ok(String::new())
        }
        None => Ok(body),
    }
}

fn ingest(c: &CorpusArgs, json: bool) -> Result<String> {
    let ing = build_graph(&load_corpus(c)?);
    let g = &ing.graph;
    if json {
        let v = json!({
            "node_counts": g.node_counts(),
            "edge_counts": g.edge_counts(),
            "digest": format!("{:016x}", g.digest()),
            "rejected": ing.rejected,
        });
        return Ok(serde_json::to_string_pretty(&v)? + "\n");
    }
    let n = g.node_counts();
    let mut o = String::new();
    writeln!(o, "nodes     users {} hashtags {} contents {} words {} categories {}", n[0], n[1], n[2], n[3], n[4])?;
    writeln!(o, "edges     {} total {:?}", g.total_edges(), g.edge_counts())?;
    writeln!(o, "digest    {:016x}", g.digest())?;
    writeln!(o, "rejected  {}", ing.rejected.len())?;
    for r in &ing.rejected {
        writeln!(o, "  {r}")?;
    }
    Ok(o)
}

fn train(
    c: &CorpusArgs,
    config: Option<&Path>,
    seed: Option<u64>,
    dim: Option<usize>,
    epochs: Option<usize>,
    out: &Path,
    json: bool,
) -> Result<String> {
    let mut cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<TrainConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = dim {
        cfg.dim = d;
    }
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    let (snap, report) = train_corpus(&load_corpus(c)?, &cfg)?;
    snap.save(out)?;
    if json {
        return Ok(serde_json::to_string_pretty(&report)? + "\n");
    }
    let mut o = String::new();
    writeln!(o, "wrote {} ({} hashtags, dim {})", out.display(), snap.index.len(), snap.dim())?;
    writeln!(o, "tag2vec loss    {:?}", report.tag2vec_losses)?;
    writeln!(o, "preference loss {:?}", report.preference_losses)?;
    writeln!(o, "encoder loss    {:?}", report.encoder_losses)?;
    writeln!(o, "rejected        {}", report.rejected.len())?;
    for r in &report.rejected {
        writeln!(o, "  {r}")?;
    }
    Ok(o)
}

fn index(snapshot: &Path, out: Option<&Path>) -> Result<String> {
    let snap = ModelSnapshot::load(snapshot)?;
    write_or_return(out, serde_json::to_string_pretty(&snap.index.to_json())? + "\n")
}

fn serve(snapshot: Option<PathBuf>, port: Option<u16>, config: Option<&Path>) -> Result<String> {
    let mut cfg = match config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    cfg.from_env()?;
    if let Some(s) = snapshot {
        cfg.snapshot = Some(s);
    }
    if let Some(p) = port {
        cfg.port = p;
    }
    tokio::runtime::Runtime::new()?.block_on(hashbridge_service::serve(cfg))?;
    Ok(String::new())
}

fn ranked(a: &RankArgs) -> Result<Vec<ScoredHashtag>> {
    let context = match a.user_context.as_str() {
        "global_mean" => UserContext::GlobalMean,
        "hashtag_users" => UserContext::HashtagUsers,
        other => bail!("unknown --user-context {other:?} (expected global_mean or hashtag_users)"),
    };
    let engine = SearchEngine::new(ModelSnapshot::load(&a.snapshot)?, context);
    let opts = RankingOptions {
        top_n: a.n,
        min_post_count: a.min_posts,
        max_post_count: a.max_posts,
        ..RankingOptions::default()
    };
    if let Some(k) = &a.keyword {
        return Ok(engine.rank_hashtags(k, &opts)?);
    }
    let cat = a.category.as_deref().expect("clap requires category or keyword");
    // An id wins; otherwise accept the exact (normalized) category name.
    let id = if engine.category_by_id(cat).is_some() {
        cat.to_owned()
    } else {
        let wanted = normalize_name(cat);
        engine
            .snapshot()
            .categories
            .iter()
            .find(|c| normalize_name(&c.name) == wanted)
            .map_or_else(|| cat.to_owned(), |c| c.id.clone())
    };
    Ok(engine.rank_for_category(&id, &opts)?)
}

fn query(a: &RankArgs) -> Result<String> {
    let rows = ranked(a)?;
    if a.json {
        return Ok(serde_json::to_string(&rows)? + "\n");
    }
    Ok(table::render(&rows))
}

fn export(a: &RankArgs, out: Option<&Path>) -> Result<String> {
    let rows = ranked(a)?;
    let body = if a.json {
        serde_json::to_string(&rows)? + "\n"
    } else {
        export_csv(&rows)
    };
    write_or_return(out, body)
}

fn gradcheck(seeds: u64, epsilon: f64, tolerance: f64, json: bool) -> Result<(String, ExitCode)> {
    let mut rows = Vec::new();
    for op in GradOp::ALL {
        for seed in 0..seeds {
            rows.push((op, seed, grad_check(&GradCase::random(op, seed), epsilon)?));
        }
    }
    let pass = |r: &GradReport| r.max_relative_error <= tolerance;
    let failed = rows.iter().filter(|r| !pass(&r.2)).count();
    let mut o = String::new();
    if json {
        let v: Vec<_> = rows
            .iter()
            .map(|(op, seed, r)| json!({"op": op, "seed": seed, "report": r, "pass": pass(r)}))
            .collect();
        o = serde_json::to_string_pretty(&v)? + "\n";
    } else {
        writeln!(o, "{:<10} {:>4} {:>14} {:>8} {:>6}", "op", "seed", "max_rel_err", "params", "pass")?;
        for (op, seed, r) in &rows {
            let mark = if pass(r) { "ok" } else { "FAIL" };
            let op = format!("{op:?}");
            writeln!(o, "{op:<10} {seed:>4} {:>14.3e} {:>8} {mark:>6}", r.max_relative_error, r.coordinates)?;
        }
    }
    if failed > 0 {
        eprintln!("error: {failed} gradient checks exceed {tolerance:e}");
        return Ok((o, ExitCode::from(1)));
    }
    Ok((o, ExitCode::SUCCESS))
}
