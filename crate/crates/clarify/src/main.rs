use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use clarify::{router, AppState};
use clarify_core::config::ExperimentConfig;
use clarify_core::eval::{
    check_checkpoints, complementarity, run_offline_eval, simulate_online, ClickModel, UniformRecommender,
};
use clarify_core::experiment::{ours_name, run_benchmark, standard_methods, train_method, BenchmarkRun, MethodKind};
use clarify_core::inventory::{generate_benchmark, load_inventory, Corpus, GeneratorConfig, Split};
use clarify_core::policy::{Checkpoint, Method, Recommender};
use clarify_core::search::self_play_batch;
use clarify_core::service::{Engine, Resolution};
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "clarify", version, about = "Clarify ambiguous questions by recommending labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark corpus.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        intents: Option<usize>,
        #[arg(long)]
        labels: Option<usize>,
        #[arg(long)]
        queries: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one self-play pass over the training split and write the search targets.
    Selfplay {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one method and save its checkpoint.
    Train {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the recommended labels for a question.
    Recommend {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(short, default_value_t = 6)]
        n: usize,
    },
    /// Offline recall and complementarity on the test split.
    Eval {
        #[arg(long = "ckpt", required = true)]
        ckpts: Vec<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulated online experiment with scripted users.
    Simulate {
        #[arg(long = "ckpt", required = true)]
        ckpts: Vec<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        sessions: usize,
        #[arg(long, default_value = "oracle")]
        click_model: ClickModel,
        /// Click-through probability of the noisy oracle.
        #[arg(long, default_value_t = 0.9)]
        click_prob: f64,
        #[arg(long, default_value_t = 11)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        ckpt: PathBuf,
        /// Inventory file; must match the one embedded in the checkpoint.
        #[arg(long)]
        inventory: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        log_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Interactive clarification in the terminal.
    Demo {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train every method on generated benchmarks and write all reports.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also save every trained checkpoint under <out>/seed-<s>/.
        #[arg(long)]
        save_checkpoints: bool,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn load_checkpoints(paths: &[PathBuf]) -> Result<Vec<Checkpoint>> {
    paths
        .iter()
        .map(|p| Checkpoint::load(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Gen {
            seed,
            intents,
            labels,
            queries,
            config,
            out,
        } => {
            let mut g: GeneratorConfig = load_config(config.as_deref())?.generator;
            g.intents = intents.unwrap_or(g.intents);
            g.labels = labels.unwrap_or(g.labels);
            g.queries = queries.unwrap_or(g.queries);
            let corpus = generate_benchmark(&g, seed)?;
            corpus.save(&out)?;
            println!(
                "wrote {} intents, {} labels, {} queries to {}",
                corpus.inventory.num_intents(),
                corpus.inventory.num_labels(),
                corpus.queries.len(),
                out.display()
            );
        }
        Command::Selfplay { corpus, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let corpus = Corpus::load(&corpus)?;
            let queries: Vec<_> = corpus.split(Split::Train).collect();
            let episodes = self_play_batch(&corpus.inventory, &queries, &cfg.search, &cfg.reward, cfg.search.seed, 0);
            let mut text = String::new();
            let mut skipped = 0;
            for ep in episodes {
                match ep {
                    Ok(ep) => {
                        for pair in ep.pairs {
                            text.push_str(&serde_json::to_string(&pair)?);
                            text.push('\n');
                        }
                    }
                    Err(e) => {
                        log::warn!("{e}");
                        skipped += 1;
                    }
                }
            }
            write_out(&out, &text)?;
            println!("wrote {} pairs ({skipped} queries skipped)", text.lines().count());
        }
        Command::Train {
            method,
            corpus,
            config,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let corpus = Corpus::load(&corpus)?;
            let kind = match method {
                Method::Rl => MethodKind::Rl { reward: cfg.reward },
                Method::Supervised => MethodKind::Supervised { reward: cfg.reward },
                Method::Greedy => MethodKind::Greedy,
                Method::Nst => MethodKind::Nst,
            };
            let (ck, log) = train_method(kind, &corpus, &cfg)?;
            for e in &log.epochs {
                println!("{}", serde_json::to_string(e)?);
            }
            ck.save(&out)?;
            println!("saved {} to {} ({})", ck.name, out.display(), ck.hash());
        }
        Command::Recommend { ckpt, query, n } => {
            let ck = Checkpoint::load(&ckpt)?;
            for x in ck.recommend(&query, n).labels() {
                println!("{}\t{}", x.0, ck.inventory.phrase(*x));
            }
        }
        Command::Eval {
            ckpts,
            corpus,
            config,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let corpus = Corpus::load(&corpus)?;
            let cks = load_checkpoints(&ckpts)?;
            check_checkpoints(&cks, &corpus)?;
            let uniform = UniformRecommender::new(corpus.inventory.num_labels(), cfg.eval.uniform_seed);
            let mut rows: Vec<&dyn Recommender> = cks.iter().map(|c| c as &dyn Recommender).collect();
            rows.push(&uniform);
            let report = run_offline_eval(&rows, &corpus, &cfg.eval.ns)?;
            let comp = complementarity(&rows, &corpus, cfg.eval.n, cfg.eval.tokenizer)?;
            print!("{}\n{}", report.to_table(), comp.to_table());
            if let Some(out) = out {
                write_out(&out, &report.to_json())?;
                write_out(
                    &out.with_extension("complementarity.json"),
                    &(serde_json::to_string_pretty(&comp)? + "\n"),
                )?;
            }
        }
        Command::Simulate {
            ckpts,
            corpus,
            config,
            sessions,
            click_model,
            click_prob,
            seed,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?.sim;
            cfg.sessions = sessions;
            cfg.seed = seed;
            cfg.click_model = match click_model {
                ClickModel::NoisyOracle { .. } => ClickModel::NoisyOracle { p: click_prob },
                m => m,
            };
            let corpus = Corpus::load(&corpus)?;
            let cks = load_checkpoints(&ckpts)?;
            check_checkpoints(&cks, &corpus)?;
            let rows: Vec<&dyn Recommender> = cks.iter().map(|c| c as &dyn Recommender).collect();
            let report = simulate_online(&rows, &corpus, &cfg)?;
            print!("{}", report.to_table());
            if let Some(out) = out {
                write_out(&out, &report.to_json())?;
            }
        }
        Command::Serve {
            ckpt,
            inventory,
            config,
            log_dir,
            port,
        } => {
            let mut cfg = load_config(config.as_deref())?.service;
            if log_dir.is_some() {
                cfg.log_dir = log_dir;
            }
            let ck = Checkpoint::load(&ckpt)?;
            if let Some(path) = inventory {
                ck.check_inventory(&load_inventory(&path)?)?;
            }
            let inv = ck.inventory.clone();
            let engine = Arc::new(Engine::new(Arc::new(ck), inv, cfg)?);
            let app = router(AppState::new(engine));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
                log::info!("listening on {}", listener.local_addr()?);
                axum::serve(listener, app).await?;
                Ok::<_, anyhow::Error>(())
            })?;
        }
        Command::Demo { ckpt, config } => demo(&ckpt, config.as_deref())?,
        Command::Experiment {
            config,
            seeds,
            out,
            save_checkpoints,
        } => experiment(config.as_deref(), &seeds, &out, save_checkpoints)?,
    }
    Ok(())
}

fn prompt(msg: &str) -> Result<Option<String>> {
    print!("{msg}");
    io::stdout().flush()?;
    let mut line = String::new();
    if io::stdin().lock().read_line(&mut line)? == 0 {
        return Ok(None);
    }
    Ok(Some(line.trim().to_string()))
}

fn demo(ckpt: &Path, config: Option<&Path>) -> Result<()> {
    let cfg = load_config(config)?.service;
    let ck = Checkpoint::load(ckpt)?;
    let inv = ck.inventory.clone();
    let engine = Engine::new(Arc::new(ck), inv.clone(), cfg)?;
    println!("Ask a question (empty line to quit).");
    while let Some(q) = prompt("\nyou> ")? {
        if q.is_empty() {
            break;
        }
        let s = engine.start_session(&q)?;
        for (i, x) in s.labels.iter().enumerate() {
            println!("  [{}] {}", i + 1, inv.phrase(*x));
        }
        println!("  [0] none of the above");
        let choice = loop {
            let Some(a) = prompt("label> ")? else { return Ok(()) };
            match a.parse::<usize>() {
                Ok(0) => break None,
                Ok(k) if k <= s.labels.len() => break Some(s.labels[k - 1]),
                _ => println!("pick a number between 0 and {}", s.labels.len()),
            }
        };
        let found = engine.select_label(&s.session_id, choice)?;
        for (i, h) in found.hits.iter().enumerate() {
            println!("  [{}] {}", i + 1, inv.intent(h.id).map_or("", |x| x.text.as_str()));
        }
        println!("  [0] talk to a person");
        let outcome = loop {
            let Some(a) = prompt("intent> ")? else { return Ok(()) };
            match a.parse::<usize>() {
                Ok(0) => break Resolution::Transfer,
                Ok(k) if k <= found.hits.len() => break Resolution::Intent(found.hits[k - 1].id),
                _ => println!("pick a number between 0 and {}", found.hits.len()),
            }
        };
        if let Resolution::Intent(id) = outcome {
            println!("bot> {}", inv.intent(id).map_or("", |x| x.answer.as_str()));
        } else {
            println!("bot> transferring you to an agent");
        }
        engine.resolve(&s.session_id, outcome)?;
        let m = engine.metrics();
        println!("(CTR {:.2}, THA {:.2})", m.ctr, m.tha);
    }
    Ok(())
}

fn experiment(config: Option<&Path>, seeds: &[u64], out: &Path, save: bool) -> Result<()> {
    if seeds.is_empty() {
        bail!("no seeds given");
    }
    let cfg = load_config(config)?;
    fs::create_dir_all(out)?;
    write_out(&out.join("config.toml"), &toml::to_string(&cfg)?)?;
    let methods = standard_methods(cfg.reward);
    let mut runs: Vec<BenchmarkRun> = Vec::new();
    for &seed in seeds {
        let dir = out.join(format!("seed-{seed}"));
        fs::create_dir_all(&dir)?;
        let mut save_err = None;
        let (run, _) = run_benchmark(&cfg, seed, &methods, &mut |ck, secs| {
            println!("seed {seed}: {} trained in {secs:.1}s", ck.name);
            if save {
                if let Err(e) = ck.save(&dir.join(format!("{}.ckpt", ck.name))) {
                    save_err.get_or_insert(e);
                }
            }
        })?;
        if let Some(e) = save_err {
            return Err(e.into());
        }
        print!("{}\n{}\n{}", run.offline.to_table(), run.complementarity.to_table(), run.online.to_table());
        write_out(&dir.join("offline.json"), &run.offline.to_json())?;
        write_out(&dir.join("offline.txt"), &run.offline.to_table())?;
        write_out(&dir.join("complementarity.txt"), &run.complementarity.to_table())?;
        write_out(&dir.join("online.json"), &run.online.to_json())?;
        write_out(&dir.join("online.txt"), &run.online.to_table())?;
        write_out(&dir.join("run.json"), &(serde_json::to_string_pretty(&run)? + "\n"))?;
        runs.push(run);
    }
    let summary = summarize(&runs, &ours_name(&cfg));
    print!("{summary}");
    write_out(&out.join("summary.txt"), &summary)?;
    Ok(())
}

fn summarize(runs: &[BenchmarkRun], ours: &str) -> String {
    use clarify_core::experiment::{mean_over, mean_recall, mean_upper_bound};
    let mut names: Vec<String> = runs[0].offline.methods.iter().map(|m| m.name.clone()).collect();
    names.dedup();
    let mut s = format!("means over {} seeds (main policy: {ours})\n", runs.len());
    s.push_str(&format!(
        "{:<16} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "method", "R@3", "R@6", "div", "overlap", "CTR", "THA"
    ));
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}%", 100.0 * x));
    for name in &names {
        let div = mean_over(runs, |r| r.complementarity.row(name).map(|x| x.diversity));
        let ov = mean_over(runs, |r| r.complementarity.row(name).map(|x| x.overlap));
        let ctr = mean_over(runs, |r| r.online.row(name).map(|x| x.ctr));
        let tha = mean_over(runs, |r| r.online.row(name).map(|x| x.tha));
        s.push_str(&format!(
            "{:<16} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            name,
            fmt(mean_recall(runs, name, 3)),
            fmt(mean_recall(runs, name, 6)),
            fmt(div),
            fmt(ov),
            fmt(ctr),
            fmt(tha)
        ));
    }
    let top = clarify_core::eval::TOP_K_ROW;
    s.push_str(&format!(
        "{:<16} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        top,
        "",
        "",
        "",
        "",
        "-",
        fmt(mean_over(runs, |r| r.online.row(top).map(|x| x.tha)))
    ));
    s.push_str(&format!(
        "{:<16} {:>8} {:>8}\n",
        "upper bound",
        fmt(mean_upper_bound(runs, 3)),
        fmt(mean_upper_bound(runs, 6))
    ));
    s
}
