use crate::report;
use crate::{
    AblateArgs, AnalyzeArgs, Cli, Command, EvaluateArgs, ExtractArgs, FitArgs, IndexArgs,
    SearchArgs, ServeArgs, TrainArgs, UsageError,
};
use anyhow::{bail, Context, Result};
use infostyle::embed::{embed_image, embed_triplets, extract_features};
use infostyle::metric::TrainOptions;
use infostyle::pipeline::{run_training, LambdaChoice, TrainPlan, TrainReport};
use infostyle::store::scan_corpus;
use infostyle::triplets::{label_all, read_triplets_csv, TripletResponses};
use infostyle::{
    build_index, decode_image, FeatureConfig, FeatureStore, MetricModel, SearchIndex, Searcher,
};
use infostyle_service::{AppState, ServiceConfig, Snapshot};
use rayon::prelude::*;
use std::path::Path;

pub fn run(cli: &Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Extract(a) => extract(cli, a),
        Command::Analyze(a) => analyze(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Ablate(a) => ablate(cli, a),
        Command::Index(a) => index(cli, a),
        Command::Search(a) => search(cli, a),
        Command::Serve(a) => serve(a),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("INFOSTYLE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| UsageError(format!("INFOSTYLE_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!(UsageError(format!("{what} `{}` does not exist", path.display())));
    }
    Ok(())
}

fn require_dir(path: &Path, what: &str) -> Result<()> {
    if !path.is_dir() {
        bail!(UsageError(format!("{what} `{}` is not a directory", path.display())));
    }
    Ok(())
}

fn load_triplets(path: &Path) -> Result<Vec<TripletResponses>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_triplets_csv(file).with_context(|| format!("reading {}", path.display()))
}

fn load_store(path: &Path) -> Result<FeatureStore> {
    FeatureStore::load(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: &Path) -> Result<MetricModel> {
    MetricModel::load(path).with_context(|| format!("reading {}", path.display()))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn extract(cli: &Cli, a: &ExtractArgs) -> Result<()> {
    require_dir(&a.corpus, "corpus")?;
    let entries = scan_corpus(&a.corpus)?;
    log::info!("extracting {} descriptors from {} images", a.features.len(), entries.len());
    let results: Vec<_> = entries
        .par_iter()
        .map(|e| {
            let out = std::fs::read(&e.path)
                .map_err(infostyle::Error::from)
                .and_then(|bytes| decode_image(&bytes))
                .map(|img| extract_features(&img, &a.features));
            (e, out)
        })
        .collect();

    let mut store = FeatureStore::new();
    let mut failures = Vec::new();
    for (entry, out) in results {
        match out {
            Ok(vectors) => {
                for v in vectors {
                    store.insert(&entry.id, v)?;
                }
            }
            Err(e) => {
                log::error!("{}: {e}", entry.path.display());
                failures.push(report::Failure {
                    id: entry.id.clone(),
                    path: entry.path.display().to_string(),
                    error: e.to_string(),
                });
            }
        }
    }
    if !failures.is_empty() && !a.skip_bad {
        for f in &failures {
            eprintln!("failed: {} ({}): {}", f.id, f.path, f.error);
        }
        bail!(
            "{} of {} images could not be processed; rerun with --skip-bad to ignore them",
            failures.len(),
            entries.len()
        );
    }
    store.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let summary = report::ExtractSummary {
        images: store.len(),
        features: a.features.iter().map(|k| k.name().to_string()).collect(),
        records: store.record_count(),
        skipped: failures,
        out: a.out.display().to_string(),
    };
    if cli.json {
        print_json(&summary)
    } else {
        print!("{}", summary.render());
        Ok(())
    }
}

fn analyze(cli: &Cli, a: &AnalyzeArgs) -> Result<()> {
    require_file(&a.triplets, "triplet file")?;
    let ts = load_triplets(&a.triplets)?;
    let analysis = report::Analysis::compute(&ts)?;
    if cli.json {
        print_json(&analysis)
    } else if a.csv {
        print!("{}", analysis.render_csv());
        Ok(())
    } else {
        print!("{}", analysis.render());
        Ok(())
    }
}

fn plan(cli: &Cli, fit: &FitArgs, config: FeatureConfig) -> Result<TrainPlan> {
    if fit.folds < 2 {
        bail!(UsageError("--folds must be at least 2".into()));
    }
    let lambda = match fit.lambda {
        Some(l) if !(l.is_finite() && l >= 0.0) => {
            bail!(UsageError(format!("--lambda must be finite and non-negative, got {l}")))
        }
        Some(l) => LambdaChoice::Fixed(l),
        None => {
            if fit.lambda_grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                bail!(UsageError("--lambda-grid values must be finite and non-negative".into()));
            }
            LambdaChoice::CrossValidate {
                grid: fit.lambda_grid.clone(),
                folds: fit.folds,
            }
        }
    };
    Ok(TrainPlan {
        config,
        lambda,
        n_train: fit.n_train,
        seed: cli.seed,
        options: TrainOptions {
            max_iters: fit.max_iters,
            ..TrainOptions::default()
        },
    })
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    require_file(&a.fit.features, "feature file")?;
    require_file(&a.fit.triplets, "triplet file")?;
    let plan = plan(cli, &a.fit, a.config.clone())?;
    let store = load_store(&a.fit.features)?;
    let responses = load_triplets(&a.fit.triplets)?;
    let rep = run_training(&store, &responses, &plan)?;
    rep.model
        .save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let summary = report::TrainSummary::new(&rep, cli.seed, &a.out)?;
    if cli.json {
        print_json(&summary)
    } else {
        print!("{}", summary.render());
        Ok(())
    }
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    require_file(&a.model, "model")?;
    require_file(&a.features, "feature file")?;
    require_file(&a.triplets, "triplet file")?;
    let model = load_model(&a.model)?;
    let store = load_store(&a.features)?;
    let labels = label_all(&load_triplets(&a.triplets)?);
    let data = embed_triplets(&model.feature_config, &model.pca, &store, &labels.labeled)?;
    let accuracy = model.evaluate(&data)?;
    let out = serde_json::json!({
        "triplets": data.len(),
        "ties_excluded": labels.ties.len(),
        "accuracy": accuracy,
    });
    if cli.json {
        print_json(&out)
    } else {
        println!(
            "accuracy {:.2}% on {} labeled triplets ({} ties excluded)",
            100.0 * accuracy,
            data.len(),
            labels.ties.len()
        );
        Ok(())
    }
}

fn ablate(cli: &Cli, a: &AblateArgs) -> Result<()> {
    require_file(&a.fit.features, "feature file")?;
    require_file(&a.fit.triplets, "triplet file")?;
    let plans = a
        .configs
        .iter()
        .map(|c| plan(cli, &a.fit, c.clone()))
        .collect::<Result<Vec<_>>>()?;
    let store = load_store(&a.fit.features)?;
    let responses = load_triplets(&a.fit.triplets)?;
    let reports: Vec<TrainReport> = plans
        .iter()
        .map(|p| {
            log::info!("training {}", p.config);
            run_training(&store, &responses, p).with_context(|| format!("config {}", p.config))
        })
        .collect::<Result<_>>()?;
    let table = report::AblationTable::new(&reports);
    if cli.json {
        print_json(&table)
    } else {
        print!("{}", table.render());
        Ok(())
    }
}

fn index(cli: &Cli, a: &IndexArgs) -> Result<()> {
    require_file(&a.model, "model")?;
    require_file(&a.features, "feature file")?;
    let model = load_model(&a.model)?;
    let store = load_store(&a.features)?;
    let index = build_index(&model, &store)?;
    index
        .save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let out = serde_json::json!({
        "entries": index.len(),
        "dim": index.dim(),
        "fingerprint": index.fingerprint(),
        "out": a.out.display().to_string(),
    });
    if cli.json {
        print_json(&out)
    } else {
        println!(
            "indexed {} images ({} dims) into {}",
            index.len(),
            index.dim(),
            a.out.display()
        );
        Ok(())
    }
}

fn search(cli: &Cli, a: &SearchArgs) -> Result<()> {
    require_file(&a.model, "model")?;
    require_file(&a.index, "index")?;
    if let Some(p) = &a.image {
        require_file(p, "query image")?;
    }
    let model = load_model(&a.model)?;
    let index = SearchIndex::load(&a.index).with_context(|| format!("reading {}", a.index.display()))?;
    let searcher = Searcher::new(model, index)?;
    let k = usize::try_from(a.k)?;
    let (query, hits) = match (&a.id, &a.image) {
        (Some(id), _) => (id.clone(), searcher.query_id(id, k, !a.include_self)?),
        (None, Some(path)) => {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            let img = decode_image(&bytes).with_context(|| format!("decoding {}", path.display()))?;
            let q = embed_image(searcher.model(), &img)?;
            (path.display().to_string(), searcher.query(&q, k, None)?)
        }
        (None, None) => unreachable!("clap requires --id or --image"),
    };
    let listing = report::SearchListing { query, results: hits };
    if cli.json {
        print_json(&listing)
    } else {
        print!("{}", listing.render());
        Ok(())
    }
}

fn serve(a: &ServeArgs) -> Result<()> {
    require_file(&a.model, "model")?;
    require_file(&a.index, "index")?;
    require_dir(&a.corpus, "corpus")?;
    if let Some(dir) = &a.ui_dir {
        require_dir(dir, "UI directory")?;
    }
    let mut config = ServiceConfig {
        cors_origins: a.cors_origins.clone(),
        ui_dir: a.ui_dir.clone(),
        ..ServiceConfig::default()
    };
    if let Some(w) = a.workers {
        config.workers = w;
    }
    let state = AppState::new(config);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let loader = state.clone();
        let (model, index, corpus) = (a.model.clone(), a.index.clone(), a.corpus.clone());
        // /health reports 503 until the snapshot is in place
        let load = tokio::task::spawn_blocking(move || -> Result<()> {
            let snap = Snapshot::load(&model, &index, &corpus)?;
            log::info!(
                "loaded model {} with {} indexed images",
                snap.fingerprint(),
                snap.searcher().index().len()
            );
            loader.install(snap);
            Ok(())
        });
        let server = tokio::spawn(infostyle_service::serve(a.addr, state));
        load.await??;
        server.await??;
        Ok(())
    })
}
