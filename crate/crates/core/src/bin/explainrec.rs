use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use explainrec::aspects::AspectExtractor;
use explainrec::catalog::{ingest_catalog, load_history, load_metadata, merge_metadata, CatalogFormat};
use explainrec::config::{AppConfig, ConfigFlags};
use explainrec::embedding::{build_index, EmbeddingIndex};
use explainrec::evaluation::{build_stats_report, read_ratings_log};
use explainrec::explanation::write_explanations;
use explainrec::llm::ASPECT_MAX_TOKENS;
use explainrec::service::{read_explanation_log, serve};
use explainrec::{AspectCache, Catalog, Explainer, ExplanationRequest, Method};

#[derive(Parser)]
#[command(name = "explainrec", version, about = "Explanations for movie recommendations")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "EXPLAINREC_CONFIG")]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: ConfigFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a catalog (and optionally a history file) into the data directory.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "movielens")]
        format: CatalogFormat,
        /// JSON lines of `{id, plot?, genres?, year?, poster_url?, title?}`.
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// `user::item[::rating[::timestamp]]` interactions.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Build the embedding index, unless it is already current.
    Embed {
        #[arg(long)]
        force: bool,
    },
    /// Extract aspects for the listed items, or the whole catalog.
    Aspects {
        #[arg(long = "item")]
        items: Vec<String>,
    },
    /// Explain recommended items for one user.
    Explain {
        #[arg(long)]
        user: String,
        #[arg(long = "item", required = true)]
        items: Vec<String>,
        #[arg(long, value_enum, default_value = "both")]
        method: MethodArg,
    },
    /// Summarize a ratings log.
    Stats {
        #[arg(long)]
        ratings: Option<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        json_out: Option<PathBuf>,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP API.
    Serve,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum MethodArg {
    ZeroShot,
    LogicScaffolding,
    Both,
}

impl MethodArg {
    fn methods(self) -> &'static [Method] {
        match self {
            Self::ZeroShot => &[Method::ZeroShot],
            Self::LogicScaffolding => &[Method::LogicScaffolding],
            Self::Both => &Method::ALL,
        }
    }
}

struct Failure {
    code: &'static str,
    stage: Option<String>,
    message: String,
}

fn fail<E: std::fmt::Display>(code: &'static str) -> impl Fn(E) -> Failure {
    move |e| Failure {
        code,
        stage: None,
        message: e.to_string(),
    }
}

type CliResult = Result<serde_json::Value, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("EXPLAINREC_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    let outcome = load_config(&cli).and_then(|config| {
        tracing::info!(config = %serde_json::to_string(&config.redacted()).unwrap_or_default(), "configuration");
        run(&cli.command, &config)
    });
    match outcome {
        Ok(serde_json::Value::Null) => ExitCode::SUCCESS,
        Ok(summary) => {
            // A closed stdout (e.g. `| head`) is not a failure of the command.
            let _ = writeln!(std::io::stdout(), "{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", json!({ "error": { "code": f.code, "stage": f.stage, "message": f.message } }));
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> Result<AppConfig, Failure> {
    let mut config = AppConfig::load(cli.config.as_deref()).map_err(fail("config"))?;
    config.apply_flags(&cli.flags);
    config.validate().map_err(fail("config"))?;
    Ok(config)
}

fn run(command: &Command, config: &AppConfig) -> CliResult {
    match command {
        Command::Ingest {
            input,
            format,
            metadata,
            history,
        } => ingest(config, input, *format, metadata.as_deref(), history.as_deref()),
        Command::Embed { force } => embed(config, *force),
        Command::Aspects { items } => aspects(config, items),
        Command::Explain { user, items, method } => explain(config, user, items, *method),
        Command::Stats { ratings, json_out, json } => stats(config, ratings.as_deref(), json_out.as_deref(), *json),
        Command::Serve => serve(config).map(|_| serde_json::Value::Null).map_err(fail("serve")),
    }
}

fn ensure_parent(path: &Path) -> Result<(), Failure> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => std::fs::create_dir_all(dir).map_err(fail("io")),
        None => Ok(()),
    }
}

fn load_catalog(config: &AppConfig) -> Result<Catalog, Failure> {
    ingest_catalog(config.catalog_file(), CatalogFormat::Jsonl)
        .map(|(c, _)| c)
        .map_err(fail("catalog"))
}

fn ingest(
    config: &AppConfig,
    input: &Path,
    format: CatalogFormat,
    metadata: Option<&Path>,
    history: Option<&Path>,
) -> CliResult {
    let (mut catalog, report) = ingest_catalog(input, format).map_err(fail("catalog"))?;
    let mut merge = None;
    if let Some(path) = metadata {
        let patches = load_metadata(path).map_err(fail("metadata"))?;
        let (merged, r) = merge_metadata(&catalog, &patches);
        catalog = merged;
        merge = Some(r);
    }
    let out = config.catalog_file();
    ensure_parent(&out)?;
    std::fs::write(&out, catalog.to_jsonl_string()).map_err(fail("io"))?;

    let mut users = None;
    if let Some(path) = history {
        let histories = load_history(path).map_err(fail("history"))?;
        let dest = config.history_file();
        ensure_parent(&dest)?;
        std::fs::copy(path, &dest).map_err(fail("io"))?;
        users = Some(histories.len());
    }
    Ok(json!({
        "catalog": out,
        "items": catalog.len(),
        "report": report,
        "metadata": merge,
        "users": users,
    }))
}

fn embed(config: &AppConfig, force: bool) -> CliResult {
    let catalog = load_catalog(config)?;
    let provider = config.embedding_provider().map_err(fail("config"))?;
    let path = config.index_file();
    if !force && path.exists() {
        if let Ok(index) = EmbeddingIndex::load(&path) {
            if index.is_current_for(&catalog, provider.model_id()) {
                return Ok(json!({ "status": "up-to-date", "index": path, "items": index.len() }));
            }
        }
    }
    let index = build_index(&catalog, provider.as_ref()).map_err(fail("embedding"))?;
    ensure_parent(&path)?;
    index.save(&path).map_err(fail("embedding"))?;
    Ok(json!({
        "status": "built",
        "index": path,
        "items": index.len(),
        "model_id": index.model_id(),
        "dimension": index.dimension(),
    }))
}

fn extractor(config: &AppConfig, gateway: explainrec::Gateway) -> Result<AspectExtractor, Failure> {
    Ok(AspectExtractor::new(
        gateway,
        config.examples().map_err(fail("config"))?,
        config.templates().map_err(fail("config"))?,
    )
    .with_params(config.generation_params().with_max_tokens(ASPECT_MAX_TOKENS)))
}

fn aspects(config: &AppConfig, items: &[String]) -> CliResult {
    let catalog = load_catalog(config)?;
    let gateway = config.gateway().map_err(fail("config"))?;
    let extractor = extractor(config, gateway)?;
    let cache_path = config.aspect_cache_file();
    let cache = AspectCache::load(&cache_path).map_err(fail("aspects"))?;
    let ids: Vec<String> = if items.is_empty() {
        catalog.ids().map(str::to_string).collect()
    } else {
        items.to_vec()
    };
    let mut extracted = BTreeMap::new();
    let mut failed = BTreeMap::new();
    for id in &ids {
        let Some(item) = catalog.get(id) else {
            failed.insert(id.clone(), "not in catalog".to_string());
            continue;
        };
        match extractor.extract(item, &cache) {
            Ok(set) => {
                extracted.insert(id.clone(), set.aspects);
            }
            Err(e) => {
                failed.insert(id.clone(), e.to_string());
            }
        }
    }
    ensure_parent(&cache_path)?;
    cache.save(&cache_path).map_err(fail("aspects"))?;
    if !failed.is_empty() {
        return Err(Failure {
            code: "aspects",
            stage: Some("aspects".into()),
            message: serde_json::to_string(&failed).unwrap_or_default(),
        });
    }
    Ok(json!({ "cache": cache_path, "extracted": extracted }))
}

fn explain(config: &AppConfig, user: &str, items: &[String], method: MethodArg) -> CliResult {
    let catalog = Arc::new(load_catalog(config)?);
    let index = EmbeddingIndex::load(config.index_file()).map_err(fail("embedding"))?;
    if !index.is_current_for(&catalog, index.model_id()) {
        return Err(fail("embedding")("index does not match the catalog; run `explainrec embed`"));
    }
    let history = load_history(config.history_file())
        .map_err(fail("history"))?
        .into_iter()
        .find(|h| h.user_id == user)
        .ok_or_else(|| fail("not_found")(format!("user `{user}` has no history")))?;
    let gateway = config.gateway().map_err(fail("config"))?;
    let cache_path = config.aspect_cache_file();
    let cache = Arc::new(AspectCache::load(&cache_path).map_err(fail("aspects"))?);
    let explainer = Explainer::new(
        catalog,
        Arc::new(index),
        gateway.clone(),
        extractor(config, gateway)?,
        cache.clone(),
        config.templates().map_err(fail("config"))?,
    );

    let mut produced = Vec::new();
    let mut outcome = Ok(());
    'outer: for item in items {
        for &m in method.methods() {
            let mut request = ExplanationRequest::new(item.clone(), history.clone(), m);
            request.k = config.k;
            request.params = config.generation_params();
            match explainer.generate_explanation(&request) {
                Ok(e) => produced.push(e),
                Err(e) => {
                    outcome = Err(Failure {
                        code: "explain",
                        stage: Some(e.stage.to_string()),
                        message: format!("{item} ({m}): {}", e.message),
                    });
                    break 'outer;
                }
            }
        }
    }

    let out = config.explanations_file();
    ensure_parent(&out)?;
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&out)
        .map_err(fail("io"))?;
    write_explanations(std::io::BufWriter::new(file), &produced).map_err(fail("io"))?;
    cache.save(&cache_path).map_err(fail("aspects"))?;
    outcome?;

    let summary: Vec<_> = produced
        .iter()
        .map(|e| {
            json!({
                "id": e.id,
                "recommended_id": e.request.recommended_id,
                "method": e.request.method,
                "text": e.text,
                "validation_passed": e.validation.all_passed(),
            })
        })
        .collect();
    Ok(json!({ "explanations": summary, "log": out, "llm_calls": explainer.gateway().calls() }))
}

fn stats(config: &AppConfig, ratings: Option<&Path>, json_out: Option<&Path>, as_json: bool) -> CliResult {
    let path = ratings.map(Path::to_path_buf).unwrap_or_else(|| config.ratings_file());
    let mut records = read_ratings_log(&path).map_err(fail("ratings"))?;
    if records.iter().any(|r| r.method.is_none()) {
        let methods: BTreeMap<String, Method> = read_explanation_log(&config.explanations_file())
            .map_err(fail("explanations"))?
            .into_iter()
            .map(|e| (e.id, e.request.method))
            .collect();
        for r in records.iter_mut().filter(|r| r.method.is_none()) {
            r.method = methods.get(&r.explanation_id).copied();
        }
    }
    let criteria = config.criterion_set().map_err(fail("config"))?;
    let report = build_stats_report(records.iter(), &criteria);
    let value = serde_json::to_value(&report).map_err(fail("io"))?;
    if let Some(p) = json_out {
        ensure_parent(p)?;
        std::fs::write(p, serde_json::to_string_pretty(&value).map_err(fail("io"))?).map_err(fail("io"))?;
    }
    if as_json {
        Ok(value)
    } else {
        let _ = write!(std::io::stdout(), "{report}");
        Ok(serde_json::Value::Null)
    }
}
