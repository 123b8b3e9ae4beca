use std::collections::HashSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use affectrec::catalog::{Catalog, CatalogError};
use affectrec::corpus::{extract_batch, read_documents, read_index_records, read_jsonl, BatchError, CorpusError};
use affectrec::extraction::{
    parse_llm_response_detailed, Backend, ExtractionError, Lexicon, LexiconBackend, LlmBackend, LlmBackendConfig,
    StopWords,
};
use affectrec::privacy::{AuditedStorage, WriteCategory};
use affectrec::profiles::{CatalogItem, UserProfile};
use affectrec::recommender::{recommend as rank, NeighborhoodConfig, Strategy};
use affectrec_server::{ServeError, ServiceConfig};

use crate::{BackendArgs, BackendChoice, ExtractArgs, IngestArgs, RecommendArgs, ServeArgs, ValidateArgs};

/// Output lines buffered between audited appends.
const FLUSH_LINES: usize = 256;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Backend(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Backend(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Backend(m) => f.write_str(m),
        }
    }
}

fn data(context: impl fmt::Display) -> impl FnOnce(io::Error) -> Failure {
    move |e| Failure::Data(format!("{context}: {e}"))
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>, Failure> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdin().lock()));
    }
    let file = File::open(path).map_err(data(path.display()))?;
    Ok(Box::new(BufReader::new(file)))
}

fn build_backend(args: &BackendArgs) -> Result<Backend, Failure> {
    match args.backend {
        BackendChoice::Lexicon => {
            let lexicon = match &args.lexicon {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(data(p.display()))?;
                    Lexicon::parse_tsv(&p.display().to_string(), &text)
                        .map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?
                }
                None => Lexicon::english(),
            };
            let stopwords = match &args.stopwords {
                Some(p) => StopWords::parse(&fs::read_to_string(p).map_err(data(p.display()))?),
                None => StopWords::english(),
            };
            Ok(Backend::Lexicon(LexiconBackend::new(lexicon, stopwords)))
        }
        BackendChoice::Llm => {
            let (Some(endpoint), Some(model)) = (&args.llm_endpoint, &args.llm_model) else {
                return Err(Failure::Usage(
                    "--backend llm needs --llm-endpoint and --llm-model".into(),
                ));
            };
            let mut config = LlmBackendConfig::new(endpoint.clone(), model.clone());
            config.max_retries = args.llm_max_retries;
            config.timeout_secs = args.llm_timeout_secs;
            config.max_in_flight = args.concurrency as usize;
            if let Some(p) = &args.llm_prompt {
                config.prompt_template = Some(fs::read_to_string(p).map_err(data(p.display()))?);
            }
            LlmBackend::http(config)
                .map(Backend::Llm)
                .map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

/// Per-document failures seen during a batch.
#[derive(Default)]
struct Tally {
    failed: usize,
    backend_down: bool,
}

impl Tally {
    fn record(&mut self, error: &BatchError) {
        eprintln!("{error}");
        self.failed += 1;
        if let BatchError::Extraction {
            error: ExtractionError::BackendUnavailable(_),
            ..
        } = error
        {
            self.backend_down = true;
        }
    }

    fn finish(self) -> Result<(), Failure> {
        if self.backend_down {
            Err(Failure::Backend(format!(
                "{} document(s) failed; the LLM backend was unreachable",
                self.failed
            )))
        } else if self.failed > 0 {
            Err(Failure::Data(format!("{} document(s) failed", self.failed)))
        } else {
            Ok(())
        }
    }
}

enum Sink {
    Stdout(BufWriter<io::Stdout>),
    File {
        storage: AuditedStorage,
        key: String,
        buffer: String,
        lines: usize,
    },
}

impl Sink {
    fn open(output: Option<&Path>) -> Result<Self, Failure> {
        match output {
            None => Ok(Sink::Stdout(BufWriter::new(io::stdout()))),
            Some(path) => {
                let storage = AuditedStorage::filesystem();
                let key = path.to_string_lossy().into_owned();
                storage
                    .put(WriteCategory::Export, &key, b"")
                    .map_err(|e| Failure::Data(format!("{key}: {e}")))?;
                Ok(Sink::File {
                    storage,
                    key,
                    buffer: String::new(),
                    lines: 0,
                })
            }
        }
    }

    fn write_line(&mut self, line: &str) -> Result<(), Failure> {
        match self {
            Sink::Stdout(out) => out.write_all(line.as_bytes()).map_err(data("stdout")),
            Sink::File { buffer, lines, .. } => {
                buffer.push_str(line);
                *lines += 1;
                if *lines >= FLUSH_LINES {
                    self.flush()?;
                }
                Ok(())
            }
        }
    }

    fn flush(&mut self) -> Result<(), Failure> {
        match self {
            Sink::Stdout(out) => out.flush().map_err(data("stdout")),
            Sink::File {
                storage,
                key,
                buffer,
                lines,
            } => {
                if !buffer.is_empty() {
                    storage
                        .append(WriteCategory::Export, key, buffer.as_bytes())
                        .map_err(|e| Failure::Data(format!("{key}: {e}")))?;
                    buffer.clear();
                }
                *lines = 0;
                Ok(())
            }
        }
    }
}

pub fn extract(args: ExtractArgs) -> Result<(), Failure> {
    let backend = build_backend(&args.backend)?;
    let input = open_input(&args.input)?;
    let mut sink = Sink::open(args.output.as_deref())?;
    let mut tally = Tally::default();
    let documents = read_documents(input).map(|(_, d)| d);
    for result in extract_batch(documents, &backend, args.backend.concurrency as usize) {
        match result {
            Ok(record) => sink.write_line(&record.to_json_line())?,
            Err(e) => tally.record(&e),
        }
    }
    sink.flush()?;
    tally.finish()
}

pub fn ingest(args: IngestArgs) -> Result<(), Failure> {
    let backend = build_backend(&args.backend)?;
    let input = open_input(&args.input)?;
    let storage = Arc::new(AuditedStorage::filesystem());
    let catalog = Catalog::persistent(storage, args.catalog.to_string_lossy())
        .map_err(|e| Failure::Data(format!("{}: {e}", args.catalog.display())))?;

    // Known ids are rejected before they cost an extraction.
    let mut seen = HashSet::new();
    let documents = read_documents(input).map(|(line, d)| {
        d.and_then(|d| {
            if catalog.contains(&d.id) || !seen.insert(d.id.clone()) {
                Err(CorpusError {
                    line,
                    message: format!("duplicate id {:?}", d.id),
                })
            } else {
                Ok(d)
            }
        })
    });

    let mut tally = Tally::default();
    let mut added = 0;
    for result in extract_batch(documents, &backend, args.backend.concurrency as usize) {
        match result {
            Ok(record) => match catalog.insert(CatalogItem::from(record)) {
                Ok(()) => added += 1,
                Err(CatalogError::Storage(e)) => return Err(Failure::Data(e.to_string())),
                Err(e) => tally.record(&BatchError::Corpus(CorpusError {
                    line: 0,
                    message: e.to_string(),
                })),
            },
            Err(e) => tally.record(&e),
        }
    }
    eprintln!(
        "ingested {added} item(s); catalog {} now holds {}",
        args.catalog.display(),
        catalog.len()
    );
    tally.finish()
}

pub fn recommend(args: RecommendArgs) -> Result<(), Failure> {
    let strategy: Strategy = args.strategy.parse().map_err(Failure::Usage)?;
    let config = NeighborhoodConfig {
        k_users: args.k_users,
        alpha: args.alpha,
        n: args.n,
    };
    config.check().map_err(|e| Failure::Usage(e.to_string()))?;

    let bytes = fs::read(&args.profile).map_err(data(args.profile.display()))?;
    let profile: UserProfile = serde_json::from_slice(&bytes)
        .map_err(|e| Failure::Data(format!("{}: {e}", args.profile.display())))?;

    let records = read_index_records(open_input(&args.catalog)?)
        .map_err(|e| Failure::Data(format!("{}: {e}", args.catalog.display())))?;
    let mut ids = HashSet::new();
    let mut catalog = Vec::with_capacity(records.len());
    for record in records {
        if !ids.insert(record.id.clone()) {
            return Err(Failure::Data(format!(
                "{}: duplicate id {:?}",
                args.catalog.display(),
                record.id
            )));
        }
        catalog.push(CatalogItem::from(record));
    }

    let peers: Vec<UserProfile> = match (strategy, &args.peers) {
        (Strategy::Content, _) => Vec::new(),
        (_, None) => return Err(Failure::Usage(format!("--strategy {} needs --peers", args.strategy))),
        (_, Some(p)) => read_jsonl::<UserProfile, _>(open_input(p)?)
            .map(|(_, r)| r)
            .collect::<Result<_, CorpusError>>()
            .map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?,
    };

    let list = rank(strategy, &profile, &peers, &catalog, &config);
    let mut out = BufWriter::new(io::stdout());
    for item in &list.items {
        let line = serde_json::to_string(item).expect("recommendations always serialize");
        writeln!(out, "{line}").map_err(data("stdout"))?;
    }
    out.flush().map_err(data("stdout"))
}

pub fn serve(args: ServeArgs) -> Result<(), Failure> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let config = ServiceConfig::load(args.config.as_deref()).map_err(|e| Failure::Usage(e.to_string()))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Backend(format!("cannot start runtime: {e}")))?;
    runtime.block_on(affectrec_server::serve(config)).map_err(|e| match e {
        ServeError::Config(e) => Failure::Usage(e.to_string()),
        ServeError::Catalog(e) => Failure::Data(format!("catalog: {e}")),
        ServeError::Io(e) => Failure::Backend(e.to_string()),
    })
}

pub fn validate_fixture(args: ValidateArgs) -> Result<(), Failure> {
    let body = fs::read_to_string(&args.file).map_err(data(args.file.display()))?;
    let parsed = parse_llm_response_detailed(&body).map_err(|e| Failure::Data(format!("{}: {e}", e.code())))?;
    if parsed.renormalized {
        eprintln!(
            "note: reported values sum to {}; renormalized to 1",
            parsed.reported_sum
        );
    }
    println!(
        "{}",
        serde_json::to_string(&parsed.index).expect("indices always serialize")
    );
    Ok(())
}
