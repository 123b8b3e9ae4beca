//! `affectrec`: batch extraction, catalog building, offline recommendation,
//! fixture checks, and the HTTP service.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

const AFTER_HELP: &str = "\
Formats (one JSON object per line unless noted):
  corpus     {\"id\": \"tt0068646\", \"title\": \"The Godfather\", \"text\": \"An aging patriarch...\"}
             title is optional
  indices    {\"id\": \"tt0068646\", \"affective_index\": {\"happiness\": 0.1, \"sadness\": 0.6,
             \"anger\": 0.1, \"fear\": 0.1, \"surprise\": 0.05, \"disgust\": 0.05}}
  profile    single JSON document
             {\"emotion_id\": \"3f9c...\", \"index\": {...six keys...}, \"consumed_count\": 2,
              \"consumed_ids\": [\"tt0068646\", \"tt0071562\"]}
  peers      one profile per line
  ranking    {\"item_id\": \"tt0071562\", \"score\": 0.97}

Exit codes: 0 ok, 1 usage error, 2 data error, 3 backend error.";

#[derive(Debug, Parser)]
#[command(name = "affectrec", version, about = "Emotion-aware recommendation tools", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute an affective index for every document of a corpus.
    #[command(after_help = "Example:\n  affectrec extract --input corpus.jsonl --output indices.jsonl\n\n\
Input lines:  {\"id\": \"d1\", \"text\": \"Tears at the funeral.\"}\n\
Output lines: {\"id\": \"d1\", \"affective_index\": {\"happiness\": 0.0, \"sadness\": 1.0, ...}}\n\
Failed documents are reported on stderr and skipped; exit status is then 2 (3 if the LLM backend was unreachable).")]
    Extract(ExtractArgs),
    /// Extract a corpus and append the results to a catalog file.
    #[command(after_help = "Example:\n  affectrec ingest --input corpus.jsonl --catalog catalog.jsonl\n\n\
The catalog uses the indices format. Ids already in the catalog are rejected.")]
    Ingest(IngestArgs),
    /// Rank catalog items for one profile.
    #[command(after_help = "Example:\n  affectrec recommend --profile me.json --catalog indices.jsonl --strategy content --n 10\n  \
affectrec recommend --profile me.json --catalog indices.jsonl --strategy hybrid --alpha 0.7 --peers peers.jsonl\n\n\
Prints one {\"item_id\": ..., \"score\": ...} line per item, best first.")]
    Recommend(RecommendArgs),
    /// Run the HTTP service.
    #[command(after_help = "Example:\n  affectrec serve --config affectrec.toml\n\n\
Config (TOML, every key optional):\n  listen = \"127.0.0.1\"\n  port = 8080\n  catalog_path = \"catalog.jsonl\"\n  \
backend = \"lexicon\"\n  session_ttl_secs = 1800\n\n  [llm]\n  endpoint = \"https://api.example.com/v1/chat/completions\"\n  model = \"some-model\"\n\n\
AFFECTREC_<KEY> environment variables override the file.")]
    Serve(ServeArgs),
    /// Parse a recorded LLM reply and print the index it carries.
    #[command(after_help = "Example:\n  affectrec validate-fixture --file reply.json\n\n\
The file may hold a full chat-completion response or just the assistant text, e.g.\n  \
emotion_probs = {'happiness': 0.02, 'sadness': 0.8, 'anger': 0.05, 'fear': 0.1, 'surprise': 0.02, 'disgust': 0.01}")]
    ValidateFixture(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendChoice {
    Lexicon,
    Llm,
}

#[derive(Debug, Args)]
struct BackendArgs {
    /// Extraction backend.
    #[arg(long, value_enum, default_value = "lexicon")]
    backend: BackendChoice,
    /// Lexicon TSV with header `word<TAB>emotion[<TAB>weight]`; bundled list if omitted.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Stop-word list, one word per line; bundled list if omitted.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Chat-completion URL (llm backend).
    #[arg(long)]
    llm_endpoint: Option<String>,
    /// Model name sent with each request (llm backend).
    #[arg(long)]
    llm_model: Option<String>,
    /// Retries after a failed request (llm backend).
    #[arg(long, default_value_t = 3)]
    llm_max_retries: u32,
    /// Per-request timeout in seconds (llm backend).
    #[arg(long, default_value_t = 30)]
    llm_timeout_secs: u64,
    /// Prompt template file containing `{passage}` exactly once (llm backend).
    #[arg(long)]
    llm_prompt: Option<PathBuf>,
    /// Documents extracted at once; also caps concurrent LLM requests.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    concurrency: u64,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Corpus JSONL, or `-` for stdin.
    #[arg(long)]
    input: PathBuf,
    /// Indices JSONL to write; stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Corpus JSONL, or `-` for stdin.
    #[arg(long)]
    input: PathBuf,
    /// Catalog file; created if missing.
    #[arg(long)]
    catalog: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Debug, Args)]
struct RecommendArgs {
    /// Profile JSON document.
    #[arg(long)]
    profile: PathBuf,
    /// Catalog in indices format.
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long, default_value = "content")]
    strategy: String,
    /// Number of items to return.
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Content weight for the hybrid strategy, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Neighbours consulted by the collaborative strategy.
    #[arg(long, default_value_t = 10)]
    k_users: usize,
    /// Peer profiles, one per line; required for collaborative and hybrid.
    #[arg(long)]
    peers: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// TOML config file; defaults apply if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Recorded reply.
    #[arg(long)]
    file: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Extract(a) => commands::extract(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Recommend(a) => commands::recommend(a),
        Command::Serve(a) => commands::serve(a),
        Command::ValidateFixture(a) => commands::validate_fixture(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
