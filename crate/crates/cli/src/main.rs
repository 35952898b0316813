mod commands;
mod report;

use clap::{Args, Parser, Subcommand};
use infostyle::FeatureConfig;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

/// Style similarity for bitmap infographics: extract features, learn a
/// weighted metric from triplet judgments, and search by example.
#[derive(Parser, Debug)]
#[command(name = "infostyle", version)]
pub struct Cli {
    /// Seed for every random choice (split, cross-validation folds).
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Only warnings and errors on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute descriptors for every image in a corpus directory.
    Extract(ExtractArgs),
    /// Agreement tables and oracle consistency of a triplet file.
    Analyze(AnalyzeArgs),
    /// Fit PCA and the weighted metric; write the model.
    Train(TrainArgs),
    /// Accuracy of a trained model on every labeled triplet.
    Evaluate(EvaluateArgs),
    /// Train and compare several feature configurations on one split.
    Ablate(AblateArgs),
    /// Embed the corpus under a model.
    Index(IndexArgs),
    /// Nearest neighbors of a corpus image or an image file.
    Search(SearchArgs),
    /// Run the HTTP search service.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated descriptor names.
    #[arg(long, value_delimiter = ',', default_value = "color_hist,lum_hist,hog16,hog32,lbp")]
    pub features: Vec<infostyle::FeatureKind>,
    /// Log undecodable images and continue instead of failing.
    #[arg(long)]
    pub skip_bad: bool,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub triplets: PathBuf,
    /// Emit the tables as CSV.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub triplets: PathBuf,
    /// Fixed penalty weight; skips cross-validation.
    #[arg(long, conflicts_with = "lambda_grid")]
    pub lambda: Option<f64>,
    /// Candidate penalty weights for cross-validation.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1,10,100")]
    pub lambda_grid: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Training triplets; default scales 600 of 847 to the labeled count.
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Feature configuration, e.g. `color_hist+hog16` or `color_hist:raw+hog16:200`.
    #[arg(long, default_value = "color_hist+hog16")]
    pub config: FeatureConfig,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub triplets: PathBuf,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Configuration to compare; repeat for each row.
    #[arg(long = "config", required = true)]
    pub configs: Vec<FeatureConfig>,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("query").required(true).args(["id", "image"])))]
pub struct SearchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    /// Query by indexed corpus id.
    #[arg(long)]
    pub id: Option<String>,
    /// Query by image file.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(short, long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Keep the query image itself in id queries.
    #[arg(long)]
    pub include_self: bool,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, env = "INFOSTYLE_ADDR", default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long, env = "INFOSTYLE_MODEL")]
    pub model: PathBuf,
    #[arg(long, env = "INFOSTYLE_INDEX")]
    pub index: PathBuf,
    #[arg(long, env = "INFOSTYLE_CORPUS")]
    pub corpus: PathBuf,
    #[arg(long, env = "INFOSTYLE_UI_DIR")]
    pub ui_dir: Option<PathBuf>,
    /// Allowed browser origin (repeatable, `*` for any).
    #[arg(long = "cors-origin", env = "INFOSTYLE_CORS_ORIGINS", value_delimiter = ',')]
    pub cors_origins: Vec<String>,
    /// Concurrent upload/thumbnail jobs; defaults to the CPU count.
    #[arg(long, env = "INFOSTYLE_WORKERS")]
    pub workers: Option<usize>,
}

/// Bad invocation (exit 1), as opposed to bad data (exit 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
