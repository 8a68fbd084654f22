use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::RunConfig;

/// Usage analysis for a bibliographic web service: log ingest, indicator
/// tables, usage factors and co-usage clustering.
#[derive(Debug, Parser)]
#[command(name = "webusage", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Datastore root directory.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Start of the analysis period (inclusive).
    #[arg(long, global = true)]
    from: Option<String>,
    /// End of the analysis period (exclusive).
    #[arg(long, global = true)]
    to: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `key = value` run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse query, display or order logs and append them to the store.
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// CSV `suffix,country_code` table replacing the built-in one.
        #[arg(long)]
        tld_table: Option<PathBuf>,
    },
    /// Import bibliographic records (JSON lines).
    ImportBiblio { file: PathBuf },
    /// Import customer attributes (CSV `customer_id,country,activity`).
    ImportCustomers { file: PathBuf },
    /// Precompute periodic statistics and write distribution tables.
    Stats(commands::StatsArgs),
    /// Web usage factor (displays) and citation order factor (orders) tables.
    Factors(commands::FactorsArgs),
    /// Co-usage matrices, clusters, relevance tables and maps.
    Cousage(commands::CousageArgs),
    /// Strategic map from a clusters.json file.
    Map(commands::MapArgs),
    /// Generate a synthetic, seeded dataset.
    Fixture(commands::FixtureArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = cli.global;
    let result = RunConfig::resolve(g.config.as_deref(), g.store, g.from, g.to, g.out).and_then(|cfg| {
        match cli.command {
            Command::Ingest { files, tld_table } => commands::ingest(&cfg, &files, tld_table),
            Command::ImportBiblio { file } => commands::import_biblio(&cfg, &file),
            Command::ImportCustomers { file } => commands::import_customers(&cfg, &file),
            Command::Stats(args) => commands::stats(&cfg, args),
            Command::Factors(args) => commands::factors(&cfg, args),
            Command::Cousage(args) => commands::cousage(&cfg, args),
            Command::Map(args) => commands::map(&cfg, args),
            Command::Fixture(args) => commands::fixture(&cfg, args),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("webusage: {e}");
            e.exit_code()
        }
    }
}
