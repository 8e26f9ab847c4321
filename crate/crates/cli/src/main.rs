mod commands;
mod config;
mod svg;
mod util;

use clap::{Parser, Subcommand};

use kdm_helio_core::ErrorCategory;

#[derive(Parser)]
#[command(
    name = "kdm-helio",
    version,
    about = "Density models and binned statistics for solar-wind time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a CSV export into a chunked column store
    Ingest(commands::ingest::IngestArgs),
    /// Summarize parameters per radial bin (JSON, CSV, optional SVG)
    Stats(commands::stats::StatsArgs),
    /// Fit a density model to one parameter and bin
    Fit(commands::fit::FitArgs),
    /// Density and distribution curves from a fitted model
    Curves(commands::curves::CurvesArgs),
    /// Density grid of a bivariate model (CSV, optional heatmap SVG)
    Grid(commands::grid::GridArgs),
    /// Draw samples from a fitted model
    Sample(commands::sample::SampleArgs),
    /// Anomaly thresholds from a fitted model
    Anomaly(commands::anomaly::AnomalyArgs),
    /// Full pipeline: stats, per-bin fits, curves, thresholds
    Report(commands::report::ReportArgs),
}

fn main() {
    kdm_helio_core::parallel::configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(args) => commands::ingest::run(args),
        Command::Stats(args) => commands::stats::run(args),
        Command::Fit(args) => commands::fit::run(args),
        Command::Curves(args) => commands::curves::run(args),
        Command::Grid(args) => commands::grid::run(args),
        Command::Sample(args) => commands::sample::run(args),
        Command::Anomaly(args) => commands::anomaly::run(args),
        Command::Report(args) => commands::report::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {}: {err}", err.category().as_str());
        std::process::exit(match err.category() {
            ErrorCategory::Usage => 2,
            ErrorCategory::Schema => 3,
            ErrorCategory::Data => 4,
            ErrorCategory::Numeric => 5,
        });
    }
}
