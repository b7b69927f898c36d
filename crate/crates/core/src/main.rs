use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use polyp_recur::pipeline::{self, PipelineConfig, Stage, StageToggles, ERROR_FILE};

/// Polyp recurrence pipeline: parse reports, build the cohort, screen
/// covariates, fit Cox and random survival forest models.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parsing and forest growth.
    #[arg(long)]
    threads: Option<usize>,
    /// Run only this stage; earlier stages must have finished already.
    #[arg(long, value_parser = |s: &str| s.parse::<Stage>())]
    stage: Option<Stage>,
    /// Seed for synthesis, forest growth and importance.
    #[arg(long)]
    seed: Option<u64>,
    /// Also render KM and ROC curves as SVG.
    #[arg(long)]
    render_svg: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    let mut config = match PipelineConfig::from_file(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", e.to_json());
            return ExitCode::from(2);
        }
    };
    if let Some(out) = cli.out {
        config.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    if let Some(stage) = cli.stage {
        config.stages = StageToggles::only(stage);
    }
    config.output.render_svg |= cli.render_svg;

    match pipeline::run(&config, cli.threads) {
        Ok(summary) => {
            log::info!(
                "done: ran [{}], reused [{}], outputs in {}",
                join(&summary.ran),
                join(&summary.resumed),
                summary.out_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e} (details in {})", config.out_dir.join(ERROR_FILE).display());
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}

fn join(stages: &[Stage]) -> String {
    stages.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
}
