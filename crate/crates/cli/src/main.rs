use clap::{Parser, Subcommand};
use ventriq::commands;
use ventriq_core::register::RegParams;

#[derive(Parser)]
#[command(name = "ventriq", version, about = "Ventricle-overlap registration QA, multi-atlas registration and lesion burden mapping")]
struct Cli {
    /// Worker threads for cohort-level parallelism (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Base seed for synthetic data generation.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// JSON configuration file (pipeline).
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic atlas set and phantom cohort.
    Phantom(commands::PhantomArgs),
    /// Segment ventricles in a FLAIR image.
    Segment(commands::SegmentArgs),
    /// Register a moving image to a fixed image.
    Register(commands::RegisterArgs),
    /// Assess registration quality against the general atlas.
    Qa(commands::QaArgs),
    /// Run multi-atlas registration for one subject.
    Mar(commands::MarArgs),
    /// Build a quality-thresholded lesion burden map.
    WmhMap(commands::WmhMapArgs),
    /// Compute the segmentation-comparison metric panel for a mask pair.
    Metrics(commands::MetricsArgs),
    /// Run the full cohort pipeline.
    Pipeline(commands::PipelineArgs),
}

fn main() {
    let cli = Cli::parse();
    let reg = RegParams::default();
    let code = match &cli.command {
        Command::Phantom(args) => run(commands::cmd_phantom(args, cli.seed)),
        Command::Segment(args) => run(commands::cmd_segment(args)),
        Command::Register(args) => run(commands::cmd_register(args, &reg)),
        Command::Qa(args) => commands::cmd_qa(args, &reg),
        Command::Mar(args) => run(commands::cmd_mar(args, &reg)),
        Command::WmhMap(args) => run(commands::cmd_wmh_map(args)),
        Command::Metrics(args) => run(commands::cmd_metrics(args)),
        Command::Pipeline(args) => {
            run(commands::cmd_pipeline(args, cli.config.as_deref(), cli.workers))
        }
    };
    std::process::exit(code);
}

fn run(result: anyhow::Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
