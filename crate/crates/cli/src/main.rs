mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "roadlabel",
    version,
    about = "Plan views over road networks, composite label maps and collect crowd votes"
)]
struct Cli {
    /// Settings file of `key = value` lines; flags take precedence over it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print errors as a JSON object on standard error
    #[arg(long, global = true)]
    json: bool,
    /// Seed for every random choice
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Output {
    /// Write the result here instead of standard output
    #[arg(long, short, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random road network
    GenGraph {
        #[arg(long, default_value_t = 40)]
        vertices: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Select view poses for a road graph
    Plan {
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Minimum distance between poses, meters
        #[arg(long = "dmin", alias = "d-min")]
        d_min: Option<f64>,
        /// Comma-separated road types that may hold poses
        #[arg(long, value_delimiter = ',', default_value = "major")]
        road_types: Vec<String>,
        /// Interchange clustering radius, meters
        #[arg(long)]
        eps: Option<f64>,
        /// Interchange clustering density
        #[arg(long)]
        min_pts: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Report how much of a world a plan sees
    Coverage {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        world: Option<PathBuf>,
        /// Visibility range, meters
        #[arg(long)]
        d_max: Option<f64>,
        /// Field of view, degrees
        #[arg(long)]
        fov: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Scatter assets along the roads of a graph
    GenWorld {
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Assets per 100 m of road
        #[arg(long, default_value_t = 5.0)]
        density: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Turn a contribution stack and labeling into a PPM label map
    Composite {
        #[arg(long)]
        stack: PathBuf,
        #[arg(long)]
        labeling: PathBuf,
        /// Palette CSV (class_id,name,r,g,b); road-scene palette by default
        #[arg(long)]
        palette: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Map a label map onto another class set
    Remap {
        #[arg(long)]
        input: PathBuf,
        /// Remap CSV (src_id,dst_id|ignore); shipped road-scene to evaluation table by default
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        src_palette: Option<PathBuf>,
        #[arg(long)]
        dst_palette: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Per-class intersection over union of two label maps
    Iou {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        #[arg(long)]
        palette: Option<PathBuf>,
        /// Count classes absent from both maps as 0 in the mean
        #[arg(long)]
        count_absent: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Pack segments into annotation tasks
    Tasks {
        /// JSON list of segments
        #[arg(long)]
        segments: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Run the annotation service
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        data_dir: PathBuf,
        /// Workers per task; defaults to the vote target k
        #[arg(long)]
        quota: Option<usize>,
        #[arg(long, default_value_t = roadlabel_service::DEFAULT_LEASE_MINUTES)]
        lease_minutes: u32,
    },
    /// Draw votes from a simulated annotator
    SimulateVotes {
        /// Gold labeling JSON
        #[arg(long)]
        gold: PathBuf,
        /// Probability of voting the gold class
        #[arg(long)]
        p: Option<f64>,
        /// Number of classes; taxonomy size by default
        #[arg(long)]
        classes: Option<u32>,
        /// Votes per section
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Plurality label per section
    Aggregate {
        /// Votes log, one JSON object per line
        #[arg(long, conflicts_with = "ballots", required_unless_present = "ballots")]
        votes: Option<PathBuf>,
        /// Ballots JSON
        #[arg(long)]
        ballots: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Accuracy against votes per section and the diminishing-returns point
    Curve {
        /// Ballots JSON, or a curve CSV (k,accuracy,stderr)
        #[arg(long)]
        ballots: PathBuf,
        /// Largest vote count to evaluate; defaults to k
        #[arg(long)]
        k_max: Option<usize>,
        /// Accuracy the fitted curve must reach
        #[arg(long)]
        target: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Mean votes per section over sections seen in few scenes
    Stats {
        #[arg(long)]
        ballots: PathBuf,
        #[arg(long, default_value_t = roadlabel_core::annotation::DEFAULT_SCENE_THRESHOLD)]
        threshold: u32,
        #[command(flatten)]
        output: Output,
    },
}

fn main() -> ExitCode {
    let json_errors = std::env::args().any(|a| a == "--json");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if json_errors
                && !matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion)
            {
                let err = CliError::new("usage", e.to_string().trim().to_string());
                eprintln!("{}", err.to_json());
                return ExitCode::from(2);
            }
            e.exit();
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((json, err)) => {
            if json {
                eprintln!("{}", err.to_json());
            } else {
                eprintln!("error: {err}");
            }
            ExitCode::FAILURE
        }
    }
}
