use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "nugap",
    version,
    about = "nu-metric distances between SISO plants"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Distance d(P1, P2) with index diagnostics, as JSON.
    Compute(PlantArgs),
    /// Pointwise chordal distance y -> kappa(y) on the axis grid.
    Sweep(PlantArgs),
    /// Winding report for conj(n1) n2 + conj(d1) d2.
    Index(PlantArgs),
    /// Coprimeness margin inf |n|^2 + |d|^2 of each plant.
    Margin(PlantArgs),
    /// Closed-loop check of P1 with --controller, probing any further plants.
    Stabilize(PlantArgs),
    /// Built-in numerical property suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Settings {
    /// Smallest |y| on the imaginary-axis grid.
    #[arg(long)]
    pub ymin: Option<f64>,
    /// Largest |y| on the imaginary-axis grid.
    #[arg(long)]
    pub ymax: Option<f64>,
    /// Grid points per sign of y.
    #[arg(long = "grid-n")]
    pub grid_n: Option<usize>,
    /// Golden-section rounds per refined extremum.
    #[arg(long = "refine-iters")]
    pub refine_iters: Option<usize>,
    /// Comma-separated disc radii, increasing, inside (0, 1).
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// Samples per disc circle.
    #[arg(long = "circle-n")]
    pub circle_n: Option<usize>,
    /// Output format; `verify` prints a text table unless `json` is asked for.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write output here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include the (y, kappa) grid samples in the report.
    #[arg(long)]
    pub sweep: bool,
}

#[derive(Debug, Args)]
pub struct PlantArgs {
    /// Plant specs, e.g. `diffusion:a=0.5` or `expr:n=1;d=s+1`.
    pub plants: Vec<String>,
    #[arg(long)]
    pub plant1: Option<String>,
    #[arg(long)]
    pub plant2: Option<String>,
    #[arg(long)]
    pub controller: Option<String>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Nominal diffusion parameter.
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    /// Comparison diffusion parameter.
    #[arg(long = "a-tilde", default_value_t = 0.75)]
    pub a_tilde: f64,
    #[command(flatten)]
    pub settings: Settings,
}

impl PlantArgs {
    /// `--plant1`/`--plant2` first, then positional specs in order.
    pub fn specs(&self) -> Vec<String> {
        let mut positional = self.plants.iter().cloned();
        let first = self.plant1.clone().or_else(|| positional.next());
        let second = self.plant2.clone().or_else(|| positional.next());
        first.into_iter().chain(second).chain(positional).collect()
    }
}
