use std::path::PathBuf;
use std::process::ExitCode;

use casimir_grating_cli::commands;
use casimir_grating_cli::diagnostics::{AxisChoice, SampleSpec};
use casimir_grating_cli::{CliError, Outcome, Overrides};
use clap::{Args, Parser, Subcommand};

/// Casimir energies of periodic dielectric gratings.
#[derive(Parser)]
#[command(name = "casimir-grating", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a config and run the profile invariant checks.
    Validate(Common),
    /// Scattering-matrix health on sampled channels.
    Diagnostics {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "real")]
        axis: AxisChoice,
        /// Number of sampled channels.
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Upper limit on open harmonics per sampled channel.
        #[arg(long, default_value_t = 5)]
        max_propagating: usize,
    },
    /// Energy sweep over the configured (delta_z, delta_x) grid.
    Energy {
        #[command(flatten)]
        common: Common,
        /// Ignore and do not write the node cache.
        #[arg(long)]
        no_cache: bool,
    },
    /// Sharp-slab reference energy at each configured separation.
    SlabBaseline(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Comma-separated vertical separations.
    #[arg(long, value_delimiter = ',')]
    delta_z: Option<Vec<f64>>,
    /// Comma-separated lateral shifts.
    #[arg(long, value_delimiter = ',')]
    delta_x: Option<Vec<f64>>,
    /// Nodes per panel in kappa.
    #[arg(long)]
    n_kappa: Option<usize>,
    /// Nodes in kx0.
    #[arg(long)]
    n_kx: Option<usize>,
    /// Nodes per panel in ky0.
    #[arg(long)]
    n_ky: Option<usize>,
    /// Highest retained harmonic.
    #[arg(long)]
    n_trunc: Option<usize>,
    #[arg(long)]
    ode_rtol: Option<f64>,
    #[arg(long)]
    ode_atol: Option<f64>,
    #[arg(long)]
    slab_permittivity: Option<f64>,
    /// Skip the halved-grid error estimate.
    #[arg(long)]
    no_error_estimate: bool,
    /// Directory for result files.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// Node cache directory, default <output-dir>/work.
    #[arg(long)]
    work_dir: Option<PathBuf>,
    /// Worker threads.
    #[arg(short, long)]
    workers: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            delta_z: self.delta_z.clone(),
            delta_x: self.delta_x.clone(),
            n_kappa: self.n_kappa,
            n_kx: self.n_kx,
            n_ky: self.n_ky,
            n_trunc: self.n_trunc,
            ode_rtol: self.ode_rtol,
            ode_atol: self.ode_atol,
            slab_permittivity: self.slab_permittivity,
            estimate_error: self.no_error_estimate.then_some(false),
            output_dir: self.output_dir.clone(),
            work_dir: self.work_dir.clone(),
            workers: self.workers,
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Validate(c) => commands::validate(&c.config, &c.overrides()),
        Command::Diagnostics {
            common,
            axis,
            samples,
            seed,
            max_propagating,
        } => {
            let spec = SampleSpec {
                count: samples,
                seed,
                max_propagating,
                ..SampleSpec::default()
            };
            commands::diagnostics(&common.config, &common.overrides(), axis, &spec)
        }
        Command::Energy { common, no_cache } => {
            commands::energy(&common.config, &common.overrides(), !no_cache)
        }
        Command::SlabBaseline(c) => commands::slab_baseline(&c.config, &c.overrides()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let outcome = match run(cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            Outcome::Failed
        }
    };
    ExitCode::from(outcome.code() as u8)
}
