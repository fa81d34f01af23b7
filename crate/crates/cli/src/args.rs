use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "cavity-ness",
    version,
    about = "Steady state, heat currents and Fisher information of two coupled cavities between thermal reservoirs",
    allow_negative_numbers = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report the steady state and every observable at one parameter point (JSON).
    Steady {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate observables on a one- or two-dimensional grid (CSV).
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Integrate the master equation from an initial state (CSV).
    Dynamics {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        dynamics: DynamicsArgs,
    },
    /// Run the consistency checks over a parameter grid (JSON).
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        validate: ValidateArgs,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Bare cavity frequency (sets the unit).
    #[arg(long)]
    pub omega: Option<f64>,
    /// Inter-cavity coupling [default: 0.1].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Reservoir coupling rate [default: 0.1].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Temperature of reservoir a [default: 0.2].
    #[arg(long)]
    pub ta: Option<f64>,
    /// Temperature of reservoir b [default: 0.6].
    #[arg(long)]
    pub tb: Option<f64>,
    /// Finite-difference step in lambda for the Fisher information [default: 1e-6].
    #[arg(long)]
    pub qfi_step: Option<f64>,
    /// Refine the Fisher information derivatives with one Richardson step.
    #[arg(long)]
    pub richardson: bool,
    /// Output file [default: standard output].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bundled parameter set and grid: fig2a, fig2b, fig3, fig4.
    #[arg(long)]
    pub preset: Option<String>,
    /// Worker threads for grid evaluation.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// Outer axis, `name=min:max:count` or `name=v1,v2,...`; name is delta_t or lambda.
    #[arg(long)]
    pub axis1: Option<String>,
    /// Inner axis, same syntax.
    #[arg(long)]
    pub axis2: Option<String>,
    /// Comma-separated subset of the observable columns.
    #[arg(long)]
    pub outputs: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitialState {
    Ground,
    Mixed,
    ExcitedE,
    ExcitedF,
    Custom,
}

#[derive(Debug, Clone, Args)]
pub struct DynamicsArgs {
    #[arg(long, value_enum, default_value_t = InitialState::Mixed)]
    pub initial: InitialState,
    /// Populations `gg,ee,ff` for a custom initial state.
    #[arg(long)]
    pub populations: Option<String>,
    /// `re,im` of ρ_ef for a custom initial state [default: 0,0].
    #[arg(long)]
    pub coherence: Option<String>,
    /// Final time [default: 200/gamma].
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long, default_value_t = cavity_ness::dynamics::DEFAULT_DT)]
    pub dt: f64,
    /// Write every n-th step (the final step is always written).
    #[arg(long, default_value_t = 100)]
    pub sample_every: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Number of lambda values in [0.05, 0.5].
    #[arg(long, default_value_t = 20)]
    pub grid_lambda: usize,
    /// Number of temperature differences in [0, 0.8].
    #[arg(long, default_value_t = 20)]
    pub grid_dt: usize,
    /// Also compare with the truncated two-mode Fock-space steady state.
    #[arg(long)]
    pub fock: bool,
    /// Photon-number truncation per supermode for the Fock check.
    #[arg(long, default_value_t = 4)]
    pub nmax: usize,
    /// Temperature of reservoir b for the Fock check.
    #[arg(long, default_value_t = 1.0)]
    pub fock_tb: f64,
    #[arg(long, hide = true)]
    pub corrupt_generator: bool,
}
