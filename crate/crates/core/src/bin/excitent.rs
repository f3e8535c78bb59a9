use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use excitent::cli::{self, Format, TransportConfig};
use excitent::Error;

#[derive(Parser, Debug)]
#[command(name = "excitent", version, about = "Entanglement and transport in truncated Fock-space exchange models")]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Output file (stdout when omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dimer concurrences over a gt grid on [0, pi]
    Dimer {
        #[arg(long, value_delimiter = ',', default_value = "0.3")]
        alpha: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        gt_steps: usize,
    },
    /// Maximal concurrence of leveled coherent inputs for N = 2..=n-max
    CmaxScan {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.8")]
        alpha: Vec<f64>,
        #[arg(long, default_value_t = 7)]
        n_max: usize,
    },
    /// Small-amplitude coefficients f_N against their closed forms
    FnTable {
        #[arg(long, default_value_t = 7)]
        n_max: usize,
    },
    /// Transport efficiency robustness for a network config (TOML)
    Transport {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the alphas listed in the config
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        /// Use fixed-step RK4 with this step instead of the adaptive integrator
        #[arg(long, num_args = 0..=1, default_missing_value = "0.01")]
        fixed_step: Option<f64>,
    },
}

enum Failure {
    Model(Error),
    Io(std::io::Error),
}

fn run(args: Args) -> Result<(), Failure> {
    let format = Format::from(args.format);
    let text = match args.command {
        Command::Dimer { alpha, gt_steps } => cli::cmd_dimer(&alpha, gt_steps).map_err(Failure::Model)?.render(format),
        Command::CmaxScan { alpha, n_max } => cli::cmd_cmax_scan(&alpha, n_max).map_err(Failure::Model)?.render(format),
        Command::FnTable { n_max } => cli::cmd_fn_table(n_max).map_err(Failure::Model)?.render(format),
        Command::Transport { config, alpha, fixed_step } => {
            let mut cfg = TransportConfig::load(&config).map_err(Failure::Model)?;
            if let Some(alpha) = alpha {
                cfg.alphas = alpha;
            }
            if fixed_step.is_some() {
                cfg.settings.fixed_step = fixed_step;
            }
            cli::cmd_transport(&cfg).map_err(Failure::Model)?.render(format)
        }
    };
    match args.out {
        Some(path) => std::fs::write(&path, text).map_err(Failure::Io),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
