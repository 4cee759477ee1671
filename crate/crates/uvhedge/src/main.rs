use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uvhedge::commands::{self, Overrides};
use uvhedge::config::{self, Config, Route};
use uvhedge::error::exit;
use uvhedge::report::{Format, Report};
use uvhedge::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "uvhedge",
    version,
    about = "Delta-vega hedging and uncertainty premia under volatility-model misspecification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Value, greeks, cash equivalent and the first-order quote.
    Price(Common),
    /// The cash equivalent by PDE, Monte Carlo or both.
    Cashequiv {
        #[command(flatten)]
        common: Common,
        /// Also solve on a grid with both spacings halved.
        #[arg(long)]
        refine: bool,
    },
    /// Penalised objective over a ψ grid and its first-order fit.
    Sweep(Common),
    /// Objective and P&L of each hedging strategy at the configured ψ.
    HedgeSim(Common),
    /// Fast invariant suite; exits nonzero if any property fails.
    Selftest {
        #[command(flatten)]
        output: Output,
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    route: Option<Route>,
    /// Comma-separated, e.g. "0.02,0.05,0.1,0.2".
    #[arg(long, value_delimiter = ',')]
    psi_grid: Option<Vec<f64>>,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct Output {
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut raw = config::load(&self.config)?;
        Overrides {
            route: self.route,
            psi_grid: self.psi_grid.clone(),
            paths: self.paths,
            steps: self.steps,
            seed: self.seed,
        }
        .apply(&mut raw);
        raw.validate()
    }
}

fn emit(report: &Report, output: &Output) -> Result<()> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    match &output.out {
        Some(p) => {
            let f = File::create(p).map_err(io_err(p))?;
            let mut w = BufWriter::new(f);
            report.write(output.format, &mut w)?;
            w.flush().map_err(io_err(p))
        }
        None => report.write(output.format, io::stdout().lock()),
    }
}

fn run(cli: Cli) -> Result<Report> {
    uvhedge::mc::thread_count()?;
    let (report, output) = match &cli.command {
        Command::Price(c) => (commands::price(&c.load()?)?, &c.output),
        Command::Cashequiv { common, refine } => (commands::cashequiv(&common.load()?, *refine)?, &common.output),
        Command::Sweep(c) => (commands::sweep(&c.load()?)?, &c.output),
        Command::HedgeSim(c) => (commands::hedge_sim(&c.load()?)?, &c.output),
        Command::Selftest { output, inject_fault } => (commands::selftest(inject_fault.as_deref())?, output),
    };
    emit(&report, output)?;
    Ok(report)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(r) => match r.failure {
            None => ExitCode::SUCCESS,
            Some(msg) => {
                eprintln!("uvhedge: {msg}");
                ExitCode::from(exit::NUMERICAL as u8)
            }
        },
        Err(e) => {
            eprintln!("uvhedge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
