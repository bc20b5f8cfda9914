use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use memwave::{commands, parse_config, Outcome, RunConfig, RunDir};

#[derive(Parser)]
#[command(
    name = "memwave",
    version,
    about = "Wave scattering with time-dependent permittivity and memory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured model and write field frames.
    Simulate(Common),
    /// Split a run into incident, reflected and transmitted profiles.
    Extract(Common),
    /// Compute `T f` and `R+ f` on the configured frequency lines.
    Smatrix(Common),
    /// Run the validation campaigns and write pass/fail reports.
    Validate(Common),
    /// Self-convergence study of the configured model.
    Convergence(Common),
    /// Field frames for every configured (gamma, alpha_p) pair.
    Frames(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root; the run goes to `<out>/<name>`.
    #[arg(long, env = "MEMWAVE_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Keep every N-th time level in frames.
    #[arg(long)]
    stride: Option<usize>,
    /// Frequency line height; repeat for several lines.
    #[arg(long = "sigma-line")]
    sigma_line: Vec<f64>,
}

impl Common {
    fn load(&self) -> memwave::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => parse_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        if let Some(stride) = self.stride {
            cfg.stride = stride;
        }
        if !self.sigma_line.is_empty() {
            cfg.frequency.sigmas = self.sigma_line.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> memwave::Result<Outcome> {
    let (Command::Simulate(c)
    | Command::Extract(c)
    | Command::Smatrix(c)
    | Command::Validate(c)
    | Command::Convergence(c)
    | Command::Frames(c)) = &cli.command;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| memwave::CliError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = c.load()?;
    let dir = RunDir::new(&cfg.output, &cfg.name);
    match &cli.command {
        Command::Simulate(_) => commands::cmd_simulate(&cfg, &dir),
        Command::Extract(_) => commands::cmd_extract(&cfg, &dir),
        Command::Smatrix(_) => commands::cmd_smatrix(&cfg, &dir),
        Command::Validate(_) => commands::cmd_validate(&cfg, &dir),
        Command::Convergence(_) => commands::cmd_convergence(&cfg, &dir),
        Command::Frames(_) => commands::cmd_frames(&cfg, &cfg.output),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            println!("wrote {} files", outcome.written.len());
            if outcome.pass {
                println!("pass");
                ExitCode::SUCCESS
            } else {
                println!("FAIL: {}", outcome.failures.join(", "));
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
