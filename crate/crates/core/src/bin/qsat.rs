use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qsat::pass::{aperture_sweep, default_apertures, simulate_pass, simulate_qkpc};
use qsat::report::{
    aperture_chart, pass_charts, qkpc_chart, write_aperture_sweep, write_charts, write_pass,
    write_records, QKPC_CSV,
};
use qsat::scenario::ScenarioConfig;
use qsat::validate::{run_validation, ValidationPlan};
use qsat::Error;

const EXIT_VALIDATION: u8 = 3;

#[derive(Parser)]
#[command(name = "qsat", version, about = "LEO satellite quantum downlink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (`key = value` lines); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use this `t_s,loss_db` series instead of the computed pass.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write SVG charts.
    #[arg(long)]
    plots: bool,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Key and keyless rates over one pass.
    SimulatePass(Common),
    /// Optimized zenith key rate against transmitter aperture.
    ApertureSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated apertures in metres.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        apertures: Option<Vec<f64>>,
    },
    /// Keyless private rates over one pass.
    QkpcProfile(Common),
    /// Monte Carlo containment and property checks.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

fn load(common: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ScenarioConfig::from_file(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(p) = &common.loss_csv {
        cfg.loss_csv = Some(p.clone());
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::SimulatePass(common) => {
            let cfg = load(&common)?;
            let report = simulate_pass(&cfg)?;
            write_pass(&cfg.output_dir, &report)?;
            if common.plots {
                write_charts(&cfg.output_dir, &pass_charts(&report))?;
            }
            println!("{}", serde_json::to_string_pretty(&report.summary)?);
        }
        Command::ApertureSweep { common, apertures } => {
            let cfg = load(&common)?;
            let apertures = apertures.unwrap_or_else(default_apertures);
            let points = aperture_sweep(&cfg, &apertures)?;
            write_aperture_sweep(&cfg.output_dir, &points)?;
            if common.plots {
                write_charts(&cfg.output_dir, &[("aperture_sweep.svg", aperture_chart(&points))])?;
            }
            for p in &points {
                println!("{:.3} m  {:.3} dB  {:.1} bit/s", p.d_t_m, p.zenith_loss_db, p.skr_hz);
            }
        }
        Command::QkpcProfile(common) => {
            let cfg = load(&common)?;
            let (_, samples) = simulate_qkpc(&cfg)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            write_records(&cfg.output_dir.join(QKPC_CSV), &samples)?;
            if common.plots {
                write_charts(&cfg.output_dir, &[("qkpc_rate_vs_time.svg", qkpc_chart(&samples))])?;
            }
            let bits: f64 = samples.iter().map(|s| s.qkpc_rate_bps * cfg.window_s).sum();
            println!("{} samples, {bits:.4e} private bits", samples.len());
        }
        Command::Validate { common, trials } => {
            let cfg = load(&common)?;
            let plan = ValidationPlan {
                trials,
                ..Default::default()
            };
            let report = run_validation(&cfg, &plan)?;
            print!("{}", report.table());
            println!("X-basis QBER estimator offset: {:+.4e}", report.qber_x_offset);
            if !report.passed() {
                return Ok(EXIT_VALIDATION);
            }
        }
    }
    Ok(0)
}

fn workers(command: &Command) -> Option<usize> {
    match command {
        Command::SimulatePass(c) | Command::QkpcProfile(c) => c.workers,
        Command::ApertureSweep { common, .. } | Command::Validate { common, .. } => common.workers,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let pool = match workers(&cli.command) {
        Some(0) => {
            eprintln!("error: --workers must be >= 1");
            return ExitCode::from(1);
        }
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
