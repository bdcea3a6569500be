use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cdgarch::config::{HistorySpec, NamedHistory, SchemeChoice, SolverChoice};
use cdgarch::events::{EventOptions, MAX_PANEL};
use cdgarch::mean::FORCING_PANEL;
use cdgarch::stats::write_validation_csv;
use cdgarch::{
    euler_ensemble, event_ensemble, solve_mean_fde, solve_mean_renewal, stability_report, Battery, Config, Error,
    SamplePath, Suite, ValidationRow,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

/// Simulation and moment analysis of the continuous-time GARCH process with delay.
#[derive(Parser)]
#[command(name = "cdgarch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate variance and price paths.
    Simulate(RunArgs),
    /// Solve the mean equation.
    Mean(RunArgs),
    /// Evaluate stationarity, positivity and moment conditions and scan for characteristic roots.
    Analyze(RunArgs),
    /// Run the validation battery against the configured model.
    Validate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = SuiteArg::Full)]
        suite: SuiteArg,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Euler,
    Events,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Dde,
    Renewal,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Full,
    Quick,
}

impl RunArgs {
    fn load(&self) -> cdgarch::Result<Config> {
        let mut cfg = Config::from_path(&self.config)?;
        let run = &mut cfg.run;
        if let Some(seed) = self.seed {
            run.seed = seed;
        }
        if let Some(s) = self.scheme {
            run.scheme = match s {
                SchemeArg::Euler => SchemeChoice::Euler,
                SchemeArg::Events => SchemeChoice::Events,
            };
        }
        if let Some(s) = self.solver {
            run.solver = match s {
                SolverArg::Dde => SolverChoice::Dde,
                SolverArg::Renewal => SolverChoice::Renewal,
            };
        }
        if let Some(n) = self.paths {
            run.paths = n;
        }
        if let Some(d) = self.delta {
            run.delta = d;
        }
        if let Some(h) = self.horizon {
            run.horizon = h;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Accumulates `report.txt`: a header with the config digest, the settings
/// each command used, its results, and the resolved config.
struct Report {
    text: String,
}

impl Report {
    fn new(command: &str, cfg: &Config) -> Self {
        let mut text = format!("cdgarch {command}\nconfig_digest = {}\n\n[settings]\n", cfg.digest());
        let r = &cfg.run;
        for (k, v) in [
            ("seed", r.seed.to_string()),
            ("horizon", r.horizon.to_string()),
            ("paths", r.paths.to_string()),
            ("history", history_label(r.history)),
            ("y0", r.y0.to_string()),
        ] {
            let _ = writeln!(text, "{k} = {v}");
        }
        Self { text }
    }

    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key} = {value}");
    }

    fn section(&mut self, name: &str) {
        let _ = write!(self.text, "\n[{name}]\n");
    }

    fn finish(mut self, cfg: &Config, out: &Path) -> cdgarch::Result<()> {
        let _ = write!(self.text, "\n[resolved config]\n{}", cfg.to_toml());
        fs::write(out.join("report.txt"), &self.text)?;
        fs::write(out.join("config.toml"), cfg.to_toml())?;
        Ok(())
    }
}

fn history_label(h: HistorySpec) -> String {
    match h {
        HistorySpec::Level(v) => v.to_string(),
        HistorySpec::Named(NamedHistory::Stationary) => "stationary".into(),
        HistorySpec::Named(NamedHistory::Floor) => "floor".into(),
    }
}

fn create(path: PathBuf) -> cdgarch::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn simulate(args: &RunArgs) -> cdgarch::Result<ExitCode> {
    let cfg = args.load()?;
    let model = cfg.model()?;
    let phi = cfg.history(&model)?;
    let run = &cfg.run;
    let mut report = Report::new("simulate", &cfg);
    let mut paths = match run.scheme {
        SchemeChoice::Euler => {
            report.kv("scheme", "euler");
            report.kv("delta", run.delta);
            euler_ensemble(&model, &phi, run.delta, run.horizon, run.paths, run.seed)?
        }
        SchemeChoice::Events => {
            report.kv("scheme", "events");
            report.kv("ode_step", run.ode_step);
            report.kv("report_dt", run.report_dt);
            report.kv("history_panel", MAX_PANEL);
            let opts = EventOptions::new(run.ode_step, run.report_dt)?;
            event_ensemble(&model, &phi, run.horizon, run.paths, run.seed, &opts)?
        }
    };
    fs::create_dir_all(&args.out)?;
    let digest = cfg.digest();
    for (i, p) in paths.iter_mut().enumerate() {
        p.meta.model_digest.clone_from(&digest);
        p.write_csv(create(args.out.join(format!("path_{i:04}.csv")))?)?;
        p.write_meta(create(args.out.join(format!("path_{i:04}.meta")))?)?;
    }
    report.section("results");
    let events: usize = paths.iter().map(|p| p.events.len()).sum();
    let negative: usize = paths.iter().map(|p| p.meta.negative_x.len()).sum();
    let lowest = paths.iter().map(SamplePath::min_x).fold(f64::INFINITY, f64::min);
    report.kv("paths_written", paths.len());
    report.kv("events", events);
    report.kv("negative_x_steps", negative);
    report.kv("min_x", lowest);
    report.finish(&cfg, &args.out)?;
    println!("wrote {} paths to {}", paths.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn mean(args: &RunArgs) -> cdgarch::Result<ExitCode> {
    let cfg = args.load()?;
    let model = cfg.model()?;
    let phi = cfg.history(&model)?;
    let run = &cfg.run;
    let mut report = Report::new("mean", &cfg);
    report.kv("mean_step", run.mean_step);
    let path = match run.solver {
        SolverChoice::Dde => {
            report.kv("solver", "dde");
            report.kv("history_panel", MAX_PANEL);
            solve_mean_fde(&model, &phi, run.horizon, run.mean_step)?
        }
        SolverChoice::Renewal => {
            report.kv("solver", "renewal");
            report.kv("forcing_panel", FORCING_PANEL);
            solve_mean_renewal(&model, &phi, run.horizon, run.mean_step)?
        }
    };
    fs::create_dir_all(&args.out)?;
    path.write_csv(create(args.out.join("mean.csv"))?)?;
    report.section("results");
    report.kv("m_end", path.m.last().copied().unwrap_or(f64::NAN));
    if let Ok(m) = cdgarch::stationary_mean(&model) {
        report.kv("M", m);
        report.kv("sup_distance_from_M", path.future().iter().fold(0.0f64, |a, v| a.max((v - m).abs())));
    }
    report.finish(&cfg, &args.out)?;
    println!("wrote {}", args.out.join("mean.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn analyze(args: &RunArgs) -> cdgarch::Result<ExitCode> {
    let cfg = args.load()?;
    let model = cfg.model()?;
    let mut report = Report::new("analyze", &cfg);
    report.kv("grid_density", cfg.run.grid_density);
    let ex0 = match cfg.history(&model) {
        Ok(phi) => phi.value(0.0),
        Err(e) => {
            report.kv("history_unavailable", &e);
            0.0
        }
    };
    report.kv("E_X0", ex0);
    report.kv("E_X0_sq", ex0 * ex0);
    let sr = stability_report(&model, ex0, ex0 * ex0, cfg.run.grid_density)?;
    fs::create_dir_all(&args.out)?;
    sr.write_csv(create(args.out.join("stability.csv"))?)?;
    report.section("results");
    for (k, v) in sr.entries() {
        report.kv(k, v);
    }
    report.finish(&cfg, &args.out)?;
    for (k, v) in sr.entries() {
        println!("{k} = {v}");
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(args: &RunArgs, suite: SuiteArg) -> cdgarch::Result<ExitCode> {
    let cfg = args.load()?;
    let model = cfg.model()?;
    let suite = if suite == SuiteArg::Full { Suite::Full } else { Suite::Quick };
    let battery = Battery::new(model, suite, cfg.run.seed)?;
    let mut report = Report::new("validate", &cfg);
    report.kv("suite", if suite == Suite::Full { "full" } else { "quick" });
    for (k, v) in battery.settings() {
        report.kv(k, v);
    }
    report.section("results");
    let mut rows: Vec<ValidationRow> = Vec::new();
    let mut failed = 0;
    for outcome in battery.run_all() {
        let c = outcome?;
        let line = format!("{} [{:.2}s]", c.line(), c.seconds);
        println!("{line}");
        report.kv(&format!("criterion_{}", c.id), &line);
        failed += usize::from(!c.pass);
        rows.extend(c.rows.into_iter().map(|mut r| {
            r.quantity = format!("{}. {}", c.id, r.quantity);
            r
        }));
    }
    report.kv("failed", failed);
    fs::create_dir_all(&args.out)?;
    write_validation_csv(&rows, create(args.out.join("validation.csv"))?)?;
    report.finish(&cfg, &args.out)?;
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VALIDATION) })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::ConditionFailed { .. } | Error::OffGrid { .. } => {
            EXIT_CONFIG
        }
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Mean(a) => mean(a),
        Command::Analyze(a) => analyze(a),
        Command::Validate { run, suite } => validate(run, *suite),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(exit_code(&e))
    })
}
