mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use holdnet::network::AnalyticComparison;
use holdnet::scenarios::{emit_figure_data, support_range, sweep_support, FigureFormat, Precision, SweepConfig};
use holdnet::{
    classify_resilience, least_joint_root, monte_carlo_estimate, MonteCarloConfig, RootResult64,
    SimError, SolveError, SupportLevel,
};
use serde_json::json;

use config::LoadedConfig;
use report::{num, Format, Report, Table, DIGITS};

#[derive(Debug, Parser)]
#[command(name = "holdnet", version, about = "Default contagion in two-layer holding networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads for simulate, sweep and compare.
    #[arg(long, global = true, env = "HOLDNET_THREADS")]
    threads: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Least joint root of the cascade functionals.
    Solve(ConfigArg),
    /// Resilience of an uninfected configuration.
    Classify(ConfigArg),
    /// Monte Carlo cascades on sampled networks.
    Simulate(ConfigArg),
    /// Least joint root across support levels.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated support levels, e.g. `--xs=0,-3,neg_infinity`;
        /// defaults to 0, −1, …, −r_max.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_support)]
        xs: Option<Vec<SupportLevel>>,
    },
    /// Analytic prediction next to Monte Carlo estimates.
    Compare(ConfigArg),
}

fn parse_support(s: &str) -> Result<SupportLevel, String> {
    if s == "neg_infinity" {
        return Ok(SupportLevel::Unbounded);
    }
    let x: i32 = s.parse().map_err(|_| format!("{s:?} is not an integer or neg_infinity"))?;
    SupportLevel::finite(x).map_err(|e| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Config(String),
    NonConvergence(String),
    Precondition(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::NonConvergence(_) => 3,
            Failure::Precondition(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::NonConvergence(m) | Failure::Precondition(m) | Failure::Io(m) => m,
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let m = e.to_string();
        match e {
            SolveError::NoInitialDefaults
            | SolveError::InitialDefaultsPresent { .. }
            | SolveError::NotSuperSolution { .. } => Failure::Precondition(m),
            SolveError::NonConvergence { .. } => Failure::NonConvergence(m),
            SolveError::InvalidTolerance(_) | SolveError::Analytic(_) => Failure::Config(m),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load(arg: &ConfigArg) -> Result<LoadedConfig, Failure> {
    config::load(&arg.config).map_err(|e| Failure::Config(e.to_string()))
}

fn header(r: &mut Report, c: &LoadedConfig) {
    r.field("holding_type", c.config.holding_type.to_string())
        .field("support_level", c.config.support_level.to_string());
}

fn root_fields(r: &mut Report, root: &RootResult64) {
    let [z1, z2] = root.z_hat;
    r.field("z1", num(z1))
        .field("z2", num(z2))
        .field("total", num(z1 + z2))
        .field("iterations", root.iterations.to_string())
        .field("residual", num(root.residual))
        .field("direction_ok", root.direction_ok.to_string())
        .field(
            "direction_vector",
            root.direction_vector
                .map(|v| format!("{} {}", num(v[0]), num(v[1])))
                .unwrap_or_else(|| "none".into()),
        )
        .field("spectral_radius", num(root.spectral_radius));
}

fn root_json(root: &RootResult64) -> serde_json::Value {
    json!({
        "z1": root.z_hat[0],
        "z2": root.z_hat[1],
        "total": root.z_hat[0] + root.z_hat[1],
        "iterations": root.iterations,
        "residual": root.residual,
        "direction_ok": root.direction_ok,
        "direction_vector": root.direction_vector,
        "spectral_radius": root.spectral_radius,
    })
}

fn solve(c: &LoadedConfig) -> Result<Report, Failure> {
    let root = least_joint_root(&c.dist, &c.table(), c.params(), &c.solver())?;
    let mut r = Report::new("solve", &c.sha256);
    header(&mut r, c);
    root_fields(&mut r, &root);
    r.json = root_json(&root);
    Ok(r)
}

fn classify(c: &LoadedConfig) -> Result<Report, Failure> {
    let v = classify_resilience(&c.dist, &c.table(), c.params())?;
    let mut r = Report::new("classify", &c.sha256);
    header(&mut r, c);
    r.field("verdict", v.verdict.to_string())
        .field("spectral_radius", num(v.spectral_radius))
        .field(
            "witness",
            v.witness
                .map(|w| format!("{} {}", num(w[0]), num(w[1])))
                .unwrap_or_else(|| "none".into()),
        );
    r.json = json!({
        "verdict": v.verdict.to_string(),
        "spectral_radius": v.spectral_radius,
        "witness": v.witness,
    });
    Ok(r)
}

fn mc_config(c: &LoadedConfig) -> Result<(MonteCarloConfig, config::SimulationConfig), Failure> {
    let sim = c
        .config
        .simulation
        .ok_or_else(|| Failure::Config(format!("this command needs a \"simulation\" block with n, trials and seed (config {})", c.sha256)))?;
    Ok((
        MonteCarloConfig {
            n: sim.n,
            params: c.params(),
            dist: c.dist.clone(),
            table: c.table(),
            solver: c.solver(),
        },
        sim,
    ))
}

fn simulate(c: &LoadedConfig) -> Result<Report, Failure> {
    let (cfg, sim) = mc_config(c)?;
    let rep = monte_carlo_estimate(&cfg, sim.trials, sim.seed)?;
    let mut r = Report::new("simulate", &c.sha256);
    header(&mut r, c);
    r.field("n", rep.n.to_string())
        .field("trials", rep.trials.to_string())
        .field("seed", rep.seed.to_string());
    match &rep.analytic {
        AnalyticComparison::Solved { z_hat, total, direction_ok, .. } => {
            r.field("analytic_z1", num(z_hat[0]))
                .field("analytic_z2", num(z_hat[1]))
                .field("analytic_total", num(*total))
                .field("direction_ok", direction_ok.to_string());
        }
        AnalyticComparison::Failed { error } => {
            r.field("analytic_error", error.clone());
        }
    }
    let mut t = Table::new(&["quantity", "mean", "sd", "ci95_low", "ci95_high"]);
    for (name, s) in [("z1", &rep.layers[0]), ("z2", &rep.layers[1]), ("total", &rep.total)] {
        t.push(vec![name.into(), num(s.mean), num(s.sd), num(s.ci95[0]), num(s.ci95[1])]);
    }
    r.table = Some(t);
    r.json = serde_json::to_value(&rep).expect("report serialises");
    Ok(r)
}

fn compare(c: &LoadedConfig) -> Result<Report, Failure> {
    let (cfg, sim) = mc_config(c)?;
    let root = least_joint_root(&c.dist, &cfg.table, cfg.params, &cfg.solver)?;
    let rep = monte_carlo_estimate(&cfg, sim.trials, sim.seed)?;
    let mut r = Report::new("compare", &c.sha256);
    header(&mut r, c);
    r.field("n", rep.n.to_string())
        .field("trials", rep.trials.to_string())
        .field("seed", rep.seed.to_string())
        .field("direction_ok", root.direction_ok.to_string())
        .field("spectral_radius", num(root.spectral_radius));
    let mut t = Table::new(&["quantity", "analytic", "mc_mean", "mc_ci95_low", "mc_ci95_high", "deviation", "flag"]);
    let mut rows = Vec::new();
    let [z1, z2] = root.z_hat;
    for (name, a, s) in [("z1", z1, &rep.layers[0]), ("z2", z2, &rep.layers[1]), ("total", z1 + z2, &rep.total)] {
        let dev = s.mean - a;
        let inside = s.ci95[0] <= a && a <= s.ci95[1];
        let flag = if inside { "ok" } else { "DEVIATES" };
        t.push(vec![
            name.into(),
            num(a),
            num(s.mean),
            num(s.ci95[0]),
            num(s.ci95[1]),
            num(dev),
            flag.into(),
        ]);
        rows.push(json!({
            "quantity": name,
            "analytic": a,
            "mc_mean": s.mean,
            "mc_sd": s.sd,
            "mc_ci95": s.ci95,
            "deviation": dev,
            "within_ci95": inside,
        }));
    }
    r.table = Some(t);
    r.json = json!({
        "n": rep.n,
        "trials": rep.trials,
        "seed": rep.seed,
        "direction_ok": root.direction_ok,
        "spectral_radius": root.spectral_radius,
        "rows": rows,
    });
    Ok(r)
}

fn sweep(c: &LoadedConfig, xs: Option<Vec<SupportLevel>>) -> Result<Report, Failure> {
    let xs = xs.unwrap_or_else(|| support_range(c.config.r_max));
    let mut cfg = SweepConfig::new(c.config.holding_type, c.params(), c.config.r_max, c.config.source());
    cfg.solver = c.solver();
    let rep = sweep_support(&cfg, &xs);
    let mut r = Report::new("sweep", &c.sha256);
    r.field("holding_type", rep.holding.to_string()).field(
        "argmin_total",
        rep.argmin_total.map(|x| x.to_string()).unwrap_or_else(|| "none".into()),
    );
    let mut t = Table::new(&["x", "z1", "z2", "total", "direction_ok", "spectral_radius", "error"]);
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for row in &rep.rows {
        t.push(vec![
            row.x.to_string(),
            opt(row.z1),
            opt(row.z2),
            opt(row.total),
            row.direction_ok.map(|b| b.to_string()).unwrap_or_default(),
            opt(row.spectral_radius),
            row.error.clone().unwrap_or_default(),
        ]);
    }
    r.table = Some(t);
    r.json = serde_json::to_value(&rep).expect("report serialises");
    r.csv_override = Some(
        emit_figure_data(&rep, FigureFormat::Csv, Precision::Significant(DIGITS))
            .map_err(|e| Failure::Config(e.to_string()))?,
    );
    Ok(r)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let report = match cli.command {
        Command::Solve(a) => solve(&load(&a)?)?,
        Command::Classify(a) => classify(&load(&a)?)?,
        Command::Simulate(a) => simulate(&load(&a)?)?,
        Command::Compare(a) => compare(&load(&a)?)?,
        Command::Sweep { config, xs } => sweep(&load(&config)?, xs)?,
    };
    let text = report.render(cli.format);
    match cli.output {
        Some(path) => std::fs::write(&path, text)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
