mod config;
mod report;

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use penmin::collection::Collection;
use penmin::path::compute_path;
use penmin::regress::Family;
use penmin::select::{minimal_penalty_select, FiveParams, Method};
use penmin::sim::{run_monte_carlo, SimConfig, SweepGrid};

use config::FlatConfig;

#[derive(Parser)]
#[command(name = "penmin", version, about = "Minimal-penalty calibration of model selection penalties")]
struct Cli {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the penalized-argmin path of a collection as JSON.
    Path { input: PathBuf },
    /// Calibrate the penalty and select a model from a collection CSV.
    Select {
        input: PathBuf,
        #[command(flatten)]
        params: Params,
    },
    /// Run the Monte-Carlo study for one setting.
    Simulate {
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Also run the over-penalisation sweep over [0, 4] in steps of 0.01.
        #[arg(long)]
        sweep: bool,
    },
    /// Regenerate a published table or figure and compare with it.
    Reproduce {
        #[arg(value_enum)]
        target: Target,
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        run: RunArgs,
        /// Directory receiving the output file.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args, Default)]
struct Params {
    #[arg(long, value_enum)]
    method: Option<MethodName>,
    #[arg(long = "Tn")]
    t_n: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long = "D0")]
    d0: Option<f64>,
    #[arg(long)]
    pct: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    overpen: Option<f64>,
    /// Sample size n.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    setting: Option<SettingName>,
    /// Number of replicates.
    #[arg(long = "N")]
    replicates: Option<usize>,
    #[arg(long, env = "PENMIN_SEED")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodName {
    Maxjump,
    Threshold,
    Window,
    Slope,
    Capushe,
    Median,
    Consensus,
    Mallows,
    Fpe,
    Gcv,
}

#[derive(Clone, Copy, ValueEnum)]
enum SettingName {
    Easy,
    Hard,
    Kernel,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Table1,
    Table3,
    Table4,
    Fig8,
}

enum CliError {
    Invalid(String),
    Io(String),
}

impl CliError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn invalid(e: impl ToString) -> CliError {
    CliError::Invalid(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => FlatConfig::parse(&fs::read_to_string(p).map_err(|e| CliError::io(p, e))?).map_err(invalid)?,
        None => FlatConfig::default(),
    };
    match cli.command {
        Command::Path { input } => {
            let c = read_collection(&input)?;
            print_json(&compute_path(&c))
        }
        Command::Select { input, params } => {
            let c = read_collection(&input)?;
            let method = build_method(&params, &cfg)?;
            let out = minimal_penalty_select(&c, &method).map_err(invalid)?;
            print_json(&out)
        }
        Command::Simulate { params, run, format, sweep } => {
            let mut config = sim_config(&params, &run, &cfg, None)?;
            if sweep {
                config.sweep = Some(fig8_grid());
            }
            let rep = run_monte_carlo(&config).map_err(invalid)?;
            match format {
                Format::Json => print_json(&rep),
                Format::Text => {
                    print!("{}", report::method_table(&rep));
                    Ok(())
                }
            }
        }
        Command::Reproduce { target, params, run, out_dir } => reproduce(target, &params, &run, &cfg, &out_dir),
    }
}

fn read_collection(path: &Path) -> Result<Collection> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    Collection::from_csv(BufReader::new(f)).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?);
    Ok(())
}

fn require<T>(v: Option<T>, flag: &str, method: &str) -> Result<T> {
    v.ok_or_else(|| invalid(format!("--method {method} requires --{flag}")))
}

fn build_method(p: &Params, cfg: &FlatConfig) -> Result<Method> {
    let name = match p.method {
        Some(m) => m,
        None => {
            let s: Option<String> = cfg.pick(None, "method").map_err(invalid)?;
            let s = s.ok_or_else(|| invalid("--method is required"))?;
            MethodName::from_str(&s, true).map_err(|_| invalid(format!("unknown method {s:?}")))?
        }
    };
    let t = cfg.pick(p.t_n, "Tn").map_err(invalid)?;
    let eta = cfg.pick(p.eta, "eta").map_err(invalid)?;
    let d0 = cfg.pick(p.d0, "D0").map_err(invalid)?;
    let pct = cfg.pick(p.pct, "pct").map_err(invalid)?;
    let sigma2 = cfg.pick(p.sigma2, "sigma2").map_err(invalid)?;
    let overpen = cfg.pick(p.overpen, "overpen").map_err(invalid)?;
    let n = cfg.pick(p.n, "n").map_err(invalid)?;
    let five = |label: &str| -> Result<FiveParams> {
        Ok(FiveParams {
            t: require(t, "Tn", label)?,
            eta: require(eta, "eta", label)?,
            d0: require(d0, "D0", label)?,
            n: require(n, "n", label)?,
            pct: require(pct, "pct", label)?,
        })
    };
    Ok(match name {
        MethodName::Maxjump => Method::MaxJump,
        MethodName::Threshold => Method::Threshold { t: require(t, "Tn", "threshold")? },
        MethodName::Window => Method::Window { eta: require(eta, "eta", "window")? },
        MethodName::Slope => Method::Slope { d0: require(d0, "D0", "slope")?, n: require(n, "n", "slope")? },
        MethodName::Capushe => Method::Capushe { n: require(n, "n", "capushe")?, pct: pct.unwrap_or(0.15) },
        MethodName::Median => Method::Median(five("median")?),
        MethodName::Consensus => Method::Consensus(five("consensus")?),
        MethodName::Mallows => Method::Mallows { sigma2: require(sigma2, "sigma2", "mallows")?, overpen: overpen.unwrap_or(1.0) },
        MethodName::Fpe => Method::Fpe { n: require(n, "n", "fpe")? },
        MethodName::Gcv => Method::Gcv { n: require(n, "n", "gcv")? },
    })
}

fn sim_config(p: &Params, r: &RunArgs, cfg: &FlatConfig, forced: Option<Family>) -> Result<SimConfig> {
    let setting = match forced {
        Some(f) => f,
        None => {
            let name = match r.setting {
                Some(s) => s,
                None => match cfg.pick::<String>(None, "setting").map_err(invalid)? {
                    Some(s) => SettingName::from_str(&s, true).map_err(|_| invalid(format!("unknown setting {s:?}")))?,
                    None => SettingName::Easy,
                },
            };
            match name {
                SettingName::Easy => Family::Easy,
                SettingName::Hard => Family::Hard,
                SettingName::Kernel => Family::Kernel,
            }
        }
    };
    let mut c = SimConfig::for_setting(setting);
    if let Some(n) = cfg.pick(p.n, "n").map_err(invalid)? {
        c.set_n(n);
    }
    let set = |slot: &mut f64, flag: Option<f64>, key: &str| -> Result<()> {
        if let Some(v) = cfg.pick(flag, key).map_err(invalid)? {
            *slot = v;
        }
        Ok(())
    };
    set(&mut c.sigma2, p.sigma2, "sigma2")?;
    set(&mut c.t_n, p.t_n, "Tn")?;
    set(&mut c.eta, p.eta, "eta")?;
    set(&mut c.d0, p.d0, "D0")?;
    set(&mut c.pct, p.pct, "pct")?;
    set(&mut c.overpen, p.overpen, "overpen")?;
    if let Some(d) = cfg.pick(None, "D_m0").map_err(invalid)? {
        c.d_m0 = d;
    }
    c.replicates = cfg.pick(r.replicates, "N").map_err(invalid)?.unwrap_or(2000);
    c.seed = cfg.pick(r.seed, "seed").map_err(invalid)?.unwrap_or(0);
    c.jobs = cfg.pick(r.jobs, "jobs").map_err(invalid)?.unwrap_or(0);
    c.validate().map_err(invalid)?;
    Ok(c)
}

fn fig8_grid() -> SweepGrid {
    SweepGrid { start: 0.0, stop: 4.0, step: 0.01 }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))
}

fn reproduce(target: Target, p: &Params, r: &RunArgs, cfg: &FlatConfig, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let reference = penmin::reference::Reference::load();
    let checks = match target {
        Target::Table1 => {
            let easy = run_monte_carlo(&sim_config(p, r, cfg, Some(Family::Easy))?).map_err(invalid)?;
            let hard = run_monte_carlo(&sim_config(p, r, cfg, Some(Family::Hard))?).map_err(invalid)?;
            let json = serde_json::json!({ "easy": easy.agreement, "hard": hard.agreement });
            write(&out_dir.join("table1.json"), &to_json(&json)?)?;
            let mut checks = report::agreement_checks("easy", &easy, &reference);
            checks.extend(report::agreement_checks("hard", &hard, &reference));
            checks
        }
        Target::Table3 | Target::Table4 => {
            let (family, file) = match target {
                Target::Table3 => (Family::Easy, "table3.json"),
                _ => (Family::Hard, "table4.json"),
            };
            let rep = run_monte_carlo(&sim_config(p, r, cfg, Some(family))?).map_err(invalid)?;
            write(&out_dir.join(file), &to_json(&rep)?)?;
            print!("{}", report::method_table(&rep));
            report::method_checks(&rep, &reference)
        }
        Target::Fig8 => {
            let mut c = sim_config(p, r, cfg, Some(Family::Easy))?;
            c.sweep = Some(fig8_grid());
            let rep = run_monte_carlo(&c).map_err(invalid)?;
            write(&out_dir.join("fig8.csv"), &report::sweep_csv(&rep.sweep))?;
            report::sweep_checks(&rep, &reference)
        }
    };
    let failed = checks.iter().filter(|c| c.pass == Some(false)).count();
    for c in &checks {
        println!("{c}");
    }
    println!("{} of {} comparisons outside tolerance", failed, checks.iter().filter(|c| c.pass.is_some()).count());
    Ok(())
}
