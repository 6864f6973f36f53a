use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitCode};

use clap::{Args, Parser, Subcommand};
use xnet_cli::config::{ExperimentConfig, Kind};
use xnet_cli::run::{execute, gradcheck_config, summary, write_outputs};
use xnet_cli::{CliError, EXIT_MISS, EXIT_OK, EXIT_USAGE};
use xnet_core::fit::{FitConfig, FitModel};
use xnet_core::models::XNetInit;
use xnet_core::optim::{AdamConfig, TrainConfig};
use xnet_core::targets::TargetName;

#[derive(Parser)]
#[command(
    name = "xnet",
    version,
    about = "Cauchy-activation network experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: config `out_dir`, else ./runs].
    #[arg(long, env = "XNET_OUT_DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitFlags {
    /// Target function, used when no --config is given.
    #[arg(long, conflicts_with = "config")]
    target: Option<TargetName>,
    /// xnet, mlp or bspline.
    #[arg(long, default_value = "xnet")]
    model: String,
    /// Number of Cauchy units (XNet).
    #[arg(long, default_value_t = 64)]
    basis: usize,
    /// Hidden widths (MLP), comma separated.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    hidden: Vec<usize>,
    /// Grid intervals (B-spline).
    #[arg(long, default_value_t = 200)]
    grid: usize,
    #[arg(long, default_value_t = 1000)]
    n_train: usize,
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    /// Adam steps; 0 solves the XNet output layer once.
    #[arg(long, default_value_t = 0)]
    iterations: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Relative ridge of the XNet output solve.
    #[arg(long, default_value_t = 1e-12)]
    ridge: f64,
    #[arg(long, default_value_t = 100)]
    refit_every: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a target function.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: FitFlags,
    },
    /// Solve the Poisson problem with a physics-informed loss.
    Pinn {
        #[command(flatten)]
        common: Common,
    },
    /// Compare forecasters on a series.
    Ts {
        #[command(flatten)]
        common: Common,
    },
    /// Finite-difference checks of every differentiable operation.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Random instances per check.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Flip the sign of one op's backward pass (harness self-test).
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
    /// Run several experiment files as parallel processes.
    Sweep {
        /// Maximum concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "XNET_OUT_DIR")]
        out: Option<PathBuf>,
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
}

fn flag_config(f: &FitFlags, target: TargetName) -> Result<ExperimentConfig, CliError> {
    let model = match f.model.as_str() {
        "xnet" => FitModel::Xnet {
            units: f.basis,
            init: XNetInit::default(),
        },
        "mlp" => FitModel::Mlp {
            hidden: f.hidden.clone(),
        },
        "bspline" => FitModel::Bspline {
            grid: f.grid,
            degree: 3,
        },
        m => {
            return Err(CliError::Usage(format!(
                "--model must be xnet, mlp or bspline, got {m}"
            )))
        }
    };
    let train = (f.iterations > 0).then(|| TrainConfig {
        iterations: f.iterations,
        adam: AdamConfig {
            lr: f.lr,
            ..Default::default()
        },
        refit_every: if f.model == "xnet" { f.refit_every } else { 0 },
        ..Default::default()
    });
    let ridge = (f.model == "xnet").then_some(f.ridge);
    let fit = FitConfig {
        target,
        n_train: f.n_train,
        n_test: f.n_test,
        model,
        ridge,
        train,
        eval_grid: None,
    };
    let cfg = ExperimentConfig {
        name: format!("{}_{}", target.as_str(), f.model),
        kind: Kind::Fit,
        description: None,
        seed: Some(0),
        out_dir: None,
        fit: Some(fit),
        pinn: None,
        ts: None,
        gradcheck: None,
        checks: Vec::new(),
        base_dir: PathBuf::new(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load(common: &Common, kind: Kind) -> Result<ExperimentConfig, CliError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let cfg = ExperimentConfig::load(path)?;
    if cfg.kind != kind {
        return Err(CliError::Usage(format!(
            "{} is a `{}` experiment, not `{}`",
            path.display(),
            cfg.kind.as_str(),
            kind.as_str()
        )));
    }
    Ok(cfg)
}

fn run_one(
    cfg: &ExperimentConfig,
    common: &Common,
    fault: Option<&'static str>,
) -> Result<i32, CliError> {
    let seed = cfg.resolve_seed(common.seed)?;
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(|d| cfg.resolve_path(d)))
        .unwrap_or_else(|| PathBuf::from("runs"));
    let mut out = execute(cfg, seed, fault)?;
    let path = write_outputs(&mut out, &dir)?;
    for line in summary(&out.report) {
        println!("{line}");
    }
    println!("report: {}", path.display());
    Ok(if out.report.passed() {
        EXIT_OK
    } else {
        EXIT_MISS
    })
}

fn spawn(
    exe: &Path,
    cfg_path: &Path,
    seed: Option<u64>,
    out: &Option<PathBuf>,
) -> Result<Child, CliError> {
    let cfg = ExperimentConfig::load(cfg_path)?;
    let mut cmd = Command::new(exe);
    cmd.arg(cfg.kind.as_str()).arg("--config").arg(cfg_path);
    if let Some(s) = seed {
        cmd.arg("--seed").arg(s.to_string());
    }
    if let Some(o) = out {
        cmd.arg("--out").arg(o);
    }
    cmd.spawn()
        .map_err(|e| CliError::Usage(format!("cannot start run for {}: {e}", cfg_path.display())))
}

fn sweep(
    jobs: usize,
    seed: Option<u64>,
    out: Option<PathBuf>,
    configs: &[PathBuf],
) -> Result<i32, CliError> {
    let exe = std::env::current_exe().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut pending: Vec<&PathBuf> = configs.iter().rev().collect();
    let mut running: Vec<(&PathBuf, Child)> = Vec::new();
    let mut worst = EXIT_OK;
    while !pending.is_empty() || !running.is_empty() {
        while running.len() < jobs.max(1) {
            let Some(p) = pending.pop() else { break };
            match spawn(&exe, p, seed, &out) {
                Ok(child) => running.push((p, child)),
                Err(e) => {
                    eprintln!("{}: {e}", p.display());
                    worst = EXIT_USAGE;
                }
            }
        }
        if let Some((p, mut child)) = (!running.is_empty()).then(|| running.remove(0)) {
            let code = child
                .wait()
                .map(|s| s.code().unwrap_or(EXIT_MISS))
                .unwrap_or(EXIT_MISS);
            println!("sweep: {} exited with {code}", p.display());
            worst = worst.max(code);
        }
    }
    Ok(worst)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = match cli.command {
        Cmd::Fit { common, flags } => {
            let cfg = match flags.target {
                Some(t) if common.config.is_none() => flag_config(&flags, t),
                _ => load(&common, Kind::Fit),
            };
            cfg.and_then(|c| run_one(&c, &common, None))
        }
        Cmd::Pinn { common } => load(&common, Kind::Pinn).and_then(|c| run_one(&c, &common, None)),
        Cmd::Ts { common } => load(&common, Kind::Ts).and_then(|c| run_one(&c, &common, None)),
        Cmd::Gradcheck {
            common,
            seeds,
            inject_fault,
        } => {
            let cfg = match &common.config {
                Some(_) => load(&common, Kind::Gradcheck),
                None => Ok(gradcheck_config(seeds)),
            };
            let fault: Option<&'static str> = inject_fault.map(|s| &*Box::leak(s.into_boxed_str()));
            cfg.and_then(|c| run_one(&c, &common, fault))
        }
        Cmd::Sweep {
            jobs,
            seed,
            out,
            configs,
        } => sweep(jobs, seed, out, &configs),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
