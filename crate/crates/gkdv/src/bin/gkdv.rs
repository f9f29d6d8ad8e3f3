//! `gkdv` command-line front end.
//!
//! Exit codes: 0 success, 1 verification failures, 2 no solitary wave or sonic limit,
//! 3 numerical failure, 64 usage or configuration error, 74 I/O error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use gkdv::commands::{
    cmd_critical, cmd_curve, cmd_evolve, cmd_reduced, cmd_soliton, cmd_spectrum, cmd_verify, CommandOutput, EvolveMode,
    ReducedOptions,
};
use gkdv::io::{GridParams, RunConfig};
use gkdv::linearization::ChainMode;
use gkdv::verify::Suite;
use gkdv::{GkdvError, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "gkdv", version, about = "Solitary waves and critical-speed instability for generalized KdV")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Nonlinearity, e.g. `kdv`, `power:6`, `minus:1,6,1,8`, `plus:a,p,b,q,c,r`.
    #[arg(long = "nl", global = true)]
    nonlinearity: Option<String>,
    /// Wave speed.
    #[arg(long = "c", global = true)]
    speed: Option<f64>,
    /// Grid half-length.
    #[arg(long = "L", global = true)]
    half_length: Option<f64>,
    /// Grid points.
    #[arg(long = "n", global = true)]
    points: Option<usize>,
    /// Exponential weight.
    #[arg(long, global = true)]
    mu: Option<f64>,
    /// Output directory (overrides GKDV_OUT and the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solitary-wave profile and its functionals.
    Soliton,
    /// Momentum curve over a speed range.
    Curve {
        #[arg(long, value_parser = parse_pair)]
        range: Option<(f64, f64)>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Critical speed where dN/dc vanishes.
    Critical {
        #[arg(long, value_parser = parse_pair)]
        bracket: Option<(f64, f64)>,
    },
    /// Linearization frame and essential spectrum at one speed.
    Spectrum {
        #[arg(long, value_enum, default_value_t = Chain::Eigen)]
        chain: Chain,
    },
    /// Reduced modulation system near the critical speed.
    Reduced {
        #[arg(long, value_parser = parse_pair)]
        bracket: Option<(f64, f64)>,
        #[arg(long)]
        eta0: Option<f64>,
        #[arg(long)]
        zeta0: Option<f64>,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long, default_value_t = 17)]
        table_samples: usize,
        #[arg(long)]
        c6: Option<f64>,
    },
    /// Pseudo-spectral evolution.
    Evolve {
        #[arg(long, value_enum, default_value_t = Mode::Soliton)]
        mode: Mode,
        #[arg(long, value_parser = parse_pair)]
        bracket: Option<(f64, f64)>,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        sample_dt: Option<f64>,
        #[arg(long)]
        zeta0: Option<f64>,
        #[arg(long)]
        n_dom: Option<usize>,
        /// Disable the absorbing layer near the domain seams.
        #[arg(long)]
        no_sponge: bool,
        /// Snapshot times for `--mode soliton`, comma separated.
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<f64>,
        /// Stable reference for `--mode critical`, as `NL@SPEED`.
        #[arg(long)]
        reference: Option<String>,
    },
    /// Acceptance suite.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::Fast)]
        suite: SuiteArg,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Chain {
    Eigen,
    Static,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Soliton,
    Critical,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SuiteArg {
    Fast,
    Full,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected LO,HI (got '{s}')"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

fn base_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(nl) = &common.nonlinearity {
        cfg.nonlinearity = nl.clone();
    }
    if common.speed.is_some() {
        cfg.speed = common.speed;
    }
    match (common.half_length, common.points, cfg.grid) {
        (None, None, _) => {}
        (l, n, existing) => {
            let fallback = existing.unwrap_or(GridParams { half_length: 40.0, n: 4001 });
            cfg.grid = Some(GridParams { half_length: l.unwrap_or(fallback.half_length), n: n.unwrap_or(fallback.n) });
        }
    }
    if common.mu.is_some() {
        cfg.mu = common.mu;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<CommandOutput> {
    let mut cfg = base_config(&cli.common)?;
    let out = |cfg: &RunConfig| cfg.resolve_output(cli.common.out.as_deref());
    match cli.command {
        Command::Soliton => cmd_soliton(&cfg, out(&cfg)),
        Command::Curve { range, samples } => {
            cfg.branch = range.or(cfg.branch);
            if let Some(s) = samples {
                cfg.samples = s;
            }
            cmd_curve(&cfg, out(&cfg))
        }
        Command::Critical { bracket } => {
            cfg.branch = bracket.or(cfg.branch);
            cmd_critical(&cfg, out(&cfg))
        }
        Command::Spectrum { chain } => {
            let chain = match chain {
                Chain::Eigen => ChainMode::Eigen,
                Chain::Static => ChainMode::Static,
            };
            cmd_spectrum(&cfg, out(&cfg), chain)
        }
        Command::Reduced { bracket, eta0, zeta0, horizon, table_samples, c6 } => {
            cfg.branch = bracket.or(cfg.branch);
            if let Some(c6) = c6 {
                cfg.thresholds.c6 = c6;
            }
            cmd_reduced(&cfg, out(&cfg), ReducedOptions { eta0, zeta0, horizon, table_samples })
        }
        Command::Evolve { mode, bracket, horizon, dt, sample_dt, zeta0, n_dom, no_sponge, snapshots, reference } => {
            cfg.branch = bracket.or(cfg.branch);
            let e = &mut cfg.evolution;
            if let Some(v) = horizon {
                e.horizon = v;
            }
            if let Some(v) = dt {
                e.dt = v;
            }
            if let Some(v) = sample_dt {
                e.sample_dt = v;
            }
            if let Some(v) = zeta0 {
                e.zeta0 = v;
            }
            if let Some(v) = n_dom {
                e.n_dom = v;
            }
            if no_sponge {
                e.sponge = false;
            }
            let mode = match mode {
                Mode::Soliton => EvolveMode::Soliton { snapshots },
                Mode::Critical => {
                    let stable_reference = match reference {
                        None => None,
                        Some(r) => {
                            let (nl, c) = r
                                .rsplit_once('@')
                                .ok_or_else(|| GkdvError::Config(format!("reference '{r}' is not NL@SPEED")))?;
                            let c: f64 = c.parse().map_err(|_| GkdvError::Config(format!("bad reference speed '{c}'")))?;
                            Some((nl.to_string(), c))
                        }
                    };
                    EvolveMode::Critical { stable_reference }
                }
            };
            cmd_evolve(&cfg, out(&cfg), mode)
        }
        Command::Verify { suite } => {
            let suite = match suite {
                SuiteArg::Fast => Suite::Fast,
                SuiteArg::Full => Suite::Full,
            };
            cmd_verify(&cfg, out(&cfg), suite)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            if let Some(table) = &out.table {
                print!("{table}");
            } else {
                println!("{}", serde_json::to_string_pretty(&out.summary).unwrap_or_default());
            }
            if out.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("gkdv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
