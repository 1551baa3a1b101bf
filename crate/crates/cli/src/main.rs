//! `fwlb`: command-line front end to the experiment drivers.
//!
//! Every command writes its tables under `--out`, prints a JSON summary on
//! stdout and exits 0 iff its checks pass (1 on a failed check, 2 on error).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fwlb::experiments::heatmap::{cmd_heatmap, HeatmapConfig};
use fwlb::experiments::phase::{cmd_phase, PhaseConfig, TraceSource, PHASE_TOL};
use fwlb::experiments::rates::{cmd_rates, RatesConfig};
use fwlb::experiments::searches::{cmd_bisect, cmd_gridsearch, BisectConfig, GridConfig};
use fwlb::experiments::verify::{cmd_verify, Suite, VerifyConfig};
use fwlb::experiments::worst::{cmd_worstcase, WorstCaseConfig};
use fwlb::experiments::{Format, Output, Summary};
use fwlb::fwcore::export::RunDescriptor;
use fwlb::numeric::PrecisionConfig;
use fwlb::search::{DEFAULT_CAP, DEFAULT_GRID_N};
use fwlb::worstcase::default_precision;
use fwlb::{make_context, with_backend, Error, Result};

/// Horizon of the desk-scale worst-case run.
const DEFAULT_HORIZON: u64 = 1000;
/// Horizon behind `--slow`.
const SLOW_HORIZON: u64 = 10_000;

#[derive(Parser, Debug)]
#[command(
    name = "fwlb",
    version,
    about = "Worst-case trajectories of line-search Frank-Wolfe on the ball"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Mantissa bits; 53 selects hardware floats, more selects extended precision.
    #[arg(long)]
    precision_bits: Option<u32>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Seed for random initialisations.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SourceArg {
    Worstcase,
    Bisect,
    Stable,
    Empty,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rate sweeps for a boundary, interior and exterior target (or one --instance).
    #[command(alias = "rates")]
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        /// Random starts per regime.
        #[arg(long, default_value_t = 3)]
        starts: usize,
        /// JSON instance descriptor replacing the three regimes.
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Backward construction, replay, certificate and ambient re-run.
    Worstcase {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        wc: WorstCaseArgs,
    },
    /// Iterations to reach the gap target from every grid point of the disk.
    Heatmap {
        #[command(flatten)]
        common: Common,
        /// Points per axis.
        #[arg(long, default_value_t = 201)]
        grid_n: usize,
        /// Gap target.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Stable-phase length over a uniform grid of s0.
    Gridsearch {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        r0: Option<String>,
        #[arg(long, default_value_t = DEFAULT_GRID_N)]
        grid_n: usize,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Parity-guided bisection for a long stable phase.
    Bisect {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bisect: BisectArgs,
    },
    /// Phase-plane trace and overlay curves.
    Phase {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = SourceArg::Worstcase)]
        source: SourceArg,
        /// Read the trace from a `t,r,s` CSV instead of computing it.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        wc: WorstCaseArgs,
        #[command(flatten)]
        bisect: BisectArgs,
        /// Start contraction for `--source stable`.
        #[arg(long)]
        s0: Option<String>,
        /// Band tolerance.
        #[arg(long, default_value_t = PHASE_TOL)]
        tol: f64,
        /// Samples per curve.
        #[arg(long, default_value_t = 200)]
        grid_n: usize,
        /// Curves are sampled on (0, curve-rmax].
        #[arg(long, default_value = "1/10")]
        curve_rmax: String,
    },
    /// Invariant suites with a machine-readable report.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Restrict to these suites (repeatable).
        #[arg(long, value_parser = parse_suite)]
        suite: Vec<Suite>,
        /// Scale worst-case stepsizes by 1 + 1e-6.
        #[arg(long)]
        perturb: bool,
    },
}

#[derive(Args, Debug, Clone)]
struct WorstCaseArgs {
    /// Horizon T (default 1000, or 10000 with --slow).
    #[arg(long)]
    horizon: Option<u64>,
    /// Terminal residual (default 3/(30 + 8T)).
    #[arg(long)]
    epsilon: Option<String>,
    /// Backward pass stops at this residual (at most 1/10).
    #[arg(long)]
    rmax: Option<String>,
    /// Full-scale run: default horizon 10000.
    #[arg(long)]
    slow: bool,
    /// Replay with every stepsize scaled by 1 + 1e-6.
    #[arg(long)]
    perturb: bool,
}

impl WorstCaseArgs {
    fn config(&self) -> WorstCaseConfig {
        let fallback = if self.slow { SLOW_HORIZON } else { DEFAULT_HORIZON };
        WorstCaseConfig {
            horizon: self.horizon.unwrap_or(fallback),
            epsilon: self.epsilon.clone(),
            r_max: self.rmax.clone(),
            perturb: self.perturb,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct BisectArgs {
    #[arg(long)]
    r0: Option<String>,
    #[arg(long, default_value = "0.4")]
    lo: String,
    #[arg(long, default_value = "0.5")]
    hi: String,
    /// Bisection steps.
    #[arg(long, default_value_t = 60)]
    iters: usize,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
}

impl BisectArgs {
    fn config(&self) -> BisectConfig {
        BisectConfig {
            r0: self.r0.clone(),
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            iters: self.iters,
            cap: self.cap,
        }
    }
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    Suite::parse(s).ok_or_else(|| {
        let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
        format!("unknown suite {s:?}; expected one of {}", names.join(", "))
    })
}

fn output(common: &Common) -> Result<Output> {
    let format = match common.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    Output::new(&common.out, format)
}

fn precision(common: &Common, fallback: PrecisionConfig) -> PrecisionConfig {
    common.precision_bits.map_or(fallback, PrecisionConfig::from_bits)
}

fn read_descriptor(path: &PathBuf) -> Result<RunDescriptor> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn dispatch(cmd: Command) -> Result<Summary> {
    match cmd {
        Command::Run {
            common,
            horizon,
            starts,
            instance,
        } => {
            let descriptor = instance.as_ref().map(read_descriptor).transpose()?;
            let fallback = descriptor
                .as_ref()
                .map_or_else(PrecisionConfig::hardware, |d| d.precision);
            let backend = make_context(precision(&common, fallback))?;
            let cfg = RatesConfig {
                horizon,
                starts,
                seed: common.seed,
                descriptor,
            };
            let out = output(&common)?;
            with_backend!(&backend, |ctx| cmd_rates(ctx, &cfg, &out))
        }
        Command::Worstcase { common, wc } => {
            let cfg = wc.config();
            let backend = make_context(precision(&common, default_precision(cfg.horizon)))?;
            let out = output(&common)?;
            with_backend!(&backend, |ctx| cmd_worstcase(ctx, &cfg, &out))
        }
        Command::Heatmap { common, grid_n, tol } => {
            let backend = make_context(precision(&common, PrecisionConfig::hardware()))?;
            let cfg = HeatmapConfig {
                n: grid_n,
                target_gap: tol,
                ..Default::default()
            };
            let out = output(&common)?;
            with_backend!(&backend, |ctx| cmd_heatmap(ctx, &cfg, &out))
        }
        Command::Gridsearch {
            common,
            r0,
            grid_n,
            cap,
        } => {
            let backend = make_context(precision(&common, PrecisionConfig::hardware()))?;
            let cfg = GridConfig { r0, n: grid_n, cap };
            let out = output(&common)?;
            with_backend!(&backend, |ctx| cmd_gridsearch(ctx, &cfg, &out))
        }
        Command::Bisect { common, bisect } => {
            let backend = make_context(precision(&common, PrecisionConfig::extended(256)))?;
            let cfg = bisect.config();
            let out = output(&common)?;
            with_backend!(&backend, |ctx| cmd_bisect(ctx, &cfg, &out))
        }
        Command::Phase {
            common,
            source,
            trace,
            wc,
            bisect,
            s0,
            tol,
            grid_n,
            curve_rmax,
        } => {
            let (source, fallback) = match (trace, source) {
                (Some(path), _) => (TraceSource::File(path), PrecisionConfig::extended(256)),
                (None, SourceArg::Worstcase) => {
                    let cfg = wc.config();
                    let p = default_precision(cfg.horizon);
                    (TraceSource::WorstCase(cfg), p)
                }
                (None, SourceArg::Bisect) => (TraceSource::Bisect(bisect.config()), PrecisionConfig::extended(256)),
                (None, SourceArg::Stable) => {
                    let s0 = s0.ok_or_else(|| Error::Parse("--source stable needs --s0".into()))?;
                    let r0 = bisect.r0.clone().unwrap_or_else(|| "1".into());
                    (
                        TraceSource::Stable {
                            r0,
                            s0,
                            cap: bisect.cap,
                        },
                        PrecisionConfig::hardware(),
                    )
                }
                (None, SourceArg::Empty) => (TraceSource::Empty, PrecisionConfig::hardware()),
            };
            let backend = make_context(precision(&common, fallback))?;
            let cfg = PhaseConfig {
                source,
                curve_n: grid_n,
                r_max: curve_rmax,
                tol,
            };
            let out = output(&common)?;
            with_backend!(&backend, |ctx| cmd_phase(ctx, &cfg, &out))
        }
        Command::Verify { common, suite, perturb } => {
            let backend = make_context(precision(&common, PrecisionConfig::extended(256)))?;
            let cfg = VerifyConfig {
                suites: suite,
                perturb,
                seed: common.seed,
            };
            let out = output(&common)?;
            with_backend!(&backend, |ctx| cmd_verify(ctx, &cfg, &out))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(summary) => {
            let text = serde_json::to_string_pretty(&summary).expect("summary serialises");
            println!("{text}");
            if summary.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("fwlb {}: checks failed", summary.command);
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("fwlb: {e}");
            ExitCode::from(2)
        }
    }
}
