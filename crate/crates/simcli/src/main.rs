use clap::{Args, Parser, Subcommand, ValueEnum};
use splitlrt::ratio::{SplitMethod, SplitSearchConfig};
use splitlrt::splitchisq::{LimitVariant, SplitChiSqParams};
use splitlrt_sim::output::emit;
use splitlrt_sim::studies::{
    linear_grid, moment_rows, optimal_split_rows, power_rows, run_factor_study, run_power_vs_n,
    run_power_vs_split, run_quantile_study, run_split_comparison, sample_rows, DeltaRule,
    FactorMethod, FactorScenario, FactorStudy, KRule, PowerVsN, PowerVsSplit, QuantileStudy,
    SplitComparison, DATA_REPS, LIMIT_REPS,
};
use splitlrt_sim::{SimError, SimResult};
use std::path::PathBuf;
use std::process::ExitCode;

/// Split likelihood ratio test simulations.
#[derive(Debug, Parser)]
#[command(name = "splitlrt-sim", version)]
struct Cli {
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Replication count; each study has its own default.
    #[arg(long, global = true)]
    reps: Option<usize>,
    #[arg(long, global = true, default_value_t = 0.05)]
    alpha: f64,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file, written atomically. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Split,
    Crossfit,
}

#[derive(Debug, Args)]
struct LawArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 0.5)]
    m0: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Split)]
    variant: VariantArg,
    /// Weight of the forward statistic in the cross-fit law.
    #[arg(long, default_value_t = 0.5)]
    w0: f64,
}

impl LawArgs {
    fn resolve(&self) -> SimResult<(SplitChiSqParams, LimitVariant)> {
        let params = SplitChiSqParams::new(self.d, self.p, self.m0, self.delta)?;
        let variant = match self.variant {
            VariantArg::Split => LimitVariant::Split,
            VariantArg::Crossfit => LimitVariant::crossfit(self.w0)?,
        };
        Ok((params, variant))
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw from a split chi-square or cross-fit limit law.
    Sample(LawArgs),
    /// Closed-form and quadratic-form moments of a limit law.
    Moments(LawArgs),
    /// Null quantiles against the universal threshold.
    Quantile {
        #[arg(long, default_value_t = 6)]
        d: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 3, 6])]
        p: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        m0: Option<Vec<f64>>,
        #[arg(long = "alphas", value_delimiter = ',', default_values_t = [0.01, 0.05, 0.1])]
        alphas: Vec<f64>,
    },
    /// Optimal splitting ratio by one or more rules.
    OptimalSplit {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        /// normal, mc, radius, thumb or crossfit.
        #[arg(long, value_delimiter = ',', default_values_t = ["normal".to_string(), "radius".to_string(), "thumb".to_string()])]
        method: Vec<String>,
        #[arg(long, default_value_t = 0.8)]
        target_power: f64,
        #[arg(long, default_value_t = 0.01)]
        grid_step: f64,
    },
    /// Gaussian power of LRT and SLRT against sample size.
    PowerVsN {
        #[arg(long, default_value_t = 6)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 0.1)]
        theta: f64,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5])]
        m0: Vec<f64>,
        #[arg(long, default_value_t = LIMIT_REPS)]
        limit_reps: usize,
    },
    /// Limit power against the splitting ratio.
    PowerVsSplit {
        #[arg(long, default_value_t = 6)]
        d: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 3, 6])]
        p: Vec<usize>,
        #[arg(long, default_value_t = 40.0)]
        delta: f64,
        #[arg(long, value_delimiter = ',')]
        m0: Option<Vec<f64>>,
    },
    /// Limit power of the splitting rules across dimensions.
    SplitComparison {
        #[arg(long, value_delimiter = ',', default_values_t = [6, 12, 24, 48, 96])]
        d: Vec<usize>,
        /// An integer or `d/<c>`.
        #[arg(long, default_value = "5")]
        k_rule: String,
        /// `fixed:<delta>` or `target:<power>`.
        #[arg(long, default_value = "fixed:100")]
        delta_rule: String,
    },
    /// One-factor analysis power study.
    FactorStudy {
        /// factor-regular, factor-irregular or both.
        #[arg(long, default_value = "both")]
        scenario: String,
        #[arg(long, value_delimiter = ',')]
        h: Option<Vec<f64>>,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// split:<m0>, crossfit:<m0>:<w0> or subsample:<m0>:<splits>.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
}

fn run(cli: Cli) -> SimResult<()> {
    let out = cli.out.as_deref();
    let reps = |default: usize| cli.reps.unwrap_or(default);
    match cli.command {
        Command::Sample(law) => {
            let (params, variant) = law.resolve()?;
            emit(
                &sample_rows(&params, variant, reps(DATA_REPS), cli.seed)?,
                out,
            )
        }
        Command::Moments(law) => {
            let (params, variant) = law.resolve()?;
            emit(&moment_rows(&params, variant)?, out)
        }
        Command::Quantile { d, p, m0, alphas } => {
            let cfg = QuantileStudy {
                d,
                p_list: p,
                m0_grid: m0.unwrap_or_else(|| linear_grid(0.1, 0.9, 0.1)),
                alpha_list: alphas,
                n_reps: reps(LIMIT_REPS),
                seed: cli.seed,
            };
            emit(&run_quantile_study(&cfg)?, out)
        }
        Command::OptimalSplit {
            d,
            k,
            method,
            target_power,
            grid_step,
        } => {
            let methods = method
                .iter()
                .map(|m| m.parse::<SplitMethod>())
                .collect::<splitlrt::Result<Vec<_>>>()?;
            let search = SplitSearchConfig {
                alpha: cli.alpha,
                target_power,
                grid_step,
                n_reps: reps(LIMIT_REPS),
                seed: cli.seed,
                ..SplitSearchConfig::default()
            };
            emit(&optimal_split_rows(d, k, &methods, &search)?, out)
        }
        Command::PowerVsN {
            d,
            k,
            theta,
            n,
            m0,
            limit_reps,
        } => {
            let cfg = PowerVsN {
                d,
                k,
                theta,
                n_grid: n.unwrap_or_else(|| PowerVsN::default().n_grid),
                m0_list: m0,
                alpha: cli.alpha,
                n_reps: reps(DATA_REPS),
                limit_reps,
                seed: cli.seed,
            };
            emit(&power_rows(&run_power_vs_n(&cfg)?), out)
        }
        Command::PowerVsSplit { d, p, delta, m0 } => {
            let cfg = PowerVsSplit {
                d,
                p_list: p,
                delta,
                alpha: cli.alpha,
                m0_grid: m0.unwrap_or_else(|| PowerVsSplit::default().m0_grid),
                n_reps: reps(LIMIT_REPS),
                seed: cli.seed,
            };
            emit(&power_rows(&run_power_vs_split(&cfg)?), out)
        }
        Command::SplitComparison {
            d,
            k_rule,
            delta_rule,
        } => {
            let cfg = SplitComparison {
                d_grid: d,
                k_rule: k_rule.parse::<KRule>()?,
                delta_rule: delta_rule.parse::<DeltaRule>()?,
                alpha: cli.alpha,
                n_reps: reps(LIMIT_REPS),
                seed: cli.seed,
            };
            emit(&power_rows(&run_split_comparison(&cfg)?), out)
        }
        Command::FactorStudy {
            scenario,
            h,
            n,
            methods,
        } => {
            let scenarios = match scenario.as_str() {
                "both" => FactorScenario::ALL.to_vec(),
                s => vec![s.parse()?],
            };
            let methods = match methods {
                Some(list) => list
                    .iter()
                    .map(|m| m.parse())
                    .collect::<SimResult<Vec<FactorMethod>>>()?,
                None => FactorMethod::defaults(),
            };
            let defaults = FactorStudy::default();
            let cfg = FactorStudy {
                scenarios,
                h_grid: h.unwrap_or(defaults.h_grid),
                methods,
                n,
                alpha: cli.alpha,
                n_reps: reps(defaults.n_reps),
                seed: cli.seed,
                fit: defaults.fit,
            };
            emit(&power_rows(&run_factor_study(&cfg)?), out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    if !(cli.alpha > 0.0 && cli.alpha < 1.0) {
        eprintln!(
            "error: {}",
            SimError::Config(format!("alpha = {} is outside (0, 1)", cli.alpha))
        );
        return ExitCode::from(2);
    }
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
