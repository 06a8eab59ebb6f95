use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grmsel_core::commands::{
    self, CalibrateOptions, CurvesOptions, DistOptions, EstimateOptions, ExampleOptions, InfoOptions, Output,
    ScoringChoice, SelectOptions, SimulateOptions, Stage,
};
use grmsel_core::estimation::TrajectoryPrior;
use grmsel_core::{par, Error, SelectionMethod};

#[derive(Parser)]
#[command(
    name = "grmsel",
    version,
    about = "Graded-response-model item banks: information, expected precision, and item-subset selection"
)]
struct Cli {
    /// Worker threads for data-parallel evaluation (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DistArgs {
    /// Latent distribution: normal:MEAN,SD | sample:PATH | grid:PATH.
    #[arg(long, default_value = "normal:0,1")]
    dist: String,
    /// Gauss-Hermite nodes for normal distributions.
    #[arg(long, default_value_t = grmsel_core::population::DEFAULT_NODES)]
    nodes: usize,
}

impl From<DistArgs> for DistOptions {
    fn from(d: DistArgs) -> Self {
        DistOptions {
            dist: d.dist,
            nodes: d.nodes,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a bank and list each item's expected information.
    BankValidate {
        /// Bank CSV path or fixture:NAME.
        bank: String,
        #[command(flatten)]
        dist: DistArgs,
    },
    /// Item information over a trait grid.
    Info {
        #[arg(long)]
        bank: String,
        #[command(flatten)]
        dist: DistArgs,
        #[arg(long, default_value_t = -6.0, allow_negative_numbers = true)]
        min: f64,
        #[arg(long, default_value_t = 6.0, allow_negative_numbers = true)]
        max: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Select item subsets with one method.
    Select {
        #[arg(long)]
        bank: String,
        #[command(flatten)]
        dist: DistArgs,
        /// rank | cd | adaptive | random
        #[arg(long)]
        method: String,
        /// Subset sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Coordinate-descent start: rank | random | comma-separated item ids.
        #[arg(long, default_value = "rank")]
        init: String,
        /// Extra random-start coordinate-descent runs.
        #[arg(long, default_value_t = 0)]
        restarts: usize,
        /// Repetitions of the random baseline.
        #[arg(long, default_value_t = grmsel_core::selection::DEFAULT_RANDOM_REPS)]
        reps: usize,
        /// Include wall-clock timing in the report.
        #[arg(long)]
        timing: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Expected SD against subset size for several methods.
    Curves {
        #[arg(long)]
        bank: String,
        #[command(flatten)]
        dist: DistArgs,
        #[arg(long, value_delimiter = ',', default_value = "rank,cd,adaptive,random")]
        methods: Vec<String>,
        #[arg(long, default_value_t = grmsel_core::selection::DEFAULT_RANDOM_REPS)]
        reps: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Simulate a longitudinal response panel from a scenario file.
    Simulate {
        /// Scenario JSON.
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Also write the true random effects as CSV.
        #[arg(long)]
        effects: Option<PathBuf>,
    },
    /// Score responses, panel visits, or trajectories.
    Estimate {
        #[arg(long)]
        bank: String,
        /// Single response set CSV (item_id,level).
        #[arg(long, conflicts_with = "panel")]
        responses: Option<PathBuf>,
        /// Panel CSV (subject_id,time_years,item_id,level).
        #[arg(long)]
        panel: Option<PathBuf>,
        /// map | mle
        #[arg(long, default_value = "map")]
        method: String,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        prior_mean: f64,
        #[arg(long, default_value_t = 1.0)]
        prior_sd: f64,
        /// Fit each subject's intercept and slope under the population model.
        #[arg(long, requires = "panel")]
        trajectory: bool,
        #[arg(long, allow_negative_numbers = true)]
        beta0: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        beta1: Option<f64>,
        #[arg(long)]
        var_u0: Option<f64>,
        #[arg(long)]
        var_u1: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        rho: Option<f64>,
        #[arg(long, value_parser = ["worst-day"])]
        dedupe: Option<String>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Two-stage calibration from a response panel.
    Calibrate {
        #[arg(long)]
        panel: PathBuf,
        /// 1 | 2 | both
        #[arg(long, default_value = "both")]
        stage: String,
        /// First-stage bank (needed for --stage 2).
        #[arg(long)]
        bank: Option<String>,
        /// Bank whose item ids and level counts fix the stage-1 layout.
        #[arg(long)]
        template: Option<String>,
        /// Prior specification JSON.
        #[arg(long)]
        priors: Option<PathBuf>,
        #[arg(long, value_parser = ["worst-day"])]
        dedupe: Option<String>,
        /// Write the fitted bank as CSV.
        #[arg(long)]
        bank_out: Option<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check the figure2 fixture against its reference values.
    ExampleFig2 {
        #[arg(long, default_value_t = grmsel_core::population::DEFAULT_NODES)]
        nodes: usize,
        #[arg(long)]
        json: bool,
        /// Write plot data (item, set information and set SD curves) as CSV.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
}

fn run(command: Command) -> grmsel_core::Result<Output> {
    match command {
        Command::BankValidate { bank, dist } => commands::bank_validate(&bank, &dist.into()),
        Command::Info {
            bank,
            dist,
            min,
            max,
            step,
            output,
        } => commands::info(&InfoOptions {
            bank,
            dist: dist.into(),
            min,
            max,
            step,
            output,
        }),
        Command::Select {
            bank,
            dist,
            method,
            k,
            seed,
            init,
            restarts,
            reps,
            timing,
            output,
        } => commands::select(&SelectOptions {
            bank,
            dist: dist.into(),
            method: method.parse()?,
            k,
            seed,
            init,
            restarts,
            reps,
            timing,
            output,
        }),
        Command::Curves {
            bank,
            dist,
            methods,
            reps,
            seed,
            output,
        } => commands::curves(&CurvesOptions {
            bank,
            dist: dist.into(),
            methods: methods
                .iter()
                .map(|m| m.parse::<SelectionMethod>())
                .collect::<grmsel_core::Result<_>>()?,
            reps,
            seed,
            output,
        }),
        Command::Simulate {
            config,
            seed,
            output,
            effects,
        } => commands::simulate(&SimulateOptions {
            config,
            seed,
            output,
            effects,
        }),
        Command::Estimate {
            bank,
            responses,
            panel,
            method,
            prior_mean,
            prior_sd,
            trajectory,
            beta0,
            beta1,
            var_u0,
            var_u1,
            rho,
            dedupe,
            output,
        } => {
            let d = TrajectoryPrior::default();
            commands::estimate(&EstimateOptions {
                bank,
                responses,
                panel,
                method: match method.as_str() {
                    "map" => ScoringChoice::Map,
                    "mle" => ScoringChoice::Mle,
                    other => return Err(Error::Usage(format!("unknown scoring method `{other}` (map|mle)"))),
                },
                prior_mean,
                prior_sd,
                trajectory,
                population: TrajectoryPrior {
                    beta0: beta0.unwrap_or(d.beta0),
                    beta1: beta1.unwrap_or(d.beta1),
                    var_u0: var_u0.unwrap_or(d.var_u0),
                    var_u1: var_u1.unwrap_or(d.var_u1),
                    rho: rho.unwrap_or(d.rho),
                },
                dedupe: dedupe.is_some(),
                output,
            })
        }
        Command::Calibrate {
            panel,
            stage,
            bank,
            template,
            priors,
            dedupe,
            bank_out,
            output,
        } => commands::calibrate(&CalibrateOptions {
            panel,
            stage: stage.parse::<Stage>()?,
            stage1_bank: bank,
            template,
            priors,
            dedupe: dedupe.is_some(),
            output,
            bank_output: bank_out,
        }),
        Command::ExampleFig2 { nodes, json, plot_data } => {
            commands::example_fig2(&ExampleOptions { nodes, json, plot_data })
        }
    }
}

fn report(err: &Error) -> ExitCode {
    let class = err.class();
    let msg = err.to_string().replace('\n', " ");
    eprintln!("error[{}]: {msg}", class.tag());
    ExitCode::from(class.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments");
            let msg = first.strip_prefix("error: ").unwrap_or(first);
            return report(&Error::Usage(msg.to_string()));
        }
    };
    let Cli { threads, command } = cli;
    match par::with_threads(threads, || run(command)) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout
                .write_all(out.stdout.as_bytes())
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return ExitCode::from(1);
            }
            match out.failure {
                Some(err) => report(&err),
                None => ExitCode::SUCCESS,
            }
        }
        Err(err) => report(&err),
    }
}
