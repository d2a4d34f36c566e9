use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crossloss_cli::io::{
    read_controls, read_elicitation, read_predictions, write_predictions, CliError, CliResult,
};
use crossloss_cli::report;
use crossloss_core::blend::{grid_search_weights, GridSearchConfig};
use crossloss_core::elicitation::{
    clean_samples, fit_loss_params, specification_test, SaturatedPolicy, DEFAULT_FLOOR_DELTA,
};
use crossloss_core::loss::bias_ranking;
use crossloss_core::metrics::{metric_report, table1_demo};
use crossloss_core::LossParams;

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Aligned text, rounded to two decimals.
    Table,
    /// JSON with full-precision numbers.
    Json,
}

#[derive(Parser)]
#[command(
    name = "crossloss",
    version,
    about = "Accuracy evaluation, exponent fitting, blending, and bias ranking \
             for nonnegative cross-sectional predictions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Loss exponent on the absolute error
    #[arg(long, global = true, default_value_t = 2.0)]
    loss_p: f64,

    /// Loss exponent on the actual value
    #[arg(long, global = true, default_value_t = -1.0, allow_negative_numbers = true)]
    loss_q: f64,

    /// Use the Webster-Sainte-Lague exponents p=2, q=-1 (overrides --loss-p/--loss-q)
    #[arg(long, global = true)]
    webster: bool,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,

    /// Seed for stochastic operations; the built-in subcommands are all
    /// deterministic, so this is accepted and currently unused
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every prediction column of a file against the metric suite
    Evaluate { file: PathBuf },

    /// Fit loss exponents to elicited satisfaction scores
    Fit {
        file: PathBuf,

        /// Loss assigned to fully satisfied samples when flooring
        #[arg(long, default_value_t = DEFAULT_FLOOR_DELTA)]
        floor_delta: f64,

        /// Drop fully satisfied samples instead of flooring their loss
        #[arg(long)]
        drop_saturated: bool,
    },

    /// Search the weight simplex for the total-loss-minimizing blend
    Blend {
        file: PathBuf,

        /// Lattice spacing of the weight grid, in (0, 1]
        #[arg(long, default_value_t = 0.01)]
        resolution: f64,

        /// Re-grid the neighborhood of the best point down to spacing 1e-4
        #[arg(long)]
        refine: bool,

        /// Control totals file (id,group,total) the blend must match
        #[arg(long)]
        controls: Option<PathBuf>,

        /// Let weights range over [-1, 2]; blends that turn any prediction
        /// negative are discarded
        #[arg(long)]
        allow_negative_weights: bool,

        /// Write the blended predictions to this file
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Rank observations by signed loss, overprediction first
    Bias {
        file: PathBuf,

        /// Restrict to one prediction column (default: all)
        #[arg(long)]
        set: Option<String>,
    },

    /// Print the built-in six-area, three-scenario comparison table
    DemoTable1,
}

fn loss_params(cli: &Cli) -> CliResult<LossParams> {
    if cli.webster {
        Ok(LossParams::webster())
    } else {
        LossParams::new(cli.loss_p, cli.loss_q).map_err(CliError::from)
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Evaluate { file } => {
            let params = loss_params(cli)?;
            let parsed = read_predictions(file)?;
            let reports: Vec<_> = parsed
                .prediction_sets()?
                .iter()
                .map(|set| metric_report(set, params))
                .collect();
            match cli.format {
                Format::Table => print!("{}", report::render_metric_reports(&reports, params)),
                Format::Json => println!("{}", report::to_json(&reports)),
            }
        }
        Command::Fit {
            file,
            floor_delta,
            drop_saturated,
        } => {
            let samples = read_elicitation(file)?;
            let policy = if *drop_saturated {
                SaturatedPolicy::Drop
            } else {
                SaturatedPolicy::Floor
            };
            let cleaned = clean_samples(&samples, *floor_delta, policy)?;
            let fit = fit_loss_params(&cleaned)?;
            let specification = specification_test(&fit);
            match cli.format {
                Format::Table => print!("{}", report::render_fit(&fit, &specification)),
                Format::Json => println!(
                    "{}",
                    report::to_json(&report::FitOutput {
                        fit: &fit,
                        specification: &specification,
                    })
                ),
            }
        }
        Command::Blend {
            file,
            resolution,
            refine,
            controls,
            allow_negative_weights,
            out,
        } => {
            let params = loss_params(cli)?;
            let parsed = read_predictions(file)?;
            let sets = parsed.prediction_sets()?;
            let spec = match controls {
                Some(path) => Some(read_controls(path)?),
                None => None,
            };
            let config = GridSearchConfig {
                resolution: *resolution,
                refine: *refine,
                allow_negative_weights: *allow_negative_weights,
            };
            let result = grid_search_weights(&sets, params, &config, spec.as_ref())?;
            if let Some(out_path) = out {
                write_predictions(
                    out_path,
                    &parsed.ids,
                    &parsed.actuals,
                    &[("blend".to_string(), result.blended.predictions())],
                )?;
            }
            let names: Vec<String> = sets.iter().map(|s| s.name().to_string()).collect();
            match cli.format {
                Format::Table => print!("{}", report::render_blend(&result, &names)),
                Format::Json => println!("{}", report::to_json(&result)),
            }
        }
        Command::Bias { file, set } => {
            let params = loss_params(cli)?;
            let parsed = read_predictions(file)?;
            let sets = match set {
                Some(name) => vec![parsed.prediction_set(name)?],
                None => parsed.prediction_sets()?,
            };
            let outputs: Vec<report::BiasOutput> = sets
                .iter()
                .map(|s| report::BiasOutput {
                    set: s.name().to_string(),
                    ranking: bias_ranking(s, params),
                })
                .collect();
            match cli.format {
                Format::Table => print!("{}", report::render_bias(&outputs)),
                Format::Json => println!("{}", report::to_json(&outputs)),
            }
        }
        Command::DemoTable1 => {
            let demo = table1_demo();
            match cli.format {
                Format::Table => print!("{}", report::render_table1(&demo)),
                Format::Json => println!("{}", report::to_json(&demo)),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // cli.seed is reserved for stochastic subcommands; everything shipped
    // here is deterministic
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
