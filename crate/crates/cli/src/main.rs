use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dyadlab_core::shifts::ScaleFamily;
use dyadlab_harness::commands::{
    calibrate_command, char_command, corona_command, cz_command, lemmas_command, norm_command, test_conditions_command,
};
use dyadlab_harness::config::{load_weight_file, GridSpec, ShiftChoice, ShiftSpec, WeightSpec};
use dyadlab_harness::output::{Format, Output};
use dyadlab_harness::suites::{GROWTH_DEPTH, GROWTH_EXPONENTS};
use dyadlab_harness::sweep::sweep_command;
use dyadlab_harness::{init_workers, ExperimentConfig, HarnessError, Result};

/// Dyadic shift and weight experiments.
#[derive(Debug, Parser)]
#[command(name = "dyadlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration (.toml or .json).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum CharFamily {
    Constant,
    Power,
    Cascade,
    Spike,
    File,
}

#[derive(Debug, Args, Serialize)]
struct CharArgs {
    #[arg(long, value_enum, default_value_t = CharFamily::Constant)]
    family: CharFamily,
    /// Exponent of the power weight.
    #[arg(long, default_value_t = 0.5)]
    a: f64,
    /// Cascade level: the weight has characteristic `2^n`.
    #[arg(long, default_value_t = 3)]
    n: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    value: f64,
    /// Spike position (cell index).
    #[arg(long, default_value_t = 0)]
    k: u32,
    #[arg(long, default_value_t = 10.0)]
    height: f64,
    #[arg(long = "N", default_value_t = 12)]
    depth: u32,
    #[arg(long, default_value_t = 1)]
    d: u32,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    weight_file: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// A_p characteristic of one weight.
    Char(CharArgs),
    /// Norm and testing constants over the configured weights.
    Sweep(Common),
    /// Testing constants in the dual-measure form.
    TestConditions(Common),
    /// Corona decomposition of each weight.
    Corona(Common),
    /// Paraproduct, exponential-integrability and superlevel checks.
    Lemmas(Common),
    /// Calderon-Zygmund decompositions of random inputs.
    Cz(Common),
    /// Weighted operator norms.
    Norm(Common),
    /// Recompute the calibrated constants.
    Calibrate {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// The configuration used when `--config` is absent.
fn default_config(growth: bool) -> ExperimentConfig {
    let mut cfg: ExperimentConfig = toml::from_str("grid = { N = 12 }").expect("static default");
    if growth {
        cfg.experiment = "power-growth".into();
        cfg.grid = GridSpec { d: 1, n: GROWTH_DEPTH };
        cfg.weights = GROWTH_EXPONENTS.iter().map(|&a| WeightSpec::Power { a }).collect();
    } else {
        cfg.experiment = "cascade".into();
        cfg.shift = ShiftSpec {
            kind: ShiftChoice::Random,
            family: ScaleFamily::Separated,
            ..ShiftSpec::default()
        };
        cfg.weights = (1..=3).map(|n| WeightSpec::Cascade { n, seed: None }).collect();
    }
    cfg
}

fn resolve(common: &Common, growth: bool) -> Result<(ExperimentConfig, Output)> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => default_config(growth),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let dir = common.out.clone().or_else(|| cfg.output.clone());
    Ok((
        cfg,
        Output {
            dir,
            format: common.format,
        },
    ))
}

fn run_char(args: &CharArgs) -> Result<Vec<String>> {
    let grid = GridSpec {
        d: args.d,
        n: args.depth,
    };
    let grid = dyadlab_core::DyadicGrid::new(grid.d, grid.n).map_err(|e| HarnessError::Usage(e.to_string()))?;
    let spec = match args.family {
        CharFamily::Constant => WeightSpec::Constant { value: args.value },
        CharFamily::Power => WeightSpec::Power { a: args.a },
        CharFamily::Cascade => WeightSpec::Cascade {
            n: args.n,
            seed: Some(args.seed),
        },
        CharFamily::Spike => WeightSpec::Spike {
            k: args.k,
            height: args.height,
        },
        CharFamily::File => {
            let path = args
                .weight_file
                .clone()
                .ok_or_else(|| HarnessError::Usage("--family file needs --weight-file".into()))?;
            WeightSpec::File { path }
        }
    };
    let (id, w) = match (&spec, &args.weight_file) {
        (WeightSpec::File { path }, _) => (spec.id(0), load_weight_file(path, grid)?),
        (_, Some(path)) => (
            WeightSpec::File { path: path.clone() }.id(0),
            load_weight_file(path, grid)?,
        ),
        _ => spec.build(grid, args.seed).map_err(|e| match e {
            HarnessError::Core(c) => HarnessError::Usage(c.to_string()),
            other => other,
        })?,
    };
    let out = Output {
        dir: args.out.clone(),
        format: args.format,
    };
    char_command(args, id, &w, args.p, &out)
}

fn run(cli: &Cli) -> Result<Vec<String>> {
    init_workers()?;
    match &cli.command {
        Command::Char(a) => run_char(a),
        Command::Sweep(c) => {
            let (cfg, out) = resolve(c, true)?;
            sweep_command(&cfg, &out)
        }
        Command::Norm(c) => {
            let (cfg, out) = resolve(c, true)?;
            norm_command(&cfg, &out)
        }
        Command::TestConditions(c) => {
            let (cfg, out) = resolve(c, false)?;
            test_conditions_command(&cfg, &out)
        }
        Command::Corona(c) => {
            let (cfg, out) = resolve(c, false)?;
            corona_command(&cfg, &out)
        }
        Command::Lemmas(c) => {
            let (cfg, out) = resolve(c, false)?;
            lemmas_command(&cfg, &out)
        }
        Command::Cz(c) => {
            let (cfg, out) = resolve(c, false)?;
            cz_command(&cfg, &out)
        }
        Command::Calibrate { out } => calibrate_command(&Output {
            dir: out.clone(),
            format: Format::Json,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            let report = serde_json::json!({ "schema": dyadlab_core::io::SCHEMA, "failures": failures });
            eprintln!("{report}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
