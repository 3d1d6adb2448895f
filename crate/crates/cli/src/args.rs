use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "cdsboost",
    version,
    about = "Integrative sparse boosting with group-level commonality detection",
    args_override_self = true
)]
pub struct Cli {
    /// Worker threads (1 = serial reference mode). Defaults to all cores.
    #[arg(long, global = true, env = "CDSBOOST_WORKERS")]
    pub workers: Option<usize>,

    /// Read `key = value` defaults from FILE; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one method to dataset CSVs and a group file.
    Fit(FitArgs),
    /// Generate a simulated replicate with its ground truth.
    Simulate(SimulateArgs),
    /// Run the simulation benchmark over many replicates.
    Benchmark(BenchmarkArgs),
    /// Selection stability (OOI) and prediction over random 3:1 splits.
    Stability(StabilityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pairs {
    All,
    Adjacent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Table2,
    Reduced,
    SmallExample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Lr,
    Aft,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaArg {
    Auto,
    Value(f64),
}

pub fn parse_lambda(s: &str) -> Result<LambdaArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(LambdaArg::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(LambdaArg::Value(v)),
        _ => Err(format!("expected 'auto' or a non-negative number, got '{s}'")),
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad number '{v}' in '{s}'")))
        .collect()
}

pub fn parse_rho(s: &str) -> Result<[f64; 3], String> {
    let v = parse_list(s)?;
    <[f64; 3]>::try_from(v).map_err(|_| format!("expected three proportions, got '{s}'"))
}

/// Boosting and λ controls shared by fit, benchmark and stability.
#[derive(Debug, Args)]
pub struct BoostArgs {
    /// Step size.
    #[arg(long, default_value_t = 0.1)]
    pub nu: f64,

    /// Commonality tuning parameter: `auto` (HDBIC over a grid) or a value.
    #[arg(long, default_value = "auto", value_parser = parse_lambda)]
    pub lambda: LambdaArg,

    /// Explicit comma-separated λ grid for `--lambda auto`.
    #[arg(long, value_delimiter = ',', num_args = 1.., value_name = "L1,L2,...")]
    pub lambda_grid: Option<Vec<f64>>,

    /// Number of positive values in the default λ grid.
    #[arg(long, default_value_t = 10)]
    pub grid_size: usize,

    /// Dataset pairs counted by the commonality penalty.
    #[arg(long, value_enum, default_value_t = Pairs::All)]
    pub pairs: Pairs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset CSV files, one per dataset (header: y[,delta],covariates...).
    #[arg(long, num_args = 1.., required = true, value_name = "CSV")]
    pub data: Vec<PathBuf>,

    /// Group file: one `covariate<TAB>group_id` line per covariate.
    #[arg(long, value_name = "TSV")]
    pub groups: Option<PathBuf>,

    /// cd-sboost, int-sboost, sep-sboost, pool-sboost or sboost.
    #[arg(long, default_value = "cd-sboost")]
    pub method: String,

    /// Boosting iterations.
    #[arg(long, default_value_t = cdsboost::DEFAULT_MAX_ITER)]
    pub iterations: usize,

    #[command(flatten)]
    pub boost: BoostArgs,

    /// Use covariates and responses as given instead of standardizing.
    #[arg(long)]
    pub no_standardize: bool,

    /// Output JSON path (stdout when absent).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Simulation design selection shared by simulate and benchmark.
#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long, value_enum, default_value_t = Preset::Table2)]
    pub preset: Preset,

    /// Coefficient and noise setting S1..S4.
    #[arg(long, alias = "design", default_value = "S1")]
    pub setting: String,

    /// Proportions of full, partial and no commonality groups.
    #[arg(long, value_parser = parse_rho, default_value = "0.8,0.2,0", value_name = "F,P,N")]
    pub rho: [f64; 3],

    #[arg(long, value_enum, default_value_t = ModelArg::Lr)]
    pub model: ModelArg,

    /// Override the number of datasets.
    #[arg(long)]
    pub datasets: Option<usize>,
    /// Override the subjects per dataset.
    #[arg(long)]
    pub n: Option<usize>,
    /// Override the number of covariates.
    #[arg(long)]
    pub p: Option<usize>,
    /// Override the number of groups.
    #[arg(long)]
    pub k: Option<usize>,
    /// Override the within-group correlation.
    #[arg(long)]
    pub within_corr: Option<f64>,
    /// Override the between-group correlation.
    #[arg(long)]
    pub between_corr: Option<f64>,
    /// Override the expected AFT censoring rate.
    #[arg(long)]
    pub censoring: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub design: DesignArgs,

    /// Master seed.
    #[arg(long, required = true)]
    pub seed: u64,

    /// Replicate index within the seed's stream family.
    #[arg(long, default_value_t = 0)]
    pub replicate: usize,

    /// Also write an independent test set per dataset (test_m.csv).
    #[arg(long)]
    pub with_test: bool,

    /// Output directory.
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub design: DesignArgs,

    /// Comma-separated methods (cd, int, sep, pool).
    #[arg(long, default_value = "cd,int,sep,pool")]
    pub methods: String,

    #[arg(long, default_value_t = 100)]
    pub replicates: usize,

    /// Master seed.
    #[arg(long, required = true)]
    pub seed: u64,

    /// Boosting iterations.
    #[arg(long, default_value_t = cdsboost::DEFAULT_MAX_ITER)]
    pub iterations: usize,

    #[command(flatten)]
    pub boost: BoostArgs,

    /// Skip the per-iteration partition check rerun of CD-SBoost.
    #[arg(long)]
    pub no_partition_check: bool,

    /// Output JSON path (stdout when absent).
    #[arg(long, short)]
    pub output: Option<PathBuf>,

    /// Write the text table here instead of stderr.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    /// Dataset CSV files, one per dataset.
    #[arg(long, num_args = 1.., required = true, value_name = "CSV")]
    pub data: Vec<PathBuf>,

    #[arg(long, value_name = "TSV")]
    pub groups: Option<PathBuf>,

    /// Comma-separated methods.
    #[arg(long, default_value = "cd,int,sep,pool")]
    pub methods: String,

    #[arg(long, default_value_t = 100)]
    pub splits: usize,

    #[arg(long, default_value_t = 0.75)]
    pub train_fraction: f64,

    /// Master seed for the random splits.
    #[arg(long, required = true)]
    pub seed: u64,

    #[arg(long, default_value_t = cdsboost::DEFAULT_MAX_ITER)]
    pub iterations: usize,

    #[command(flatten)]
    pub boost: BoostArgs,

    #[arg(long)]
    pub no_standardize: bool,

    #[arg(long, short)]
    pub output: Option<PathBuf>,
}
