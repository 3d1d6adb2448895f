use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use cdsboost::boost::{fit as fit_method, FitOptions, PenaltySpec};
use cdsboost::eval::{self, BenchmarkConfig, LambdaChoice, OoiScore, MeanSd, PredictionScore, StabilityConfig};
use cdsboost::io::{read_dataset, read_groups, write_dataset, write_groups, default_names, NamedGroups};
use cdsboost::simgen::{simulate as sim_replicate, SimDesign, TruthFile};
use cdsboost::tuning::{hdbic, select_lambda, HdbicScore};
use cdsboost::{validate, Algorithm, BoostConfig, DatasetBundle, FitResult, Model, PairMode, Problem};

use crate::args::{BenchmarkArgs, BoostArgs, DesignArgs, FitArgs, LambdaArg, ModelArg, Pairs, Preset, SimulateArgs, StabilityArgs};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn pair_mode(p: Pairs) -> PairMode {
    match p {
        Pairs::All => PairMode::AllPairs,
        Pairs::Adjacent => PairMode::Adjacent,
    }
}

fn lambda_choice(b: &BoostArgs) -> Result<LambdaChoice> {
    match (&b.lambda, &b.lambda_grid) {
        (LambdaArg::Value(_), Some(_)) => Err(CliError::validation(
            "--lambda-grid only applies with --lambda auto",
        )),
        (LambdaArg::Value(v), None) => Ok(LambdaChoice::Fixed(*v)),
        (LambdaArg::Auto, Some(g)) => Ok(LambdaChoice::Grid(g.clone())),
        (LambdaArg::Auto, None) => Ok(LambdaChoice::Auto(b.grid_size)),
    }
}

fn parse_methods(s: &str) -> Result<Vec<Algorithm>> {
    let methods: Vec<Algorithm> = s
        .split(',')
        .map(|m| m.trim().parse::<Algorithm>())
        .collect::<cdsboost::Result<_>>()?;
    if methods.is_empty() {
        return Err(CliError::validation("no methods given"));
    }
    Ok(methods)
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::validation(format!("{what} {} does not exist", path.display())))
    }
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io(format!("cannot serialize output: {e}")))?;
    match path {
        Some(p) => fs::write(p, text + "\n")
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| CliError::io(e.to_string()))
        }
    }
}

/// Datasets plus group file, as loaded by fit and stability.
struct Loaded {
    bundles: Vec<DatasetBundle>,
    names: Vec<String>,
    groups: NamedGroups,
}

fn load(data: &[PathBuf], groups: Option<&Path>, standardize: bool) -> Result<Loaded> {
    let groups_path = groups.ok_or_else(|| CliError::validation("a group file is required (--groups)"))?;
    for d in data {
        require_file(d, "dataset file")?;
    }
    require_file(groups_path, "group file")?;
    let mut bundles = Vec::with_capacity(data.len());
    let mut names: Option<Vec<String>> = None;
    for path in data {
        let ds = read_dataset(path)?;
        match &names {
            None => names = Some(ds.names),
            Some(first) if *first != ds.names => {
                return Err(CliError::validation(format!(
                    "{} does not have the same covariate columns as {}",
                    path.display(),
                    data[0].display()
                )))
            }
            Some(_) => {}
        }
        bundles.push(ds.bundle);
    }
    let names = names.unwrap_or_default();
    let groups = read_groups(groups_path, &names)?;
    if standardize {
        for b in &mut bundles {
            b.standardize();
        }
    }
    Ok(Loaded { bundles, names, groups })
}

/// A fit plus the λ search that produced it, if any.
struct Fitted {
    fit: FitResult,
    path: Option<Vec<LambdaPoint>>,
}

#[derive(Debug, Serialize)]
struct LambdaPoint {
    lambda: f64,
    hdbic: HdbicScore,
}

fn run_method(
    problem: &Problem,
    method: Algorithm,
    iterations: usize,
    b: &BoostArgs,
    choice: &LambdaChoice,
    options: FitOptions,
) -> cdsboost::Result<Fitted> {
    let config = BoostConfig { nu: b.nu, max_iter: iterations, lambda: 0.0, algorithm: method };
    config.check()?;
    let mode = pair_mode(b.pairs);
    if method == Algorithm::CdSBoost && !matches!(choice, LambdaChoice::Fixed(_)) {
        let grid = choice.grid(problem);
        let sel = select_lambda(problem, &config, &grid, mode, options)?;
        let path = sel
            .points
            .iter()
            .map(|pt| LambdaPoint { lambda: pt.lambda, hdbic: pt.score })
            .collect();
        return Ok(Fitted { fit: sel.into_fit(), path: Some(path) });
    }
    let lambda = match choice {
        LambdaChoice::Fixed(v) if method == Algorithm::CdSBoost => *v,
        _ => 0.0,
    };
    let config = BoostConfig { lambda, ..config };
    let fit = fit_method(problem, &config, &PenaltySpec::new(lambda, mode), options)?;
    Ok(Fitted { fit, path: None })
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

#[derive(Debug, Serialize)]
struct CoefficientOut<'a> {
    j: usize,
    m: usize,
    name: &'a str,
    value: f64,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum VerdictKind {
    Common,
    Partial,
    Different,
}

#[derive(Debug, Serialize)]
struct GroupVerdict {
    group: u64,
    verdict: VerdictKind,
    /// Equality classes of datasets, 1-based.
    classes: Vec<Vec<usize>>,
}

#[derive(Debug, Serialize)]
struct FitOutput<'a> {
    method: Algorithm,
    model: Model,
    datasets: usize,
    p: usize,
    standardized: bool,
    iterations: usize,
    nu: f64,
    t_hat: OneOrMany<usize>,
    lambda: Option<f64>,
    lambda_path: Option<Vec<LambdaPoint>>,
    hdbic: HdbicScore,
    coefficients: Vec<CoefficientOut<'a>>,
    group_verdicts: Vec<GroupVerdict>,
    objective_trace: OneOrMany<Vec<f64>>,
}

fn one_or_many<T: Clone>(items: Vec<T>) -> OneOrMany<T> {
    if items.len() == 1 {
        OneOrMany::One(items[0].clone())
    } else {
        OneOrMany::Many(items)
    }
}

pub fn fit(a: FitArgs, parallel: bool) -> Result<()> {
    let method: Algorithm = a.method.parse()?;
    let choice = lambda_choice(&a.boost)?;
    let loaded = load(&a.data, a.groups.as_deref(), !a.no_standardize)?;
    let problem = validate(loaded.bundles, loaded.groups.groups.clone())?;
    let options = FitOptions { parallel, check_partitions: false };
    let Fitted { fit, path } = run_method(&problem, method, a.iterations, &a.boost, &choice, options)?;
    let score = hdbic(&fit, &problem);

    let mut coefficients = Vec::new();
    for j in 0..fit.p() {
        for m in 0..fit.m() {
            let value = fit.beta_hat[[j, m]];
            if value != 0.0 {
                coefficients.push(CoefficientOut { j: j + 1, m: m + 1, name: &loaded.names[j], value });
            }
        }
    }
    let group_verdicts = fit
        .partitions
        .iter()
        .enumerate()
        .map(|(k, part)| {
            let classes: Vec<Vec<usize>> = part
                .classes()
                .into_iter()
                .map(|c| c.into_iter().map(|d| d + 1).collect())
                .collect();
            let verdict = if classes.len() == 1 {
                VerdictKind::Common
            } else if classes.len() == fit.m() {
                VerdictKind::Different
            } else {
                VerdictKind::Partial
            };
            GroupVerdict { group: loaded.groups.labels[k], verdict, classes }
        })
        .collect();
    let out = FitOutput {
        method: fit.algorithm,
        model: problem.model,
        datasets: problem.m(),
        p: problem.p(),
        standardized: !a.no_standardize,
        iterations: a.iterations,
        nu: a.boost.nu,
        t_hat: one_or_many(fit.stopping.iter().map(|s| s.t_hat).collect()),
        lambda: fit.lambda,
        lambda_path: path,
        hdbic: score,
        coefficients,
        group_verdicts,
        objective_trace: one_or_many(fit.stopping.iter().map(|s| s.trace.clone()).collect()),
    };
    write_json(&out, a.output.as_deref())
}

fn build_design(d: &DesignArgs) -> Result<SimDesign> {
    let model = match d.model {
        ModelArg::Lr => Model::Lr,
        ModelArg::Aft => Model::Aft,
    };
    let setting = d.setting.parse()?;
    let mut design = match d.preset {
        Preset::Table2 => SimDesign::table2(setting, d.rho, model),
        Preset::Reduced => SimDesign::reduced(setting, d.rho, model),
        Preset::SmallExample => {
            let mut s = SimDesign::small_example();
            s.model = model;
            s
        }
    };
    if let Some(m) = d.datasets {
        design.m = m;
    }
    if let Some(n) = d.n {
        design.n = n;
    }
    if d.p.is_some() || d.k.is_some() {
        if d.preset == Preset::SmallExample {
            return Err(CliError::validation("the small-example preset has a fixed group layout"));
        }
        design.p = d.p.unwrap_or(design.p);
        design.k = d.k.unwrap_or(design.k);
    }
    if let Some(w) = d.within_corr {
        design.within_corr = w;
    }
    if let Some(b) = d.between_corr {
        design.between_corr = b;
    }
    if let Some(c) = d.censoring {
        design.target_censoring = c;
    }
    design.check()?;
    Ok(design)
}

#[derive(Debug, Serialize)]
struct TruthOutput<'a> {
    seed: u64,
    replicate: usize,
    design: &'a SimDesign,
    #[serde(flatten)]
    truth: TruthFile,
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let design = build_design(&a.design)?;
    let sim = sim_replicate(&design, a.seed, a.replicate, a.with_test)?;
    fs::create_dir_all(&a.out)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", a.out.display())))?;
    let names = default_names(design.p);
    for (m, b) in sim.train.iter().enumerate() {
        write_dataset(&a.out.join(format!("data_{}.csv", m + 1)), b, &names)?;
    }
    if let Some(test) = &sim.test {
        for (m, b) in test.iter().enumerate() {
            write_dataset(&a.out.join(format!("test_{}.csv", m + 1)), b, &names)?;
        }
    }
    write_groups(&a.out.join("groups.tsv"), &sim.truth.groups, &names)?;
    let out = TruthOutput {
        seed: a.seed,
        replicate: a.replicate,
        design: &design,
        truth: TruthFile::new(&sim.truth),
    };
    write_json(&out, Some(&a.out.join("truth.json")))
}

pub fn benchmark(a: BenchmarkArgs, parallel: bool) -> Result<()> {
    let methods = parse_methods(&a.methods)?;
    let design = build_design(&a.design)?;
    let mut config = BenchmarkConfig::new(design, a.seed);
    config.methods = methods;
    config.replicates = a.replicates;
    config.nu = a.boost.nu;
    config.max_iter = a.iterations;
    config.lambda = lambda_choice(&a.boost)?;
    config.pair_mode = pair_mode(a.boost.pairs);
    config.check_partitions = !a.no_partition_check;
    BoostConfig { nu: config.nu, max_iter: config.max_iter, ..BoostConfig::default() }.check()?;
    let report = eval::benchmark(&config, FitOptions { parallel, check_partitions: false })?;
    let table = eval::format_table(&report);
    match &a.table {
        Some(p) => fs::write(p, &table)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", p.display())))?,
        None => eprint!("{table}"),
    }
    write_json(&report, a.output.as_deref())
}

#[derive(Debug, Serialize)]
struct StabilityMethod {
    method: Algorithm,
    score_kind: PredictionScore,
    ooi: OoiScore,
    score: Option<MeanSd>,
    failed: usize,
    /// Per-split selected covariates (1-based) and scores.
    splits: Vec<StabilitySplit>,
}

#[derive(Debug, Serialize)]
struct StabilitySplit {
    split: usize,
    selected: Vec<usize>,
    score: Option<f64>,
    lambda: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct StabilityOutput {
    seed: u64,
    splits: usize,
    train_fraction: f64,
    standardized: bool,
    methods: Vec<StabilityMethod>,
}

pub fn stability(a: StabilityArgs, parallel: bool) -> Result<()> {
    let methods = parse_methods(&a.methods)?;
    let choice = lambda_choice(&a.boost)?;
    let loaded = load(&a.data, a.groups.as_deref(), !a.no_standardize)?;
    // Fail on inconsistent inputs before any split is drawn.
    validate(loaded.bundles.clone(), loaded.groups.groups.clone())?;
    let config = StabilityConfig { splits: a.splits, train_fraction: a.train_fraction, seed: a.seed };
    let inner = FitOptions { parallel: false, check_partitions: false };
    let mut out = Vec::with_capacity(methods.len());
    for method in methods {
        let report = eval::stability(&loaded.bundles, &loaded.groups.groups, &config, parallel, |problem| {
            run_method(problem, method, a.iterations, &a.boost, &choice, inner).map(|f| f.fit)
        })?;
        out.push(StabilityMethod {
            method,
            score_kind: report.score_kind,
            ooi: report.ooi,
            score: report.score,
            failed: report.failed,
            splits: report
                .splits
                .into_iter()
                .map(|s| StabilitySplit {
                    split: s.split,
                    selected: s.selected.into_iter().map(|j| j + 1).collect(),
                    score: s.score,
                    lambda: s.lambda,
                    error: s.error,
                })
                .collect(),
        });
    }
    let out = StabilityOutput {
        seed: a.seed,
        splits: a.splits,
        train_fraction: a.train_fraction,
        standardized: !a.no_standardize,
        methods: out,
    };
    write_json(&out, a.output.as_deref())
}
