use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dispersia::error::Error;
use dispersia::fitting::{fit_mle, plug_in_variance, FitResult};
use dispersia::gof::{ks_test, pearson_chi2, GofResult};
use dispersia::harness::{
    run_rejection_grid, run_table1_rows, scenario, table1_rows, with_threads, ExperimentConfig, ExperimentSummary,
    DEFAULT_MASTER_SEED,
};
use dispersia::io::{
    emit_report, histogram_report, load_csv_series, parse_config, read_config, rejection_report, table1_report,
    Destination, Format, ReportTable,
};
use dispersia::special::{reg_gamma_p, reg_gamma_q};
use dispersia::vartest::{
    alpha_condition, mooley_pvalue, statistic_d, validity_verdict, model_validity, DfConvention, ValidityVerdict,
    VarianceFunction, DEFAULT_VALIDITY_TOLERANCE,
};
use dispersia::{DistributionSpec, Family};

const EXIT_FIT_FAILURE: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_CONFIG: u8 = 66;

const SEED_ENV: &str = "DISPERSIA_SEED";

#[derive(Parser)]
#[command(name = "dispersia", version, about = "Variance-ratio dispersion test, its validity check and Monte Carlo calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a family by maximum likelihood.
    Fit(DataArgs),
    /// Variance-ratio test with the fitted model's variance as denominator.
    Vartest {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = DfArg::N)]
        df_convention: DfArg,
        #[arg(long, default_value_t = DEFAULT_VALIDITY_TOLERANCE)]
        tolerance: f64,
    },
    /// Asymptotic Var(D)/n for a variance function and the resulting verdict.
    Validity {
        #[arg(long, value_enum)]
        family: ValidityFamily,
        /// Binomial number of trials.
        #[arg(long)]
        size: Option<u64>,
        /// Known gamma shape.
        #[arg(long)]
        shape: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_VALIDITY_TOLERANCE)]
        tolerance: f64,
    },
    /// Monte Carlo experiments.
    #[command(subcommand)]
    Simulate(Simulate),
    /// Goodness of fit of a family to a data column.
    Gof {
        #[arg(value_enum)]
        test: GofKind,
        #[command(flatten)]
        data: DataArgs,
        /// Fully specified parameters, e.g. `shape=2,scale=3`. Without this the
        /// family is fitted to the data.
        #[arg(long)]
        params: Option<String>,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    column: String,
    /// Binomial number of trials.
    #[arg(long)]
    size: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    /// Overrides DISPERSIA_SEED and the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
}

#[derive(Subcommand)]
enum Simulate {
    /// Mean and variance of D over parameter grids.
    Table1 {
        /// A single grid; the built-in seven rows are run when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Rejection rates when D is referred to chi-square(n-1).
    Rejection {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        /// Required for `custom`; for presets it overrides sample sizes,
        /// replicates, seed and level.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        /// Write plot-ready histogram CSV of the simulated D values here.
        #[arg(long)]
        histogram: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        bins: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Exponential,
    Gamma,
    Weibull,
    Lognormal,
    Poisson,
    Binomial,
}

#[derive(Clone, Copy, ValueEnum)]
enum ValidityFamily {
    Poisson,
    Binomial,
    Exponential,
    GammaKnownShape,
}

#[derive(Clone, Copy, ValueEnum)]
enum DfArg {
    #[value(name = "n")]
    N,
    #[value(name = "n-1")]
    NMinus1,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum GofKind {
    Chi2,
    Ks,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    MooleyFalseReject,
    MooleyFalseAccept,
    Custom,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

/// Errors raised while reading or validating data.
fn data_failure(e: Error) -> Failure {
    let code = match e {
        Error::NoConvergence(_) => EXIT_FIT_FAILURE,
        Error::Config { .. } => EXIT_CONFIG,
        _ => EXIT_DATA,
    };
    Failure { code, message: e.to_string() }
}

/// Errors raised while reading or validating a configuration file.
fn config_failure(e: Error) -> Failure {
    Failure { code: EXIT_CONFIG, message: e.to_string() }
}

fn usage_failure(e: Error) -> Failure {
    Failure::usage(e.to_string())
}

type CliResult = Result<(), Failure>;

impl FamilyArg {
    fn family(self, size: Option<u64>) -> Result<Family, Failure> {
        Ok(match self {
            FamilyArg::Exponential => Family::Exponential,
            FamilyArg::Gamma => Family::Gamma,
            FamilyArg::Weibull => Family::Weibull,
            FamilyArg::Lognormal => Family::LogNormal,
            FamilyArg::Poisson => Family::Poisson,
            FamilyArg::Binomial => Family::Binomial {
                size: size.ok_or_else(|| Failure::usage("--family binomial requires --size"))?,
            },
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Fit(data) => cmd_fit(&data),
        Command::Vartest { data, df_convention, tolerance } => cmd_vartest(&data, df_convention, tolerance),
        Command::Validity { family, size, shape, tolerance } => cmd_validity(family, size, shape, tolerance),
        Command::Simulate(Simulate::Table1 { config, run }) => cmd_table1(config, &run),
        Command::Simulate(Simulate::Rejection { scenario, config, run, histogram, bins }) => {
            cmd_rejection(scenario, config, &run, histogram, bins)
        }
        Command::Gof { test, data, params } => cmd_gof(test, &data, params.as_deref()),
    }
}

fn load_and_fit(data: &DataArgs) -> Result<(Vec<f64>, FitResult), Failure> {
    let family = data.family.family(data.size)?;
    let series = load_csv_series(&data.input, &data.column).map_err(data_failure)?;
    let fit = fit_mle(family, &series.values).map_err(|e| {
        if let Error::NoConvergence(last) = &e {
            print_fit(last, series.values.len());
        }
        data_failure(e)
    })?;
    Ok((series.values, fit))
}

fn params_text(spec: &DistributionSpec) -> String {
    spec.params().iter().map(|(k, v)| format!("{k}={v:.6}")).collect::<Vec<_>>().join(" ")
}

fn print_fit(fit: &FitResult, n: usize) {
    println!("family:            {}", fit.spec.family());
    println!("n:                 {n}");
    println!("parameters:        {}", params_text(&fit.spec));
    println!("log-likelihood:    {:.6}", fit.log_likelihood);
    println!("plug-in variance:  {:.6}", fit.plug_in_variance);
    println!("iterations:        {}", fit.iterations);
    println!("converged:         {}", fit.converged);
    println!("gradient norm:     {:.3e}", fit.gradient_norm);
}

fn cmd_fit(data: &DataArgs) -> CliResult {
    let (values, fit) = load_and_fit(data)?;
    print_fit(&fit, values.len());
    Ok(())
}

fn print_verdict(verdict: &ValidityVerdict, family: &str) {
    println!("alpha:             {:.4}", verdict.alpha);
    if verdict.valid {
        println!(
            "verdict:           VALID (|alpha - 2| <= {}): chi-square(n-1) reference justified for {family}",
            verdict.tolerance
        );
    } else {
        println!("verdict:           INVALID: chi-square(n-1) approximation unjustified for {family}");
        println!();
        println!("  !! WARNING: Var(D)/n tends to {:.4}, not 2, for {family} data.", verdict.alpha);
        println!("  !! D is not approximately chi-square(n-1) under this model, so chi-square");
        println!("  !! based p-values for D must not be used to accept or reject it.");
    }
}

fn cmd_vartest(data: &DataArgs, df: DfArg, tolerance: f64) -> CliResult {
    let (values, fit) = load_and_fit(data)?;
    let n = values.len();
    let d = statistic_d(&values, plug_in_variance(&fit)).map_err(data_failure)?;
    let primary = match df {
        DfArg::N => DfConvention::N,
        DfArg::NMinus1 => DfConvention::NMinus1,
    };
    let secondary = match primary {
        DfConvention::N => DfConvention::NMinus1,
        DfConvention::NMinus1 => DfConvention::N,
    };
    let df_chi = (n - 1) as f64;
    let exact = 2.0
        * reg_gamma_p(0.5 * df_chi, 0.5 * d)
            .map_err(data_failure)?
            .min(reg_gamma_q(0.5 * df_chi, 0.5 * d).map_err(data_failure)?);

    println!("family:            {}", fit.spec.family());
    println!("n:                 {n}");
    println!("parameters:        {}", params_text(&fit.spec));
    println!("plug-in variance:  {:.6}", fit.plug_in_variance);
    println!("D:                 {d:.4}");
    for conv in [primary, secondary] {
        let p = mooley_pvalue(d, n, conv).map_err(data_failure)?;
        let label = format!("p normal nu={conv}:");
        println!("{label:<19}{p:.4}");
    }
    println!("p (chi2 n-1, 2s):  {:.4}", exact.min(1.0));
    match model_validity(&fit.spec, tolerance) {
        Ok(verdict) => print_verdict(&verdict, fit.spec.family().name()),
        Err(e) => println!("verdict:           unavailable ({e})"),
    }
    Ok(())
}

fn cmd_validity(family: ValidityFamily, size: Option<u64>, shape: Option<f64>, tolerance: f64) -> CliResult {
    let (spec, f, name) = match family {
        ValidityFamily::Poisson => (DistributionSpec::poisson(1.0), VarianceFunction::poisson(), "poisson".to_string()),
        ValidityFamily::Exponential => {
            (DistributionSpec::exponential(1.0), VarianceFunction::exponential(), "exponential".to_string())
        }
        ValidityFamily::Binomial => {
            let m = size.ok_or_else(|| Failure::usage("--family binomial requires --size"))?;
            (DistributionSpec::binomial(m, 0.5), VarianceFunction::binomial(m), format!("binomial(size={m})"))
        }
        ValidityFamily::GammaKnownShape => {
            let k = shape.ok_or_else(|| Failure::usage("--family gamma-known-shape requires --shape"))?;
            (DistributionSpec::gamma(k, 1.0), VarianceFunction::gamma_known_shape(k), format!("gamma(shape={k})"))
        }
    };
    let spec = spec.map_err(usage_failure)?;
    let alpha = alpha_condition(&spec.moments().map_err(usage_failure)?, &f).map_err(usage_failure)?;
    println!("family:            {name}");
    println!("variance function: f(x) = {}", f.name());
    print_verdict(&validity_verdict(alpha, tolerance), &name);
    Ok(())
}

/// --seed, then DISPERSIA_SEED, then the config value.
fn resolve_seed(flag: Option<u64>, config_seed: u64) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Failure {
            code: EXIT_CONFIG,
            message: format!("{SEED_ENV}={v} is not an unsigned 64-bit integer"),
        }),
        Err(_) => Ok(config_seed),
    }
}

fn apply_overrides(config: &mut ExperimentConfig, run: &RunArgs) -> CliResult {
    config.master_seed = resolve_seed(run.seed, config.master_seed)?;
    if let Some(r) = run.replicates {
        config.replicates = r;
    }
    config.validate_run().map_err(usage_failure)
}

fn execute<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    match threads {
        Some(0) => Err(Failure::usage("--threads must be at least 1")),
        Some(t) => with_threads(t, f).map_err(usage_failure),
        None => Ok(f()),
    }
}

fn emit(table: &ReportTable, run: &RunArgs) -> CliResult {
    let format = match run.format {
        FormatArg::Text => Format::Text,
        FormatArg::Csv => Format::Csv,
    };
    let dest = run.out.clone().map_or(Destination::Stdout, Destination::File);
    emit_report(table, format, &dest).map_err(data_failure)
}

fn announce_seed(seed: u64) {
    eprintln!("master seed: {seed}");
}

fn flag_warnings(summary: &ExperimentSummary) {
    for c in summary.cells.iter().filter(|c| c.flagged) {
        eprintln!(
            "warning: {} {} n={}: {} of {} fits failed",
            c.family,
            c.params_label(),
            c.n,
            c.n_failed,
            c.n_failed + c.replicates
        );
    }
}

fn cmd_table1(config: Option<PathBuf>, run: &RunArgs) -> CliResult {
    let mut rows = match config {
        Some(path) => vec![parse_config(path).map_err(config_failure)?],
        None => table1_rows(),
    };
    let seed = resolve_seed(run.seed, rows.first().map_or(DEFAULT_MASTER_SEED, |c| c.master_seed))?;
    for row in &mut rows {
        apply_overrides(row, run)?;
        row.master_seed = seed;
    }
    announce_seed(seed);
    let summary = execute(run.threads, || run_table1_rows(&rows))?.map_err(data_failure)?;
    flag_warnings(&summary);
    emit(&table1_report(&summary), run)
}

fn cmd_rejection(
    which: ScenarioArg,
    config: Option<PathBuf>,
    run: &RunArgs,
    histogram: Option<PathBuf>,
    bins: usize,
) -> CliResult {
    let summary = match which {
        ScenarioArg::Custom => {
            let path = config.ok_or_else(|| Failure::usage("--scenario custom requires --config"))?;
            let mut config = parse_config(path).map_err(config_failure)?;
            apply_overrides(&mut config, run)?;
            announce_seed(config.master_seed);
            execute(run.threads, || run_rejection_grid(&config))?
        }
        preset => {
            let name = match preset {
                ScenarioArg::MooleyFalseReject => "mooley-false-reject",
                _ => "mooley-false-accept",
            };
            let mut sc = scenario(name).expect("preset exists");
            if let Some(path) = config {
                let overrides = read_config(path).map_err(config_failure)?;
                sc.config.sample_sizes = overrides.sample_sizes;
                sc.config.replicates = overrides.replicates;
                sc.config.master_seed = overrides.master_seed;
                sc.config.level = overrides.level;
                sc.config.sided = overrides.sided;
            }
            apply_overrides(&mut sc.config, run)?;
            announce_seed(sc.config.master_seed);
            execute(run.threads, || sc.run())?
        }
    }
    .map_err(data_failure)?;
    flag_warnings(&summary);
    emit(&rejection_report(&summary), run)?;
    if let Some(path) = histogram {
        let table = histogram_report(&summary, bins).map_err(usage_failure)?;
        emit_report(&table, Format::Csv, &Destination::File(path)).map_err(data_failure)?;
    }
    Ok(())
}

fn parse_params(text: &str) -> Result<Vec<(String, f64)>, Failure> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| Failure::usage(format!("expected name=value, got `{kv}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| Failure::usage(format!("`{v}` is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn spec_from_params(family: Family, params: &[(String, f64)]) -> Result<DistributionSpec, Failure> {
    let get = |name: &str| {
        params
            .iter()
            .find(|(k, _)| k == name)
            .map(|&(_, v)| v)
            .ok_or_else(|| Failure::usage(format!("--params is missing `{name}` for {family}")))
    };
    let expected: &[&str] = match family {
        Family::Exponential | Family::Poisson => &["mean"],
        Family::Gamma | Family::Weibull => &["shape", "scale"],
        Family::LogNormal => &["log_mean", "log_sd"],
        Family::Binomial { .. } => &["prob"],
        Family::GammaMixture | Family::Uniform => return Err(Failure::usage(format!("{family} is not available here"))),
    };
    if let Some((k, _)) = params.iter().find(|(k, _)| !expected.contains(&k.as_str())) {
        return Err(Failure::usage(format!("unknown parameter `{k}` for {family} (expected {expected:?})")));
    }
    let spec = match family {
        Family::Exponential => DistributionSpec::exponential(get("mean")?),
        Family::Poisson => DistributionSpec::poisson(get("mean")?),
        Family::Gamma => DistributionSpec::gamma(get("shape")?, get("scale")?),
        Family::Weibull => DistributionSpec::weibull(get("shape")?, get("scale")?),
        Family::LogNormal => DistributionSpec::log_normal(get("log_mean")?, get("log_sd")?),
        Family::Binomial { size } => DistributionSpec::binomial(size, get("prob")?),
        Family::GammaMixture | Family::Uniform => unreachable!(),
    };
    spec.map_err(usage_failure)
}

fn print_gof(result: &GofResult) {
    println!("statistic:         {:.4}", result.statistic);
    if let Some(df) = result.df {
        println!("df:                {df}");
    }
    println!("p-value:           {:.4}", result.p_value);
    if !result.bins.is_empty() {
        let mut t = ReportTable::new("", &["lower", "upper", "observed", "expected"]);
        for b in &result.bins {
            t.push_row(vec![b.lower.into(), b.upper.into(), b.observed.into(), b.expected.into()])
                .expect("four cells");
        }
        print!("{}", t.render_text());
    }
    if let Some(w) = &result.warning {
        println!("WARNING: {w}");
    }
}

fn cmd_gof(test: GofKind, data: &DataArgs, params: Option<&str>) -> CliResult {
    let family = data.family.family(data.size)?;
    let (spec, fitted, values) = match params {
        Some(p) => {
            let spec = spec_from_params(family, &parse_params(p)?)?;
            let series = load_csv_series(&data.input, &data.column).map_err(data_failure)?;
            (spec, 0, series.values)
        }
        None => {
            let (values, fit) = load_and_fit(data)?;
            (fit.spec, family.estimated_param_count(), values)
        }
    };
    println!("model:             {} {}", spec.family(), params_text(&spec));
    let result = match test {
        GofKind::Chi2 => pearson_chi2(&values, &spec, fitted),
        GofKind::Ks => ks_test(&values, &spec, fitted > 0),
    }
    .map_err(data_failure)?;
    print_gof(&result);
    Ok(())
}
