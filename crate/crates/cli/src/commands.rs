use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use semisup_core::asymptotics::{a1_k, expected_error_cml, ExpansionInputs, QuadratureSpec};
use semisup_core::estimation::{
    fit_cml, fit_em_ignorable, fit_fsc, fit_full, fit_supervised, CovarianceModel, FitOptions,
    FitResult, XiConstraint,
};
use semisup_core::simulation::{
    evaluate_rule, paired_t_test, run_eq2_experiment, run_figure1_experiment, run_table1_grid,
    Method, ReplicationReport, Rule,
};
use semisup_core::{discriminant_from_theta, std_normal_cdf, MixtureParams};

use crate::config::{EfficiencyConfig, IterationConfig, ReplicationConfig, RunConfig};
use crate::csv_io::read_sample_csv;
use crate::dto::{hash_bytes, DiscriminantDto, Metadata, MissingnessDto, ModelDto, ThetaDto};
use crate::error::{CliError, CliResult};
use crate::svg::{line_plot, Series};

#[derive(Debug, Parser)]
#[command(
    name = "semisup",
    version,
    about = "Two-class normal discriminant rules from partially classified samples"
)]
pub struct Cli {
    /// Worker threads for replication experiments (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate mixture parameters from a sample CSV
    Fit(FitArgs),
    /// Score a fitted model on a labeled test CSV
    Evaluate(EvaluateArgs),
    /// Asymptotic relative efficiency over a grid of univariate models
    Are(AreArgs),
    /// Expected error of the hard-assignment rule after each iteration
    AsymptoticError(AsymptoticErrorArgs),
    /// Run an experiment from a preset (figure1, eq2, table1) or a config file
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Supervised,
    Em,
    Cml,
    Full,
    Fsc,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Weight on the classified rows, required for fsc
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fit a common covariance matrix (always used by cml)
    #[arg(long)]
    pub homoscedastic: bool,
    #[arg(long)]
    pub input: PathBuf,
    /// Output JSON file (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// JSON file with a `theta` object, such as the output of `fit`
    #[arg(long)]
    pub model: PathBuf,
    /// Fully labeled sample CSV
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AreArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub pi1_list: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub delta_list: Vec<f64>,
    /// Fraction of unclassified observations
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Output CSV file (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AsymptoticErrorArgs {
    #[arg(long)]
    pub delta: f64,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n1c: usize,
    #[arg(long)]
    pub n2c: usize,
    #[arg(long)]
    pub kmax: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// figure1, eq2 or table1
    pub preset: Option<String>,
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of replications, overriding the config
    #[arg(long)]
    pub replications: Option<usize>,
    /// Output directory (default: the config's `out`, else ./results)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an SVG line plot of the curve
    #[arg(long)]
    pub svg: bool,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Fit(a) => fit(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Are(a) => are(a),
        Command::AsymptoticError(a) => asymptotic_error(a),
        Command::Simulate(a) => simulate(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(CliError::io(path)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct FitSettings<'a> {
    method: &'a str,
    alpha: Option<f64>,
    model: ModelDto,
    seed: u64,
    max_iterations: usize,
    input_sha256: String,
}

#[derive(Serialize)]
struct SampleSummary {
    n: usize,
    n_classified: usize,
    n_unclassified: usize,
    n1_classified: usize,
    n2_classified: usize,
}

#[derive(Serialize)]
struct FitReport {
    metadata: Metadata,
    method: String,
    alpha: Option<f64>,
    model: ModelDto,
    sample: SampleSummary,
    theta: ThetaDto,
    xi: Option<MissingnessDto>,
    discriminant: Option<DiscriminantDto>,
    objective: f64,
    objective_trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    at_variance_floor: bool,
}

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Supervised => "supervised",
        MethodArg::Em => "em",
        MethodArg::Cml => "cml",
        MethodArg::Full => "full",
        MethodArg::Fsc => "fsc",
    }
}

fn fit(a: FitArgs) -> CliResult<()> {
    let alpha = match (a.method, a.alpha) {
        (MethodArg::Fsc, None) => return Err(CliError::Usage("--method fsc needs --alpha".into())),
        (MethodArg::Fsc, Some(x)) => Some(x),
        (_, Some(_)) => return Err(CliError::Usage("--alpha applies only to fsc".into())),
        (_, None) => None,
    };
    let model = if a.homoscedastic || a.method == MethodArg::Cml {
        CovarianceModel::Homoscedastic
    } else {
        CovarianceModel::Heteroscedastic
    };
    let bytes = std::fs::read(&a.input).map_err(CliError::io(&a.input))?;
    let sample = read_sample_csv(&a.input)?;
    let opts = FitOptions {
        seed: a.seed,
        max_iterations: a.max_iterations,
        ..FitOptions::default()
    };
    let result: FitResult = match a.method {
        MethodArg::Supervised => fit_supervised(&sample, model)?,
        MethodArg::Em => fit_em_ignorable(&sample, &opts, model)?,
        MethodArg::Cml => fit_cml(&sample, &opts, opts.max_iterations)?,
        MethodArg::Full => fit_full(&sample, &opts, model, XiConstraint::Free)?,
        MethodArg::Fsc => fit_fsc(&sample, alpha.unwrap_or_default(), &opts, model)?,
    };
    let settings = FitSettings {
        method: method_name(a.method),
        alpha,
        model: model.into(),
        seed: a.seed,
        max_iterations: a.max_iterations,
        input_sha256: hash_bytes(&bytes),
    };
    let c = sample.counts();
    let theta = &result.theta_hat;
    let report = FitReport {
        metadata: Metadata::new("fit", Some(a.seed), &settings),
        method: settings.method.into(),
        alpha,
        model: model.into(),
        sample: SampleSummary {
            n: c.n,
            n_classified: c.n_classified,
            n_unclassified: c.n_unclassified,
            n1_classified: c.n1_classified,
            n2_classified: c.n2_classified,
        },
        theta: ThetaDto::from(theta),
        xi: result.xi_hat.as_ref().map(MissingnessDto::from),
        discriminant: if theta.covariance().is_common() {
            Some(DiscriminantDto::from(&discriminant_from_theta(theta)?))
        } else {
            None
        },
        objective: result.final_objective(),
        objective_trace: result.objective_trace.clone(),
        iterations: result.iterations,
        converged: result.converged,
        at_variance_floor: result.at_variance_floor,
    };
    emit(a.out.as_deref(), &crate::json::to_string(&report))
}

fn load_theta(path: &Path) -> CliResult<MixtureParams> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let input_err = |message: String| CliError::Input {
        path: path.display().to_string(),
        message,
    };
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| input_err(e.to_string()))?;
    let theta = value.get("theta").cloned().unwrap_or(value);
    let dto: ThetaDto = serde_json::from_value(theta).map_err(|e| input_err(e.to_string()))?;
    dto.to_params()
}

#[derive(Serialize)]
struct EvaluateReport {
    metadata: Metadata,
    n_test: usize,
    ari: f64,
    error_rate: f64,
}

fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let theta = load_theta(&a.model)?;
    let test = read_sample_csv(&a.test)?;
    if test.counts().n_unclassified > 0 {
        return Err(CliError::Input {
            path: a.test.display().to_string(),
            message: "every test row needs a label".into(),
        });
    }
    let rule = if theta.covariance().is_common() {
        Rule::Linear(discriminant_from_theta(&theta)?)
    } else {
        Rule::Posterior(theta.clone())
    };
    let eval = evaluate_rule(&rule, &test)?;
    let model_bytes = std::fs::read(&a.model).map_err(CliError::io(&a.model))?;
    let test_bytes = std::fs::read(&a.test).map_err(CliError::io(&a.test))?;
    let inputs = [hash_bytes(&model_bytes), hash_bytes(&test_bytes)];
    let report = EvaluateReport {
        metadata: Metadata::new("evaluate", None, &inputs),
        n_test: test.len(),
        ari: eval.ari,
        error_rate: eval.error_rate,
    };
    emit(a.out.as_deref(), &crate::json::to_string(&report))
}

fn efficiency_table(
    c: &EfficiencyConfig,
) -> CliResult<(Vec<String>, Vec<Vec<String>>, Vec<Vec<f64>>)> {
    let grid = run_table1_grid(
        &c.pi1_list,
        &c.delta_list,
        c.gamma,
        &QuadratureSpec::default(),
    )?;
    let mut head = vec!["pi1".to_string()];
    head.extend(c.delta_list.iter().map(|d| format!("delta={d}")));
    let rows = grid
        .pi1
        .iter()
        .zip(&grid.values)
        .map(|(p, row)| {
            let mut r = vec![p.to_string()];
            r.extend(row.iter().map(|v| v.to_string()));
            r
        })
        .collect();
    Ok((head, rows, grid.values))
}

fn are(a: AreArgs) -> CliResult<()> {
    let config = EfficiencyConfig {
        pi1_list: a.pi1_list,
        delta_list: a.delta_list,
        gamma: a.gamma,
        out: None,
    };
    let (head, rows, _) = efficiency_table(&config)?;
    emit(a.out.as_deref(), &csv_text(&head, &rows))
}

fn asymptotic_error(a: AsymptoticErrorArgs) -> CliResult<()> {
    let optimal = std_normal_cdf(-a.delta / 2.0);
    let rows = (0..=a.kmax)
        .map(|k| {
            let inputs = ExpansionInputs {
                delta: a.delta,
                p: a.p,
                n1c: a.n1c,
                n2c: a.n2c,
                k,
            };
            Ok(vec![
                k.to_string(),
                a1_k(&inputs)?.to_string(),
                expected_error_cml(&inputs)?.to_string(),
                optimal.to_string(),
            ])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let head = header(&["k", "a1", "expected_error", "optimal_error"]);
    emit(a.out.as_deref(), &csv_text(&head, &rows))
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let mut config = match (&a.preset, &a.config) {
        (Some(name), None) => RunConfig::preset(name)?,
        (None, Some(path)) => RunConfig::load(path)?,
        _ => {
            return Err(CliError::Usage(
                "simulate needs a preset name or --config".into(),
            ))
        }
    };
    if let Some(seed) = a.seed {
        config.set_seed(seed);
    }
    if let Some(n) = a.replications {
        config.set_replications(n);
    }
    let dir = a
        .out
        .clone()
        .or_else(|| config.out().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    let resolved = config.without_paths();
    let metadata = Metadata::new(
        &format!("simulate {}", a.preset.as_deref().unwrap_or("--config")),
        resolved.seed(),
        &resolved,
    );
    let written = match &resolved {
        RunConfig::Replication(c) => simulate_replication(c, &resolved, metadata, &dir, a.svg)?,
        RunConfig::Iteration(c) => simulate_iteration(c, &resolved, metadata, &dir, a.svg)?,
        RunConfig::Efficiency(c) => simulate_efficiency(c, &resolved, metadata, &dir, a.svg)?,
    };
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, text: &str) -> CliResult<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(CliError::io(&path))?;
    Ok(path)
}

#[derive(Serialize)]
struct AggregateRow {
    method: String,
    alpha: Option<f64>,
    successes: usize,
    failures: usize,
    mean_ari: f64,
    se_ari: f64,
    mean_error: f64,
    se_error: f64,
}

#[derive(Serialize)]
struct PairedRow {
    a: String,
    b: String,
    n: usize,
    mean_difference: f64,
    standard_error: f64,
    t: f64,
    p_greater: f64,
}

#[derive(Serialize)]
struct ReplicationOutput<'a> {
    metadata: Metadata,
    config: &'a RunConfig,
    failures: usize,
    aggregates: Vec<AggregateRow>,
    paired_tests: Vec<PairedRow>,
}

fn label(method: Method, alpha: Option<f64>) -> String {
    match alpha {
        Some(a) => format!("{}(alpha={a})", method.name()),
        None => method.name().to_string(),
    }
}

fn paired_rows(report: &ReplicationReport) -> CliResult<Vec<PairedRow>> {
    let reference = (Method::Fsc, Some(0.5));
    if report.aggregate(reference.0, reference.1).is_none() {
        return Ok(Vec::new());
    }
    let mut rows = Vec::new();
    for agg in &report.aggregates {
        if agg.method == Method::Fsc {
            continue;
        }
        let (x, y) = report.paired_ari((agg.method, agg.alpha), reference);
        if x.len() < 2 {
            continue;
        }
        let t = paired_t_test(&x, &y)?;
        rows.push(PairedRow {
            a: label(agg.method, agg.alpha),
            b: label(reference.0, reference.1),
            n: t.n,
            mean_difference: t.mean_difference,
            standard_error: t.standard_error,
            t: t.t,
            p_greater: t.p_greater,
        });
    }
    Ok(rows)
}

fn simulate_replication(
    c: &ReplicationConfig,
    resolved: &RunConfig,
    metadata: Metadata,
    dir: &Path,
    svg: bool,
) -> CliResult<Vec<PathBuf>> {
    let experiment = c.to_experiment()?;
    let report = run_figure1_experiment(&experiment)?;
    let aggregates: Vec<AggregateRow> = report
        .aggregates
        .iter()
        .map(|g| AggregateRow {
            method: g.method.name().into(),
            alpha: g.alpha,
            successes: g.successes,
            failures: g.failures,
            mean_ari: g.mean_ari,
            se_ari: g.se_ari,
            mean_error: g.mean_error,
            se_error: g.se_error,
        })
        .collect();
    let curve_rows: Vec<Vec<String>> = aggregates
        .iter()
        .map(|g| {
            vec![
                g.method.clone(),
                opt(g.alpha),
                g.successes.to_string(),
                g.failures.to_string(),
                g.mean_ari.to_string(),
                g.se_ari.to_string(),
                g.mean_error.to_string(),
                g.se_error.to_string(),
            ]
        })
        .collect();
    let curve_head = header(&[
        "method",
        "alpha",
        "successes",
        "failures",
        "mean_ari",
        "se_ari",
        "mean_error",
        "se_error",
    ]);
    let p = experiment.theta_true.dim();
    let mut record_head = header(&[
        "replication",
        "method",
        "alpha",
        "seed",
        "status",
        "ari",
        "error_rate",
        "converged",
        "pi1_hat",
    ]);
    record_head.extend((1..=p).map(|k| format!("mu1_hat_{k}")));
    record_head.extend((1..=p).map(|k| format!("mu2_hat_{k}")));
    record_head.extend(header(&["xi0_hat", "xi1_hat", "message"]));
    let record_rows: Vec<Vec<String>> = report
        .records
        .iter()
        .map(|r| {
            let mut row = vec![
                r.replication.to_string(),
                r.method.name().into(),
                opt(r.alpha),
                r.seed.to_string(),
            ];
            match &r.outcome {
                Ok(f) => {
                    row.extend([
                        "ok".into(),
                        f.ari.to_string(),
                        f.error_rate.to_string(),
                        f.converged.to_string(),
                        f.theta_hat.pi1().to_string(),
                    ]);
                    row.extend(f.theta_hat.mu1().iter().map(|v| v.to_string()));
                    row.extend(f.theta_hat.mu2().iter().map(|v| v.to_string()));
                    row.push(opt(f.xi_hat.map(|x| x.xi0)));
                    row.push(opt(f.xi_hat.map(|x| x.xi1)));
                    row.push(String::new());
                }
                Err(message) => {
                    row.push("failed".into());
                    row.extend(std::iter::repeat_n(String::new(), 4 + 2 * p + 2));
                    row.push(message.clone());
                }
            }
            row
        })
        .collect();
    let output = ReplicationOutput {
        metadata,
        config: resolved,
        failures: report.failures,
        paired_tests: paired_rows(&report)?,
        aggregates,
    };
    let mut written = vec![
        write_file(dir, "report.json", &crate::json::to_string(&output))?,
        write_file(dir, "curve.csv", &csv_text(&curve_head, &curve_rows))?,
        write_file(dir, "records.csv", &csv_text(&record_head, &record_rows))?,
    ];
    if svg {
        let fsc: Vec<(f64, f64)> = output
            .aggregates
            .iter()
            .filter_map(|g| g.alpha.map(|a| (a, g.mean_ari)))
            .collect();
        let (lo, hi) = fsc
            .iter()
            .fold((0.0f64, 1.0f64), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
        let mut series = vec![Series {
            name: "fsc".into(),
            points: fsc,
            dashed: false,
        }];
        for g in output.aggregates.iter().filter(|g| g.alpha.is_none()) {
            series.push(Series {
                name: g.method.clone(),
                points: vec![(lo, g.mean_ari), (hi, g.mean_ari)],
                dashed: true,
            });
        }
        let plot = line_plot("Mean test ARI", "alpha", "ARI", &series);
        written.push(write_file(dir, "curve.svg", &plot)?);
    }
    Ok(written)
}

#[derive(Serialize)]
struct IterationOutput<'a> {
    metadata: Metadata,
    config: &'a RunConfig,
    failures: usize,
    k: Vec<usize>,
    mean_error: Vec<f64>,
    se_error: Vec<f64>,
    expected_error: Vec<f64>,
    optimal_error: f64,
    first_step: Option<PairedRow>,
}

fn simulate_iteration(
    c: &IterationConfig,
    resolved: &RunConfig,
    metadata: Metadata,
    dir: &Path,
    svg: bool,
) -> CliResult<Vec<PathBuf>> {
    let experiment = c.to_experiment()?;
    let report = run_eq2_experiment(&experiment, c.k_max, c.known_priors)?;
    let delta = semisup_core::mahalanobis_delta(&experiment.theta_true)?;
    let ks: Vec<usize> = (0..=c.k_max).collect();
    let first_step = if c.k_max >= 1 && report.per_replication.len() >= 2 {
        let e0: Vec<f64> = report.per_replication.iter().map(|r| r[0]).collect();
        let e1: Vec<f64> = report.per_replication.iter().map(|r| r[1]).collect();
        let t = paired_t_test(&e0, &e1)?;
        Some(PairedRow {
            a: "k=0".into(),
            b: "k=1".into(),
            n: t.n,
            mean_difference: t.mean_difference,
            standard_error: t.standard_error,
            t: t.t,
            p_greater: t.p_greater,
        })
    } else {
        None
    };
    let curve_rows: Vec<Vec<String>> = ks
        .iter()
        .map(|&k| {
            vec![
                k.to_string(),
                report.mean[k].to_string(),
                report.se[k].to_string(),
                report.analytic[k].to_string(),
            ]
        })
        .collect();
    let mut rep_head = vec!["replication".to_string()];
    rep_head.extend(ks.iter().map(|k| format!("k{k}")));
    let rep_rows: Vec<Vec<String>> = report
        .replication_index
        .iter()
        .zip(&report.per_replication)
        .map(|(i, row)| {
            let mut r = vec![i.to_string()];
            r.extend(row.iter().map(|v| v.to_string()));
            r
        })
        .collect();
    let output = IterationOutput {
        metadata,
        config: resolved,
        failures: report.failures,
        k: ks.clone(),
        mean_error: report.mean.clone(),
        se_error: report.se.clone(),
        expected_error: report.analytic.clone(),
        optimal_error: std_normal_cdf(-delta / 2.0),
        first_step,
    };
    let mut written = vec![
        write_file(dir, "report.json", &crate::json::to_string(&output))?,
        write_file(
            dir,
            "curve.csv",
            &csv_text(
                &header(&["k", "mean_error", "se_error", "expected_error"]),
                &curve_rows,
            ),
        )?,
        write_file(dir, "replications.csv", &csv_text(&rep_head, &rep_rows))?,
    ];
    if svg {
        let xs = ks.iter().map(|&k| k as f64);
        let series = [
            Series {
                name: "Monte Carlo mean".into(),
                points: xs.clone().zip(report.mean.iter().copied()).collect(),
                dashed: false,
            },
            Series {
                name: "expansion".into(),
                points: xs.clone().zip(report.analytic.iter().copied()).collect(),
                dashed: true,
            },
            Series {
                name: "optimal".into(),
                points: vec![
                    (0.0, output.optimal_error),
                    (c.k_max as f64, output.optimal_error),
                ],
                dashed: true,
            },
        ];
        let plot = line_plot("Error rate by iteration", "k", "error rate", &series);
        written.push(write_file(dir, "curve.svg", &plot)?);
    }
    Ok(written)
}

#[derive(Serialize)]
struct EfficiencyOutput<'a> {
    metadata: Metadata,
    config: &'a RunConfig,
    pi1: &'a [f64],
    delta: &'a [f64],
    gamma: f64,
    values: Vec<Vec<f64>>,
}

fn simulate_efficiency(
    c: &EfficiencyConfig,
    resolved: &RunConfig,
    metadata: Metadata,
    dir: &Path,
    svg: bool,
) -> CliResult<Vec<PathBuf>> {
    let (head, rows, values) = efficiency_table(c)?;
    let output = EfficiencyOutput {
        metadata,
        config: resolved,
        pi1: &c.pi1_list,
        delta: &c.delta_list,
        gamma: c.gamma,
        values,
    };
    let mut written = vec![
        write_file(dir, "report.json", &crate::json::to_string(&output))?,
        write_file(dir, "table.csv", &csv_text(&head, &rows))?,
    ];
    if svg {
        let series: Vec<Series> = c
            .pi1_list
            .iter()
            .zip(&output.values)
            .map(|(p, row)| Series {
                name: format!("pi1={p}"),
                points: c
                    .delta_list
                    .iter()
                    .copied()
                    .zip(row.iter().copied())
                    .collect(),
                dashed: false,
            })
            .collect();
        let plot = line_plot("Asymptotic relative efficiency", "delta", "ARE", &series);
        written.push(write_file(dir, "curve.svg", &plot)?);
    }
    Ok(written)
}
