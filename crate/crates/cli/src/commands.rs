//! Subcommand implementations: merge flags over the config, run, serialize.

use anyhow::{bail, Context};
use inexact_core::adversary::PermutationGroup;
use inexact_core::allocators::{
    comparison_allocation, number_staircase_allocation, optimize_allocation, shifted_staircase,
    staircase_allocation, uniform_allocation, AllocationObjective, Objective,
};
use inexact_core::decoders::{error_report, ErrorReport};
use inexact_core::metrics::{default_budget_grid, input_errors, mobs, probe_rows};
use inexact_core::noise::energy_probability_curve;
use inexact_core::problems::{format_bit_string, parse_bit_string, ProblemKind};
use inexact_core::{
    build_problem, truth_table, BooleanProblem, Decoder, DecoderStrategy, EnergyVector, Estimate, GroupSpec,
    Method, MobsConfig, MobsResult, OptimizerSettings, ProblemSpec, Quality, QualityMetric,
};
use serde::Serialize;

use crate::config::{
    group_spec, parse_generators, AllocationName, ExperimentConfig, Format, ModeName, ObjectiveName,
    AUTO_EXACT_BITS,
};
use crate::output::{csv_document, emit, json_document, number};
use crate::{
    AllocateArgs, ChannelArgs, Command, CommonArgs, CurveArgs, DecoderName, EvalArgs, MethodName, MetricArgs,
    MetricName, MobsArgs, ModeArgs, SimulateArgs, Table2Args,
};

pub(crate) enum Outcome {
    Done,
    /// Output was written but an iterative search stopped at its cap.
    NotConverged,
}

pub(crate) fn run(command: Command) -> anyhow::Result<Outcome> {
    match command {
        Command::Eval(args) => eval(args),
        Command::Simulate(args) => simulate(args),
        Command::Allocate(args) => allocate(args),
        Command::Mobs(args) => mobs_command(args),
        Command::Curve(args) => curve(args),
        Command::Table2(args) => table2(args),
    }
}

fn base_config(common: &CommonArgs) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if common.output.is_some() {
        config.output = common.output.clone();
    }
    config.format = common.format.or(config.format);
    config.seed = common.seed.or(config.seed);
    Ok(config)
}

fn apply_mode(config: &mut ExperimentConfig, args: &ModeArgs) {
    config.mode = args.mode.or(config.mode);
    config.samples = args.samples.or(config.samples);
}

fn apply_metric(config: &mut ExperimentConfig, args: &MetricArgs) -> anyhow::Result<()> {
    if let Some(name) = args.metric {
        config.metric = Some(match name {
            MetricName::WorstCase => QualityMetric::WorstCaseCorrectness,
            MetricName::ExpectedError => QualityMetric::ReciprocalExpectedError,
            MetricName::Comparison => QualityMetric::ComparisonWeighted,
            MetricName::Sorting => QualityMetric::SortingWeighted { instance: None },
        });
    }
    if let Some(values) = &args.instance {
        match &mut config.metric {
            Some(QualityMetric::SortingWeighted { instance }) => *instance = Some(values.clone()),
            _ => bail!("--instance applies to the sorting metric only"),
        }
    }
    Ok(())
}

fn apply_channel(config: &mut ExperimentConfig, args: &ChannelArgs, n: usize) -> anyhow::Result<()> {
    if args.energies.is_some() {
        config.energies = args.energies.clone();
    }
    if args.allocation.is_some() {
        config.allocation = args.allocation;
        if args.energies.is_none() {
            config.energies = None;
        }
    }
    config.budget = args.budget.or(config.budget);
    if let Some(name) = args.group {
        let generators = match &args.generators {
            Some(text) => parse_generators(text)?,
            None => Vec::new(),
        };
        config.group = Some(group_spec(name, n, generators));
    } else if args.generators.is_some() {
        bail!("--generators needs --group generated");
    }
    match args.decoder {
        Some(DecoderName::Identity) => config.decoder = Some(DecoderStrategy::Identity),
        Some(DecoderName::Map) => {
            if !matches!(config.decoder, Some(DecoderStrategy::Map { .. })) {
                config.decoder = Some(DecoderStrategy::map_uniform());
            }
        }
        None => {}
    }
    Ok(())
}

fn problem_of(config: &mut ExperimentConfig, args: &crate::config::ProblemArgs) -> anyhow::Result<BooleanProblem> {
    config.problem = args.merge(config.problem.take())?;
    Ok(build_problem(config.problem()?)?)
}

fn energy_vector(config: &ExperimentConfig, problem: &BooleanProblem) -> anyhow::Result<EnergyVector> {
    let n = problem.n();
    let evec = if let Some(entries) = &config.energies {
        match config.budget {
            Some(budget) => EnergyVector::new(entries.clone(), budget)?,
            None => EnergyVector::from_entries(entries.clone())?,
        }
    } else {
        let shape = match config.allocation.unwrap_or(AllocationName::Uniform) {
            AllocationName::Uniform => {
                let budget = config.budget.context("--budget is required for the uniform allocation")?;
                return Ok(uniform_allocation(budget, n)?);
            }
            AllocationName::Staircase => staircase_allocation(n)?,
            AllocationName::Comparison => match problem.kind() {
                ProblemKind::Comparison { k } => comparison_allocation(*k)?,
                _ => bail!("the comparison allocation needs a comparison problem"),
            },
            AllocationName::NumberStaircase => match problem.kind() {
                ProblemKind::Comparison { k } => number_staircase_allocation(2, *k)?,
                ProblemKind::Sorting { count, k } => number_staircase_allocation(*count, *k)?,
                _ => bail!("the number staircase needs a comparison or sorting problem"),
            },
        };
        match config.budget {
            Some(budget) => shifted_staircase(shape.entries(), budget)?,
            None => shape,
        }
    };
    if evec.len() != n {
        bail!("{} energies given for a problem on {n} bits", evec.len());
    }
    Ok(evec)
}

fn group_of(config: &ExperimentConfig, n: usize) -> anyhow::Result<PermutationGroup> {
    match &config.group {
        Some(spec) => {
            if spec.n != n {
                bail!("group acts on {} bits but the problem has {n}", spec.n);
            }
            Ok(PermutationGroup::from_spec(spec)?)
        }
        None => Ok(PermutationGroup::identity(n)),
    }
}

fn metric_of(config: &ExperimentConfig) -> QualityMetric {
    config.metric.clone().unwrap_or(QualityMetric::WorstCaseCorrectness)
}

fn mode_name(mode: inexact_core::Mode) -> &'static str {
    match mode {
        inexact_core::Mode::Exact => "exact",
        inexact_core::Mode::MonteCarlo { .. } => "monte_carlo",
    }
}

#[derive(Serialize)]
struct EvalResult {
    problem: ProblemSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    bits: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outputs: Option<Vec<i64>>,
}

fn eval(args: EvalArgs) -> anyhow::Result<Outcome> {
    let mut config = base_config(&args.common)?;
    let problem = problem_of(&mut config, &args.problem)?;
    if args.bits.is_some() {
        config.bits = args.bits.clone();
    }
    let n = problem.n();
    let format = config.format.unwrap_or(if config.output.is_some() { Format::Json } else { Format::Text });
    let text = match &config.bits {
        Some(bits) => {
            let parsed = parse_bit_string(bits)?;
            if parsed.len() != n {
                bail!("{} bits given for a problem on {n} bits", parsed.len());
            }
            let value = problem.evaluate(&parsed)?;
            match format {
                Format::Text => format!("{value}\n"),
                Format::Csv => csv_document("eval", &config, &["bits", "value"], &[vec![bits.clone(), value.to_string()]])?,
                Format::Json => {
                    let result =
                        EvalResult { problem: problem.spec(), bits: Some(bits.clone()), value: Some(value), outputs: None };
                    json_document("eval", &config, result)?
                }
            }
        }
        None => {
            let table = truth_table(&problem)?;
            match format {
                Format::Text => table.to_csv_string(),
                Format::Csv => {
                    let rows: Vec<Vec<String>> = (0..problem.rows())
                        .map(|row| vec![format_bit_string(row, n), table.output(row).to_string()])
                        .collect();
                    csv_document("eval", &config, &["bits", "value"], &rows)?
                }
                Format::Json => {
                    let result =
                        EvalResult { problem: problem.spec(), bits: None, value: None, outputs: Some(table.outputs().to_vec()) };
                    json_document("eval", &config, result)?
                }
            }
        }
    };
    emit(&config, &text)?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct SimulateResult {
    problem: ProblemSpec,
    energies: EnergyVector,
    group: GroupSpec,
    decoder: DecoderStrategy,
    report: ErrorReport,
    worst_error: f64,
    quality: Quality,
    metric: QualityMetric,
    metric_errors: Vec<Estimate>,
    metric_quality: Quality,
}

fn simulate(args: SimulateArgs) -> anyhow::Result<Outcome> {
    let mut config = base_config(&args.common)?;
    let problem = problem_of(&mut config, &args.problem)?;
    let n = problem.n();
    apply_channel(&mut config, &args.channel, n)?;
    apply_metric(&mut config, &args.metric)?;
    apply_mode(&mut config, &args.mode);
    if args.rows.is_some() {
        config.rows = args.rows.clone();
    }
    config.resolve_mode(n);
    let evec = energy_vector(&config, &problem)?;
    let group = group_of(&config, n)?;
    let strategy = config.decoder.clone().unwrap_or(DecoderStrategy::Identity);
    let metric = metric_of(&config);
    metric.validate(&problem)?;
    metric.check_decoder(&strategy)?;
    let rows = match &config.rows {
        Some(rows) => rows.clone(),
        None if matches!(metric, QualityMetric::SortingWeighted { instance: Some(_) }) => metric.rows(&problem)?,
        None if n <= AUTO_EXACT_BITS => (0..problem.rows()).collect(),
        None => probe_rows(&problem),
    };
    let mode = config.core_mode();
    let decoder = Decoder::build(&problem, &strategy, &evec, &group)?;
    let report = error_report(&decoder, &evec, &group, &rows, mode)?;
    let metric_errors = input_errors(&decoder, &evec, &group, &metric, &rows, mode)?;
    let metric_quality = Quality::from_error(metric_errors.iter().map(|e| e.value).fold(0.0, f64::max));
    let text = match config.format.unwrap_or(Format::Json) {
        Format::Json => {
            let result = SimulateResult {
                problem: problem.spec(),
                energies: evec,
                group: group.spec(),
                decoder: strategy,
                worst_error: report.worst_error(),
                quality: report.quality(),
                report,
                metric,
                metric_errors,
                metric_quality,
            };
            json_document("simulate", &config, result)?
        }
        Format::Csv => {
            let body: Vec<Vec<String>> = report
                .per_input
                .iter()
                .zip(&metric_errors)
                .map(|(e, m)| {
                    vec![
                        e.row.to_string(),
                        format_bit_string(e.row, n),
                        number(e.p_err),
                        e.std_err.map(number).unwrap_or_default(),
                        number(m.value),
                        m.std_error.map(number).unwrap_or_default(),
                    ]
                })
                .collect();
            let header = ["row", "bits", "p_err", "std_err", "metric_error", "metric_std_err"];
            csv_document("simulate", &config, &header, &body)?
        }
        Format::Text => format!(
            "mode = {}\nworst error = {}\nquality = {}\n{} quality = {}\n",
            mode_name(mode),
            number(report.worst_error()),
            report.quality(),
            metric.name(),
            metric_quality
        ),
    };
    emit(&config, &text)?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct AllocateResult {
    objective: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    problem: Option<ProblemSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metric: Option<QualityMetric>,
    allocation: inexact_core::Allocation,
}

fn allocate(args: AllocateArgs) -> anyhow::Result<Outcome> {
    let mut config = base_config(&args.common)?;
    config.objective = args.objective.or(config.objective);
    let variance_only = config.objective == Some(ObjectiveName::UeVariance) && args.problem.problem.is_none();
    if !variance_only {
        config.problem = args.problem.merge(config.problem.take())?;
    }
    config.method = args.method.map(|m| match m {
        MethodName::Grid => Method::Grid,
        MethodName::CoordinateDescent => Method::CoordinateDescent,
    });
    config.method = config.method.or(Some(Method::CoordinateDescent));
    config.resolution = args.resolution.or(config.resolution);
    config.max_iterations = args.max_iterations.or(config.max_iterations);
    let objective_name = config.objective.unwrap_or(ObjectiveName::Metric);
    let (objective, problem) = match objective_name {
        ObjectiveName::UeVariance => {
            let n = match (args.problem.n.or(config.n), &config.problem) {
                (Some(n), _) => n,
                (None, Some(spec)) => build_problem(spec)?.n(),
                (None, None) => bail!("--n is required for the variance objective"),
            };
            config.n = Some(n);
            apply_channel(&mut config, &args.channel, n)?;
            (Objective::UeVariance { n }, None)
        }
        ObjectiveName::Metric => {
            let problem = build_problem(config.problem()?)?;
            let n = problem.n();
            apply_channel(&mut config, &args.channel, n)?;
            apply_metric(&mut config, &args.metric)?;
            let objective = AllocationObjective {
                problem: problem.clone(),
                metric: metric_of(&config),
                decoder: config.decoder.clone().unwrap_or(DecoderStrategy::Identity),
                group: group_of(&config, n)?,
            };
            (Objective::Quality(objective), Some(problem))
        }
    };
    let budget = config.budget.context("--budget is required")?;
    let defaults = OptimizerSettings::default();
    let settings = OptimizerSettings {
        resolution: config.resolution.unwrap_or(defaults.resolution),
        max_iterations: config.max_iterations.unwrap_or(defaults.max_iterations),
        ..defaults
    };
    let method = config.method.expect("set above");
    let allocation = optimize_allocation(&objective, budget, method, &settings)?;
    let converged = allocation.converged;
    let text = match config.format.unwrap_or(Format::Json) {
        Format::Json => {
            let result = AllocateResult {
                objective: match objective_name {
                    ObjectiveName::Metric => "metric",
                    ObjectiveName::UeVariance => "ue_variance",
                },
                problem: problem.as_ref().map(BooleanProblem::spec),
                metric: problem.as_ref().map(|_| metric_of(&config)),
                allocation,
            };
            json_document("allocate", &config, result)?
        }
        Format::Csv => {
            let body: Vec<Vec<String>> = allocation
                .evec
                .entries()
                .iter()
                .enumerate()
                .map(|(j, e)| vec![j.to_string(), number(*e)])
                .collect();
            csv_document("allocate", &config, &["bit", "energy"], &body)?
        }
        Format::Text => format!(
            "energies = [{}]\nobjective = {}\nconverged = {}\n",
            allocation.evec.entries().iter().map(|e| number(*e)).collect::<Vec<_>>().join(", "),
            number(allocation.objective_value),
            allocation.converged
        ),
    };
    emit(&config, &text)?;
    Ok(if converged { Outcome::Done } else { Outcome::NotConverged })
}

fn mobs_config(config: &ExperimentConfig, n: usize) -> MobsConfig {
    let mut decoders = vec![DecoderStrategy::Identity];
    if config.map_champion == Some(true) {
        decoders.push(DecoderStrategy::map_uniform());
    }
    let mode = match config.mode {
        Some(_) => config.core_mode(),
        None => MobsConfig::auto(n, config.samples(), config.seed()).mode,
    };
    MobsConfig {
        mode,
        max_iterations: config.max_iterations.unwrap_or(MobsConfig::default().max_iterations),
        decoders,
        probe_rows: config.rows.clone(),
        ..MobsConfig::default()
    }
}

fn mobs_command(args: MobsArgs) -> anyhow::Result<Outcome> {
    let mut config = base_config(&args.common)?;
    let problem = problem_of(&mut config, &args.problem)?;
    let n = problem.n();
    apply_metric(&mut config, &args.metric)?;
    apply_mode(&mut config, &args.mode);
    if args.budgets.is_some() {
        config.budgets = args.budgets.clone();
    }
    if args.map_champion {
        config.map_champion = Some(true);
    }
    config.max_iterations = args.max_iterations.or(config.max_iterations);
    config.resolve_mode(n);
    let budgets = config.budgets.clone().unwrap_or_else(|| default_budget_grid(n));
    let metric = metric_of(&config);
    let result = mobs(&problem, &budgets, &metric, &mobs_config(&config, n))?;
    let converged = result.converged();
    let text = match config.format.unwrap_or(Format::Json) {
        Format::Json => json_document("mobs", &config, &result)?,
        Format::Csv => {
            let body: Vec<Vec<String>> = result
                .per_budget
                .iter()
                .map(|b| {
                    vec![
                        number(b.budget),
                        number(b.clairvoyant.worst_error),
                        number(b.blindfolded.worst_error),
                        number(b.ratio),
                        number(b.quality_ratio),
                        b.converged.to_string(),
                    ]
                })
                .collect();
            let header = ["budget", "clairvoyant_error", "blindfolded_error", "ratio", "quality_ratio", "converged"];
            csv_document("mobs", &config, &header, &body)?
        }
        Format::Text => format!(
            "problem = {}\nmetric = {}\nmode = {}\nmobs = {}\ninput_mobs = {}\nquality_mobs = {}\nconverged = {}\n",
            problem,
            metric.name(),
            mode_name(result.mode),
            number(result.mobs),
            number(result.input_mobs),
            number(result.quality_mobs),
            converged
        ),
    };
    emit(&config, &text)?;
    Ok(if converged { Outcome::Done } else { Outcome::NotConverged })
}

fn curve(args: CurveArgs) -> anyhow::Result<Outcome> {
    let mut config = base_config(&args.common)?;
    config.sigma = args.sigma.or(config.sigma).or(Some(1.0));
    let sigma = config.sigma.expect("set above");
    if args.vdd.is_some() {
        config.vdd = args.vdd.clone();
    }
    let vdds = config.vdd.clone().unwrap_or_else(|| (0..=100).map(|i| i as f64 * sigma / 10.0).collect());
    let points = energy_probability_curve(sigma, &vdds)?;
    let text = match config.format.unwrap_or(Format::Csv) {
        Format::Json => json_document("curve", &config, &points)?,
        Format::Csv | Format::Text => {
            let body: Vec<Vec<String>> =
                points.iter().map(|p| vec![number(p.vdd), number(p.sigma), number(p.p)]).collect();
            csv_document("curve", &config, &["vdd", "sigma", "p"], &body)?
        }
    };
    emit(&config, &text)?;
    Ok(Outcome::Done)
}

/// Problems and metrics of the summary table at input size `n`.
fn table2_entries(n: usize) -> anyhow::Result<Vec<(ProblemSpec, QualityMetric)>> {
    let mut entries = vec![
        (ProblemSpec::Or { n }, QualityMetric::WorstCaseCorrectness),
        (ProblemSpec::Ue { n }, QualityMetric::WorstCaseCorrectness),
        (ProblemSpec::Be { n }, QualityMetric::ReciprocalExpectedError),
    ];
    if n % 2 == 0 {
        entries.push((ProblemSpec::Comparison { k: n / 2 }, QualityMetric::ComparisonWeighted));
        entries.push((ProblemSpec::Sorting { count: 2, k: n / 2 }, QualityMetric::SortingWeighted { instance: None }));
    } else {
        eprintln!("table2: n = {n} is odd; skipping comparison and sorting");
    }
    Ok(entries)
}

#[derive(Serialize)]
struct Table2Row {
    n: usize,
    result: MobsResult,
}

fn table2(args: Table2Args) -> anyhow::Result<Outcome> {
    let mut config = base_config(&args.common)?;
    apply_mode(&mut config, &args.mode);
    if args.sizes.is_some() {
        config.sizes = args.sizes.clone();
    }
    if args.map_champion {
        config.map_champion = Some(true);
    }
    config.max_iterations = args.max_iterations.or(config.max_iterations);
    config.seed.get_or_insert(0);
    if config.mode == Some(ModeName::MonteCarlo) || config.mode.is_none() {
        config.samples.get_or_insert(crate::config::DEFAULT_SAMPLES);
    }
    let sizes = config.sizes.clone().unwrap_or_else(|| vec![4, 6, 8]);
    let mut rows = Vec::new();
    for &n in &sizes {
        for (spec, metric) in table2_entries(n)? {
            let problem = build_problem(&spec)?;
            eprintln!("table2: {problem} ({})", metric.name());
            let budgets = config.budgets.clone().unwrap_or_else(|| default_budget_grid(problem.n()));
            let result = mobs(&problem, &budgets, &metric, &mobs_config(&config, problem.n()))?;
            rows.push(Table2Row { n, result });
        }
    }
    let converged = rows.iter().all(|r| r.result.converged());
    let text = match config.format.unwrap_or(Format::Csv) {
        Format::Json => json_document("table2", &config, &rows)?,
        Format::Csv | Format::Text => {
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        build_problem(&r.result.problem).map(|p| p.name()).unwrap_or("custom").to_string(),
                        r.n.to_string(),
                        r.result.metric.name().to_string(),
                        number(r.result.mobs),
                        mode_name(r.result.mode).to_string(),
                        r.result.converged().to_string(),
                    ]
                })
                .collect();
            csv_document("table2", &config, &["problem", "n", "metric", "mobs", "mode", "converged"], &body)?
        }
    };
    emit(&config, &text)?;
    Ok(if converged { Outcome::Done } else { Outcome::NotConverged })
}
