//! Quality metrics and the measure of broken symmetry (MoBS).
//!
//! Every metric is phrased as a per-input error `err_i >= 0` with quality
//! `1 / max_i err_i`. MoBS compares the best clairvoyant algorithm found
//! (any energy vector, identity permutation) with the blindfolded one
//! (uniform vector, permutation drawn from `S_n`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::PermutationGroup;
use crate::allocators::{
    optimize_allocation, shifted_staircase, uniform_allocation, AllocationObjective, Method, Objective,
    OptimizerSettings,
};
use crate::decoders::{inf_as_string, monte_carlo_expectation, Decoder, DecoderStrategy, Estimate, Mode, Quality};
use crate::error::{invalid, Error, Result};
use crate::kernel::FlipKernel;
use crate::noise::{EnergyVector, MAX_EXACT_BITS};
use crate::problems::{pack_numbers, unpack_numbers, BooleanProblem, ProblemKind, ProblemSpec};
use crate::rng::{derive_seed, seeded};

/// Largest `n` for which MoBS is computed exactly over all inputs.
pub const MAX_EXACT_MOBS_BITS: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QualityMetric {
    /// `min_i 1 / Pr{wrong output on input i}`.
    WorstCaseCorrectness,
    /// `1 / max_i E|f(i) - f'(i)|`.
    ReciprocalExpectedError,
    /// `min_{x != y} 1 / (|x - y| Pr{x and y compared wrongly})`.
    ComparisonWeighted,
    /// One over the magnitude-weighted count of misordered pairs.
    ///
    /// Evaluated on `instance` (the `count` numbers to sort) when given,
    /// otherwise on the worst input.
    SortingWeighted {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        instance: Option<Vec<u64>>,
    },
}

impl QualityMetric {
    pub fn name(&self) -> &'static str {
        match self {
            QualityMetric::WorstCaseCorrectness => "worst_case_correctness",
            QualityMetric::ReciprocalExpectedError => "reciprocal_expected_error",
            QualityMetric::ComparisonWeighted => "comparison_weighted",
            QualityMetric::SortingWeighted { .. } => "sorting_weighted",
        }
    }

    pub fn validate(&self, problem: &BooleanProblem) -> Result<()> {
        match (self, problem.kind()) {
            (QualityMetric::ComparisonWeighted, ProblemKind::Comparison { .. }) => Ok(()),
            (QualityMetric::ComparisonWeighted, _) => Err(Error::MetricMismatch(format!(
                "comparison-weighted quality needs a comparison problem, not {problem}"
            ))),
            (QualityMetric::SortingWeighted { instance }, ProblemKind::Sorting { count, k }) => {
                if let Some(values) = instance {
                    if values.len() != *count || values.iter().any(|&v| v >> k != 0) {
                        return Err(invalid(format!("sorting instance must hold {count} numbers of {k} bits")));
                    }
                }
                Ok(())
            }
            (QualityMetric::SortingWeighted { .. }, _) => Err(Error::MetricMismatch(format!(
                "sorting-weighted quality needs a sorting problem, not {problem}"
            ))),
            _ => Ok(()),
        }
    }

    /// Checks that `strategy` produces outputs this metric can score.
    ///
    /// The sorting metric inspects the pairwise order of the read numbers,
    /// which only the identity decoder exposes.
    pub fn check_decoder(&self, strategy: &DecoderStrategy) -> Result<()> {
        match (self, strategy) {
            (QualityMetric::SortingWeighted { .. }, DecoderStrategy::Map { .. }) => Err(Error::MetricMismatch(
                "sorting-weighted quality is defined for the identity decoder only".into(),
            )),
            _ => Ok(()),
        }
    }

    /// The input rows the metric ranges over.
    pub fn rows(&self, problem: &BooleanProblem) -> Result<Vec<u64>> {
        self.validate(problem)?;
        match self {
            QualityMetric::SortingWeighted { instance: Some(values) } => {
                let k = match problem.kind() {
                    ProblemKind::Sorting { k, .. } => *k,
                    _ => unreachable!("validated above"),
                };
                Ok(vec![pack_numbers(values, k)])
            }
            _ => {
                if problem.n() > MAX_EXACT_BITS {
                    return Err(crate::error::too_large(format!(
                        "ranging over all 2^{} inputs exceeds the {MAX_EXACT_BITS}-bit guard",
                        problem.n()
                    )));
                }
                Ok((0..problem.rows()).collect())
            }
        }
    }
}

/// `sum_{l1 < l2} |x_l1 - x_l2| [read order of the pair disagrees with the true order]`.
///
/// A pair of distinct numbers read as equal counts as misordered.
pub fn misordered_weight(truth: &[u64], read: &[u64]) -> f64 {
    let mut total = 0.0;
    for a in 0..truth.len() {
        for b in a + 1..truth.len() {
            let (x, y) = (truth[a], truth[b]);
            if x != y && x.cmp(&y) != read[a].cmp(&read[b]) {
                total += x.abs_diff(y) as f64;
            }
        }
    }
    total
}

/// The per-observation statistic whose expectation is the error of `row` under `metric`.
fn row_statistic<'a>(
    decoder: &'a Decoder,
    metric: &QualityMetric,
    row: u64,
) -> Box<dyn Fn(u64) -> f64 + Sync + 'a> {
    let problem = decoder.problem();
    let want = problem.evaluate_row(row);
    match metric {
        QualityMetric::WorstCaseCorrectness => Box::new(move |o| (decoder.decode(o) != want) as u8 as f64),
        QualityMetric::ReciprocalExpectedError => Box::new(move |o| (want - decoder.decode(o)).abs() as f64),
        QualityMetric::ComparisonWeighted => {
            let ops = problem.operands(row).expect("validated comparison problem");
            let weight = ops[0].abs_diff(ops[1]) as f64;
            Box::new(move |o| if decoder.decode(o) != want { weight } else { 0.0 })
        }
        QualityMetric::SortingWeighted { .. } => {
            let (count, k) = match problem.kind() {
                ProblemKind::Sorting { count, k } => (*count, *k),
                _ => unreachable!("validated sorting problem"),
            };
            let truth = unpack_numbers(row, count, k);
            Box::new(move |o| misordered_weight(&truth, &unpack_numbers(o, count, k)))
        }
    }
}

/// Per-input errors of `decoder` under `metric` for the listed rows.
///
/// Monte Carlo runs derive one seed per row from the mode's seed.
pub fn input_errors(
    decoder: &Decoder,
    evec: &EnergyVector,
    group: &PermutationGroup,
    metric: &QualityMetric,
    rows: &[u64],
    mode: Mode,
) -> Result<Vec<Estimate>> {
    let problem = decoder.problem();
    metric.validate(problem)?;
    metric.check_decoder(decoder.strategy())?;
    evec.check_len(problem.n())?;
    if group.n() != problem.n() {
        return Err(invalid("group size does not match the problem"));
    }
    if let Some(row) = rows.iter().find(|&&r| r >= problem.rows()) {
        return Err(invalid(format!("row {row} out of range for n = {}", problem.n())));
    }
    match mode {
        Mode::Exact => {
            let kernel = FlipKernel::new(evec, group)?;
            let weights = kernel.weights();
            Ok(rows
                .par_iter()
                .map(|&row| {
                    let stat = row_statistic(decoder, metric, row);
                    let value = weights
                        .iter()
                        .enumerate()
                        .filter(|(_, w)| **w > 0.0)
                        .map(|(d, w)| w * stat(row ^ d as u64))
                        .sum::<f64>();
                    let value = match metric {
                        QualityMetric::WorstCaseCorrectness => value.min(1.0),
                        _ => value,
                    };
                    Estimate::exact(value)
                })
                .collect())
        }
        Mode::MonteCarlo { samples, seed } => rows
            .iter()
            .map(|&row| {
                let stat = row_statistic(decoder, metric, row);
                monte_carlo_expectation(evec, group, samples, derive_seed(seed, row), |d| stat(row ^ d))
            })
            .collect(),
    }
}

/// Quality of `decoder` under `metric` over every row the metric ranges over.
pub fn quality(
    decoder: &Decoder,
    evec: &EnergyVector,
    group: &PermutationGroup,
    metric: &QualityMetric,
    mode: Mode,
) -> Result<Quality> {
    let rows = metric.rows(decoder.problem())?;
    let errors = input_errors(decoder, evec, group, metric, &rows, mode)?;
    Ok(Quality::from_error(errors.iter().map(|e| e.value).fold(0.0, f64::max)))
}

/// Probability that comparison reads `x` and `y` with the wrong sign.
pub fn pair_wrong_probability(
    problem: &BooleanProblem,
    evec: &EnergyVector,
    group: &PermutationGroup,
    x: u64,
    y: u64,
    mode: Mode,
) -> Result<f64> {
    let k = match problem.kind() {
        ProblemKind::Comparison { k } => *k,
        _ => return Err(Error::MetricMismatch(format!("{problem} is not a comparison problem"))),
    };
    if x >> k != 0 || y >> k != 0 {
        return Err(invalid(format!("operands must fit in {k} bits")));
    }
    let row = pack_numbers(&[x, y], k);
    let errors = input_errors(
        &Decoder::identity(problem),
        evec,
        group,
        &QualityMetric::WorstCaseCorrectness,
        &[row],
        mode,
    )?;
    Ok(errors[0].value)
}

/// `(n/2, 2^((n-3)/2))`: the staircase expected error and the uniform lower bound for BE.
pub fn be_analytic_bounds(n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    Ok((n as f64 / 2.0, ((n as f64 - 3.0) / 2.0).exp2()))
}

/// The expensive-pairs lower bound for sorting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SortingBound {
    /// `2^((k-1)/2)`.
    pub ratio: f64,
    /// `L/2` copies of `2^(k-1)` followed by `L/2` zeros.
    pub instance: Vec<u64>,
}

pub fn sorting_mobs_bound(count: usize, k: usize) -> Result<SortingBound> {
    if count == 0 || count % 2 != 0 {
        return Err(invalid(format!("the number count must be even and positive, got {count}")));
    }
    if k == 0 || k > 62 {
        return Err(invalid(format!("k must be in 1..=62, got {k}")));
    }
    let high = 1u64 << (k - 1);
    let mut instance = vec![high; count / 2];
    instance.extend(std::iter::repeat_n(0, count / 2));
    Ok(SortingBound { ratio: ((k as f64 - 1.0) / 2.0).exp2(), instance })
}

/// `{n, n(n+1)/4, n(n+1)/2, n(n+1)}` without duplicates.
pub fn default_budget_grid(n: usize) -> Vec<f64> {
    let n = n as f64;
    let mut grid = vec![n, n * (n + 1.0) / 4.0, n * (n + 1.0) / 2.0, n * (n + 1.0)];
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobsConfig {
    pub mode: Mode,
    /// Run the clairvoyant allocation search (exact mode, `n <= 10`).
    pub optimize: bool,
    pub max_iterations: usize,
    /// Decoders tried for both champions. Identity only by default: with
    /// `e_j = 0` a bit flips with certainty, so a clairvoyant MAP decoder
    /// reads it perfectly for free and every ratio becomes unbounded.
    pub decoders: Vec<DecoderStrategy>,
    /// Inputs scored in Monte Carlo mode; defaults to a fixed probe set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_rows: Option<Vec<u64>>,
}

impl Default for MobsConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Exact,
            optimize: true,
            max_iterations: 200,
            decoders: vec![DecoderStrategy::Identity],
            probe_rows: None,
        }
    }
}

impl MobsConfig {
    /// Exact for `n <= 10`, Monte Carlo otherwise.
    pub fn auto(n: usize, samples: u64, seed: u64) -> Self {
        let mode = if n <= MAX_EXACT_MOBS_BITS { Mode::Exact } else { Mode::MonteCarlo { samples, seed } };
        Self { mode, ..Self::default() }
    }
}

/// The best algorithm found for one setting at one budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Champion {
    pub evec: EnergyVector,
    pub decoder: DecoderStrategy,
    pub worst_row: u64,
    pub worst_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    pub quality: Quality,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetResult {
    pub budget: f64,
    pub clairvoyant: Champion,
    pub blindfolded: Champion,
    /// `max_i err_BF(i) / err_CV(i)`, with `0/0 = 1`.
    #[serde(with = "inf_as_string")]
    pub ratio: f64,
    pub ratio_row: u64,
    /// `Q(CV) / Q(BF) = max_i err_BF(i) / max_i err_CV(i)`.
    #[serde(with = "inf_as_string")]
    pub quality_ratio: f64,
    /// False when the allocation search hit its iteration cap.
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobsResult {
    pub problem: ProblemSpec,
    pub metric: QualityMetric,
    pub mode: Mode,
    pub budget_grid: Vec<f64>,
    pub rows: Vec<u64>,
    pub per_budget: Vec<BudgetResult>,
    /// Headline value: `input_mobs` for worst-case correctness, `quality_mobs` otherwise.
    #[serde(with = "inf_as_string")]
    pub mobs: f64,
    /// Largest per-input ratio over all budgets.
    #[serde(with = "inf_as_string")]
    pub input_mobs: f64,
    /// Largest quality ratio over all budgets.
    #[serde(with = "inf_as_string")]
    pub quality_mobs: f64,
}

impl MobsResult {
    pub fn converged(&self) -> bool {
        self.per_budget.iter().all(|b| b.converged)
    }

    pub fn ratio_at(&self, budget: f64) -> Option<&BudgetResult> {
        self.per_budget.iter().find(|b| (b.budget - budget).abs() <= 1e-9 * budget.max(1.0))
    }
}

fn ratio(bf: f64, cv: f64) -> f64 {
    if cv <= 0.0 {
        if bf <= 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        bf / cv
    }
}

/// Fixed probe inputs for Monte Carlo MoBS: all-zeros, all-ones, the two
/// alternating patterns and a few seeded random rows.
pub fn probe_rows(problem: &BooleanProblem) -> Vec<u64> {
    use rand::Rng;
    let mask = problem.rows() - 1;
    let alternating = 0x5555_5555_5555_5555 & mask;
    let mut rows = vec![0, mask, alternating, !alternating & mask];
    let mut rng = seeded(problem.n() as u64);
    rows.extend((0..4).map(|_| rng.gen::<u64>() & mask));
    rows.sort_unstable();
    rows.dedup();
    rows
}

struct Scored {
    evec: EnergyVector,
    strategy: DecoderStrategy,
    errors: Vec<Estimate>,
    worst: usize,
}

impl Scored {
    fn worst_error(&self) -> f64 {
        self.errors[self.worst].value
    }

    fn champion(&self, rows: &[u64]) -> Champion {
        Champion {
            evec: self.evec.clone(),
            decoder: self.strategy.clone(),
            worst_row: rows[self.worst],
            worst_error: self.worst_error(),
            std_error: self.errors[self.worst].std_error,
            quality: Quality::from_error(self.worst_error()),
        }
    }
}

struct Evaluation<'a> {
    problem: &'a BooleanProblem,
    metric: &'a QualityMetric,
    rows: &'a [u64],
    mode: Mode,
}

impl Evaluation<'_> {
    fn score(&self, evec: &EnergyVector, strategy: &DecoderStrategy, group: &PermutationGroup) -> Result<Scored> {
        let decoder = Decoder::build(self.problem, strategy, evec, group)?;
        let errors = input_errors(&decoder, evec, group, self.metric, self.rows, self.mode)?;
        let worst = (0..errors.len()).fold(0, |best, i| if errors[i].value > errors[best].value { i } else { best });
        Ok(Scored { evec: evec.clone(), strategy: strategy.clone(), errors, worst })
    }

    /// Lowest worst-case error over all (vector, decoder) pairs; earlier candidates win ties.
    fn best(
        &self,
        evecs: &[EnergyVector],
        strategies: &[DecoderStrategy],
        group: &PermutationGroup,
    ) -> Result<Scored> {
        let mut best: Option<Scored> = None;
        for evec in evecs {
            for strategy in strategies {
                let scored = self.score(evec, strategy, group)?;
                let better = match &best {
                    None => true,
                    Some(b) => scored.worst_error() < b.worst_error() * (1.0 - 1e-12),
                };
                if better {
                    best = Some(scored);
                }
            }
        }
        best.ok_or_else(|| invalid("no decoder strategies to compare"))
    }
}

/// Measure of broken symmetry of `problem` over `budget_grid`.
///
/// The clairvoyant champion has the lowest worst-case error over candidate
/// allocations (uniform, staircase shapes and, when enabled, the result of a
/// coordinate-descent search scored with the identity decoder) paired with
/// every configured decoder. The blindfolded champion reads the uniform
/// allocation through a permutation drawn from `S_n` with the best decoder.
/// Uniform is also the first clairvoyant candidate and wins ties, so every
/// ratio is at least 1.
pub fn mobs(
    problem: &BooleanProblem,
    budget_grid: &[f64],
    metric: &QualityMetric,
    config: &MobsConfig,
) -> Result<MobsResult> {
    if budget_grid.is_empty() {
        return Err(invalid("budget grid must not be empty"));
    }
    metric.validate(problem)?;
    let n = problem.n();
    let rows = match (config.mode, metric) {
        (_, QualityMetric::SortingWeighted { instance: Some(_) }) | (Mode::Exact, _) => metric.rows(problem)?,
        (Mode::MonteCarlo { .. }, _) => config.probe_rows.clone().unwrap_or_else(|| probe_rows(problem)),
    };
    let strategies: Vec<DecoderStrategy> = config
        .decoders
        .iter()
        .filter(|s| metric.check_decoder(s).is_ok())
        .filter(|s| matches!(s, DecoderStrategy::Identity) || n <= MAX_EXACT_BITS)
        .cloned()
        .collect();
    let eval = Evaluation { problem, metric, rows: &rows, mode: config.mode };
    let clairvoyant_group = PermutationGroup::identity(n);
    let blindfolded_group = PermutationGroup::full_symmetric(n);

    let mut per_budget = Vec::with_capacity(budget_grid.len());
    for &budget in budget_grid {
        let mut candidates = vec![uniform_allocation(budget, n)?];
        for seed in staircase_seeds(problem, budget)? {
            if !candidates.contains(&seed) {
                candidates.push(seed);
            }
        }
        let mut converged = true;
        if config.optimize && config.mode == Mode::Exact && n <= MAX_EXACT_MOBS_BITS {
            let identity = [DecoderStrategy::Identity];
            let start = eval.best(&candidates, &identity, &clairvoyant_group)?.evec;
            let objective = Objective::Quality(AllocationObjective {
                problem: problem.clone(),
                metric: metric.clone(),
                decoder: DecoderStrategy::Identity,
                group: clairvoyant_group.clone(),
            });
            let settings = OptimizerSettings {
                start: Some(start),
                max_iterations: config.max_iterations,
                ..OptimizerSettings::default()
            };
            let found = optimize_allocation(&objective, budget, Method::CoordinateDescent, &settings)?;
            converged = found.converged;
            if !candidates.contains(&found.evec) {
                candidates.push(found.evec);
            }
        }
        let cv = eval.best(&candidates, &strategies, &clairvoyant_group)?;
        let bf = eval.best(&candidates[..1], &strategies, &blindfolded_group)?;

        let (ratio_at, ratio_value) = bf
            .errors
            .iter()
            .zip(&cv.errors)
            .map(|(b, c)| ratio(b.value, c.value))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, r)| if r > best.1 { (i, r) } else { best });
        per_budget.push(BudgetResult {
            budget,
            clairvoyant: cv.champion(&rows),
            blindfolded: bf.champion(&rows),
            ratio: ratio_value,
            ratio_row: rows[ratio_at],
            quality_ratio: ratio(bf.worst_error(), cv.worst_error()),
            converged,
        });
    }
    let input_mobs = per_budget.iter().map(|b| b.ratio).fold(f64::NEG_INFINITY, f64::max);
    let quality_mobs = per_budget.iter().map(|b| b.quality_ratio).fold(f64::NEG_INFINITY, f64::max);
    let mobs = match metric {
        QualityMetric::WorstCaseCorrectness => input_mobs,
        _ => quality_mobs,
    };
    Ok(MobsResult {
        problem: problem.spec(),
        metric: metric.clone(),
        mode: config.mode,
        budget_grid: budget_grid.to_vec(),
        rows,
        per_budget,
        mobs,
        input_mobs,
        quality_mobs,
    })
}

/// Staircase-shaped allocations summing to `budget`: over all bits, and for
/// multi-number problems also within each number.
fn staircase_seeds(problem: &BooleanProblem, budget: f64) -> Result<Vec<EnergyVector>> {
    let n = problem.n();
    let global: Vec<f64> = (0..n).map(|j| j as f64).collect();
    let mut seeds = vec![shifted_staircase(&global, budget)?];
    let k = match problem.kind() {
        ProblemKind::Comparison { k } | ProblemKind::Sorting { k, .. } => Some(*k),
        _ => None,
    };
    if let Some(k) = k {
        let per_number: Vec<f64> = (0..n).map(|j| (j % k) as f64).collect();
        seeds.push(shifted_staircase(&per_number, budget)?);
    }
    Ok(seeds)
}
