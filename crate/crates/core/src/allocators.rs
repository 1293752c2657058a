//! Energy allocations: closed-form shapes and numerical search under a budget.

use serde::{Deserialize, Serialize};

use crate::adversary::PermutationGroup;
use crate::decoders::{Decoder, DecoderStrategy, Mode};
use crate::error::{invalid, too_large, Result};
use crate::metrics::{input_errors, QualityMetric, MAX_EXACT_MOBS_BITS};
use crate::noise::EnergyVector;
use crate::problems::BooleanProblem;

/// Lattice points beyond which a grid search is refused.
pub const MAX_GRID_POINTS: u64 = 5_000_000;

/// Minimum objective decrease accepted by coordinate descent.
const IMPROVEMENT: f64 = 1e-10;

fn check_budget(budget: f64) -> Result<()> {
    if !budget.is_finite() || budget < 0.0 {
        return Err(invalid(format!("budget must be finite and non-negative, got {budget}")));
    }
    Ok(())
}

/// `E/n` on every bit.
pub fn uniform_allocation(budget: f64, n: usize) -> Result<EnergyVector> {
    check_budget(budget)?;
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    EnergyVector::new(vec![budget / n as f64; n], budget)
}

/// `e_j = j + 1`, total `n(n+1)/2`.
pub fn staircase_allocation(n: usize) -> Result<EnergyVector> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    EnergyVector::from_entries((1..=n).map(|e| e as f64).collect())
}

/// Two `k`-bit operands where both bits of position `j` get `(j+1)/2`,
/// so comparing position `j` costs `j+1` in total. Budget `k(k+1)/2`.
pub fn comparison_allocation(k: usize) -> Result<EnergyVector> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let half: Vec<f64> = (0..k).map(|j| (j + 1) as f64 / 2.0).collect();
    EnergyVector::from_entries([half.clone(), half].concat())
}

/// Bit `j` of each of `count` numbers gets `j + 1`. Budget `count * k(k+1)/2`.
pub fn number_staircase_allocation(count: usize, k: usize) -> Result<EnergyVector> {
    if count == 0 || k == 0 {
        return Err(invalid("need at least one number of at least one bit"));
    }
    EnergyVector::from_entries((0..count * k).map(|j| (j % k + 1) as f64).collect())
}

/// `max(0, s_j + c)` with the shift `c` chosen so the entries sum to `budget`.
pub fn shifted_staircase(shape: &[f64], budget: f64) -> Result<EnergyVector> {
    check_budget(budget)?;
    if shape.is_empty() {
        return Err(invalid("shape must not be empty"));
    }
    if budget == 0.0 {
        return EnergyVector::new(vec![0.0; shape.len()], 0.0);
    }
    let top = shape.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total = |c: f64| shape.iter().map(|s| (s + c).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (-top, budget - top + 1.0);
    while total(hi) < budget {
        hi += hi.abs() + 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let entries: Vec<f64> = shape.iter().map(|s| (s + hi).max(0.0)).collect();
    let scale = budget / entries.iter().sum::<f64>();
    EnergyVector::new(entries.into_iter().map(|e| e * scale).collect(), budget)
}

/// `sum_j (1 - 2^-e_j) 2^-e_j`, the variance of the flip count.
pub fn ue_variance(evec: &EnergyVector) -> f64 {
    evec.flip_probabilities().iter().map(|q| (1.0 - q) * q).sum()
}

/// What an allocation search minimizes.
#[derive(Clone, Debug)]
pub struct AllocationObjective {
    pub problem: BooleanProblem,
    pub metric: QualityMetric,
    pub decoder: DecoderStrategy,
    pub group: PermutationGroup,
}

#[derive(Clone, Debug)]
pub enum Objective {
    /// Variance of the number of flipped bits among `n`.
    UeVariance { n: usize },
    /// Worst-case error `1 / quality` under a metric, evaluated exactly.
    Quality(AllocationObjective),
}

impl Objective {
    pub fn n(&self) -> usize {
        match self {
            Objective::UeVariance { n } => *n,
            Objective::Quality(obj) => obj.problem.n(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Objective::Quality(obj) = self {
            obj.metric.validate(&obj.problem)?;
            obj.metric.check_decoder(&obj.decoder)?;
            let n = obj.problem.n();
            if obj.group.n() != n {
                return Err(invalid("group size does not match the problem"));
            }
            if n > MAX_EXACT_MOBS_BITS {
                return Err(too_large(format!(
                    "allocation search evaluates metrics exactly and needs n <= {MAX_EXACT_MOBS_BITS}"
                )));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, evec: &EnergyVector) -> Result<f64> {
        match self {
            Objective::UeVariance { .. } => Ok(ue_variance(evec)),
            Objective::Quality(obj) => {
                let decoder = Decoder::build(&obj.problem, &obj.decoder, evec, &obj.group)?;
                let rows = obj.metric.rows(&obj.problem)?;
                let errors = input_errors(&decoder, evec, &obj.group, &obj.metric, &rows, Mode::Exact)?;
                Ok(errors.iter().map(|e| e.value).fold(0.0, f64::max))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exhaustive search of a simplex lattice.
    Grid,
    /// Pairwise mass transfer with a halving step.
    CoordinateDescent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerSettings {
    /// Lattice spacing for [`Method::Grid`].
    pub resolution: f64,
    pub initial_step: f64,
    pub min_step: f64,
    /// Cap on descent sweeps over all entry pairs.
    pub max_iterations: usize,
    /// Descent starting point; the uniform allocation when absent.
    pub start: Option<EnergyVector>,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self { resolution: 0.05, initial_step: 1.0, min_step: 1e-6, max_iterations: 1000, start: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub evec: EnergyVector,
    pub budget: f64,
    pub method: Method,
    pub converged: bool,
    pub objective_value: f64,
    pub evaluations: u64,
}

/// Searches for the allocation of `budget` minimizing the objective.
pub fn optimize_allocation(
    objective: &Objective,
    budget: f64,
    method: Method,
    settings: &OptimizerSettings,
) -> Result<Allocation> {
    check_budget(budget)?;
    let n = objective.n();
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    objective.validate()?;
    match method {
        Method::Grid => grid_search(objective, n, budget, settings),
        Method::CoordinateDescent => descend(objective, n, budget, settings),
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn grid_search(objective: &Objective, n: usize, budget: f64, settings: &OptimizerSettings) -> Result<Allocation> {
    if !(settings.resolution > 0.0) {
        return Err(invalid("grid resolution must be positive"));
    }
    // The budget is cut into `units` equal steps no wider than the resolution.
    let units = (budget / settings.resolution - 1e-9).ceil().max(0.0) as u64;
    let points = binomial(units + n as u64 - 1, n as u64 - 1);
    if points > MAX_GRID_POINTS {
        return Err(too_large(format!("grid has {points} points; the limit is {MAX_GRID_POINTS}")));
    }
    let step = if units == 0 { 0.0 } else { budget / units as f64 };
    let mut counts = vec![0u64; n];
    counts[n - 1] = units;
    let mut best: Option<(f64, EnergyVector)> = None;
    let mut evaluations = 0;
    loop {
        let evec = EnergyVector::new(counts.iter().map(|&c| c as f64 * step).collect(), budget)?;
        let value = objective.evaluate(&evec)?;
        evaluations += 1;
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, evec));
        }
        if !next_composition(&mut counts) {
            break;
        }
    }
    let (objective_value, evec) = best.expect("the lattice has at least one point");
    Ok(Allocation { evec, budget, method: Method::Grid, converged: true, objective_value, evaluations })
}

/// Steps through all `counts` with a fixed sum, in reverse lexicographic order
/// of the trailing entries. Returns false after the last composition.
fn next_composition(counts: &mut [u64]) -> bool {
    let n = counts.len();
    if n == 1 {
        return false;
    }
    // Move one unit from the last entry into the right-most earlier slot, then reset.
    let last = counts[n - 1];
    if last > 0 {
        counts[n - 2] += 1;
        counts[n - 1] = last - 1;
        return true;
    }
    // The last entry is empty: carry the tail of the first non-empty earlier entry.
    let Some(i) = (0..n - 1).rev().find(|&i| counts[i] > 0) else {
        return false;
    };
    if i == 0 {
        return false;
    }
    let moved = counts[i];
    counts[i] = 0;
    counts[i - 1] += 1;
    counts[n - 1] = moved - 1;
    true
}

fn descend(objective: &Objective, n: usize, budget: f64, settings: &OptimizerSettings) -> Result<Allocation> {
    if !(settings.min_step > 0.0 && settings.initial_step >= settings.min_step) {
        return Err(invalid("descent steps must satisfy 0 < min_step <= initial_step"));
    }
    let mut x = match &settings.start {
        Some(start) => {
            start.check_len(n)?;
            let total = start.total();
            if total > budget * (1.0 + 1e-9) + 1e-12 {
                return Err(invalid(format!("start vector spends {total}, over the budget {budget}")));
            }
            start.entries().to_vec()
        }
        None => vec![budget / n as f64; n],
    };
    let mut value = objective.evaluate(&EnergyVector::new(x.clone(), budget)?)?;
    let mut evaluations = 1;
    let mut step = settings.initial_step;
    let mut sweeps = 0;
    let mut converged = true;
    while step >= settings.min_step {
        if sweeps == settings.max_iterations {
            converged = false;
            break;
        }
        sweeps += 1;
        let mut improved = false;
        for from in 0..n {
            for to in 0..n {
                if from == to || x[from] <= 0.0 {
                    continue;
                }
                let delta = step.min(x[from]);
                let mut y = x.clone();
                y[from] = if delta == x[from] { 0.0 } else { x[from] - delta };
                y[to] += delta;
                let candidate = objective.evaluate(&EnergyVector::new(y.clone(), budget)?)?;
                evaluations += 1;
                if candidate < value - IMPROVEMENT {
                    x = y;
                    value = candidate;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    Ok(Allocation {
        evec: EnergyVector::new(x, budget)?,
        budget,
        method: Method::CoordinateDescent,
        converged,
        objective_value: value,
        evaluations,
    })
}

impl From<Allocation> for EnergyVector {
    fn from(a: Allocation) -> Self {
        a.evec
    }
}
