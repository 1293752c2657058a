//! Deterministic decoders and their error probabilities.
//!
//! A decoder maps an observed (noisy) row to an output value. Errors are
//! averaged over the channel noise and over the adversary's permutation,
//! either exactly (by summing the flip kernel over all `2^n` masks) or by
//! seeded Monte Carlo.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::adversary::{GroupSpec, PermutationGroup};
use crate::error::{invalid, too_large, Result};
use crate::kernel::{FlipKernel, MaskSampler};
use crate::noise::{product_flip_distribution, EnergyVector, MAX_EXACT_BITS};
use crate::problems::{row_from_bits, truth_table, BooleanProblem};
use crate::rng::{derive_seed, shard_rng, shard_samples, SHARDS};

/// Relative slack under which two MAP scores count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prior {
    #[default]
    Uniform,
    /// One weight per input row; must sum to 1.
    Weights(Vec<f64>),
}

impl Prior {
    fn weights(&self, rows: usize) -> Result<Vec<f64>> {
        match self {
            Prior::Uniform => Ok(vec![1.0 / rows as f64; rows]),
            Prior::Weights(w) => {
                if w.len() != rows {
                    return Err(invalid(format!("prior has {} weights, expected {rows}", w.len())));
                }
                if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(invalid("prior weights must be finite and non-negative"));
                }
                let total: f64 = w.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(invalid(format!("prior weights sum to {total}, not 1")));
                }
                Ok(w.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecoderStrategy {
    /// Trust the observed bits and evaluate `f` on them.
    Identity,
    /// Output the value with the largest posterior mass.
    Map {
        #[serde(default)]
        prior: Prior,
    },
}

impl DecoderStrategy {
    pub fn map_uniform() -> Self {
        DecoderStrategy::Map { prior: Prior::Uniform }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DecoderStrategy::Identity => "identity",
            DecoderStrategy::Map { .. } => "map",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Decoder {
    problem: BooleanProblem,
    strategy: DecoderStrategy,
    decode_map: Option<Arc<[i64]>>,
}

impl Decoder {
    pub fn identity(problem: &BooleanProblem) -> Self {
        Self { problem: problem.clone(), strategy: DecoderStrategy::Identity, decode_map: None }
    }

    /// MAP decoder for reads through `evec` permuted by `group`.
    ///
    /// Likelihoods are averaged over the group since the permutation is hidden.
    pub fn map(
        problem: &BooleanProblem,
        evec: &EnergyVector,
        group: &PermutationGroup,
        prior: &Prior,
    ) -> Result<Self> {
        check_setting(problem, evec, group)?;
        let kernel = FlipKernel::new(evec, group)?;
        let table = truth_table(problem)?;
        let prior = prior.weights(table.outputs().len())?;
        let map = map_decode_table(&kernel, table.outputs(), &prior);
        Ok(Self {
            problem: problem.clone(),
            strategy: DecoderStrategy::Map { prior: Prior::Weights(prior) },
            decode_map: Some(map.into()),
        })
    }

    pub fn build(
        problem: &BooleanProblem,
        strategy: &DecoderStrategy,
        evec: &EnergyVector,
        group: &PermutationGroup,
    ) -> Result<Self> {
        match strategy {
            DecoderStrategy::Identity => Ok(Self::identity(problem)),
            DecoderStrategy::Map { prior } => {
                let mut decoder = Self::map(problem, evec, group, prior)?;
                decoder.strategy = strategy.clone();
                Ok(decoder)
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn from_table(problem: &BooleanProblem, map: Vec<i64>) -> Self {
        Self {
            problem: problem.clone(),
            strategy: DecoderStrategy::Identity,
            decode_map: Some(map.into()),
        }
    }

    pub fn problem(&self) -> &BooleanProblem {
        &self.problem
    }

    pub fn strategy(&self) -> &DecoderStrategy {
        &self.strategy
    }

    pub fn decode(&self, observed: u64) -> i64 {
        match &self.decode_map {
            Some(map) => map[(observed & self.problem.row_mask()) as usize],
            None => self.problem.evaluate_row(observed),
        }
    }

    fn decoded_table(&self) -> Vec<i64> {
        match &self.decode_map {
            Some(map) => map.to_vec(),
            None => (0..self.problem.rows()).map(|o| self.problem.evaluate_row(o)).collect(),
        }
    }
}

/// Evaluates `f` on the observed bits.
pub fn identity_decode(problem: &BooleanProblem, observed: &[bool]) -> Result<i64> {
    problem.evaluate(observed)
}

/// Clairvoyant MAP decoding of a single observation.
///
/// Returns the output `v` maximizing `sum_{i: f(i) = v} prior(i) P(observed | i)`;
/// ties go to the smaller value.
pub fn map_decode(
    problem: &BooleanProblem,
    evec: &EnergyVector,
    observed: &[bool],
    prior: &Prior,
) -> Result<i64> {
    let n = problem.n();
    if observed.len() != n {
        return Err(invalid(format!("expected {n} observed bits, got {}", observed.len())));
    }
    evec.check_len(n)?;
    if n > MAX_EXACT_BITS {
        return Err(too_large(format!("MAP decoding enumerates 2^{n} rows; limit is {MAX_EXACT_BITS} bits")));
    }
    let table = truth_table(problem)?;
    let prior = prior.weights(table.outputs().len())?;
    let masks = product_flip_distribution(&evec.flip_probabilities());
    let values = table.output_values();
    let o = row_from_bits(observed);
    let mut scores = vec![0.0; values.len()];
    for (i, &out) in table.outputs().iter().enumerate() {
        let at = values.binary_search(&out).expect("value taken from the table");
        scores[at] += prior[i] * masks[(o ^ i as u64) as usize];
    }
    Ok(values[select_best(&scores)])
}

fn map_decode_table(kernel: &FlipKernel, outputs: &[i64], prior: &[f64]) -> Vec<i64> {
    let mut values = outputs.to_vec();
    values.sort_unstable();
    values.dedup();
    let value_index: Vec<usize> = outputs
        .iter()
        .map(|v| values.binary_search(v).expect("value taken from the table"))
        .collect();
    let weights = kernel.weights();
    (0..outputs.len())
        .into_par_iter()
        .map(|o| {
            let mut scores = vec![0.0; values.len()];
            for (i, &vi) in value_index.iter().enumerate() {
                scores[vi] += prior[i] * weights[o ^ i];
            }
            values[select_best(&scores)]
        })
        .collect()
}

/// Index of the first score within the tie tolerance of the maximum.
fn select_best(scores: &[f64]) -> usize {
    let best = scores.iter().copied().fold(0.0, f64::max);
    scores
        .iter()
        .position(|&s| s >= best * (1.0 - TIE_TOLERANCE))
        .unwrap_or(0)
}

fn check_setting(problem: &BooleanProblem, evec: &EnergyVector, group: &PermutationGroup) -> Result<()> {
    evec.check_len(problem.n())?;
    if group.n() != problem.n() {
        return Err(invalid(format!(
            "group acts on {} points but the problem has {} bits",
            group.n(),
            problem.n()
        )));
    }
    Ok(())
}

fn check_row(problem: &BooleanProblem, row: u64) -> Result<()> {
    if row >= problem.rows() {
        return Err(invalid(format!("row {row} out of range for n = {}", problem.n())));
    }
    Ok(())
}

/// How an error quantity is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

impl Mode {
    /// The same Monte Carlo run re-seeded for sub-task `tag`; exact mode is unchanged.
    pub fn derive(self, tag: u64) -> Self {
        match self {
            Mode::Exact => Mode::Exact,
            Mode::MonteCarlo { samples, seed } => Mode::MonteCarlo { samples, seed: derive_seed(seed, tag) },
        }
    }
}

/// A probability or expectation, with its standard error when estimated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: None, samples: None }
    }
}

/// Reciprocal of an error; zero error gives an infinite quality, serialized as `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Quality(f64);

impl Quality {
    pub const INFINITE: Quality = Quality(f64::INFINITY);

    pub fn from_error(error: f64) -> Self {
        if error <= 0.0 {
            Self::INFINITE
        } else {
            Quality(1.0 / error)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Quality {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        inf_as_string::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for Quality {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        inf_as_string::deserialize(d).map(Quality)
    }
}

/// Serde adapter writing `+inf` as the string `"inf"`; JSON has no infinity literal.
pub mod inf_as_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *x == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) => Ok(x),
            Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid number {t:?}"))),
        }
    }
}

/// Exact per-input error tables for one (decoder, energy vector, group) setting.
pub struct ExactEvaluator {
    kernel: FlipKernel,
    decoded: Vec<i64>,
    truth: Vec<i64>,
}

impl ExactEvaluator {
    pub fn new(decoder: &Decoder, evec: &EnergyVector, group: &PermutationGroup) -> Result<Self> {
        let problem = decoder.problem();
        check_setting(problem, evec, group)?;
        let kernel = FlipKernel::new(evec, group)?;
        let truth = truth_table(problem)?.outputs().to_vec();
        Ok(Self { kernel, decoded: decoder.decoded_table(), truth })
    }

    /// `Pr{decode(observed) != f(row)}`.
    pub fn error(&self, row: u64) -> f64 {
        let row = row as usize;
        let want = self.truth[row];
        self.kernel
            .weights()
            .iter()
            .enumerate()
            .filter(|(d, _)| self.decoded[row ^ d] != want)
            .map(|(_, w)| w)
            .sum::<f64>()
            // rounding in the kernel can push a certain failure just past 1
            .min(1.0)
    }

    /// `E|f(row) - decode(observed)|`.
    pub fn magnitude(&self, row: u64) -> f64 {
        let row = row as usize;
        let want = self.truth[row];
        self.kernel
            .weights()
            .iter()
            .enumerate()
            .map(|(d, w)| w * (want - self.decoded[row ^ d]).abs() as f64)
            .sum()
    }

    /// Expectation of `stat(observed row)` for the given true row.
    pub fn expect<F: Fn(u64) -> f64>(&self, row: u64, stat: F) -> f64 {
        self.kernel
            .weights()
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(d, w)| w * stat(row ^ d as u64))
            .sum()
    }

    pub fn errors(&self) -> Vec<f64> {
        (0..self.truth.len() as u64).into_par_iter().map(|r| self.error(r)).collect()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        (0..self.truth.len() as u64).into_par_iter().map(|r| self.magnitude(r)).collect()
    }
}

#[derive(Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Self {
            count,
            mean: self.mean + delta * other.count as f64 / count as f64,
            m2: self.m2 + other.m2 + delta * delta * (self.count as f64 * other.count as f64) / count as f64,
        }
    }
}

/// Seeded Monte Carlo estimate of `E[stat(flip mask)]` over noise and permutation.
pub fn monte_carlo_expectation<F>(
    evec: &EnergyVector,
    group: &PermutationGroup,
    samples: u64,
    seed: u64,
    stat: F,
) -> Result<Estimate>
where
    F: Fn(u64) -> f64 + Sync,
{
    if samples == 0 {
        return Err(invalid("Monte Carlo needs at least one sample"));
    }
    let sampler = MaskSampler::new(evec, group)?;
    let shards: Vec<Moments> = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut rng = shard_rng(seed, shard);
            let mut m = Moments::default();
            for _ in 0..shard_samples(samples, shard) {
                m.push(stat(sampler.sample(&mut rng)));
            }
            m
        })
        .collect();
    let total = shards.into_iter().fold(Moments::default(), Moments::merge);
    let variance = if total.count > 1 { total.m2 / (total.count - 1) as f64 } else { 0.0 };
    Ok(Estimate {
        value: total.mean,
        std_error: Some((variance.max(0.0) / total.count as f64).sqrt()),
        samples: Some(total.count),
    })
}

/// `Pr{c(A(i), n) != c(i, n)}` for input row `row`.
pub fn per_input_error(
    decoder: &Decoder,
    evec: &EnergyVector,
    group: &PermutationGroup,
    row: u64,
    mode: Mode,
) -> Result<Estimate> {
    let problem = decoder.problem();
    check_setting(problem, evec, group)?;
    check_row(problem, row)?;
    match mode {
        Mode::Exact => Ok(Estimate::exact(ExactEvaluator::new(decoder, evec, group)?.error(row))),
        Mode::MonteCarlo { samples, seed } => {
            let want = problem.evaluate_row(row);
            monte_carlo_expectation(evec, group, samples, seed, |d| {
                (decoder.decode(row ^ d) != want) as u8 as f64
            })
        }
    }
}

/// `E|f(row) - decode(observed)|` for input row `row`.
pub fn expected_magnitude_error(
    decoder: &Decoder,
    evec: &EnergyVector,
    group: &PermutationGroup,
    row: u64,
    mode: Mode,
) -> Result<Estimate> {
    let problem = decoder.problem();
    check_setting(problem, evec, group)?;
    check_row(problem, row)?;
    match mode {
        Mode::Exact => Ok(Estimate::exact(ExactEvaluator::new(decoder, evec, group)?.magnitude(row))),
        Mode::MonteCarlo { samples, seed } => {
            let want = problem.evaluate_row(row);
            monte_carlo_expectation(evec, group, samples, seed, |d| {
                (want - decoder.decode(row ^ d)).abs() as f64
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Clairvoyant,
    Blindfolded { group: GroupSpec },
}

impl Setting {
    pub fn of(group: &PermutationGroup) -> Self {
        if group.is_trivial() {
            Setting::Clairvoyant
        } else {
            Setting::Blindfolded { group: group.spec() }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputError {
    pub row: u64,
    pub p_err: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_err: Option<f64>,
}

/// Per-input error probabilities for one setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub setting: Setting,
    pub mode: Mode,
    pub per_input: Vec<InputError>,
}

impl ErrorReport {
    pub fn worst_error(&self) -> f64 {
        self.per_input.iter().map(|e| e.p_err).fold(0.0, f64::max)
    }

    pub fn quality(&self) -> Quality {
        Quality::from_error(self.worst_error())
    }
}

/// Error probabilities for the listed rows. Monte Carlo runs use one derived seed per row.
pub fn error_report(
    decoder: &Decoder,
    evec: &EnergyVector,
    group: &PermutationGroup,
    rows: &[u64],
    mode: Mode,
) -> Result<ErrorReport> {
    let problem = decoder.problem();
    check_setting(problem, evec, group)?;
    for &row in rows {
        check_row(problem, row)?;
    }
    let per_input = match mode {
        Mode::Exact => {
            let eval = ExactEvaluator::new(decoder, evec, group)?;
            rows.iter().map(|&row| InputError { row, p_err: eval.error(row), std_err: None }).collect()
        }
        Mode::MonteCarlo { .. } => rows
            .iter()
            .map(|&row| {
                let est = per_input_error(decoder, evec, group, row, mode.derive(row))?;
                Ok(InputError { row, p_err: est.value, std_err: est.std_error })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(ErrorReport { setting: Setting::of(group), mode, per_input })
}

/// `min_i 1 / Pr{error on row i}` over all input rows.
pub fn worst_case_quality(
    decoder: &Decoder,
    evec: &EnergyVector,
    group: &PermutationGroup,
    mode: Mode,
) -> Result<Quality> {
    let rows: Vec<u64> = (0..decoder.problem().rows()).collect();
    Ok(error_report(decoder, evec, group, &rows, mode)?.quality())
}
