//! Energy-to-error channel.
//!
//! Input bit `j` read with energy `e_j` is flipped independently with
//! probability `2^(-e_j)`. Note that `e_j = 0` is legal and flips the bit
//! with certainty.

use rand::distributions::{Bernoulli, Distribution};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, too_large, Error, Result};
use crate::problems::{bits_of_row, row_from_bits};

/// Relative slack allowed when checking `sum(e) <= budget`.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

/// Largest `n` for which full observation distributions are built.
pub const MAX_EXACT_BITS: usize = 14;

/// Per-bit energies `(e_0, ..., e_{n-1})` under a total budget.
///
/// Serializes as a plain JSON array; on deserialization the budget is the sum
/// of the entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct EnergyVector {
    entries: Vec<f64>,
    budget: f64,
}

impl EnergyVector {
    pub fn new(entries: Vec<f64>, budget: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("energy vector must have at least one entry"));
        }
        if let Some(e) = entries.iter().find(|e| !e.is_finite() || **e < 0.0) {
            return Err(invalid(format!("energies must be finite and non-negative, got {e}")));
        }
        if !budget.is_finite() || budget < 0.0 {
            return Err(invalid(format!("budget must be finite and non-negative, got {budget}")));
        }
        let total: f64 = entries.iter().sum();
        if total > budget + BUDGET_TOLERANCE * budget.max(1.0) {
            return Err(invalid(format!("energies sum to {total}, over the budget {budget}")));
        }
        Ok(Self { entries, budget })
    }

    /// A vector whose budget is exactly the sum of its entries.
    pub fn from_entries(entries: Vec<f64>) -> Result<Self> {
        let total = entries.iter().sum();
        Self::new(entries, total)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    pub fn flip_probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| (-e).exp2()).collect()
    }

    /// True when all entries are bitwise equal, so every permutation leaves the vector unchanged.
    pub fn is_uniform(&self) -> bool {
        self.entries.windows(2).all(|w| w[0] == w[1])
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(invalid(format!(
                "energy vector has {} entries but the input has {n} bits",
                self.len()
            )));
        }
        Ok(())
    }
}

impl From<EnergyVector> for Vec<f64> {
    fn from(v: EnergyVector) -> Self {
        v.entries
    }
}

impl TryFrom<Vec<f64>> for EnergyVector {
    type Error = Error;

    fn try_from(entries: Vec<f64>) -> Result<Self> {
        Self::from_entries(entries)
    }
}

/// `2^(-e)`, the probability that a bit read with energy `e` is flipped.
pub fn flip_probability(e: f64) -> Result<f64> {
    if !e.is_finite() || e < 0.0 {
        return Err(invalid(format!("energy must be finite and non-negative, got {e}")));
    }
    Ok((-e).exp2())
}

/// Per-bit Bernoulli samplers for flip events.
pub(crate) fn flip_samplers(probs: &[f64]) -> Vec<Bernoulli> {
    probs
        .iter()
        .map(|&p| Bernoulli::new(p).expect("flip probabilities lie in [0, 1]"))
        .collect()
}

/// Samples a flip mask where bit `j` is set with the probability of `samplers[j]`.
pub(crate) fn sample_mask<R: Rng + ?Sized>(samplers: &[Bernoulli], rng: &mut R) -> u64 {
    samplers
        .iter()
        .enumerate()
        .fold(0, |mask, (j, s)| mask | ((s.sample(rng) as u64) << j))
}

/// Reads `bits` through the channel defined by `evec`.
pub fn sample_observation<R: Rng + ?Sized>(
    bits: &[bool],
    evec: &EnergyVector,
    rng: &mut R,
) -> Result<Vec<bool>> {
    evec.check_len(bits.len())?;
    let samplers = flip_samplers(&evec.flip_probabilities());
    let observed = row_from_bits(bits) ^ sample_mask(&samplers, rng);
    Ok(bits_of_row(observed, bits.len()))
}

/// Distribution of the flip mask `d` for independent per-bit flip probabilities.
///
/// Entry `d` is `prod_j (d_j ? p_j : 1 - p_j)`.
pub fn product_flip_distribution(probs: &[f64]) -> Vec<f64> {
    let mut dist = Vec::with_capacity(1 << probs.len());
    dist.push(1.0);
    for &p in probs {
        let len = dist.len();
        for idx in 0..len {
            dist.push(dist[idx] * p);
        }
        for value in &mut dist[..len] {
            *value *= 1.0 - p;
        }
    }
    dist
}

/// Exact distribution of the observed row for a fixed true row.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationDistribution {
    n: usize,
    true_row: u64,
    probabilities: Vec<f64>,
}

impl ObservationDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn true_row(&self) -> u64 {
        self.true_row
    }

    /// Probability of each observed row, indexed by row.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, observed: u64) -> f64 {
        self.probabilities[observed as usize]
    }

    /// Probability that observed bit `j` differs from the true bit.
    pub fn marginal_flip(&self, j: usize) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(o, _)| ((*o as u64 ^ self.true_row) >> j) & 1 == 1)
            .map(|(_, p)| p)
            .sum()
    }
}

pub fn observation_distribution(bits: &[bool], evec: &EnergyVector) -> Result<ObservationDistribution> {
    let n = bits.len();
    evec.check_len(n)?;
    if n > MAX_EXACT_BITS {
        return Err(too_large(format!(
            "observation distribution over 2^{n} rows exceeds the {MAX_EXACT_BITS}-bit guard"
        )));
    }
    let true_row = row_from_bits(bits);
    let masks = product_flip_distribution(&evec.flip_probabilities());
    let probabilities = (0..masks.len() as u64)
        .map(|o| masks[(o ^ true_row) as usize])
        .collect();
    Ok(ObservationDistribution { n, true_row, probabilities })
}

/// Complementary error function, `erfc(x) = 2/sqrt(pi) * int_x^inf exp(-u^2) du`.
///
/// Backed by the FreeBSD msun algorithm (error below one ulp).
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Probability that a CMOS switch operating at supply voltage `vdd` under
/// additive gaussian noise of standard deviation `sigma` switches correctly:
/// `1 - erfc(vdd / (2 sqrt(2) sigma)) / 2`.
pub fn cmos_correctness_probability(vdd: f64, sigma: f64) -> Result<f64> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    if !vdd.is_finite() || vdd < 0.0 {
        return Err(invalid(format!("vdd must be finite and non-negative, got {vdd}")));
    }
    Ok(1.0 - 0.5 * erfc(vdd / (2.0 * std::f64::consts::SQRT_2 * sigma)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub vdd: f64,
    pub sigma: f64,
    pub p: f64,
}

/// Samples the energy-probability curve at the given supply voltages.
pub fn energy_probability_curve(sigma: f64, vdds: &[f64]) -> Result<Vec<CurvePoint>> {
    vdds.iter()
        .map(|&vdd| Ok(CurvePoint { vdd, sigma, p: cmos_correctness_probability(vdd, sigma)? }))
        .collect()
}
