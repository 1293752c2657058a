//! Group-averaged flip-mask distributions.
//!
//! With the true row `i` and the observed row `o`, the channel only depends
//! on the flip mask `d = i ^ o`. [`FlipKernel`] holds
//! `K(d) = E_sigma[ prod_j q_{sigma(j)}(d_j) ]`, the exact probability of
//! mask `d` once the adversary's permutation has been averaged out. The
//! same table is the likelihood used by blindfolded MAP decoding.

use std::collections::HashMap;

use rand::distributions::{Bernoulli, Distribution};
use rand::Rng;

use crate::adversary::{GroupKind, Permutation, PermutationGroup};
use crate::error::{too_large, Result};
use crate::noise::{flip_samplers, product_flip_distribution, sample_mask, EnergyVector, MAX_EXACT_BITS};

/// Cap on `distinct permuted vectors * 2^n` when averaging over a generated group.
const MAX_KERNEL_WORK: usize = 1 << 30;

#[derive(Clone, Debug, PartialEq)]
pub struct FlipKernel {
    n: usize,
    weights: Vec<f64>,
}

impl FlipKernel {
    pub fn new(evec: &EnergyVector, group: &PermutationGroup) -> Result<Self> {
        let n = group.n();
        evec.check_len(n)?;
        if n > MAX_EXACT_BITS {
            return Err(too_large(format!(
                "exact flip distribution over 2^{n} masks exceeds the {MAX_EXACT_BITS}-bit guard"
            )));
        }
        let probs = evec.flip_probabilities();
        if group.is_trivial() || evec.is_uniform() {
            return Ok(Self { n, weights: product_flip_distribution(&probs) });
        }
        let weights = match group.kind() {
            GroupKind::Identity => unreachable!("identity groups are trivial"),
            GroupKind::FullSymmetric => symmetric_weights(&probs),
            GroupKind::Generated(_) => generated_weights(evec, group.enumerate()?)?,
        };
        Ok(Self { n, weights })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Probability of each flip mask, indexed by mask.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, mask: u64) -> f64 {
        self.weights[mask as usize]
    }
}

/// Under a uniformly random `sigma` from `S_n`, the slots feeding the flipped
/// positions of a weight-`w` mask form a uniform `w`-subset, so
/// `K(d) = P(W = w) / C(n, w)` where `W` is the Poisson-binomial flip count.
fn symmetric_weights(probs: &[f64]) -> Vec<f64> {
    let n = probs.len();
    let pmf = poisson_binomial_pmf(probs);
    let mut binom = vec![1.0f64; n + 1];
    for w in 1..=n {
        binom[w] = binom[w - 1] * (n + 1 - w) as f64 / w as f64;
    }
    (0..1u64 << n)
        .map(|d| {
            let w = d.count_ones() as usize;
            pmf[w] / binom[w]
        })
        .collect()
}

pub(crate) fn poisson_binomial_pmf(probs: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; probs.len() + 1];
    pmf[0] = 1.0;
    for (seen, &p) in probs.iter().enumerate() {
        for w in (0..=seen + 1).rev() {
            let stay = pmf[w] * (1.0 - p);
            let flip = if w > 0 { pmf[w - 1] * p } else { 0.0 };
            pmf[w] = stay + flip;
        }
    }
    pmf
}

fn generated_weights(evec: &EnergyVector, elements: &[Permutation]) -> Result<Vec<f64>> {
    let n = evec.len();
    // Distinct permuted vectors, with multiplicity, in first-seen order.
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut distinct: Vec<(Vec<f64>, usize)> = Vec::new();
    for sigma in elements {
        let permuted = sigma.permute_energies(evec);
        let key: Vec<u64> = permuted.iter().map(|e| e.to_bits()).collect();
        match index.get(&key) {
            Some(&at) => distinct[at].1 += 1,
            None => {
                index.insert(key, distinct.len());
                distinct.push((permuted, 1));
            }
        }
    }
    if distinct.len().saturating_mul(1 << n) > MAX_KERNEL_WORK {
        return Err(too_large(format!(
            "{} distinct permuted vectors over 2^{n} masks is too much work",
            distinct.len()
        )));
    }
    let total = elements.len() as f64;
    let mut weights = vec![0.0; 1 << n];
    for (vector, count) in distinct {
        let probs: Vec<f64> = vector.iter().map(|e| (-e).exp2()).collect();
        let scale = count as f64 / total;
        for (w, p) in weights.iter_mut().zip(product_flip_distribution(&probs)) {
            *w += scale * p;
        }
    }
    Ok(weights)
}

/// Draws flip masks: first a permutation from the group, then independent flips.
pub(crate) struct MaskSampler<'a> {
    group: &'a PermutationGroup,
    slot_samplers: Vec<Bernoulli>,
    fixed: bool,
}

impl<'a> MaskSampler<'a> {
    pub fn new(evec: &EnergyVector, group: &'a PermutationGroup) -> Result<Self> {
        evec.check_len(group.n())?;
        if let GroupKind::Generated(_) = group.kind() {
            group.enumerate()?;
        }
        let fixed = group.is_trivial() || evec.is_uniform();
        Ok(Self { group, slot_samplers: flip_samplers(&evec.flip_probabilities()), fixed })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.fixed {
            return sample_mask(&self.slot_samplers, rng);
        }
        let sigma = self.group.sample(rng).expect("group enumerability checked at construction");
        sigma.images().iter().enumerate().fold(0, |mask, (j, &s)| {
            mask | ((self.slot_samplers[s].sample(rng) as u64) << j)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(evec: &EnergyVector, group: &PermutationGroup) -> Vec<f64> {
        let elements = group.enumerate().unwrap();
        let mut weights = vec![0.0; 1 << evec.len()];
        for sigma in elements {
            let probs: Vec<f64> = sigma.permute_energies(evec).iter().map(|e| (-e).exp2()).collect();
            for (d, w) in weights.iter_mut().enumerate() {
                let p: f64 = probs
                    .iter()
                    .enumerate()
                    .map(|(j, p)| if (d >> j) & 1 == 1 { *p } else { 1.0 - p })
                    .product();
                *w += p / elements.len() as f64;
            }
        }
        weights
    }

    #[test]
    fn symmetric_closed_form_matches_enumeration() {
        let evec = EnergyVector::from_entries(vec![0.0, 0.4, 1.0, 2.5, 4.0]).unwrap();
        let kernel = FlipKernel::new(&evec, &PermutationGroup::full_symmetric(5)).unwrap();
        let oracle = brute_force(&evec, &PermutationGroup::full_symmetric(5));
        for (a, b) in kernel.weights().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((kernel.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generated_matches_enumeration() {
        let evec = EnergyVector::from_entries(vec![0.5, 1.0, 2.0, 3.0]).unwrap();
        let gens = vec![Permutation::new(vec![1, 2, 3, 0]).unwrap()];
        let group = PermutationGroup::generated(4, gens).unwrap();
        let kernel = FlipKernel::new(&evec, &group).unwrap();
        let oracle = brute_force(&evec, &group);
        for (a, b) in kernel.weights().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_vectors_ignore_the_group() {
        let evec = EnergyVector::from_entries(vec![1.25; 4]).unwrap();
        let a = FlipKernel::new(&evec, &PermutationGroup::identity(4)).unwrap();
        let b = FlipKernel::new(&evec, &PermutationGroup::full_symmetric(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn poisson_binomial_sums_to_one() {
        let pmf = poisson_binomial_pmf(&[0.1, 0.5, 0.9, 1.0]);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(pmf[0], 0.0);
    }
}
