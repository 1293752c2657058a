//! Permutation adversaries.
//!
//! The adversary permutes the energy vector (never the bits) with a
//! permutation drawn uniformly from a group the algorithm knows. Under
//! permutation `sigma`, bit `j` is read with energy `e[sigma(j)]`.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::sync::OnceLock;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, too_large, Error, Result};
use crate::noise::{flip_probability, EnergyVector};

/// Largest group order that is ever materialized.
pub const MAX_GROUP_ORDER: usize = 1_000_000;

/// A permutation of `{0, ..., n-1}`, stored as the image of each point.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &x in &images {
            if x >= n || std::mem::replace(&mut seen[x], true) {
                return Err(invalid(format!("{images:?} is not a permutation of 0..{n}")));
            }
        }
        Ok(Self(images))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    pub fn apply(&self, j: usize) -> usize {
        self.0[j]
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(j, &x)| j == x)
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self(other.0.iter().map(|&x| self.0[x]).collect())
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (j, &x) in self.0.iter().enumerate() {
            inv[x] = j;
        }
        Self(inv)
    }

    /// The energy vector seen by the bits: entry `j` is `e[sigma(j)]`.
    pub fn permute_energies(&self, evec: &EnergyVector) -> Vec<f64> {
        self.0.iter().map(|&s| evec.entries()[s]).collect()
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupKind {
    Identity,
    FullSymmetric,
    Generated(Vec<Permutation>),
}

/// Wire form of a group: `{"kind": ..., "n": ..., "generators": [...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub kind: GroupKindName,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generators: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKindName {
    Identity,
    FullSymmetric,
    Generated,
}

/// The adversary's permutation group.
#[derive(Debug)]
pub struct PermutationGroup {
    n: usize,
    kind: GroupKind,
    elements: OnceLock<Vec<Permutation>>,
}

impl Clone for PermutationGroup {
    fn clone(&self) -> Self {
        let elements = OnceLock::new();
        if let Some(cached) = self.elements.get() {
            let _ = elements.set(cached.clone());
        }
        Self { n: self.n, kind: self.kind.clone(), elements }
    }
}

impl PartialEq for PermutationGroup {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.kind == other.kind
    }
}

impl PermutationGroup {
    pub fn identity(n: usize) -> Self {
        Self { n, kind: GroupKind::Identity, elements: OnceLock::new() }
    }

    pub fn full_symmetric(n: usize) -> Self {
        Self { n, kind: GroupKind::FullSymmetric, elements: OnceLock::new() }
    }

    /// The subgroup generated by `generators`; all must have degree `n`.
    pub fn generated(n: usize, generators: Vec<Permutation>) -> Result<Self> {
        if let Some(g) = generators.iter().find(|g| g.len() != n) {
            return Err(invalid(format!("generator {:?} does not act on {n} points", g.images())));
        }
        Ok(Self { n, kind: GroupKind::Generated(generators), elements: OnceLock::new() })
    }

    pub fn from_spec(spec: &GroupSpec) -> Result<Self> {
        match spec.kind {
            GroupKindName::Identity => Ok(Self::identity(spec.n)),
            GroupKindName::FullSymmetric => Ok(Self::full_symmetric(spec.n)),
            GroupKindName::Generated => {
                let gens = spec
                    .generators
                    .iter()
                    .map(|g| Permutation::new(g.clone()))
                    .collect::<Result<Vec<_>>>()?;
                Self::generated(spec.n, gens)
            }
        }
    }

    pub fn spec(&self) -> GroupSpec {
        let (kind, generators) = match &self.kind {
            GroupKind::Identity => (GroupKindName::Identity, vec![]),
            GroupKind::FullSymmetric => (GroupKindName::FullSymmetric, vec![]),
            GroupKind::Generated(g) => {
                (GroupKindName::Generated, g.iter().map(|p| p.images().to_vec()).collect())
            }
        };
        GroupSpec { kind, n: self.n, generators }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    /// True when the group can only be the identity, i.e. the clairvoyant setting.
    pub fn is_trivial(&self) -> bool {
        match &self.kind {
            GroupKind::Identity => true,
            GroupKind::FullSymmetric => self.n <= 1,
            GroupKind::Generated(g) => g.iter().all(Permutation::is_identity),
        }
    }

    /// Group order, when it does not exceed [`MAX_GROUP_ORDER`].
    pub fn order(&self) -> Result<usize> {
        match &self.kind {
            GroupKind::Identity => Ok(1),
            GroupKind::FullSymmetric => {
                (1..=self.n).try_fold(1usize, |acc, k| {
                    acc.checked_mul(k).filter(|&o| o <= MAX_GROUP_ORDER)
                })
                .ok_or_else(|| too_large(format!("{}! exceeds the group order guard", self.n)))
            }
            GroupKind::Generated(_) => Ok(self.enumerate()?.len()),
        }
    }

    /// Every element exactly once. The result is cached.
    pub fn enumerate(&self) -> Result<&[Permutation]> {
        if let Some(cached) = self.elements.get() {
            return Ok(cached);
        }
        let elements = match &self.kind {
            GroupKind::Identity => vec![Permutation::identity(self.n)],
            GroupKind::FullSymmetric => {
                self.order()?;
                (0..self.n).permutations(self.n).map(Permutation).collect()
            }
            GroupKind::Generated(gens) => closure(self.n, gens)?,
        };
        Ok(self.elements.get_or_init(|| elements))
    }

    /// Draws a permutation uniformly from the group.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Permutation> {
        match &self.kind {
            GroupKind::Identity => Ok(Permutation::identity(self.n)),
            GroupKind::FullSymmetric => {
                let mut images: Vec<usize> = (0..self.n).collect();
                images.shuffle(rng);
                Ok(Permutation(images))
            }
            GroupKind::Generated(_) => {
                let elements = self.enumerate()?;
                Ok(elements[rng.gen_range(0..elements.len())].clone())
            }
        }
    }
}

impl fmt::Display for PermutationGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            GroupKind::Identity => write!(f, "I_{}", self.n),
            GroupKind::FullSymmetric => write!(f, "S_{}", self.n),
            GroupKind::Generated(g) => write!(f, "<{} generators on {} points>", g.len(), self.n),
        }
    }
}

/// Breadth-first closure of the generators under composition.
fn closure(n: usize, gens: &[Permutation]) -> Result<Vec<Permutation>> {
    let identity = Permutation::identity(n);
    let mut seen: HashSet<Permutation> = HashSet::from([identity.clone()]);
    let mut order = vec![identity.clone()];
    let mut queue = VecDeque::from([identity]);
    while let Some(g) = queue.pop_front() {
        for s in gens {
            let h = s.compose(&g);
            if seen.insert(h.clone()) {
                if order.len() >= MAX_GROUP_ORDER {
                    return Err(too_large(format!(
                        "generated group has more than {MAX_GROUP_ORDER} elements"
                    )));
                }
                order.push(h.clone());
                queue.push_back(h);
            }
        }
    }
    Ok(order)
}

/// `E_sigma[2^(-e[sigma(j)])]`: the flip probability of bit `j` averaged over the group.
pub fn marginal_flip_probability(evec: &EnergyVector, group: &PermutationGroup, j: usize) -> Result<f64> {
    evec.check_len(group.n())?;
    if j >= group.n() {
        return Err(invalid(format!("bit position {j} out of range for n = {}", group.n())));
    }
    let probs = evec.flip_probabilities();
    match group.kind() {
        GroupKind::Identity => Ok(probs[j]),
        GroupKind::FullSymmetric => Ok(probs.iter().sum::<f64>() / probs.len() as f64),
        GroupKind::Generated(_) => {
            let elements = group.enumerate()?;
            Ok(elements.iter().map(|s| probs[s.apply(j)]).sum::<f64>() / elements.len() as f64)
        }
    }
}

/// `2^(-E/n)`: lower bound on any bit's blindfolded flip probability.
pub fn amgm_bound(total_energy: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    flip_probability(total_energy / n as f64)
}
