//! Experiment configuration: a TOML file whose fields can all be overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use inexact_core::adversary::{GroupKindName, GroupSpec};
use inexact_core::{DecoderStrategy, Method, ProblemSpec, QualityMetric};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_SAMPLES: u64 = 100_000;

/// Largest `n` for which exact evaluation is picked automatically.
pub const AUTO_EXACT_BITS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AllocationName {
    Uniform,
    Staircase,
    Comparison,
    NumberStaircase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveName {
    Metric,
    UeVariance,
}

/// Every knob of every subcommand. Unset fields take command defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpec>,
    /// Input bits, most significant first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<AllocationName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budgets: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<QualityMetric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoder: Option<DecoderStrategy>,
    /// Also try MAP decoding for the MoBS champions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_champion: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vdd: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the config's JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config always serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn problem(&self) -> anyhow::Result<&ProblemSpec> {
        self.problem.as_ref().context("no problem given (use --problem or a config file)")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn samples(&self) -> u64 {
        self.samples.unwrap_or(DEFAULT_SAMPLES)
    }

    /// Fills in the evaluation mode, sample count and seed so they appear in outputs.
    pub fn resolve_mode(&mut self, n: usize) {
        let mode = *self.mode.get_or_insert(if n <= AUTO_EXACT_BITS { ModeName::Exact } else { ModeName::MonteCarlo });
        if mode == ModeName::MonteCarlo {
            self.samples.get_or_insert(DEFAULT_SAMPLES);
        }
        self.seed.get_or_insert(0);
    }

    pub fn core_mode(&self) -> inexact_core::Mode {
        match self.mode {
            Some(ModeName::MonteCarlo) => inexact_core::Mode::MonteCarlo { samples: self.samples(), seed: self.seed() },
            _ => inexact_core::Mode::Exact,
        }
    }
}

/// Problem flags, merged field by field over the config's problem.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct ProblemArgs {
    /// Problem family.
    #[arg(long, value_enum)]
    pub problem: Option<ProblemName>,
    /// Input bits (or, ue, be, tribes, custom).
    #[arg(long)]
    pub n: Option<usize>,
    /// Bits per number (comparison, sorting).
    #[arg(long)]
    pub k: Option<usize>,
    /// Numbers to sort.
    #[arg(long)]
    pub count: Option<usize>,
    /// Number of tribes.
    #[arg(long)]
    pub tribes: Option<usize>,
    /// Truth table outputs of a custom problem, in row order.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub outputs: Option<Vec<i64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ProblemName {
    Or,
    Ue,
    Be,
    Tribes,
    Comparison,
    Sorting,
    Custom,
}

impl ProblemArgs {
    fn is_empty(&self) -> bool {
        self.problem.is_none()
            && self.n.is_none()
            && self.k.is_none()
            && self.count.is_none()
            && self.tribes.is_none()
            && self.outputs.is_none()
    }

    pub fn merge(&self, base: Option<ProblemSpec>) -> anyhow::Result<Option<ProblemSpec>> {
        if self.is_empty() {
            return Ok(base);
        }
        let name = match (self.problem, &base) {
            (Some(name), _) => name,
            (None, Some(spec)) => name_of(spec),
            (None, None) => bail!("problem parameters given without --problem"),
        };
        let same_family = base.as_ref().is_some_and(|b| name_of(b) == name);
        let base = if same_family { base } else { None };
        let (mut n, mut k, mut count, mut tribes, mut outputs) = (None, None, None, None, None);
        match base {
            Some(ProblemSpec::Or { n: b } | ProblemSpec::Ue { n: b } | ProblemSpec::Be { n: b }) => n = Some(b),
            Some(ProblemSpec::Tribes { n: b, tribes: t }) => (n, tribes) = (Some(b), Some(t)),
            Some(ProblemSpec::Comparison { k: b }) => k = Some(b),
            Some(ProblemSpec::Sorting { count: c, k: b }) => (count, k) = (Some(c), Some(b)),
            Some(ProblemSpec::Custom { n: b, outputs: o }) => (n, outputs) = (Some(b), Some(o)),
            None => {}
        }
        let n = self.n.or(n);
        let k = self.k.or(k);
        let count = self.count.or(count);
        let tribes = self.tribes.or(tribes);
        let outputs = self.outputs.clone().or(outputs);
        let need = |v: Option<usize>, flag: &str| v.with_context(|| format!("--{flag} is required for this problem"));
        Ok(Some(match name {
            ProblemName::Or => ProblemSpec::Or { n: need(n, "n")? },
            ProblemName::Ue => ProblemSpec::Ue { n: need(n, "n")? },
            ProblemName::Be => ProblemSpec::Be { n: need(n, "n")? },
            ProblemName::Tribes => ProblemSpec::Tribes { n: need(n, "n")?, tribes: need(tribes, "tribes")? },
            ProblemName::Comparison => ProblemSpec::Comparison { k: need(k, "k")? },
            ProblemName::Sorting => ProblemSpec::Sorting { count: need(count, "count")?, k: need(k, "k")? },
            ProblemName::Custom => {
                let outputs = outputs.context("--outputs is required for a custom problem")?;
                let n = match n {
                    Some(n) => n,
                    None => outputs.len().trailing_zeros() as usize,
                };
                ProblemSpec::Custom { n, outputs }
            }
        }))
    }
}

fn name_of(spec: &ProblemSpec) -> ProblemName {
    match spec {
        ProblemSpec::Or { .. } => ProblemName::Or,
        ProblemSpec::Ue { .. } => ProblemName::Ue,
        ProblemSpec::Be { .. } => ProblemName::Be,
        ProblemSpec::Tribes { .. } => ProblemName::Tribes,
        ProblemSpec::Comparison { .. } => ProblemName::Comparison,
        ProblemSpec::Sorting { .. } => ProblemName::Sorting,
        ProblemSpec::Custom { .. } => ProblemName::Custom,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum GroupName {
    Identity,
    FullSymmetric,
    Generated,
}

/// Parses `"1,2,0;0,2,1"` into permutation images.
pub fn parse_generators(text: &str) -> anyhow::Result<Vec<Vec<usize>>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|perm| {
            perm.split(',')
                .map(|x| x.trim().parse::<usize>().with_context(|| format!("bad permutation entry {x:?}")))
                .collect()
        })
        .collect()
}

pub fn group_spec(name: GroupName, n: usize, generators: Vec<Vec<usize>>) -> GroupSpec {
    let kind = match name {
        GroupName::Identity => GroupKindName::Identity,
        GroupName::FullSymmetric => GroupKindName::FullSymmetric,
        GroupName::Generated => GroupKindName::Generated,
    };
    GroupSpec { kind, n, generators }
}

#[cfg(test)]
mod tests {
    use super::*;
    use inexact_core::Prior;

    #[test]
    fn toml_round_trip() {
        let config = ExperimentConfig {
            problem: Some(ProblemSpec::Sorting { count: 2, k: 3 }),
            budgets: Some(vec![3.0, 6.5]),
            metric: Some(QualityMetric::SortingWeighted { instance: Some(vec![4, 0]) }),
            group: Some(GroupSpec { kind: GroupKindName::Generated, n: 3, generators: vec![vec![1, 2, 0]] }),
            decoder: Some(DecoderStrategy::Map { prior: Prior::Weights(vec![0.5, 0.5]) }),
            mode: Some(ModeName::MonteCarlo),
            samples: Some(1000),
            seed: Some(7),
            method: Some(Method::Grid),
            format: Some(Format::Csv),
            ..Default::default()
        };
        let text = config.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), config);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("sed = 3").is_err());
    }

    #[test]
    fn flags_override_config_fields() {
        let args = ProblemArgs { n: Some(5), ..Default::default() };
        let merged = args.merge(Some(ProblemSpec::Tribes { n: 4, tribes: 1 })).unwrap();
        assert_eq!(merged, Some(ProblemSpec::Tribes { n: 5, tribes: 1 }));
        let switch = ProblemArgs { problem: Some(ProblemName::Or), n: Some(3), ..Default::default() };
        assert_eq!(switch.merge(Some(ProblemSpec::Be { n: 4 })).unwrap(), Some(ProblemSpec::Or { n: 3 }));
        assert!(ProblemArgs { n: Some(3), ..Default::default() }.merge(None).is_err());
    }

    #[test]
    fn digest_is_stable() {
        let a = ExperimentConfig { seed: Some(1), ..Default::default() };
        assert_eq!(a.digest(), a.clone().digest());
        assert_ne!(a.digest(), ExperimentConfig::default().digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn generator_parsing() {
        assert_eq!(parse_generators("1,2,0; 0,2,1").unwrap(), vec![vec![1, 2, 0], vec![0, 2, 1]]);
        assert!(parse_generators("1,x").is_err());
    }
}
