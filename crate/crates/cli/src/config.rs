use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use nnpde::limit::LimitConfig;
use nnpde::rans::RansTrainConfig;
use nnpde::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

/// Whole run configuration. Every section is optional in the file and falls back
/// to its defaults, so the manifest always shows the fully resolved values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub sweep: SweepSection,
    pub limit: LimitConfig,
    pub spectra: SpectraSection,
    pub compare: CompareSection,
    pub rans: RansSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            ns: vec![5, 10, 50, 250, 500],
            seeds: vec![0, 1, 2],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectraSection {
    /// Only eigenvalues above this value are written when set.
    pub threshold: Option<f64>,
    /// Monte-Carlo samples for the activation bound; `[limit].mc_samples` if unset.
    pub c_sigma_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub n_hidden: usize,
    pub seeds: Vec<u64>,
    pub steps: usize,
    /// Samples for the limit kernel, built on the `[train]` grid and law.
    pub mc_samples: usize,
    /// Widths for the initialization-gap table; empty skips it.
    pub gap_ns: Vec<usize>,
    pub gap_seeds: usize,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            n_hidden: 100,
            seeds: (0..5).collect(),
            steps: 200,
            mc_samples: 100_000,
            gap_ns: vec![10, 100, 1000, 10_000],
            gap_seeds: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansSection {
    /// Train the closure network; off reports the plain k-epsilon baseline.
    pub net: bool,
    /// Target CSV per Reynolds number (keys are the Re values as written in
    /// `train.train_re` / `train.test_re`); synthetic targets elsewhere.
    pub targets: BTreeMap<String, PathBuf>,
    pub train: RansTrainConfig,
}

impl Default for RansSection {
    fn default() -> Self {
        RansSection {
            net: true,
            targets: BTreeMap::new(),
            train: RansTrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Replace every seed with `seed`; seed lists keep their length and become
    /// `seed, seed + 1, ...`.
    pub fn override_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.limit.seed = seed;
        self.rans.train.seed = seed;
        let shift = |v: &mut Vec<u64>| {
            let n = v.len().max(1) as u64;
            *v = (seed..seed + n).collect();
        };
        shift(&mut self.sweep.seeds);
        shift(&mut self.compare.seeds);
    }
}
