use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ManifestEntry, VerdictLabel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub real: Vec<String>,
    /// Synthetic chunk names eligible for sampling.
    pub synthetic: Vec<String>,
    /// Synthetic clips per real clip in an epoch.
    pub ratio: f64,
    pub seed: u64,
}

impl MixSpec {
    /// Takes clean entries of a folded manifest as the synthetic pool.
    pub fn from_manifest(real: Vec<String>, manifest: &[ManifestEntry], ratio: f64, seed: u64) -> Self {
        let synthetic = manifest
            .iter()
            .filter(|e| e.verdict == VerdictLabel::Clean)
            .map(|e| e.name().to_string())
            .collect();
        Self {
            real,
            synthetic,
            ratio,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Real,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixItem {
    pub source: Source,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMix {
    pub items: Vec<MixItem>,
    pub requested_synthetic: usize,
    pub sampled_synthetic: usize,
}

impl TrainingMix {
    pub fn capped(&self) -> bool {
        self.sampled_synthetic < self.requested_synthetic
    }
}

/// `round(ratio * real)` synthetic clips drawn without replacement (capped
/// at the pool size), merged with all real clips and shuffled. Fully
/// determined by the seed.
pub fn sample_training_mix(spec: &MixSpec) -> Result<TrainingMix> {
    if !(spec.ratio.is_finite() && spec.ratio >= 0.0) {
        return Err(Error::Config(format!("ratio must be non-negative, got {}", spec.ratio)));
    }
    let requested = (spec.ratio * spec.real.len() as f64).round() as usize;
    let k = requested.min(spec.synthetic.len());
    if k < requested {
        log::warn!(
            "requested {requested} synthetic clips but only {} are available",
            spec.synthetic.len()
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut picked = index::sample(&mut rng, spec.synthetic.len(), k).into_vec();
    picked.sort_unstable();
    let mut items: Vec<MixItem> = spec
        .real
        .iter()
        .map(|id| MixItem {
            source: Source::Real,
            id: id.clone(),
        })
        .chain(picked.into_iter().map(|i| MixItem {
            source: Source::Synthetic,
            id: spec.synthetic[i].clone(),
        }))
        .collect();
    items.shuffle(&mut rng);
    Ok(TrainingMix {
        items,
        requested_synthetic: requested,
        sampled_synthetic: k,
    })
}
