//! Seeded cold-start / train / test split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Bin, TaskRecord, WorkloadError};
use crate::events::Phase;

pub const DEFAULT_RATIOS: [u32; 3] = [2, 3, 1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSplit<T> {
    pub cold: Vec<T>,
    pub train: Vec<T>,
    pub test: Vec<T>,
    pub ratios: [u32; 3],
}

impl<T> PhaseSplit<T> {
    pub fn sizes(&self) -> [usize; 3] {
        [self.cold.len(), self.train.len(), self.test.len()]
    }

    pub fn phase(&self, phase: Phase) -> &[T] {
        match phase {
            Phase::ColdStart => &self.cold,
            Phase::Train => &self.train,
            Phase::Test => &self.test,
        }
    }

    /// Items in run order, each tagged with its phase.
    pub fn tagged(&self) -> impl Iterator<Item = (Phase, &T)> {
        Phase::ALL
            .into_iter()
            .flat_map(move |p| self.phase(p).iter().map(move |t| (p, t)))
    }
}

/// Floor of each share plus one extra item for the largest remainders, ties
/// to the earlier phase.
fn phase_sizes(n: usize, ratios: [u32; 3]) -> [usize; 3] {
    let total: u64 = ratios.iter().map(|r| u64::from(*r)).sum();
    let mut sizes = [0usize; 3];
    let mut rems = [(0u64, 0usize); 3];
    for i in 0..3 {
        let num = n as u64 * u64::from(ratios[i]);
        sizes[i] = (num / total) as usize;
        rems[i] = (num % total, i);
    }
    let left = n - sizes.iter().sum::<usize>();
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, i) in rems.iter().take(left) {
        sizes[*i] += 1;
    }
    sizes
}

/// Shuffle with `seed`, then cut into contiguous phases by `ratios`.
pub fn build_phases<T: Clone>(records: &[T], ratios: [u32; 3], seed: u64) -> Result<PhaseSplit<T>, WorkloadError> {
    if records.is_empty() {
        return Err(WorkloadError::Empty);
    }
    if ratios.iter().all(|r| *r == 0) {
        return Err(WorkloadError::InvalidRatios);
    }
    let phases = ratios.iter().filter(|r| **r > 0).count();
    if records.len() < phases {
        return Err(WorkloadError::TooFewRecords {
            records: records.len(),
            phases,
        });
    }
    let mut items = records.to_vec();
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let [a, b, _] = phase_sizes(items.len(), ratios);
    let test = items.split_off(a + b);
    let train = items.split_off(a);
    Ok(PhaseSplit {
        cold: items,
        train,
        test,
        ratios,
    })
}

/// Which difficulty bins a routing experiment draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinFilter {
    #[default]
    All,
    EasyHard,
}

pub fn filter_bins(records: &[TaskRecord], filter: BinFilter) -> Vec<TaskRecord> {
    records
        .iter()
        .filter(|r| match filter {
            BinFilter::All => true,
            BinFilter::EasyHard => matches!(r.bin, Some(Bin::Easy) | Some(Bin::Hard)),
        })
        .cloned()
        .collect()
}
