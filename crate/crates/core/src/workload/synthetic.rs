//! Synthetic records and prompt streams for simulation suites, so no corpus
//! is needed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Bin, Dataset, TaskRecord};
use crate::simenv::PromptItem;
use crate::types::Subtask;

const TEMPLATES: [(&str, &str); 5] = [
    ("gsm8k", "solve the arithmetic word problem step by step"),
    ("humaneval", "write python code that passes the unit test"),
    ("bbh", "answer the multiple choice logic puzzle"),
    ("medqa", "answer the clinical question with a short diagnosis"),
    ("amc", "prove the math competition problem with careful reasoning"),
];

/// `n` synthetic records with difficulty drawn uniformly from `[0, 1)`.
pub fn synthetic_records(n: usize, seed: u64) -> Vec<TaskRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| TaskRecord {
            task_id: format!("synthetic-{i:05}"),
            dataset: Some(Dataset::Synthetic),
            declared_difficulty: Some(rng.random()),
            ..TaskRecord::default()
        })
        .collect()
}

/// `n` prompts cycling through five task families, each with a random
/// difficulty bin.
pub fn synthetic_prompt_stream(n: usize, seed: u64) -> Vec<PromptItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let (tag, text) = TEMPLATES[rng.random_range(0..TEMPLATES.len())];
            let bin = [Bin::Easy, Bin::Medium, Bin::Hard][rng.random_range(0..3)];
            PromptItem {
                task: Subtask::new(format!("{tag}-{i:05}"), text),
                bin: Some(bin),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_tagged() {
        let a = synthetic_prompt_stream(20, 4);
        assert_eq!(a, synthetic_prompt_stream(20, 4));
        assert!(a.iter().all(|p| !p.task.dataset_tag.is_empty() && p.bin.is_some()));
        let r = synthetic_records(10, 1);
        assert!(r.iter().all(|r| (0.0..1.0).contains(&r.declared_difficulty.unwrap())));
    }
}
