//! Data-balance downsampling: keep every parsing example and thin the
//! classification examples of a subtask until parsing examples make up at
//! least the ratio `r`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::decompose::{ExampleKind, SubtaskExample, Task};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceConfig {
    /// Minimum parsing proportion, in (0, 1]. The documented grid is
    /// {0.5, 0.7, 0.9}.
    pub ratio: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("invalid ratio {0}: must be in (0, 1]")]
    InvalidRatio(f64),
}

/// Kept classification count for `parsing` parsing examples at ratio `r`.
/// Floor keeps the bound strict: P / (P + kept) >= r.
pub fn classification_keep_count(parsing: usize, classification: usize, ratio: f64) -> usize {
    let allowed = ((parsing as f64) * (1.0 - ratio) / ratio).floor() as usize;
    classification.min(allowed)
}

/// Downsample the classification records of one subtask, uniformly without
/// replacement by a seeded generator. Parsing records and the relative order
/// of all kept records are untouched. With no parsing examples the operation
/// keeps everything.
pub fn downsample(
    examples: &[SubtaskExample],
    cfg: &BalanceConfig,
) -> Result<Vec<SubtaskExample>, SampleError> {
    if !(cfg.ratio > 0.0 && cfg.ratio <= 1.0) {
        return Err(SampleError::InvalidRatio(cfg.ratio));
    }
    let classification_positions: Vec<usize> = examples
        .iter()
        .enumerate()
        .filter(|(_, ex)| ex.kind == ExampleKind::Classification)
        .map(|(i, _)| i)
        .collect();
    let parsing = examples.len() - classification_positions.len();
    if parsing == 0 {
        return Ok(examples.to_vec());
    }
    let keep = classification_keep_count(parsing, classification_positions.len(), cfg.ratio);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let chosen = rand::seq::index::sample(&mut rng, classification_positions.len(), keep);
    let mut kept_positions: Vec<usize> = chosen
        .into_iter()
        .map(|i| classification_positions[i])
        .collect();
    kept_positions.sort_unstable();

    let mut kept_iter = kept_positions.into_iter().peekable();
    Ok(examples
        .iter()
        .enumerate()
        .filter(|(i, ex)| {
            if ex.kind == ExampleKind::Parsing {
                true
            } else if kept_iter.peek() == Some(i) {
                kept_iter.next();
                true
            } else {
                false
            }
        })
        .map(|(_, ex)| ex.clone())
        .collect())
}

/// Per-subtask seed so each subtask draws independently from one base seed.
pub fn task_seed(base: u64, task: Task) -> u64 {
    let index = match task {
        Task::Select => 0u64,
        Task::From => 1,
        Task::Where => 2,
        Task::Ghol => 3,
        Task::Sql => 4,
        Task::Main => 5,
    };
    base ^ (index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}
