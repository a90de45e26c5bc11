//! Evaluation-regime construction: pooled IID resplits, low-resource
//! fractions, and the two-stage data-budget schedule.
//!
//! All fraction logic is prefix sampling: shuffle the unit list once per
//! seed, then take prefixes. Nested subsets across fractions follow for
//! free. For multi-turn corpora the unit of assignment is the whole
//! interaction; single-turn examples are their own units.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::RawExample;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("invalid fraction {0}: must be in (0, 1]")]
    InvalidFraction(f64),
    #[error("train and dev share example id '{0}'")]
    OverlappingIds(String),
}

/// Assignment units: one per single-turn example, one per interaction.
/// Unit order follows first appearance in the input.
fn units(examples: &[RawExample]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut interaction_slot: std::collections::HashMap<usize, usize> =
        std::collections::HashMap::new();
    for (i, ex) in examples.iter().enumerate() {
        match ex.interaction_id {
            None => out.push(vec![i]),
            Some(iid) => match interaction_slot.get(&iid) {
                Some(&slot) => out[slot].push(i),
                None => {
                    interaction_slot.insert(iid, out.len());
                    out.push(vec![i]);
                }
            },
        }
    }
    out
}

/// Pool train and dev, shuffle by seed, and refill a new train of the
/// original size (within one unit) and the remainder as dev. Interactions
/// move whole; the id multiset is conserved.
pub fn iid_resplit(
    train: &[RawExample],
    dev: &[RawExample],
    seed: u64,
) -> Result<(Vec<RawExample>, Vec<RawExample>), SplitError> {
    for t in train {
        if dev.iter().any(|d| d.example_id == t.example_id) {
            return Err(SplitError::OverlappingIds(t.example_id.clone()));
        }
    }
    let mut pool: Vec<RawExample> = Vec::with_capacity(train.len() + dev.len());
    pool.extend_from_slice(train);
    pool.extend_from_slice(dev);

    let mut unit_list = units(&pool);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    unit_list.shuffle(&mut rng);

    let target = train.len();
    let mut in_train = vec![false; pool.len()];
    let mut count = 0;
    for unit in &unit_list {
        if count >= target {
            break;
        }
        for &i in unit {
            in_train[i] = true;
        }
        count += unit.len();
    }

    let mut new_train = Vec::with_capacity(target);
    let mut new_dev = Vec::with_capacity(dev.len());
    for (i, ex) in pool.into_iter().enumerate() {
        if in_train[i] {
            new_train.push(ex);
        } else {
            new_dev.push(ex);
        }
    }
    Ok((new_train, new_dev))
}

/// Uniformly sampled subset of about `fraction * N` examples by the nested
/// prefix scheme: the subset for a smaller fraction under the same seed is
/// contained in the subset for a larger one. Output keeps the input order.
pub fn fraction_subset(
    examples: &[RawExample],
    fraction: f64,
    seed: u64,
) -> Result<Vec<RawExample>, SplitError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SplitError::InvalidFraction(fraction));
    }
    let target = ((examples.len() as f64) * fraction).floor() as usize;

    let mut unit_list = units(examples);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    unit_list.shuffle(&mut rng);

    let mut selected = vec![false; examples.len()];
    let mut count = 0;
    for unit in &unit_list {
        if count >= target {
            break;
        }
        for &i in unit {
            selected[i] = true;
        }
        count += unit.len();
    }

    Ok(examples
        .iter()
        .enumerate()
        .filter(|(i, _)| selected[*i])
        .map(|(_, ex)| ex.clone())
        .collect())
}

/// Budgets for the two training stages: the first set feeds subtask
/// construction and downsampling, the second feeds main-task construction.
/// Both are prefixes under one seed, so their overlap is the smaller prefix.
pub fn ka_kc_schedule(
    train: &[RawExample],
    ka_fraction: f64,
    kc_fraction: f64,
    seed: u64,
) -> Result<(Vec<RawExample>, Vec<RawExample>), SplitError> {
    let ka = fraction_subset(train, ka_fraction, seed)?;
    let kc = fraction_subset(train, kc_fraction, seed)?;
    Ok((ka, kc))
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

/// Split manifest written to disk so downstream runs reference id lists
/// instead of re-sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub format_version: String,
    pub kind: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ka_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kc_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_ids: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev_ids: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ka_ids: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kc_ids: Option<Vec<String>>,
}

impl SplitManifest {
    pub fn new(kind: &str, seed: u64) -> SplitManifest {
        SplitManifest {
            format_version: crate::data::FORMAT_VERSION.to_string(),
            kind: kind.to_string(),
            seed,
            fraction: None,
            ka_fraction: None,
            kc_fraction: None,
            train_ids: None,
            dev_ids: None,
            ids: None,
            ka_ids: None,
            kc_ids: None,
        }
    }
}

pub fn ids_of(examples: &[RawExample]) -> Vec<String> {
    examples.iter().map(|e| e.example_id.clone()).collect()
}

/// Share of dev examples whose database id also appears in train. The IID
/// property holds when this is high.
pub fn schema_overlap(train: &[RawExample], dev: &[RawExample]) -> f64 {
    if dev.is_empty() {
        return 1.0;
    }
    let train_dbs: std::collections::HashSet<&str> =
        train.iter().map(|e| e.db_id.as_str()).collect();
    let covered = dev
        .iter()
        .filter(|e| train_dbs.contains(e.db_id.as_str()))
        .count();
    covered as f64 / dev.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_turn(n: usize) -> Vec<RawExample> {
        (0..n)
            .map(|i| RawExample {
                example_id: i.to_string(),
                db_id: format!("db{}", i % 4),
                question: "q".into(),
                gold_query: "select a from t".into(),
                context: vec![],
                interaction_id: None,
                turn_index: None,
            })
            .collect()
    }

    fn multi_turn(interactions: usize, turns: usize) -> Vec<RawExample> {
        let mut out = Vec::new();
        for i in 0..interactions {
            for k in 0..turns {
                out.push(RawExample {
                    example_id: format!("{i}-{k}"),
                    db_id: format!("db{}", i % 3),
                    question: "q".into(),
                    gold_query: "select a from t".into(),
                    context: vec![],
                    interaction_id: Some(i),
                    turn_index: Some(k),
                });
            }
        }
        out
    }

    #[test]
    fn resplit_preserves_sizes_and_conserves_ids() {
        let all = single_turn(100);
        let (train, dev) = (all[..80].to_vec(), all[80..].to_vec());
        let (train2, dev2) = iid_resplit(&train, &dev, 11).unwrap();
        assert_eq!(train2.len(), 80);
        assert_eq!(dev2.len(), 20);
        let mut ids: Vec<String> = ids_of(&train2);
        ids.extend(ids_of(&dev2));
        ids.sort();
        let mut expected: Vec<String> = ids_of(&all);
        expected.sort();
        assert_eq!(ids, expected);
        // membership actually changed for this seed
        assert_ne!(ids_of(&train2), ids_of(&train));
    }

    #[test]
    fn resplit_is_deterministic_per_seed() {
        let all = single_turn(50);
        let (train, dev) = (all[..40].to_vec(), all[40..].to_vec());
        let a = iid_resplit(&train, &dev, 5).unwrap();
        let b = iid_resplit(&train, &dev, 5).unwrap();
        assert_eq!(a, b);
        let c = iid_resplit(&train, &dev, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn resplit_rejects_overlapping_ids() {
        let all = single_turn(10);
        assert!(matches!(
            iid_resplit(&all[..6], &all[4..], 0),
            Err(SplitError::OverlappingIds(_))
        ));
    }

    #[test]
    fn resplit_keeps_interactions_whole() {
        let all = multi_turn(10, 3);
        let (train, dev) = (all[..21].to_vec(), all[21..].to_vec());
        let (train2, dev2) = iid_resplit(&train, &dev, 13).unwrap();
        assert_eq!(train2.len() + dev2.len(), 30);
        for side in [&train2, &dev2] {
            let iids: std::collections::HashSet<usize> =
                side.iter().map(|e| e.interaction_id.unwrap()).collect();
            for iid in iids {
                let turns = side
                    .iter()
                    .filter(|e| e.interaction_id == Some(iid))
                    .count();
                assert_eq!(turns, 3, "interaction {iid} split across sides");
            }
        }
    }

    #[test]
    fn fraction_identity_and_floor() {
        let all = single_turn(40);
        assert_eq!(fraction_subset(&all, 1.0, 3).unwrap(), all);
        assert_eq!(fraction_subset(&all, 0.1, 3).unwrap().len(), 4);
    }

    #[test]
    fn fractions_nest_under_one_seed() {
        let all = single_turn(200);
        let mut previous: Option<std::collections::HashSet<String>> = None;
        for fraction in [0.05, 0.1, 0.2, 0.4] {
            let subset = fraction_subset(&all, fraction, 9).unwrap();
            let ids: std::collections::HashSet<String> = ids_of(&subset).into_iter().collect();
            if let Some(prev) = &previous {
                assert!(prev.is_subset(&ids), "fraction {fraction} not nested");
            }
            previous = Some(ids);
        }
    }

    #[test]
    fn invalid_fraction_rejected() {
        let all = single_turn(4);
        assert!(matches!(
            fraction_subset(&all, 0.0, 1),
            Err(SplitError::InvalidFraction(_))
        ));
        assert!(matches!(
            fraction_subset(&all, 1.2, 1),
            Err(SplitError::InvalidFraction(_))
        ));
    }

    #[test]
    fn ka_kc_prefixes_share_the_smaller_set() {
        let all = single_turn(100);
        let (ka, kc) = ka_kc_schedule(&all, 1.0, 0.05, 21).unwrap();
        assert_eq!(ka.len(), 100);
        assert_eq!(kc.len(), 5);
        let ka_ids: std::collections::HashSet<String> = ids_of(&ka).into_iter().collect();
        for id in ids_of(&kc) {
            assert!(ka_ids.contains(&id));
        }
        let (ka2, kc2) = ka_kc_schedule(&all, 0.05, 0.05, 21).unwrap();
        assert_eq!(ka2, kc2);
    }

    #[test]
    fn schema_overlap_counts_dev_dbs_in_train() {
        let train = single_turn(8); // dbs 0..4 all present
        let mut dev = single_turn(4);
        for d in &mut dev {
            d.example_id = format!("d{}", d.example_id);
        }
        assert_eq!(schema_overlap(&train, &dev), 1.0);
        dev[0].db_id = "unseen".into();
        assert_eq!(schema_overlap(&train, &dev), 0.75);
    }
}
