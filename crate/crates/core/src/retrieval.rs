//! Cross-lingual top-1 retrieval over the shared-meaning pool.

use serde::{Deserialize, Serialize};

use crate::corpus::AlignmentIndex;
use crate::error::{AbxError, Result};
use crate::scorer::{cosine_distance, AbxRecord};
use crate::stats::{pearson, spearman, CorrelationResult};
use crate::store::{EmbeddingMatrix, EmbeddingSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub lang1: String,
    pub lang2: String,
    pub layer: u32,
    pub checkpoint: u64,
    pub acc_1to2: f64,
    pub acc_2to1: f64,
    pub acc_mean: f64,
    pub pool_size: usize,
}

/// Fraction of queries whose nearest candidate carries the query's meaning.
/// Candidates tied at the minimum distance share the credit equally.
fn directional_accuracy(
    queries: &EmbeddingMatrix,
    candidates: &EmbeddingMatrix,
    pool: &[u64],
) -> Result<f64> {
    let cand_rows: Vec<&[f32]> = pool
        .iter()
        .map(|&m| {
            candidates.vector(m).ok_or(AbxError::UnknownMeaning {
                checkpoint: candidates.checkpoint(),
                layer: candidates.layer(),
                language: candidates.language().to_string(),
                meaning_id: m,
            })
        })
        .collect::<Result<_>>()?;
    let mut credit = 0.0;
    for (qi, &m) in pool.iter().enumerate() {
        let q = queries.vector(m).ok_or(AbxError::UnknownMeaning {
            checkpoint: queries.checkpoint(),
            layer: queries.layer(),
            language: queries.language().to_string(),
            meaning_id: m,
        })?;
        let mut best = f64::INFINITY;
        let mut tied = 0usize;
        let mut truth_tied = false;
        for (ci, c) in cand_rows.iter().enumerate() {
            let d = cosine_distance(q, c)?;
            if d < best {
                best = d;
                tied = 1;
                truth_tied = ci == qi;
            } else if d == best {
                tied += 1;
                truth_tied |= ci == qi;
            }
        }
        if truth_tied {
            credit += 1.0 / tied as f64;
        }
    }
    Ok(credit / pool.len() as f64)
}

pub fn retrieval_top1<S: EmbeddingSource + ?Sized>(
    source: &S,
    index: &AlignmentIndex,
    pair: (&str, &str),
    layer: u32,
    checkpoint: u64,
) -> Result<RetrievalResult> {
    let (l1, l2) = pair;
    let pool = index.shared_meanings(l1, l2)?;
    if pool.len() < 2 {
        return Err(AbxError::PairSkipped {
            lang1: l1.to_string(),
            lang2: l2.to_string(),
            shared: pool.len(),
            required: 2,
        });
    }
    let m1 = source.matrix(checkpoint, layer, l1)?;
    let m2 = source.matrix(checkpoint, layer, l2)?;
    let acc_1to2 = directional_accuracy(&m1, &m2, &pool)?;
    let acc_2to1 = directional_accuracy(&m2, &m1, &pool)?;
    Ok(RetrievalResult {
        lang1: l1.to_string(),
        lang2: l2.to_string(),
        layer,
        checkpoint,
        acc_1to2,
        acc_2to1,
        acc_mean: (acc_1to2 + acc_2to1) / 2.0,
        pool_size: pool.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdRetrievalCorrelation {
    pub pearson: CorrelationResult,
    pub spearman: CorrelationResult,
}

/// Correlates MD scores with mean retrieval accuracy over the same pairs.
/// The caller picks the layer scope and checkpoint of each input.
pub fn correlate_md_retrieval(
    md_records: &[AbxRecord],
    retrieval: &[RetrievalResult],
) -> Result<MdRetrievalCorrelation> {
    use std::collections::BTreeMap;
    let key = |a: &str, b: &str| {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    };
    let mut md = BTreeMap::new();
    for r in md_records {
        if md.insert(key(&r.lang1, &r.lang2), r.score).is_some() {
            return Err(AbxError::Stats(format!("pair {}-{} has two MD scores", r.lang1, r.lang2)));
        }
    }
    let mut ret = BTreeMap::new();
    for r in retrieval {
        if ret.insert(key(&r.lang1, &r.lang2), r.acc_mean).is_some() {
            return Err(AbxError::Stats(format!(
                "pair {}-{} has two retrieval results",
                r.lang1, r.lang2
            )));
        }
    }
    if md.keys().ne(ret.keys()) {
        return Err(AbxError::Stats("MD and retrieval inputs cover different pairs".into()));
    }
    let x: Vec<f64> = md.values().copied().collect();
    let y: Vec<f64> = ret.values().copied().collect();
    Ok(MdRetrievalCorrelation {
        pearson: pearson(&x, &y)?,
        spearman: spearman(&x, &y)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use crate::store::InMemoryStore;

    fn index(m: u64) -> AlignmentIndex {
        AlignmentIndex::from_pairs(
            vec!["en".into(), "fr".into()],
            (0..m).flat_map(|i| [(i, "en"), (i, "fr")]),
        )
        .unwrap()
    }

    fn one_hot(m: usize, perm: &[usize]) -> Vec<f32> {
        let mut v = vec![0f32; m * m];
        for (row, &hot) in perm.iter().enumerate() {
            v[row * m + hot] = 1.0;
        }
        v
    }

    fn store(m: usize, fr_perm: &[usize]) -> InMemoryStore {
        let ids: Vec<u64> = (0..m as u64).collect();
        let id: Vec<usize> = (0..m).collect();
        let mut s = InMemoryStore::new();
        s.insert(EmbeddingMatrix::new(0, 0, "en", m, one_hot(m, &id), ids.clone()).unwrap());
        s.insert(EmbeddingMatrix::new(0, 0, "fr", m, one_hot(m, fr_perm), ids).unwrap());
        s
    }

    #[test]
    fn identical_orthonormal_vectors_retrieve_perfectly() {
        let perm: Vec<usize> = (0..8).collect();
        let r = retrieval_top1(&store(8, &perm), &index(8), ("en", "fr"), 0, 0).unwrap();
        assert_eq!((r.acc_1to2, r.acc_2to1, r.acc_mean), (1.0, 1.0, 1.0));
        assert_eq!(r.pool_size, 8);
    }

    #[test]
    fn random_permutation_expectation_is_one_over_pool() {
        // A uniformly random permutation has one fixed point on average.
        let m = 10;
        let mut rng = StreamRng::new(77);
        let trials = 400;
        let mut total = 0.0;
        for _ in 0..trials {
            let mut perm: Vec<usize> = (0..m).collect();
            for i in (1..m).rev() {
                perm.swap(i, rng.below_usize(i + 1));
            }
            let fixed = perm.iter().enumerate().filter(|(i, &p)| *i == p).count();
            let r = retrieval_top1(&store(m, &perm), &index(m as u64), ("en", "fr"), 0, 0).unwrap();
            assert_eq!(r.acc_1to2, fixed as f64 / m as f64);
            total += r.acc_mean;
        }
        let mean = total / trials as f64;
        // fixed points of a random permutation have variance 1, so the
        // per-trial accuracy has sd 1/m
        let se = (1.0 / m as f64) / (trials as f64).sqrt();
        assert!((mean - 0.1).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn hand_built_two_misses_out_of_five() {
        // Queries at angles 0, 20, 40, 60, 80 degrees. Candidates match for
        // meanings 0, 2, 4; candidates 1 and 3 are swapped, so their queries
        // find the wrong candidate.
        let deg = |d: f64| {
            let r = d.to_radians();
            [r.cos() as f32, r.sin() as f32]
        };
        let q: Vec<f32> = [0., 20., 40., 60., 80.].iter().flat_map(|&d| deg(d)).collect();
        let c: Vec<f32> = [0., 61., 40., 21., 80.].iter().flat_map(|&d| deg(d)).collect();
        let ids: Vec<u64> = (0..5).collect();
        let mut s = InMemoryStore::new();
        s.insert(EmbeddingMatrix::new(0, 0, "en", 2, q, ids.clone()).unwrap());
        s.insert(EmbeddingMatrix::new(0, 0, "fr", 2, c, ids).unwrap());
        let r = retrieval_top1(&s, &index(5), ("en", "fr"), 0, 0).unwrap();
        assert!((r.acc_1to2 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn ties_give_fractional_credit() {
        let ids: Vec<u64> = (0..2).collect();
        let mut s = InMemoryStore::new();
        s.insert(EmbeddingMatrix::new(0, 0, "en", 2, vec![1., 0., 0., 1.], ids.clone()).unwrap());
        s.insert(EmbeddingMatrix::new(0, 0, "fr", 2, vec![1., 1., 1., 1.], ids).unwrap());
        let r = retrieval_top1(&s, &index(2), ("en", "fr"), 0, 0).unwrap();
        assert_eq!(r.acc_1to2, 0.5);
    }

    #[test]
    fn swapping_languages_swaps_directions() {
        let perm = [1usize, 0, 2, 3];
        let s = store(4, &perm);
        let a = retrieval_top1(&s, &index(4), ("en", "fr"), 0, 0).unwrap();
        let b = retrieval_top1(&s, &index(4), ("fr", "en"), 0, 0).unwrap();
        assert_eq!(a.acc_1to2, b.acc_2to1);
        assert_eq!(a.acc_mean, b.acc_mean);
    }
}
