//! LD-guided checkpoint and source-language selection.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{AbxError, Result};
use crate::rng::{derive_seed, fnv1a64, StreamRng};
use crate::stats::{mean_sd, wilcoxon_signed_rank, RankTestResult};

/// language → checkpoint → value
pub type CheckpointSeries = BTreeMap<String, BTreeMap<u64, f64>>;
/// (source, target) → value
pub type PairMatrix = BTreeMap<(String, String), f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSelection {
    pub language: String,
    pub abx_checkpoint: u64,
    pub final_checkpoint: u64,
    pub best_checkpoint: u64,
    pub abx_accuracy: f64,
    pub final_accuracy: f64,
    pub best_accuracy: f64,
    pub gap_abx: f64,
    pub gap_final: f64,
    /// `gap_final - gap_abx`, evaluated as `abx_accuracy - final_accuracy`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSelectionSummary {
    pub selections: Vec<CheckpointSelection>,
    pub n_languages: usize,
    pub n_improved: usize,
    pub mean_delta: f64,
    pub sd_delta: f64,
    /// None when every delta is zero.
    pub wilcoxon: Option<RankTestResult>,
}

/// First key holding the extreme value under `better`.
fn arg_extreme(series: &BTreeMap<u64, f64>, better: impl Fn(f64, f64) -> bool) -> (u64, f64) {
    let mut it = series.iter();
    let (&k0, &v0) = it.next().expect("non-empty series");
    it.fold((k0, v0), |(bk, bv), (&k, &v)| if better(v, bv) { (k, v) } else { (bk, bv) })
}

/// Per language, picks the checkpoint of minimal LD (earliest on ties) and
/// compares its accuracy with the final checkpoint's.
pub fn select_checkpoint_by_ld(
    ld: &CheckpointSeries,
    accuracy: &CheckpointSeries,
    final_checkpoint: u64,
    excluded: &BTreeSet<u64>,
) -> Result<CheckpointSelectionSummary> {
    if excluded.contains(&final_checkpoint) {
        return Err(AbxError::Selection(format!(
            "final checkpoint {final_checkpoint} is excluded"
        )));
    }
    let ld_langs: BTreeSet<_> = ld.keys().collect();
    let acc_langs: BTreeSet<_> = accuracy.keys().collect();
    if ld_langs != acc_langs {
        return Err(AbxError::Selection(format!(
            "language sets differ: LD {ld_langs:?}, accuracy {acc_langs:?}"
        )));
    }
    let keep = |s: &BTreeMap<u64, f64>| -> BTreeMap<u64, f64> {
        s.iter()
            .filter(|(c, _)| !excluded.contains(c))
            .map(|(c, v)| (*c, *v))
            .collect()
    };
    let mut selections = Vec::with_capacity(ld.len());
    for (lang, ld_series) in ld {
        let l = keep(ld_series);
        let a = keep(&accuracy[lang]);
        if l.is_empty() {
            return Err(AbxError::Selection(format!("{lang}: empty series after exclusion")));
        }
        if !l.keys().eq(a.keys()) {
            return Err(AbxError::Selection(format!("{lang}: checkpoint axes differ")));
        }
        let final_accuracy = *a.get(&final_checkpoint).ok_or_else(|| {
            AbxError::Selection(format!("{lang}: no value at final checkpoint {final_checkpoint}"))
        })?;
        let (abx_checkpoint, _) = arg_extreme(&l, |v, best| v < best);
        let (best_checkpoint, best_accuracy) = arg_extreme(&a, |v, best| v > best);
        let abx_accuracy = a[&abx_checkpoint];
        selections.push(CheckpointSelection {
            language: lang.clone(),
            abx_checkpoint,
            final_checkpoint,
            best_checkpoint,
            abx_accuracy,
            final_accuracy,
            best_accuracy,
            gap_abx: best_accuracy - abx_accuracy,
            gap_final: best_accuracy - final_accuracy,
            delta: abx_accuracy - final_accuracy,
        });
    }
    let deltas: Vec<f64> = selections.iter().map(|s| s.delta).collect();
    let (mean_delta, sd_delta) = mean_sd(&deltas);
    let wilcoxon = if deltas.iter().any(|d| *d != 0.0) {
        Some(wilcoxon_signed_rank(&deltas)?)
    } else {
        None
    };
    Ok(CheckpointSelectionSummary {
        n_languages: selections.len(),
        n_improved: deltas.iter().filter(|d| **d > 0.0).count(),
        selections,
        mean_delta,
        sd_delta,
        wilcoxon,
    })
}

/// Mean outcome of `n_draws` uniform draws (with replacement) from
/// `candidates`: 1 when `abx_accuracy` is higher, 0.5 when equal, else 0.
pub fn win_rate_vs_random(abx_accuracy: f64, candidates: &[f64], n_draws: usize, seed: u64) -> Result<f64> {
    if candidates.is_empty() {
        return Err(AbxError::Selection("empty candidate pool".into()));
    }
    if n_draws == 0 {
        return Err(AbxError::Selection("n_draws must be at least 1".into()));
    }
    let mut rng = StreamRng::new(seed);
    let mut half_points = 0u64;
    for _ in 0..n_draws {
        let drawn = candidates[rng.below_usize(candidates.len())];
        half_points += match abx_accuracy.partial_cmp(&drawn) {
            Some(std::cmp::Ordering::Greater) => 2,
            Some(std::cmp::Ordering::Equal) => 1,
            _ => 0,
        };
    }
    Ok(half_points as f64 / (2 * n_draws) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRateOptions {
    pub n_draws: usize,
    pub seed: u64,
    /// Whether the ABX-selected source stays in the random pool.
    pub include_selected: bool,
}

impl Default for WinRateOptions {
    fn default() -> Self {
        WinRateOptions {
            n_draws: 100,
            seed: 0,
            include_selected: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSelection {
    pub target: String,
    pub abx_source: String,
    pub true_best_source: String,
    /// 1 + number of sources with strictly higher accuracy.
    pub rank_of_abx_source: usize,
    pub top_k_hits: BTreeMap<usize, bool>,
    pub abx_accuracy: f64,
    pub best_accuracy: f64,
    pub win_rate: f64,
    pub n_random_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSelectionSummary {
    pub selections: Vec<SourceSelection>,
    pub n_targets: usize,
    /// Targets whose ABX source reaches the best transfer accuracy.
    pub exact_matches: usize,
    pub top_k_matches: BTreeMap<usize, usize>,
    pub win_rate_mean: f64,
    pub win_rate_sd: f64,
}

fn lookup_ld(ld: &PairMatrix, s: &str, t: &str) -> Option<f64> {
    ld.get(&(s.to_string(), t.to_string()))
        .or_else(|| ld.get(&(t.to_string(), s.to_string())))
        .copied()
}

/// Seed used for one target's random draws.
pub fn target_seed(seed: u64, target: &str) -> u64 {
    derive_seed(seed, &[fnv1a64(target.as_bytes())])
}

/// For each target, picks the source of minimal LD (lexicographically
/// smallest code on ties) and scores that choice against the transfer
/// accuracy matrix. LD is looked up as (source, target) and falls back to
/// (target, source), so an unordered pair table also works.
pub fn select_source_by_ld(
    pair_ld: &PairMatrix,
    transfer: &PairMatrix,
    k_list: &[usize],
    opts: &WinRateOptions,
) -> Result<SourceSelectionSummary> {
    let languages: BTreeSet<&str> = transfer
        .keys()
        .flat_map(|(s, t)| [s.as_str(), t.as_str()])
        .collect();
    if languages.len() < 2 {
        return Err(AbxError::Selection("need at least two languages".into()));
    }
    let mut missing = Vec::new();
    for &t in &languages {
        for &s in &languages {
            if s == t {
                continue;
            }
            if !transfer.contains_key(&(s.to_string(), t.to_string())) {
                missing.push(format!("transfer {s}->{t}"));
            }
            if lookup_ld(pair_ld, s, t).is_none() {
                missing.push(format!("ld {s}-{t}"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(AbxError::Selection(format!("missing cells: {}", missing.join(", "))));
    }

    let mut selections = Vec::new();
    for &target in &languages {
        // BTreeSet iteration is sorted, so strict comparisons keep the
        // lexicographically smallest code on ties.
        let sources: Vec<&str> = languages.iter().copied().filter(|s| *s != target).collect();
        let acc = |s: &str| transfer[&(s.to_string(), target.to_string())];
        let ld = |s: &str| lookup_ld(pair_ld, s, target).expect("coverage checked");
        let mut abx = sources[0];
        let mut best = sources[0];
        for &s in &sources[1..] {
            if ld(s) < ld(abx) {
                abx = s;
            }
            if acc(s) > acc(best) {
                best = s;
            }
        }
        let abx_accuracy = acc(abx);
        let rank = 1 + sources.iter().filter(|&&s| acc(s) > abx_accuracy).count();
        let pool: Vec<f64> = sources
            .iter()
            .filter(|&&s| opts.include_selected || s != abx)
            .map(|&s| acc(s))
            .collect();
        let win_rate = win_rate_vs_random(abx_accuracy, &pool, opts.n_draws, target_seed(opts.seed, target))?;
        selections.push(SourceSelection {
            target: target.to_string(),
            abx_source: abx.to_string(),
            true_best_source: best.to_string(),
            rank_of_abx_source: rank,
            top_k_hits: k_list.iter().map(|&k| (k, rank <= k)).collect(),
            abx_accuracy,
            best_accuracy: acc(best),
            win_rate,
            n_random_draws: opts.n_draws,
        });
    }
    let rates: Vec<f64> = selections.iter().map(|s| s.win_rate).collect();
    let (win_rate_mean, win_rate_sd) = mean_sd(&rates);
    Ok(SourceSelectionSummary {
        n_targets: selections.len(),
        exact_matches: selections.iter().filter(|s| s.rank_of_abx_source == 1).count(),
        top_k_matches: k_list
            .iter()
            .map(|&k| (k, selections.iter().filter(|s| s.top_k_hits[&k]).count()))
            .collect(),
        selections,
        win_rate_mean,
        win_rate_sd,
    })
}
