//! Per-triplet decisions and their aggregation into ABX records.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{unordered_pairs, AlignmentIndex};
use crate::error::{AbxError, Result};
use crate::store::{EmbeddingMatrix, EmbeddingSource};
use crate::triplet::{
    enumerate_all_triplets, sample_triplets, Triplet, TripletMode, DEFAULT_ENUMERATION_CAP,
};

fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| f64::from(a) * f64::from(b))
        .sum()
}

fn norm(u: &[f32]) -> f64 {
    dot(u, u).sqrt()
}

fn distance_from_parts(dot: f64, norm_u: f64, norm_v: f64) -> f64 {
    (1.0 - dot / (norm_u * norm_v)).clamp(0.0, 2.0)
}

/// `1 - cos(u, v)`, accumulated in f64.
pub fn cosine_distance(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(AbxError::DimMismatch(u.len(), v.len()));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(AbxError::ZeroNorm);
    }
    Ok(distance_from_parts(dot(u, v), nu, nv))
}

/// Half-point units: 2 = correct, 1 = tie, 0 = wrong.
fn decide(d_xa: f64, d_xb: f64) -> u64 {
    match d_xa.partial_cmp(&d_xb) {
        Some(std::cmp::Ordering::Less) => 2,
        Some(std::cmp::Ordering::Greater) => 0,
        _ => 1,
    }
}

/// 1 if X is strictly closer to A, 0 if strictly closer to B, 0.5 on an
/// exact tie of the f64 distances.
pub fn score_triplet(x: &[f32], a: &[f32], b: &[f32]) -> Result<f64> {
    let d_xa = cosine_distance(x, a)?;
    let d_xb = cosine_distance(x, b)?;
    Ok(decide(d_xa, d_xb) as f64 / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerScope {
    Layer(u32),
    Averaged,
}

impl fmt::Display for LayerScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerScope::Layer(l) => write!(f, "{l}"),
            LayerScope::Averaged => f.write_str("avg"),
        }
    }
}

impl FromStr for LayerScope {
    type Err = AbxError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg" | "averaged" => Ok(LayerScope::Averaged),
            _ => s
                .parse()
                .map(LayerScope::Layer)
                .map_err(|_| AbxError::Table(format!("bad layer value {s:?}"))),
        }
    }
}

impl Serialize for LayerScope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LayerScope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Aggregated score of one (mode, pair, layer, checkpoint) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbxRecord {
    pub mode: TripletMode,
    pub lang1: String,
    pub lang2: String,
    pub layer: LayerScope,
    pub checkpoint: u64,
    pub score: f64,
    pub n_triplets: u64,
    pub tie_count: u64,
    pub seed: u64,
}

impl AbxRecord {
    pub fn involves(&self, language: &str) -> bool {
        self.lang1 == language || self.lang2 == language
    }

    /// The pair with its languages in sorted order.
    pub fn pair_key(&self) -> (String, String) {
        if self.lang1 <= self.lang2 {
            (self.lang1.clone(), self.lang2.clone())
        } else {
            (self.lang2.clone(), self.lang1.clone())
        }
    }
}

/// Tallies for the triplets whose X came from one language of the pair.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DirectionTally {
    pub x_language: String,
    pub n_triplets: u64,
    pub half_points: u64,
    pub tie_count: u64,
}

impl DirectionTally {
    pub fn score(&self) -> Option<f64> {
        (self.n_triplets > 0).then(|| self.half_points as f64 / (2 * self.n_triplets) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellScore {
    pub record: AbxRecord,
    /// `[lang1 as X, lang2 as X]`.
    pub directions: [DirectionTally; 2],
}

/// Matrices and row norms for the languages one cell touches.
struct CellMatrices {
    by_language: HashMap<String, (Arc<EmbeddingMatrix>, Vec<f64>)>,
    checkpoint: u64,
    layer: u32,
}

impl CellMatrices {
    fn load<S: EmbeddingSource + ?Sized>(
        source: &S,
        languages: impl IntoIterator<Item = String>,
        checkpoint: u64,
        layer: u32,
    ) -> Result<Self> {
        let mut by_language = HashMap::new();
        let mut dim = None;
        for lang in languages {
            if by_language.contains_key(&lang) {
                continue;
            }
            let m = source.matrix(checkpoint, layer, &lang)?;
            if let Some(d) = dim {
                if d != m.dim() {
                    return Err(AbxError::DimMismatch(d, m.dim()));
                }
            }
            dim = Some(m.dim());
            let norms = (0..m.n_rows()).map(|i| norm(m.row(i))).collect();
            by_language.insert(lang, (m, norms));
        }
        Ok(CellMatrices {
            by_language,
            checkpoint,
            layer,
        })
    }

    fn lookup(&self, language: &str, meaning_id: u64) -> Result<(&[f32], f64)> {
        let (m, norms) = self
            .by_language
            .get(language)
            .ok_or_else(|| AbxError::MissingMatrix {
                checkpoint: self.checkpoint,
                layer: self.layer,
                language: language.to_string(),
            })?;
        let i = m.row_index(meaning_id).ok_or_else(|| AbxError::UnknownMeaning {
            checkpoint: self.checkpoint,
            layer: self.layer,
            language: language.to_string(),
            meaning_id,
        })?;
        Ok((m.row(i), norms[i]))
    }

    fn half_points(&self, t: &Triplet) -> Result<u64> {
        let (x, nx) = self.lookup(t.x.language, t.x.meaning_id)?;
        let (a, na) = self.lookup(t.a.language, t.a.meaning_id)?;
        let (b, nb) = self.lookup(t.b.language, t.b.meaning_id)?;
        let d_xa = distance_from_parts(dot(x, a), nx, na);
        let d_xb = distance_from_parts(dot(x, b), nx, nb);
        Ok(decide(d_xa, d_xb))
    }

    fn tally<'a>(
        &self,
        lang1: &str,
        lang2: &str,
        triplets: impl Iterator<Item = Triplet<'a>>,
    ) -> Result<[DirectionTally; 2]> {
        let mut dirs = [
            DirectionTally {
                x_language: lang1.to_string(),
                ..Default::default()
            },
            DirectionTally {
                x_language: lang2.to_string(),
                ..Default::default()
            },
        ];
        for t in triplets {
            let hp = self.half_points(&t)?;
            let d = &mut dirs[usize::from(!t.x_is_lang1)];
            d.n_triplets += 1;
            d.half_points += hp;
            d.tie_count += u64::from(hp == 1);
        }
        Ok(dirs)
    }
}

/// Languages whose matrices a (mode, pair) cell may read.
fn cell_languages(index: &AlignmentIndex, mode: TripletMode, lang1: &str, lang2: &str) -> Vec<String> {
    if mode == TripletMode::BaselineMd {
        index.languages().to_vec()
    } else {
        vec![lang1.to_string(), lang2.to_string()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSpec<'a> {
    pub mode: TripletMode,
    pub lang1: &'a str,
    pub lang2: &'a str,
    pub layer: u32,
    pub checkpoint: u64,
}

fn finish(spec: &CellSpec, seed: u64, directions: [DirectionTally; 2]) -> CellScore {
    let n: u64 = directions.iter().map(|d| d.n_triplets).sum();
    let hp: u64 = directions.iter().map(|d| d.half_points).sum();
    let ties: u64 = directions.iter().map(|d| d.tie_count).sum();
    CellScore {
        record: AbxRecord {
            mode: spec.mode,
            lang1: spec.lang1.to_string(),
            lang2: spec.lang2.to_string(),
            layer: LayerScope::Layer(spec.layer),
            checkpoint: spec.checkpoint,
            score: hp as f64 / (2 * n) as f64,
            n_triplets: n,
            tie_count: ties,
            seed,
        },
        directions,
    }
}

/// Scores exactly `n` sampled triplets, keeping the per-direction tallies.
pub fn score_cell_detailed<S: EmbeddingSource + ?Sized>(
    source: &S,
    index: &AlignmentIndex,
    spec: &CellSpec,
    n: usize,
    seed: u64,
) -> Result<CellScore> {
    let sampler = sample_triplets(index, spec.mode, spec.lang1, spec.lang2, n, seed)?;
    let mats = CellMatrices::load(
        source,
        cell_languages(index, spec.mode, spec.lang1, spec.lang2),
        spec.checkpoint,
        spec.layer,
    )?;
    let dirs = mats.tally(spec.lang1, spec.lang2, sampler)?;
    Ok(finish(spec, seed, dirs))
}

#[allow(clippy::too_many_arguments)]
pub fn score_cell<S: EmbeddingSource + ?Sized>(
    source: &S,
    index: &AlignmentIndex,
    mode: TripletMode,
    pair: (&str, &str),
    layer: u32,
    checkpoint: u64,
    n: usize,
    seed: u64,
) -> Result<AbxRecord> {
    let spec = CellSpec {
        mode,
        lang1: pair.0,
        lang2: pair.1,
        layer,
        checkpoint,
    };
    score_cell_detailed(source, index, &spec, n, seed).map(|c| c.record)
}

/// Exact score over every valid triplet of the cell; `seed` is recorded as 0.
pub fn score_cell_exhaustive<S: EmbeddingSource + ?Sized>(
    source: &S,
    index: &AlignmentIndex,
    mode: TripletMode,
    pair: (&str, &str),
    layer: u32,
    checkpoint: u64,
) -> Result<AbxRecord> {
    let spec = CellSpec {
        mode,
        lang1: pair.0,
        lang2: pair.1,
        layer,
        checkpoint,
    };
    let all = enumerate_all_triplets(index, mode, pair.0, pair.1, DEFAULT_ENUMERATION_CAP)?;
    let mats = CellMatrices::load(
        source,
        cell_languages(index, mode, pair.0, pair.1),
        checkpoint,
        layer,
    )?;
    let dirs = mats.tally(pair.0, pair.1, all)?;
    Ok(finish(&spec, 0, dirs).record)
}

/// Unweighted mean over the configured layer set. Triplet and tie counts are
/// summed; the seed of the first layer's record is kept.
pub fn average_over_layers(records: &[AbxRecord], layers: &[u32]) -> Result<AbxRecord> {
    let first = records
        .first()
        .ok_or_else(|| AbxError::InvalidRequest("no records to average".into()))?;
    let mut by_layer: BTreeMap<u32, &AbxRecord> = BTreeMap::new();
    for r in records {
        if r.mode != first.mode || r.pair_key() != first.pair_key() || r.checkpoint != first.checkpoint {
            return Err(AbxError::InvalidRequest(
                "records to average must share mode, pair and checkpoint".into(),
            ));
        }
        let LayerScope::Layer(l) = r.layer else {
            return Err(AbxError::InvalidRequest("cannot re-average an averaged record".into()));
        };
        if by_layer.insert(l, r).is_some() {
            return Err(AbxError::InvalidRequest(format!("layer {l} given twice")));
        }
    }
    if layers.is_empty() {
        return Err(AbxError::InvalidRequest("empty layer set".into()));
    }
    let mut sum = 0.0;
    let (mut n, mut ties) = (0, 0);
    for l in layers {
        let r = by_layer.get(l).ok_or(AbxError::MissingLayer(*l))?;
        sum += r.score;
        n += r.n_triplets;
        ties += r.tie_count;
    }
    let seed = by_layer[&layers[0]].seed;
    Ok(AbxRecord {
        mode: first.mode,
        lang1: first.lang1.clone(),
        lang2: first.lang2.clone(),
        layer: LayerScope::Averaged,
        checkpoint: first.checkpoint,
        score: sum / layers.len() as f64,
        n_triplets: n,
        tie_count: ties,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalLanguageScore {
    pub mode: TripletMode,
    pub language: String,
    pub checkpoint: u64,
    pub layer_scope: LayerScope,
    pub score: f64,
    pub n_pairs: usize,
}

/// Mean of each language's pair scores over every pairing within
/// `languages`, for one (mode, checkpoint, layer scope).
pub fn global_language_scores(
    records: &[AbxRecord],
    mode: TripletMode,
    checkpoint: u64,
    layer_scope: LayerScope,
    languages: &[String],
) -> Result<Vec<GlobalLanguageScore>> {
    let mut by_pair: BTreeMap<(String, String), f64> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.mode == mode && r.checkpoint == checkpoint && r.layer == layer_scope)
    {
        if by_pair.insert(r.pair_key(), r.score).is_some() {
            return Err(AbxError::InvalidRequest(format!(
                "pair {:?} scored twice",
                r.pair_key()
            )));
        }
    }
    let pairs = unordered_pairs(languages);
    let missing: Vec<_> = pairs
        .iter()
        .filter(|p| !by_pair.contains_key(*p))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(AbxError::IncompletePairs(missing));
    }
    let mut langs = languages.to_vec();
    langs.sort();
    langs.dedup();
    Ok(langs
        .iter()
        .map(|lang| {
            let scores: Vec<f64> = pairs
                .iter()
                .filter(|(a, b)| a == lang || b == lang)
                .map(|p| by_pair[p])
                .collect();
            GlobalLanguageScore {
                mode,
                language: lang.clone(),
                checkpoint,
                layer_scope,
                score: scores.iter().sum::<f64>() / scores.len() as f64,
                n_pairs: scores.len(),
            }
        })
        .collect())
}
