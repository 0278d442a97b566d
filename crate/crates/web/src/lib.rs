//! Browser bindings for the interactive demo page in `www/`.
//!
//! Each export takes and returns JSON strings. The `*_json` functions carry
//! the logic and run natively too, which is how the tests exercise them.

use abx_core::corpus::{unordered_pairs, AlignmentIndex, SentenceRecord};
use abx_core::report::{normalize_per_row, HeatmapMatrix};
use abx_core::retrieval::retrieval_top1;
use abx_core::rng::derive_seed;
use abx_core::scorer::score_cell;
use abx_core::synthetic::{planted, PlantedConfig, SyntheticFixture};
use abx_core::triplet::{sample_triplets, TripletMode};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

const LANGUAGE_POOL: [&str; 6] = ["de", "en", "es", "fr", "sw", "zh"];

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct PlantedParams {
    pub n_languages: usize,
    pub n_meanings: usize,
    pub dim: usize,
    pub language_offset: f64,
    pub noise: f64,
    pub n_triplets: usize,
    pub seed: u32,
    /// Points on the offset sweep, from 0 to `sweep_max`.
    pub sweep_steps: usize,
    pub sweep_max: f64,
}

impl Default for PlantedParams {
    fn default() -> Self {
        PlantedParams {
            n_languages: 3,
            n_meanings: 12,
            dim: 24,
            language_offset: 0.5,
            noise: 0.2,
            n_triplets: 4000,
            seed: 1,
            sweep_steps: 9,
            sweep_max: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModeScores {
    pub language_offset: f64,
    pub ld: f64,
    pub md: f64,
    pub baseline_ld: f64,
    pub baseline_md: f64,
    pub retrieval: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlantedReport {
    pub languages: Vec<String>,
    pub current: ModeScores,
    pub sweep: Vec<ModeScores>,
}

fn fixture(p: &PlantedParams, offset: f64) -> Result<(SyntheticFixture, Vec<String>), String> {
    if !(2..=LANGUAGE_POOL.len()).contains(&p.n_languages) {
        return Err(format!("n_languages must be 2..={}", LANGUAGE_POOL.len()));
    }
    if p.n_meanings < 3 || p.n_meanings > 200 {
        return Err("n_meanings must be 3..=200".into());
    }
    if p.n_triplets == 0 || p.n_triplets > 50_000 {
        return Err("n_triplets must be 1..=50000".into());
    }
    let languages: Vec<String> = LANGUAGE_POOL[..p.n_languages].iter().map(|s| s.to_string()).collect();
    let cfg = PlantedConfig {
        languages: languages.clone(),
        n_meanings: p.n_meanings,
        dim: p.dim.max(p.n_languages + 1),
        language_offset: offset,
        noise: p.noise,
        seed: u64::from(p.seed),
        ..Default::default()
    };
    Ok((planted(&cfg).map_err(|e| e.to_string())?, languages))
}

/// Mean over every language pair of each mode's score and of retrieval.
fn scores_at(p: &PlantedParams, offset: f64) -> Result<ModeScores, String> {
    let (fx, languages) = fixture(p, offset)?;
    let pairs = unordered_pairs(&languages);
    let mut mean = [0.0; 4];
    for (mi, mode) in TripletMode::ALL.into_iter().enumerate() {
        for (a, b) in &pairs {
            let seed = derive_seed(u64::from(p.seed), &[mode.code()]);
            let r = score_cell(&fx.store, &fx.index, mode, (a, b), 0, 0, p.n_triplets, seed)
                .map_err(|e| e.to_string())?;
            mean[mi] += r.score / pairs.len() as f64;
        }
    }
    let mut retrieval = 0.0;
    for (a, b) in &pairs {
        let r = retrieval_top1(&fx.store, &fx.index, (a, b), 0, 0).map_err(|e| e.to_string())?;
        retrieval += r.acc_mean / pairs.len() as f64;
    }
    Ok(ModeScores {
        language_offset: offset,
        ld: mean[0],
        md: mean[1],
        baseline_ld: mean[2],
        baseline_md: mean[3],
        retrieval,
    })
}

pub fn planted_scores_json(params: &str) -> Result<String, String> {
    let p: PlantedParams = if params.trim().is_empty() {
        PlantedParams::default()
    } else {
        serde_json::from_str(params).map_err(|e| e.to_string())?
    };
    if p.sweep_steps > 41 {
        return Err("sweep_steps must be at most 41".into());
    }
    let current = scores_at(&p, p.language_offset)?;
    let sweep = (0..p.sweep_steps)
        .map(|i| {
            let t = if p.sweep_steps > 1 { i as f64 / (p.sweep_steps - 1) as f64 } else { 0.0 };
            scores_at(&p, t * p.sweep_max)
        })
        .collect::<Result<_, _>>()?;
    let report = PlantedReport {
        languages: LANGUAGE_POOL[..p.n_languages].iter().map(|s| s.to_string()).collect(),
        current,
        sweep,
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// A tiny parallel corpus: one row per meaning, columns in `CORPUS_LANGUAGES` order.
const CORPUS_LANGUAGES: [&str; 4] = ["de", "en", "es", "fr"];
const CORPUS: [[&str; 4]; 6] = [
    ["Die Katze schläft auf dem Sofa.", "The cat sleeps on the sofa.", "El gato duerme en el sofá.", "Le chat dort sur le canapé."],
    ["Heute regnet es.", "It is raining today.", "Hoy llueve.", "Il pleut aujourd'hui."],
    ["Ich hätte gern eine Tasse Kaffee.", "I would like a cup of coffee.", "Quisiera una taza de café.", "Je voudrais une tasse de café."],
    ["Der Zug fährt um acht ab.", "The train leaves at eight.", "El tren sale a las ocho.", "Le train part à huit heures."],
    ["Wo ist die Bibliothek?", "Where is the library?", "¿Dónde está la biblioteca?", "Où est la bibliothèque ?"],
    ["Meine Schwester spielt Klavier.", "My sister plays the piano.", "Mi hermana toca el piano.", "Ma sœur joue du piano."],
];

fn corpus_records() -> Vec<SentenceRecord> {
    CORPUS
        .iter()
        .enumerate()
        .flat_map(|(m, row)| {
            row.iter().zip(CORPUS_LANGUAGES).map(move |(text, lang)| SentenceRecord {
                meaning_id: m as u64,
                language: lang.to_string(),
                text: text.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ShownSentence {
    pub language: String,
    pub meaning_id: u64,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ShownTriplet {
    pub x: ShownSentence,
    pub a: ShownSentence,
    pub b: ShownSentence,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TripletExamples {
    pub mode: String,
    /// What A shares with X that B does not.
    pub a_matches_on: String,
    pub triplets: Vec<ShownTriplet>,
}

pub fn triplet_examples_json(mode: &str, lang1: &str, lang2: &str, count: u32, seed: u32) -> Result<String, String> {
    let mode: TripletMode = mode.parse().map_err(|e: abx_core::AbxError| e.to_string())?;
    let records = corpus_records();
    let index = AlignmentIndex::from_records(&records, None).map_err(|e| e.to_string())?;
    let text = |lang: &str, m: u64| -> ShownSentence {
        let col = CORPUS_LANGUAGES.iter().position(|l| *l == lang).expect("corpus language");
        ShownSentence {
            language: lang.to_string(),
            meaning_id: m,
            text: CORPUS[m as usize][col].to_string(),
        }
    };
    let sampler = sample_triplets(&index, mode, lang1, lang2, count.min(50) as usize, u64::from(seed))
        .map_err(|e| e.to_string())?;
    let triplets = sampler
        .map(|t| ShownTriplet {
            x: text(t.x.language, t.x.meaning_id),
            a: text(t.a.language, t.a.meaning_id),
            b: text(t.b.language, t.b.meaning_id),
        })
        .collect();
    let a_matches_on = match mode {
        TripletMode::Ld => "language (meanings all differ)",
        TripletMode::Md => "meaning (A and B share a language)",
        TripletMode::BaselineLd => "nothing: all share the language, meanings all differ",
        TripletMode::BaselineMd => "nothing: all share the meaning, languages all differ",
    };
    serde_json::to_string(&TripletExamples {
        mode: mode.as_str().to_string(),
        a_matches_on: a_matches_on.to_string(),
        triplets,
    })
    .map_err(|e| e.to_string())
}

pub fn normalize_heatmap_json(matrix: &str) -> Result<String, String> {
    let m: HeatmapMatrix = serde_json::from_str(matrix).map_err(|e| e.to_string())?;
    let n = normalize_per_row(&m).map_err(|e| e.to_string())?;
    serde_json::to_string(&n).map_err(|e| e.to_string())
}

/// LD, MD, both baselines and retrieval on a planted fixture, at the
/// requested language offset and along an offset sweep.
#[wasm_bindgen]
pub fn planted_scores(params: &str) -> Result<String, JsValue> {
    planted_scores_json(params).map_err(|e| JsValue::from_str(&e))
}

/// Sampled triplets over the built-in parallel corpus.
#[wasm_bindgen]
pub fn triplet_examples(mode: &str, lang1: &str, lang2: &str, count: u32, seed: u32) -> Result<String, JsValue> {
    triplet_examples_json(mode, lang1, lang2, count, seed).map_err(|e| JsValue::from_str(&e))
}

/// Per-row min-max normalization of a heatmap.
#[wasm_bindgen]
pub fn normalize_heatmap(matrix: &str) -> Result<String, JsValue> {
    normalize_heatmap_json(matrix).map_err(|e| JsValue::from_str(&e))
}
