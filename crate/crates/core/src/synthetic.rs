//! Synthetic stores with planted language and meaning structure.
//!
//! A sentence vector is
//! `meaning_scale * mu[m] + offset(layer, checkpoint) * e[lang] + noise * eps`
//! where `e[lang]` are one-hot directions in the first `n_languages`
//! coordinates, `mu[m]` lives in the remaining coordinates (Gaussian, or
//! one-hot when `orthonormal_meanings` is set) and `eps` is fresh Gaussian
//! noise for every stored row.

use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{AlignmentIndex, SentenceRecord};
use crate::error::{AbxError, Result};
use crate::rng::{derive_seed, fnv1a64, StreamRng};
use crate::store::{EmbeddingMatrix, InMemoryStore};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub languages: Vec<String>,
    pub n_meanings: usize,
    pub dim: usize,
    pub layers: Vec<u32>,
    pub checkpoints: Vec<u64>,
    pub language_offset: f64,
    pub meaning_scale: f64,
    pub noise: f64,
    pub orthonormal_meanings: bool,
    /// Offset grows by this fraction per layer position.
    pub layer_gain: f64,
    /// Offset grows by this fraction per checkpoint position.
    pub checkpoint_gain: f64,
    /// Probability that a (meaning, language) sentence is absent.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            languages: vec!["de".into(), "en".into(), "fr".into()],
            n_meanings: 8,
            dim: 16,
            layers: vec![0],
            checkpoints: vec![0],
            language_offset: 0.0,
            meaning_scale: 1.0,
            noise: 0.0,
            orthonormal_meanings: false,
            layer_gain: 0.0,
            checkpoint_gain: 0.0,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl PlantedConfig {
    /// Pure noise: no language or meaning signal at all.
    pub fn iid_gaussian(languages: Vec<String>, n_meanings: usize, dim: usize, seed: u64) -> Self {
        PlantedConfig {
            languages,
            n_meanings,
            dim,
            meaning_scale: 0.0,
            noise: 1.0,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticFixture {
    pub store: InMemoryStore,
    pub index: AlignmentIndex,
    pub records: Vec<SentenceRecord>,
}

fn gaussian(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng.inner_mut())
}

pub fn planted(cfg: &PlantedConfig) -> Result<SyntheticFixture> {
    let n_lang = cfg.languages.len();
    if cfg.dim == 0 || cfg.n_meanings == 0 || n_lang == 0 {
        return Err(AbxError::InvalidRequest("empty synthetic fixture".into()));
    }
    if cfg.language_offset != 0.0 && cfg.dim < n_lang {
        return Err(AbxError::InvalidRequest(format!(
            "dim {} cannot hold {n_lang} language directions",
            cfg.dim
        )));
    }
    let meaning_start = if cfg.dim > n_lang { n_lang } else { 0 };
    let meaning_dims = cfg.dim - meaning_start;
    if cfg.orthonormal_meanings && meaning_dims < cfg.n_meanings {
        return Err(AbxError::InvalidRequest(format!(
            "{meaning_dims} meaning dims cannot hold {} orthonormal meanings",
            cfg.n_meanings
        )));
    }

    let mut rng = StreamRng::new(cfg.seed);
    let meanings: Vec<Vec<f64>> = (0..cfg.n_meanings)
        .map(|m| {
            let mut v = vec![0.0; cfg.dim];
            if cfg.orthonormal_meanings {
                v[meaning_start + m] = 1.0;
            } else {
                for x in &mut v[meaning_start..] {
                    *x = gaussian(&mut rng) / (meaning_dims as f64).sqrt();
                }
            }
            v
        })
        .collect();

    let mut present = vec![vec![true; n_lang]; cfg.n_meanings];
    if cfg.dropout > 0.0 {
        for row in &mut present {
            for p in row.iter_mut() {
                *p = rng.unit_f64() >= cfg.dropout;
            }
        }
    }

    let mut records = Vec::new();
    for (m, row) in present.iter().enumerate() {
        for (li, lang) in cfg.languages.iter().enumerate() {
            if row[li] {
                records.push(SentenceRecord {
                    meaning_id: m as u64,
                    language: lang.clone(),
                    text: format!("[{lang}] sentence {m}"),
                });
            }
        }
    }
    let index = AlignmentIndex::from_records(&records, None)?;

    let mut store = InMemoryStore::new();
    for (ci, &ckpt) in cfg.checkpoints.iter().enumerate() {
        for (lpos, &layer) in cfg.layers.iter().enumerate() {
            let offset = cfg.language_offset
                * (1.0 + cfg.layer_gain * lpos as f64)
                * (1.0 + cfg.checkpoint_gain * ci as f64);
            for (li, lang) in cfg.languages.iter().enumerate() {
                let mut noise_rng = StreamRng::new(derive_seed(
                    cfg.seed,
                    &[ckpt, u64::from(layer), fnv1a64(lang.as_bytes())],
                ));
                let mut ids = Vec::new();
                let mut vectors = Vec::new();
                for (m, mu) in meanings.iter().enumerate() {
                    if !present[m][li] {
                        continue;
                    }
                    ids.push(m as u64);
                    for (d, &base) in mu.iter().enumerate() {
                        let mut v = cfg.meaning_scale * base;
                        if d == li && cfg.language_offset != 0.0 {
                            v += offset;
                        }
                        if cfg.noise > 0.0 {
                            v += cfg.noise * gaussian(&mut noise_rng);
                        }
                        vectors.push(v as f32);
                    }
                }
                if ids.is_empty() {
                    continue;
                }
                store.insert(EmbeddingMatrix::new(ckpt, layer, lang.clone(), cfg.dim, vectors, ids)?);
            }
        }
    }
    Ok(SyntheticFixture {
        store,
        index,
        records,
    })
}
