//! Tidy tables for plotting: score curves, grids, heatmaps and scatters.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{AbxError, Result};
use crate::scorer::{average_over_layers, global_language_scores, AbxRecord, LayerScope};
use crate::selection::CheckpointSeries;
use crate::triplet::TripletMode;

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| AbxError::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(|e| AbxError::Table(format!("{}: {e}", path.display()))))
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let f = fs::File::create(path).map_err(|e| AbxError::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    for r in rows {
        serde_json::to_writer(&mut w, r).map_err(|e| AbxError::Table(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| AbxError::io(path, e))?;
    }
    w.flush().map_err(|e| AbxError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_vec_pretty(value).map_err(|e| AbxError::Table(e.to_string()))?;
    fs::write(path, json).map_err(|e| AbxError::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Raw,
    PerRowMinmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMatrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// `None` marks a missing cell.
    pub values: Vec<Vec<Option<f64>>>,
    pub normalization: Normalization,
}

/// Min-max scales each row to [0, 1]; constant rows become 0.5.
pub fn normalize_per_row(matrix: &HeatmapMatrix) -> Result<HeatmapMatrix> {
    let mut values = Vec::with_capacity(matrix.values.len());
    for (label, row) in matrix.row_labels.iter().zip(&matrix.values) {
        let row: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(j, v)| {
                v.ok_or_else(|| {
                    AbxError::Table(format!(
                        "missing cell ({label}, {})",
                        matrix.col_labels.get(j).map(String::as_str).unwrap_or("?")
                    ))
                })
            })
            .collect::<Result<_>>()?;
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        values.push(
            row.iter()
                .map(|v| Some(if span > 0.0 { (v - lo) / span } else { 0.5 }))
                .collect(),
        );
    }
    Ok(HeatmapMatrix {
        row_labels: matrix.row_labels.clone(),
        col_labels: matrix.col_labels.clone(),
        values,
        normalization: Normalization::PerRowMinmax,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FigureKind {
    CheckpointsCurve,
    LayersCurve,
    CheckpointLayerGrid,
    LanguageCheckpointGrid,
    LdMdScatter,
    LdAccuracyScatter,
    WinRateHistogram,
}

impl FigureKind {
    pub const ALL: [FigureKind; 7] = [
        FigureKind::CheckpointsCurve,
        FigureKind::LayersCurve,
        FigureKind::CheckpointLayerGrid,
        FigureKind::LanguageCheckpointGrid,
        FigureKind::LdMdScatter,
        FigureKind::LdAccuracyScatter,
        FigureKind::WinRateHistogram,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureKind::CheckpointsCurve => "checkpoints-curve",
            FigureKind::LayersCurve => "layers-curve",
            FigureKind::CheckpointLayerGrid => "checkpoint-layer-grid",
            FigureKind::LanguageCheckpointGrid => "language-checkpoint-grid",
            FigureKind::LdMdScatter => "ld-md-scatter",
            FigureKind::LdAccuracyScatter => "ld-accuracy-scatter",
            FigureKind::WinRateHistogram => "win-rate-histogram",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.as_str().replace('-', "_"))
    }

    fn columns(self) -> &'static [&'static str] {
        match self {
            FigureKind::CheckpointsCurve => &["mode", "checkpoint", "score", "n_pairs"],
            FigureKind::LayersCurve => &["mode", "checkpoint", "layer", "score", "n_pairs"],
            FigureKind::CheckpointLayerGrid => &["mode", "checkpoint", "layer", "score", "n_pairs"],
            FigureKind::LanguageCheckpointGrid => {
                &["mode", "language", "checkpoint", "raw", "normalized"]
            }
            FigureKind::LdMdScatter => &["lang1", "lang2", "checkpoint", "ld", "md"],
            FigureKind::LdAccuracyScatter => &["language", "checkpoint", "ld", "accuracy"],
            FigureKind::WinRateHistogram => &["bin_lo", "bin_hi", "count"],
        }
    }
}

impl FromStr for FigureKind {
    type Err = AbxError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('_', "-");
        FigureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| AbxError::InvalidRequest(format!("unknown figure {s:?}")))
    }
}

/// Run metadata written next to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub engine_version: String,
    pub rng_algorithm: String,
    pub seed_mixer: String,
    pub master_seed: Option<u64>,
    pub store_manifest_sha256: Option<String>,
    pub layers: Vec<u32>,
    pub checkpoints: Vec<u64>,
    pub excluded_checkpoints: Vec<u64>,
    pub languages: Vec<String>,
    pub n_triplets: Option<usize>,
}

impl Provenance {
    pub fn new() -> Self {
        Provenance {
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            rng_algorithm: crate::rng::ALGORITHM_ID.to_string(),
            seed_mixer: crate::rng::SEED_MIXER_ID.to_string(),
            ..Default::default()
        }
    }
}

/// Everything figure emission can draw on. Accuracy and win rates come
/// from outside the engine and are optional.
#[derive(Debug, Clone, Default)]
pub struct FigureInputs<'a> {
    /// Per-layer records.
    pub records: &'a [AbxRecord],
    /// Layer set for averaging; all layers present in `records` when empty.
    pub layers: Vec<u32>,
    /// Checkpoint for the layers curve; latest present when `None`.
    pub layers_curve_checkpoint: Option<u64>,
    pub accuracy: Option<&'a CheckpointSeries>,
    pub win_rates: Option<&'a [f64]>,
}

#[derive(Serialize)]
struct CurveRow {
    mode: TripletMode,
    checkpoint: u64,
    score: f64,
    n_pairs: usize,
}

#[derive(Serialize)]
struct LayerRow {
    mode: TripletMode,
    checkpoint: u64,
    layer: u32,
    score: f64,
    n_pairs: usize,
}

#[derive(Serialize)]
struct LanguageGridRow {
    mode: TripletMode,
    language: String,
    checkpoint: u64,
    raw: f64,
    normalized: f64,
}

#[derive(Serialize)]
struct ScatterRow {
    lang1: String,
    lang2: String,
    checkpoint: u64,
    ld: f64,
    md: f64,
}

#[derive(Serialize)]
struct AccuracyRow {
    language: String,
    checkpoint: u64,
    ld: f64,
    accuracy: f64,
}

#[derive(Serialize)]
struct BinRow {
    bin_lo: f64,
    bin_hi: f64,
    count: usize,
}

type PairKey = (String, String);

struct Axes {
    modes: BTreeSet<TripletMode>,
    checkpoints: BTreeSet<u64>,
    layers: Vec<u32>,
    languages: Vec<String>,
}

fn axes(inputs: &FigureInputs) -> Axes {
    let recs = inputs.records;
    let layers = if inputs.layers.is_empty() {
        recs.iter()
            .filter_map(|r| match r.layer {
                LayerScope::Layer(l) => Some(l),
                LayerScope::Averaged => None,
            })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        inputs.layers.clone()
    };
    let languages: BTreeSet<String> = recs
        .iter()
        .flat_map(|r| [r.lang1.clone(), r.lang2.clone()])
        .collect();
    Axes {
        modes: recs.iter().map(|r| r.mode).collect(),
        checkpoints: recs.iter().map(|r| r.checkpoint).collect(),
        layers,
        languages: languages.into_iter().collect(),
    }
}

/// Layer-averaged score per (mode, checkpoint, pair).
fn layer_averages(
    inputs: &FigureInputs,
    ax: &Axes,
) -> Result<BTreeMap<(TripletMode, u64, PairKey), AbxRecord>> {
    let mut groups: BTreeMap<(TripletMode, u64, PairKey), Vec<AbxRecord>> = BTreeMap::new();
    for r in inputs.records {
        if let LayerScope::Layer(l) = r.layer {
            if ax.layers.contains(&l) {
                groups
                    .entry((r.mode, r.checkpoint, r.pair_key()))
                    .or_default()
                    .push(r.clone());
            }
        }
    }
    let mut out = BTreeMap::new();
    let mut gaps = Vec::new();
    for (key, rs) in groups {
        match average_over_layers(&rs, &ax.layers) {
            Ok(avg) => {
                out.insert(key, avg);
            }
            Err(AbxError::MissingLayer(l)) => {
                gaps.push(format!("{} {}-{} checkpoint {} layer {l}", key.0, key.2 .0, key.2 .1, key.1))
            }
            Err(e) => return Err(e),
        }
    }
    if !gaps.is_empty() {
        return Err(AbxError::Table(format!("coverage gaps: {}", gaps.join("; "))));
    }
    Ok(out)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Writes the requested figure tables plus `figures_schema.json` into
/// `out_dir`, returning the paths written.
pub fn emit_figure_data(
    inputs: &FigureInputs,
    kinds: &[FigureKind],
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| AbxError::io(out_dir, e))?;
    let ax = axes(inputs);
    let needs_avg = kinds.iter().any(|k| {
        matches!(
            k,
            FigureKind::CheckpointsCurve
                | FigureKind::LanguageCheckpointGrid
                | FigureKind::LdMdScatter
                | FigureKind::LdAccuracyScatter
        )
    });
    let averaged = if needs_avg {
        layer_averages(inputs, &ax)?
    } else {
        BTreeMap::new()
    };
    let averaged_records: Vec<AbxRecord> = averaged.values().cloned().collect();

    let mut written = Vec::new();
    let mut schema = BTreeMap::new();
    for &kind in kinds {
        let path = out_dir.join(kind.file_name());
        match kind {
            FigureKind::CheckpointsCurve => {
                let mut rows = Vec::new();
                for &mode in &ax.modes {
                    for &c in &ax.checkpoints {
                        let scores: Vec<f64> = averaged
                            .iter()
                            .filter(|((m, ck, _), _)| *m == mode && *ck == c)
                            .map(|(_, r)| r.score)
                            .collect();
                        if !scores.is_empty() {
                            rows.push(CurveRow {
                                mode,
                                checkpoint: c,
                                score: mean(&scores),
                                n_pairs: scores.len(),
                            });
                        }
                    }
                }
                write_csv(&path, &rows)?;
            }
            FigureKind::LayersCurve | FigureKind::CheckpointLayerGrid => {
                let checkpoints: Vec<u64> = if kind == FigureKind::LayersCurve {
                    let c = inputs
                        .layers_curve_checkpoint
                        .or_else(|| ax.checkpoints.iter().next_back().copied())
                        .ok_or_else(|| AbxError::Table("no records".into()))?;
                    vec![c]
                } else {
                    ax.checkpoints.iter().copied().collect()
                };
                let mut rows = Vec::new();
                let mut gaps = Vec::new();
                for &mode in &ax.modes {
                    for &c in &checkpoints {
                        for &l in &ax.layers {
                            let scores: Vec<f64> = inputs
                                .records
                                .iter()
                                .filter(|r| {
                                    r.mode == mode && r.checkpoint == c && r.layer == LayerScope::Layer(l)
                                })
                                .map(|r| r.score)
                                .collect();
                            if scores.is_empty() {
                                gaps.push(format!("{mode} checkpoint {c} layer {l}"));
                            } else {
                                rows.push(LayerRow {
                                    mode,
                                    checkpoint: c,
                                    layer: l,
                                    score: mean(&scores),
                                    n_pairs: scores.len(),
                                });
                            }
                        }
                    }
                }
                if !gaps.is_empty() {
                    return Err(AbxError::Table(format!("coverage gaps: {}", gaps.join("; "))));
                }
                write_csv(&path, &rows)?;
            }
            FigureKind::LanguageCheckpointGrid => {
                let mut rows = Vec::new();
                for &mode in &ax.modes {
                    let checkpoints: Vec<u64> = ax.checkpoints.iter().copied().collect();
                    let mut raw = HeatmapMatrix {
                        row_labels: ax.languages.clone(),
                        col_labels: checkpoints.iter().map(u64::to_string).collect(),
                        values: vec![vec![None; checkpoints.len()]; ax.languages.len()],
                        normalization: Normalization::Raw,
                    };
                    for (j, &c) in checkpoints.iter().enumerate() {
                        let g = global_language_scores(
                            &averaged_records,
                            mode,
                            c,
                            LayerScope::Averaged,
                            &ax.languages,
                        )?;
                        for (i, s) in g.iter().enumerate() {
                            raw.values[i][j] = Some(s.score);
                        }
                    }
                    let norm = normalize_per_row(&raw)?;
                    for (i, lang) in ax.languages.iter().enumerate() {
                        for (j, &c) in checkpoints.iter().enumerate() {
                            rows.push(LanguageGridRow {
                                mode,
                                language: lang.clone(),
                                checkpoint: c,
                                raw: raw.values[i][j].expect("filled"),
                                normalized: norm.values[i][j].expect("filled"),
                            });
                        }
                    }
                }
                write_csv(&path, &rows)?;
            }
            FigureKind::LdMdScatter => {
                let mut rows = Vec::new();
                for ((mode, c, pair), ld) in &averaged {
                    if *mode != TripletMode::Ld {
                        continue;
                    }
                    if let Some(md) = averaged.get(&(TripletMode::Md, *c, pair.clone())) {
                        rows.push(ScatterRow {
                            lang1: pair.0.clone(),
                            lang2: pair.1.clone(),
                            checkpoint: *c,
                            ld: ld.score,
                            md: md.score,
                        });
                    }
                }
                write_csv(&path, &rows)?;
            }
            FigureKind::LdAccuracyScatter => {
                let acc = inputs.accuracy.ok_or_else(|| {
                    AbxError::Table("ld-accuracy-scatter needs an accuracy table".into())
                })?;
                let mut rows = Vec::new();
                for &c in &ax.checkpoints {
                    let g = global_language_scores(
                        &averaged_records,
                        TripletMode::Ld,
                        c,
                        LayerScope::Averaged,
                        &ax.languages,
                    )?;
                    for s in g {
                        if let Some(a) = acc.get(&s.language).and_then(|m| m.get(&c)) {
                            rows.push(AccuracyRow {
                                language: s.language,
                                checkpoint: c,
                                ld: s.score,
                                accuracy: *a,
                            });
                        }
                    }
                }
                write_csv(&path, &rows)?;
            }
            FigureKind::WinRateHistogram => {
                let rates = inputs
                    .win_rates
                    .ok_or_else(|| AbxError::Table("win-rate-histogram needs win rates".into()))?;
                write_csv(&path, &histogram(rates, 10))?;
            }
        }
        schema.insert(kind.file_name(), kind.columns());
        written.push(path);
    }
    let schema_path = out_dir.join("figures_schema.json");
    write_json(&schema_path, &schema)?;
    written.push(schema_path);
    Ok(written)
}

fn histogram(values: &[f64], bins: usize) -> Vec<BinRow> {
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| BinRow {
            bin_lo: i as f64 / bins as f64,
            bin_hi: (i + 1) as f64 / bins as f64,
            count,
        })
        .collect()
}

/// Figure kinds that can be produced from `inputs` alone.
pub fn available_figures(inputs: &FigureInputs) -> Vec<FigureKind> {
    FigureKind::ALL
        .into_iter()
        .filter(|k| match k {
            FigureKind::LdAccuracyScatter => inputs.accuracy.is_some(),
            FigureKind::WinRateHistogram => inputs.win_rates.is_some(),
            _ => true,
        })
        .collect()
}
