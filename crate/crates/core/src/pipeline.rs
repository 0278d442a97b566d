//! End-to-end run: score every configured cell, aggregate, and write the
//! report tables into one output directory.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{correlate_joined, regress_joined, PairedCorrelation, RegressionReport};
use crate::config::{cell_seed, RunConfig};
use crate::corpus::{unordered_pairs, AlignmentIndex};
use crate::error::{AbxError, Result};
use crate::report::{available_figures, emit_figure_data, write_csv, write_json, write_jsonl, FigureInputs, Provenance};
use crate::retrieval::{correlate_md_retrieval, retrieval_top1, MdRetrievalCorrelation, RetrievalResult};
use crate::scorer::{
    average_over_layers, global_language_scores, score_cell_detailed, AbxRecord, CellScore, CellSpec,
    GlobalLanguageScore, LayerScope,
};
use crate::selection::{select_checkpoint_by_ld, CheckpointSelection, CheckpointSeries};
use crate::store::{EmbeddingMatrix, EmbeddingSource, Store};
use crate::table::{checkpoint_series, Table};
use crate::triplet::{pool_size, TripletMode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedCell {
    pub mode: TripletMode,
    pub lang1: String,
    pub lang2: String,
    pub layer: u32,
    pub checkpoint: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub mode: TripletMode,
    pub lang1: String,
    pub lang2: String,
    pub reason: String,
}

/// Resolved axes and the cells a run would score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunPlan {
    pub languages: Vec<String>,
    pub layers: Vec<u32>,
    pub checkpoints: Vec<u64>,
    pub excluded_checkpoints: Vec<u64>,
    pub final_checkpoint: u64,
    pub retrieval_layer: Option<u32>,
    pub cells: Vec<PlannedCell>,
    pub skipped: Vec<SkippedPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunError {
    pub stage: String,
    pub subject: String,
    pub kind: String,
    pub message: String,
}

impl RunError {
    fn new(stage: &str, subject: impl Into<String>, e: &AbxError) -> Self {
        RunError {
            stage: stage.to_string(),
            subject: subject.into(),
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub n_cells: usize,
    pub n_scored: usize,
    pub n_errors: usize,
    pub files: Vec<OutputFile>,
}

#[derive(Serialize)]
struct DirectionRow<'a> {
    mode: TripletMode,
    lang1: &'a str,
    lang2: &'a str,
    layer: u32,
    checkpoint: u64,
    x_language: &'a str,
    n_triplets: u64,
    half_points: u64,
    tie_count: u64,
}

#[derive(Serialize)]
struct LogLine<'a> {
    stage: &'a str,
    subject: String,
    status: &'a str,
    seconds: f64,
}

/// One regression of a task's accuracy on global LD and MD, either at the
/// final checkpoint (`last`) or on per-language checkpoint means (`avg`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRegression {
    pub task: String,
    pub checkpoints: String,
    pub report: RegressionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct TaskSelectionRow {
    task: String,
    language: String,
    abx_checkpoint: u64,
    final_checkpoint: u64,
    best_checkpoint: u64,
    abx_accuracy: f64,
    final_accuracy: f64,
    best_accuracy: f64,
    gap_abx: f64,
    gap_final: f64,
    delta: f64,
}

impl TaskSelectionRow {
    fn new(task: &str, s: &CheckpointSelection) -> Self {
        TaskSelectionRow {
            task: task.to_string(),
            language: s.language.clone(),
            abx_checkpoint: s.abx_checkpoint,
            final_checkpoint: s.final_checkpoint,
            best_checkpoint: s.best_checkpoint,
            abx_accuracy: s.abx_accuracy,
            final_accuracy: s.final_accuracy,
            best_accuracy: s.best_accuracy,
            gap_abx: s.gap_abx,
            gap_final: s.gap_final,
            delta: s.delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Correlations {
    pub md_vs_retrieval: Option<MdRetrievalCorrelation>,
    pub ld_vs_md_all: Option<PairedCorrelation>,
    pub ld_vs_md_final: Option<PairedCorrelation>,
}

fn pick<T: Clone + Ord>(configured: &Option<Vec<T>>, available: &[T], what: &str) -> Result<Vec<T>> {
    let chosen: BTreeSet<T> = match configured {
        Some(v) => v.iter().cloned().collect(),
        None => available.iter().cloned().collect(),
    };
    if chosen.is_empty() {
        return Err(AbxError::Config(format!("no {what} selected")));
    }
    Ok(chosen.into_iter().collect())
}

/// Resolves the run axes against the store and index and lists every cell.
pub fn plan(config: &RunConfig, store: &Store, index: &AlignmentIndex) -> Result<RunPlan> {
    let manifest = store.manifest();
    let languages = match &config.languages {
        Some(_) => pick(&config.languages, &[], "languages")?,
        None => manifest
            .languages
            .iter()
            .filter(|l| index.languages().contains(l))
            .cloned()
            .collect(),
    };
    for l in &languages {
        if !manifest.languages.contains(l) {
            return Err(AbxError::Config(format!("language {l:?} is not in the store")));
        }
        index.language_position(l)?;
    }
    if languages.len() < 2 {
        return Err(AbxError::Config("need at least two languages".into()));
    }
    let layers = pick(&config.layers, &manifest.layers, "layers")?;
    let excluded: BTreeSet<u64> = config.exclude_checkpoints.iter().copied().collect();
    let checkpoints: Vec<u64> = pick(&config.checkpoints, &manifest.checkpoints, "checkpoints")?
        .into_iter()
        .filter(|c| !excluded.contains(c))
        .collect();
    let final_checkpoint = match config.final_checkpoint {
        Some(c) if excluded.contains(&c) => {
            return Err(AbxError::Config(format!("final checkpoint {c} is excluded")))
        }
        Some(c) if !checkpoints.contains(&c) => {
            return Err(AbxError::Config(format!("final checkpoint {c} is not being scored")))
        }
        Some(c) => c,
        None => *checkpoints
            .last()
            .ok_or_else(|| AbxError::Config("every checkpoint is excluded".into()))?,
    };
    for &c in &checkpoints {
        for &l in &layers {
            for lang in &languages {
                if !store.contains(c, l, lang) {
                    return Err(AbxError::MissingMatrix {
                        checkpoint: c,
                        layer: l,
                        language: lang.clone(),
                    });
                }
            }
        }
    }
    let retrieval_layer = if config.retrieval {
        let l = config.retrieval_layer.unwrap_or(*layers.last().expect("non-empty"));
        if !manifest.layers.contains(&l) {
            return Err(AbxError::MissingLayer(l));
        }
        Some(l)
    } else {
        None
    };
    let index = index.restrict(&languages)?;
    let mut modes = config.modes.clone();
    modes.sort();
    modes.dedup();
    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for &mode in &modes {
        for (l1, l2) in unordered_pairs(&languages) {
            match pool_size(&index, mode, &l1, &l2) {
                Ok(_) => {}
                Err(e @ AbxError::PairSkipped { .. }) => {
                    skipped.push(SkippedPair {
                        mode,
                        lang1: l1,
                        lang2: l2,
                        reason: e.to_string(),
                    });
                    continue;
                }
                Err(e) => return Err(e),
            }
            for &checkpoint in &checkpoints {
                for &layer in &layers {
                    cells.push(PlannedCell {
                        mode,
                        seed: cell_seed(config.seed, mode, &l1, &l2, layer, checkpoint),
                        lang1: l1.clone(),
                        lang2: l2.clone(),
                        layer,
                        checkpoint,
                    });
                }
            }
        }
    }
    Ok(RunPlan {
        languages,
        layers,
        checkpoints,
        excluded_checkpoints: excluded.into_iter().collect(),
        final_checkpoint,
        retrieval_layer,
        cells,
        skipped,
    })
}

/// Matrices of one (checkpoint, layer), decoded once and shared by every
/// cell that reads them. A matrix that fails to load only fails the cells
/// that need it.
pub struct GroupSource {
    checkpoint: u64,
    layer: u32,
    matrices: HashMap<String, Arc<EmbeddingMatrix>>,
    failed: BTreeMap<String, String>,
}

impl GroupSource {
    /// Languages whose matrix could not be loaded, with the reason.
    pub fn failures(&self) -> &BTreeMap<String, String> {
        &self.failed
    }
}

impl EmbeddingSource for GroupSource {
    fn matrix(&self, checkpoint: u64, layer: u32, language: &str) -> Result<Arc<EmbeddingMatrix>> {
        if checkpoint == self.checkpoint && layer == self.layer {
            if let Some(m) = self.matrices.get(language) {
                return Ok(Arc::clone(m));
            }
            if let Some(reason) = self.failed.get(language) {
                return Err(AbxError::Unavailable {
                    checkpoint,
                    layer,
                    language: language.to_string(),
                    reason: reason.clone(),
                });
            }
        }
        Err(AbxError::MissingMatrix {
            checkpoint,
            layer,
            language: language.to_string(),
        })
    }
}

pub fn load_group(store: &Store, checkpoint: u64, layer: u32, languages: &[String]) -> GroupSource {
    let loaded = par_map(languages, |l| store.get(checkpoint, layer, l).map(Arc::new));
    let mut matrices = HashMap::new();
    let mut failed = BTreeMap::new();
    for (l, m) in languages.iter().zip(loaded) {
        match m {
            Ok(m) => {
                matrices.insert(l.clone(), m);
            }
            Err(e) => {
                failed.insert(l.clone(), e.to_string());
            }
        }
    }
    GroupSource {
        checkpoint,
        layer,
        matrices,
        failed,
    }
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| AbxError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
pub fn with_jobs<R: Send>(_jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    Ok(f())
}

fn cell_subject(mode: TripletMode, l1: &str, l2: &str, layer: u32, checkpoint: u64) -> String {
    format!("{mode} {l1}-{l2} layer {layer} checkpoint {checkpoint}")
}

/// Results of scoring a plan, in plan order.
pub struct Scored {
    pub cells: Vec<CellScore>,
    pub errors: Vec<RunError>,
    /// (cell, succeeded, seconds) in completion order per group.
    pub log: Vec<(String, bool, f64)>,
}

/// Scores every planned cell, decoding each (checkpoint, layer) group of
/// matrices once. Runs on the current rayon pool.
pub fn score_plan(plan: &RunPlan, store: &Store, index: &AlignmentIndex, n_triplets: usize) -> Result<Scored> {
    let mut groups: BTreeMap<(u64, u32), Vec<&PlannedCell>> = BTreeMap::new();
    for c in &plan.cells {
        groups.entry((c.checkpoint, c.layer)).or_default().push(c);
    }
    let mut by_key: BTreeMap<usize, CellScore> = BTreeMap::new();
    let position: HashMap<*const PlannedCell, usize> =
        plan.cells.iter().enumerate().map(|(i, c)| (c as *const _, i)).collect();
    let mut errors = Vec::new();
    let mut log = Vec::new();
    for ((checkpoint, layer), cells) in groups {
        let source = load_group(store, checkpoint, layer, &plan.languages);
        for (l, reason) in source.failures() {
            errors.push(RunError {
                stage: "load".into(),
                subject: format!("{l} layer {layer} checkpoint {checkpoint}"),
                kind: "unavailable_matrix".into(),
                message: reason.clone(),
            });
        }
        let results = par_map(&cells, |c| {
            let t0 = Instant::now();
            let spec = CellSpec {
                mode: c.mode,
                lang1: &c.lang1,
                lang2: &c.lang2,
                layer: c.layer,
                checkpoint: c.checkpoint,
            };
            let r = score_cell_detailed(&source, index, &spec, n_triplets, c.seed);
            (r, t0.elapsed().as_secs_f64())
        });
        for (c, (r, secs)) in cells.iter().zip(results) {
            let subject = cell_subject(c.mode, &c.lang1, &c.lang2, c.layer, c.checkpoint);
            log.push((subject.clone(), r.is_ok(), secs));
            match r {
                Ok(s) => {
                    by_key.insert(position[&(*c as *const _)], s);
                }
                Err(e) => errors.push(RunError::new("score", subject, &e)),
            }
        }
    }
    Ok(Scored {
        cells: by_key.into_values().collect(),
        errors,
        log,
    })
}

fn layer_averages(records: &[AbxRecord], layers: &[u32], errors: &mut Vec<RunError>) -> Vec<AbxRecord> {
    let mut groups: BTreeMap<(TripletMode, (String, String), u64), Vec<AbxRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.mode, r.pair_key(), r.checkpoint))
            .or_default()
            .push(r.clone());
    }
    let mut out = Vec::new();
    for ((mode, (l1, l2), ckpt), rs) in groups {
        match average_over_layers(&rs, layers) {
            Ok(a) => out.push(a),
            Err(e) => errors.push(RunError::new(
                "layer-average",
                format!("{mode} {l1}-{l2} checkpoint {ckpt}"),
                &e,
            )),
        }
    }
    out
}

fn pair_scores(records: &[AbxRecord], mode: TripletMode, checkpoint: Option<u64>) -> BTreeMap<(String, String, u64), f64> {
    records
        .iter()
        .filter(|r| r.mode == mode && checkpoint.is_none_or(|c| c == r.checkpoint))
        .map(|r| {
            let (a, b) = r.pair_key();
            ((a, b, r.checkpoint), r.score)
        })
        .collect()
}

fn global_series(globals: &[GlobalLanguageScore], mode: TripletMode) -> CheckpointSeries {
    let mut s: CheckpointSeries = BTreeMap::new();
    for g in globals.iter().filter(|g| g.mode == mode) {
        s.entry(g.language.clone()).or_default().insert(g.checkpoint, g.score);
    }
    s
}

fn at_checkpoint(series: &CheckpointSeries, checkpoint: u64) -> BTreeMap<String, f64> {
    series
        .iter()
        .filter_map(|(l, s)| s.get(&checkpoint).map(|v| (l.clone(), *v)))
        .collect()
}

/// Per-language mean over whatever checkpoints the series holds.
fn checkpoint_mean(series: &CheckpointSeries) -> BTreeMap<String, f64> {
    series
        .iter()
        .filter(|(_, s)| !s.is_empty())
        .map(|(l, s)| (l.clone(), s.values().sum::<f64>() / s.len() as f64))
        .collect()
}

fn file_entry(out_dir: &Path, path: &Path) -> Result<OutputFile> {
    let bytes = fs::read(path).map_err(|e| AbxError::io(path, e))?;
    Ok(OutputFile {
        path: path
            .strip_prefix(out_dir)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/"),
        bytes: bytes.len() as u64,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Loads the store and index named by `config` and returns the plan only.
pub fn dry_run(config: &RunConfig) -> Result<RunPlan> {
    let store = Store::open(&config.store)?;
    let index = AlignmentIndex::load(&config.corpus)?;
    plan(config, &store, &index)
}

/// Executes a full run, writing every table into `config.out`.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    with_jobs(resolve_jobs(config.jobs), || run_inner(config))?
}

/// 0 means one worker per available core.
pub fn resolve_jobs(jobs: usize) -> usize {
    if jobs == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        jobs
    }
}

fn run_inner(config: &RunConfig) -> Result<RunSummary> {
    let store = Store::open(&config.store)?;
    let full_index = AlignmentIndex::load(&config.corpus)?;
    let plan = plan(config, &store, &full_index)?;
    let index = full_index.restrict(&plan.languages)?;
    let out = &config.out;
    fs::create_dir_all(out).map_err(|e| AbxError::io(out, e))?;

    let mut errors: Vec<RunError> = plan
        .skipped
        .iter()
        .map(|s| RunError {
            stage: "plan".into(),
            subject: format!("{} {}-{}", s.mode, s.lang1, s.lang2),
            kind: "pair_skipped".into(),
            message: s.reason.clone(),
        })
        .collect();
    let mut written: Vec<PathBuf> = Vec::new();
    let mut put = |p: PathBuf| -> PathBuf {
        written.push(p.clone());
        p
    };

    let scored = score_plan(&plan, &store, &index, config.n_triplets)?;
    errors.extend(scored.errors);
    let records: Vec<AbxRecord> = scored.cells.iter().map(|c| c.record.clone()).collect();
    write_csv(put(out.join("scores.csv")), &records)?;
    write_jsonl(put(out.join("scores.jsonl")), &records)?;
    let mut directions = Vec::new();
    for c in &scored.cells {
        let LayerScope::Layer(layer) = c.record.layer else { unreachable!("cells are per layer") };
        for d in &c.directions {
            directions.push(DirectionRow {
                mode: c.record.mode,
                lang1: &c.record.lang1,
                lang2: &c.record.lang2,
                layer,
                checkpoint: c.record.checkpoint,
                x_language: &d.x_language,
                n_triplets: d.n_triplets,
                half_points: d.half_points,
                tie_count: d.tie_count,
            });
        }
    }
    write_csv(put(out.join("directions.csv")), &directions)?;

    let averaged = layer_averages(&records, &plan.layers, &mut errors);
    write_csv(put(out.join("scores_layer_avg.csv")), &averaged)?;

    let mut modes: Vec<TripletMode> = config.modes.clone();
    modes.sort();
    modes.dedup();
    let mut globals = Vec::new();
    for &mode in &modes {
        for &ckpt in &plan.checkpoints {
            match global_language_scores(&averaged, mode, ckpt, LayerScope::Averaged, &plan.languages) {
                Ok(g) => globals.extend(g),
                Err(e) => errors.push(RunError::new("global", format!("{mode} checkpoint {ckpt}"), &e)),
            }
        }
    }
    write_csv(put(out.join("global_scores.csv")), &globals)?;

    let mut retrieval: Vec<RetrievalResult> = Vec::new();
    if let Some(layer) = plan.retrieval_layer {
        let pairs = unordered_pairs(&plan.languages);
        for &ckpt in &plan.checkpoints {
            let source = load_group(&store, ckpt, layer, &plan.languages);
            let results = par_map(&pairs, |(a, b)| retrieval_top1(&source, &index, (a, b), layer, ckpt));
            for ((a, b), r) in pairs.iter().zip(results) {
                match r {
                    Ok(r) => retrieval.push(r),
                    Err(e) => errors.push(RunError::new(
                        "retrieval",
                        format!("{a}-{b} layer {layer} checkpoint {ckpt}"),
                        &e,
                    )),
                }
            }
        }
        write_csv(put(out.join("retrieval.csv")), &retrieval)?;
    }

    let final_ckpt = plan.final_checkpoint;
    let mut correlations = Correlations::default();
    if !retrieval.is_empty() {
        let md: Vec<AbxRecord> = averaged
            .iter()
            .filter(|r| r.mode == TripletMode::Md && r.checkpoint == final_ckpt)
            .cloned()
            .collect();
        let ret: Vec<RetrievalResult> = retrieval.iter().filter(|r| r.checkpoint == final_ckpt).cloned().collect();
        if !md.is_empty() {
            match correlate_md_retrieval(&md, &ret) {
                Ok(c) => correlations.md_vs_retrieval = Some(c),
                Err(e) => errors.push(RunError::new("correlate", "md vs retrieval", &e)),
            }
        }
    }
    if modes.contains(&TripletMode::Ld) && modes.contains(&TripletMode::Md) {
        for (slot, ckpt, name) in [
            (&mut correlations.ld_vs_md_all, None, "ld vs md, all checkpoints"),
            (&mut correlations.ld_vs_md_final, Some(final_ckpt), "ld vs md, final checkpoint"),
        ] {
            let ld = pair_scores(&averaged, TripletMode::Ld, ckpt);
            let md = pair_scores(&averaged, TripletMode::Md, ckpt);
            match correlate_joined("ld", &ld, "md", &md) {
                Ok(c) => *slot = Some(c),
                Err(e) => errors.push(RunError::new("correlate", name, &e)),
            }
        }
    }
    write_json(put(out.join("correlations.json")), &correlations)?;

    // task -> accuracy series; a table without a `task` column is one task.
    let mut tasks: BTreeMap<String, CheckpointSeries> = BTreeMap::new();
    if let Some(p) = &config.accuracy {
        let table = Table::read(p)?;
        if table.has("task") {
            let ti = table.column("task")?;
            let names: BTreeSet<String> = table.rows.iter().map(|r| r[ti].clone()).collect();
            for t in names {
                let sub = table.filter(&[("task".to_string(), t.clone())])?;
                tasks.insert(t, checkpoint_series(&sub, "accuracy")?);
            }
        } else {
            tasks.insert("accuracy".to_string(), checkpoint_series(&table, "accuracy")?);
        }
    }
    let excluded: BTreeSet<u64> = plan.excluded_checkpoints.iter().copied().collect();
    let ld = global_series(&globals, TripletMode::Ld);
    let md = global_series(&globals, TripletMode::Md);
    let mut regressions = Vec::new();
    let mut selection_rows = Vec::new();
    let mut selection_summaries = BTreeMap::new();
    for (task, acc) in &tasks {
        let acc: CheckpointSeries = acc
            .iter()
            .map(|(l, s)| (l.clone(), s.iter().filter(|(c, _)| !excluded.contains(c)).map(|(c, v)| (*c, *v)).collect()))
            .collect();
        for scope in ["last", "avg"] {
            let view = |series: &CheckpointSeries| match scope {
                "last" => at_checkpoint(series, final_ckpt),
                _ => checkpoint_mean(series),
            };
            let (acc_v, ld_v, md_v) = (view(&acc), view(&ld), view(&md));
            let mut predictors: Vec<(&str, &BTreeMap<String, f64>)> = Vec::new();
            if !ld_v.is_empty() {
                predictors.push(("ld", &ld_v));
            }
            if !md_v.is_empty() {
                predictors.push(("md", &md_v));
            }
            if predictors.is_empty() {
                continue;
            }
            match regress_joined(task, &acc_v, &predictors) {
                Ok(report) => regressions.push(TaskRegression {
                    task: task.clone(),
                    checkpoints: scope.to_string(),
                    report,
                }),
                Err(e) => errors.push(RunError::new("regress", format!("{task} {scope}"), &e)),
            }
        }
        if !ld.is_empty() {
            match select_checkpoint_by_ld(&ld, &acc, final_ckpt, &excluded) {
                Ok(s) => {
                    selection_rows.extend(s.selections.iter().map(|sel| TaskSelectionRow::new(task, sel)));
                    selection_summaries.insert(task.clone(), s);
                }
                Err(e) => errors.push(RunError::new("select-checkpoint", task.clone(), &e)),
            }
        }
    }
    if !tasks.is_empty() {
        write_json(put(out.join("regression.json")), &regressions)?;
        write_csv(put(out.join("checkpoint_selection.csv")), &selection_rows)?;
        write_json(put(out.join("checkpoint_selection.json")), &selection_summaries)?;
    }
    let accuracy = tasks.values().next().cloned();

    let inputs = FigureInputs {
        records: &records,
        layers: plan.layers.clone(),
        layers_curve_checkpoint: Some(final_ckpt),
        accuracy: accuracy.as_ref(),
        win_rates: None,
    };
    let kinds = available_figures(&inputs);
    match emit_figure_data(&inputs, &kinds, out.join("figures")) {
        Ok(paths) => {
            for p in paths {
                put(p);
            }
        }
        Err(e) => errors.push(RunError::new("figures", "all", &e)),
    }

    let provenance = Provenance {
        master_seed: Some(config.seed),
        store_manifest_sha256: Some(store.manifest_sha256().to_string()),
        layers: plan.layers.clone(),
        checkpoints: plan.checkpoints.clone(),
        excluded_checkpoints: plan.excluded_checkpoints.clone(),
        languages: plan.languages.clone(),
        n_triplets: Some(config.n_triplets),
        ..Provenance::new()
    };
    write_json(put(out.join("provenance.json")), &provenance)?;
    write_json(put(out.join("errors.json")), &errors)?;

    let log_path = put(out.join("run_log.jsonl"));
    let mut log = std::io::BufWriter::new(fs::File::create(&log_path).map_err(|e| AbxError::io(&log_path, e))?);
    for (subject, ok, seconds) in &scored.log {
        let line = LogLine {
            stage: "score",
            subject: subject.clone(),
            status: if *ok { "ok" } else { "error" },
            seconds: *seconds,
        };
        writeln!(log, "{}", serde_json::to_string(&line).expect("log line serializes"))
            .map_err(|e| AbxError::io(&log_path, e))?;
    }
    log.flush().map_err(|e| AbxError::io(&log_path, e))?;
    drop(log);

    let files = written
        .iter()
        .map(|p| file_entry(out, p))
        .collect::<Result<Vec<_>>>()?;
    write_json(out.join("run_manifest.json"), &files)?;
    Ok(RunSummary {
        out_dir: out.clone(),
        n_cells: plan.cells.len(),
        n_scored: records.len(),
        n_errors: errors.len(),
        files,
    })
}
