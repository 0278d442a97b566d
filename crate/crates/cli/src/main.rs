use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use abx_core::analysis::{correlate_joined, regress_joined};
use abx_core::config::RunConfig;
use abx_core::corpus::{unordered_pairs, AlignmentIndex};
use abx_core::pipeline::{self, load_group, resolve_jobs, with_jobs, RunPlan};
use abx_core::report::{available_figures, emit_figure_data, read_csv, write_csv, write_json, write_jsonl, FigureInputs, FigureKind};
use abx_core::retrieval::retrieval_top1;
use abx_core::scorer::AbxRecord;
use abx_core::selection::{select_checkpoint_by_ld, select_source_by_ld, WinRateOptions};
use abx_core::store::Store;
use abx_core::synthetic::{planted, PlantedConfig};
use abx_core::table::{checkpoint_series, pair_values, Table};
use abx_core::triplet::{sample_triplets, write_triplet_dump, TripletMode};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "abx", version, about = "ABX language/meaning discrimination over embedding stores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the meaning/language index of a corpus.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated language codes; all when omitted.
        #[arg(long, value_delimiter = ',')]
        languages: Option<Vec<String>>,
        /// Where to save the index (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score ABX cells.
    Score {
        #[arg(long)]
        store: PathBuf,
        #[arg(long = "corpus-index")]
        corpus_index: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "ld,md")]
        mode: Vec<TripletMode>,
        /// `all` or a list like `en-fr,de-fr`.
        #[arg(long, default_value = "all")]
        pairs: String,
        #[arg(long, default_value = "all")]
        layers: String,
        #[arg(long, default_value = "all")]
        checkpoints: String,
        #[arg(long = "exclude-checkpoints", value_delimiter = ',')]
        exclude_checkpoints: Vec<u64>,
        #[arg(long = "n-triplets", default_value_t = 100_000)]
        n_triplets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output table; `.jsonl` selects line-delimited JSON, CSV otherwise.
        #[arg(long)]
        out: PathBuf,
        /// Directory receiving one JSONL file of sampled triplets per cell.
        #[arg(long = "dump-triplets")]
        dump_triplets: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Top-1 cross-lingual retrieval accuracy.
    Retrieve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long = "corpus-index")]
        corpus_index: PathBuf,
        /// `last` or a layer index.
        #[arg(long, default_value = "last")]
        layer: String,
        #[arg(long, default_value = "all")]
        pairs: String,
        #[arg(long, default_value = "all")]
        checkpoints: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correlate two table columns joined on key columns.
    Correlate {
        /// `table.csv:column`
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Join columns.
        #[arg(long, value_delimiter = ',', default_value = "lang1,lang2")]
        on: Vec<String>,
        /// Report one correlation per value of this column.
        #[arg(long = "group-by")]
        group_by: Option<String>,
        /// `column=value` filters for the x table.
        #[arg(long = "x-where")]
        x_where: Vec<String>,
        #[arg(long = "y-where")]
        y_where: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regress accuracy on LD and MD scores.
    Regress {
        #[arg(long)]
        accuracy: PathBuf,
        #[arg(long)]
        ld: PathBuf,
        #[arg(long)]
        md: PathBuf,
        #[arg(long = "join-on", default_value = "language")]
        join_on: JoinOn,
        #[arg(long)]
        checkpoint: Option<u64>,
        #[arg(long, default_value = "avg")]
        layer: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pick a checkpoint per language by minimal LD.
    SelectCheckpoint {
        /// Per-language LD table (language, checkpoint, score).
        #[arg(long)]
        ld: PathBuf,
        /// Accuracy table (language, checkpoint, accuracy).
        #[arg(long)]
        accuracy: PathBuf,
        /// Final checkpoint; the latest kept one when omitted.
        #[arg(long = "final")]
        final_checkpoint: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<u64>,
        #[arg(long, default_value = "avg")]
        layer: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pick a transfer source per target by minimal pair LD.
    SelectSource {
        /// Pair LD table (lang1, lang2, score).
        #[arg(long)]
        ld: PathBuf,
        /// Transfer table (source, target, accuracy).
        #[arg(long)]
        transfer: PathBuf,
        #[arg(long = "top-k", value_delimiter = ',', default_value = "1,3")]
        top_k: Vec<usize>,
        #[arg(long = "n-draws", default_value_t = 100)]
        n_draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Drop the selected source from the random comparison pool.
        #[arg(long = "exclude-selected")]
        exclude_selected: bool,
        #[arg(long)]
        checkpoint: Option<u64>,
        #[arg(long, default_value = "avg")]
        layer: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit figure data tables from scored records.
    Report {
        /// A run directory or a scores CSV with per-layer records.
        #[arg(long)]
        records: PathBuf,
        /// `all` or a comma list of figure names.
        #[arg(long, default_value = "all")]
        figures: String,
        #[arg(long)]
        accuracy: Option<PathBuf>,
        /// Selection JSON from `select-source` providing win rates.
        #[arg(long = "win-rates")]
        win_rates: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline from a config file.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Print the cell plan without scoring.
        #[arg(long = "dry-run")]
        dry_run: bool,
        /// `key=value` overrides of config entries.
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Write a synthetic store and corpus with planted structure.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "de,en,fr,sw")]
        languages: Vec<String>,
        #[arg(long, default_value_t = 40)]
        meanings: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        layers: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "1000,2000")]
        checkpoints: Vec<u64>,
        #[arg(long = "language-offset", default_value_t = 0.5)]
        language_offset: f64,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0.0)]
        dropout: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum JoinOn {
    Language,
    Pair,
}

fn parse_list<T: std::str::FromStr>(raw: &str) -> Result<Option<Vec<T>>>
where
    T::Err: std::fmt::Display,
{
    if raw.trim() == "all" {
        return Ok(None);
    }
    raw.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|e| anyhow::anyhow!("{s:?}: {e}")))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn parse_pair(s: &str) -> Result<(String, String)> {
    let (a, b) = s
        .split_once(':')
        .or_else(|| s.split_once('-'))
        .with_context(|| format!("pair {s:?} should look like en-fr"))?;
    let (a, b) = (a.trim().to_string(), b.trim().to_string());
    Ok(if a <= b { (a, b) } else { (b, a) })
}

fn parse_pairs(raw: &str) -> Result<Option<BTreeSet<(String, String)>>> {
    if raw.trim() == "all" {
        return Ok(None);
    }
    raw.split(',').map(parse_pair).collect::<Result<_>>().map(Some)
}

fn languages_of(pairs: &Option<BTreeSet<(String, String)>>) -> Option<Vec<String>> {
    pairs.as_ref().map(|ps| {
        ps.iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    })
}

fn parse_filter(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .with_context(|| format!("filter {s:?} should look like column=value"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn parse_table_column(s: &str) -> Result<(PathBuf, String)> {
    let (p, c) = s
        .rsplit_once(':')
        .with_context(|| format!("{s:?} should look like table.csv:column"))?;
    Ok((PathBuf::from(p), c.to_string()))
}

/// Prints a line to stdout; a closed pipe (e.g. `| head`) is not an error.
fn say(line: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{line}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_json(p, value)?,
        None => say(&serde_json::to_string_pretty(value)?)?,
    }
    Ok(())
}

fn write_table<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    if path.extension().is_some_and(|e| e == "jsonl") {
        write_jsonl(path, rows)?;
    } else {
        write_csv(path, rows)?;
    }
    Ok(())
}

/// Narrows a score table to one value of each axis column it carries.
/// `mode` is applied when the table has a `mode` column; the layer filter
/// applies to `layer` or `layer_scope`.
fn narrow(table: Table, mode: Option<&str>, layer: &str, checkpoint: Option<u64>, keys: &[&str]) -> Result<Table> {
    let mut filters = Vec::new();
    if let Some(m) = mode.filter(|_| table.has("mode")) {
        filters.push(("mode".to_string(), m.to_string()));
    }
    for col in ["layer", "layer_scope"] {
        if table.has(col) {
            filters.push((col.to_string(), layer.to_string()));
        }
    }
    if let Some(c) = checkpoint.filter(|_| table.has("checkpoint")) {
        filters.push(("checkpoint".to_string(), c.to_string()));
    }
    let t = table.filter(&filters)?;
    for col in ["mode", "layer", "layer_scope", "checkpoint"] {
        if keys.contains(&col) || !t.has(col) {
            continue;
        }
        let i = t.column(col)?;
        let distinct: BTreeSet<&str> = t.rows.iter().map(|r| r[i].as_str()).collect();
        if distinct.len() > 1 {
            bail!("table mixes several {col} values {distinct:?}; pick one with the matching option");
        }
    }
    if t.rows.is_empty() {
        bail!("no rows left after filtering on {filters:?}");
    }
    Ok(t)
}

fn open_inputs(store: &Path, index: &Path) -> Result<(Store, AlignmentIndex)> {
    let store = Store::open(store).with_context(|| format!("opening store {}", store.display()))?;
    let index = AlignmentIndex::load(index).with_context(|| format!("loading index {}", index.display()))?;
    Ok((store, index))
}

fn cmd_ingest(corpus: &Path, languages: Option<Vec<String>>, out: Option<PathBuf>) -> Result<()> {
    let index = abx_core::ingest_corpus(corpus, languages.as_deref())?;
    if let Some(out) = &out {
        index.save(out)?;
    }
    say(&serde_json::to_string_pretty(&index.summary())?)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_score(
    store: &Path,
    corpus_index: &Path,
    modes: Vec<TripletMode>,
    pairs: &str,
    layers: &str,
    checkpoints: &str,
    exclude: Vec<u64>,
    n_triplets: usize,
    seed: u64,
    out: &Path,
    dump: Option<PathBuf>,
    jobs: usize,
) -> Result<()> {
    let (store_h, index) = open_inputs(store, corpus_index)?;
    let pairs = parse_pairs(pairs)?;
    let config = RunConfig {
        store: store.to_path_buf(),
        corpus: corpus_index.to_path_buf(),
        languages: languages_of(&pairs),
        layers: parse_list(layers)?,
        checkpoints: parse_list(checkpoints)?,
        exclude_checkpoints: exclude,
        modes,
        n_triplets,
        seed,
        out: out.to_path_buf(),
        jobs,
        retrieval: false,
        retrieval_layer: None,
        accuracy: None,
        final_checkpoint: None,
    };
    let mut plan: RunPlan = pipeline::plan(&config, &store_h, &index)?;
    if let Some(ps) = &pairs {
        plan.cells.retain(|c| ps.contains(&(c.lang1.clone(), c.lang2.clone())));
    }
    for s in &plan.skipped {
        eprintln!("skipped {} {}-{}: {}", s.mode, s.lang1, s.lang2, s.reason);
    }
    let index = index.restrict(&plan.languages)?;
    let scored = with_jobs(resolve_jobs(jobs), || pipeline::score_plan(&plan, &store_h, &index, n_triplets))??;
    for e in &scored.errors {
        eprintln!("{}: {}", e.subject, e.message);
    }
    let records: Vec<AbxRecord> = scored.cells.iter().map(|c| c.record.clone()).collect();
    write_table(out, &records)?;
    if let Some(dir) = dump {
        fs::create_dir_all(&dir)?;
        for c in &plan.cells {
            let path = dir.join(format!(
                "{}_{}_{}_l{}_c{}.jsonl",
                c.mode, c.lang1, c.lang2, c.layer, c.checkpoint
            ));
            let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
            write_triplet_dump(&mut w, sample_triplets(&index, c.mode, &c.lang1, &c.lang2, n_triplets, c.seed)?)?;
            w.flush()?;
        }
    }
    eprintln!("scored {} cells into {}", records.len(), out.display());
    Ok(())
}

fn cmd_retrieve(store: &Path, corpus_index: &Path, layer: &str, pairs: &str, checkpoints: &str, out: &Path) -> Result<()> {
    let (store_h, index) = open_inputs(store, corpus_index)?;
    let manifest = store_h.manifest();
    let layer = if layer == "last" {
        *manifest.layers.iter().max().context("store has no layers")?
    } else {
        layer.parse().with_context(|| format!("layer {layer:?}"))?
    };
    let pairs: Vec<(String, String)> = match parse_pairs(pairs)? {
        Some(ps) => ps.into_iter().collect(),
        None => {
            let langs: Vec<String> = manifest
                .languages
                .iter()
                .filter(|l| index.languages().contains(l))
                .cloned()
                .collect();
            unordered_pairs(&langs)
        }
    };
    let langs: Vec<String> = pairs
        .iter()
        .flat_map(|(a, b)| [a.clone(), b.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let checkpoints = parse_list::<u64>(checkpoints)?.unwrap_or_else(|| manifest.checkpoints.clone());
    let mut rows = Vec::new();
    for ckpt in checkpoints {
        let source = load_group(&store_h, ckpt, layer, &langs);
        for (a, b) in &pairs {
            match retrieval_top1(&source, &index, (a, b), layer, ckpt) {
                Ok(r) => rows.push(r),
                Err(e) => eprintln!("{a}-{b} checkpoint {ckpt}: {e}"),
            }
        }
    }
    write_table(out, &rows)?;
    Ok(())
}

fn keyed(table: &Table, on: &[String], value: &str) -> Result<BTreeMap<Vec<String>, f64>> {
    let keys: Vec<&str> = on.iter().map(String::as_str).collect();
    Ok(table.mean_by(&keys, value)?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_correlate(
    x: &str,
    y: &str,
    on: &[String],
    group_by: Option<&str>,
    x_where: &[String],
    y_where: &[String],
    out: Option<&Path>,
) -> Result<()> {
    let (xp, xc) = parse_table_column(x)?;
    let (yp, yc) = parse_table_column(y)?;
    let xw: Vec<_> = x_where.iter().map(|s| parse_filter(s)).collect::<Result<_>>()?;
    let yw: Vec<_> = y_where.iter().map(|s| parse_filter(s)).collect::<Result<_>>()?;
    let xt = Table::read(&xp)?.filter(&xw)?;
    let yt = Table::read(&yp)?.filter(&yw)?;
    let mut result = BTreeMap::new();
    match group_by {
        None => {
            let c = correlate_joined(&xc, &keyed(&xt, on, &xc)?, &yc, &keyed(&yt, on, &yc)?)?;
            result.insert("all".to_string(), c);
        }
        Some(g) => {
            let gi = xt.column(g)?;
            let groups: BTreeSet<String> = xt.rows.iter().map(|r| r[gi].clone()).collect();
            for v in groups {
                let f = [(g.to_string(), v.clone())];
                let xs = xt.filter(&f)?;
                let ys = if yt.has(g) { yt.filter(&f)? } else { yt.clone() };
                let c = correlate_joined(&xc, &keyed(&xs, on, &xc)?, &yc, &keyed(&ys, on, &yc)?)?;
                result.insert(v, c);
            }
        }
    }
    emit_json(&result, out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_regress(
    accuracy: &Path,
    ld: &Path,
    md: &Path,
    join_on: JoinOn,
    checkpoint: Option<u64>,
    layer: &str,
    out: Option<&Path>,
) -> Result<()> {
    let keys: Vec<&str> = match join_on {
        JoinOn::Language => vec!["language"],
        JoinOn::Pair => vec!["lang1", "lang2"],
    };
    let load = |p: &Path, mode: Option<&str>, value: &str| -> Result<BTreeMap<Vec<String>, f64>> {
        let t = narrow(Table::read(p)?, mode, layer, checkpoint, &keys)?;
        let mut k: Vec<&str> = keys.clone();
        if matches!(join_on, JoinOn::Pair) && t.has("source") {
            k = vec!["source", "target"];
        }
        Ok(t.mean_by(&k, value)?)
    };
    let acc = load(accuracy, None, "accuracy")?;
    let ldv = load(ld, Some("ld"), "score")?;
    let mdv = load(md, Some("md"), "score")?;
    let report = regress_joined("accuracy", &acc, &[("ld", &ldv), ("md", &mdv)])?;
    emit_json(&report, out)
}

fn cmd_select_checkpoint(
    ld: &Path,
    accuracy: &Path,
    final_checkpoint: Option<u64>,
    exclude: &[u64],
    layer: &str,
    out: Option<&Path>,
) -> Result<()> {
    let ld_t = narrow(Table::read(ld)?, Some("ld"), layer, None, &["checkpoint"])?;
    let ld_s = checkpoint_series(&ld_t, "score")?;
    let acc = checkpoint_series(&Table::read(accuracy)?, "accuracy")?;
    let excluded: BTreeSet<u64> = exclude.iter().copied().collect();
    let final_checkpoint = match final_checkpoint {
        Some(c) => c,
        None => ld_s
            .values()
            .flat_map(|s| s.keys().copied())
            .filter(|c| !excluded.contains(c))
            .max()
            .context("no checkpoints left")?,
    };
    let summary = select_checkpoint_by_ld(&ld_s, &acc, final_checkpoint, &excluded)?;
    emit_json(&summary, out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_select_source(
    ld: &Path,
    transfer: &Path,
    top_k: &[usize],
    n_draws: usize,
    seed: u64,
    exclude_selected: bool,
    checkpoint: Option<u64>,
    layer: &str,
    out: Option<&Path>,
) -> Result<()> {
    let ld_t = narrow(Table::read(ld)?, Some("ld"), layer, checkpoint, &[])?;
    let ld_m = pair_values(&ld_t, "score")?;
    let tr = pair_values(&Table::read(transfer)?, "accuracy")?;
    let opts = WinRateOptions {
        n_draws,
        seed,
        include_selected: !exclude_selected,
    };
    let summary = select_source_by_ld(&ld_m, &tr, top_k, &opts)?;
    emit_json(&summary, out)
}

fn cmd_report(records: &Path, figures: &str, accuracy: Option<&Path>, win_rates: Option<&Path>, out: &Path) -> Result<()> {
    let path = if records.is_dir() { records.join("scores.csv") } else { records.to_path_buf() };
    let recs: Vec<AbxRecord> = read_csv(&path).with_context(|| format!("reading {}", path.display()))?;
    let acc = accuracy
        .map(|p| -> Result<_> { Ok(checkpoint_series(&Table::read(p)?, "accuracy")?) })
        .transpose()?;
    let wins: Option<Vec<f64>> = match win_rates {
        Some(p) => {
            let v: serde_json::Value = serde_json::from_slice(&fs::read(p)?)?;
            let sel = v["selections"].as_array().context("win-rate file has no selections")?;
            Some(sel.iter().filter_map(|s| s["win_rate"].as_f64()).collect())
        }
        None => None,
    };
    let inputs = FigureInputs {
        records: &recs,
        layers: Vec::new(),
        layers_curve_checkpoint: None,
        accuracy: acc.as_ref(),
        win_rates: wins.as_deref(),
    };
    let kinds: Vec<FigureKind> = if figures == "all" {
        available_figures(&inputs)
    } else {
        figures.split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>()?
    };
    let written = emit_figure_data(&inputs, &kinds, out)?;
    for p in written {
        say(&p.display().to_string())?;
    }
    Ok(())
}

fn cmd_run(config: Option<PathBuf>, jobs: Option<usize>, dry_run: bool, set: &[String]) -> Result<()> {
    let mut overrides: Vec<(String, String)> = set.iter().map(|s| parse_filter(s)).collect::<Result<_>>()?;
    if let Some(j) = jobs {
        overrides.push(("jobs".into(), j.to_string()));
    }
    let cfg = RunConfig::load(config.as_deref(), &overrides)?;
    if dry_run {
        let plan = pipeline::dry_run(&cfg)?;
        say(&serde_json::to_string_pretty(&plan)?)?;
        return Ok(());
    }
    let summary = pipeline::run(&cfg)?;
    eprintln!(
        "{} of {} cells scored, {} errors; outputs in {}",
        summary.n_scored,
        summary.n_cells,
        summary.n_errors,
        summary.out_dir.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    out: &Path,
    languages: Vec<String>,
    meanings: usize,
    dim: usize,
    layers: Vec<u32>,
    checkpoints: Vec<u64>,
    language_offset: f64,
    noise: f64,
    dropout: f64,
    seed: u64,
) -> Result<()> {
    let cfg = PlantedConfig {
        languages,
        n_meanings: meanings,
        dim,
        layers,
        checkpoints,
        language_offset,
        noise,
        dropout,
        layer_gain: 0.5,
        checkpoint_gain: -0.3,
        seed,
        ..Default::default()
    };
    let fx = planted(&cfg)?;
    let manifest = fx.store.write_to_dir(out.join("store"))?;
    let corpus = out.join("corpus.jsonl");
    write_jsonl(&corpus, &fx.records)?;
    say(&manifest.display().to_string())?;
    say(&corpus.display().to_string())?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest { corpus, languages, out } => cmd_ingest(&corpus, languages, out),
        Command::Score {
            store,
            corpus_index,
            mode,
            pairs,
            layers,
            checkpoints,
            exclude_checkpoints,
            n_triplets,
            seed,
            out,
            dump_triplets,
            jobs,
        } => cmd_score(
            &store,
            &corpus_index,
            mode,
            &pairs,
            &layers,
            &checkpoints,
            exclude_checkpoints,
            n_triplets,
            seed,
            &out,
            dump_triplets,
            jobs,
        ),
        Command::Retrieve { store, corpus_index, layer, pairs, checkpoints, out } => {
            cmd_retrieve(&store, &corpus_index, &layer, &pairs, &checkpoints, &out)
        }
        Command::Correlate { x, y, on, group_by, x_where, y_where, out } => {
            cmd_correlate(&x, &y, &on, group_by.as_deref(), &x_where, &y_where, out.as_deref())
        }
        Command::Regress { accuracy, ld, md, join_on, checkpoint, layer, out } => {
            cmd_regress(&accuracy, &ld, &md, join_on, checkpoint, &layer, out.as_deref())
        }
        Command::SelectCheckpoint { ld, accuracy, final_checkpoint, exclude, layer, out } => {
            cmd_select_checkpoint(&ld, &accuracy, final_checkpoint, &exclude, &layer, out.as_deref())
        }
        Command::SelectSource { ld, transfer, top_k, n_draws, seed, exclude_selected, checkpoint, layer, out } => {
            cmd_select_source(&ld, &transfer, &top_k, n_draws, seed, exclude_selected, checkpoint, &layer, out.as_deref())
        }
        Command::Report { records, figures, accuracy, win_rates, out } => {
            cmd_report(&records, &figures, accuracy.as_deref(), win_rates.as_deref(), &out)
        }
        Command::Run { config, jobs, dry_run, set } => cmd_run(config, jobs, dry_run, &set),
        Command::Synth {
            out,
            languages,
            meanings,
            dim,
            layers,
            checkpoints,
            language_offset,
            noise,
            dropout,
            seed,
        } => cmd_synth(
            &out,
            languages,
            meanings,
            dim,
            layers,
            checkpoints,
            language_offset,
            noise,
            dropout,
            seed,
        ),
    }
}
