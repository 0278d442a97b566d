//! Sentence-aligned corpus ingestion and the meaning → languages index.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AbxError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub meaning_id: u64,
    pub language: String,
    pub text: String,
}

/// Which meanings exist in which languages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentIndex {
    languages: Vec<String>,
    meanings: BTreeMap<u64, BitVec<usize, Lsb0>>,
    per_language: Vec<Vec<u64>>,
}

/// Reads every record of a line-delimited JSON corpus. Blank lines are
/// ignored; line numbers in errors are 1-based.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<SentenceRecord>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| AbxError::io(path, e))?;
    parse_records(BufReader::new(f)).map_err(|e| match e {
        AbxError::Io { source, .. } => AbxError::io(path, source),
        other => other,
    })
}

pub fn parse_records(reader: impl BufRead) -> Result<Vec<SentenceRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| AbxError::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SentenceRecord = serde_json::from_str(&line).map_err(|e| AbxError::MalformedLine {
            line: lineno,
            reason: e.to_string(),
        })?;
        if rec.language.is_empty() {
            return Err(AbxError::MalformedLine {
                line: lineno,
                reason: "empty language code".into(),
            });
        }
        if !seen.insert((rec.meaning_id, rec.language.clone())) {
            return Err(AbxError::DuplicateRecord {
                meaning_id: rec.meaning_id,
                language: rec.language,
                line: lineno,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// Ingests a corpus file, keeping only `languages` when given.
pub fn ingest_corpus(path: impl AsRef<Path>, languages: Option<&[String]>) -> Result<AlignmentIndex> {
    let records = read_corpus(path)?;
    AlignmentIndex::from_records(&records, languages)
}

impl AlignmentIndex {
    pub fn from_records(records: &[SentenceRecord], filter: Option<&[String]>) -> Result<Self> {
        let present: std::collections::BTreeSet<&str> =
            records.iter().map(|r| r.language.as_str()).collect();
        let languages: Vec<String> = match filter {
            Some(wanted) => {
                for l in wanted {
                    if !present.contains(l.as_str()) {
                        return Err(AbxError::UnknownLanguage(l.clone()));
                    }
                }
                let mut v = wanted.to_vec();
                v.sort();
                v.dedup();
                v
            }
            None => present.iter().map(|s| s.to_string()).collect(),
        };
        Self::from_pairs(
            languages,
            records.iter().map(|r| (r.meaning_id, r.language.as_str())),
        )
    }

    /// Builds an index from (meaning, language) pairs, dropping pairs whose
    /// language is not in `languages`.
    pub fn from_pairs<'a>(
        mut languages: Vec<String>,
        pairs: impl IntoIterator<Item = (u64, &'a str)>,
    ) -> Result<Self> {
        languages.sort();
        languages.dedup();
        let pos: BTreeMap<&str, usize> = languages
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let n_lang = languages.len();
        let mut meanings: BTreeMap<u64, BitVec<usize, Lsb0>> = BTreeMap::new();
        for (mid, lang) in pairs {
            let Some(&li) = pos.get(lang) else { continue };
            let bits = meanings.entry(mid).or_insert_with(|| bitvec![usize, Lsb0; 0; n_lang]);
            bits.set(li, true);
        }
        let mut per_language = vec![Vec::new(); n_lang];
        for (mid, bits) in &meanings {
            for li in bits.iter_ones() {
                per_language[li].push(*mid);
            }
        }
        Ok(AlignmentIndex {
            languages,
            meanings,
            per_language,
        })
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn n_meanings(&self) -> usize {
        self.meanings.len()
    }

    pub fn language_position(&self, language: &str) -> Result<usize> {
        self.languages
            .binary_search_by(|l| l.as_str().cmp(language))
            .map_err(|_| AbxError::UnknownLanguage(language.to_string()))
    }

    /// Sorted meaning ids present in `language`.
    pub fn meanings_of(&self, language: &str) -> Result<&[u64]> {
        Ok(&self.per_language[self.language_position(language)?])
    }

    pub fn has(&self, meaning_id: u64, language: &str) -> bool {
        match (self.meanings.get(&meaning_id), self.language_position(language)) {
            (Some(bits), Ok(li)) => bits[li],
            _ => false,
        }
    }

    /// Languages carrying `meaning_id`, in sorted order.
    pub fn languages_of(&self, meaning_id: u64) -> Vec<&str> {
        self.meanings
            .get(&meaning_id)
            .map(|bits| bits.iter_ones().map(|i| self.languages[i].as_str()).collect())
            .unwrap_or_default()
    }

    /// Meanings present in both languages, ascending.
    pub fn shared_meanings(&self, lang1: &str, lang2: &str) -> Result<Vec<u64>> {
        let a = self.meanings_of(lang1)?;
        let b = self.meanings_of(lang2)?;
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::with_capacity(a.len().min(b.len()));
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(out)
    }

    /// All unordered pairs `(a, b)` with `a < b`.
    pub fn language_pairs(&self) -> Vec<(String, String)> {
        unordered_pairs(&self.languages)
    }

    pub fn summary(&self) -> IndexSummary {
        let counts = self
            .languages
            .iter()
            .zip(&self.per_language)
            .map(|(l, m)| (l.clone(), m.len()))
            .collect();
        let shared = self
            .language_pairs()
            .into_iter()
            .map(|(a, b)| {
                let n = self.shared_meanings(&a, &b).map(|v| v.len()).unwrap_or(0);
                PairCount {
                    lang1: a,
                    lang2: b,
                    shared: n,
                }
            })
            .collect();
        IndexSummary {
            languages: self.languages.clone(),
            n_meanings: self.meanings.len(),
            counts,
            shared,
        }
    }

    pub fn to_file(&self) -> IndexFile {
        IndexFile {
            languages: self.languages.clone(),
            meanings: self
                .meanings
                .iter()
                .map(|(mid, bits)| {
                    (
                        *mid,
                        bits.iter_ones().map(|i| self.languages[i].clone()).collect(),
                    )
                })
                .collect(),
        }
    }

    pub fn from_file(file: &IndexFile) -> Result<Self> {
        let langs: HashSet<&str> = file.languages.iter().map(String::as_str).collect();
        for (mid, ls) in &file.meanings {
            if ls.is_empty() {
                return Err(AbxError::Manifest(format!("meaning {mid} has no languages")));
            }
            if let Some(bad) = ls.iter().find(|l| !langs.contains(l.as_str())) {
                return Err(AbxError::UnknownLanguage(bad.clone()));
            }
        }
        Self::from_pairs(
            file.languages.clone(),
            file.meanings
                .iter()
                .flat_map(|(mid, ls)| ls.iter().map(move |l| (*mid, l.as_str()))),
        )
    }

    /// Restricts the index to `languages`, dropping meanings left empty.
    pub fn restrict(&self, languages: &[String]) -> Result<Self> {
        for l in languages {
            self.language_position(l)?;
        }
        Self::from_pairs(
            languages.to_vec(),
            self.meanings.iter().flat_map(|(mid, bits)| {
                bits.iter_ones()
                    .map(move |i| (*mid, self.languages[i].as_str()))
            }),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_vec(&self.to_file()).expect("index serializes");
        fs::write(path, json).map_err(|e| AbxError::io(path, e))
    }

    /// Loads either a saved index (`.json`) or a raw corpus (anything else).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e == "json") {
            let raw = fs::read(path).map_err(|e| AbxError::io(path, e))?;
            let file: IndexFile =
                serde_json::from_slice(&raw).map_err(|e| AbxError::Manifest(e.to_string()))?;
            Self::from_file(&file)
        } else {
            ingest_corpus(path, None)
        }
    }
}

pub fn unordered_pairs(languages: &[String]) -> Vec<(String, String)> {
    let mut sorted = languages.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut out = Vec::new();
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            out.push((sorted[i].clone(), sorted[j].clone()));
        }
    }
    out
}

/// Serialized form of an [`AlignmentIndex`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexFile {
    pub languages: Vec<String>,
    pub meanings: Vec<(u64, Vec<String>)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCount {
    pub lang1: String,
    pub lang2: String,
    pub shared: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub languages: Vec<String>,
    pub n_meanings: usize,
    pub counts: BTreeMap<String, usize>,
    pub shared: Vec<PairCount>,
}
