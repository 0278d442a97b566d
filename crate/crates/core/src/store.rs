//! Binary embedding files and the manifest-indexed store.
//!
//! One file per (checkpoint, layer, language):
//!
//! ```text
//! "EMBX" | version u32 | dtype u32 (1 = f32) | n_sentences u64 | dim u64
//!        | meaning_ids n×u64 | vectors n×dim×f32        (all little-endian)
//! ```

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{AbxError, Result};

pub const MAGIC: &[u8; 4] = b"EMBX";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8;

/// Sentence vectors of one language at one (checkpoint, layer).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    checkpoint: u64,
    layer: u32,
    language: String,
    dim: usize,
    vectors: Vec<f32>,
    meaning_ids: Vec<u64>,
    row_of: HashMap<u64, usize>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from row-major `vectors`, rejecting duplicate meaning
    /// ids, all-zero rows and non-finite values.
    pub fn new(
        checkpoint: u64,
        layer: u32,
        language: impl Into<String>,
        dim: usize,
        vectors: Vec<f32>,
        meaning_ids: Vec<u64>,
    ) -> Result<Self> {
        let language = language.into();
        if dim == 0 {
            return Err(AbxError::InvalidMatrix("dim must be positive".into()));
        }
        if vectors.len() != dim * meaning_ids.len() {
            return Err(AbxError::InvalidMatrix(format!(
                "{} values for {} rows of dim {}",
                vectors.len(),
                meaning_ids.len(),
                dim
            )));
        }
        let mut row_of = HashMap::with_capacity(meaning_ids.len());
        for (i, &id) in meaning_ids.iter().enumerate() {
            if row_of.insert(id, i).is_some() {
                return Err(AbxError::InvalidMatrix(format!(
                    "duplicate meaning id {id} in {language}"
                )));
            }
        }
        for (i, row) in vectors.chunks_exact(dim).enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(AbxError::InvalidMatrix(format!(
                    "non-finite value in row {i} (meaning {}) of {language}",
                    meaning_ids[i]
                )));
            }
            if row.iter().all(|&v| v == 0.0) {
                return Err(AbxError::InvalidMatrix(format!(
                    "zero vector in row {i} (meaning {}) of {language}",
                    meaning_ids[i]
                )));
            }
        }
        Ok(EmbeddingMatrix {
            checkpoint,
            layer,
            language,
            dim,
            vectors,
            meaning_ids,
            row_of,
        })
    }

    pub fn checkpoint(&self) -> u64 {
        self.checkpoint
    }

    pub fn layer(&self) -> u32 {
        self.layer
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.meaning_ids.len()
    }

    pub fn meaning_ids(&self) -> &[u64] {
        &self.meaning_ids
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_index(&self, meaning_id: u64) -> Option<usize> {
        self.row_of.get(&meaning_id).copied()
    }

    pub fn vector(&self, meaning_id: u64) -> Option<&[f32]> {
        self.row_index(meaning_id).map(|i| self.row(i))
    }

    /// Same matrix with every row passed through `f`; re-validated.
    pub fn map_rows(&self, mut f: impl FnMut(usize, &[f32]) -> Vec<f32>) -> Result<Self> {
        let mut vectors = Vec::with_capacity(self.vectors.len());
        for i in 0..self.n_rows() {
            let row = f(i, self.row(i));
            if row.len() != self.dim {
                return Err(AbxError::DimMismatch(row.len(), self.dim));
            }
            vectors.extend_from_slice(&row);
        }
        EmbeddingMatrix::new(
            self.checkpoint,
            self.layer,
            self.language.clone(),
            self.dim,
            vectors,
            self.meaning_ids.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FileHeader {
    pub format_version: u32,
    pub dtype: u32,
    pub n_sentences: u64,
    pub dim: u64,
}

impl FileHeader {
    fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: &str| AbxError::BadFile {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        if bytes.len() < HEADER_LEN {
            return Err(bad("truncated header"));
        }
        if &bytes[0..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let header = FileHeader {
            format_version: u32_at(4),
            dtype: u32_at(8),
            n_sentences: u64_at(12),
            dim: u64_at(20),
        };
        if header.format_version != FORMAT_VERSION {
            return Err(AbxError::UnsupportedVersion(header.format_version));
        }
        if header.dtype != DTYPE_F32 {
            return Err(bad(&format!("unsupported dtype code {}", header.dtype)));
        }
        Ok(header)
    }

    fn payload_len(&self) -> Option<usize> {
        let n = usize::try_from(self.n_sentences).ok()?;
        let d = usize::try_from(self.dim).ok()?;
        n.checked_mul(8)?.checked_add(n.checked_mul(d)?.checked_mul(4)?)
    }
}

/// Writes `matrix` in the EMBX layout.
pub fn write_matrix(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| AbxError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| AbxError::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&DTYPE_F32.to_le_bytes()).map_err(io)?;
    w.write_all(&(matrix.n_rows() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(matrix.dim() as u64).to_le_bytes()).map_err(io)?;
    for id in matrix.meaning_ids() {
        w.write_all(&id.to_le_bytes()).map_err(io)?;
    }
    for v in matrix.vectors() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_header(path: impl AsRef<Path>) -> Result<FileHeader> {
    use std::io::Read;
    let path = path.as_ref();
    let mut f = fs::File::open(path).map_err(|e| AbxError::io(path, e))?;
    let mut buf = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        let k = f.read(&mut buf[filled..]).map_err(|e| AbxError::io(path, e))?;
        if k == 0 {
            break;
        }
        filled += k;
    }
    FileHeader::parse(&buf[..filled], path)
}

/// Reads one EMBX file; the file itself carries no cell labels, so they are
/// supplied by the caller.
pub fn read_matrix(
    path: impl AsRef<Path>,
    checkpoint: u64,
    layer: u32,
    language: &str,
) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = FileBytes::open(path)?;
    decode_matrix(bytes.as_slice(), path, checkpoint, layer, language)
}

fn decode_matrix(
    bytes: &[u8],
    path: &Path,
    checkpoint: u64,
    layer: u32,
    language: &str,
) -> Result<EmbeddingMatrix> {
    let header = FileHeader::parse(bytes, path)?;
    let expected = header.payload_len().ok_or_else(|| AbxError::BadFile {
        path: path.to_path_buf(),
        reason: "header sizes overflow".into(),
    })?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(AbxError::BadFile {
            path: path.to_path_buf(),
            reason: format!("payload is {} bytes, header implies {expected}", body.len()),
        });
    }
    let n = header.n_sentences as usize;
    let (ids, vecs) = body.split_at(n * 8);
    let meaning_ids = ids
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let vectors = vecs
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingMatrix::new(
        checkpoint,
        layer,
        language,
        header.dim as usize,
        vectors,
        meaning_ids,
    )
}

enum FileBytes {
    #[cfg(feature = "mmap")]
    Mapped(memmap2::Mmap),
    #[allow(dead_code)]
    Owned(Vec<u8>),
}

impl FileBytes {
    fn open(path: &Path) -> Result<Self> {
        #[cfg(feature = "mmap")]
        {
            let f = fs::File::open(path).map_err(|e| AbxError::io(path, e))?;
            // SAFETY: store files are treated as immutable while a store is open.
            let map = unsafe { memmap2::Mmap::map(&f) }.map_err(|e| AbxError::io(path, e))?;
            Ok(FileBytes::Mapped(map))
        }
        #[cfg(not(feature = "mmap"))]
        {
            fs::read(path)
                .map(FileBytes::Owned)
                .map_err(|e| AbxError::io(path, e))
        }
    }

    fn as_slice(&self) -> &[u8] {
        match self {
            #[cfg(feature = "mmap")]
            FileBytes::Mapped(m) => m,
            FileBytes::Owned(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub checkpoint: u64,
    pub layer: u32,
    pub language: String,
    pub path: String,
    pub n_sentences: u64,
    pub dim: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub format_version: u32,
    pub languages: Vec<String>,
    pub checkpoints: Vec<u64>,
    pub layers: Vec<u32>,
    pub entries: Vec<ManifestEntry>,
}

impl StoreManifest {
    /// Manifest whose axis lists are derived from `entries`.
    pub fn from_entries(mut entries: Vec<ManifestEntry>) -> Self {
        entries.sort_by(|a, b| {
            (a.checkpoint, a.layer, &a.language).cmp(&(b.checkpoint, b.layer, &b.language))
        });
        let languages: BTreeSet<_> = entries.iter().map(|e| e.language.clone()).collect();
        let checkpoints: BTreeSet<_> = entries.iter().map(|e| e.checkpoint).collect();
        let layers: BTreeSet<_> = entries.iter().map(|e| e.layer).collect();
        StoreManifest {
            format_version: FORMAT_VERSION,
            languages: languages.into_iter().collect(),
            checkpoints: checkpoints.into_iter().collect(),
            layers: layers.into_iter().collect(),
            entries,
        }
    }

    fn validate_shape(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(AbxError::UnsupportedVersion(self.format_version));
        }
        let mut seen = HashSet::new();
        let mut dims: HashMap<u64, u64> = HashMap::new();
        let languages: HashSet<&str> = self.languages.iter().map(String::as_str).collect();
        for e in &self.entries {
            if !seen.insert((e.checkpoint, e.layer, e.language.as_str())) {
                return Err(AbxError::Manifest(format!(
                    "duplicate entry ({}, {}, {})",
                    e.checkpoint, e.layer, e.language
                )));
            }
            if !languages.contains(e.language.as_str()) {
                return Err(AbxError::Manifest(format!(
                    "entry language {} not listed in languages",
                    e.language
                )));
            }
            if !self.checkpoints.contains(&e.checkpoint) || !self.layers.contains(&e.layer) {
                return Err(AbxError::Manifest(format!(
                    "entry ({}, {}) outside listed checkpoints/layers",
                    e.checkpoint, e.layer
                )));
            }
            if *dims.entry(e.checkpoint).or_insert(e.dim) != e.dim {
                return Err(AbxError::Manifest(format!(
                    "dim {} differs from other matrices at checkpoint {}",
                    e.dim, e.checkpoint
                )));
            }
        }
        if !self.checkpoints.windows(2).all(|w| w[0] < w[1])
            || !self.layers.windows(2).all(|w| w[0] < w[1])
        {
            return Err(AbxError::Manifest(
                "checkpoints and layers must be strictly sorted".into(),
            ));
        }
        Ok(())
    }
}

/// Anything that can hand out matrices by cell.
pub trait EmbeddingSource: Sync {
    fn matrix(&self, checkpoint: u64, layer: u32, language: &str) -> Result<Arc<EmbeddingMatrix>>;
}

/// Returns the stored row for `meaning_id`.
pub fn get_vector<S: EmbeddingSource + ?Sized>(
    source: &S,
    checkpoint: u64,
    layer: u32,
    language: &str,
    meaning_id: u64,
) -> Result<Vec<f32>> {
    let m = source.matrix(checkpoint, layer, language)?;
    m.vector(meaning_id)
        .map(<[f32]>::to_vec)
        .ok_or_else(|| AbxError::UnknownMeaning {
            checkpoint,
            layer,
            language: language.to_string(),
            meaning_id,
        })
}

/// Read-only handle over a manifest and its EMBX files. Matrices are decoded
/// on demand and not cached.
#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    manifest: StoreManifest,
    manifest_sha256: String,
    by_cell: HashMap<(u64, u32, String), usize>,
}

/// Opens a store, checking every file header against its manifest entry.
pub fn open_store(manifest_path: impl AsRef<Path>) -> Result<Store> {
    Store::open(manifest_path)
}

impl Store {
    pub fn open(manifest_path: impl AsRef<Path>) -> Result<Self> {
        use sha2::{Digest, Sha256};

        let manifest_path = manifest_path.as_ref();
        let raw = fs::read(manifest_path).map_err(|e| AbxError::io(manifest_path, e))?;
        let manifest: StoreManifest =
            serde_json::from_slice(&raw).map_err(|e| AbxError::Manifest(e.to_string()))?;
        manifest.validate_shape()?;
        let root = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        let mut by_cell = HashMap::with_capacity(manifest.entries.len());
        for (i, e) in manifest.entries.iter().enumerate() {
            let header = read_header(root.join(&e.path))?;
            let cell = format!("({}, {}, {})", e.checkpoint, e.layer, e.language);
            if header.n_sentences != e.n_sentences {
                return Err(AbxError::HeaderMismatch {
                    cell,
                    reason: format!(
                        "n_sentences {} in manifest, {} in file",
                        e.n_sentences, header.n_sentences
                    ),
                });
            }
            if header.dim != e.dim {
                return Err(AbxError::HeaderMismatch {
                    cell,
                    reason: format!("dim {} in manifest, {} in file", e.dim, header.dim),
                });
            }
            by_cell.insert((e.checkpoint, e.layer, e.language.clone()), i);
        }
        Ok(Store {
            root,
            manifest,
            manifest_sha256: hex::encode(Sha256::digest(&raw)),
            by_cell,
        })
    }

    pub fn manifest(&self) -> &StoreManifest {
        &self.manifest
    }

    pub fn manifest_sha256(&self) -> &str {
        &self.manifest_sha256
    }

    pub fn contains(&self, checkpoint: u64, layer: u32, language: &str) -> bool {
        self.by_cell
            .contains_key(&(checkpoint, layer, language.to_string()))
    }

    pub fn get(&self, checkpoint: u64, layer: u32, language: &str) -> Result<EmbeddingMatrix> {
        let idx = self
            .by_cell
            .get(&(checkpoint, layer, language.to_string()))
            .ok_or_else(|| AbxError::MissingMatrix {
                checkpoint,
                layer,
                language: language.to_string(),
            })?;
        let entry = &self.manifest.entries[*idx];
        read_matrix(self.root.join(&entry.path), checkpoint, layer, language)
    }
}

impl EmbeddingSource for Store {
    fn matrix(&self, checkpoint: u64, layer: u32, language: &str) -> Result<Arc<EmbeddingMatrix>> {
        self.get(checkpoint, layer, language).map(Arc::new)
    }
}

/// Matrices held in memory; used for fixtures and the browser demo.
#[derive(Debug, Default, Clone)]
pub struct InMemoryStore {
    cells: HashMap<(u64, u32, String), Arc<EmbeddingMatrix>>,
}

impl InMemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, matrix: EmbeddingMatrix) {
        let key = (matrix.checkpoint(), matrix.layer(), matrix.language().to_string());
        self.cells.insert(key, Arc::new(matrix));
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn matrices(&self) -> impl Iterator<Item = &EmbeddingMatrix> {
        self.cells.values().map(Arc::as_ref)
    }

    /// Applies `f` to every matrix, returning a new store.
    pub fn try_map(
        &self,
        mut f: impl FnMut(&EmbeddingMatrix) -> Result<EmbeddingMatrix>,
    ) -> Result<Self> {
        let mut keys: Vec<_> = self.cells.keys().cloned().collect();
        keys.sort();
        let mut out = InMemoryStore::new();
        for k in keys {
            out.insert(f(&self.cells[&k])?);
        }
        Ok(out)
    }

    /// Writes one EMBX file per matrix plus `manifest.json` into `dir`,
    /// returning the manifest path.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| AbxError::io(dir, e))?;
        let mut entries = Vec::with_capacity(self.cells.len());
        for m in self.cells.values() {
            let rel = format!("c{}_l{}_{}.embx", m.checkpoint(), m.layer(), m.language());
            write_matrix(m, dir.join(&rel))?;
            entries.push(ManifestEntry {
                checkpoint: m.checkpoint(),
                layer: m.layer(),
                language: m.language().to_string(),
                path: rel,
                n_sentences: m.n_rows() as u64,
                dim: m.dim() as u64,
            });
        }
        let manifest = StoreManifest::from_entries(entries);
        let path = dir.join("manifest.json");
        let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, json).map_err(|e| AbxError::io(&path, e))?;
        Ok(path)
    }
}

impl EmbeddingSource for InMemoryStore {
    fn matrix(&self, checkpoint: u64, layer: u32, language: &str) -> Result<Arc<EmbeddingMatrix>> {
        self.cells
            .get(&(checkpoint, layer, language.to_string()))
            .cloned()
            .ok_or_else(|| AbxError::MissingMatrix {
                checkpoint,
                layer,
                language: language.to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn small() -> EmbeddingMatrix {
        EmbeddingMatrix::new(0, 1, "en", 3, vec![1., 0., 0., 0., 1., 0.], vec![5, 9]).unwrap()
    }

    #[test]
    fn small_matrix_round_trips_bit_identically() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.embx");
        let m = small();
        write_matrix(&m, &p).unwrap();
        let back = read_matrix(&p, 0, 1, "en").unwrap();
        assert_eq!(back, m);
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"EMBX");
        assert_eq!(bytes.len(), HEADER_LEN + 2 * 8 + 6 * 4);
        assert_eq!(u64::from_le_bytes(bytes[28..36].try_into().unwrap()), 5);
    }

    #[test]
    fn zero_row_rejected() {
        let err = EmbeddingMatrix::new(0, 0, "en", 2, vec![1., 0., 0., 0.], vec![1, 2]).unwrap_err();
        assert!(matches!(err, AbxError::InvalidMatrix(ref s) if s.contains("zero vector")));
    }

    #[test]
    fn duplicate_id_rejected() {
        let err = EmbeddingMatrix::new(0, 0, "en", 1, vec![1., 2.], vec![3, 3]).unwrap_err();
        assert!(matches!(err, AbxError::InvalidMatrix(ref s) if s.contains("duplicate")));
    }

    #[test]
    fn zero_row_in_file_rejected_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.embx");
        write_matrix(&small(), &p).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        // overwrite the first vector's only nonzero component
        let off = HEADER_LEN + 16;
        bytes[off..off + 4].copy_from_slice(&0f32.to_le_bytes());
        fs::write(&p, bytes).unwrap();
        assert!(matches!(
            read_matrix(&p, 0, 1, "en"),
            Err(AbxError::InvalidMatrix(_))
        ));
    }

    #[test]
    fn large_random_matrix_round_trips() {
        let mut rng = StreamRng::new(2024);
        let (n, d) = (1000, 768);
        let vectors: Vec<f32> = (0..n * d).map(|_| rng.unit_f64() as f32 - 0.5).collect();
        let ids: Vec<u64> = (0..n as u64).map(|i| i * 3 + 1).collect();
        let m = EmbeddingMatrix::new(7, 12, "fr", d, vectors.clone(), ids.clone()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("big.embx");
        write_matrix(&m, &p).unwrap();
        let back = read_matrix(&p, 7, 12, "fr").unwrap();
        assert_eq!(back.meaning_ids(), &ids[..]);
        for (a, b) in back.vectors().iter().zip(&vectors) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_file_and_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.embx");
        write_matrix(&small(), &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(read_matrix(&p, 0, 1, "en"), Err(AbxError::BadFile { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        fs::write(&p, bad).unwrap();
        assert!(matches!(read_matrix(&p, 0, 1, "en"), Err(AbxError::BadFile { .. })));
        let mut v2 = bytes;
        v2[4] = 2;
        fs::write(&p, v2).unwrap();
        assert!(matches!(
            read_matrix(&p, 0, 1, "en"),
            Err(AbxError::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn store_get_and_lookup_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut mem = InMemoryStore::new();
        mem.insert(small());
        let manifest = mem.write_to_dir(dir.path()).unwrap();
        let store = open_store(&manifest).unwrap();
        assert_eq!(store.get(0, 1, "en").unwrap(), small());
        assert_eq!(get_vector(&store, 0, 1, "en", 9).unwrap(), vec![0., 1., 0.]);
        assert!(matches!(
            get_vector(&store, 0, 1, "en", 999),
            Err(AbxError::UnknownMeaning { meaning_id: 999, .. })
        ));
        assert!(matches!(
            get_vector(&store, 0, 2, "en", 5),
            Err(AbxError::MissingMatrix { .. })
        ));
    }

    #[test]
    fn manifest_header_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let mut mem = InMemoryStore::new();
        mem.insert(small());
        let path = mem.write_to_dir(dir.path()).unwrap();
        let mut manifest: StoreManifest =
            serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        manifest.entries[0].n_sentences = 3;
        fs::write(&path, serde_json::to_vec(&manifest).unwrap()).unwrap();
        assert!(matches!(open_store(&path), Err(AbxError::HeaderMismatch { .. })));
    }

    #[test]
    fn manifest_rejects_duplicates_and_bad_version() {
        let dir = tempfile::tempdir().unwrap();
        let mut mem = InMemoryStore::new();
        mem.insert(small());
        let path = mem.write_to_dir(dir.path()).unwrap();
        let good: StoreManifest = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();

        let mut dup = good.clone();
        dup.entries.push(dup.entries[0].clone());
        fs::write(&path, serde_json::to_vec(&dup).unwrap()).unwrap();
        assert!(matches!(open_store(&path), Err(AbxError::Manifest(_))));

        let mut v9 = good.clone();
        v9.format_version = 9;
        fs::write(&path, serde_json::to_vec(&v9).unwrap()).unwrap();
        assert!(matches!(open_store(&path), Err(AbxError::UnsupportedVersion(9))));

        let mut missing = good;
        missing.entries[0].path = "nope.embx".into();
        fs::write(&path, serde_json::to_vec(&missing).unwrap()).unwrap();
        assert!(matches!(open_store(&path), Err(AbxError::Io { .. })));
    }
}
