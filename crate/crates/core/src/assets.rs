//! On-disk formats: binary strand files, JSON caption sidecars, and the
//! embedding index file. Everything is little-endian.
//!
//! Strand file: `"HAIR"`, u32 version (1), u32 strand count, then per strand
//! a u32 vertex count followed by `count × 3` f32 coordinates.
//!
//! Index file: `"HIDX"`, u32 version (1), u32-length-prefixed UTF-8 provider
//! id, u32 N, u32 D, `N × D` f32 rows, then N u32-length-prefixed ids.

use std::fs;
use std::path::{Path, PathBuf};

use glam::DVec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{encode_png, rasterize_strands, Camera};
use crate::model::{validate_hairstyle, Hairstyle, HeadMesh, Strand, StyleSource};
use crate::retrieval::{normalize, EmbeddingIndex, RetrievalError};

pub const HAIR_MAGIC: [u8; 4] = *b"HAIR";
pub const INDEX_MAGIC: [u8; 4] = *b"HIDX";
pub const HAIR_VERSION: u32 = 1;
pub const INDEX_VERSION: u32 = 1;
pub const HAIR_HEADER_LEN: usize = 12;
pub const THUMBNAIL_DIR: &str = "thumbnails";
pub const THUMBNAIL_SIZE: u32 = 128;

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },
    #[error("file truncated {}", match .strand { Some(s) => format!("in strand {s}"), None => "in header".to_string() })]
    TruncatedFile { strand: Option<usize> },
    #[error("unsupported version {0}")]
    VersionUnsupported(u32),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid hairstyle: {0}")]
    InvalidHairstyle(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("{path}: bad sidecar: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
    #[error(transparent)]
    Index(#[from] RetrievalError),
    #[error("trailing bytes after the last record")]
    TrailingBytes,
    #[error("thumbnail: {0}")]
    Thumbnail(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AssetError + '_ {
    move |source| AssetError::Io { path: path.to_path_buf(), source }
}

/// Little-endian reader that reports which strand ran out of bytes.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    strand: Option<usize>,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0, strand: None }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], AssetError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(AssetError::TruncatedFile { strand: self.strand })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, AssetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, AssetError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<(), AssetError> {
        let found = self.bytes.get(..4.min(self.bytes.len())).unwrap_or_default();
        if found != expected {
            // A prefix of the right magic is a truncation, not corruption.
            if found.len() < 4 && expected.starts_with(found) {
                return Err(AssetError::TruncatedFile { strand: None });
            }
            return Err(AssetError::BadMagic { expected, found: found.to_vec() });
        }
        self.pos = 4;
        Ok(())
    }

    fn string(&mut self) -> Result<String, AssetError> {
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| AssetError::CorruptIndex("string is not UTF-8".into()))
    }
}

/// Serializes strand geometry; coordinates are narrowed to f32.
pub fn encode_hairstyle(h: &Hairstyle) -> Vec<u8> {
    let floats: usize = h.strands.iter().map(|s| s.len() * 3).sum();
    let mut out = Vec::with_capacity(HAIR_HEADER_LEN + 4 * h.strands.len() + 4 * floats);
    out.extend_from_slice(&HAIR_MAGIC);
    out.extend_from_slice(&HAIR_VERSION.to_le_bytes());
    out.extend_from_slice(&(h.strands.len() as u32).to_le_bytes());
    for s in &h.strands {
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        for v in &s.vertices {
            for c in v.to_array() {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
    }
    out
}

/// Parses strand geometry. The result carries `id`, an empty caption and
/// the database source.
pub fn decode_hairstyle(bytes: &[u8], id: &str) -> Result<Hairstyle, AssetError> {
    let mut c = Cursor::new(bytes);
    c.magic(HAIR_MAGIC)?;
    let version = c.u32()?;
    if version != HAIR_VERSION {
        return Err(AssetError::VersionUnsupported(version));
    }
    let count = c.u32()? as usize;
    // Every strand needs at least its count field.
    let mut strands = Vec::with_capacity(count.min(c.remaining() / 4));
    for s in 0..count {
        c.strand = Some(s);
        let n = c.u32()? as usize;
        if n.saturating_mul(12) > c.remaining() {
            return Err(AssetError::TruncatedFile { strand: Some(s) });
        }
        let mut vertices = Vec::with_capacity(n);
        for _ in 0..n {
            let (x, y, z) = (c.f32()?, c.f32()?, c.f32()?);
            vertices.push(DVec3::new(x as f64, y as f64, z as f64));
        }
        strands.push(Strand::new(vertices));
    }
    if c.remaining() != 0 {
        return Err(AssetError::TrailingBytes);
    }
    Ok(Hairstyle { id: id.to_string(), strands, caption: String::new(), source: StyleSource::Database })
}

fn check_writable(h: &Hairstyle) -> Result<(), AssetError> {
    let violations = validate_hairstyle(h);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().take(5).map(ToString::to_string).collect();
        return Err(AssetError::InvalidHairstyle(text.join("; ")));
    }
    if let Some(bad) = h.strands.iter().position(|s| s.vertices.iter().any(|v| v.abs().max_element() > f32::MAX as f64)) {
        return Err(AssetError::InvalidHairstyle(format!("strand {bad}: coordinate exceeds f32 range")));
    }
    Ok(())
}

pub fn write_hairstyle(h: &Hairstyle, path: &Path) -> Result<(), AssetError> {
    check_writable(h)?;
    fs::write(path, encode_hairstyle(h)).map_err(io_err(path))
}

/// Reads a strand file; the id is the file stem.
pub fn read_hairstyle(path: &Path) -> Result<Hairstyle, AssetError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    decode_hairstyle(&bytes, id)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub id: String,
    pub caption: String,
}

/// Result of scanning a database directory.
#[derive(Debug, Default)]
pub struct Database {
    /// Sorted by file name.
    pub styles: Vec<Hairstyle>,
    /// Strand files that were skipped, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

impl Database {
    pub fn get(&self, id: &str) -> Option<&Hairstyle> {
        self.styles.iter().find(|h| h.id == id)
    }

    pub fn captions(&self) -> Vec<(String, String)> {
        self.styles.iter().map(|h| (h.id.clone(), h.caption.clone())).collect()
    }
}

/// Loads every `<name>.hair` with a `<name>.json` sidecar. Files without a
/// sidecar are skipped and reported; clashing ids are an error.
pub fn load_database(dir: &Path) -> Result<Database, AssetError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "hair"))
        .collect();
    paths.sort();
    let loaded: Vec<Result<Option<Hairstyle>, AssetError>> = paths
        .par_iter()
        .map(|path| {
            let side = path.with_extension("json");
            if !side.exists() {
                return Ok(None);
            }
            let text = fs::read_to_string(&side).map_err(io_err(&side))?;
            let meta: Sidecar = serde_json::from_str(&text)
                .map_err(|e| AssetError::Sidecar { path: side.clone(), message: e.to_string() })?;
            let mut h = read_hairstyle(path)?;
            h.id = meta.id;
            h.caption = meta.caption;
            let violations = validate_hairstyle(&h);
            if !violations.is_empty() {
                return Err(AssetError::InvalidHairstyle(format!("{}: {}", path.display(), violations[0])));
            }
            if let Some(w) = h.caption_warning() {
                log::warn!("{}: {w}", path.display());
            }
            Ok(Some(h))
        })
        .collect();
    let mut db = Database::default();
    let mut seen = std::collections::HashSet::new();
    for (path, result) in paths.into_iter().zip(loaded) {
        match result? {
            Some(h) => {
                if !seen.insert(h.id.clone()) {
                    return Err(AssetError::DuplicateId(h.id));
                }
                db.styles.push(h);
            }
            None => {
                log::warn!("{}: no caption sidecar, skipped", path.display());
                db.skipped.push((path, "missing sidecar".into()));
            }
        }
    }
    Ok(db)
}

/// Writes `<id>.hair` and `<id>.json` for each style.
pub fn write_database(dir: &Path, styles: &[Hairstyle]) -> Result<(), AssetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    styles.par_iter().try_for_each(|h| {
        write_hairstyle(h, &dir.join(format!("{}.hair", h.id)))?;
        let side = dir.join(format!("{}.json", h.id));
        let meta = Sidecar { id: h.id.clone(), caption: h.caption.clone() };
        let text = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
        fs::write(&side, text).map_err(io_err(&side))
    })
}

pub fn thumbnail_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(THUMBNAIL_DIR).join(format!("{id}.png"))
}

/// Frontal preview of a style over the head silhouette.
pub fn render_thumbnail(h: &Hairstyle, head: Option<&HeadMesh>) -> Result<Vec<u8>, AssetError> {
    let img = rasterize_strands(h, head, &Camera::frontal(THUMBNAIL_SIZE, THUMBNAIL_SIZE))
        .map_err(|e| AssetError::Thumbnail(e.to_string()))?;
    encode_png(&img).map_err(|e| AssetError::Thumbnail(e.to_string()))
}

pub fn write_thumbnails(dir: &Path, styles: &[Hairstyle], head: Option<&HeadMesh>) -> Result<(), AssetError> {
    let thumbs = dir.join(THUMBNAIL_DIR);
    fs::create_dir_all(&thumbs).map_err(io_err(&thumbs))?;
    styles.par_iter().try_for_each(|h| {
        let path = thumbnail_path(dir, &h.id);
        fs::write(&path, render_thumbnail(h, head)?).map_err(io_err(&path))
    })
}

pub fn encode_index(index: &EmbeddingIndex) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + index.matrix().len() * 4);
    let put_str = |out: &mut Vec<u8>, s: &str| {
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    };
    out.extend_from_slice(&INDEX_MAGIC);
    out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
    put_str(&mut out, index.provider_id());
    out.extend_from_slice(&(index.len() as u32).to_le_bytes());
    out.extend_from_slice(&(index.dim() as u32).to_le_bytes());
    for x in index.matrix() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for id in index.ids() {
        put_str(&mut out, id);
    }
    out
}

/// Parses an index, re-normalizing rows that drifted by at most 1e-4.
pub fn decode_index(bytes: &[u8]) -> Result<EmbeddingIndex, AssetError> {
    let mut c = Cursor::new(bytes);
    c.magic(INDEX_MAGIC)?;
    let version = c.u32()?;
    if version != INDEX_VERSION {
        return Err(AssetError::VersionUnsupported(version));
    }
    let provider = c.string()?;
    let n = c.u32()? as usize;
    let d = c.u32()? as usize;
    let floats = n.checked_mul(d).filter(|&f| f.saturating_mul(4) <= c.remaining());
    let floats = floats.ok_or(AssetError::TruncatedFile { strand: None })?;
    let mut matrix = Vec::with_capacity(floats);
    for _ in 0..floats {
        matrix.push(c.f32()?);
    }
    let mut ids = Vec::with_capacity(n.min(c.remaining() / 4));
    for _ in 0..n {
        ids.push(c.string()?);
    }
    if c.remaining() != 0 {
        return Err(AssetError::TrailingBytes);
    }
    if d > 0 {
        for (i, row) in matrix.chunks_exact_mut(d).enumerate() {
            let norm = row.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > crate::retrieval::UNIT_TOLERANCE {
                return Err(AssetError::CorruptIndex(format!("row {i} has norm {norm}")));
            }
            normalize(row);
        }
    }
    Ok(EmbeddingIndex::new(provider, d, ids, matrix)?)
}

pub fn save_index(index: &EmbeddingIndex, path: &Path) -> Result<(), AssetError> {
    fs::write(path, encode_index(index)).map_err(io_err(path))
}

pub fn load_index(path: &Path) -> Result<EmbeddingIndex, AssetError> {
    decode_index(&fs::read(path).map_err(io_err(path))?)
}
