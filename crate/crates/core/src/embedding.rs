//! Dense document vectors: the binary matrix format, alignment with the
//! corpus, a hashing fallback embedder, cosine similarity and exact kNN.
//!
//! Binary layout (little-endian): `b"EMB1"`, `u32 n`, `u32 d`, `u32 0`
//! (reserved), then `n * d` `f32` values in row-major order. Rows are named
//! by a companion jsonl index of `{"uid": .., "row": ..}` objects.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{TokenizedDocument, Vocabulary};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const HEADER_LEN: usize = 16;

/// Row-major `f32` matrix, written and read in the binary layout above.
/// Also used for reduced embeddings and factor dumps.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f32>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Format(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, values })
    }

    pub fn from_f64_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Format("ragged rows".into()));
        }
        let values = rows.iter().flatten().map(|&v| v as f32).collect();
        DenseMatrix::new(rows.len(), cols, values)
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format("bad magic, expected EMB1".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let (rows, cols) = (word(4), word(8));
        let body = &bytes[HEADER_LEN..];
        let expected = rows
            .checked_mul(cols)
            .and_then(|c| c.checked_mul(4))
            .ok_or_else(|| Error::Format("header dimensions overflow".into()))?;
        if body.len() != expected {
            return Err(Error::Format(format!(
                "header declares {rows}x{cols} ({expected} bytes) but body holds {} bytes",
                body.len()
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        DenseMatrix::new(rows, cols, values)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        DenseMatrix::from_bytes(&bytes)
    }

    /// Hex SHA-256 over the little-endian value bytes (header excluded).
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for v in &self.values {
            h.update(v.to_le_bytes());
        }
        format!("{:x}", h.finalize())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexEntry {
    uid: String,
    row: usize,
}

/// Document vectors keyed by uid.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    matrix: DenseMatrix,
    uids: Vec<String>,
    uid_index: HashMap<String, usize>,
    /// Rows produced by a fallback path rather than from content.
    fallback: Vec<bool>,
}

impl EmbeddingMatrix {
    pub fn new(matrix: DenseMatrix, uids: Vec<String>) -> Result<Self> {
        if uids.len() != matrix.rows {
            return Err(Error::Format(format!(
                "{} uids for {} rows",
                uids.len(),
                matrix.rows
            )));
        }
        if let Some(pos) = matrix.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "non-finite value at row {}",
                pos / matrix.cols.max(1)
            )));
        }
        let mut uid_index = HashMap::with_capacity(uids.len());
        for (row, uid) in uids.iter().enumerate() {
            if uid_index.insert(uid.clone(), row).is_some() {
                return Err(Error::DuplicateUid(uid.clone()));
            }
        }
        let fallback = vec![false; uids.len()];
        Ok(EmbeddingMatrix {
            matrix,
            uids,
            uid_index,
            fallback,
        })
    }

    pub fn from_rows(uids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        EmbeddingMatrix::new(DenseMatrix::from_f64_rows(rows)?, uids)
    }

    pub fn n(&self) -> usize {
        self.matrix.rows
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        self.matrix.row(i)
    }

    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| v as f64).collect()
    }

    pub fn uids(&self) -> &[String] {
        &self.uids
    }

    pub fn row_of(&self, uid: &str) -> Option<usize> {
        self.uid_index.get(uid).copied()
    }

    pub fn is_fallback(&self, i: usize) -> bool {
        self.fallback[i]
    }

    pub fn fallback_count(&self) -> usize {
        self.fallback.iter().filter(|&&f| f).count()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// Reorders rows to follow `uids`. Fails listing every uid without a
    /// row; rows whose uid is not requested are dropped.
    pub fn align(&self, uids: &[&str]) -> Result<EmbeddingMatrix> {
        let missing: Vec<String> = uids
            .iter()
            .filter(|u| !self.uid_index.contains_key(**u))
            .map(|u| u.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Alignment { missing });
        }
        let dropped = self.n() - uids.len().min(self.n());
        if dropped > 0 {
            log::warn!("dropping {dropped} embedding row(s) whose uid is not in the corpus");
        }
        let d = self.dim();
        let mut values = Vec::with_capacity(uids.len() * d);
        let mut fallback = Vec::with_capacity(uids.len());
        for u in uids {
            let r = self.uid_index[*u];
            values.extend_from_slice(self.row(r));
            fallback.push(self.fallback[r]);
        }
        let mut out = EmbeddingMatrix::new(
            DenseMatrix::new(uids.len(), d, values)?,
            uids.iter().map(|u| u.to_string()).collect(),
        )?;
        out.fallback = fallback;
        Ok(out)
    }

    pub fn write(&self, vectors_path: &Path, index_path: &Path) -> Result<()> {
        self.matrix.write(vectors_path)?;
        let file = fs::File::create(index_path).map_err(|e| Error::io(index_path, e))?;
        let mut w = BufWriter::new(file);
        for (row, uid) in self.uids.iter().enumerate() {
            let line = serde_json::to_string(&IndexEntry {
                uid: uid.clone(),
                row,
            })
            .expect("index entry serializes");
            writeln!(w, "{line}").map_err(|e| Error::io(index_path, e))?;
        }
        w.flush().map_err(|e| Error::io(index_path, e))
    }
}

/// Reads the binary vectors and their uid index.
pub fn load_embeddings(vectors_path: &Path, index_path: &Path) -> Result<EmbeddingMatrix> {
    let matrix = DenseMatrix::read(vectors_path)?;
    let text = fs::read_to_string(index_path).map_err(|e| Error::io(index_path, e))?;
    let mut by_row: BTreeMap<usize, String> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: IndexEntry =
            serde_json::from_str(line).map_err(|e| Error::parse(index_path, i + 1, e))?;
        if entry.row >= matrix.rows {
            return Err(Error::parse(
                index_path,
                i + 1,
                format!("row {} out of range for {} rows", entry.row, matrix.rows),
            ));
        }
        if by_row.insert(entry.row, entry.uid).is_some() {
            return Err(Error::parse(index_path, i + 1, "row listed twice"));
        }
    }
    if by_row.len() != matrix.rows {
        return Err(Error::Format(format!(
            "index names {} of {} rows",
            by_row.len(),
            matrix.rows
        )));
    }
    EmbeddingMatrix::new(matrix, by_row.into_values().collect())
}

#[derive(Deserialize)]
struct VectorRecord {
    uid: String,
    vector: Vec<f32>,
}

/// Converts jsonl `{uid, vector}` records into the binary format plus index.
pub fn convert_jsonl(input: &Path, vectors_path: &Path, index_path: &Path) -> Result<usize> {
    let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let mut uids = Vec::new();
    let mut values = Vec::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: VectorRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(input, i + 1, e))?;
        match dim {
            None => dim = Some(rec.vector.len()),
            Some(d) if d != rec.vector.len() => {
                return Err(Error::parse(
                    input,
                    i + 1,
                    format!("vector has {} values, expected {d}", rec.vector.len()),
                ))
            }
            _ => {}
        }
        uids.push(rec.uid);
        values.extend(rec.vector);
    }
    let n = uids.len();
    let matrix = DenseMatrix::new(n, dim.unwrap_or(0), values)?;
    EmbeddingMatrix::new(matrix, uids)?.write(vectors_path, index_path)?;
    Ok(n)
}

/// 64-bit FNV-1a over `bytes`, keyed by `seed`, finished with a splitmix
/// avalanche.
pub(crate) fn seeded_hash(seed: u64, bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(h)
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Signed feature hashing of TF-IDF weights (`tf * ln(N / df)` over the
/// retained documents), L2-normalized. Documents with no weighted term get a
/// uid-and-seed derived unit vector and are flagged.
pub fn hash_embed(
    docs: &[TokenizedDocument],
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    if dim < 8 {
        return Err(Error::Parameter(format!("hash embedding dimension {dim} < 8")));
    }
    let n_docs = vocab.n_docs().max(1) as f64;
    let slots: Vec<(usize, f64)> = vocab
        .terms()
        .iter()
        .map(|t| {
            let h = seeded_hash(seed, t.as_bytes());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            ((h % dim as u64) as usize, sign)
        })
        .collect();
    let rows: Vec<(Vec<f64>, bool)> = docs
        .par_iter()
        .map(|doc| {
            let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
            for id in vocab.encode(&doc.tokens) {
                *tf.entry(id).or_insert(0.0) += 1.0;
            }
            let mut v = vec![0.0f64; dim];
            for (id, count) in tf {
                let idf = (n_docs / vocab.doc_freq(id).max(1) as f64).ln();
                let (slot, sign) = slots[id];
                v[slot] += sign * count * idf;
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
                (v, false)
            } else {
                (fallback_vector(&doc.uid, dim, seed), true)
            }
        })
        .collect();
    let uids = docs.iter().map(|d| d.uid.clone()).collect();
    let (vectors, flags): (Vec<Vec<f64>>, Vec<bool>) = rows.into_iter().unzip();
    let mut m = EmbeddingMatrix::from_rows(uids, &vectors)?;
    m.fallback = flags;
    if m.fallback_count() > 0 {
        log::warn!(
            "{} document(s) had no weighted terms and got fallback vectors",
            m.fallback_count()
        );
    }
    Ok(m)
}

fn fallback_vector(uid: &str, dim: usize, seed: u64) -> Vec<f64> {
    let base = seeded_hash(seed ^ 0x5eed_fa11_bac4, uid.as_bytes());
    let mut v: Vec<f64> = (0..dim as u64)
        .map(|i| (splitmix(base ^ i) >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

pub fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum()
}

pub fn norm(u: &[f32]) -> f64 {
    dot(u, u).sqrt()
}

pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Domain(format!(
            "dimension mismatch {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Domain("cosine of a zero vector".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

pub fn cosine_f64(u: &[f64], v: &[f64]) -> Result<f64> {
    let d: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Domain("cosine of a zero vector".into()));
    }
    Ok((d / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

/// Per-row neighbors sorted by ascending distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub k: usize,
    pub indices: Vec<Vec<usize>>,
    pub distances: Vec<Vec<f64>>,
}

impl NeighborList {
    pub fn n(&self) -> usize {
        self.indices.len()
    }
}

/// Exact brute-force kNN over any row source. Ties go to the lower row id.
pub fn knn_rows<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    k: usize,
    metric: Metric,
) -> Result<NeighborList> {
    let n = rows.len();
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!(
            "k must satisfy 0 < k < n, got k={k}, n={n}"
        )));
    }
    let norms: Vec<f64> = rows
        .iter()
        .map(|r| r.as_ref().iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    if metric == Metric::Cosine {
        if let Some(i) = norms.iter().position(|&x| x == 0.0) {
            return Err(Error::Domain(format!("row {i} is a zero vector")));
        }
    }
    let dist = |i: usize, j: usize| -> f64 {
        let (a, b) = (rows[i].as_ref(), rows[j].as_ref());
        match metric {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Cosine => {
                let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                (1.0 - d / (norms[i] * norms[j])).max(0.0)
            }
        }
    };
    let per_row: Vec<(Vec<usize>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> =
                (0..n).filter(|&j| j != i).map(|j| (dist(i, j), j)).collect();
            cand.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(k);
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.into_iter().map(|(d, j)| (j, d)).unzip()
        })
        .collect();
    let (indices, distances) = per_row.into_iter().unzip();
    Ok(NeighborList {
        k,
        indices,
        distances,
    })
}

pub fn knn(matrix: &EmbeddingMatrix, k: usize, metric: Metric) -> Result<NeighborList> {
    let rows: Vec<Vec<f64>> = (0..matrix.n()).map(|i| matrix.row_f64(i)).collect();
    knn_rows(&rows, k, metric)
}

/// uids whose row came from the fallback path.
pub fn fallback_uids(m: &EmbeddingMatrix) -> HashSet<String> {
    (0..m.n())
        .filter(|&i| m.is_fallback(i))
        .map(|i| m.uids()[i].clone())
        .collect()
}
