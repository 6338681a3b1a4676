//! Persistent q-gram inverted index: the probe structure for literal joins.
//!
//! Strings are lowercased before gram extraction, so probing is
//! case-insensitive. Gram hashes are 64-bit polynomial hashes over bytes;
//! hash collisions only cost extra verification work in the join layer,
//! never correctness, because every candidate is re-checked with true edit
//! distance there.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::count_filter_bound;

const MAGIC: &[u8; 8] = b"QGIDX001";
const VERSION: u32 = 1;
const GRAM_HASH_SEED: u64 = 0x100_0000_01b3;

/// 64-bit polynomial hash of a gram's bytes (wrapping).
fn gram_hash(gram: &[char]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut buf = [0u8; 4];
    for &c in gram {
        for &b in c.encode_utf8(&mut buf).as_bytes() {
            h = h.wrapping_mul(GRAM_HASH_SEED).wrapping_add(u64::from(b));
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct IndexedAttr {
    /// Original string, as supplied.
    name: String,
    /// Char count of the lowercased form.
    len: usize,
    /// Strings shorter than q carry no grams and are probe-only.
    short: bool,
}

/// Result of probing the index with one string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProbeResult {
    /// Attributes whose shared-gram count met the count-filter threshold,
    /// with their counts. A superset of the true matches; callers trim it
    /// with an exact edit-distance check.
    Counted(Vec<(u32, usize)>),
    /// The probe's count threshold was non-positive, so gram counting cannot
    /// prune. These are all attributes within the edit budget by length;
    /// every one needs direct verification.
    NeedsVerification(Vec<u32>),
}

/// Inverted lists from gram hash to attribute occurrences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvertedIndex {
    gram_len: usize,
    attrs: Vec<IndexedAttr>,
    postings: HashMap<u64, Vec<(u32, u32)>>,
    /// Char length -> attribute ids; the fallback route for short probes.
    length_buckets: BTreeMap<usize, Vec<u32>>,
}

impl InvertedIndex {
    /// Indexes the given strings. Strings shorter than `q` chars get an
    /// empty gram set and are flagged as probe-only.
    pub fn build<I, S>(attrs: I, q: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if q == 0 {
            return Err(Error::parameter("gram length q must be >= 1"));
        }
        let mut index = InvertedIndex {
            gram_len: q,
            attrs: Vec::new(),
            postings: HashMap::new(),
            length_buckets: BTreeMap::new(),
        };
        for attr in attrs {
            index.push(attr.into());
        }
        for list in index.postings.values_mut() {
            list.sort_unstable();
        }
        Ok(index)
    }

    fn push(&mut self, name: String) {
        let id = self.attrs.len() as u32;
        let folded: Vec<char> = name.to_lowercase().chars().collect();
        let len = folded.len();
        let short = len < self.gram_len;
        if !short {
            let mut counts: HashMap<u64, u32> = HashMap::new();
            for w in folded.windows(self.gram_len) {
                *counts.entry(gram_hash(w)).or_insert(0) += 1;
            }
            for (h, c) in counts {
                self.postings.entry(h).or_default().push((id, c));
            }
        }
        self.length_buckets.entry(len).or_default().push(id);
        self.attrs.push(IndexedAttr { name, len, short });
    }

    pub fn gram_len(&self) -> usize {
        self.gram_len
    }

    pub fn attr_count(&self) -> usize {
        self.attrs.len()
    }

    pub fn posting_count(&self) -> usize {
        self.postings.len()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.attrs[id as usize].name
    }

    pub fn is_short(&self, id: u32) -> bool {
        self.attrs[id as usize].short
    }

    /// Count filtering: attributes sharing at least
    /// `|s| - q + 1 - max_edit * q` grams with `s` (multiset intersection).
    /// When that threshold is non-positive, falls back to the length buckets.
    pub fn probe(&self, s: &str, max_edit: u32) -> ProbeResult {
        let folded: Vec<char> = s.to_lowercase().chars().collect();
        let threshold =
            folded.len() as i64 - self.gram_len as i64 + 1 - max_edit as i64 * self.gram_len as i64;
        if threshold <= 0 {
            return ProbeResult::NeedsVerification(self.by_length(folded.len(), max_edit));
        }
        let mut probe_grams: HashMap<u64, u32> = HashMap::new();
        for w in folded.windows(self.gram_len) {
            *probe_grams.entry(gram_hash(w)).or_insert(0) += 1;
        }
        let mut shared: HashMap<u32, usize> = HashMap::new();
        for (h, probe_count) in &probe_grams {
            if let Some(list) = self.postings.get(h) {
                for &(id, attr_count) in list {
                    *shared.entry(id).or_insert(0) += (*probe_count).min(attr_count) as usize;
                }
            }
        }
        let mut out: Vec<(u32, usize)> = shared
            .into_iter()
            .filter(|&(_, count)| count as i64 >= threshold)
            .collect();
        out.sort_unstable();
        ProbeResult::Counted(out)
    }

    /// All attributes whose length differs from `len` by at most `max_edit`.
    fn by_length(&self, len: usize, max_edit: u32) -> Vec<u32> {
        let lo = len.saturating_sub(max_edit as usize);
        let hi = len + max_edit as usize;
        let mut out = Vec::new();
        for (_, ids) in self.length_buckets.range(lo..=hi) {
            out.extend_from_slice(ids);
        }
        out.sort_unstable();
        out
    }

    /// Count-filter lower bound for a probe of `probe_len` chars against an
    /// indexed attribute of `attr_len` chars.
    pub fn pair_bound(&self, probe_len: usize, attr_len: usize, max_edit: u32) -> i64 {
        count_filter_bound(probe_len, attr_len, self.gram_len, max_edit)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Header (q, counts) + attribute table + postings sorted by gram hash.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.gram_len as u32).to_le_bytes())?;
        w.write_all(&(self.attrs.len() as u32).to_le_bytes())?;
        w.write_all(&(self.postings.len() as u64).to_le_bytes())?;
        for attr in &self.attrs {
            w.write_all(&(attr.name.len() as u32).to_le_bytes())?;
            w.write_all(attr.name.as_bytes())?;
        }
        let mut hashes: Vec<&u64> = self.postings.keys().collect();
        hashes.sort_unstable();
        for h in hashes {
            let list = &self.postings[h];
            w.write_all(&h.to_le_bytes())?;
            w.write_all(&(list.len() as u32).to_le_bytes())?;
            for &(id, count) in list {
                w.write_all(&id.to_le_bytes())?;
                w.write_all(&count.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::corrupt("file too short"))?;
        if &magic != MAGIC {
            return Err(Error::corrupt("bad magic bytes"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::corrupt(format!("unsupported index version {version}")));
        }
        let q = read_u32(&mut r)? as usize;
        let attr_count = read_u32(&mut r)? as usize;
        let posting_count = read_u64(&mut r)? as usize;
        let mut names = Vec::with_capacity(attr_count);
        for _ in 0..attr_count {
            let len = read_u32(&mut r)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(|_| Error::corrupt("truncated attr table"))?;
            names.push(
                String::from_utf8(buf).map_err(|_| Error::corrupt("attr name is not UTF-8"))?,
            );
        }
        // Rebuild length buckets and short flags; load postings verbatim.
        let mut index = InvertedIndex {
            gram_len: q,
            attrs: Vec::with_capacity(attr_count),
            postings: HashMap::with_capacity(posting_count),
            length_buckets: BTreeMap::new(),
        };
        for (i, name) in names.into_iter().enumerate() {
            let len = name.to_lowercase().chars().count();
            index.length_buckets.entry(len).or_default().push(i as u32);
            index.attrs.push(IndexedAttr { name, len, short: len < q });
        }
        for _ in 0..posting_count {
            let h = read_u64(&mut r)?;
            let n = read_u32(&mut r)? as usize;
            let mut list = Vec::with_capacity(n);
            for _ in 0..n {
                let id = read_u32(&mut r)?;
                let count = read_u32(&mut r)?;
                if id as usize >= attr_count {
                    return Err(Error::corrupt("posting references unknown attribute"));
                }
                list.push((id, count));
            }
            index.postings.insert(h, list);
        }
        Ok(index)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| Error::corrupt("truncated file"))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| Error::corrupt("truncated file"))?;
    Ok(u64::from_le_bytes(b))
}
