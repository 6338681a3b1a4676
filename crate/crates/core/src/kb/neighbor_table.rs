//! On-disk neighbor tables: for a hop count `k`, every concept maps to the
//! set of concepts at undirected shortest distance exactly `k`.
//!
//! # File layout (version 1, all integers little-endian)
//!
//! ```text
//! offset  size           field
//! 0       8              magic  b"NBRTBL01"
//! 8       4              format version (= 1)
//! 12      4              k (hop count, power of two)
//! 16      8              hash seed
//! 24      8              bucket_length (slots per bucket)
//! 32      4              bucket_count
//! 36      8              entry_count
//! 44      16 * buckets   directory: (base_offset u64, region_len u64) per bucket
//! ...     ...            bucket regions, in directory order
//! ```
//!
//! Each bucket region starts at its directory `base_offset` and holds a slot
//! table of `bucket_length` u64 chain heads followed by the record area.
//! A concept's slot is `fold_mod(name) % bucket_length`; names colliding on a
//! slot are chained through the record area of the same bucket. A record is
//!
//! ```text
//! next u64 | name_len u32 | name | neighbor_count u32 | (len u32 | bytes)*
//! ```
//!
//! where `next` is the bucket-relative offset of the next record in the
//! chain (0 terminates; 0 is never a valid record offset because the slot
//! table precedes the record area). Concepts are assigned to buckets by the
//! high part of the same polynomial hash, so the bucket id and in-bucket
//! offset together form one hash number. Records are laid out in sorted name
//! order, which makes persist -> load -> persist byte-identical.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use super::bucket::fold_mod;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"NBRTBL01";
const VERSION: u32 = 1;
const HEADER_LEN: u64 = 44;

/// Exact-distance neighbor map for one power-of-two hop count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborTable {
    k: u32,
    seed: u64,
    bucket_length: u64,
    bucket_count: u32,
    entries: BTreeMap<String, Vec<String>>,
    base_offsets: BTreeMap<u32, u64>,
}

impl NeighborTable {
    /// Builds a table from raw entries. Neighbor lists are sorted and
    /// deduplicated; concepts with no neighbors at this distance are dropped.
    pub fn new(
        k: u32,
        seed: u64,
        bucket_length: u64,
        entries: BTreeMap<String, Vec<String>>,
    ) -> Result<Self> {
        if k == 0 || !k.is_power_of_two() {
            return Err(Error::parameter(format!(
                "hop count {k} is not a power of two"
            )));
        }
        if bucket_length == 0 {
            return Err(Error::parameter("bucket_length must be positive"));
        }
        let mut entries: BTreeMap<String, Vec<String>> = entries
            .into_iter()
            .filter(|(_, v)| !v.is_empty())
            .collect();
        for list in entries.values_mut() {
            list.sort();
            list.dedup();
        }
        let bucket_count =
            ((entries.len() as u64).div_ceil(bucket_length)).max(1) as u32;
        let mut table = NeighborTable {
            k,
            seed,
            bucket_length,
            bucket_count,
            entries,
            base_offsets: BTreeMap::new(),
        };
        table.base_offsets = table.layout().into_iter().map(|(b, off, _)| (b, off)).collect();
        Ok(table)
    }

    pub fn hop_count(&self) -> u32 {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bucket_length(&self) -> u64 {
        self.bucket_length
    }

    pub fn bucket_count(&self) -> u32 {
        self.bucket_count
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    /// File offset where each bucket's region begins.
    pub fn base_offsets(&self) -> &BTreeMap<u32, u64> {
        &self.base_offsets
    }

    /// Neighbors at distance exactly `k`, or `None` when the set is empty.
    pub fn get(&self, name: &str) -> Option<&[String]> {
        self.entries.get(name).map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &[String])> {
        self.entries.iter().map(|(n, v)| (n, v.as_slice()))
    }

    /// (bucket id, slot) a name hashes to under this table's geometry.
    pub fn placement(&self, name: &str) -> (u32, u64) {
        let modulus = u64::from(self.bucket_count) * self.bucket_length;
        let h = fold_mod(name, self.seed, modulus);
        ((h / self.bucket_length) as u32, h % self.bucket_length)
    }

    /// Buckets with their base offset and region length, in file order.
    fn layout(&self) -> Vec<(u32, u64, u64)> {
        let mut region_len = vec![self.bucket_length * 8; self.bucket_count as usize];
        for (name, nbrs) in &self.entries {
            let (bucket, _) = self.placement(name);
            region_len[bucket as usize] += record_len(name, nbrs);
        }
        let mut out = Vec::with_capacity(self.bucket_count as usize);
        let mut offset = HEADER_LEN + 16 * u64::from(self.bucket_count);
        for (b, len) in region_len.into_iter().enumerate() {
            out.push((b as u32, offset, len));
            offset += len;
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let layout = self.layout();
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.k.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.bucket_length.to_le_bytes())?;
        w.write_all(&self.bucket_count.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for &(_, off, len) in &layout {
            w.write_all(&off.to_le_bytes())?;
            w.write_all(&len.to_le_bytes())?;
        }
        // Group entries per bucket, preserving sorted name order.
        let mut per_bucket: Vec<Vec<(&String, &Vec<String>)>> =
            vec![Vec::new(); self.bucket_count as usize];
        for (name, nbrs) in &self.entries {
            let (bucket, _) = self.placement(name);
            per_bucket[bucket as usize].push((name, nbrs));
        }
        for (b, records) in per_bucket.iter().enumerate() {
            let region = self.encode_bucket(records);
            debug_assert_eq!(region.len() as u64, layout[b].2);
            w.write_all(&region)?;
        }
        Ok(())
    }

    /// Encodes one bucket: slot table plus chained records.
    fn encode_bucket(&self, records: &[(&String, &Vec<String>)]) -> Vec<u8> {
        let slots_len = self.bucket_length * 8;
        // Record offsets, in sorted name order.
        let mut offsets = Vec::with_capacity(records.len());
        let mut pos = slots_len;
        for (name, nbrs) in records {
            offsets.push(pos);
            pos += record_len(name, nbrs);
        }
        // Chain per slot.
        let mut heads = vec![0u64; self.bucket_length as usize];
        let mut next = vec![0u64; records.len()];
        let mut last_in_slot: BTreeMap<u64, usize> = BTreeMap::new();
        for (i, (name, _)) in records.iter().enumerate() {
            let (_, slot) = self.placement(name);
            match last_in_slot.get(&slot) {
                None => heads[slot as usize] = offsets[i],
                Some(&prev) => next[prev] = offsets[i],
            }
            last_in_slot.insert(slot, i);
        }
        let mut buf = Vec::with_capacity(pos as usize);
        for head in heads {
            buf.extend_from_slice(&head.to_le_bytes());
        }
        for (i, (name, nbrs)) in records.iter().enumerate() {
            buf.extend_from_slice(&next[i].to_le_bytes());
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(nbrs.len() as u32).to_le_bytes());
            for nb in nbrs.iter() {
                buf.extend_from_slice(&(nb.len() as u32).to_le_bytes());
                buf.extend_from_slice(nb.as_bytes());
            }
        }
        buf
    }

    /// Loads a full table into memory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path)?;
        let mut r = BufReader::new(file);
        let header = Header::read(&mut r)?;
        let mut entries = BTreeMap::new();
        for &(base, len) in &header.directory {
            let slots_len = header.bucket_length * 8;
            if len < slots_len {
                return Err(Error::corrupt("bucket region shorter than its slot table"));
            }
            r.seek(SeekFrom::Start(base + slots_len))?;
            let mut remaining = len - slots_len;
            while remaining > 0 {
                let (name, nbrs, consumed) = read_record(&mut r)?;
                if consumed > remaining {
                    return Err(Error::corrupt("record overruns its bucket region"));
                }
                remaining -= consumed;
                entries.insert(name, nbrs);
            }
        }
        if entries.len() as u64 != header.entry_count {
            return Err(Error::corrupt(format!(
                "entry count mismatch: header says {}, found {}",
                header.entry_count,
                entries.len()
            )));
        }
        let table = NeighborTable {
            k: header.k,
            seed: header.seed,
            bucket_length: header.bucket_length,
            bucket_count: header.bucket_count,
            entries,
            base_offsets: header
                .directory
                .iter()
                .enumerate()
                .map(|(b, &(off, _))| (b as u32, off))
                .collect(),
        };
        Ok(table)
    }
}

fn record_len(name: &str, nbrs: &[String]) -> u64 {
    8 + 4
        + name.len() as u64
        + 4
        + nbrs.iter().map(|n| 4 + n.len() as u64).sum::<u64>()
}

struct Header {
    k: u32,
    seed: u64,
    bucket_length: u64,
    bucket_count: u32,
    entry_count: u64,
    directory: Vec<(u64, u64)>,
}

impl Header {
    fn read(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| Error::corrupt("file too short for header"))?;
        if &magic != MAGIC {
            return Err(Error::corrupt("bad magic bytes"));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::corrupt(format!("unsupported format version {version}")));
        }
        let k = read_u32(r)?;
        let seed = read_u64(r)?;
        let bucket_length = read_u64(r)?;
        let bucket_count = read_u32(r)?;
        let entry_count = read_u64(r)?;
        if bucket_length == 0 || bucket_count == 0 {
            return Err(Error::corrupt("zero bucket geometry"));
        }
        let mut directory = Vec::with_capacity(bucket_count as usize);
        for _ in 0..bucket_count {
            let off = read_u64(r)?;
            let len = read_u64(r)?;
            directory.push((off, len));
        }
        Ok(Header { k, seed, bucket_length, bucket_count, entry_count, directory })
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

fn read_string(r: &mut impl Read, len: usize) -> Result<String> {
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(|_| Error::corrupt("truncated file"))?;
    String::from_utf8(buf).map_err(|_| Error::corrupt("record name is not UTF-8"))
}

/// Reads one record at the current position; returns (name, neighbors, bytes consumed).
fn read_record(r: &mut impl Read) -> Result<(String, Vec<String>, u64)> {
    let _next = read_u64(r)?;
    let name_len = read_u32(r)? as usize;
    let name = read_string(r, name_len)?;
    let count = read_u32(r)? as usize;
    let mut nbrs = Vec::with_capacity(count);
    let mut consumed = 8 + 4 + name_len as u64 + 4;
    for _ in 0..count {
        let len = read_u32(r)? as usize;
        nbrs.push(read_string(r, len)?);
        consumed += 4 + len as u64;
    }
    Ok((name, nbrs, consumed))
}

/// Point-lookup reader that seeks the bucket file instead of loading it.
pub struct NeighborTableReader {
    file: File,
    header: Header,
}

impl NeighborTableReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let mut file = File::open(path)?;
        let header = Header::read(&mut file)?;
        Ok(NeighborTableReader { file, header })
    }

    pub fn hop_count(&self) -> u32 {
        self.header.k
    }

    /// Follows the slot chain for `name`, touching only its bucket.
    pub fn lookup(&mut self, name: &str) -> Result<Option<Vec<String>>> {
        let modulus = u64::from(self.header.bucket_count) * self.header.bucket_length;
        let h = fold_mod(name, self.header.seed, modulus);
        let bucket = (h / self.header.bucket_length) as usize;
        let slot = h % self.header.bucket_length;
        let (base, _) = self.header.directory[bucket];
        self.file.seek(SeekFrom::Start(base + slot * 8))?;
        let mut head = read_u64(&mut self.file)?;
        while head != 0 {
            self.file.seek(SeekFrom::Start(base + head))?;
            let next = read_u64(&mut self.file)?;
            let name_len = read_u32(&mut self.file)? as usize;
            let found = read_string(&mut self.file, name_len)?;
            if found == name {
                let count = read_u32(&mut self.file)? as usize;
                let mut nbrs = Vec::with_capacity(count);
                for _ in 0..count {
                    let len = read_u32(&mut self.file)? as usize;
                    nbrs.push(read_string(&mut self.file, len)?);
                }
                return Ok(Some(nbrs));
            }
            head = next;
        }
        Ok(None)
    }
}
