//! Immutable n-gram frequency index with exact and one-wildcard lookup.
//!
//! Input files follow the Web 1T layout: tokens joined by a single space, one
//! TAB, a decimal count, newline. Every position-masked view is precomputed
//! at build time so relaxed queries are a single hash lookup.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::UNIX_EPOCH;

use log::{debug, warn};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Count = u64;
type Sym = u32;

#[derive(Debug, Clone, Default)]
struct Vocab {
    ids: HashMap<String, Sym>,
    words: Vec<String>,
}

impl Vocab {
    fn intern(&mut self, word: &str) -> Sym {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len() as Sym;
        self.words.push(word.to_string());
        self.ids.insert(word.to_string(), id);
        id
    }

    fn get(&self, word: &str) -> Option<Sym> {
        self.ids.get(word).copied()
    }
}

/// Aggregate for one masked key: the summed count plus the per-filler counts
/// that make it up.
#[derive(Debug, Clone, Default)]
struct MaskedEntry {
    total: Count,
    fillers: Vec<(Sym, Count)>,
}

#[derive(Debug, Clone)]
pub struct NgramIndex {
    order: usize,
    vocab: Vocab,
    exact: HashMap<Box<[Sym]>, Count>,
    /// `masked[p]` maps a gram with position `p` removed to its aggregate.
    masked: Vec<HashMap<Box<[Sym]>, MaskedEntry>>,
}

#[derive(Debug, Clone)]
pub struct NgramIndexBuilder {
    order: usize,
    vocab: Vocab,
    counts: HashMap<Box<[Sym]>, Count>,
}

impl NgramIndexBuilder {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Usage("n-gram order must be at least 1".into()));
        }
        Ok(NgramIndexBuilder {
            order,
            vocab: Vocab::default(),
            counts: HashMap::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Add `count` occurrences of `gram`. Repeated grams sum.
    pub fn add<S: AsRef<str>>(&mut self, gram: &[S], count: Count) -> Result<()> {
        if gram.len() != self.order {
            return Err(Error::Usage(format!(
                "expected {}-gram, got {} tokens",
                self.order,
                gram.len()
            )));
        }
        let key: Box<[Sym]> = gram.iter().map(|t| self.vocab.intern(t.as_ref())).collect();
        let slot = self.counts.entry(key).or_insert(0);
        *slot = slot
            .checked_add(count)
            .ok_or_else(|| Error::Overflow(format!("count for {:?}", joined(gram))))?;
        Ok(())
    }

    /// Ingest one Web 1T formatted file.
    pub fn add_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut line = String::new();
        let mut line_no = 0;
        loop {
            line.clear();
            let read = reader.read_line(&mut line).map_err(|e| match e.kind() {
                std::io::ErrorKind::InvalidData => Error::Parse {
                    file: path.to_path_buf(),
                    line: line_no + 1,
                    message: "invalid UTF-8".into(),
                },
                _ => Error::io(path, e),
            })?;
            if read == 0 {
                break;
            }
            line_no += 1;
            let record = line.strip_suffix('\n').unwrap_or(&line);
            if record.is_empty() {
                continue;
            }
            self.add_record(path, line_no, record)?;
        }
        Ok(())
    }

    fn add_record(&mut self, path: &Path, line_no: usize, record: &str) -> Result<()> {
        let parse_err = |message: String| Error::Parse {
            file: path.to_path_buf(),
            line: line_no,
            message,
        };
        let (gram, count) = record
            .split_once('\t')
            .ok_or_else(|| parse_err("missing TAB before count".into()))?;
        if count.is_empty() || !count.bytes().all(|b| b.is_ascii_digit()) {
            return Err(parse_err(format!("invalid count {count:?}")));
        }
        let count: Count = count
            .parse()
            .map_err(|_| parse_err(format!("count {count:?} does not fit in 64 bits")))?;
        let tokens: Vec<&str> = gram.split(' ').collect();
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(parse_err("empty token (tokens must be separated by one space)".into()));
        }
        if tokens.len() != self.order {
            return Err(Error::Schema {
                file: path.to_path_buf(),
                line: line_no,
                expected: self.order,
                found: tokens.len(),
            });
        }
        self.add(&tokens, count)
    }

    pub fn build(self) -> Result<NgramIndex> {
        let mut masked: Vec<HashMap<Box<[Sym]>, MaskedEntry>> =
            (0..self.order).map(|_| HashMap::new()).collect();
        for (gram, &count) in &self.counts {
            for (p, view) in masked.iter_mut().enumerate() {
                let entry = view.entry(mask_key(gram, p)).or_default();
                entry.total = entry.total.checked_add(count).ok_or_else(|| {
                    Error::Overflow(format!("masked total at position {p}"))
                })?;
                entry.fillers.push((gram[p], count));
            }
        }
        for view in &mut masked {
            for entry in view.values_mut() {
                entry.fillers.sort_unstable();
            }
        }
        Ok(NgramIndex {
            order: self.order,
            vocab: self.vocab,
            exact: self.counts,
            masked,
        })
    }
}

fn mask_key(gram: &[Sym], position: usize) -> Box<[Sym]> {
    gram.iter()
        .enumerate()
        .filter(|&(i, _)| i != position)
        .map(|(_, &s)| s)
        .collect()
}

fn joined<S: AsRef<str>>(gram: &[S]) -> String {
    gram.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ")
}

impl NgramIndex {
    /// Build from in-memory records; mostly useful for fixtures.
    pub fn from_records<I, G, S>(order: usize, records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (G, Count)>,
        G: AsRef<[S]>,
        S: AsRef<str>,
    {
        let mut builder = NgramIndexBuilder::new(order)?;
        for (gram, count) in records {
            builder.add(gram.as_ref(), count)?;
        }
        builder.build()
    }

    pub fn from_files<P: AsRef<Path>>(paths: &[P], order: usize) -> Result<Self> {
        let mut builder = NgramIndexBuilder::new(order)?;
        for path in paths {
            builder.add_file(path)?;
        }
        builder.build()
    }

    /// Count every contiguous n-gram of each token sequence.
    pub fn from_token_streams<'a, I>(order: usize, streams: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut builder = NgramIndexBuilder::new(order)?;
        for stream in streams {
            for window in stream.windows(order) {
                builder.add(window, 1)?;
            }
        }
        builder.build()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.words.len()
    }

    /// Number of distinct n-grams.
    pub fn len(&self) -> usize {
        self.exact.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exact.is_empty()
    }

    fn check_arity<S>(&self, gram: &[S]) -> Result<()> {
        if gram.len() != self.order {
            return Err(Error::Usage(format!(
                "query has {} tokens but the index holds {}-grams",
                gram.len(),
                self.order
            )));
        }
        Ok(())
    }

    /// Exact frequency; 0 for unseen grams.
    pub fn freq<S: AsRef<str>>(&self, gram: &[S]) -> Result<Count> {
        self.check_arity(gram)?;
        let mut key = Vec::with_capacity(self.order);
        for t in gram {
            match self.vocab.get(t.as_ref()) {
                Some(id) => key.push(id),
                None => return Ok(0),
            }
        }
        Ok(self.exact.get(key.as_slice()).copied().unwrap_or(0))
    }

    /// Sum of frequencies over all grams equal to `gram` except at
    /// `wild_position`, where any token (the original included) matches.
    pub fn relaxed_freq<S: AsRef<str>>(&self, gram: &[S], wild_position: usize) -> Result<Count> {
        Ok(self.masked_entry(gram, wild_position)?.map_or(0, |e| e.total))
    }

    /// The individual grams behind a relaxed count, as (filler, count) pairs.
    pub fn fillers<S: AsRef<str>>(
        &self,
        gram: &[S],
        wild_position: usize,
    ) -> Result<Vec<(&str, Count)>> {
        let entry = self.masked_entry(gram, wild_position)?;
        Ok(entry
            .map(|e| {
                e.fillers
                    .iter()
                    .map(|&(s, c)| (self.vocab.words[s as usize].as_str(), c))
                    .collect()
            })
            .unwrap_or_default())
    }

    fn masked_entry<S: AsRef<str>>(
        &self,
        gram: &[S],
        wild_position: usize,
    ) -> Result<Option<&MaskedEntry>> {
        self.check_arity(gram)?;
        if wild_position >= self.order {
            return Err(Error::Usage(format!(
                "wildcard position {wild_position} out of range for order {}",
                self.order
            )));
        }
        let mut key = Vec::with_capacity(self.order - 1);
        for (i, t) in gram.iter().enumerate() {
            if i == wild_position {
                continue;
            }
            match self.vocab.get(t.as_ref()) {
                Some(id) => key.push(id),
                None => return Ok(None),
            }
        }
        Ok(self.masked[wild_position].get(key.as_slice()))
    }

    /// All stored grams with their counts, in unspecified order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<&str>, Count)> + '_ {
        self.exact.iter().map(|(k, &c)| {
            (
                k.iter().map(|&s| self.vocab.words[s as usize].as_str()).collect(),
                c,
            )
        })
    }

    /// Unigram terms with their counts (order-1 indexes only).
    pub fn unigram_terms(&self) -> Result<Vec<(&str, Count)>> {
        if self.order != 1 {
            return Err(Error::Usage(format!(
                "unigram terms requested from a {}-gram index",
                self.order
            )));
        }
        let mut terms: Vec<(&str, Count)> = self.iter().map(|(g, c)| (g[0], c)).collect();
        terms.sort_unstable();
        Ok(terms)
    }

    /// Recompute every masked aggregate from the exact table and compare.
    pub fn audit(&self) -> Result<()> {
        for (p, view) in self.masked.iter().enumerate() {
            let mut expected: HashMap<Box<[Sym]>, Count> = HashMap::new();
            for (gram, &count) in &self.exact {
                *expected.entry(mask_key(gram, p)).or_default() += count;
            }
            if expected.len() != view.len() {
                return Err(Error::Model(format!(
                    "masked view {p} has {} keys, expected {}",
                    view.len(),
                    expected.len()
                )));
            }
            for (key, entry) in view {
                let filler_sum: Count = entry.fillers.iter().map(|&(_, c)| c).sum();
                if expected.get(key) != Some(&entry.total) || filler_sum != entry.total {
                    return Err(Error::Model(format!("masked view {p} total mismatch")));
                }
            }
        }
        Ok(())
    }
}

const CACHE_MAGIC: &[u8; 8] = b"OCRPNGX\0";
const CACHE_VERSION: u32 = 1;

/// Fingerprint of the source files (path, size, mtime) and requested order.
fn source_fingerprint<P: AsRef<Path>>(paths: &[P], order: usize) -> Result<[u8; 32]> {
    let mut hasher = Sha256::new();
    hasher.update((order as u64).to_le_bytes());
    for path in paths {
        let path = path.as_ref();
        let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
        let mtime = meta
            .modified()
            .ok()
            .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
            .map_or(0, |d| d.as_nanos());
        hasher.update(path.to_string_lossy().as_bytes());
        hasher.update([0]);
        hasher.update(meta.len().to_le_bytes());
        hasher.update(mtime.to_le_bytes());
    }
    Ok(hasher.finalize().into())
}

impl NgramIndex {
    /// Load a cached index if it exists and matches the sources, otherwise
    /// build from the files and refresh the cache.
    pub fn load_or_build<P: AsRef<Path>>(
        paths: &[P],
        order: usize,
        cache: Option<&Path>,
    ) -> Result<Self> {
        let Some(cache) = cache else {
            return Self::from_files(paths, order);
        };
        let fingerprint = source_fingerprint(paths, order)?;
        match Self::read_cache(cache, &fingerprint) {
            Ok(Some(index)) => {
                debug!("loaded n-gram cache {}", cache.display());
                return Ok(index);
            }
            Ok(None) => debug!("n-gram cache {} absent or stale", cache.display()),
            Err(e) => warn!("ignoring unreadable n-gram cache {}: {e}", cache.display()),
        }
        let index = Self::from_files(paths, order)?;
        index.write_cache(cache, &fingerprint)?;
        Ok(index)
    }

    /// Write the compact binary cache for these sources.
    pub fn write_cache_for<P: AsRef<Path>>(&self, paths: &[P], cache: &Path) -> Result<()> {
        let fingerprint = source_fingerprint(paths, self.order)?;
        self.write_cache(cache, &fingerprint)
    }

    fn write_cache(&self, path: &Path, fingerprint: &[u8; 32]) -> Result<()> {
        let io = |e| Error::io(path, e);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        let mut records: Vec<(&Box<[Sym]>, &Count)> = self.exact.iter().collect();
        records.sort_unstable();

        out.write_all(CACHE_MAGIC).map_err(io)?;
        out.write_all(&CACHE_VERSION.to_le_bytes()).map_err(io)?;
        out.write_all(fingerprint).map_err(io)?;
        out.write_all(&(self.order as u32).to_le_bytes()).map_err(io)?;
        out.write_all(&(self.vocab.words.len() as u32).to_le_bytes())
            .map_err(io)?;
        for word in &self.vocab.words {
            out.write_all(&(word.len() as u32).to_le_bytes()).map_err(io)?;
            out.write_all(word.as_bytes()).map_err(io)?;
        }
        out.write_all(&(records.len() as u64).to_le_bytes()).map_err(io)?;
        for (gram, count) in records {
            for s in gram.iter() {
                out.write_all(&s.to_le_bytes()).map_err(io)?;
            }
            out.write_all(&count.to_le_bytes()).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    fn read_cache(path: &Path, fingerprint: &[u8; 32]) -> Result<Option<Self>> {
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        let mut r = BufReader::new(file);
        let io = |e| Error::io(path, e);

        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != CACHE_MAGIC || read_u32(&mut r).map_err(io)? != CACHE_VERSION {
            return Ok(None);
        }
        let mut stored = [0u8; 32];
        r.read_exact(&mut stored).map_err(io)?;
        if &stored != fingerprint {
            return Ok(None);
        }
        let order = read_u32(&mut r).map_err(io)? as usize;
        let vocab_len = read_u32(&mut r).map_err(io)? as usize;
        let mut words = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            let len = read_u32(&mut r).map_err(io)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(io)?;
            words.push(String::from_utf8(buf).map_err(|_| {
                Error::Model(format!("{}: corrupt vocabulary entry", path.display()))
            })?);
        }
        let n_records = read_u64(&mut r).map_err(io)?;
        let mut builder = NgramIndexBuilder::new(order)?;
        for w in &words {
            builder.vocab.intern(w);
        }
        for _ in 0..n_records {
            let mut key = Vec::with_capacity(order);
            for _ in 0..order {
                let s = read_u32(&mut r).map_err(io)?;
                if s as usize >= words.len() {
                    return Err(Error::Model(format!("{}: corrupt record", path.display())));
                }
                key.push(s);
            }
            let count = read_u64(&mut r).map_err(io)?;
            builder.counts.insert(key.into_boxed_slice(), count);
        }
        builder.build().map(Some)
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Default cache location next to the first source file.
pub fn default_cache_path<P: AsRef<Path>>(paths: &[P], order: usize) -> Option<PathBuf> {
    let first = paths.first()?.as_ref();
    Some(first.with_extension(format!("{order}gram.idx")))
}
