//! JSONL joke store: one record per line, later lines win on duplicate ids.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use humor_core::record::JokeRecord;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct JokeStore {
    records: Vec<JokeRecord>,
    index: HashMap<String, usize>,
}

impl JokeStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = JokeRecord>) -> Self {
        let mut s = Self::new();
        for r in records {
            s.upsert(r);
        }
        s
    }

    /// Inserts or replaces by id; returns true for a new id. A replaced
    /// record keeps its original position.
    pub fn upsert(&mut self, record: JokeRecord) -> bool {
        match self.index.get(&record.id) {
            Some(&i) => {
                self.records[i] = record;
                false
            }
            None => {
                self.index.insert(record.id.clone(), self.records.len());
                self.records.push(record);
                true
            }
        }
    }

    pub fn get(&self, id: &str) -> Option<&JokeRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut JokeRecord> {
        self.index.get(id).map(|&i| &mut self.records[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn records(&self) -> &[JokeRecord] {
        &self.records
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn to_line(r: &JokeRecord) -> String {
    serde_json::to_string(r).expect("JokeRecord serialises")
}

/// Appends records to the JSONL file, creating it if needed.
pub fn persist(path: &Path, records: &[JokeRecord]) -> Result<usize> {
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        writeln!(w, "{}", to_line(r)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(records.len())
}

/// Replaces the file with one line per record (via a temporary sibling).
pub fn rewrite(path: &Path, store: &JokeStore) -> Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        for r in store.records() {
            writeln!(w, "{}", to_line(r)).map_err(|e| Error::io(&tmp, e))?;
        }
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<JokeStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut store = JokeStore::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| Error::parse(path, line_no, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: JokeRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, line_no, e))?;
        record
            .validate()
            .map_err(|e| Error::parse(path, line_no, e))?;
        store.upsert(record);
    }
    Ok(store)
}

/// Like [`load`], but a missing file is an empty store.
pub fn load_or_empty(path: &Path) -> Result<JokeStore> {
    if path.exists() {
        load(path)
    } else {
        Ok(JokeStore::new())
    }
}
