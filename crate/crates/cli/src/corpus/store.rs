//! On-disk corpus format.
//!
//! A preprocessed dataset directory holds:
//!   vocab.tsv    token<TAB>index<TAB>count, ordered by index (pad 0 implied)
//!   train.jsonl  {"id":N,"ids":[...],"label":N|null} per document
//!   test.jsonl   same; empty "ids" flags a document that pruned to nothing
//!   meta.json    configuration, seed, pinned tool identifiers, counts
//!
//! Writes are deterministic: identical inputs and config produce
//! byte-identical files.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tanntm_core::EncodedDoc;

use super::vocab::Vocabulary;
use super::{CorpusError, CorpusSplit, SplitMeta};

#[derive(Serialize, Deserialize)]
struct DocRecord {
    id: u64,
    ids: Vec<u32>,
    label: Option<u32>,
}

pub fn save(split: &CorpusSplit, dir: &Path) -> Result<(), CorpusError> {
    fs::create_dir_all(dir)?;

    let mut vocab_out = BufWriter::new(File::create(dir.join("vocab.tsv"))?);
    for (index, token, count) in split.vocabulary.iter() {
        writeln!(vocab_out, "{token}\t{index}\t{count}")?;
    }
    vocab_out.flush()?;

    for (name, docs) in [("train.jsonl", &split.train), ("test.jsonl", &split.test)] {
        let mut out = BufWriter::new(File::create(dir.join(name))?);
        for (i, doc) in docs.iter().enumerate() {
            let record = DocRecord {
                id: i as u64,
                ids: doc.ids.clone(),
                label: doc.label,
            };
            serde_json::to_writer(&mut out, &record)
                .map_err(|e| CorpusError::Format(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
    }

    let meta = serde_json::to_string_pretty(&split.meta)
        .map_err(|e| CorpusError::Format(e.to_string()))?;
    fs::write(dir.join("meta.json"), meta + "\n")?;
    Ok(())
}

pub fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let file = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in file.lines() {
        out.push(line?);
    }
    // A trailing newline produces one empty tail entry; drop it.
    while out.last().is_some_and(|l| l.is_empty()) {
        out.pop();
    }
    Ok(out)
}

fn load_vocab(path: &Path) -> Result<Vocabulary, CorpusError> {
    let lines = read_lines(path)?;
    let mut tokens = Vec::with_capacity(lines.len());
    let mut counts = Vec::with_capacity(lines.len());
    for (ln, line) in lines.iter().enumerate() {
        let mut parts = line.split('\t');
        let (token, index, count) = (parts.next(), parts.next(), parts.next());
        let (token, index, count) = match (token, index, count) {
            (Some(t), Some(i), Some(c)) => (t, i, c),
            _ => {
                return Err(CorpusError::Format(format!(
                    "vocab.tsv:{}: expected token<TAB>index<TAB>count",
                    ln + 1
                )))
            }
        };
        let index: usize = index
            .parse()
            .map_err(|_| CorpusError::Format(format!("vocab.tsv:{}: bad index", ln + 1)))?;
        if index != ln + 1 {
            return Err(CorpusError::Format(format!(
                "vocab.tsv:{}: indices must be contiguous from 1 (got {index})",
                ln + 1
            )));
        }
        let count: u64 = count
            .parse()
            .map_err(|_| CorpusError::Format(format!("vocab.tsv:{}: bad count", ln + 1)))?;
        tokens.push(token.to_string());
        counts.push(count);
    }
    if tokens.is_empty() {
        return Err(CorpusError::EmptyVocabulary);
    }
    Ok(Vocabulary::from_indexed(tokens, counts))
}

fn load_docs(path: &Path, vocab_len: usize) -> Result<Vec<EncodedDoc>, CorpusError> {
    let lines = read_lines(path)?;
    let mut docs = Vec::with_capacity(lines.len());
    for (ln, line) in lines.iter().enumerate() {
        let record: DocRecord = serde_json::from_str(line).map_err(|e| {
            CorpusError::Format(format!("{}:{}: {e}", path.display(), ln + 1))
        })?;
        if let Some(&bad) = record.ids.iter().find(|&&id| id == 0 || id as usize > vocab_len) {
            return Err(CorpusError::Format(format!(
                "{}:{}: id {bad} outside vocabulary",
                path.display(),
                ln + 1
            )));
        }
        docs.push(EncodedDoc::from_ids(record.ids, record.label));
    }
    Ok(docs)
}

pub fn load(dir: &Path) -> Result<CorpusSplit, CorpusError> {
    let meta: SplitMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)
        .map_err(|e| CorpusError::Format(format!("meta.json: {e}")))?;
    let vocabulary = load_vocab(&dir.join("vocab.tsv"))?;
    let train = load_docs(&dir.join("train.jsonl"), vocabulary.len())?;
    let test = load_docs(&dir.join("test.jsonl"), vocabulary.len())?;
    Ok(CorpusSplit {
        train,
        test,
        vocabulary,
        max_seq_len: meta.max_seq_len,
        meta,
    })
}

/// SHA-256 of the canonical vocabulary file, hex-encoded. Binds checkpoints
/// to the vocabulary they were trained against.
pub fn vocab_sha256(dir: &Path) -> Result<String, CorpusError> {
    let mut file = File::open(dir.join("vocab.tsv"))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

pub fn sha256_file(path: &Path) -> Result<String, CorpusError> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

pub fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
