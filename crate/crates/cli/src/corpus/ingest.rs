//! Raw dataset readers: labeled CSV for AGNews/YRP, and the pre-tokenized
//! 20NG export (see the README for converting the published archive).

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use tanntm_core::EncodedDoc;

use super::store::read_lines;
use super::vocab::Vocabulary;
use super::{lemma, stopwords, CorpusError, CorpusSplit, Dataset, PreprocessConfig, RawDoc, SplitMeta};

/// AGNews rows are `class,title,body`; title and body are concatenated.
/// YRP rows are `class,body`. Class ids are 1-based in the files.
pub fn read_labeled_csv(path: &Path, dataset: Dataset) -> Result<Vec<RawDoc>, CorpusError> {
    let expect_title = match dataset {
        Dataset::AgNews => true,
        Dataset::Yrp => false,
        Dataset::TwentyNews => {
            return Err(CorpusError::Format(
                "20ng is ingested from its pre-tokenized export, not CSV".into(),
            ))
        }
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut docs = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let want = if expect_title { 3 } else { 2 };
        if record.len() < want {
            return Err(CorpusError::Format(format!(
                "row {line}: expected {want} columns, got {}",
                record.len()
            )));
        }
        let class: i64 = record[0]
            .trim()
            .trim_matches('"')
            .parse()
            .map_err(|_| CorpusError::Format(format!("row {line}: bad class `{}`", &record[0])))?;
        if class < 1 {
            return Err(CorpusError::Format(format!(
                "row {line}: class ids are 1-based, got {class}"
            )));
        }
        let text = if expect_title {
            format!("{} {}", &record[1], &record[2])
        } else {
            record[1].to_string()
        };
        docs.push(RawDoc {
            text,
            label: Some((class - 1) as u32),
        });
    }
    Ok(docs)
}

fn parse_id_lines(path: &Path) -> Result<Vec<Vec<u32>>, CorpusError> {
    let file = BufReader::new(File::open(path)?);
    let mut docs = Vec::new();
    for (ln, line) in file.lines().enumerate() {
        let line = line?;
        let mut ids = Vec::new();
        for tok in line.split_whitespace() {
            let id: u32 = tok.parse().map_err(|_| {
                CorpusError::Format(format!("{}:{}: bad token id `{tok}`", path.display(), ln + 1))
            })?;
            ids.push(id);
        }
        docs.push(ids);
    }
    Ok(docs)
}

fn parse_label_lines(path: &Path) -> Result<Vec<u32>, CorpusError> {
    let file = BufReader::new(File::open(path)?);
    let mut labels = Vec::new();
    for (ln, line) in file.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        labels.push(trimmed.parse().map_err(|_| {
            CorpusError::Format(format!("{}:{}: bad label `{trimmed}`", path.display(), ln + 1))
        })?);
    }
    Ok(labels)
}

/// Ingests the pre-tokenized 20NG export: `vocab.txt` (one token per line,
/// line number = upstream id), `train.ids.txt` / `test.ids.txt` (one document
/// per line, space-separated upstream ids), and optional
/// `train.labels.txt` / `test.labels.txt`.
///
/// Pruning is bypassed; the upstream vocabulary is kept whole and re-indexed
/// into this pipeline's deterministic order (descending train count, ties by
/// token).
pub fn ingest_20ng(dir: &Path, seed: u64) -> Result<CorpusSplit, CorpusError> {
    let upstream_vocab = read_lines(&dir.join("vocab.txt"))?;
    if upstream_vocab.is_empty() {
        return Err(CorpusError::EmptyVocabulary);
    }
    let train_up = parse_id_lines(&dir.join("train.ids.txt"))?;
    let test_up = parse_id_lines(&dir.join("test.ids.txt"))?;
    for (name, docs) in [("train", &train_up), ("test", &test_up)] {
        for (i, doc) in docs.iter().enumerate() {
            if let Some(&bad) = doc.iter().find(|&&id| id as usize >= upstream_vocab.len()) {
                return Err(CorpusError::Format(format!(
                    "{name} doc {i}: id {bad} outside upstream vocabulary of {}",
                    upstream_vocab.len()
                )));
            }
        }
    }

    let train_labels = {
        let p = dir.join("train.labels.txt");
        if p.exists() { Some(parse_label_lines(&p)?) } else { None }
    };
    let test_labels = {
        let p = dir.join("test.labels.txt");
        if p.exists() { Some(parse_label_lines(&p)?) } else { None }
    };
    if let Some(l) = &train_labels {
        if l.len() != train_up.len() {
            return Err(CorpusError::Format("train label count mismatch".into()));
        }
    }
    if let Some(l) = &test_labels {
        if l.len() != test_up.len() {
            return Err(CorpusError::Format("test label count mismatch".into()));
        }
    }

    // Train-split occurrence counts over upstream ids; every upstream token
    // is retained (the release is already filtered).
    let mut counts = vec![0u64; upstream_vocab.len()];
    for doc in &train_up {
        for &id in doc {
            counts[id as usize] += 1;
        }
    }
    let mut order: Vec<usize> = (0..upstream_vocab.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        counts[b]
            .cmp(&counts[a])
            .then_with(|| upstream_vocab[a].cmp(&upstream_vocab[b]))
    });
    let tokens: Vec<String> = order.iter().map(|&i| upstream_vocab[i].clone()).collect();
    let token_counts: Vec<u64> = order.iter().map(|&i| counts[i]).collect();
    let vocabulary = Vocabulary::from_indexed(tokens, token_counts);
    // upstream id -> new 1-based index
    let mut remap = vec![0u32; upstream_vocab.len()];
    for (new_pos, &up) in order.iter().enumerate() {
        remap[up] = (new_pos + 1) as u32;
    }

    let encode_docs = |docs: &[Vec<u32>], labels: &Option<Vec<u32>>, keep_empty: bool| {
        let mut out = Vec::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            let ids: Vec<u32> = doc.iter().map(|&id| remap[id as usize]).collect();
            if ids.is_empty() && !keep_empty {
                continue;
            }
            let label = labels.as_ref().map(|l| l[i]);
            out.push(EncodedDoc::from_ids(ids, label));
        }
        out
    };
    let train = encode_docs(&train_up, &train_labels, false);
    let test = encode_docs(&test_up, &test_labels, true);
    let train_dropped = train_up.len() - train.len();
    let test_flagged = test.iter().filter(|d| d.is_empty()).count();

    let dataset = Dataset::TwentyNews;
    let cfg = PreprocessConfig {
        seed,
        ..dataset.default_preprocess(seed)
    };
    let meta = SplitMeta {
        format: 1,
        tool: concat!("tanntm ", env!("CARGO_PKG_VERSION")).to_string(),
        dataset,
        seed,
        config: cfg,
        max_seq_len: dataset.max_seq_len(),
        lemmatizer: format!("{} (bypassed: pre-tokenized release)", lemma::LEMMATIZER_ID),
        stopwords: format!("{} (bypassed: pre-tokenized release)", stopwords::STOPWORDS_ID),
        stopword_count: stopwords::count(),
        train_docs: train.len(),
        test_docs: test.len(),
        vocab_size: vocabulary.len(),
        train_dropped,
        test_flagged,
    };
    Ok(CorpusSplit {
        train,
        test,
        vocabulary,
        max_seq_len: dataset.max_seq_len(),
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn agnews_concatenates_title_and_body() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.csv");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "\"3\",\"Wall St. Bears\",\"Reuters - Short-sellers.\"").unwrap();
        writeln!(f, "\"1\",\"Title two\",\"Body, with comma\"").unwrap();
        drop(f);
        let docs = read_labeled_csv(&path, Dataset::AgNews).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].label, Some(2));
        assert_eq!(docs[0].text, "Wall St. Bears Reuters - Short-sellers.");
        assert_eq!(docs[1].text, "Title two Body, with comma");
    }

    #[test]
    fn yrp_two_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.csv");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "\"2\",\"Good food.\\nGreat value.\"").unwrap();
        drop(f);
        let docs = read_labeled_csv(&path, Dataset::Yrp).unwrap();
        assert_eq!(docs[0].label, Some(1));
        assert!(docs[0].text.contains("\\n"), "literal escape preserved for pruning");
    }

    #[test]
    fn twenty_ng_remaps_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("vocab.txt"), "zeta\nalpha\nmike\n").unwrap();
        // upstream ids: zeta=0 (3x), alpha=1 (3x), mike=2 (1x)
        std::fs::write(dir.path().join("train.ids.txt"), "0 1 0\n1 0 1 2\n\n").unwrap();
        std::fs::write(dir.path().join("test.ids.txt"), "2 2\n\n").unwrap();
        let split = ingest_20ng(dir.path(), 1).unwrap();
        // counts: zeta=3, alpha=3, mike=1; ties alphabetical: alpha, zeta, mike
        assert_eq!(split.vocabulary.token(1), "alpha");
        assert_eq!(split.vocabulary.token(2), "zeta");
        assert_eq!(split.vocabulary.token(3), "mike");
        // empty train line dropped, empty test line flagged
        assert_eq!(split.train.len(), 2);
        assert_eq!(split.test.len(), 2);
        assert!(split.test[1].is_empty());
        assert_eq!(split.train[0].ids, vec![2, 1, 2]);
        assert_eq!(split.meta.train_dropped, 1);
    }

    #[test]
    fn twenty_ng_rejects_out_of_range_ids() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("vocab.txt"), "only\n").unwrap();
        std::fs::write(dir.path().join("train.ids.txt"), "0 5\n").unwrap();
        std::fs::write(dir.path().join("test.ids.txt"), "0\n").unwrap();
        assert!(matches!(
            ingest_20ng(dir.path(), 1),
            Err(CorpusError::Format(_))
        ));
    }
}
