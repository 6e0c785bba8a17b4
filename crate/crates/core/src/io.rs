//! File formats: label CSVs, pmf and joint-model JSON, embedding CSV/JSONL,
//! dialogue and paired-corpus JSONL, score-table CSV.
//!
//! Parse failures carry 1-based line numbers.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::coarsening::EmbeddingTable;
use crate::dist::{JointModel, JointModelFile, Pmf, SampleSet};
use crate::energy::Distribution;
use crate::error::{Error, Result};
use crate::testdiv::PairedItem;
use crate::testfns::{Dialogue, ScoreTable};

pub const SCHEMA_VERSION: u32 = 1;

pub fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn json_err(e: serde_json::Error) -> Error {
    parse_err(e.line(), e.to_string())
}

/// Parses one JSON value per nonblank line.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| parse_err(i + 1, e.to_string())))
        .collect()
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(json_err)
}

/// Rows of a headerless-or-headed CSV with their line numbers.
fn csv_rows(text: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

/// `label,count` rows, or one `label` per row. A leading `label` header is skipped.
pub fn parse_samples_csv(text: &str) -> Result<SampleSet> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for (i, (line, row)) in csv_rows(text)?.into_iter().enumerate() {
        if i == 0 && row[0].eq_ignore_ascii_case("label") {
            continue;
        }
        let (label, n) = match row.as_slice() {
            [label] => (label.clone(), 1),
            [label, count] => {
                let n = count
                    .parse::<u64>()
                    .map_err(|_| parse_err(line, format!("count `{count}` is not a nonnegative integer")))?;
                (label.clone(), n)
            }
            _ => return Err(parse_err(line, format!("expected 1 or 2 fields, got {}", row.len()))),
        };
        if label.is_empty() {
            return Err(parse_err(line, "empty label"));
        }
        *counts.entry(label).or_insert(0) += n;
    }
    SampleSet::from_counts(counts)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PmfFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub mass: BTreeMap<String, f64>,
}

pub fn parse_pmf_json(text: &str) -> Result<Pmf> {
    let f: PmfFile = parse_json(text)?;
    Pmf::from_pairs(f.mass)
}

fn read(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn is_ext(path: &Path, ext: &str) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

pub fn read_samples_csv(path: &Path) -> Result<SampleSet> {
    parse_samples_csv(&read(path)?)
}

pub fn read_pmf_json(path: &Path) -> Result<Pmf> {
    parse_pmf_json(&read(path)?)
}

/// `.json` files are pmfs; anything else is a label CSV.
pub fn read_distribution(path: &Path) -> Result<Distribution> {
    if is_ext(path, "json") {
        Ok(Distribution::Exact(read_pmf_json(path)?))
    } else {
        Ok(Distribution::Sample(read_samples_csv(path)?))
    }
}

pub fn read_joint_json(path: &Path) -> Result<JointModel> {
    JointModel::try_from(parse_json::<JointModelFile>(&read(path)?)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EmbeddingLine {
    id: String,
    vector: Vec<f64>,
}

pub fn parse_embeddings_jsonl(text: &str) -> Result<EmbeddingTable> {
    let rows: Vec<EmbeddingLine> = parse_jsonl(text)?;
    EmbeddingTable::new(rows.into_iter().map(|r| (r.id, r.vector)).collect())
}

/// `id,v1,…,vd` rows; a first row with non-numeric values is a header.
pub fn parse_embeddings_csv(text: &str) -> Result<EmbeddingTable> {
    let mut rows = Vec::new();
    for (i, (line, row)) in csv_rows(text)?.into_iter().enumerate() {
        if row.len() < 2 {
            return Err(parse_err(line, "expected an id and at least one component"));
        }
        let parsed: std::result::Result<Vec<f64>, _> = row[1..].iter().map(|v| v.parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push((row[0].clone(), v)),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(parse_err(line, format!("bad component: {e}"))),
        }
    }
    EmbeddingTable::new(rows)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let text = read(path)?;
    if is_ext(path, "jsonl") {
        parse_embeddings_jsonl(&text)
    } else {
        parse_embeddings_csv(&text)
    }
}

pub fn read_dialogues_jsonl(path: &Path) -> Result<Vec<Dialogue>> {
    parse_jsonl(&read(path)?)
}

/// Paired corpus, one item per line, with context agreement checked per line.
pub fn parse_paired_jsonl(text: &str) -> Result<Vec<PairedItem>> {
    let mut items = Vec::new();
    for (i, l) in text.lines().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let item: PairedItem = serde_json::from_str(l).map_err(|e| parse_err(i + 1, e.to_string()))?;
        item.check().map_err(|e| parse_err(i + 1, e.to_string()))?;
        items.push(item);
    }
    Ok(items)
}

pub fn read_paired_jsonl(path: &Path) -> Result<Vec<PairedItem>> {
    parse_paired_jsonl(&read(path)?)
}

/// `dialogue_id,u_id,score` rows with an optional header.
pub fn parse_score_table(name: &str, text: &str) -> Result<ScoreTable> {
    let mut rows = Vec::new();
    for (i, (line, row)) in csv_rows(text)?.into_iter().enumerate() {
        if row.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, got {}", row.len())));
        }
        match row[2].parse::<f64>() {
            Ok(s) if (0.0..=1.0).contains(&s) => rows.push((row[0].clone(), row[1].clone(), s)),
            Ok(s) => return Err(parse_err(line, format!("score {s} outside [0,1]"))),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(parse_err(line, format!("score `{}` is not a number", row[2]))),
        }
    }
    ScoreTable::new(name, rows)
}

pub fn read_score_table(name: &str, path: &Path) -> Result<ScoreTable> {
    parse_score_table(name, &read(path)?)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}
