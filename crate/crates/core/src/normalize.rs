//! Canonicalization of raw funder strings: lowercase ASCII normalization,
//! parenthesized-acronym extraction, and character shingling.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One raw acknowledgment string together with its normalization artifacts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunderString {
    /// Stable integer handle; position in the loaded corpus.
    pub string_id: u32,
    /// The string exactly as it appears in the source metadata.
    pub raw: String,
    /// Lowercase, whitespace-collapsed, ASCII-only form of `raw`.
    pub normalized: String,
    /// Uppercase acronym pulled from the first parenthesized group, if any.
    pub extracted_acronym: Option<String>,
    /// Number of publications in which this string was observed.
    pub count: u64,
}

impl FunderString {
    pub fn new(string_id: u32, raw: &str, count: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Rejected(format!("zero occurrence count: {raw:?}")));
        }
        let extracted_acronym = extract_acronym(raw);
        let normalized = normalize_string(raw)?;
        Ok(FunderString {
            string_id,
            raw: raw.to_string(),
            normalized,
            extracted_acronym,
            count,
        })
    }
}

/// Lowercase a raw funder string, collapse whitespace runs to single spaces,
/// and trim. Non-ASCII bytes are dropped before lowercasing. Idempotent.
///
/// Rejects strings that are empty once normalized.
pub fn normalize_string(raw: &str) -> Result<String> {
    let filtered: String = raw
        .chars()
        .filter(char::is_ascii)
        .map(|c| c.to_ascii_lowercase())
        .collect();
    let collapsed = filtered.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.is_empty() {
        return Err(Error::Rejected(format!(
            "string empty after normalization: {raw:?}"
        )));
    }
    Ok(collapsed)
}

/// Extract an acronym from the first parenthesized segment of `raw`.
///
/// Within each `(...)` group, scanned left to right, the first maximal run of
/// consecutive ASCII uppercase letters of length >= 2 is the acronym; e.g.
/// "National Science Foundation (NSF)" yields "NSF" and
/// "Deutsche Forschungsgemeinschaft (DFG, Bonn)" yields "DFG". Returns `None`
/// when no group contains such a run.
pub fn extract_acronym(raw: &str) -> Option<String> {
    let mut rest = raw;
    while let Some(open) = rest.find('(') {
        let after = &rest[open + 1..];
        let group = match after.find(')') {
            Some(close) => &after[..close],
            None => after,
        };
        let mut run = String::new();
        for ch in group.chars() {
            if ch.is_ascii_uppercase() {
                run.push(ch);
            } else {
                if run.len() >= 2 {
                    return Some(run);
                }
                run.clear();
            }
        }
        if run.len() >= 2 {
            return Some(run);
        }
        match after.find(')') {
            Some(close) => rest = &after[close + 1..],
            None => break,
        }
    }
    None
}

/// The set of all contiguous length-`k` substrings of `normalized`.
///
/// Strings shorter than `k` yield the single whole-string shingle, so the
/// result is never empty for a non-empty input.
pub fn shingle(normalized: &str, k: usize) -> BTreeSet<String> {
    assert!(k >= 1, "shingle width must be >= 1");
    let chars: Vec<char> = normalized.chars().collect();
    let mut set = BTreeSet::new();
    if chars.is_empty() {
        return set;
    }
    if chars.len() < k {
        set.insert(normalized.to_string());
        return set;
    }
    for window in chars.windows(k) {
        set.insert(window.iter().collect());
    }
    set
}

/// Load a funder-string corpus from a two-column delimited file with header
/// columns `grant_agency` and `counts`.
///
/// Duplicate raw strings have their counts summed. Returns the corpus in
/// first-occurrence order plus a list of rejected rows with reasons.
pub fn load_corpus(path: &Path) -> Result<(Vec<(String, u64)>, Vec<(String, String)>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => Error::Csv {
                path: path.to_path_buf(),
                source: e,
            },
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?
        .clone();
    let agency_col = headers.iter().position(|h| h == "grant_agency");
    let counts_col = headers.iter().position(|h| h == "counts");
    let (agency_col, counts_col) = match (agency_col, counts_col) {
        (Some(a), Some(c)) => (a, c),
        _ => {
            return Err(Error::InvalidInput(format!(
                "{} must have grant_agency and counts columns, found {:?}",
                path.display(),
                headers.iter().collect::<Vec<_>>()
            )))
        }
    };

    let mut order: Vec<String> = Vec::new();
    let mut counts: rustc_hash::FxHashMap<String, u64> = rustc_hash::FxHashMap::default();
    let mut rejected: Vec<(String, String)> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
        let raw = row.get(agency_col).unwrap_or("").to_string();
        let count: u64 = match row.get(counts_col).unwrap_or("").trim().parse() {
            Ok(c) => c,
            Err(_) => {
                rejected.push((raw, "unparseable count".to_string()));
                continue;
            }
        };
        match counts.entry(raw.clone()) {
            std::collections::hash_map::Entry::Occupied(mut e) => {
                *e.get_mut() += count;
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(count);
                order.push(raw);
            }
        }
    }
    let corpus = order
        .into_iter()
        .map(|raw| {
            let count = counts[&raw];
            (raw, count)
        })
        .collect();
    Ok((corpus, rejected))
}

/// Build `FunderString`s from raw (string, count) pairs, assigning stable ids
/// in input order. Rows that fail normalization are reported, not fatal.
pub fn build_funder_strings(
    corpus: &[(String, u64)],
) -> (Vec<FunderString>, Vec<(String, String)>) {
    let mut strings = Vec::with_capacity(corpus.len());
    let mut rejected = Vec::new();
    for (raw, count) in corpus {
        match FunderString::new(strings.len() as u32, raw, *count) {
            Ok(fs) => strings.push(fs),
            Err(e) => rejected.push((raw.clone(), e.to_string())),
        }
    }
    (strings, rejected)
}
