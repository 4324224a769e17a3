//! Snapshot readers: OpenAlex-style line-delimited JSON for funders and
//! institutions, ROR v2-schema JSON dumps, and the serialized organization
//! list that the match stage loads.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::{canonicalize_id, IdScheme, OrgRecord, SourceDataset, SourceRecord};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
struct OpenAlexIds {
    ror: Option<String>,
    wikidata: Option<String>,
}

#[derive(Debug, Deserialize)]
struct OpenAlexRecord {
    id: String,
    display_name: String,
    #[serde(default)]
    alternate_titles: Vec<String>,
    /// Institution snapshots use these two fields instead of
    /// `alternate_titles`; both spellings are accepted.
    #[serde(default)]
    display_name_alternatives: Vec<String>,
    #[serde(default)]
    display_name_acronyms: Vec<String>,
    #[serde(default)]
    country_code: Option<String>,
    #[serde(default)]
    ids: Option<OpenAlexIds>,
    #[serde(default)]
    homepage_url: Option<String>,
    #[serde(default)]
    grants_count: Option<u64>,
    #[serde(default)]
    works_count: Option<u64>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Read an OpenAlex-style JSONL snapshot into pre-merge records, tagging
/// each with `dataset`. IDs are canonicalized; rows without a usable id are
/// rejected with a line-numbered error.
pub fn load_openalex_jsonl(path: &Path, dataset: SourceDataset) -> Result<Vec<SourceRecord>> {
    let reader = BufReader::new(open(path)?);
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: OpenAlexRecord = serde_json::from_str(&line).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: lineno + 1,
            source,
        })?;
        records.push(source_record_from_openalex(raw, dataset)?);
    }
    Ok(records)
}

fn source_record_from_openalex(
    raw: OpenAlexRecord,
    dataset: SourceDataset,
) -> Result<SourceRecord> {
    let raw_id = canonicalize_id(&raw.id, IdScheme::OpenAlex)?;
    let (ror_id, wikidata_id) = match &raw.ids {
        Some(ids) => (
            ids.ror
                .as_deref()
                .map(|r| canonicalize_id(r, IdScheme::Ror))
                .transpose()?,
            ids.wikidata
                .as_deref()
                .map(|w| canonicalize_id(w, IdScheme::Wikidata))
                .transpose()?,
        ),
        None => (None, None),
    };
    let mut alternate_titles = raw.alternate_titles;
    alternate_titles.extend(raw.display_name_alternatives);
    Ok(SourceRecord {
        source_dataset: dataset,
        raw_id,
        ror_id,
        wikidata_id,
        display_name: raw.display_name,
        alternate_titles,
        acronyms: raw.display_name_acronyms,
        country_code: raw.country_code,
        homepage_url: raw.homepage_url,
        grants_count: raw.grants_count,
        works_count: raw.works_count,
    })
}

#[derive(Debug, Deserialize)]
struct RorName {
    value: String,
    #[serde(default)]
    types: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RorGeonamesDetails {
    #[serde(default)]
    country_code: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RorLocation {
    #[serde(default)]
    geonames_details: Option<RorGeonamesDetails>,
}

#[derive(Debug, Deserialize)]
struct RorExternalId {
    #[serde(rename = "type")]
    id_type: String,
    #[serde(default)]
    all: Vec<String>,
    #[serde(default)]
    preferred: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RorLink {
    #[serde(rename = "type")]
    link_type: String,
    value: String,
}

#[derive(Debug, Deserialize)]
struct RorRecord {
    id: String,
    #[serde(default)]
    names: Vec<RorName>,
    #[serde(default)]
    locations: Vec<RorLocation>,
    #[serde(default)]
    external_ids: Vec<RorExternalId>,
    #[serde(default)]
    links: Vec<RorLink>,
    #[serde(default)]
    status: Option<String>,
}

/// Result of reading a ROR dump: pre-merge records plus the GRID -> ROR
/// crosswalk pairs harvested from external ids.
pub struct RorIngest {
    pub records: Vec<SourceRecord>,
    pub grid_to_ror: Vec<(String, String)>,
    pub skipped_inactive: usize,
}

/// Read a ROR v2-schema dump. Accepts either one JSON array (the published
/// dump format) or line-delimited JSON. Inactive records are skipped.
pub fn load_ror_json(path: &Path) -> Result<RorIngest> {
    let mut content = String::new();
    BufReader::new(open(path)?)
        .read_to_string(&mut content)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    let raw_records: Vec<RorRecord> = if content.trim_start().starts_with('[') {
        serde_json::from_str(&content).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: 1,
            source,
        })?
    } else {
        let mut out = Vec::new();
        for (lineno, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            out.push(
                serde_json::from_str(line).map_err(|source| Error::Json {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    source,
                })?,
            );
        }
        out
    };

    let mut ingest = RorIngest {
        records: Vec::new(),
        grid_to_ror: Vec::new(),
        skipped_inactive: 0,
    };
    for raw in raw_records {
        if let Some(status) = &raw.status {
            if status != "active" {
                ingest.skipped_inactive += 1;
                continue;
            }
        }
        let ror_id = canonicalize_id(&raw.id, IdScheme::Ror)?;

        let mut display = None;
        let mut acronyms = Vec::new();
        let mut alternates = Vec::new();
        for name in &raw.names {
            if name.types.iter().any(|t| t == "ror_display") && display.is_none() {
                display = Some(name.value.clone());
            } else if name.types.iter().any(|t| t == "acronym") {
                acronyms.push(name.value.clone());
            } else {
                alternates.push(name.value.clone());
            }
        }
        let display_name = match display.or_else(|| alternates.first().cloned()) {
            Some(d) => d,
            None => continue, // nameless record carries no matching signal
        };

        let mut wikidata_id = None;
        for ext in &raw.external_ids {
            let pick = ext.preferred.clone().or_else(|| ext.all.first().cloned());
            match ext.id_type.as_str() {
                "wikidata" => {
                    if let Some(w) = pick {
                        wikidata_id = Some(canonicalize_id(&w, IdScheme::Wikidata)?);
                    }
                }
                "grid" => {
                    for grid in &ext.all {
                        ingest.grid_to_ror.push((grid.clone(), ror_id.clone()));
                    }
                }
                _ => {}
            }
        }

        let country_code = raw
            .locations
            .iter()
            .filter_map(|l| l.geonames_details.as_ref()?.country_code.clone())
            .next();
        let homepage_url = raw
            .links
            .iter()
            .find(|l| l.link_type == "website")
            .map(|l| l.value.clone());

        ingest.records.push(SourceRecord {
            source_dataset: SourceDataset::Registry,
            raw_id: ror_id.clone(),
            ror_id: Some(ror_id),
            wikidata_id,
            display_name,
            alternate_titles: alternates,
            acronyms,
            country_code,
            homepage_url,
            grants_count: None,
            works_count: None,
        });
    }
    ingest.grid_to_ror.sort();
    ingest.grid_to_ror.dedup();
    Ok(ingest)
}

/// Serialize organizations as line-delimited JSON, one record per line,
/// sorted by canonical id.
pub fn write_orgs_jsonl(path: &Path, orgs: &[OrgRecord]) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = BufWriter::new(file);
    for org in orgs {
        let line = serde_json::to_string(org).expect("org records serialize");
        writeln!(writer, "{line}").map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })?;
    }
    writer.flush().map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Load organizations from line-delimited JSON.
pub fn load_orgs_jsonl(path: &Path) -> Result<Vec<OrgRecord>> {
    let reader = BufReader::new(open(path)?);
    let mut orgs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let org: OrgRecord = serde_json::from_str(&line).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: lineno + 1,
            source,
        })?;
        orgs.push(org);
    }
    Ok(orgs)
}

/// Write the GRID -> ROR crosswalk as a two-column CSV.
pub fn write_crosswalk_csv(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Write {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    writer
        .write_record(["foreign_id", "ror_id"])
        .and_then(|_| {
            for (grid, ror) in pairs {
                writer.write_record([grid.as_str(), ror.as_str()])?;
            }
            writer.flush().map_err(csv::Error::from)
        })
        .map_err(|e| Error::Write {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })
}
