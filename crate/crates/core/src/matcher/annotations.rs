//! Manual annotations: curated raw-string -> canonical-id bindings applied
//! ahead of the automated cascade, with cluster propagation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reference::ReferenceIndex;

/// One curated binding from a raw funder string to a canonical organization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualAnnotation {
    pub raw_string: String,
    pub canonical_id: String,
}

/// Load annotations from a two-column delimited file (raw_string,
/// canonical_id). A header row with those column names is accepted and
/// skipped.
pub fn load_annotations(path: &Path) -> Result<Vec<ManualAnnotation>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })?;
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let raw = row.get(0).unwrap_or("").trim().to_string();
        let id = row.get(1).unwrap_or("").trim().to_string();
        if i == 0 && raw == "raw_string" && id == "canonical_id" {
            continue;
        }
        if raw.is_empty() || id.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{}: annotation row {} needs raw_string and canonical_id",
                path.display(),
                i + 1
            )));
        }
        out.push(ManualAnnotation {
            raw_string: raw,
            canonical_id: id,
        });
    }
    Ok(out)
}

/// Split annotations into those naming a known organization and rejected
/// rows (unknown canonical id), each rejection with a reason.
pub fn validate_annotations(
    annotations: Vec<ManualAnnotation>,
    index: &ReferenceIndex,
) -> (Vec<ManualAnnotation>, Vec<(ManualAnnotation, String)>) {
    let mut valid = Vec::new();
    let mut rejected = Vec::new();
    for ann in annotations {
        if index.by_canonical_id(&ann.canonical_id).is_some() {
            valid.push(ann);
        } else {
            let reason = format!("unknown canonical_id {}", ann.canonical_id);
            rejected.push((ann, reason));
        }
    }
    (valid, rejected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{OrgRecord, OrgSource};
    use std::io::Write;

    #[test]
    fn loads_with_and_without_header() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "raw_string,canonical_id").unwrap();
        writeln!(f, "jsps kakenhi,F4").unwrap();
        let anns = load_annotations(f.path()).unwrap();
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].canonical_id, "F4");

        let mut f2 = tempfile::NamedTempFile::new().unwrap();
        writeln!(f2, "jsps kakenhi,F4").unwrap();
        assert_eq!(load_annotations(f2.path()).unwrap(), anns);
    }

    #[test]
    fn unknown_ids_are_rejected_per_row() {
        let org = OrgRecord::assemble(
            "F4".to_string(),
            OrgSource::FunderId,
            "Japan Society for the Promotion of Science",
            &[],
            &[],
            None,
            None,
            None,
            None,
            None,
            None,
        )
        .unwrap();
        let index = ReferenceIndex::build(vec![org]).unwrap();
        let (valid, rejected) = validate_annotations(
            vec![
                ManualAnnotation {
                    raw_string: "jsps".into(),
                    canonical_id: "F4".into(),
                },
                ManualAnnotation {
                    raw_string: "x".into(),
                    canonical_id: "F404".into(),
                },
            ],
            &index,
        );
        assert_eq!(valid.len(), 1);
        assert_eq!(rejected.len(), 1);
        assert!(rejected[0].1.contains("F404"));
    }
}
