//! Organization reference data: ingestion of registry snapshots, stepwise
//! record linkage, duplicate collapse, and the immutable lookup index used by
//! every matcher stage.
//!
//! Records from the funder, institution, and registry datasets are linked by
//! exact ROR ID, then exact Wikidata ID, then shared (registered domain,
//! country); each linked group merges into one canonical organization, and a
//! final pass collapses residual duplicates that share a normalized name and
//! country.

pub mod domain;
pub mod ingest;

use std::cmp::Reverse;
use std::collections::BTreeMap;

use aho_corasick::AhoCorasick;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::cluster::UnionFind;
use crate::error::{Error, Result};
use crate::normalize::normalize_string;

/// Which snapshot a pre-merge record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceDataset {
    Funder,
    Institution,
    Registry,
}

impl SourceDataset {
    /// Merge priority: funder records are preferred as canonical, registry
    /// records only supplement.
    fn rank(self) -> u8 {
        match self {
            SourceDataset::Funder => 0,
            SourceDataset::Institution => 1,
            SourceDataset::Registry => 2,
        }
    }
}

/// One pre-merge organization record as ingested from a source snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub source_dataset: SourceDataset,
    pub raw_id: String,
    /// Canonical-form ROR ID (no URL prefix).
    pub ror_id: Option<String>,
    /// Canonical-form Wikidata ID.
    pub wikidata_id: Option<String>,
    pub display_name: String,
    pub alternate_titles: Vec<String>,
    pub acronyms: Vec<String>,
    pub country_code: Option<String>,
    pub homepage_url: Option<String>,
    pub grants_count: Option<u64>,
    pub works_count: Option<u64>,
}

/// Whether a canonical organization entered through the OpenAlex funder or
/// institution dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrgSource {
    FunderId,
    InstitutionId,
}

impl OrgSource {
    pub fn label(self) -> &'static str {
        match self {
            OrgSource::FunderId => "funder_id",
            OrgSource::InstitutionId => "institution_id",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "funder_id" => Some(OrgSource::FunderId),
            "institution_id" => Some(OrgSource::InstitutionId),
            _ => None,
        }
    }
}

/// One canonical organization in the reference index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrgRecord {
    /// OpenAlex-style short ID, e.g. "F4320306076".
    pub canonical_id: String,
    pub ror_id: Option<String>,
    pub wikidata_id: Option<String>,
    pub source: OrgSource,
    /// ASCII display name.
    pub display_name: String,
    /// Lowercase, whitespace-collapsed form of `display_name`.
    pub normalized_name: String,
    /// Deduplicated ASCII name variants; recognized acronyms appear here as
    /// well as in `acronyms`.
    pub alternate_titles: Vec<String>,
    /// Uppercase ASCII acronyms.
    pub acronyms: Vec<String>,
    pub country_code: Option<String>,
    /// Registered domain of the homepage URL.
    pub domain: Option<String>,
    pub grants_count: Option<u64>,
    pub works_count: Option<u64>,
}

impl OrgRecord {
    /// Assemble a record, enforcing the ASCII and acronym invariants:
    /// non-ASCII names are dropped, acronyms are uppercased and mirrored
    /// into `alternate_titles`, and name lists are deduplicated.
    ///
    /// Fails when no valid ASCII display name remains.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        canonical_id: String,
        source: OrgSource,
        display_name: &str,
        alternate_titles: &[String],
        acronyms: &[String],
        country_code: Option<String>,
        ror_id: Option<String>,
        wikidata_id: Option<String>,
        domain: Option<String>,
        grants_count: Option<u64>,
        works_count: Option<u64>,
    ) -> Result<OrgRecord> {
        let display = valid_name(display_name).ok_or_else(|| {
            Error::Rejected(format!(
                "organization {canonical_id} has no valid ASCII display name"
            ))
        })?;
        let normalized_name =
            normalize_string(&display).expect("valid names normalize successfully");

        let mut clean_acronyms: Vec<String> = Vec::new();
        for a in acronyms {
            let a = a.trim();
            if a.is_ascii() && !a.is_empty() {
                let upper = a.to_ascii_uppercase();
                if !clean_acronyms.contains(&upper) {
                    clean_acronyms.push(upper);
                }
            }
        }

        let mut titles: Vec<String> = Vec::new();
        for t in alternate_titles
            .iter()
            .map(String::as_str)
            .chain(clean_acronyms.iter().map(String::as_str))
        {
            if let Some(name) = valid_name(t) {
                if name != display && !titles.contains(&name) {
                    titles.push(name);
                }
            }
        }

        Ok(OrgRecord {
            canonical_id,
            ror_id,
            wikidata_id,
            source,
            display_name: display,
            normalized_name,
            alternate_titles: titles,
            acronyms: clean_acronyms,
            country_code,
            domain,
            grants_count,
            works_count,
        })
    }
}

/// A name survives the ASCII filter when it is pure ASCII and non-empty
/// after trimming.
fn valid_name(name: &str) -> Option<String> {
    let trimmed = name.trim();
    if trimmed.is_empty() || !trimmed.is_ascii() {
        return None;
    }
    normalize_string(trimmed).ok()?;
    Some(trimmed.to_string())
}

/// Identifier namespaces with standardized canonical forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdScheme {
    Ror,
    Wikidata,
    OpenAlex,
}

/// Strip URL prefixes and surrounding whitespace from an identifier, leaving
/// the bare ID. Idempotent; rejects inputs that are empty after stripping.
pub fn canonicalize_id(raw: &str, scheme: IdScheme) -> Result<String> {
    let trimmed = raw.trim().trim_end_matches('/');
    let bare = if trimmed.contains("://") || has_known_host(trimmed, scheme) {
        trimmed.rsplit('/').next().unwrap_or_default()
    } else {
        trimmed
    };
    let bare = bare.trim();
    if bare.is_empty() {
        return Err(Error::Rejected(format!(
            "identifier empty after canonicalization: {raw:?}"
        )));
    }
    Ok(bare.to_string())
}

fn has_known_host(s: &str, scheme: IdScheme) -> bool {
    let hosts: &[&str] = match scheme {
        IdScheme::Ror => &["ror.org/"],
        IdScheme::Wikidata => &["wikidata.org/"],
        IdScheme::OpenAlex => &["openalex.org/"],
    };
    hosts.iter().any(|h| s.contains(h))
}

/// Audit counters and human-readable decision lines for one index build.
#[derive(Debug, Default)]
pub struct BuildAudit {
    pub records_in: usize,
    pub links_by_ror: usize,
    pub links_by_wikidata: usize,
    pub links_by_domain: usize,
    pub groups: usize,
    pub multi_record_groups: usize,
    pub largest_group: usize,
    pub registry_only_groups: usize,
    pub excluded_no_ascii_name: usize,
    pub country_conflicts: usize,
    pub id_conflicts: usize,
    pub name_country_collapses: usize,
    pub orgs_out: usize,
    pub lines: Vec<String>,
}

impl BuildAudit {
    fn note(&mut self, line: String) {
        self.lines.push(line);
    }

    /// Render the audit log as text, summary first.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("# reference index build audit\n");
        out.push_str(&format!("records_in: {}\n", self.records_in));
        out.push_str(&format!(
            "links: ror={} wikidata={} domain_country={}\n",
            self.links_by_ror, self.links_by_wikidata, self.links_by_domain
        ));
        out.push_str(&format!(
            "groups: {} (multi-record {}, largest {})\n",
            self.groups, self.multi_record_groups, self.largest_group
        ));
        out.push_str(&format!(
            "registry_only_groups_skipped: {}\n",
            self.registry_only_groups
        ));
        out.push_str(&format!(
            "excluded_no_ascii_name: {}\n",
            self.excluded_no_ascii_name
        ));
        out.push_str(&format!("country_conflicts: {}\n", self.country_conflicts));
        out.push_str(&format!("id_conflicts: {}\n", self.id_conflicts));
        out.push_str(&format!(
            "name_country_collapses: {}\n",
            self.name_country_collapses
        ));
        out.push_str(&format!("orgs_out: {}\n", self.orgs_out));
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

/// Group records that refer to the same organization: same exact ROR ID,
/// same exact Wikidata ID, or same (registered domain, country) pair, with
/// transitive closure across all three keys. Groups partition the input and
/// are ordered by smallest member index.
pub fn link_records(records: &[SourceRecord]) -> Vec<Vec<usize>> {
    link_records_audited(records, &mut BuildAudit::default())
}

pub fn link_records_audited(records: &[SourceRecord], audit: &mut BuildAudit) -> Vec<Vec<usize>> {
    let n = records.len() as u32;
    let mut uf = UnionFind::new(n);

    let mut union_by_key = |keys: Vec<(String, u32)>| -> usize {
        let mut first_seen: FxHashMap<String, u32> = FxHashMap::default();
        let mut links = 0;
        for (key, idx) in keys {
            match first_seen.entry(key) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    uf.union(*e.get(), idx);
                    links += 1;
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(idx);
                }
            }
        }
        links
    };

    let ror_keys: Vec<(String, u32)> = records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.ror_id.clone().map(|id| (id, i as u32)))
        .collect();
    audit.links_by_ror = union_by_key(ror_keys);

    let wd_keys: Vec<(String, u32)> = records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.wikidata_id.clone().map(|id| (id, i as u32)))
        .collect();
    audit.links_by_wikidata = union_by_key(wd_keys);

    let domain_keys: Vec<(String, u32)> = records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let country = r.country_code.as_deref()?;
            let url = r.homepage_url.as_deref()?;
            let dom = domain::extract_registered_domain(url)?;
            Some((format!("{dom}\u{1f}{country}"), i as u32))
        })
        .collect();
    audit.links_by_domain = union_by_key(domain_keys);

    let groups: Vec<Vec<usize>> = uf
        .partition()
        .into_iter()
        .map(|g| g.into_iter().map(|i| i as usize).collect())
        .collect();
    audit.groups = groups.len();
    audit.multi_record_groups = groups.iter().filter(|g| g.len() > 1).count();
    audit.largest_group = groups.iter().map(Vec::len).max().unwrap_or(0);
    groups
}

/// Canonical-record preference: funder-dataset origin, then stable
/// identifiers (ROR, then Wikidata), then completeness of activity metadata
/// (count of non-missing numeric fields, larger works_count, smaller id).
fn source_preference(r: &SourceRecord) -> (u8, bool, bool, Reverse<u8>, Reverse<u64>, String) {
    let completeness = r.grants_count.is_some() as u8 + r.works_count.is_some() as u8;
    (
        r.source_dataset.rank(),
        r.ror_id.is_none(),
        r.wikidata_id.is_none(),
        Reverse(completeness),
        Reverse(r.works_count.unwrap_or(0)),
        r.raw_id.clone(),
    )
}

fn org_preference(o: &OrgRecord) -> (bool, bool, bool, Reverse<u8>, Reverse<u64>, String) {
    let completeness = o.grants_count.is_some() as u8 + o.works_count.is_some() as u8;
    (
        o.source != OrgSource::FunderId,
        o.ror_id.is_none(),
        o.wikidata_id.is_none(),
        Reverse(completeness),
        Reverse(o.works_count.unwrap_or(0)),
        o.canonical_id.clone(),
    )
}

fn first_some<'a, T, I: Iterator<Item = Option<&'a T>>>(iter: I) -> Option<T>
where
    T: Clone + 'a,
{
    iter.flatten().next().cloned()
}

/// Merge one linked group into a single canonical organization.
///
/// The canonical record is chosen by `source_preference` among the OpenAlex
/// members; registry records supplement identifiers, country, and name
/// variants but cannot be canonical. Returns `None` for registry-only groups
/// and for groups whose names all fail the ASCII filter.
pub fn collapse_group(group: &[&SourceRecord], audit: &mut BuildAudit) -> Option<OrgRecord> {
    let mut members: Vec<&SourceRecord> = group.to_vec();
    members.sort_by_key(|r| (r.source_dataset.rank(), r.raw_id.clone()));

    let canonical = members
        .iter()
        .filter(|r| r.source_dataset != SourceDataset::Registry)
        .min_by_key(|r| source_preference(r))
        .copied();
    let Some(canonical) = canonical else {
        audit.registry_only_groups += 1;
        return None;
    };

    // Conflicting metadata across linked records is logged, and the
    // canonical record's value wins.
    let countries: Vec<&str> = {
        let mut c: Vec<&str> = members
            .iter()
            .filter_map(|r| r.country_code.as_deref())
            .collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    if countries.len() > 1 {
        audit.country_conflicts += 1;
        audit.note(format!(
            "country conflict in group of {}: {:?} (kept {:?} from {})",
            members.len(),
            countries,
            canonical.country_code,
            canonical.raw_id
        ));
    }
    for (field, values) in [
        (
            "ror",
            members
                .iter()
                .filter_map(|r| r.ror_id.as_deref())
                .collect::<Vec<_>>(),
        ),
        (
            "wikidata",
            members
                .iter()
                .filter_map(|r| r.wikidata_id.as_deref())
                .collect::<Vec<_>>(),
        ),
    ] {
        let mut distinct = values;
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() > 1 {
            audit.id_conflicts += 1;
            audit.note(format!(
                "{field} conflict in group anchored by {}: {distinct:?}",
                canonical.raw_id
            ));
        }
    }

    let country = canonical
        .country_code
        .clone()
        .or_else(|| first_some(members.iter().map(|r| r.country_code.as_ref())));
    let ror = canonical
        .ror_id
        .clone()
        .or_else(|| first_some(members.iter().map(|r| r.ror_id.as_ref())));
    let wikidata = canonical
        .wikidata_id
        .clone()
        .or_else(|| first_some(members.iter().map(|r| r.wikidata_id.as_ref())));
    let homepage = canonical
        .homepage_url
        .clone()
        .or_else(|| first_some(members.iter().map(|r| r.homepage_url.as_ref())));
    let dom = homepage
        .as_deref()
        .and_then(domain::extract_registered_domain);

    let grants = members.iter().filter_map(|r| r.grants_count).max();
    let works = members.iter().filter_map(|r| r.works_count).max();

    // Display name: the canonical record's if it survives the ASCII filter,
    // else the first surviving name across members.
    let mut candidate_names: Vec<&str> = vec![canonical.display_name.as_str()];
    for m in &members {
        candidate_names.push(m.display_name.as_str());
        candidate_names.extend(m.alternate_titles.iter().map(String::as_str));
    }
    let display = candidate_names.iter().copied().find_map(valid_name);
    let Some(display) = display else {
        audit.excluded_no_ascii_name += 1;
        audit.note(format!(
            "excluded group anchored by {}: no ASCII name",
            canonical.raw_id
        ));
        return None;
    };
    if display != canonical.display_name.trim() {
        audit.note(format!(
            "display name for {} promoted to {display:?} (original failed ASCII filter)",
            canonical.raw_id
        ));
    }

    let mut titles: Vec<String> = Vec::new();
    for m in &members {
        titles.push(m.display_name.clone());
        titles.extend(m.alternate_titles.iter().cloned());
    }
    let acronyms: Vec<String> = members
        .iter()
        .flat_map(|m| m.acronyms.iter().cloned())
        .collect();

    let source = if canonical.source_dataset == SourceDataset::Funder {
        OrgSource::FunderId
    } else {
        OrgSource::InstitutionId
    };

    OrgRecord::assemble(
        canonical.raw_id.clone(),
        source,
        &display,
        &titles,
        &acronyms,
        country,
        ror,
        wikidata,
        dom,
        grants,
        works,
    )
    .ok()
}

/// Collapse residual duplicates: organizations sharing the same
/// (normalized name, country) merge into one record under the same
/// preference order used for linked groups.
pub fn collapse_duplicates(orgs: Vec<OrgRecord>, audit: &mut BuildAudit) -> Vec<OrgRecord> {
    let mut grouped: BTreeMap<(String, Option<String>), Vec<OrgRecord>> = BTreeMap::new();
    for org in orgs {
        grouped
            .entry((org.normalized_name.clone(), org.country_code.clone()))
            .or_default()
            .push(org);
    }
    let mut out = Vec::with_capacity(grouped.len());
    for ((name, country), mut group) in grouped {
        if group.len() == 1 {
            out.push(group.pop().unwrap());
            continue;
        }
        audit.name_country_collapses += 1;
        group.sort_by_key(org_preference);
        audit.note(format!(
            "collapsed {} records named {name:?} ({country:?}) into {}",
            group.len(),
            group[0].canonical_id
        ));
        let canonical = group[0].clone();
        let titles: Vec<String> = group
            .iter()
            .flat_map(|o| {
                std::iter::once(o.display_name.clone()).chain(o.alternate_titles.iter().cloned())
            })
            .collect();
        let acronyms: Vec<String> = group.iter().flat_map(|o| o.acronyms.clone()).collect();
        let merged = OrgRecord::assemble(
            canonical.canonical_id.clone(),
            canonical.source,
            &canonical.display_name,
            &titles,
            &acronyms,
            canonical.country_code.clone(),
            first_some(group.iter().map(|o| o.ror_id.as_ref())),
            first_some(group.iter().map(|o| o.wikidata_id.as_ref())),
            first_some(group.iter().map(|o| o.domain.as_ref())),
            group.iter().filter_map(|o| o.grants_count).max(),
            group.iter().filter_map(|o| o.works_count).max(),
        )
        .expect("merged record keeps the canonical display name");
        out.push(merged);
    }
    out.sort_by(|a, b| a.canonical_id.cmp(&b.canonical_id));
    out
}

/// Full reference build: link, merge each group, collapse residual
/// duplicates. Output is sorted by canonical id and independent of the input
/// record order.
pub fn build_reference(records: &[SourceRecord]) -> (Vec<OrgRecord>, BuildAudit) {
    let mut audit = BuildAudit::default();
    audit.records_in = records.len();
    let groups = link_records_audited(records, &mut audit);
    let mut orgs = Vec::new();
    for group in &groups {
        let members: Vec<&SourceRecord> = group.iter().map(|&i| &records[i]).collect();
        if let Some(org) = collapse_group(&members, &mut audit) {
            orgs.push(org);
        }
    }
    let orgs = collapse_duplicates(orgs, &mut audit);
    audit.orgs_out = orgs.len();
    (orgs, audit)
}

/// Immutable lookup structure over canonical organizations.
///
/// Safe to share across threads once built; nothing mutates after
/// construction.
pub struct ReferenceIndex {
    orgs: Vec<OrgRecord>,
    by_normalized_name: FxHashMap<String, Vec<u32>>,
    by_alt_name: FxHashMap<String, Vec<u32>>,
    by_acronym: FxHashMap<String, Vec<u32>>,
    by_ror: FxHashMap<String, u32>,
    by_canonical_id: FxHashMap<String, u32>,
    /// Unique normalized names (display + alternates) with their owning
    /// organizations, sorted by (length, name).
    unique_names: Vec<(String, Vec<u32>)>,
    /// Aho-Corasick automaton over `unique_names`, pattern i = name i.
    automaton: AhoCorasick,
    warnings: Vec<String>,
}

impl ReferenceIndex {
    /// Build the index. Rejects duplicate canonical ids; all lookups are
    /// keyed on normalized name forms, multimap values sorted by canonical
    /// id.
    pub fn build(mut orgs: Vec<OrgRecord>) -> Result<ReferenceIndex> {
        orgs.sort_by(|a, b| a.canonical_id.cmp(&b.canonical_id));
        let mut warnings = Vec::new();

        let mut by_canonical_id = FxHashMap::default();
        for (idx, org) in orgs.iter().enumerate() {
            if by_canonical_id
                .insert(org.canonical_id.clone(), idx as u32)
                .is_some()
            {
                return Err(Error::InvalidInput(format!(
                    "duplicate canonical_id {}",
                    org.canonical_id
                )));
            }
        }

        let mut by_normalized_name: FxHashMap<String, Vec<u32>> = FxHashMap::default();
        let mut by_alt_name: FxHashMap<String, Vec<u32>> = FxHashMap::default();
        let mut by_acronym: FxHashMap<String, Vec<u32>> = FxHashMap::default();
        let mut by_ror: FxHashMap<String, u32> = FxHashMap::default();
        let mut name_owners: BTreeMap<(usize, String), Vec<u32>> = BTreeMap::new();

        for (idx, org) in orgs.iter().enumerate() {
            let idx = idx as u32;
            let display_key = normalize_string(&org.display_name).map_err(|_| {
                Error::InvalidInput(format!(
                    "organization {} has an unnormalizable display name",
                    org.canonical_id
                ))
            })?;
            by_normalized_name
                .entry(display_key.clone())
                .or_default()
                .push(idx);
            name_owners
                .entry((display_key.len(), display_key))
                .or_default()
                .push(idx);

            for alt in &org.alternate_titles {
                let Ok(key) = normalize_string(alt) else {
                    continue;
                };
                let alt_ids = by_alt_name.entry(key.clone()).or_default();
                if !alt_ids.contains(&idx) {
                    alt_ids.push(idx);
                }
                let owners = name_owners.entry((key.len(), key)).or_default();
                if !owners.contains(&idx) {
                    owners.push(idx);
                }
            }

            for acr in &org.acronyms {
                if acr.len() < 2 {
                    continue;
                }
                let key = acr.to_ascii_lowercase();
                let ids = by_acronym.entry(key).or_default();
                if !ids.contains(&idx) {
                    ids.push(idx);
                }
            }

            if let Some(ror) = &org.ror_id {
                if let Some(&prev) = by_ror.get(ror) {
                    warnings.push(format!(
                        "ror {ror} owned by both {} and {}; keeping the former",
                        orgs[prev as usize].canonical_id, org.canonical_id
                    ));
                } else {
                    by_ror.insert(ror.clone(), idx);
                }
            }
        }

        // Values were inserted in ascending org index, which is ascending
        // canonical id after the sort above.
        let unique_names: Vec<(String, Vec<u32>)> = name_owners
            .into_iter()
            .map(|((_, name), ids)| (name, ids))
            .collect();
        let automaton = AhoCorasick::new(unique_names.iter().map(|(n, _)| n.as_str()))
            .map_err(|e| Error::InvalidInput(format!("cannot build name automaton: {e}")))?;

        Ok(ReferenceIndex {
            orgs,
            by_normalized_name,
            by_alt_name,
            by_acronym,
            by_ror,
            by_canonical_id,
            unique_names,
            automaton,
            warnings,
        })
    }

    pub fn len(&self) -> usize {
        self.orgs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orgs.is_empty()
    }

    pub fn orgs(&self) -> &[OrgRecord] {
        &self.orgs
    }

    pub fn org(&self, idx: u32) -> &OrgRecord {
        &self.orgs[idx as usize]
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn exact_name_orgs(&self, normalized: &str) -> &[u32] {
        self.by_normalized_name
            .get(normalized)
            .map_or(&[], Vec::as_slice)
    }

    pub fn alt_name_orgs(&self, normalized: &str) -> &[u32] {
        self.by_alt_name.get(normalized).map_or(&[], Vec::as_slice)
    }

    pub fn acronym_orgs(&self, acronym_lower: &str) -> &[u32] {
        self.by_acronym
            .get(acronym_lower)
            .map_or(&[], Vec::as_slice)
    }

    pub fn by_ror(&self, ror: &str) -> Option<&OrgRecord> {
        self.by_ror.get(ror).map(|&i| self.org(i))
    }

    pub fn by_canonical_id(&self, id: &str) -> Option<&OrgRecord> {
        self.by_canonical_id.get(id).map(|&i| self.org(i))
    }

    pub fn org_index(&self, id: &str) -> Option<u32> {
        self.by_canonical_id.get(id).copied()
    }

    /// Every (normalized name, organization) pair in the index: display
    /// names and alternate titles alike.
    pub fn all_names(&self) -> impl Iterator<Item = (&str, &OrgRecord)> {
        self.unique_names
            .iter()
            .flat_map(move |(name, ids)| ids.iter().map(move |&i| (name.as_str(), self.org(i))))
    }

    /// Unique normalized names with their owning org indices.
    pub fn unique_names(&self) -> &[(String, Vec<u32>)] {
        &self.unique_names
    }

    /// Unique names whose length lies in `[min_len, max_len]`.
    pub fn names_with_len_between(&self, min_len: usize, max_len: usize) -> &[(String, Vec<u32>)] {
        let lo = self.unique_names.partition_point(|(n, _)| n.len() < min_len);
        let hi = self
            .unique_names
            .partition_point(|(n, _)| n.len() <= max_len);
        &self.unique_names[lo..hi]
    }

    /// All occurrences of reference names inside `text`, as
    /// (pattern id, start, end) byte spans, overlapping included.
    pub fn names_contained_in<'a>(
        &'a self,
        text: &'a str,
    ) -> impl Iterator<Item = (usize, usize, usize)> + 'a {
        self.automaton
            .find_overlapping_iter(text)
            .map(|m| (m.pattern().as_usize(), m.start(), m.end()))
    }

    pub fn pattern_name(&self, pattern: usize) -> &str {
        &self.unique_names[pattern].0
    }

    pub fn pattern_orgs(&self, pattern: usize) -> &[u32] {
        &self.unique_names[pattern].1
    }
}

impl std::fmt::Debug for ReferenceIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReferenceIndex")
            .field("orgs", &self.orgs.len())
            .field("unique_names", &self.unique_names.len())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(
        dataset: SourceDataset,
        raw_id: &str,
        ror: Option<&str>,
        wikidata: Option<&str>,
        name: &str,
        country: Option<&str>,
        url: Option<&str>,
    ) -> SourceRecord {
        SourceRecord {
            source_dataset: dataset,
            raw_id: raw_id.to_string(),
            ror_id: ror.map(String::from),
            wikidata_id: wikidata.map(String::from),
            display_name: name.to_string(),
            alternate_titles: Vec::new(),
            acronyms: Vec::new(),
            country_code: country.map(String::from),
            homepage_url: url.map(String::from),
            grants_count: None,
            works_count: None,
        }
    }

    #[test]
    fn canonicalize_strips_url_prefixes() {
        assert_eq!(
            canonicalize_id("https://ror.org/04aj4c181", IdScheme::Ror).unwrap(),
            "04aj4c181"
        );
        assert_eq!(
            canonicalize_id("04aj4c181", IdScheme::Ror).unwrap(),
            "04aj4c181"
        );
        assert_eq!(
            canonicalize_id("  Q1967606 ", IdScheme::Wikidata).unwrap(),
            "Q1967606"
        );
        assert_eq!(
            canonicalize_id("https://www.wikidata.org/wiki/Q42", IdScheme::Wikidata).unwrap(),
            "Q42"
        );
        assert_eq!(
            canonicalize_id("https://openalex.org/F4320306076", IdScheme::OpenAlex).unwrap(),
            "F4320306076"
        );
        assert!(canonicalize_id("  ", IdScheme::Ror).is_err());
        assert!(canonicalize_id("https://ror.org/", IdScheme::Ror).is_err());
    }

    #[test]
    fn canonicalize_is_idempotent() {
        for (raw, scheme) in [
            ("https://ror.org/02mhbdp94", IdScheme::Ror),
            ("http://www.wikidata.org/entity/Q937", IdScheme::Wikidata),
        ] {
            let once = canonicalize_id(raw, scheme).unwrap();
            let twice = canonicalize_id(&once, scheme).unwrap();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn linkage_by_exact_ror() {
        let records = vec![
            record(SourceDataset::Funder, "F1", Some("02mhbdp94"), None, "A", None, None),
            record(SourceDataset::Institution, "I1", Some("02mhbdp94"), None, "B", None, None),
        ];
        let groups = link_records(&records);
        assert_eq!(groups, vec![vec![0, 1]]);
    }

    #[test]
    fn linkage_is_transitive_across_keys() {
        let records = vec![
            record(SourceDataset::Funder, "F1", Some("X"), None, "A", None, None),
            record(SourceDataset::Institution, "I1", Some("X"), Some("Q1"), "B", None, None),
            record(SourceDataset::Registry, "R1", None, Some("Q1"), "C", None, None),
        ];
        let groups = link_records(&records);
        assert_eq!(groups, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn domain_linkage_requires_country_equality() {
        let records = vec![
            record(SourceDataset::Funder, "F1", None, None, "A", Some("DE"), Some("https://www.dfg.de")),
            record(SourceDataset::Institution, "I1", None, None, "B", Some("AT"), Some("https://dfg.de/x")),
        ];
        let groups = link_records(&records);
        assert_eq!(groups.len(), 2);

        let records = vec![
            record(SourceDataset::Funder, "F1", None, None, "A", Some("DE"), Some("https://www.dfg.de")),
            record(SourceDataset::Institution, "I1", None, None, "B", Some("DE"), Some("https://dfg.de/x")),
        ];
        assert_eq!(link_records(&records).len(), 1);
    }

    #[test]
    fn collapse_prefers_funder_and_takes_max_counts() {
        let mut funder = record(SourceDataset::Funder, "F1", None, None, "NIH", Some("US"), None);
        funder.grants_count = Some(500);
        let mut inst = record(SourceDataset::Institution, "I1", None, None, "NIH", Some("US"), None);
        inst.works_count = Some(90_000);
        let mut audit = BuildAudit::default();
        let orgs = collapse_duplicates(
            vec![
                collapse_group(&[&funder], &mut audit).unwrap(),
                collapse_group(&[&inst], &mut audit).unwrap(),
            ],
            &mut audit,
        );
        assert_eq!(orgs.len(), 1);
        let org = &orgs[0];
        assert_eq!(org.source, OrgSource::FunderId);
        assert_eq!(org.canonical_id, "F1");
        assert_eq!(org.grants_count, Some(500));
        assert_eq!(org.works_count, Some(90_000));
    }

    #[test]
    fn single_record_group_is_identity() {
        let mut rec = record(SourceDataset::Funder, "F9", Some("abc"), None, "Wellcome Trust", Some("GB"), None);
        rec.alternate_titles = vec!["The Wellcome Trust".to_string()];
        let mut audit = BuildAudit::default();
        let org = collapse_group(&[&rec], &mut audit).unwrap();
        assert_eq!(org.display_name, "Wellcome Trust");
        assert_eq!(org.alternate_titles, vec!["The Wellcome Trust".to_string()]);
        assert_eq!(org.ror_id.as_deref(), Some("abc"));
    }

    #[test]
    fn non_ascii_only_records_are_excluded() {
        let rec = record(SourceDataset::Funder, "F2", None, None, "Universität X", None, None);
        let mut audit = BuildAudit::default();
        assert!(collapse_group(&[&rec], &mut audit).is_none());
        assert_eq!(audit.excluded_no_ascii_name, 1);
    }

    #[test]
    fn non_ascii_display_promotes_ascii_alternate() {
        let mut rec = record(SourceDataset::Funder, "F3", None, None, "Universität Wien", None, None);
        rec.alternate_titles = vec!["University of Vienna".to_string()];
        let mut audit = BuildAudit::default();
        let org = collapse_group(&[&rec], &mut audit).unwrap();
        assert_eq!(org.display_name, "University of Vienna");
        assert!(org.alternate_titles.is_empty());
    }

    #[test]
    fn registry_only_groups_are_skipped() {
        let rec = record(SourceDataset::Registry, "R1", Some("x"), None, "Some Org", None, None);
        let mut audit = BuildAudit::default();
        assert!(collapse_group(&[&rec], &mut audit).is_none());
        assert_eq!(audit.registry_only_groups, 1);
    }

    #[test]
    fn acronyms_appear_standalone_and_in_alternates() {
        let org = OrgRecord::assemble(
            "F1".to_string(),
            OrgSource::FunderId,
            "National Science Foundation",
            &["US National Science Foundation".to_string()],
            &["nsf".to_string()],
            Some("US".to_string()),
            None,
            None,
            None,
            None,
            None,
        )
        .unwrap();
        assert_eq!(org.acronyms, vec!["NSF".to_string()]);
        assert!(org.alternate_titles.contains(&"NSF".to_string()));
    }

    #[test]
    fn index_lookups() {
        let org = OrgRecord::assemble(
            "F1".to_string(),
            OrgSource::FunderId,
            "National Science Foundation",
            &[],
            &["NSF".to_string()],
            Some("US".to_string()),
            Some("021nxhr62".to_string()),
            None,
            None,
            None,
            None,
        )
        .unwrap();
        let index = ReferenceIndex::build(vec![org]).unwrap();
        assert_eq!(index.exact_name_orgs("national science foundation"), &[0]);
        assert_eq!(index.acronym_orgs("nsf"), &[0]);
        assert_eq!(index.alt_name_orgs("nsf"), &[0]);
        assert!(index.by_ror("021nxhr62").is_some());
        assert!(index.exact_name_orgs("unknownstring").is_empty());
    }

    #[test]
    fn index_rejects_duplicate_canonical_id() {
        let org = |id: &str| {
            OrgRecord::assemble(
                id.to_string(),
                OrgSource::FunderId,
                "Org",
                &[],
                &[],
                None,
                None,
                None,
                None,
                None,
                None,
            )
            .unwrap()
        };
        assert!(ReferenceIndex::build(vec![org("F1"), org("F1")]).is_err());
    }

    #[test]
    fn empty_index_lookups_are_absent() {
        let index = ReferenceIndex::build(Vec::new()).unwrap();
        assert!(index.is_empty());
        assert!(index.exact_name_orgs("anything").is_empty());
        assert!(index.by_canonical_id("F1").is_none());
    }

    #[test]
    fn shared_names_return_both_orgs() {
        let org = |id: &str, country: &str| {
            OrgRecord::assemble(
                id.to_string(),
                OrgSource::FunderId,
                "Ministry of Health",
                &[],
                &[],
                Some(country.to_string()),
                None,
                None,
                None,
                None,
                None,
            )
            .unwrap()
        };
        let index = ReferenceIndex::build(vec![org("F7", "CN"), org("F6", "BR")]).unwrap();
        assert_eq!(index.exact_name_orgs("ministry of health"), &[0, 1]);
        assert_eq!(index.org(0).canonical_id, "F6");
    }
}
