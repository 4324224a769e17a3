//! The ordered rule cascade that links name-variant clusters to reference
//! organizations, plus match propagation within clusters.
//!
//! Rules fire in a fixed order: exact name, alternate name, prefix/suffix
//! containment, interior substring containment, acronym. Containment rules
//! require the shorter string to cover at least half the characters of the
//! longer one (ratio configurable). A cluster is matched by the first
//! (member, rule) pair that produces candidates, in descending member count
//! order, and every plausible candidate is retained.

pub mod annotations;
pub mod fallback;
pub mod ner;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::{trial_order, Cluster};
use crate::normalize::FunderString;
use crate::reference::{OrgRecord, OrgSource, ReferenceIndex};

/// Which pipeline rule produced a string-organization binding. The closed
/// label vocabulary follows the published dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchType {
    NameExact,
    AltNameExact,
    PrefixSuffix,
    Substring,
    Acronym,
    DocumentClustering,
    ManualAnnotation,
    JaccardFallback,
    Unmatched,
}

impl MatchType {
    pub const ALL: [MatchType; 9] = [
        MatchType::NameExact,
        MatchType::AltNameExact,
        MatchType::PrefixSuffix,
        MatchType::Substring,
        MatchType::Acronym,
        MatchType::DocumentClustering,
        MatchType::ManualAnnotation,
        MatchType::JaccardFallback,
        MatchType::Unmatched,
    ];

    /// Label as written into the dataset's `match_type` column; empty for
    /// unmatched strings.
    pub fn dataset_label(self) -> &'static str {
        match self {
            MatchType::NameExact => "Name (Exact)",
            MatchType::AltNameExact => "Alternative names (Exact)",
            MatchType::PrefixSuffix => "Prefix or suffix Match",
            MatchType::Substring => "Substring Match",
            MatchType::Acronym => "Acronym Match",
            MatchType::DocumentClustering => "Document Clustering",
            MatchType::ManualAnnotation => "Manual Annotation",
            MatchType::JaccardFallback => "Jaccard Fallback",
            MatchType::Unmatched => "",
        }
    }

    /// Label used in count reports, where unmatched strings get a named row.
    pub fn report_label(self) -> &'static str {
        match self {
            MatchType::Unmatched => "Not Matched (NaN)",
            other => other.dataset_label(),
        }
    }

    /// Inverse of `dataset_label`; empty or missing labels are unmatched.
    pub fn from_dataset_label(label: &str) -> Option<MatchType> {
        MatchType::ALL
            .into_iter()
            .find(|t| t.dataset_label() == label)
    }
}

/// One candidate organization for a funder string, with the evidence that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub canonical_id: String,
    pub ror_id: Option<String>,
    pub display_name: String,
    pub source: OrgSource,
    /// Reference name (or acronym) that fired the rule.
    pub matched_name: Option<String>,
    /// Containment coverage len(shorter)/len(longer) for prefix/suffix and
    /// substring matches.
    pub coverage: Option<f64>,
    /// Estimated Jaccard similarity for fallback matches.
    pub similarity: Option<f64>,
}

impl Candidate {
    fn from_org(org: &OrgRecord) -> Candidate {
        Candidate {
            canonical_id: org.canonical_id.clone(),
            ror_id: org.ror_id.clone(),
            display_name: org.display_name.clone(),
            source: org.source,
            matched_name: None,
            coverage: None,
            similarity: None,
        }
    }
}

/// Funder string -> candidate organizations -> firing rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub string_id: u32,
    pub candidates: Vec<Candidate>,
    pub match_type: MatchType,
}

impl MatchResult {
    pub fn unmatched(string_id: u32) -> MatchResult {
        MatchResult {
            string_id,
            candidates: Vec::new(),
            match_type: MatchType::Unmatched,
        }
    }

    pub fn is_matched(&self) -> bool {
        self.match_type != MatchType::Unmatched
    }
}

/// Knobs for the cascade rules.
#[derive(Debug, Clone, Copy)]
pub struct CascadeOptions {
    /// Minimum len(shorter)/len(longer) for containment matches.
    pub coverage_ratio: f64,
    /// Whether a funder string that is itself a bare 2-6 letter token is
    /// compared against reference acronyms.
    pub bare_token_acronym: bool,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        CascadeOptions {
            coverage_ratio: 0.5,
            bare_token_acronym: true,
        }
    }
}

fn collect(index: &ReferenceIndex, ids: &[u32], matched_name: &str) -> Vec<Candidate> {
    ids.iter()
        .map(|&i| {
            let mut c = Candidate::from_org(index.org(i));
            c.matched_name = Some(matched_name.to_string());
            c
        })
        .collect()
}

/// Organizations whose normalized display name equals `name`.
pub fn match_exact_name(name: &str, index: &ReferenceIndex) -> Vec<Candidate> {
    collect(index, index.exact_name_orgs(name), name)
}

/// Organizations with `name` among their normalized alternate titles.
pub fn match_alt_name(name: &str, index: &ReferenceIndex) -> Vec<Candidate> {
    collect(index, index.alt_name_orgs(name), name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Position {
    PrefixOrSuffix,
    Interior,
}

struct ContainmentHit {
    org: u32,
    name: String,
    coverage: f64,
    position: Position,
}

/// All containment relations between `name` and reference names, in both
/// directions, that satisfy the coverage ratio.
fn containment_hits(name: &str, index: &ReferenceIndex, ratio: f64) -> Vec<ContainmentHit> {
    let lf = name.len();
    let mut hits = Vec::new();
    if lf == 0 {
        return hits;
    }

    // Reference name inside the funder string.
    for (pattern, start, end) in index.names_contained_in(name) {
        let lt = end - start;
        let coverage = lt as f64 / lf as f64;
        if coverage < ratio {
            continue;
        }
        let position = if start == 0 || end == lf {
            Position::PrefixOrSuffix
        } else {
            Position::Interior
        };
        for &org in index.pattern_orgs(pattern) {
            hits.push(ContainmentHit {
                org,
                name: index.pattern_name(pattern).to_string(),
                coverage,
                position,
            });
        }
    }

    // Funder string inside a reference name. The ratio bounds the name
    // length to [lf, lf/ratio].
    let max_len = (lf as f64 / ratio).floor() as usize;
    for (t, orgs) in index.names_with_len_between(lf, max_len) {
        let Some(pos) = t.find(name) else { continue };
        let coverage = lf as f64 / t.len() as f64;
        if coverage < ratio {
            continue;
        }
        let position = if pos == 0 || pos + lf == t.len() {
            Position::PrefixOrSuffix
        } else {
            Position::Interior
        };
        hits.push(ContainmentHit {
            org: orgs[0],
            name: t.clone(),
            coverage,
            position,
        });
        for &org in &orgs[1..] {
            hits.push(ContainmentHit {
                org,
                name: t.clone(),
                coverage,
                position,
            });
        }
    }
    hits
}

fn candidates_from_hits(
    index: &ReferenceIndex,
    hits: impl Iterator<Item = ContainmentHit>,
) -> Vec<Candidate> {
    // One candidate per organization; keep the highest-coverage evidence.
    let mut best: BTreeMap<String, (f64, String, u32)> = BTreeMap::new();
    for hit in hits {
        let id = index.org(hit.org).canonical_id.clone();
        match best.get(&id) {
            Some((cov, _, _)) if *cov >= hit.coverage => {}
            _ => {
                best.insert(id, (hit.coverage, hit.name, hit.org));
            }
        }
    }
    best.into_iter()
        .map(|(_, (coverage, name, org))| {
            let mut c = Candidate::from_org(index.org(org));
            c.matched_name = Some(name);
            c.coverage = Some(coverage);
            c
        })
        .collect()
}

/// Containment matches where one string is a prefix or suffix of the other
/// and the shorter covers at least `ratio` of the longer, in either
/// direction.
pub fn match_prefix_suffix(name: &str, index: &ReferenceIndex, ratio: f64) -> Vec<Candidate> {
    candidates_from_hits(
        index,
        containment_hits(name, index, ratio)
            .into_iter()
            .filter(|h| h.position == Position::PrefixOrSuffix),
    )
}

/// Containment matches at any position with the same coverage requirement.
/// Runs after `match_prefix_suffix` in the cascade, so any hit found here is
/// effectively an interior containment.
pub fn match_substring(name: &str, index: &ReferenceIndex, ratio: f64) -> Vec<Candidate> {
    candidates_from_hits(index, containment_hits(name, index, ratio).into_iter())
}

/// Acronym comparison: the funder's extracted acronym against reference
/// acronyms (case-insensitive), and optionally the whole funder string when
/// it is a single bare token of 2-6 letters. Single letters never match.
pub fn match_acronym(
    funder: &FunderString,
    index: &ReferenceIndex,
    bare_token_acronym: bool,
) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    let mut add = (|acronym: &str, out: &mut Vec<Candidate>, seen: &mut Vec<String>| {
        let key = acronym.to_ascii_lowercase();
        for &i in index.acronym_orgs(&key) {
            let org = index.org(i);
            if seen.contains(&org.canonical_id) {
                continue;
            }
            seen.push(org.canonical_id.clone());
            let mut c = Candidate::from_org(org);
            c.matched_name = Some(acronym.to_ascii_uppercase());
            out.push(c);
        }
    });
    if let Some(acr) = &funder.extracted_acronym {
        if acr.len() >= 2 {
            add(acr, &mut out, &mut seen);
        }
    }
    if bare_token_acronym {
        let token = funder.normalized.as_str();
        if (2..=6).contains(&token.len())
            && !token.contains(' ')
            && token.bytes().all(|b| b.is_ascii_alphabetic())
        {
            add(token, &mut out, &mut seen);
        }
    }
    out.sort_by(|a, b| a.canonical_id.cmp(&b.canonical_id));
    out
}

/// Run the fixed-order cascade for a single funder string. Returns the first
/// rule that produced candidates.
pub fn run_cascade(
    funder: &FunderString,
    index: &ReferenceIndex,
    opts: &CascadeOptions,
) -> Option<(Vec<Candidate>, MatchType)> {
    let name = funder.normalized.as_str();
    let exact = match_exact_name(name, index);
    if !exact.is_empty() {
        return Some((exact, MatchType::NameExact));
    }
    let alt = match_alt_name(name, index);
    if !alt.is_empty() {
        return Some((alt, MatchType::AltNameExact));
    }
    // Both containment stages share one scan.
    let hits = containment_hits(name, index, opts.coverage_ratio);
    let prefix_suffix = candidates_from_hits(
        index,
        hits.iter()
            .filter(|h| h.position == Position::PrefixOrSuffix)
            .map(|h| ContainmentHit {
                org: h.org,
                name: h.name.clone(),
                coverage: h.coverage,
                position: h.position,
            }),
    );
    if !prefix_suffix.is_empty() {
        return Some((prefix_suffix, MatchType::PrefixSuffix));
    }
    let substring = candidates_from_hits(index, hits.into_iter());
    if !substring.is_empty() {
        return Some((substring, MatchType::Substring));
    }
    let acronym = match_acronym(funder, index, opts.bare_token_acronym);
    if !acronym.is_empty() {
        return Some((acronym, MatchType::Acronym));
    }
    None
}

/// Outcome of matching one cluster.
#[derive(Debug, Clone)]
pub struct ClusterMatch {
    pub candidates: Vec<Candidate>,
    pub match_type: MatchType,
    /// The member whose cascade produced the match.
    pub matched_member: Option<u32>,
    /// Intra-cluster conflict warnings: members whose own cascade match
    /// names a disjoint set of organizations.
    pub conflicts: Vec<String>,
}

impl ClusterMatch {
    pub fn unmatched() -> ClusterMatch {
        ClusterMatch {
            candidates: Vec::new(),
            match_type: MatchType::Unmatched,
            matched_member: None,
            conflicts: Vec::new(),
        }
    }
}

/// Try cluster members in descending count order; the first member-rule pair
/// producing candidates matches the cluster. Members disagreeing with the
/// winner are reported as conflicts, and the winner stands.
pub fn match_cluster(
    cluster: &Cluster,
    strings: &[FunderString],
    index: &ReferenceIndex,
    opts: &CascadeOptions,
) -> ClusterMatch {
    let order = trial_order(cluster, strings);
    let mut winner: Option<(u32, Vec<Candidate>, MatchType)> = None;
    let mut conflicts = Vec::new();
    for member in order {
        let funder = &strings[member as usize];
        let Some((candidates, match_type)) = run_cascade(funder, index, opts) else {
            continue;
        };
        match &winner {
            None => winner = Some((member, candidates, match_type)),
            Some((win_member, win_candidates, _)) => {
                let disjoint = candidates.iter().all(|c| {
                    !win_candidates
                        .iter()
                        .any(|w| w.canonical_id == c.canonical_id)
                });
                if disjoint {
                    conflicts.push(format!(
                        "cluster {}: member {} ({:?}) matches {:?}, but member {} won with {:?}",
                        cluster.cluster_id,
                        member,
                        funder.raw,
                        candidates
                            .iter()
                            .map(|c| c.canonical_id.as_str())
                            .collect::<Vec<_>>(),
                        win_member,
                        win_candidates
                            .iter()
                            .map(|c| c.canonical_id.as_str())
                            .collect::<Vec<_>>(),
                    ));
                }
            }
        }
    }
    match winner {
        Some((member, candidates, match_type)) => ClusterMatch {
            candidates,
            match_type,
            matched_member: Some(member),
            conflicts,
        },
        None => ClusterMatch::unmatched(),
    }
}

/// Spread a cluster match to every member: the matched member keeps the
/// firing rule's type, all other members receive the same candidates as
/// document-clustering matches. Unmatched clusters yield unmatched members.
pub fn propagate(cluster: &Cluster, m: &ClusterMatch) -> Vec<MatchResult> {
    cluster
        .member_ids
        .iter()
        .map(|&id| match m.matched_member {
            Some(winner) => MatchResult {
                string_id: id,
                candidates: m.candidates.clone(),
                match_type: if id == winner {
                    m.match_type
                } else {
                    MatchType::DocumentClustering
                },
            },
            None => MatchResult::unmatched(id),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::OrgRecord;

    fn org(id: &str, name: &str, alts: &[&str], acronyms: &[&str]) -> OrgRecord {
        OrgRecord::assemble(
            id.to_string(),
            OrgSource::FunderId,
            name,
            &alts.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            &acronyms.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            None,
            None,
            None,
            None,
            None,
            None,
        )
        .unwrap()
    }

    fn nsf_index() -> ReferenceIndex {
        ReferenceIndex::build(vec![
            org(
                "F1",
                "National Science Foundation",
                &["US National Science Foundation"],
                &["NSF"],
            ),
            org("F3", "Deutsche Forschungsgemeinschaft", &[], &["DFG"]),
        ])
        .unwrap()
    }

    fn funder(raw: &str) -> FunderString {
        FunderString::new(0, raw, 1).unwrap()
    }

    #[test]
    fn exact_name_matches() {
        let index = nsf_index();
        assert_eq!(match_exact_name("national science foundation", &index).len(), 1);
        assert!(match_exact_name("unknownstring", &index).is_empty());
    }

    #[test]
    fn exact_name_retains_all_orgs() {
        let index = ReferenceIndex::build(vec![
            org("F6", "Ministry of Health", &[], &[]),
            org("F7", "Ministry of Health", &[], &[]),
        ])
        .unwrap();
        let cands = match_exact_name("ministry of health", &index);
        assert_eq!(cands.len(), 2);
    }

    #[test]
    fn alt_name_matches() {
        let index = nsf_index();
        let cands = match_alt_name("us national science foundation", &index);
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].canonical_id, "F1");
        assert!(match_alt_name("nothing", &index).is_empty());
    }

    #[test]
    fn prefix_suffix_requires_half_coverage() {
        let index = nsf_index();
        // 27/36 = 0.75: reference name is a prefix.
        let cands = match_prefix_suffix("national science foundation of china", &index, 0.5);
        assert_eq!(cands.len(), 1);
        assert!((cands[0].coverage.unwrap() - 27.0 / 36.0).abs() < 1e-12);
        // "nsf" as prefix covers 3/14 < 0.5.
        assert!(match_prefix_suffix("nsf usa office", &index, 0.5).is_empty());
        // Equal strings pass trivially at ratio 1.0.
        let equal = match_prefix_suffix("national science foundation", &index, 0.5);
        assert_eq!(equal[0].coverage, Some(1.0));
    }

    #[test]
    fn substring_requires_half_coverage() {
        let index = nsf_index();
        let cands = match_substring("the national science foundation grant", &index, 0.5);
        assert_eq!(cands.len(), 1);
        assert!((cands[0].coverage.unwrap() - 27.0 / 37.0).abs() < 1e-12);
        // "foundation" is not a reference name; and a short fragment of a
        // reference name fails coverage in the reverse direction.
        assert!(match_substring("foundation", &index, 0.5).is_empty());
        assert!(match_substring("completely unrelated", &index, 0.5).is_empty());
    }

    #[test]
    fn funder_string_inside_reference_name() {
        let index = nsf_index();
        // "science foundation" (18) inside "national science foundation"
        // (27): 18/27 = 0.67, interior position.
        let cands = match_substring("science foundation", &index, 0.5);
        assert_eq!(cands.len(), 1);
        assert!(match_prefix_suffix("science foundation", &index, 0.5).is_empty());
    }

    #[test]
    fn acronym_from_extraction_and_bare_token() {
        let index = nsf_index();
        let with_parens = funder("National Science Foundation (NSF)");
        let cands = match_acronym(&with_parens, &index, true);
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].canonical_id, "F1");

        let bare = funder("dfg");
        let cands = match_acronym(&bare, &index, true);
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].canonical_id, "F3");
        assert!(match_acronym(&bare, &index, false).is_empty());

        assert!(match_acronym(&funder("no acronym here"), &index, true).is_empty());
    }

    #[test]
    fn cascade_precedence_exact_beats_later_rules() {
        // The string equals one org's display name and another org's
        // alternate title: the exact rule fires and wins.
        let index = ReferenceIndex::build(vec![
            org("F1", "National Science Foundation", &[], &[]),
            org("F2", "Other Org", &["National Science Foundation"], &[]),
        ])
        .unwrap();
        let (cands, mt) = run_cascade(&funder("National Science Foundation"), &index, &CascadeOptions::default()).unwrap();
        assert_eq!(mt, MatchType::NameExact);
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].canonical_id, "F1");
    }

    #[test]
    fn cluster_match_uses_trial_order_and_propagates() {
        let index = nsf_index();
        let strings = vec![
            FunderString::new(0, "national science foundation", 10).unwrap(),
            FunderString::new(1, "national science fundation", 2).unwrap(),
        ];
        let cluster = Cluster {
            cluster_id: 0,
            member_ids: vec![0, 1],
            representative_id: 0,
        };
        let m = match_cluster(&cluster, &strings, &index, &CascadeOptions::default());
        assert_eq!(m.match_type, MatchType::NameExact);
        assert_eq!(m.matched_member, Some(0));
        let results = propagate(&cluster, &m);
        assert_eq!(results[0].match_type, MatchType::NameExact);
        assert_eq!(results[1].match_type, MatchType::DocumentClustering);
        assert_eq!(results[1].candidates, results[0].candidates);
    }

    #[test]
    fn cluster_match_can_fire_on_second_member() {
        let index = nsf_index();
        let strings = vec![
            FunderString::new(0, "zz unrelated high frequency string", 50).unwrap(),
            FunderString::new(1, "agency body (DFG) support", 2).unwrap(),
        ];
        let cluster = Cluster {
            cluster_id: 0,
            member_ids: vec![0, 1],
            representative_id: 0,
        };
        let m = match_cluster(&cluster, &strings, &index, &CascadeOptions::default());
        assert_eq!(m.match_type, MatchType::Acronym);
        assert_eq!(m.matched_member, Some(1));
    }

    #[test]
    fn unmatched_cluster_propagates_unmatched() {
        let index = nsf_index();
        let strings = vec![FunderString::new(0, "completely unknown body", 1).unwrap()];
        let cluster = Cluster {
            cluster_id: 0,
            member_ids: vec![0],
            representative_id: 0,
        };
        let m = match_cluster(&cluster, &strings, &index, &CascadeOptions::default());
        let results = propagate(&cluster, &m);
        assert_eq!(results[0].match_type, MatchType::Unmatched);
        assert!(results[0].candidates.is_empty());
    }

    #[test]
    fn intra_cluster_conflicts_are_reported() {
        let index = ReferenceIndex::build(vec![
            org("F1", "Alpha Agency", &[], &[]),
            org("F2", "Beta Agency", &[], &[]),
        ])
        .unwrap();
        let strings = vec![
            FunderString::new(0, "alpha agency", 10).unwrap(),
            FunderString::new(1, "beta agency", 5).unwrap(),
        ];
        let cluster = Cluster {
            cluster_id: 7,
            member_ids: vec![0, 1],
            representative_id: 0,
        };
        let m = match_cluster(&cluster, &strings, &index, &CascadeOptions::default());
        assert_eq!(m.matched_member, Some(0));
        assert_eq!(m.candidates[0].canonical_id, "F1");
        assert_eq!(m.conflicts.len(), 1);
    }

    #[test]
    fn match_type_labels_round_trip() {
        for t in MatchType::ALL {
            assert_eq!(MatchType::from_dataset_label(t.dataset_label()), Some(t));
        }
        assert_eq!(MatchType::Unmatched.dataset_label(), "");
        assert_eq!(MatchType::Unmatched.report_label(), "Not Matched (NaN)");
    }
}
