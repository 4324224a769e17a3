//! Named-entity assistance for medium-frequency unmatched strings.
//!
//! The model itself is pluggable: anything that returns organization spans
//! for a raw string can drive the rematch. A heuristic stub ships in-process
//! so the pipeline runs end to end without an external model.

use crate::error::{Error, Result};

/// Extracts organization-name spans from a raw funder string.
pub trait NerProvider: Sync {
    /// Zero or more spans, best first. A failure leaves the affected
    /// strings unmatched.
    fn organization_spans(&self, raw: &str) -> Result<Vec<String>>;

    fn name(&self) -> &'static str {
        "ner"
    }
}

/// Tokens stripped from the ends of a string by the heuristic provider.
/// Funding boilerplate only; organization-name interiors are never touched.
const BOILERPLATE: &[&str] = &[
    "funded", "funding", "funds", "supported", "support", "sponsored", "financed", "provided",
    "partially", "partly", "gratefully", "acknowledge", "acknowledges", "acknowledged", "thanks",
    "thank", "by", "the", "this", "a", "an", "was", "is", "are", "were", "under", "grant",
    "grants", "award", "awards", "project", "projects", "contract", "agreement", "scheme", "no",
    "nos", "number", "numbers", "id", "to", "from", "of", "for", "and", "via", "through", "in",
    "at", "with", "work",
];

/// Heuristic span extractor: strips funding boilerplate and identifier-like
/// tokens from both ends and returns the remaining core as one span.
#[derive(Debug, Default, Clone, Copy)]
pub struct HeuristicNer;

fn is_noise(token: &str) -> bool {
    let stripped: String = token
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect();
    if stripped.is_empty() {
        return true;
    }
    if stripped.bytes().any(|b| b.is_ascii_digit()) {
        return true;
    }
    BOILERPLATE.contains(&stripped.to_ascii_lowercase().as_str())
}

impl NerProvider for HeuristicNer {
    fn organization_spans(&self, raw: &str) -> Result<Vec<String>> {
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        let start = tokens.iter().position(|t| !is_noise(t));
        let Some(start) = start else {
            return Ok(Vec::new());
        };
        let end = tokens.iter().rposition(|t| !is_noise(t)).unwrap();
        let span = tokens[start..=end].join(" ");
        if span.is_empty() {
            Ok(Vec::new())
        } else {
            Ok(vec![span])
        }
    }

    fn name(&self) -> &'static str {
        "heuristic"
    }
}

/// Provider that always fails; exercises the error path in tests.
#[derive(Debug, Default, Clone, Copy)]
pub struct FailingNer;

impl NerProvider for FailingNer {
    fn organization_spans(&self, _raw: &str) -> Result<Vec<String>> {
        Err(Error::Rejected("ner provider unavailable".to_string()))
    }

    fn name(&self) -> &'static str {
        "failing"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_boilerplate_from_both_ends() {
        let spans = HeuristicNer
            .organization_spans("funded by the national science foundation under grant 123")
            .unwrap();
        assert_eq!(spans, vec!["national science foundation".to_string()]);
    }

    #[test]
    fn interior_boilerplate_is_preserved ()
    {
        let spans = HeuristicNer
            .organization_spans("ministry of health labour and welfare")
            .unwrap();
        assert_eq!(spans, vec!["ministry of health labour and welfare".to_string()]);
    }

    #[test]
    fn all_noise_yields_no_spans() {
        let spans = HeuristicNer
            .organization_spans("funded by grant 12345")
            .unwrap();
        assert!(spans.is_empty());
    }
}
