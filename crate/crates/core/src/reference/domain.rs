//! Registered-domain extraction from homepage URLs, used as a stable
//! web-based organization key during record linkage.

/// Extract the registrable domain (public-suffix aware) from a URL,
/// lowercased. Returns `None` when the input has no parseable host.
///
/// The suffix rules come from the public-suffix snapshot bundled with the
/// pinned `psl` crate version, so results are reproducible across runs and
/// machines.
pub fn extract_registered_domain(url: &str) -> Option<String> {
    let host = host_of(url)?;
    let domain = psl::domain_str(&host)?;
    // Reject bare suffixes and hosts the list cannot break down.
    if domain.is_empty() || !domain.contains('.') {
        return None;
    }
    Some(domain.to_string())
}

/// Pull the host portion out of a URL-ish string without a full URL parser:
/// strip scheme, userinfo, port, path, query and fragment.
fn host_of(url: &str) -> Option<String> {
    let trimmed = url.trim();
    if trimmed.is_empty() {
        return None;
    }
    let without_scheme = match trimmed.find("://") {
        Some(pos) => &trimmed[pos + 3..],
        None => trimmed,
    };
    let authority = without_scheme
        .split(['/', '?', '#'])
        .next()
        .unwrap_or_default();
    let after_userinfo = authority.rsplit('@').next().unwrap_or_default();
    let host = after_userinfo.split(':').next().unwrap_or_default();
    let host = host.trim_matches('.').to_ascii_lowercase();
    if host.is_empty() || host.contains(char::is_whitespace) || !host.contains('.') {
        return None;
    }
    Some(host)
}
