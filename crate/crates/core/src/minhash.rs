//! MinHash sketches over character shingle sets and an LSH banding index for
//! approximate Jaccard similarity search.
//!
//! Signatures use a single salted 64-bit hash family parameterized by
//! permutation index instead of explicit permutations: component `i` of a
//! signature is `min over shingles of mix(fnv1a(shingle) ^ seed_i)`, with the
//! per-permutation salts derived from one master seed. Everything here is
//! deterministic for a fixed seed, across runs and across thread schedules.

use std::collections::BTreeSet;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default signature length. Balances estimation accuracy (standard error
/// ~ 1/sqrt(128) ~ 0.09 at j = 0.5) against throughput.
pub const DEFAULT_NUM_PERMS: usize = 128;

/// Default master seed for the hash family. Fixed so that pipeline output is
/// reproducible byte-for-byte between runs.
pub const DEFAULT_SEED: u64 = 42;

/// splitmix64 finalizer; full-avalanche mixing of a 64-bit value.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over raw bytes; the stable base hash for a shingle.
#[inline]
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hash every length-`k` byte window of `s`, with the whole string as the
/// single shingle when `s` is shorter than `k`. Duplicates are removed.
///
/// Only valid for ASCII strings (normalized funder strings and reference
/// names are ASCII by construction).
pub fn shingle_hashes(s: &str, k: usize) -> Vec<u64> {
    debug_assert!(s.is_ascii());
    let bytes = s.as_bytes();
    let mut hashes: Vec<u64> = if bytes.is_empty() {
        Vec::new()
    } else if bytes.len() < k {
        vec![fnv1a(bytes)]
    } else {
        bytes.windows(k).map(fnv1a).collect()
    };
    hashes.sort_unstable();
    hashes.dedup();
    hashes
}

/// MinHash signature of one shingle set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    values: Vec<u64>,
    seed: u64,
}

impl MinHashSignature {
    pub fn num_perms(&self) -> usize {
        self.values.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }
}

/// Factory for MinHash signatures with a fixed (num_perms, seed) pair.
#[derive(Debug, Clone)]
pub struct MinHasher {
    num_perms: usize,
    seed: u64,
    perm_salts: Vec<u64>,
}

impl MinHasher {
    pub fn new(num_perms: usize, seed: u64) -> Self {
        assert!(num_perms >= 1, "num_perms must be >= 1");
        let perm_salts = (0..num_perms as u64)
            .map(|i| mix64(seed.wrapping_add(i.wrapping_mul(0x9e37_79b9_7f4a_7c15))))
            .collect();
        MinHasher {
            num_perms,
            seed,
            perm_salts,
        }
    }

    pub fn num_perms(&self) -> usize {
        self.num_perms
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Signature of a shingle set. Rejects the empty set: a min over nothing
    /// is undefined and such a string carries no lexical signal.
    pub fn signature(&self, shingles: &BTreeSet<String>) -> Result<MinHashSignature> {
        let hashes: Vec<u64> = shingles.iter().map(|s| fnv1a(s.as_bytes())).collect();
        self.signature_from_hashes(&hashes)
    }

    /// Signature from prehashed shingles (`shingle_hashes` output).
    pub fn signature_from_hashes(&self, hashes: &[u64]) -> Result<MinHashSignature> {
        if hashes.is_empty() {
            return Err(Error::Rejected("empty shingle set".to_string()));
        }
        let mut values = vec![u64::MAX; self.num_perms];
        for &h in hashes {
            for (v, &salt) in values.iter_mut().zip(&self.perm_salts) {
                let hv = mix64(h ^ salt);
                if hv < *v {
                    *v = hv;
                }
            }
        }
        Ok(MinHashSignature {
            values,
            seed: self.seed,
        })
    }
}

/// Fraction of agreeing signature components: an unbiased estimator of the
/// Jaccard similarity of the underlying sets.
pub fn estimate_similarity(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64> {
    if a.num_perms() != b.num_perms() || a.seed != b.seed {
        return Err(Error::ParameterMismatch(format!(
            "signatures disagree: ({} perms, seed {}) vs ({} perms, seed {})",
            a.num_perms(),
            a.seed,
            b.num_perms(),
            b.seed
        )));
    }
    let agree = a
        .values
        .iter()
        .zip(&b.values)
        .filter(|(x, y)| x == y)
        .count();
    Ok(agree as f64 / a.num_perms() as f64)
}

/// Exact Jaccard similarity |A∩B| / |A∪B|. Test oracle for the estimator and
/// the authority for the pipeline's similarity thresholds. Returns 0.0 when
/// either set is empty (callers are expected to pass non-empty sets).
pub fn exact_jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Analytic LSH retrieval probability `1 - (1 - s^r)^b` for a pair of true
/// Jaccard similarity `s` under a (b bands, r rows) split.
pub fn retrieval_probability(s: f64, bands: usize, rows: usize) -> f64 {
    1.0 - (1.0 - s.powi(rows as i32)).powi(bands as i32)
}

/// Pick the (bands, rows) factorization of `num_perms` whose characteristic
/// threshold `(1/b)^(1/r)` is closest to `target`.
pub fn choose_bands(num_perms: usize, target: f64) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for b in 1..=num_perms {
        if num_perms % b != 0 {
            continue;
        }
        let r = num_perms / b;
        let characteristic = (1.0 / b as f64).powf(1.0 / r as f64);
        let dev = (characteristic - target).abs();
        if best.is_none_or(|(_, d)| dev < d) {
            best = Some(((b, r), dev));
        }
    }
    best.map(|(br, _)| br)
}

/// LSH banding index over MinHash signatures.
///
/// Each signature is split into `bands` bands of `rows_per_band` components;
/// a band's components are hashed into a bucket key, and two signatures are
/// candidates iff they collide in at least one band.
#[derive(Debug)]
pub struct LshIndex {
    bands: usize,
    rows_per_band: usize,
    num_perms: usize,
    seed: u64,
    target_threshold: f64,
    buckets: Vec<FxHashMap<u64, Vec<u32>>>,
    len: usize,
}

impl LshIndex {
    /// Build an index over `signatures` (ids are positions in the slice),
    /// choosing the banding closest to `target_threshold`.
    ///
    /// Fails if no factorization of `num_perms` lands within 0.05 of the
    /// target, if the target is outside (0, 1), or if any signature has
    /// mismatched parameters.
    pub fn build(
        num_perms: usize,
        seed: u64,
        signatures: &[MinHashSignature],
        target_threshold: f64,
    ) -> Result<Self> {
        if !(0.0 < target_threshold && target_threshold < 1.0) {
            return Err(Error::Config(format!(
                "LSH target threshold must be in (0,1), got {target_threshold}"
            )));
        }
        let (bands, rows_per_band) = choose_bands(num_perms, target_threshold)
            .ok_or_else(|| Error::Config("num_perms must be >= 1".to_string()))?;
        let characteristic = (1.0 / bands as f64).powf(1.0 / rows_per_band as f64);
        if (characteristic - target_threshold).abs() > 0.05 {
            return Err(Error::Config(format!(
                "no (bands, rows) factorization of {num_perms} has characteristic \
                 threshold within 0.05 of {target_threshold} (best: {bands}x{rows_per_band} \
                 at {characteristic:.4})"
            )));
        }
        let mut index = LshIndex {
            bands,
            rows_per_band,
            num_perms,
            seed,
            target_threshold,
            buckets: (0..bands).map(|_| FxHashMap::default()).collect(),
            len: 0,
        };
        for (id, sig) in signatures.iter().enumerate() {
            index.check_params(sig)?;
            for (band, chunk) in sig.values().chunks(index.rows_per_band).enumerate() {
                let key = band_key(chunk);
                index.buckets[band].entry(key).or_default().push(id as u32);
            }
            index.len += 1;
        }
        Ok(index)
    }

    fn check_params(&self, sig: &MinHashSignature) -> Result<()> {
        if sig.num_perms() != self.num_perms || sig.seed() != self.seed {
            return Err(Error::ParameterMismatch(format!(
                "signature ({} perms, seed {}) incompatible with index ({} perms, seed {})",
                sig.num_perms(),
                sig.seed(),
                self.num_perms,
                self.seed
            )));
        }
        Ok(())
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn rows_per_band(&self) -> usize {
        self.rows_per_band
    }

    pub fn target_threshold(&self) -> f64 {
        self.target_threshold
    }

    /// The similarity at which a pair has ~50% retrieval probability.
    pub fn characteristic_threshold(&self) -> f64 {
        (1.0 / self.bands as f64).powf(1.0 / self.rows_per_band as f64)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Ids of indexed signatures colliding with `probe` in at least one band,
    /// sorted and deduplicated. `exclude` suppresses the probe's own id when
    /// the probe itself is part of the index.
    pub fn query(&self, probe: &MinHashSignature, exclude: Option<u32>) -> Result<Vec<u32>> {
        self.check_params(probe)?;
        let mut out: Vec<u32> = Vec::new();
        for (band, chunk) in probe.values().chunks(self.rows_per_band).enumerate() {
            let key = band_key(chunk);
            if let Some(ids) = self.buckets[band].get(&key) {
                out.extend_from_slice(ids);
            }
        }
        out.sort_unstable();
        out.dedup();
        if let Some(own) = exclude {
            out.retain(|&id| id != own);
        }
        Ok(out)
    }
}

#[inline]
fn band_key(chunk: &[u64]) -> u64 {
    let mut key = 0x51_7c_c1_b7_27_22_0a_95u64;
    for &v in chunk {
        key = mix64(key ^ v);
    }
    key
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::shingle;

    fn sig_of(s: &str, hasher: &MinHasher) -> MinHashSignature {
        hasher.signature(&shingle(s, 3)).unwrap()
    }

    #[test]
    fn identical_sets_identical_signatures() {
        let h = MinHasher::new(128, DEFAULT_SEED);
        let a = sig_of("national science foundation", &h);
        let b = sig_of("national science foundation", &h);
        assert_eq!(a, b);
        assert_eq!(estimate_similarity(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn empty_shingle_set_rejected() {
        let h = MinHasher::new(16, 1);
        assert!(h.signature(&BTreeSet::new()).is_err());
    }

    #[test]
    fn disjoint_sets_estimate_near_zero() {
        // Disjoint 100-element sets at 128 perms stay below 0.1 across seeds.
        for seed in 0..20 {
            let h = MinHasher::new(128, seed);
            let a: BTreeSet<String> = (0..100).map(|i| format!("a{i}")).collect();
            let b: BTreeSet<String> = (0..100).map(|i| format!("b{i}")).collect();
            let est =
                estimate_similarity(&h.signature(&a).unwrap(), &h.signature(&b).unwrap()).unwrap();
            assert!(est <= 0.1, "seed {seed}: estimate {est} > 0.1");
        }
    }

    #[test]
    fn half_overlap_estimate_close() {
        // |A∩B| = 50, |A∪B| = 100 => jaccard 0.5; 256 perms keeps the
        // estimate within 0.1 of truth.
        let shared: BTreeSet<String> = (0..50).map(|i| format!("s{i}")).collect();
        let mut a = shared.clone();
        a.extend((0..25).map(|i| format!("a{i}")));
        let mut b = shared;
        b.extend((0..25).map(|i| format!("b{i}")));
        let a_set: BTreeSet<String> = a;
        let b_set: BTreeSet<String> = b;
        assert!((exact_jaccard(&a_set, &b_set) - 0.5).abs() < 1e-12);
        let h = MinHasher::new(256, DEFAULT_SEED);
        let est = estimate_similarity(
            &h.signature(&a_set).unwrap(),
            &h.signature(&b_set).unwrap(),
        )
        .unwrap();
        assert!((est - 0.5).abs() <= 0.1, "estimate {est}");
    }

    #[test]
    fn mismatched_parameters_rejected() {
        let a = MinHasher::new(64, 1).signature(&shingle("abc", 3)).unwrap();
        let b = MinHasher::new(128, 1).signature(&shingle("abc", 3)).unwrap();
        assert!(estimate_similarity(&a, &b).is_err());
        let c = MinHasher::new(64, 2).signature(&shingle("abc", 3)).unwrap();
        assert!(estimate_similarity(&a, &c).is_err());
    }

    #[test]
    fn exact_jaccard_examples() {
        let xy: BTreeSet<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
        let yz: BTreeSet<String> = ["y", "z"].iter().map(|s| s.to_string()).collect();
        let x: BTreeSet<String> = ["x"].iter().map(|s| s.to_string()).collect();
        let y: BTreeSet<String> = ["y"].iter().map(|s| s.to_string()).collect();
        assert_eq!(exact_jaccard(&xy, &xy), 1.0);
        assert!((exact_jaccard(&xy, &yz) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(exact_jaccard(&x, &y), 0.0);
    }

    #[test]
    fn shingle_hashes_match_string_path() {
        // The byte-window fast path must agree with hashing the string set.
        let h = MinHasher::new(64, 7);
        let via_set = h.signature(&shingle("national science", 3)).unwrap();
        let via_bytes = h
            .signature_from_hashes(&shingle_hashes("national science", 3))
            .unwrap();
        assert_eq!(via_set, via_bytes);
    }

    #[test]
    fn banding_choice_is_argmin_over_factorizations() {
        // Independent enumeration of all factorizations of 128 at target 0.95.
        let mut best = None;
        for b in 1..=128usize {
            if 128 % b != 0 {
                continue;
            }
            let r = 128 / b;
            let dev = ((1.0 / b as f64).powf(1.0 / r as f64) - 0.95).abs();
            if best.map_or(true, |(_, _, d)| dev < d) {
                best = Some((b, r, dev));
            }
        }
        let (b, r, dev) = best.unwrap();
        assert_eq!(choose_bands(128, 0.95), Some((b, r)));
        assert!(dev <= 0.05);
    }

    #[test]
    fn lsh_identical_strings_share_all_buckets() {
        let h = MinHasher::new(128, DEFAULT_SEED);
        let sigs = vec![sig_of("national science foundation", &h); 2];
        let index = LshIndex::build(128, DEFAULT_SEED, &sigs, 0.95).unwrap();
        let hits = index.query(&sigs[0], Some(0)).unwrap();
        assert_eq!(hits, vec![1]);
    }

    #[test]
    fn lsh_empty_index() {
        let index = LshIndex::build(128, DEFAULT_SEED, &[], 0.95).unwrap();
        assert!(index.is_empty());
        let h = MinHasher::new(128, DEFAULT_SEED);
        assert!(index
            .query(&sig_of("anything", &h), None)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn lsh_rejects_parameter_mismatch() {
        let index = LshIndex::build(128, DEFAULT_SEED, &[], 0.95).unwrap();
        let h = MinHasher::new(64, DEFAULT_SEED);
        assert!(index.query(&sig_of("x", &h), None).is_err());
    }

    #[test]
    fn estimator_symmetry() {
        let h = MinHasher::new(128, 3);
        let a = sig_of("alpha beta gamma", &h);
        let b = sig_of("alpha beta delta", &h);
        assert_eq!(
            estimate_similarity(&a, &b).unwrap(),
            estimate_similarity(&b, &a).unwrap()
        );
    }
}
