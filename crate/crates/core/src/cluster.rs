//! String-similarity graph construction and connected-component extraction.
//! Components of the graph are the candidate name-variant clusters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minhash::{estimate_similarity, LshIndex, MinHashSignature};
use crate::normalize::FunderString;

/// Disjoint-set forest with union by size and path compression.
#[derive(Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: u32) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n as usize],
        }
    }

    pub fn find(&mut self, x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            let grand = self.parent[self.parent[root as usize] as usize];
            self.parent[root as usize] = grand;
            root = grand;
        }
        root
    }

    pub fn union(&mut self, x: u32, y: u32) {
        let mut xr = self.find(x);
        let mut yr = self.find(y);
        if xr == yr {
            return;
        }
        if self.size[xr as usize] < self.size[yr as usize] {
            std::mem::swap(&mut xr, &mut yr);
        }
        self.parent[yr as usize] = xr;
        self.size[xr as usize] += self.size[yr as usize];
    }

    /// Partition into classes, each sorted ascending, ordered by smallest
    /// member. Every element of `0..n` appears in exactly one class.
    pub fn partition(&mut self) -> Vec<Vec<u32>> {
        let n = self.parent.len() as u32;
        let mut classes: Vec<Vec<u32>> = vec![Vec::new(); n as usize];
        for x in 0..n {
            let root = self.find(x);
            classes[root as usize].push(x);
        }
        classes.retain(|c| !c.is_empty());
        classes.sort_by_key(|c| c[0]);
        classes
    }
}

/// One name-variant cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub cluster_id: u32,
    /// Sorted member string ids.
    pub member_ids: Vec<u32>,
    /// Member with the highest occurrence count, ties broken by smallest id.
    pub representative_id: u32,
}

/// Undirected similarity edges: (i, j) present iff j is an LSH candidate for
/// i and the estimated similarity is at or above `threshold`. Bucket
/// collisions are never trusted without the estimator check.
pub fn build_similarity_graph(
    signatures: &[MinHashSignature],
    lsh: &LshIndex,
    threshold: f64,
) -> Result<Vec<(u32, u32)>> {
    let per_node: Vec<Vec<(u32, u32)>> = signatures
        .par_iter()
        .enumerate()
        .map(|(i, sig)| -> Result<Vec<(u32, u32)>> {
            let i = i as u32;
            let mut edges = Vec::new();
            for j in lsh.query(sig, Some(i))? {
                // Each unordered pair is generated from both endpoints; keep
                // the (low, high) orientation from the lower endpoint only.
                if j <= i {
                    continue;
                }
                let est = estimate_similarity(sig, &signatures[j as usize])?;
                if est >= threshold {
                    edges.push((i, j));
                }
            }
            Ok(edges)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut edges: Vec<(u32, u32)> = per_node.into_iter().flatten().collect();
    edges.sort_unstable();
    edges.dedup();
    Ok(edges)
}

/// Connected components of an undirected graph on nodes `0..n`.
/// Isolated nodes become singletons. Rejects edges naming unknown nodes.
pub fn connected_components(edges: &[(u32, u32)], n: u32) -> Result<Vec<Vec<u32>>> {
    let mut uf = UnionFind::new(n);
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(Error::InvalidInput(format!(
                "edge ({a}, {b}) references a node outside 0..{n}"
            )));
        }
        uf.union(a, b);
    }
    Ok(uf.partition())
}

/// Attach cluster ids and count-based representatives to a partition.
pub fn make_clusters(partition: Vec<Vec<u32>>, strings: &[FunderString]) -> Vec<Cluster> {
    partition
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            let representative_id = members
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    let ca = strings[a as usize].count;
                    let cb = strings[b as usize].count;
                    // Highest count wins; on ties the smaller id wins.
                    ca.cmp(&cb).then(b.cmp(&a))
                })
                .expect("clusters are non-empty");
            Cluster {
                cluster_id: id as u32,
                member_ids: members,
                representative_id,
            }
        })
        .collect()
}

/// Members of a cluster in matching trial order: descending occurrence
/// count, ties by ascending string id.
pub fn trial_order(cluster: &Cluster, strings: &[FunderString]) -> Vec<u32> {
    let mut order = cluster.member_ids.clone();
    order.sort_by(|&a, &b| {
        strings[b as usize]
            .count
            .cmp(&strings[a as usize].count)
            .then(a.cmp(&b))
    });
    order
}
