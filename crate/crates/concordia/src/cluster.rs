//! Complete-linkage agglomerative clustering.
//!
//! Used to order the rows of dependence matrices so related raters sit
//! together. Merge order breaks distance ties lexicographically by leaf
//! label, so the dendrogram and leaf order are fully deterministic.

use serde::Serialize;

use crate::error::{Error, Result};

/// One agglomeration step. Cluster ids follow the usual convention: leaves
/// are `0..n`, the cluster created by merge `k` gets id `n + k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// Complete-linkage distance at which the two clusters joined.
    pub height: f64,
    /// Leaves in the merged cluster.
    pub size: usize,
}

/// A stepwise dendrogram plus the derived leaf ordering.
#[derive(Debug, Clone, Serialize)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
    /// Leaf indices in display order (left-to-right tree traversal).
    pub leaf_order: Vec<usize>,
}

impl Dendrogram {
    pub fn ordered_labels(&self) -> Vec<String> {
        self.leaf_order
            .iter()
            .map(|&i| self.labels[i].clone())
            .collect()
    }
}

struct ClusterState {
    id: usize,
    members: Vec<usize>,
    /// Lexicographically smallest leaf label, the tie-break key.
    key: String,
}

/// Agglomerate under the max-distance (complete) linkage.
///
/// `dissim` must be square and symmetric with a zero diagonal. Distance ties
/// pick the pair whose (smaller, larger) label keys sort first, and the leaf
/// order puts the smaller-keyed child on the left.
pub fn complete_linkage(labels: &[String], dissim: &[Vec<f64>]) -> Result<Dendrogram> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::Empty("dissimilarity matrix"));
    }
    if dissim.len() != n || dissim.iter().any(|row| row.len() != n) {
        return Err(Error::AsymmetricDissimilarity);
    }
    for i in 0..n {
        if dissim[i][i] != 0.0 {
            return Err(Error::AsymmetricDissimilarity);
        }
        for j in 0..n {
            let d = dissim[i][j];
            if !d.is_finite() || (d - dissim[j][i]).abs() > 1e-12 {
                return Err(Error::AsymmetricDissimilarity);
            }
        }
    }

    let mut clusters: Vec<ClusterState> = (0..n)
        .map(|i| ClusterState {
            id: i,
            members: vec![i],
            key: labels[i].clone(),
        })
        .collect();
    // Distance between active clusters, indexed by position in `clusters`.
    let mut dist: Vec<Vec<f64>> = dissim.to_vec();
    // Children of each internal node, keyed by id - n.
    let mut children: Vec<(usize, usize)> = Vec::new();
    let mut merges = Vec::new();

    while clusters.len() > 1 {
        let mut best: Option<(usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let better = match best {
                    None => true,
                    Some((ba, bb)) => {
                        let d = dist[a][b];
                        let bd = dist[ba][bb];
                        if d != bd {
                            d < bd
                        } else {
                            pair_key(&clusters[a], &clusters[b])
                                < pair_key(&clusters[ba], &clusters[bb])
                        }
                    }
                };
                if better {
                    best = Some((a, b));
                }
            }
        }
        let (a, b) = best.expect("at least two clusters remain");
        let height = dist[a][b];
        // Put the lexicographically smaller key on the left.
        let (left_pos, right_pos) = if clusters[a].key <= clusters[b].key {
            (a, b)
        } else {
            (b, a)
        };
        let new_id = n + merges.len();
        merges.push(Merge {
            left: clusters[left_pos].id,
            right: clusters[right_pos].id,
            height,
            size: clusters[a].members.len() + clusters[b].members.len(),
        });
        children.push((clusters[left_pos].id, clusters[right_pos].id));

        // Complete linkage: distance to the merged cluster is the max.
        let merged_members: Vec<usize> = clusters[a]
            .members
            .iter()
            .chain(&clusters[b].members)
            .copied()
            .collect();
        let merged_key = std::cmp::min(clusters[a].key.clone(), clusters[b].key.clone());
        let (hi, lo) = (a.max(b), a.min(b));
        for c in 0..clusters.len() {
            if c != a && c != b {
                dist[lo][c] = dist[a][c].max(dist[b][c]);
                dist[c][lo] = dist[lo][c];
            }
        }
        clusters[lo] = ClusterState {
            id: new_id,
            members: merged_members,
            key: merged_key,
        };
        clusters.remove(hi);
        dist.remove(hi);
        for row in &mut dist {
            row.remove(hi);
        }
    }

    let mut leaf_order = Vec::with_capacity(n);
    let root = clusters[0].id;
    collect_leaves(root, n, &children, &mut leaf_order);
    Ok(Dendrogram {
        labels: labels.to_vec(),
        merges,
        leaf_order,
    })
}

fn pair_key<'a>(a: &'a ClusterState, b: &'a ClusterState) -> (&'a str, &'a str) {
    if a.key <= b.key {
        (&a.key, &b.key)
    } else {
        (&b.key, &a.key)
    }
}

fn collect_leaves(node: usize, n: usize, children: &[(usize, usize)], out: &mut Vec<usize>) {
    if node < n {
        out.push(node);
    } else {
        let (l, r) = children[node - n];
        collect_leaves(l, n, children, out);
        collect_leaves(r, n, children, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_rows_merge_first_at_zero() {
        let d = vec![
            vec![0.0, 0.0, 3.0],
            vec![0.0, 0.0, 3.0],
            vec![3.0, 3.0, 0.0],
        ];
        let dg = complete_linkage(&labels(&["a", "b", "c"]), &d).unwrap();
        assert_eq!(dg.merges[0].height, 0.0);
        assert_eq!((dg.merges[0].left, dg.merges[0].right), (0, 1));
    }

    #[test]
    fn hand_traced_three_point_linkage() {
        // d(A,B)=1, d(A,C)=d(B,C)=5: {A,B} first, then C joins at 5.
        let d = vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 5.0],
            vec![5.0, 5.0, 0.0],
        ];
        let dg = complete_linkage(&labels(&["A", "B", "C"]), &d).unwrap();
        assert_eq!(dg.merges.len(), 2);
        assert_eq!(dg.merges[0].height, 1.0);
        assert_eq!(dg.merges[1].height, 5.0);
        assert_eq!(dg.ordered_labels(), vec!["A", "B", "C"]);
    }

    #[test]
    fn complete_linkage_uses_max_distance() {
        // B is close to A and to C, but A and C are far apart; after {A,B}
        // merges, C joins at max(d(A,C), d(B,C)) = 10.
        let d = vec![
            vec![0.0, 1.0, 10.0],
            vec![1.0, 0.0, 2.0],
            vec![10.0, 2.0, 0.0],
        ];
        let dg = complete_linkage(&labels(&["A", "B", "C"]), &d).unwrap();
        assert_eq!(dg.merges[1].height, 10.0);
    }

    #[test]
    fn single_leaf_input() {
        let dg = complete_linkage(&labels(&["only"]), &[vec![0.0]]).unwrap();
        assert!(dg.merges.is_empty());
        assert_eq!(dg.leaf_order, vec![0]);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let d = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(matches!(
            complete_linkage(&labels(&["a", "b"]), &d),
            Err(Error::AsymmetricDissimilarity)
        ));
        let bad_diag = vec![vec![0.5, 1.0], vec![1.0, 0.0]];
        assert!(complete_linkage(&labels(&["a", "b"]), &bad_diag).is_err());
    }

    #[test]
    fn ties_break_lexicographically() {
        // All distances equal: merges must follow label order deterministically.
        let d = vec![
            vec![0.0, 2.0, 2.0, 2.0],
            vec![2.0, 0.0, 2.0, 2.0],
            vec![2.0, 2.0, 0.0, 2.0],
            vec![2.0, 2.0, 2.0, 0.0],
        ];
        let dg = complete_linkage(&labels(&["delta", "alpha", "charlie", "bravo"]), &d).unwrap();
        // First merge is the lexicographically first pair: alpha + bravo.
        assert_eq!(dg.merges[0].left, 1);
        assert_eq!(dg.merges[0].right, 3);
        let again = complete_linkage(&labels(&["delta", "alpha", "charlie", "bravo"]), &d).unwrap();
        assert_eq!(dg.merges, again.merges);
        assert_eq!(dg.leaf_order, again.leaf_order);
    }

    #[test]
    fn heights_are_monotone() {
        let d = vec![
            vec![0.0, 0.3, 0.9, 0.6, 0.7],
            vec![0.3, 0.0, 0.4, 0.8, 0.2],
            vec![0.9, 0.4, 0.0, 0.1, 0.5],
            vec![0.6, 0.8, 0.1, 0.0, 0.35],
            vec![0.7, 0.2, 0.5, 0.35, 0.0],
        ];
        let dg = complete_linkage(&labels(&["a", "b", "c", "d", "e"]), &d).unwrap();
        for w in dg.merges.windows(2) {
            assert!(w[0].height <= w[1].height);
        }
        let mut order = dg.leaf_order.clone();
        order.sort_unstable();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }
}
