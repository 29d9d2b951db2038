//! Maximum bipartite matching by augmenting paths (Kuhn's algorithm).
//!
//! Graphs here are tiny (events of one transaction), so the O(V·E) bound
//! is irrelevant; what matters is that the result is deterministic for a
//! given adjacency order.

/// Computes a maximum matching. `adj[l]` lists the right vertices that
/// left vertex `l` may be paired with; right vertices are `0..right_count`.
/// Returns, for each left vertex, its matched right vertex.
pub fn max_matching(adj: &[Vec<usize>], right_count: usize) -> Vec<Option<usize>> {
    let mut owner: Vec<Option<usize>> = vec![None; right_count];
    for left in 0..adj.len() {
        let mut seen = vec![false; right_count];
        augment(left, adj, &mut owner, &mut seen);
    }
    let mut out = vec![None; adj.len()];
    for (right, l) in owner.iter().enumerate() {
        if let Some(l) = l {
            out[*l] = Some(right);
        }
    }
    out
}

fn augment(left: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for &right in &adj[left] {
        if seen[right] {
            continue;
        }
        seen[right] = true;
        let free = match owner[right] {
            None => true,
            Some(prev) => augment(prev, adj, owner, seen),
        };
        if free {
            owner[right] = Some(left);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Size of the largest matching, by trying every assignment.
    fn brute_force(adj: &[Vec<usize>], right_count: usize) -> usize {
        fn go(i: usize, adj: &[Vec<usize>], used: &mut Vec<bool>) -> usize {
            if i == adj.len() {
                return 0;
            }
            let mut best = go(i + 1, adj, used);
            for &r in &adj[i] {
                if !used[r] {
                    used[r] = true;
                    best = best.max(1 + go(i + 1, adj, used));
                    used[r] = false;
                }
            }
            best
        }
        go(0, adj, &mut vec![false; right_count])
    }

    #[test]
    fn two_deposits_one_lock() {
        let adj = vec![vec![0], vec![0]];
        let m = max_matching(&adj, 1);
        assert_eq!(m.iter().flatten().count(), 1);
        assert_eq!(brute_force(&adj, 1), 1);
    }

    #[test]
    fn augmenting_path_is_found() {
        // greedy would give 0->0 and leave 1 unmatched
        let adj = vec![vec![0, 1], vec![0]];
        assert_eq!(max_matching(&adj, 2), vec![Some(1), Some(0)]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            rows in proptest::collection::vec(proptest::collection::btree_set(0usize..5, 0..5), 0..6)
        ) {
            let adj: Vec<Vec<usize>> = rows.into_iter().map(|s| s.into_iter().collect()).collect();
            let m = max_matching(&adj, 5);
            // valid: edges exist and rights are distinct
            let mut used = [false; 5];
            for (l, r) in m.iter().enumerate() {
                if let Some(r) = r {
                    prop_assert!(adj[l].contains(r));
                    prop_assert!(!used[*r]);
                    used[*r] = true;
                }
            }
            prop_assert_eq!(m.iter().flatten().count(), brute_force(&adj, 5));
        }
    }
}
