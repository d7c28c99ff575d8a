//! Average-linkage agglomerative clustering by the nearest-neighbor chain
//! algorithm, `O(n²)` time on a condensed distance matrix.

use super::pairwise::{Condensed, Pairwise};

/// One merge: the clusters holding points `a` and `b` join at `dist`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Merge {
    pub a: usize,
    pub b: usize,
    pub dist: f64,
}

/// Full dendrogram, merges sorted by distance (stable on discovery order).
pub(crate) fn average_linkage(mut d: Condensed) -> Vec<Merge> {
    let n = d.len();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut chain: Vec<usize> = Vec::with_capacity(n);

    for _ in 1..n {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("an active cluster remains"));
        }
        let (x, y, dist) = loop {
            let x = *chain.last().unwrap();
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            // Prefer the previous chain element on ties so the chain ends.
            let (mut y, mut best) = match prev {
                Some(p) => (p, d.get(x, p)),
                None => (usize::MAX, f64::INFINITY),
            };
            for i in 0..n {
                if active[i] && i != x {
                    let di = d.get(x, i);
                    if di < best {
                        best = di;
                        y = i;
                    }
                }
            }
            if Some(y) == prev {
                chain.pop();
                chain.pop();
                break (x, y, best);
            }
            chain.push(y);
        };
        let (keep, gone) = if x < y { (x, y) } else { (y, x) };
        let (sk, sg) = (size[keep] as f64, size[gone] as f64);
        for i in 0..n {
            if active[i] && i != keep && i != gone {
                let nd = (sk * d.get(keep, i) + sg * d.get(gone, i)) / (sk + sg);
                d.set(keep, i, nd);
            }
        }
        active[gone] = false;
        size[keep] += size[gone];
        merges.push(Merge { a: keep, b: gone, dist });
    }
    merges.sort_by(|m1, m2| m1.dist.total_cmp(&m2.dist));
    merges
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Flat clustering into `n_clusters` groups, each a sorted list of point
/// indices; groups are ordered by their smallest member.
pub(crate) fn cut(n_points: usize, merges: &[Merge], n_clusters: usize) -> Vec<Vec<usize>> {
    assert!(n_clusters >= 1 && n_clusters <= n_points);
    let mut uf = UnionFind::new(n_points);
    for m in &merges[..n_points - n_clusters] {
        uf.union(m.a, m.b);
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n_points];
    for i in 0..n_points {
        let r = uf.find(i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Member minimizing the summed distance to the rest of its group; ties go
/// to the smallest index.
pub(crate) fn medoid(d: &Pairwise<'_>, group: &[usize]) -> usize {
    let mut best = (f64::INFINITY, usize::MAX);
    for &i in group {
        let s: f64 = group.iter().map(|&j| d.get(i, j)).sum();
        if s < best.0 {
            best = (s, i);
        }
    }
    best.1
}
