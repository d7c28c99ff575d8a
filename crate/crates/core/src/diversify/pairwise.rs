//! Distance evaluation over embedding matrices, with norms cached for cosine.

use crate::serialize_embed::{dot, Distance, EmbeddingMatrix};

/// Evaluates `δ` between rows of one or two matrices. Cosine results are
/// bit-identical to [`Distance::eval`].
pub(crate) struct Pairwise<'a> {
    distance: Distance,
    a: &'a EmbeddingMatrix,
    b: &'a EmbeddingMatrix,
    norms_a: Vec<f64>,
    norms_b: Vec<f64>,
}

fn norms(m: &EmbeddingMatrix, distance: Distance) -> Vec<f64> {
    match distance {
        Distance::Cosine => m.rows().map(|r| dot(r, r).sqrt()).collect(),
        _ => Vec::new(),
    }
}

impl<'a> Pairwise<'a> {
    pub fn new(distance: Distance, a: &'a EmbeddingMatrix, b: &'a EmbeddingMatrix) -> Self {
        Self {
            distance,
            a,
            b,
            norms_a: norms(a, distance),
            norms_b: norms(b, distance),
        }
    }

    pub fn within(distance: Distance, m: &'a EmbeddingMatrix) -> Self {
        Self::new(distance, m, m)
    }

    /// `δ(a[i], b[j])`
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (x, y) = (self.a.row(i), self.b.row(j));
        match self.distance {
            Distance::Cosine => {
                let d = (1.0 - dot(x, y) / (self.norms_a[i] * self.norms_b[j])).clamp(0.0, 2.0);
                if d < 1e-9 && x == y {
                    0.0
                } else {
                    d
                }
            }
            other => other.eval(x, y),
        }
    }
}

/// Upper triangle of a symmetric distance matrix over a subset of rows.
#[derive(Debug, Clone)]
pub(crate) struct Condensed {
    n: usize,
    data: Vec<f64>,
}

impl Condensed {
    pub fn build(pw: &Pairwise<'_>, idx: &[usize]) -> Self {
        let n = idx.len();
        let mut data = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                data.push(pw.get(i, j));
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.data[self.offset(i, j)],
            std::cmp::Ordering::Greater => self.data[self.offset(j, i)],
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let o = if i < j { self.offset(i, j) } else { self.offset(j, i) };
        self.data[o] = v;
    }
}

/// Minimum and mean distance from tuple row `t` to every query row.
pub(crate) fn query_scores(pw: &Pairwise<'_>, t: usize, n_queries: usize) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut sum = 0.0;
    for q in 0..n_queries {
        let d = pw.get(t, q);
        min = min.min(d);
        sum += d;
    }
    (min, sum / n_queries as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lake_model::TupleRef;

    fn matrix(rows: &[&[f64]]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(
            (0..rows.len()).map(|i| TupleRef::new("t", i)).collect(),
            rows.iter().map(|r| r.to_vec()).collect(),
            "test",
        )
        .unwrap()
    }

    #[test]
    fn matches_plain_eval() {
        let m = matrix(&[&[1.0, 2.0, 3.0], &[-1.0, 0.5, 2.0], &[0.3, 0.3, 0.1], &[1.0, 2.0, 3.0]]);
        for d in [Distance::Cosine, Distance::Euclidean, Distance::Manhattan] {
            let pw = Pairwise::within(d, &m);
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(pw.get(i, j), d.eval(m.row(i), m.row(j)));
                }
            }
            assert_eq!(pw.get(0, 3), 0.0);
        }
    }

    #[test]
    fn condensed_indexing() {
        let m = matrix(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], &[-1.0, 0.0]]);
        let pw = Pairwise::within(Distance::Euclidean, &m);
        let c = Condensed::build(&pw, &[0, 1, 2, 3]);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(c.get(i, j), pw.get(i, j));
            }
        }
        let sub = Condensed::build(&pw, &[3, 1]);
        assert_eq!(sub.get(0, 1), pw.get(3, 1));
    }
}
