//! Tokenization and TF-IDF token selection for column embedding.

use std::collections::HashMap;

use crate::lake_model::Cell;

/// Language-model token budget for a column-level embedding.
pub const MAX_COLUMN_TOKENS: usize = 512;

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
}

pub fn column_tokens(values: &[Cell]) -> Vec<String> {
    values
        .iter()
        .flatten()
        .flat_map(|v| tokenize(v).collect::<Vec<_>>())
        .collect()
}

/// Document frequencies of tokens over a set of columns.
#[derive(Debug, Clone, Default)]
pub struct TokenCorpus {
    doc_freq: HashMap<String, usize>,
    num_docs: usize,
}

impl TokenCorpus {
    pub fn from_columns<'a>(columns: impl IntoIterator<Item = &'a [Cell]>) -> Self {
        let mut corpus = Self::default();
        for col in columns {
            corpus.add_document(&column_tokens(col));
        }
        corpus
    }

    pub fn add_document(&mut self, tokens: &[String]) {
        let mut uniq: Vec<&String> = tokens.iter().collect();
        uniq.sort();
        uniq.dedup();
        for t in uniq {
            *self.doc_freq.entry(t.clone()).or_default() += 1;
        }
        self.num_docs += 1;
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    /// Smoothed inverse document frequency, `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, token: &str) -> f64 {
        let df = self.doc_freq.get(token).copied().unwrap_or(0) as f64;
        ((1.0 + self.num_docs as f64) / (1.0 + df)).ln() + 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedToken {
    pub token: String,
    pub weight: f64,
}

/// Ranks a column's distinct tokens by TF-IDF and keeps at most
/// `max_tokens`. Equal scores keep first-occurrence order.
pub fn tfidf_select_tokens(
    values: &[Cell],
    corpus: &TokenCorpus,
    max_tokens: usize,
) -> Vec<WeightedToken> {
    assert!(max_tokens >= 1, "max_tokens must be positive");
    let tokens = column_tokens(values);
    let mut order: Vec<String> = Vec::new();
    let mut tf: HashMap<&str, usize> = HashMap::new();
    for t in &tokens {
        let e = tf.entry(t.as_str()).or_default();
        if *e == 0 {
            order.push(t.clone());
        }
        *e += 1;
    }
    let mut scored: Vec<(usize, WeightedToken)> = order
        .iter()
        .enumerate()
        .map(|(pos, t)| {
            let weight = tf[t.as_str()] as f64 * corpus.idf(t);
            (
                pos,
                WeightedToken {
                    token: t.clone(),
                    weight,
                },
            )
        })
        .collect();
    scored.sort_by(|a, b| b.1.weight.total_cmp(&a.1.weight).then(a.0.cmp(&b.0)));
    scored.truncate(max_tokens);
    scored.into_iter().map(|(_, w)| w).collect()
}
