//! Selection of `k` diverse tuples from an embedded pool: DUST (prune,
//! cluster, rank) and the GMC, GNE, CLT, random and exhaustive baselines.

mod baseline;
mod dust;
mod greedy;
mod hac;
mod pairwise;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lake_model::TupleRef;
use crate::serialize_embed::{Distance, EmbeddingMatrix};

pub use baseline::{brute_force_best, clt, random_select, BruteForceObjective, BRUTE_FORCE_GUARD};
pub use dust::{cluster_medoids, diversify_dust, prune_tuples, rank_by_query_distances, rank_candidates, Ranked};
pub use greedy::{gmc, gne, gmc_objective, max_sum_lambda};

pub const DEFAULT_PRUNE: usize = 2500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dust,
    Gmc,
    Gne,
    Clt,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Dust,
        Algorithm::Gmc,
        Algorithm::Gne,
        Algorithm::Clt,
        Algorithm::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dust => "dust",
            Algorithm::Gmc => "gmc",
            Algorithm::Gne => "gne",
            Algorithm::Clt => "clt",
            Algorithm::Random => "random",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParams(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversifyParams {
    pub k: usize,
    /// Pruning budget; `None` keeps every tuple.
    pub s: Option<usize>,
    /// Cluster multiplier: DUST clusters the pruned pool into `k * p` groups.
    pub p: usize,
    /// Diversity weight for GMC and GNE.
    pub lambda: f64,
    /// GNE restarts.
    pub iterations: usize,
    /// GNE restricted candidate list size.
    pub rcl_size: usize,
    pub seed: u64,
    pub distance: Distance,
}

impl Default for DiversifyParams {
    fn default() -> Self {
        Self {
            k: 10,
            s: Some(DEFAULT_PRUNE),
            p: 2,
            lambda: 0.5,
            iterations: 10,
            rcl_size: 3,
            seed: 0,
            distance: Distance::Cosine,
        }
    }
}

impl DiversifyParams {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.p == 0 {
            return bad("p must be at least 1".into());
        }
        if let Some(s) = self.s {
            if s <= self.k || s < self.k.saturating_mul(self.p) {
                return bad(format!(
                    "pruning budget s={s} must exceed k={} and cover k*p={}",
                    self.k,
                    self.k.saturating_mul(self.p)
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if self.iterations == 0 || self.rcl_size == 0 {
            return bad("iterations and rcl_size must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedTuple {
    pub id: TupleRef,
    /// Row of the pool matrix.
    pub index: usize,
    /// Distance to the closest query tuple.
    pub rank_score: f64,
    /// Mean distance to the query tuples.
    pub tie_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiverseResult {
    pub algorithm: Algorithm,
    pub params: DiversifyParams,
    pub selected: Vec<SelectedTuple>,
}

impl DiverseResult {
    pub fn indices(&self) -> Vec<usize> {
        self.selected.iter().map(|s| s.index).collect()
    }

    pub fn ids(&self) -> Vec<TupleRef> {
        self.selected.iter().map(|s| s.id.clone()).collect()
    }
}

/// Checks the shared preconditions of every selector.
pub(crate) fn check_inputs(queries: &EmbeddingMatrix, tuples: &EmbeddingMatrix, params: &DiversifyParams) -> Result<()> {
    params.validate()?;
    if queries.is_empty() {
        return Err(Error::Empty("query embeddings"));
    }
    if queries.dim() != tuples.dim() && !tuples.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: queries.dim(),
            found: tuples.dim(),
        });
    }
    if tuples.len() < params.k {
        return Err(Error::NotEnoughTuples {
            needed: params.k,
            available: tuples.len(),
        });
    }
    if params.distance == Distance::Cosine {
        queries.ensure_nonzero()?;
        tuples.ensure_nonzero()?;
    }
    Ok(())
}

/// Attaches query scores to a selection, keeping its order.
pub(crate) fn annotate(
    queries: &EmbeddingMatrix,
    tuples: &EmbeddingMatrix,
    indices: &[usize],
    distance: Distance,
) -> Vec<SelectedTuple> {
    let pw = pairwise::Pairwise::new(distance, tuples, queries);
    indices
        .iter()
        .map(|&i| {
            let (rank_score, tie_score) = pairwise::query_scores(&pw, i, queries.len());
            SelectedTuple {
                id: tuples.id(i).clone(),
                index: i,
                rank_score,
                tie_score,
            }
        })
        .collect()
}

/// Runs `algorithm` with `params`.
pub fn diversify(
    algorithm: Algorithm,
    queries: &EmbeddingMatrix,
    tuples: &EmbeddingMatrix,
    params: &DiversifyParams,
) -> Result<DiverseResult> {
    let selected = match algorithm {
        Algorithm::Dust => return diversify_dust(queries, tuples, params),
        Algorithm::Gmc => gmc(queries, tuples, params)?,
        Algorithm::Gne => gne(queries, tuples, params)?,
        Algorithm::Clt => return clt(queries, tuples, params),
        Algorithm::Random => {
            check_inputs(queries, tuples, params)?;
            random_select(tuples.len(), params.k, params.seed)
        }
    };
    Ok(DiverseResult {
        algorithm,
        params: params.clone(),
        selected: annotate(queries, tuples, &selected, params.distance),
    })
}
