//! Holistic column alignment: embed every query and candidate column,
//! cluster them under a same-table cannot-link rule, pick the cluster count
//! by silhouette, keep only clusters anchored by a query column, and
//! outer-union the candidates into one tuple pool.

mod align;
mod cluster;
mod provider;
mod tokens;

pub use align::{
    align_columns, alignment_pairs, alignment_prf, outer_union, prf, truth_pairs, AlignedCluster,
    AlignmentMap, AlignmentPair, Prf, UnionedTuple, UnionedTupleSet,
};
pub use cluster::{
    constrained_agglomerative, euclidean, merge_sequence, select_cluster_count, silhouette,
    ClusterChoice, MergeSequence,
};
pub use provider::{
    embed_column, ColumnProvider, ColumnVector, EmbedMode, HashedBagProvider, JsonlColumnProvider,
    DEFAULT_COLUMN_DIM,
};
pub use tokens::{
    column_tokens, tfidf_select_tokens, tokenize, TokenCorpus, WeightedToken, MAX_COLUMN_TOKENS,
};
