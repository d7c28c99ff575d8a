//! Tuple serialization, tuple embedding providers, the distance `δ`, the
//! cosine embedding loss and the threshold classifier.

mod distance;
mod matrix;
mod ser;

pub use distance::{
    classify_unionable, cosine_distance, cosine_embedding_loss, cosine_similarity, pair_accuracy,
    Distance, UNIONABLE_THRESHOLD,
};
#[allow(unused_imports)]
pub(crate) use distance::{dot, norm};
pub use matrix::{
    embed_tuples, export_serialized, read_serialized, write_embeddings_jsonl, EmbeddingMatrix,
    HashedPairProvider, JsonlTupleProvider, TupleProvider, DEFAULT_TUPLE_DIM, TRANSFORMER_DIM,
};
pub use ser::{escape, parse_serialized, serialize_tuple, unescape, SerializedTuple, CLS, SEP};
