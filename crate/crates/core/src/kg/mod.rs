//! Knowledge-graph support: store loading, claim linking, TransE scoring.

mod linking;
mod relmap;
mod scoring;
mod store;

pub use linking::{fold, link_claim, string_similarity, AlignmentSet, Candidate, DEFAULT_THETA_LINK};
pub use relmap::{canonical_key, RelationMap};
pub use scoring::{
    claim_kge, combine_kg, kg_coverage, kg_score, plausibility_from_distance, sigmoid, transe_distance,
    transe_plausibility, KgCoverage,
};
pub use store::{
    load_embeddings, load_kg, load_kg_dir, KgStore, TripleIdx, ENTITY_EMBEDDINGS_FILE, RELATION_EMBEDDINGS_FILE,
    TRIPLES_FILE,
};
