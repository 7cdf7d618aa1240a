//! Headless core of the hair authoring engine.
//!
//! Everything that does not need a network or a window lives here: strand
//! geometry and validation, procedural growth, the mass-spring simulation
//! with grid coupling, grooming, text retrieval, the Canny edge pipeline,
//! the binary asset formats, and the session wire protocol.

pub mod assets;
pub mod fixtures;
pub mod groom;
pub mod growth;
pub mod imaging;
pub mod model;
pub mod protocol;
pub mod retrieval;
pub mod rng;
pub mod sim;

pub use glam::{DMat3, DVec3};

pub use growth::{grow_region, grow_strand, sample_root, sweep_grid, GrowthCursor, GrowthParams};
pub use model::{
    validate_hairstyle, Hairstyle, HeadMesh, PaintSelection, RenderAttributes, Sphere, Strand,
    StyleSource, Violation,
};
pub use retrieval::{
    build_index, embed_text, retrieve_top_k, route_intent, EmbeddingIndex, EmbeddingProvider,
    HashingEmbedder, Intent, SimilarityResult, TextEmbedding,
};
pub use sim::{RigidTransform, SimConfig, SimError, SimState, WindField};
