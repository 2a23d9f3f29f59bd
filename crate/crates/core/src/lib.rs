//! Topic landscapes of political conversation built from hashtag
//! co-occurrence.
//!
//! The crate turns a tweet stream into a hashtag graph, partitions it into
//! topics, tracks how each user's topic usage deviates from the crowd over
//! sliding windows, and aggregates those deviations into self and cross
//! similarity series per party.

pub mod affiliation;
pub mod artifacts;
pub mod dynamics;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod semantic_graph;
pub mod similarity;
pub mod synth;
pub mod topics;
