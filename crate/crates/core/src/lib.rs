//! Road-scene labeling pipeline: view planning over road graphs, synthetic
//! asset worlds, label-map compositing, class taxonomies and crowd votes.

pub mod annotation;
pub mod compositor;
pub mod geometry;
pub mod roadgraph;
pub mod synth;
pub mod taxonomy;
pub mod viewplan;
pub mod world;

pub use geometry::Vec2;
