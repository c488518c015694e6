//! Goal-driven editing of indoor scene graphs by a planner agent and an
//! executor agent, with collision-aware validation, safety constraints,
//! schematic rendering, dataset export, and a preference-study harness.

pub mod agents;
pub mod constraints;
pub mod env;
pub mod eval;
pub mod geometry;
pub mod pipeline;
pub mod render;
pub mod scene;
