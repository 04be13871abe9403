//! Mean curvature flow with surgery for rotationally symmetric immersions
//! of arbitrary codimension, with pointwise verification tools.

pub mod config;
pub mod flow;
pub mod geometry;
pub mod models;
pub mod neck;
pub mod pinching;
pub mod pipeline;
pub mod surgery;
pub mod taylor;
pub mod topology;
pub mod verify;
