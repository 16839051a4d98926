//! Graphical mean curvature flow of strictly area decreasing maps into
//! surfaces, with the frame calculus, evolution-equation residuals, decay
//! bounds, barriers and limit classification needed to check it numerically.

pub mod app;
pub mod barrier;
pub mod classify;
pub mod error;
pub mod flow;
pub mod frames;
pub mod geometry;
pub mod grid;
pub mod identities;
pub mod immersion;
pub mod linalg;
pub mod verify;

pub use error::{Error, Result};
