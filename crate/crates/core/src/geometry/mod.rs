pub mod conditions;
pub mod curvature;
pub mod manifold;
pub mod warped;

pub use conditions::{curvature_conditions_report, CurvatureReport, SamplingParams};
pub use curvature::{bi_ricci, curvature_package, sectional, CurvatureTensors};
pub use manifold::{Axis, AxisKind, ChartManifold, Christoffel, CurvatureModel};
pub use warped::{Warp, WarpedSurface};
