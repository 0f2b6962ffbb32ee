//! Desk-scale machinery for restricted projections in R³.
//!
//! The crate is organised bottom-up:
//!
//! * [`geom3`]: vectors, direction curves, the line/plane projection families and
//!   θ-sublevel measurement.
//! * [`measure`]: weighted point clouds, IFS sampling, growth exponents and Riesz energies.
//! * [`covers`]: ball covers, the 5r reduction, box counting and the scale pigeonhole.
//! * [`conegeom`]: graph cones over a convex profile and the two-cones covering algorithm.
//! * [`threecones`]: the right circular cone, radical planes and the three-cones decision.
//! * [`pipeline`]: tube systems, energies, cone masses and heavy tuple extraction.
//! * [`cli`]: scenario configs, CSV tables and log-log fits.

pub mod cli;
pub mod conegeom;
pub mod covers;
pub mod geom3;
pub mod measure;
pub mod pipeline;
pub mod threecones;
pub mod util;

pub use geom3::{DirectionCurve, Interval, ProjectionFamily, Vec3};
pub use measure::WeightedPointCloud;
