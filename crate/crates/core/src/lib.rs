//! Leveled attracting/repelling decompositions of piecewise-monotone interval
//! maps, alpha-limit set classification, weak Morse decompositions and the
//! associated Lyapunov function, computed on uniform box covers.

pub mod box_graph;
pub mod canonical;
pub mod decomposition;
pub mod error;
pub mod interval_set;
pub mod lorenz_renorm;
pub mod lyapunov;
pub mod map_model;
pub mod pipeline;

pub use error::{Error, Result};
pub use interval_set::IntervalUnion;
pub use map_model::{PiecewiseMap, Side};
