//! Time-frequency tiles, oscillatory tile operators and the tree/forest
//! selection algorithm for the quadratic Carleson operator
//! `sup_{a,b} |∫ e^{i(ay+by²)} f(x−y) dy/y|`, at desk scale.

pub mod config;
pub mod decompose;
pub mod dyadic;
pub mod geometry;
pub mod kernel;
pub mod linefield;
pub mod operator;
pub mod report;
pub mod render;
pub mod tile;
pub mod verify;

pub use config::Config;
pub use dyadic::{Axis, DyadicInterval, RealInterval};
pub use geometry::{bracket, delta, delta_pair, PairGeometry};
pub use kernel::{build_psi, build_r, psi_k, split_13, AveragedKernel, KernelPiece};
pub use tile::{leq, lneq, top_leq, trianglelefteq, Line, Tile, TileKey, Top};
pub use linefield::{mass, LineField, MassConfig, Occupancy};
pub use operator::{NormMode, OperatorMatrix, SampledFunction, TileOperator};
pub use decompose::{decompose, DecompositionReport, Forest, Row, Tree, Universe};
