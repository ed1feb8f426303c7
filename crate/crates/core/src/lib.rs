//! Point-to-region assignment over a state / county / block group hierarchy.
//!
//! Two engines share the same inputs and result type:
//!
//! * [`simple_mapper`] descends the hierarchy level by level, filtering with
//!   sparse bounding-box membership matrices and resolving ambiguous points
//!   with the batched crossing-number kernel in [`geometry`].
//! * [`cell_index`] approximates every block group by non-overlapping
//!   quadtree cells (interior or boundary), indexes them in a radix trie and
//!   answers most queries with a single lookup.
//!
//! [`cli`] wires both into the `fastmap` command line tool.

pub mod batch;
pub mod cell_index;
pub mod cli;
pub mod geometry;
pub mod hierarchy;
pub mod simple_mapper;

pub use geometry::{BBox, Point, PolygonGeometry};
pub use hierarchy::{Fips12, RegionHierarchy};

pub use simple_mapper::{AssignmentResult, Mode};
