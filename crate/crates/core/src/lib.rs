//! Exact point-wise l_p robustness verification for feed-forward ReLU classifiers.
//!
//! The activation patterns of a ReLU network partition input space into
//! polyhedral regions on which the network is affine. Layer by layer these
//! regions form a nested hyperplane arrangement. This crate searches that
//! structure in order of increasing distance from an input point until either
//! the closest decision boundary is found or a requested radius is certified.
//!
//! Two engines are provided:
//!
//! - [`search::geocert`]: best-first search over the flat neighbourhood graph
//!   of full activation patterns.
//! - [`search::layercert`]: hierarchical best-first search over partial
//!   patterns, optionally pruned by interval arithmetic and warm started /
//!   restricted by a CROWN-style linear lower bound.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, timing and the
//! command line live in the companion `layercert` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
#[macro_use]
extern crate std;

pub mod bounds;
pub mod geometry;
pub mod linalg;
pub mod network;
pub mod oracle;
pub mod search;
pub mod solver;

pub use bounds::{
    contains_db, contains_db_against, interval_propagate, linear_lower_bound, min_over_ball, restriction,
    restriction_set, warm_start, DbCheck, IntervalBounds, IntervalVector, Restriction, RestrictionMember,
    RestrictionSet,
};
pub use geometry::{
    face_polyhedron, hyperplane_distance, prune_constraints, region_polyhedron, Ball, Halfspace, Polyhedron,
    PruneOutcome,
};
pub use linalg::Norm;
pub use network::{
    activation_pattern, affine_prefix, decision_affine, ActivationPattern, AffineMap, Layer, LinearFunc, NetworkError,
    PatternKey, ReluNetwork,
};
pub use oracle::{
    brute_force_distance, brute_force_over, enumerate_regions, enumerate_regions_with_cap, BruteForce, OracleError,
    RegionCatalog, DEFAULT_CAP,
};
pub use search::{
    adversarial_witness, decision_bound, geocert, layercert, next_layer, verify, Clock, Counters, DecisionBound,
    Method, NoClock, RestrictionMode, SearchConfig, SearchError, SeenPolicy, VerificationResult, VerificationStatus,
};
pub use solver::{feasible, project, ProjectionResult, ProjectionStatus, SolverError, Tolerances};
