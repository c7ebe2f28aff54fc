//! Hilbert geometries: projective points and maps, properly convex domains,
//! the Hilbert metric, spectral data of automorphisms, rank-one diagnostics
//! and experiments on marked groups.

// `!(x > 0.0)` is used on purpose: NaN must take the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod automorphism;
pub mod bundled;
pub mod domain;
mod error;
pub mod group;
pub mod metric;
mod minimize;
pub mod projective;
pub mod rank_one;
pub mod rng;

pub use automorphism::{
    axes, classify, omega_limit_sample, spectral, translation_length, AxisReport, IsometryClass,
    SpectralData,
};
pub use domain::{Classification, ConvexDomain, DomainSpec, FaceDescriptor, FaceKind};
pub use error::{Error, Result};
pub use group::{GeodesicCensus, MarkedGroup};
pub use metric::{GeodesicLine, GeodesicSegment, LineProjection};
pub use projective::{apply_map, chart_roundtrip, cross_ratio, AffineChart, ProjMap, ProjPoint};
pub use rank_one::{is_rank_one, ContractionReport, RankOneReason, RankOneVerdict, ThinnessReport};

use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by every oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Point equality and boundary thickness.
    pub point: f64,
    /// Collinearity rank test, relative to the largest singular value.
    pub collinear: f64,
    pub det: f64,
    /// Relative tolerance for equal eigenvalue moduli.
    pub modulus: f64,
    /// Relative rank tolerance for eigenspace computations.
    pub rank: f64,
    pub residual: f64,
    /// Height of the sublevel set used to detect flat minima.
    pub flat: f64,
    /// Parameter resolution of line projections.
    pub proj: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            point: 1e-10,
            collinear: 1e-9,
            det: 1e-12,
            modulus: 1e-8,
            rank: 1e-8,
            residual: 1e-6,
            flat: 1e-7,
            proj: 1e-7,
        }
    }
}
