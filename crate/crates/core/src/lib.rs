//! Drivable-area post-processing for lane-aware navigation.
//!
//! A three-class segmentation mask (background, ego lane, other lanes) is
//! downsampled, clustered per class with DBSCAN, wrapped in convex hulls and
//! cleaned of cross-class overlap (the ego lane always yields). Remaining
//! other-lane regions are assigned to the left or right of the ego lane and
//! the biggest region per lane is kept. Around that core sit the navigation
//! policy, segmentation metrics, multi-task loss math, a synthetic scene
//! generator and a two-stage frame pipeline with a binary wire protocol.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar for common use.

pub mod clustering;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod loss;
pub mod metrics;
pub mod overlay;
pub mod pipeline;
pub mod pnm;
pub mod policy;
pub mod regions;
pub mod report;
pub mod scalar;
pub mod scenes;
pub mod types;

pub use clustering::{dbscan, dbscan_bruteforce, ClusterLabels, ClusterParams, Label};
pub use error::{Error, Result};
pub use geometry::{convex_hull, convex_intersection, convex_subtract, ConvexPolygon, PolygonSet};
pub use loss::{ClassWeights, LossTerms, UncertaintyParams};
pub use pipeline::{run_pipeline, MaskFrame, PipelineConfig, PipelineStats};
pub use policy::{advise, LaneChange, NavigationAdvice};
pub use regions::{extract_regions, DrivableRegion, ExtractionConfig, RegionSet};
pub use report::RegionDocument;
pub use scalar::Scalar;
pub use types::{ClassId, Lane, Point, RoadClass, SegmentationMask};

/// Artifact version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Point64 = Point<f64>;
pub type Point32 = Point<f32>;
pub type ConvexPolygon64 = ConvexPolygon<f64>;
pub type ConvexPolygon32 = ConvexPolygon<f32>;
pub type PolygonSet64 = PolygonSet<f64>;
pub type PolygonSet32 = PolygonSet<f32>;
pub type ClusterParams64 = ClusterParams<f64>;
pub type ClusterParams32 = ClusterParams<f32>;
pub type ExtractionConfig64 = ExtractionConfig<f64>;
pub type ExtractionConfig32 = ExtractionConfig<f32>;
pub type DrivableRegion64 = DrivableRegion<f64>;
pub type DrivableRegion32 = DrivableRegion<f32>;
pub type RegionSet64 = RegionSet<f64>;
pub type RegionSet32 = RegionSet<f32>;
pub type ClassWeights64 = ClassWeights<f64>;
pub type ClassWeights32 = ClassWeights<f32>;
pub type LossTerms64 = LossTerms<f64>;
pub type UncertaintyParams64 = UncertaintyParams<f64>;
