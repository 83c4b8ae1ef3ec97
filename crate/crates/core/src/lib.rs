//! Quality control for single-neuron reconstructions.
//!
//! The crate compares a wrong reconstruction against the correct one of the
//! same neuron, finds the points where wrong tracing begins (points of
//! interest), and turns them into labeled two-channel 3D patches for a
//! per-point classifier. Classifier scores come back as a CSV and are
//! summarised by [`metrics`].
//!
//! Coordinates in SWC files are taken to be voxel coordinates of the
//! associated volume, offset by the volume origin.

pub mod dataset;
pub mod error;
pub mod matching;
pub mod metrics;
pub mod patch;
pub mod poi;
pub mod raster;
pub mod swc;
pub mod synthetic;
pub mod volume;

pub use error::{Error, Result};
pub use matching::{find_match, match_map, MatchConfig, MatchMap, SpatialIndex};
pub use poi::{label_pois, PoiLabelSet, PoiReason};
pub use swc::{parse_swc, serialize_swc, NeuronPoint, NeuronReconstruction, PointKind};

/// Unit assumed for SWC coordinates; written into exported metadata.
pub const COORDINATE_UNITS: &str = "voxel";
