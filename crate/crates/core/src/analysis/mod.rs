//! Analyses of a landscape: agreement with ground truth, outlier structure
//! types, disconnectivity trees and frustration.

pub mod compare;
pub mod disconnectivity;
pub mod frustration;
pub mod report;
pub mod structure;
pub mod svg;

pub use compare::{accuracy, adjusted_rand_index, partition_signature, rand_index, CompareError};
pub use disconnectivity::{build_disconnectivity, default_range, superbasins, DisconnectivityTree};
pub use frustration::{frustration_profile, FrustrationProfile};
pub use structure::{canonical_id, enumerate_structure_types, structure_type, StructureType};
pub use svg::{emit_disconnectivity, Colouring};
