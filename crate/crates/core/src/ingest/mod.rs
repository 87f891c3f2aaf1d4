//! Flow-table ingestion: schemas, CSV parsing, feature extraction and scaling.

mod cache;
mod matrix;
mod normalize;
mod schema;
mod table;

pub use cache::{read_cache, write_cache, CACHE_VERSION};
pub use matrix::FeatureMatrix;
pub use normalize::{apply_normalizer, fit_normalizer, FeatureStats, NormalizationMethod, NormalizationParams};
pub use schema::{ColumnKind, ColumnRef, ColumnSpec, DatasetSchema, FlowRoles, PRESET_NAMES};
pub use table::{parse_csv, read_header, BadRowPolicy, RawTable};

/// Parses CSV bytes and extracts the feature matrix in one step.
pub fn load_matrix(bytes: &[u8], schema: &DatasetSchema, policy: BadRowPolicy) -> crate::Result<FeatureMatrix> {
    parse_csv(bytes, schema)?.to_feature_matrix(policy)
}
