//! Style similarity for bitmap infographics.
//!
//! The pipeline normalizes each image to a fixed window, extracts low-level
//! descriptors (color and luminance histograms, HoG, LBP), reduces the large
//! ones with PCA, learns a diagonal weighted distance from crowdsourced
//! triplet judgments, and answers search-by-example queries under the learned
//! distance.

pub mod embed;
pub mod error;
pub mod features;
pub mod imaging;
pub mod json;
pub mod metric;
pub mod pipeline;
pub mod reduction;
pub mod retrieval;
pub mod store;
pub mod triplets;

pub use error::{Error, Result};
pub use features::{FeatureKind, FeatureVector};
pub use imaging::{decode_image, normalize_window, PixelGrid};
pub use metric::{EmbeddedTriplet, MetricModel};
pub use reduction::{FeatureConfig, FeatureSpec, PcaParams};
pub use retrieval::{build_index, Hit, SearchIndex, Searcher};
pub use store::{CorpusEntry, FeatureStore};
pub use triplets::{LabeledTriplet, TripletResponses};
