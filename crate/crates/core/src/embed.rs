//! From pixels or stored features to vectors in a model's feature space.

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureVector};
use crate::imaging::{normalize_window, PixelGrid};
use crate::metric::{EmbeddedTriplet, MetricModel};
use crate::reduction::{assemble, FeatureConfig, PcaParams};
use crate::store::FeatureStore;
use crate::triplets::LabeledTriplet;
use std::collections::{BTreeMap, HashMap};

/// Normalize an image and compute the requested descriptors.
pub fn extract_features(img: &PixelGrid, kinds: &[FeatureKind]) -> Vec<FeatureVector> {
    let window = normalize_window(img);
    kinds.iter().map(|k| k.extract(&window)).collect()
}

/// Built-in descriptors named by a config; errors on externally supplied
/// feature types, which cannot be computed from pixels.
pub fn builtin_kinds(config: &FeatureConfig) -> Result<Vec<FeatureKind>> {
    config
        .feature_names()
        .map(|n| {
            n.parse::<FeatureKind>().map_err(|_| {
                Error::InvalidParam(format!(
                    "feature `{n}` is supplied externally and cannot be computed from an image"
                ))
            })
        })
        .collect()
}

/// Assemble one stored image; missing features report the image id.
pub fn embed_stored(
    config: &FeatureConfig,
    pca: &BTreeMap<String, PcaParams>,
    store: &FeatureStore,
    id: &str,
) -> Result<Vec<f64>> {
    let missing = |feature: &str| Error::MissingFeature {
        id: id.to_string(),
        feature: feature.to_string(),
    };
    let features = store.get(id).ok_or_else(|| {
        missing(config.feature_names().next().unwrap_or_default())
    })?;
    assemble(config, features, pca)
        .map(|v| v.values)
        .map_err(|e| match e {
            Error::MissingFeature { feature, .. } => missing(&feature),
            other => other,
        })
}

/// Embed an image through normalize → descriptors → PCA → concatenation.
pub fn embed_image(model: &MetricModel, img: &PixelGrid) -> Result<Vec<f64>> {
    let kinds = builtin_kinds(&model.feature_config)?;
    let per_feature: BTreeMap<String, FeatureVector> = extract_features(img, &kinds)
        .into_iter()
        .map(|v| (v.feature_name.clone(), v))
        .collect();
    let v = assemble(&model.feature_config, &per_feature, &model.pca)?;
    if v.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: v.len(),
        });
    }
    Ok(v.values)
}

/// Embed labeled triplets, computing each image's vector once.
pub fn embed_triplets(
    config: &FeatureConfig,
    pca: &BTreeMap<String, PcaParams>,
    store: &FeatureStore,
    triplets: &[LabeledTriplet],
) -> Result<Vec<EmbeddedTriplet>> {
    let mut cache: HashMap<String, Vec<f64>> = HashMap::new();
    let mut get = |id: &str| -> Result<Vec<f64>> {
        if let Some(v) = cache.get(id) {
            return Ok(v.clone());
        }
        let v = embed_stored(config, pca, store, id)?;
        cache.insert(id.to_string(), v.clone());
        Ok(v)
    };
    triplets
        .iter()
        .map(|t| EmbeddedTriplet::new(get(&t.ref_id)?, get(&t.winner_id)?, get(&t.loser_id)?))
        .collect()
}
