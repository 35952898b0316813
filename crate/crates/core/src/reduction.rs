//! Per-feature PCA and assembly of the final concatenated feature vector.

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureVector};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

/// Total dimension budget of an assembled vector under the default recipe.
pub const DEFAULT_BUDGET: usize = 230;

/// One entry of a [`FeatureConfig`]: a feature name and, if the feature is
/// reduced, the PCA target dimension.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub pca_dim: Option<usize>,
}

impl FeatureSpec {
    pub fn raw(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pca_dim: None,
        }
    }

    pub fn reduced(name: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            pca_dim: Some(dim),
        }
    }
}

/// Ordered list of features to concatenate. Order matters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureSpec>", into = "Vec<FeatureSpec>")]
pub struct FeatureConfig {
    features: Vec<FeatureSpec>,
}

impl FeatureConfig {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidParam("feature config is empty".into()));
        }
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidParam(format!(
                    "feature `{}` listed twice",
                    f.name
                )));
            }
            if f.pca_dim == Some(0) {
                return Err(Error::InvalidParam(format!(
                    "PCA dimension for `{}` must be positive",
                    f.name
                )));
            }
        }
        Ok(Self { features })
    }

    /// Default recipe: the color and luminance histograms stay raw and the
    /// rest of the budget is shared evenly by the other (reduced) features,
    /// earlier features taking any remainder.
    pub fn with_budget(names: &[&str], budget: usize) -> Result<Self> {
        let compact = |n: &str| n.parse::<FeatureKind>().is_ok_and(|k| k.is_compact());
        let raw_dims: usize = names
            .iter()
            .filter(|n| compact(n))
            .map(|n| n.parse::<FeatureKind>().unwrap().window_len())
            .sum();
        let n_reduced = names.iter().filter(|n| !compact(n)).count();
        let remaining = budget.saturating_sub(raw_dims);
        if n_reduced > 0 && remaining < n_reduced {
            return Err(Error::InvalidParam(format!(
                "budget {budget} leaves no room for reduced features"
            )));
        }
        let mut reduced_seen = 0;
        let specs = names
            .iter()
            .map(|&n| {
                if compact(n) {
                    FeatureSpec::raw(n)
                } else {
                    let share = remaining / n_reduced
                        + usize::from(reduced_seen < remaining % n_reduced);
                    reduced_seen += 1;
                    FeatureSpec::reduced(n, share)
                }
            })
            .collect();
        Self::new(specs)
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    /// Identity of the combination, e.g. `color_hist+hog16`.
    pub fn name(&self) -> String {
        self.features
            .iter()
            .map(|f| f.name.as_str())
            .collect::<Vec<_>>()
            .join("+")
    }

    pub fn feature_names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }
}

impl TryFrom<Vec<FeatureSpec>> for FeatureConfig {
    type Error = Error;
    fn try_from(v: Vec<FeatureSpec>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FeatureConfig> for Vec<FeatureSpec> {
    fn from(c: FeatureConfig) -> Self {
        c.features
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .features
            .iter()
            .map(|s| match s.pca_dim {
                Some(d) => format!("{}:{d}", s.name),
                None => format!("{}:raw", s.name),
            })
            .collect();
        f.write_str(&parts.join("+"))
    }
}

/// Parses `color_hist+hog16` (default budget) or explicit
/// `color_hist:raw+hog16:200`. Explicit and implicit entries cannot be mixed.
impl FromStr for FeatureConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('+').map(str::trim).collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::InvalidParam(format!("malformed feature config `{s}`")));
        }
        let explicit = parts.iter().filter(|p| p.contains(':')).count();
        if explicit == 0 {
            return Self::with_budget(&parts, DEFAULT_BUDGET);
        }
        if explicit != parts.len() {
            return Err(Error::InvalidParam(format!(
                "feature config `{s}` mixes explicit and default dimensions"
            )));
        }
        let specs = parts
            .iter()
            .map(|p| {
                let (name, dim) = p.split_once(':').unwrap();
                if dim == "raw" {
                    Ok(FeatureSpec::raw(name))
                } else {
                    dim.parse::<usize>()
                        .map(|d| FeatureSpec::reduced(name, d))
                        .map_err(|_| Error::InvalidParam(format!("bad dimension in `{p}`")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(specs)
    }
}

/// Fitted PCA projection for one feature type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaParams {
    pub feature_name: String,
    pub mean: Vec<f64>,
    /// `target_dim` rows, each of length `mean.len()`, mutually orthonormal.
    pub components: Vec<Vec<f64>>,
    /// Effective output dimension (may be below the requested one when the
    /// samples have lower rank).
    pub target_dim: usize,
    /// Sample variance along each component, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaParams {
    pub fn raw_dim(&self) -> usize {
        self.mean.len()
    }

    /// Map projected coordinates back to the raw feature space.
    pub fn reconstruct(&self, projected: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (coef, row) in projected.iter().zip(&self.components) {
            for (o, c) in out.iter_mut().zip(row) {
                *o += coef * c;
            }
        }
        out
    }
}

/// Fit PCA by SVD of the centered sample matrix.
pub fn fit_pca(samples: &[FeatureVector], target_dim: usize) -> Result<PcaParams> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if target_dim == 0 {
        return Err(Error::InvalidParam("PCA target dimension must be ≥ 1".into()));
    }
    let name = &samples[0].feature_name;
    let dim = samples[0].len();
    for s in samples {
        if s.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: s.len(),
            });
        }
        if &s.feature_name != name {
            return Err(Error::InvalidParam(format!(
                "PCA samples mix features `{name}` and `{}`",
                s.feature_name
            )));
        }
        if s.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
    }

    let n = samples.len();
    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(&s.values) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, dim, |r, c| samples[r].values[c] - mean[c]);
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let sigma_max = order.first().map_or(0.0, |&i| sv[i]);
    let tol = n.max(dim) as f64 * f64::EPSILON * sigma_max;
    let rank = order.iter().filter(|&&i| sv[i] > tol).count();
    let effective = target_dim.min(rank);
    if effective < target_dim {
        log::info!(
            "PCA for `{name}`: requested {target_dim} components, sample rank is {rank}; using {effective}"
        );
    }

    let mut components = Vec::with_capacity(effective);
    let mut explained_variance = Vec::with_capacity(effective);
    for &i in &order[..effective] {
        let mut row: Vec<f64> = v_t.row(i).iter().copied().collect();
        // largest-magnitude entry positive, first index wins ties
        let pivot = row
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (j, &v)| {
                if v.abs() > best.1 {
                    (j, v.abs())
                } else {
                    best
                }
            })
            .0;
        if row[pivot] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(row);
        explained_variance.push(sv[i] * sv[i] / (n - 1) as f64);
    }

    Ok(PcaParams {
        feature_name: name.clone(),
        mean,
        components,
        target_dim: effective,
        explained_variance,
    })
}

/// Project a vector onto the fitted components.
pub fn apply_pca(params: &PcaParams, v: &FeatureVector) -> Result<FeatureVector> {
    if v.feature_name != params.feature_name {
        return Err(Error::InvalidParam(format!(
            "PCA fitted for `{}` applied to `{}`",
            params.feature_name, v.feature_name
        )));
    }
    if v.len() != params.raw_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.raw_dim(),
            actual: v.len(),
        });
    }
    let values = params
        .components
        .iter()
        .map(|row| {
            row.iter()
                .zip(&v.values)
                .zip(&params.mean)
                .map(|((c, x), m)| c * (x - m))
                .sum()
        })
        .collect();
    Ok(FeatureVector::new(v.feature_name.clone(), values))
}

/// Concatenate per-feature vectors in config order, reducing those the
/// config marks for PCA.
pub fn assemble(
    config: &FeatureConfig,
    per_feature: &BTreeMap<String, FeatureVector>,
    pca: &BTreeMap<String, PcaParams>,
) -> Result<FeatureVector> {
    let mut values = Vec::new();
    for spec in config.features() {
        let v = per_feature
            .get(&spec.name)
            .ok_or_else(|| Error::MissingFeature {
                id: String::new(),
                feature: spec.name.clone(),
            })?;
        match spec.pca_dim {
            None => values.extend_from_slice(&v.values),
            Some(_) => {
                let params = pca
                    .get(&spec.name)
                    .ok_or_else(|| Error::MissingPca(spec.name.clone()))?;
                values.extend(apply_pca(params, v)?.values);
            }
        }
    }
    Ok(FeatureVector::new(config.name(), values))
}

/// Output dimension of [`assemble`] given raw feature lengths and fitted PCA.
pub fn assembled_dim(
    config: &FeatureConfig,
    raw_dims: &BTreeMap<String, usize>,
    pca: &BTreeMap<String, PcaParams>,
) -> Result<usize> {
    config
        .features()
        .iter()
        .map(|spec| match spec.pca_dim {
            None => raw_dims.get(&spec.name).copied().ok_or_else(|| Error::MissingFeature {
                id: String::new(),
                feature: spec.name.clone(),
            }),
            Some(_) => pca
                .get(&spec.name)
                .map(|p| p.target_dim)
                .ok_or_else(|| Error::MissingPca(spec.name.clone())),
        })
        .sum()
}
