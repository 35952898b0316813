//! Training and evaluation runs over stored features and triplet responses.

use crate::embed::embed_triplets;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::metric::{
    evaluate, select_lambda, train_detailed, LambdaSelection, MetricModel, TrainOptions,
    TrainingMeta, DEFAULT_LAMBDA_GRID,
};
use crate::reduction::{fit_pca, FeatureConfig, PcaParams};
use crate::store::FeatureStore;
use crate::triplets::{label_all, oracle_consistency, split_train_test, TripletResponses};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};

/// Number of annotated triplets the reference protocol trains on.
pub const REFERENCE_TRAIN: usize = 600;
/// Total annotated triplets in the reference protocol.
pub const REFERENCE_TOTAL: usize = 847;

/// Independent sub-seed for one named use of the run seed.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(purpose.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Training-set size when none is given: 600 when more than 600 labeled
/// triplets exist, otherwise the same 600/847 proportion.
pub fn default_train_size(labeled: usize) -> usize {
    if labeled > REFERENCE_TRAIN {
        REFERENCE_TRAIN
    } else {
        labeled * REFERENCE_TRAIN / REFERENCE_TOTAL
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum LambdaChoice {
    Fixed(f64),
    CrossValidate { grid: Vec<f64>, folds: usize },
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::CrossValidate {
            grid: DEFAULT_LAMBDA_GRID.to_vec(),
            folds: 5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainPlan {
    pub config: FeatureConfig,
    pub lambda: LambdaChoice,
    /// `None` applies [`default_train_size`].
    pub n_train: Option<usize>,
    pub seed: u64,
    pub options: TrainOptions,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub model: MetricModel,
    pub n_train: usize,
    pub n_test: usize,
    pub n_ties: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Unit weights (plain Euclidean distance) on the same test set.
    pub baseline_accuracy: f64,
    pub oracle: f64,
    pub lambda_selection: Option<LambdaSelection>,
}

/// Fit PCA for every reduced feature of `config` on the given images.
pub fn fit_config_pca(
    config: &FeatureConfig,
    store: &FeatureStore,
    ids: &BTreeSet<&str>,
) -> Result<BTreeMap<String, PcaParams>> {
    let mut out = BTreeMap::new();
    for spec in config.features() {
        let Some(dim) = spec.pca_dim else { continue };
        let samples = ids
            .iter()
            .map(|id| store.feature(id, &spec.name).cloned())
            .collect::<Result<Vec<FeatureVector>>>()?;
        out.insert(spec.name.clone(), fit_pca(&samples, dim)?);
    }
    Ok(out)
}

/// Split, fit PCA on the training images, choose λ, train and evaluate.
pub fn run_training(
    store: &FeatureStore,
    responses: &[TripletResponses],
    plan: &TrainPlan,
) -> Result<TrainReport> {
    let oracle = oracle_consistency(responses)?;
    let labels = label_all(responses);
    if !labels.ties.is_empty() {
        log::info!("{} tied triplets excluded from training", labels.ties.len());
    }
    let n_train = plan
        .n_train
        .unwrap_or_else(|| default_train_size(labels.labeled.len()));
    if n_train == 0 {
        return Err(Error::EmptyData);
    }
    let (train_set, test_set) =
        split_train_test(&labels.labeled, n_train, derive_seed(plan.seed, "split"))?;

    let train_ids: BTreeSet<&str> = train_set
        .iter()
        .flat_map(|t| [t.ref_id.as_str(), t.winner_id.as_str(), t.loser_id.as_str()])
        .collect();
    let pca = fit_config_pca(&plan.config, store, &train_ids)?;
    let train_emb = embed_triplets(&plan.config, &pca, store, &train_set)?;
    let test_emb = embed_triplets(&plan.config, &pca, store, &test_set)?;

    let (lambda, lambda_selection) = match &plan.lambda {
        LambdaChoice::Fixed(l) => (*l, None),
        LambdaChoice::CrossValidate { grid, folds } => {
            let sel = select_lambda(
                &train_emb,
                grid,
                *folds,
                derive_seed(plan.seed, "folds"),
                &plan.options,
            )?;
            (sel.lambda, Some(sel))
        }
    };
    let outcome = train_detailed(&train_emb, lambda, &plan.options)?;
    let dim = outcome.weights.len();
    let train_accuracy = evaluate(&outcome.weights, &train_emb)?;
    let test_accuracy = evaluate(&outcome.weights, &test_emb)?;
    let baseline_accuracy = evaluate(&vec![1.0; dim], &test_emb)?;

    let model = MetricModel::new(
        plan.config.clone(),
        pca,
        outcome.weights,
        lambda,
        TrainingMeta {
            n_train_triplets: train_set.len(),
            final_objective: outcome.final_objective,
            seed: plan.seed,
            iterations: outcome.iterations,
            converged: matches!(
                outcome.reason,
                crate::metric::StopReason::GradientTolerance
                    | crate::metric::StopReason::ObjectiveTolerance
            ),
        },
    )?;
    Ok(TrainReport {
        model,
        n_train: train_set.len(),
        n_test: test_set.len(),
        n_ties: labels.ties.len(),
        train_accuracy,
        test_accuracy,
        baseline_accuracy,
        oracle,
        lambda_selection,
    })
}
