//! Gradient-boosted binary decision trees for destination classification.
//!
//! Boosting is gradient descent in function space under the binomial
//! log-likelihood loss: each round fits a regression tree to the residuals
//! `y - sigmoid(F)` of the current score function `F`, sets every leaf value
//! by a Newton step over the rows routed to it, and accumulates the shrunken
//! tree into `F`. Split search is exact greedy: every feature, with
//! candidate thresholds at the midpoints of consecutive distinct sorted
//! values, scored by squared-error reduction on the residual targets.
//!
//! Training is deterministic for a fixed seed, configuration, and data set:
//! row subsampling comes from a seeded generator, and the split arg-min
//! resolves ties toward the lowest feature index and then the lowest
//! threshold, in both the sequential and the rayon builds.
//!
//! Data layout is flat row-major `&[f64]` with an `n_features` stride.

use chrono::NaiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{StationRegistry, UserCategory};
use crate::features::{self, FeatureMask};
use crate::parallel;
use crate::{Error, Result};

/// Probability clamp for scores and the degenerate single-class base score.
pub const PROBABILITY_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of rows drawn (without replacement) per round.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            n_trees: 200,
            learning_rate: 0.1,
            max_depth: 5,
            min_samples_leaf: 20,
            subsample: 0.8,
            seed: 7,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning_rate must be in (0, 1]"));
        }
        if self.max_depth == 0 {
            return Err(Error::invalid("max_depth must be at least 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::invalid("subsample must be in (0, 1]"));
        }
        Ok(())
    }
}

/// A binary regression tree node. Internal nodes route `x[feature_index] <=
/// threshold` to the left child; leaves hold a log-odds increment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature_index: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
    },
}

impl TreeNode {
    pub fn evaluate(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Internal { feature_index, threshold, left, right } => {
                    node = if row[*feature_index] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub config: GbdtConfig,
    pub base_score: f64,
    pub n_features: usize,
    pub trees: Vec<TreeNode>,
}

/// Per-round training diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    /// Mean binomial deviance over the training set after each round.
    pub train_deviance: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROBABILITY_EPSILON, 1.0 - PROBABILITY_EPSILON)
}

pub fn fit(x: &[f64], n_features: usize, labels: &[u8], config: &GbdtConfig) -> Result<GbdtModel> {
    fit_with_trace(x, n_features, labels, config).map(|(model, _)| model)
}

pub fn fit_with_trace(
    x: &[f64],
    n_features: usize,
    labels: &[u8],
    config: &GbdtConfig,
) -> Result<(GbdtModel, FitTrace)> {
    config.validate()?;
    let n = labels.len();
    if n == 0 {
        return Err(Error::invalid("training set is empty"));
    }
    if n_features == 0 || x.len() != n * n_features {
        return Err(Error::invalid(format!(
            "matrix shape mismatch: {} values for {n} rows of {n_features} features",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite feature value"));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }

    let positive_fraction = labels.iter().map(|&y| y as f64).sum::<f64>() / n as f64;
    let base_score = {
        let p = clamp_probability(positive_fraction);
        (p / (1.0 - p)).ln()
    };

    let mut scores = vec![base_score; n];
    let mut trees = Vec::with_capacity(config.n_trees);
    let mut train_deviance = Vec::with_capacity(config.n_trees);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sample_size = if config.subsample < 1.0 {
        ((n as f64 * config.subsample).round() as usize).clamp(1, n)
    } else {
        n
    };

    for _ in 0..config.n_trees {
        let residuals =
            parallel::map_range(n, |i| labels[i] as f64 - sigmoid(scores[i]));

        let rows = if sample_size < n {
            sample_without_replacement(&mut rng, n, sample_size)
        } else {
            (0..n).collect()
        };

        let builder = TreeBuilder {
            x,
            n_features,
            targets: &residuals,
            scores: &scores,
            max_depth: config.max_depth,
            min_samples_leaf: config.min_samples_leaf,
        };
        let tree = builder.build(rows, 0);

        // the shrunken tree moves every row's score, not just the subsample
        let increments = parallel::map_range(n, |i| {
            tree.evaluate(&x[i * n_features..(i + 1) * n_features])
        });
        for (score, inc) in scores.iter_mut().zip(&increments) {
            *score += config.learning_rate * inc;
        }
        trees.push(tree);

        let deviances = parallel::map_range(n, |i| {
            let p = clamp_probability(sigmoid(scores[i]));
            let y = labels[i] as f64;
            -2.0 * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        });
        train_deviance.push(deviances.iter().sum::<f64>() / n as f64);
    }

    let model = GbdtModel { config: config.clone(), base_score, n_features, trees };
    Ok((model, FitTrace { train_deviance }))
}

/// Partial Fisher-Yates draw of `k` distinct indices from `0..n`, returned
/// sorted so downstream work is independent of draw order.
fn sample_without_replacement(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.gen_range(0..n - i);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool.sort_unstable();
    pool
}

struct TreeBuilder<'a> {
    x: &'a [f64],
    n_features: usize,
    targets: &'a [f64],
    scores: &'a [f64],
    max_depth: usize,
    min_samples_leaf: usize,
}

impl TreeBuilder<'_> {
    fn build(&self, rows: Vec<usize>, depth: usize) -> TreeNode {
        if depth >= self.max_depth || rows.len() < 2 * self.min_samples_leaf {
            return self.leaf(&rows);
        }
        let Some((feature_index, threshold)) = self.best_split(&rows) else {
            return self.leaf(&rows);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x[i * self.n_features + feature_index] <= threshold);
        if left_rows.is_empty() || right_rows.is_empty() {
            return self.leaf(&rows);
        }
        TreeNode::Internal {
            feature_index,
            threshold,
            left: Box::new(self.build(left_rows, depth + 1)),
            right: Box::new(self.build(right_rows, depth + 1)),
        }
    }

    /// Newton step for the log-loss leaf: sum of residuals over the sum of
    /// `p(1-p)` at the rows' current scores.
    fn leaf(&self, rows: &[usize]) -> TreeNode {
        let numerator: f64 = rows.iter().map(|&i| self.targets[i]).sum();
        let denominator: f64 = rows
            .iter()
            .map(|&i| {
                let p = sigmoid(self.scores[i]);
                p * (1.0 - p)
            })
            .sum();
        let value = if denominator > 1e-150 { numerator / denominator } else { 0.0 };
        TreeNode::Leaf { value }
    }

    /// Exhaustive greedy search over (feature, midpoint threshold),
    /// minimizing the summed squared error of the two children.
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64)> {
        let total_sum: f64 = rows.iter().map(|&i| self.targets[i]).sum();
        let n = rows.len() as f64;
        // minimizing child SSE is maximizing sum(left)^2/n_l + sum(right)^2/n_r
        let parent_gain = total_sum * total_sum / n;

        let candidates = parallel::map_range(self.n_features, |feature| {
            self.best_split_for_feature(feature, rows, total_sum, parent_gain)
        });
        let mut best: Option<(f64, usize, f64)> = None;
        for (feature, candidate) in candidates.into_iter().enumerate() {
            if let Some((gain, threshold)) = candidate {
                // strict comparison keeps the lowest feature index on ties
                if best.is_none_or(|(bg, _, _)| gain > bg) {
                    best = Some((gain, feature, threshold));
                }
            }
        }
        best.map(|(_, feature, threshold)| (feature, threshold))
    }

    fn best_split_for_feature(
        &self,
        feature: usize,
        rows: &[usize],
        total_sum: f64,
        parent_gain: f64,
    ) -> Option<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> = rows
            .iter()
            .map(|&i| (self.x[i * self.n_features + feature], self.targets[i]))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let n = pairs.len();
        let mut best: Option<(f64, f64)> = None;
        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += pairs[i].1;
            let left_n = i + 1;
            let right_n = n - left_n;
            if left_n < self.min_samples_leaf || right_n < self.min_samples_leaf {
                continue;
            }
            let (value, next_value) = (pairs[i].0, pairs[i + 1].0);
            if value == next_value {
                continue;
            }
            let threshold = 0.5 * (value + next_value);
            // a midpoint that rounds up to the next value cannot separate
            if threshold >= next_value {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let gain =
                left_sum * left_sum / left_n as f64 + right_sum * right_sum / right_n as f64;
            if gain > parent_gain && best.is_none_or(|(bg, _)| gain > bg) {
                best = Some((gain, threshold));
            }
        }
        best
    }
}

impl GbdtModel {
    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, actual: row.len() });
        }
        Ok(())
    }

    /// Accumulated log-odds: base score plus the shrunken sum of tree
    /// outputs.
    pub fn predict_score(&self, row: &[f64]) -> Result<f64> {
        self.check_row(row)?;
        let tree_sum: f64 = self.trees.iter().map(|t| t.evaluate(row)).sum();
        Ok(self.base_score + self.config.learning_rate * tree_sum)
    }

    /// Logistic of the score, clamped away from 0 and 1.
    pub fn predict_proba(&self, row: &[f64]) -> Result<f64> {
        Ok(clamp_probability(sigmoid(self.predict_score(row)?)))
    }

    /// 1 exactly when the probability reaches `threshold`.
    pub fn classify(&self, row: &[f64], threshold: f64) -> Result<u8> {
        Ok(u8::from(self.predict_proba(row)? >= threshold))
    }

    pub fn predict_proba_batch(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.n_features == 0 || !x.len().is_multiple_of(self.n_features) {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.len() % self.n_features.max(1),
            });
        }
        let n = x.len() / self.n_features;
        parallel::map_range(n, |i| {
            self.predict_proba(&x[i * self.n_features..(i + 1) * self.n_features])
        })
        .into_iter()
        .collect()
    }

    pub fn classify_batch(&self, x: &[f64], threshold: f64) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba_batch(x)?
            .into_iter()
            .map(|p| u8::from(p >= threshold))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<GbdtModel> {
        Ok(serde_json::from_str(json)?)
    }
}

/// Scores every station in the registry as a destination for a trip leaving
/// `origin`, most likely first; ties order by ascending station id. The
/// origin itself is included, since round trips to the same dock occur.
pub fn rank_destinations(
    model: &GbdtModel,
    user: &UserCategory,
    start: NaiveDateTime,
    origin: u32,
    registry: &StationRegistry,
    mask: FeatureMask,
) -> Result<Vec<(u32, f64)>> {
    registry.resolve(origin)?;
    if mask.dimension() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            actual: mask.dimension(),
        });
    }
    let ids = registry.ids();
    let mut scored: Vec<(u32, f64)> = parallel::map_collect(&ids, |&destination| {
        let vector = features::extract(
            user,
            start,
            crate::domain::StationPair::new(origin, destination),
            registry,
            mask,
        )?;
        Ok::<(u32, f64), Error>((destination, model.predict_proba(vector.values())?))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Gender;
    use crate::synth;
    use chrono::NaiveDate;

    fn stump_config() -> GbdtConfig {
        GbdtConfig {
            n_trees: 1,
            learning_rate: 1.0,
            max_depth: 1,
            min_samples_leaf: 1,
            subsample: 1.0,
            seed: 1,
        }
    }

    #[test]
    fn balanced_labels_give_zero_base_score() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let model = fit(&x, 1, &[0, 0, 1, 1], &stump_config()).unwrap();
        assert_eq!(model.base_score, 0.0);
    }

    #[test]
    fn separable_stump_reaches_perfect_training_accuracy() {
        let x = [-2.0, -1.0, 1.0, 2.0];
        let labels = [0, 0, 1, 1];
        let model = fit(&x, 1, &labels, &stump_config()).unwrap();
        let TreeNode::Internal { threshold, .. } = &model.trees[0] else {
            panic!("expected a split, got {:?}", model.trees[0]);
        };
        assert!((-1.0..1.0).contains(threshold), "threshold {threshold} between class extremes");
        for (i, &y) in labels.iter().enumerate() {
            assert_eq!(model.classify(&x[i..i + 1], 0.5).unwrap(), y);
        }
    }

    #[test]
    fn newton_leaf_value_hand_case() {
        // balanced labels make the base score 0, so both rows sit at score 0
        // with residuals +0.5 / -0.5; each leaf's step is 0.5/0.25 = 2
        let x = [0.0, 1.0];
        let model = fit(&x, 1, &[1, 0], &stump_config()).unwrap();
        let TreeNode::Internal { left, right, .. } = &model.trees[0] else {
            panic!("expected a stump");
        };
        assert_eq!(**left, TreeNode::Leaf { value: 2.0 });
        assert_eq!(**right, TreeNode::Leaf { value: -2.0 });
    }

    #[test]
    fn degenerate_single_class_is_clamped() {
        let x = [0.0, 1.0, 2.0];
        let model = fit(&x, 1, &[1, 1, 1], &stump_config()).unwrap();
        assert!(model.base_score.is_finite());
        for v in [0.0, 5.0, -3.0] {
            assert!(model.predict_proba(&[v]).unwrap() > 0.999);
        }
    }

    #[test]
    fn zero_tree_model_returns_base_score() {
        let model = GbdtModel {
            config: stump_config(),
            base_score: 0.37,
            n_features: 2,
            trees: Vec::new(),
        };
        assert_eq!(model.predict_score(&[1.0, 2.0]).unwrap(), 0.37);
    }

    #[test]
    fn stump_arithmetic() {
        let stump = TreeNode::Internal {
            feature_index: 0,
            threshold: 0.0,
            left: Box::new(TreeNode::Leaf { value: -1.0 }),
            right: Box::new(TreeNode::Leaf { value: 1.0 }),
        };
        let model = GbdtModel {
            config: GbdtConfig { learning_rate: 0.5, ..stump_config() },
            base_score: 0.0,
            n_features: 1,
            trees: vec![stump],
        };
        assert_eq!(model.predict_score(&[1.0]).unwrap(), 0.5);
        assert_eq!(model.predict_score(&[-1.0]).unwrap(), -0.5);
    }

    #[test]
    fn golden_three_tree_model_matches_hand_trace() {
        let stump = |feature_index: usize, threshold: f64, left: f64, right: f64| TreeNode::Internal {
            feature_index,
            threshold,
            left: Box::new(TreeNode::Leaf { value: left }),
            right: Box::new(TreeNode::Leaf { value: right }),
        };
        let model = GbdtModel {
            config: GbdtConfig { learning_rate: 0.25, ..stump_config() },
            base_score: -0.5,
            n_features: 2,
            trees: vec![
                stump(0, 1.0, -2.0, 3.0),
                stump(1, 0.5, 1.0, -1.0),
                stump(0, -2.0, 4.0, 0.5),
            ],
        };
        // dyadic values throughout so the hand trace is bit-exact
        // x = (0.0, 0.75): tree values -2 (0 <= 1), -1 (0.75 > 0.5), 0.5
        // (0 > -2); score = -0.5 + 0.25 * (-2 - 1 + 0.5) = -1.125
        assert_eq!(model.predict_score(&[0.0, 0.75]).unwrap(), -1.125);
        // x = (2.0, 0.5): tree values 3, 1, 0.5; score = -0.5 + 0.25 * 4.5
        assert_eq!(model.predict_score(&[2.0, 0.5]).unwrap(), 0.625);
        // x = (-3.0, 2.0): tree values -2, -1, 4; score = -0.5 + 0.25 * 1.0
        assert_eq!(model.predict_score(&[-3.0, 2.0]).unwrap(), -0.25);
    }

    #[test]
    fn rank_destinations_on_singleton_registry() {
        let registry: StationRegistry =
            [crate::domain::Station::new(4, "only", 41.9, -87.6, 10).unwrap()].into_iter().collect();
        let model = GbdtModel {
            config: stump_config(),
            base_score: 0.3,
            n_features: 13,
            trees: Vec::new(),
        };
        let start = NaiveDate::from_ymd_opt(2014, 7, 22).unwrap().and_hms_opt(8, 15, 0).unwrap();
        let ranked = rank_destinations(
            &model,
            &UserCategory::customer(),
            start,
            4,
            &registry,
            FeatureMask::All,
        )
        .unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].0, 4, "the self-loop is a valid destination");
    }

    #[test]
    fn proba_of_zero_score_is_half_and_logistic_table() {
        let model = GbdtModel {
            config: stump_config(),
            base_score: 0.0,
            n_features: 1,
            trees: Vec::new(),
        };
        assert_eq!(model.predict_proba(&[0.0]).unwrap(), 0.5);
        assert_eq!(model.classify(&[0.0], 0.5).unwrap(), 1, "boundary is inclusive");
        let one = GbdtModel { base_score: 1.0, ..model.clone() };
        assert!((one.predict_proba(&[0.0]).unwrap() - 0.7311).abs() < 1e-4);
        let huge = GbdtModel { base_score: 1e9, ..model };
        assert_eq!(huge.predict_proba(&[0.0]).unwrap(), 1.0 - PROBABILITY_EPSILON);
    }

    #[test]
    fn threshold_sweep_is_monotone() {
        let (registry, trips) = synth::synth_corpus(3, 400, 10).unwrap();
        let vectors = crate::features::extract_batch(&trips, &registry, FeatureMask::All).unwrap();
        let flat: Vec<f64> = vectors.iter().flat_map(|v| v.values().to_vec()).collect();
        let labels: Vec<u8> = (0..trips.len()).map(|i| (i % 2) as u8).collect();
        let config = GbdtConfig { n_trees: 5, max_depth: 3, min_samples_leaf: 5, ..stump_config() };
        let model = fit(&flat, 13, &labels, &config).unwrap();
        let mut last = usize::MAX;
        for t in [0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0] {
            let positives =
                model.classify_batch(&flat, t).unwrap().iter().filter(|&&c| c == 1).count();
            assert!(positives <= last, "positive count not monotone at threshold {t}");
            last = positives;
        }
    }

    #[test]
    fn deviance_non_increasing_without_subsampling() {
        let (registry, trips) = synth::synth_corpus(5, 600, 12).unwrap();
        let vectors = crate::features::extract_batch(&trips, &registry, FeatureMask::All).unwrap();
        let flat: Vec<f64> = vectors.iter().flat_map(|v| v.values().to_vec()).collect();
        // labels correlated with the hour feature so there is signal to fit
        let labels: Vec<u8> = vectors.iter().map(|v| u8::from(v.values()[5] >= 12.0)).collect();
        let config = GbdtConfig {
            n_trees: 25,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 10,
            subsample: 1.0,
            seed: 3,
        };
        let (_, trace) = fit_with_trace(&flat, 13, &labels, &config).unwrap();
        for pair in trace.train_deviance.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "deviance rose: {pair:?}");
        }
    }

    #[test]
    fn fixed_seed_fit_is_byte_identical() {
        let (registry, trips) = synth::synth_corpus(9, 500, 10).unwrap();
        let vectors = crate::features::extract_batch(&trips, &registry, FeatureMask::All).unwrap();
        let flat: Vec<f64> = vectors.iter().flat_map(|v| v.values().to_vec()).collect();
        let labels: Vec<u8> = (0..trips.len()).map(|i| (i % 3 == 0) as u8).collect();
        let config = GbdtConfig { n_trees: 8, max_depth: 4, min_samples_leaf: 5, subsample: 0.7, ..Default::default() };
        let a = fit(&flat, 13, &labels, &config).unwrap().to_json().unwrap();
        let b = fit(&flat, 13, &labels, &config).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let x = [-2.0, -1.0, 1.0, 2.0];
        let model = fit(&x, 1, &[0, 0, 1, 1], &stump_config()).unwrap();
        let json = model.to_json().unwrap();
        let back = GbdtModel::from_json(&json).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn input_validation() {
        let config = stump_config();
        assert!(fit(&[], 1, &[], &config).is_err());
        assert!(fit(&[1.0, 2.0], 1, &[1], &config).is_err());
        assert!(fit(&[f64::NAN], 1, &[1], &config).is_err());
        assert!(fit(&[1.0], 1, &[2], &config).is_err());
        let bad = GbdtConfig { subsample: 0.0, ..config };
        assert!(fit(&[1.0], 1, &[1], &bad).is_err());
        let model = fit(&[0.0, 1.0], 1, &[0, 1], &stump_config()).unwrap();
        assert!(matches!(
            model.predict_score(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rank_destinations_covers_registry() {
        let (registry, trips) = synth::synth_corpus(4, 300, 7).unwrap();
        let vectors = crate::features::extract_batch(&trips, &registry, FeatureMask::All).unwrap();
        let flat: Vec<f64> = vectors.iter().flat_map(|v| v.values().to_vec()).collect();
        let labels: Vec<u8> = (0..trips.len()).map(|i| (i % 2) as u8).collect();
        let config = GbdtConfig { n_trees: 4, max_depth: 3, min_samples_leaf: 5, ..stump_config() };
        let model = fit(&flat, 13, &labels, &config).unwrap();
        let user = UserCategory::subscriber(Gender::Male, Some(1985));
        let start = NaiveDate::from_ymd_opt(2014, 7, 22).unwrap().and_hms_opt(8, 15, 0).unwrap();
        let ranked = rank_destinations(&model, &user, start, 3, &registry, FeatureMask::All).unwrap();
        assert_eq!(ranked.len(), registry.len());
        assert!(ranked.windows(2).all(|w| w[0].1 >= w[1].1));
        // top entry matches an exhaustive scoring pass
        let best = registry
            .ids()
            .into_iter()
            .map(|d| {
                let v = crate::features::extract(
                    &user,
                    start,
                    crate::domain::StationPair::new(3, d),
                    &registry,
                    FeatureMask::All,
                )
                .unwrap();
                (d, model.predict_proba(v.values()).unwrap())
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .unwrap();
        assert_eq!(ranked[0], best);
        assert!(rank_destinations(&model, &user, start, 999, &registry, FeatureMask::All).is_err());
    }
}
