//! Trainable no-reference blur-quality scorer.
//!
//! Handcrafted sharpness features are standardized on the training set and
//! mapped to a [0, 10] quality score by closed-form ridge regression fit on
//! a curated blur ladder (see [`crate::iqa_dataset`]). One model is trained
//! per blur type.

mod features;
mod ridge;

pub use features::{
    blur_features, BlurFeatureVector, BIAS_INDEX, FEATURE_COUNT, FEATURE_NAMES, MIN_FEATURE_SIDE,
};
pub use ridge::{train_ridge, train_ridge_with_unpenalized, Design};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::iqa_dataset::{BlurType, Manifest};
use crate::raster::{load_image, Raster};

pub const SCORE_MIN: f64 = 0.0;
pub const SCORE_MAX: f64 = 10.0;
const LOG_FLOOR: f64 = 1e-6;

/// Fitted scorer, serialized as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScorerModel {
    pub blur_type: BlurType,
    pub lambda: f64,
    /// Non-bias feature indices used by the model, ascending.
    pub kept_features: Vec<usize>,
    /// Non-bias features dropped for zero training variance.
    pub dropped_features: Vec<usize>,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    /// One weight per kept feature, then the unpenalized bias.
    pub weights: Vec<f64>,
    pub manifest_fingerprint: String,
    pub training_samples: usize,
}

/// Log-compress a raw feature; sharpness statistics span orders of magnitude.
fn compress(v: f64) -> f64 {
    (v + LOG_FLOOR).ln()
}

fn transformed(f: &BlurFeatureVector) -> [f64; FEATURE_COUNT] {
    let mut out = [1.0; FEATURE_COUNT];
    for (o, &v) in out.iter_mut().zip(f.as_slice()).take(BIAS_INDEX) {
        *o = compress(v);
    }
    out
}

/// SHA-256 of the manifest's canonical CSV form.
pub fn manifest_fingerprint(m: &Manifest) -> Result<String> {
    let digest = Sha256::digest(m.to_csv()?.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn load_gray(path: &Path) -> Result<Raster> {
    Ok(load_image(path)?.gray())
}

/// Feature vectors for every manifest image, in manifest order.
pub fn manifest_features(m: &Manifest) -> Result<Vec<BlurFeatureVector>> {
    m.samples
        .par_iter()
        .map(|s| blur_features(&load_gray(&s.image_path)?))
        .collect()
}

impl ScorerModel {
    /// Fit from precomputed features and target scores.
    pub fn fit(
        features: &[BlurFeatureVector],
        scores: &[f64],
        lambda: f64,
        blur_type: BlurType,
        manifest_fingerprint: String,
    ) -> Result<Self> {
        if features.is_empty() || features.len() != scores.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature vectors for {} scores",
                features.len(),
                scores.len()
            )));
        }
        let first = scores[0];
        if scores.iter().all(|&s| s == first) {
            return Err(Error::Degenerate(format!(
                "all training scores equal {first}; nothing to regress"
            )));
        }
        let rows: Vec<[f64; FEATURE_COUNT]> = features.iter().map(transformed).collect();
        let n = rows.len() as f64;
        let (mut kept, mut dropped, mut means, mut stds) = (vec![], vec![], vec![], vec![]);
        for k in 0..BIAS_INDEX {
            let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
            if var > 1e-20 {
                kept.push(k);
                means.push(mean);
                stds.push(var.sqrt());
            } else {
                dropped.push(k);
            }
        }
        let d = kept.len() + 1;
        if rows.len() < d {
            return Err(Error::Degenerate(format!(
                "{} samples for {d} parameters",
                rows.len()
            )));
        }
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in &rows {
            for (j, &k) in kept.iter().enumerate() {
                data.push((r[k] - means[j]) / stds[j]);
            }
            data.push(1.0);
        }
        let design = Design::new(rows.len(), d, data)?;
        let weights = train_ridge_with_unpenalized(&design, scores, lambda, &[d - 1])?;
        Ok(Self {
            blur_type,
            lambda,
            kept_features: kept,
            dropped_features: dropped,
            feature_mean: means,
            feature_std: stds,
            weights,
            manifest_fingerprint,
            training_samples: rows.len(),
        })
    }

    /// Unclamped linear prediction.
    pub fn raw_prediction(&self, f: &BlurFeatureVector) -> f64 {
        let t = transformed(f);
        let bias = *self.weights.last().expect("bias weight");
        self.kept_features
            .iter()
            .enumerate()
            .map(|(j, &k)| self.weights[j] * (t[k] - self.feature_mean[j]) / self.feature_std[j])
            .sum::<f64>()
            + bias
    }

    /// Prediction clamped to [0, 10].
    pub fn predict_features(&self, f: &BlurFeatureVector) -> f64 {
        let raw = self.raw_prediction(f);
        if raw.is_nan() {
            return SCORE_MIN;
        }
        raw.clamp(SCORE_MIN, SCORE_MAX)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.kept_features.len();
        if self.feature_mean.len() != k || self.feature_std.len() != k || self.weights.len() != k + 1
        {
            return Err(Error::Invalid("scorer model arrays have inconsistent lengths".into()));
        }
        if self.kept_features.iter().any(|&i| i >= BIAS_INDEX) {
            return Err(Error::Invalid("scorer model references unknown features".into()));
        }
        if self.feature_std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Invalid("scorer model has non-positive feature std".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::Json {
            context: "scorer model".into(),
            message: e.to_string(),
        })?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Fit a scorer on a curated manifest.
pub fn fit_scorer(train: &Manifest, lambda: f64) -> Result<ScorerModel> {
    if train.is_empty() {
        return Err(Error::Empty("training manifest".into()));
    }
    let features = manifest_features(train)?;
    let scores: Vec<f64> = train.samples.iter().map(|s| s.score).collect();
    ScorerModel::fit(
        &features,
        &scores,
        lambda,
        train.blur_type,
        manifest_fingerprint(train)?,
    )
}

/// Score one image (RGB is converted to luma).
pub fn predict_score(model: &ScorerModel, image: &Raster) -> Result<f64> {
    Ok(model.predict_features(&blur_features(&image.gray())?))
}

/// Held-out quality of a scorer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScorerEvaluation {
    pub samples: usize,
    pub mae: f64,
    pub spearman: f64,
    /// Set when either ranking is constant and the correlation is undefined.
    pub spearman_degenerate: bool,
    pub pairwise_accuracy: f64,
    pub pairs: usize,
}

/// One prediction with its ground truth and grouping key.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredPrediction {
    pub source: PathBuf,
    pub truth: f64,
    pub predicted: f64,
}

/// Average ranks (1-based), ties share the mean rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation, `None` if either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

/// MAE, Spearman rho and same-source pairwise ordering accuracy.
///
/// A pair counts as ordered when the prediction difference has the same
/// strict sign as the truth difference; pairs with equal truth are ignored.
pub fn summarize_predictions(preds: &[ScoredPrediction]) -> Result<ScorerEvaluation> {
    if preds.is_empty() {
        return Err(Error::Empty("no predictions to evaluate".into()));
    }
    let n = preds.len() as f64;
    let mae = preds.iter().map(|p| (p.predicted - p.truth).abs()).sum::<f64>() / n;
    let truth: Vec<f64> = preds.iter().map(|p| p.truth).collect();
    let predicted: Vec<f64> = preds.iter().map(|p| p.predicted).collect();
    let rho = spearman(&predicted, &truth);

    let mut groups: BTreeMap<&Path, Vec<&ScoredPrediction>> = BTreeMap::new();
    for p in preds {
        groups.entry(p.source.as_path()).or_default().push(p);
    }
    let (mut pairs, mut ordered) = (0usize, 0usize);
    for members in groups.values() {
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                let truth_diff = a.truth - b.truth;
                if truth_diff == 0.0 {
                    continue;
                }
                pairs += 1;
                let pred_diff = a.predicted - b.predicted;
                if pred_diff != 0.0 && pred_diff.signum() == truth_diff.signum() {
                    ordered += 1;
                }
            }
        }
    }
    Ok(ScorerEvaluation {
        samples: preds.len(),
        mae,
        spearman: rho.unwrap_or(0.0),
        spearman_degenerate: rho.is_none(),
        pairwise_accuracy: if pairs == 0 {
            0.0
        } else {
            ordered as f64 / pairs as f64
        },
        pairs,
    })
}

/// Predict every image of a held-out manifest.
pub fn predict_manifest(model: &ScorerModel, test: &Manifest) -> Result<Vec<ScoredPrediction>> {
    let features = manifest_features(test)?;
    Ok(test
        .samples
        .iter()
        .zip(&features)
        .map(|(s, f)| ScoredPrediction {
            source: s.source_hr_path.clone(),
            truth: s.score,
            predicted: model.predict_features(f),
        })
        .collect())
}

pub fn evaluate_scorer(model: &ScorerModel, test: &Manifest) -> Result<ScorerEvaluation> {
    if test.is_empty() {
        return Err(Error::Empty("test manifest".into()));
    }
    summarize_predictions(&predict_manifest(model, test)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(source: &str, truth: f64, predicted: f64) -> ScoredPrediction {
        ScoredPrediction {
            source: source.into(),
            truth,
            predicted,
        }
    }

    #[test]
    fn perfect_and_constant_predictors() {
        let perfect: Vec<_> = (0..=10).map(|l| pred("a", l as f64, l as f64)).collect();
        let e = summarize_predictions(&perfect).unwrap();
        assert_eq!((e.mae, e.spearman, e.pairwise_accuracy), (0.0, 1.0, 1.0));
        assert!(!e.spearman_degenerate);

        let constant: Vec<_> = (0..=10).map(|l| pred("a", l as f64, 5.0)).collect();
        let e = summarize_predictions(&constant).unwrap();
        assert_eq!(e.spearman, 0.0);
        assert!(e.spearman_degenerate);
        assert_eq!(e.pairwise_accuracy, 0.0);
        assert!(summarize_predictions(&[]).is_err());
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        let rho = spearman(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap();
        assert!((rho + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pairwise_only_within_source() {
        let preds = vec![pred("a", 10.0, 9.0), pred("a", 0.0, 1.0), pred("b", 5.0, 0.0)];
        let e = summarize_predictions(&preds).unwrap();
        assert_eq!((e.pairs, e.pairwise_accuracy), (1, 1.0));
    }

    fn toy_features(level: u32) -> BlurFeatureVector {
        let s = 1.0 / (1.0 + f64::from(level));
        BlurFeatureVector([s.powi(4), s, 0.5 * s, s * s, 0.3 * s, 0.7, 1.0])
    }

    #[test]
    fn fit_predict_and_clamp() {
        let feats: Vec<_> = (0..=10).map(toy_features).collect();
        let scores: Vec<f64> = (0..=10).map(|l| 10.0 - l as f64).collect();
        let m = ScorerModel::fit(&feats, &scores, 1e-3, BlurType::Gaussian, "x".into()).unwrap();
        // edge density is constant here and gets dropped
        assert_eq!(m.dropped_features, vec![5]);
        let preds: Vec<f64> = feats.iter().map(|f| m.predict_features(f)).collect();
        assert!(preds.iter().all(|p| (0.0..=10.0).contains(p)));
        assert!(preds.windows(2).all(|w| w[1] < w[0]), "{preds:?}");
        let again = ScorerModel::fit(&feats, &scores, 1e-3, BlurType::Gaussian, "x".into()).unwrap();
        assert_eq!(again.to_json(), m.to_json());
        assert_eq!(ScorerModel::from_json(&m.to_json()).unwrap(), m);

        let mut clamp = m.clone();
        *clamp.weights.last_mut().unwrap() += 14.3 - clamp.raw_prediction(&feats[0]);
        assert!((clamp.raw_prediction(&feats[0]) - 14.3).abs() < 1e-9);
        assert_eq!(clamp.predict_features(&feats[0]), 10.0);
    }

    #[test]
    fn degenerate_training_set() {
        let feats: Vec<_> = (0..5).map(toy_features).collect();
        assert!(matches!(
            ScorerModel::fit(&feats, &[3.0; 5], 1.0, BlurType::Box, String::new()),
            Err(Error::Degenerate(_))
        ));
    }
}
