//! Tuple distance `δ` and the pairwise unionability classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default decision threshold on cosine distance for "unionable".
pub const UNIONABLE_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    #[default]
    Cosine,
    Euclidean,
    Manhattan,
}

impl std::str::FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "euclidean" => Ok(Self::Euclidean),
            "manhattan" => Ok(Self::Manhattan),
            other => Err(Error::InvalidParams(format!("unknown distance {other:?}"))),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl Distance {
    /// Distance between two validated vectors (same dimension, and nonzero
    /// for cosine). `δ(x, x)` is exactly 0.
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        if a == b {
            return 0.0;
        }
        match self {
            Distance::Cosine => (1.0 - dot(a, b) / (norm(a) * norm(b))).clamp(0.0, 2.0),
            Distance::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Distance::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

fn check_pair(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    if norm(u) == 0.0 || norm(v) == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(())
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    cosine_distance(u, v).map(|d| 1.0 - d)
}

/// `1 - u·v / (‖u‖‖v‖)`, in `[0, 2]`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    check_pair(u, v)?;
    Ok(Distance::Cosine.eval(u, v))
}

/// Label 1: `1 - cos`; label 0: `max(0, cos)`.
pub fn cosine_embedding_loss(e1: &[f64], e2: &[f64], label: u8) -> Result<f64> {
    let cos = cosine_similarity(e1, e2)?;
    match label {
        1 => Ok((1.0 - cos).max(0.0)),
        0 => Ok(cos.max(0.0)),
        other => Err(Error::InvalidParams(format!("label must be 0 or 1, got {other}"))),
    }
}

/// Unionable iff the cosine distance is strictly below `threshold`.
pub fn classify_unionable(e1: &[f64], e2: &[f64], threshold: f64) -> Result<bool> {
    Ok(cosine_distance(e1, e2)? < threshold)
}

/// `(TP + TN) / (TP + TN + FP + FN)`.
pub fn pair_accuracy(predictions: &[bool], labels: &[bool]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidParams(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Empty("prediction list"));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_reference_points() {
        assert_eq!(cosine_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_distance(&[1.0, 0.0], &[-1.0, 0.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
        assert!(cosine_distance(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn loss_branches() {
        assert_eq!(cosine_embedding_loss(&[0.3, 0.4], &[0.3, 0.4], 1).unwrap(), 0.0);
        // cos = 0.8
        let l = cosine_embedding_loss(&[1.0, 0.0], &[0.8, 0.6], 0).unwrap();
        assert!((l - 0.8).abs() < 1e-12);
        // cos = -0.5
        let l = cosine_embedding_loss(&[1.0, 0.0], &[-0.5, 0.75f64.sqrt()], 0).unwrap();
        assert_eq!(l, 0.0);
        assert!(cosine_embedding_loss(&[0.0], &[1.0], 1).is_err());
    }

    #[test]
    fn classifier_threshold_is_strict() {
        assert!(classify_unionable(&[1.0, 0.0], &[1.0, 0.0], UNIONABLE_THRESHOLD).unwrap());
        // cos = 0.3 -> distance 0.7 (up to rounding); exercise the boundary
        // through a vector pair whose distance is exactly representable.
        let d = cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(!classify_unionable(&[1.0, 0.0], &[0.0, 1.0], d).unwrap());
        assert!(!classify_unionable(&[1.0, 0.0], &[-1.0, 0.0], UNIONABLE_THRESHOLD).unwrap());
    }

    #[test]
    fn accuracy_formula() {
        // TP=3, TN=4, FP=2, FN=1
        let mut pred = vec![];
        let mut lab = vec![];
        for _ in 0..3 { pred.push(true); lab.push(true); }
        for _ in 0..4 { pred.push(false); lab.push(false); }
        for _ in 0..2 { pred.push(true); lab.push(false); }
        pred.push(false); lab.push(true);
        assert!((pair_accuracy(&pred, &lab).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(pair_accuracy(&lab, &lab).unwrap(), 1.0);
        let wrong: Vec<bool> = lab.iter().map(|x| !x).collect();
        assert_eq!(pair_accuracy(&wrong, &lab).unwrap(), 0.0);
        assert!(pair_accuracy(&[], &[]).is_err());
        assert!(pair_accuracy(&[true], &[]).is_err());
    }

    fn nonzero_vec() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 3)
            .prop_filter("nonzero", |v| norm(v) > 1e-6)
    }

    proptest! {
        #[test]
        fn cosine_metric_properties(u in nonzero_vec(), v in nonzero_vec()) {
            let duv = cosine_distance(&u, &v).unwrap();
            let dvu = cosine_distance(&v, &u).unwrap();
            prop_assert_eq!(duv, dvu);
            prop_assert!((0.0..=2.0).contains(&duv));
            prop_assert_eq!(cosine_distance(&u, &u).unwrap(), 0.0);
        }

        #[test]
        fn classifier_monotone_in_threshold(u in nonzero_vec(), v in nonzero_vec(),
                                            t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            if classify_unionable(&u, &v, lo).unwrap() {
                prop_assert!(classify_unionable(&u, &v, hi).unwrap());
            }
        }
    }
}
